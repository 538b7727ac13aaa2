//! Transition distributions by uniformization.
//!
//! With `Lambda` the maximum total exit rate, the semigroup is the Poisson
//! mixture `e^{tQ} = sum_k Pois(Lambda t, k) P^k` of powers of the
//! (sub)stochastic matrix `P = I + Q / Lambda`. Truncating where the Poisson
//! tail drops below the requested tolerance gives an a-priori total-variation
//! error bound, and every intermediate quantity stays nonnegative.

use crate::error::{Error, Result};
use crate::lattice::Site;

use super::SparseGenerator;

#[derive(Debug, Clone)]
pub struct TransitionResult {
    /// `probs[y] ~ P_x0(X_t = y, alive)` within `tol` in total variation.
    pub probs: Vec<f64>,
    /// Absorbing boxes: `1 - sum(probs)`. Zero for reflecting boxes.
    pub escaped_mass: f64,
    /// Poisson terms actually applied.
    pub steps: usize,
}

fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n < 32 {
        return (2..=n).map(|k| (k as f64).ln()).sum();
    }
    // Stirling series with 1/(12n) and 1/(360n^3) corrections
    let x = n as f64;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x * x)
}

/// Poisson(lam) weights covering all but at most `tail` of the mass.
/// Returns (first index, weights).
fn poisson_window(lam: f64, tail: f64) -> (usize, Vec<f64>) {
    let mode = lam.floor() as usize;
    let ln_pmode = mode as f64 * lam.ln() - lam - ln_factorial(mode);
    let p_mode = ln_pmode.exp();
    // walk down from the mode
    let mut below = Vec::new();
    let mut p = p_mode;
    let mut k = mode;
    let mut mass = p_mode;
    while k > 0 {
        p *= k as f64 / lam;
        if p < tail * 1e-3 && mass > 0.5 {
            break;
        }
        below.push(p);
        mass += p;
        k -= 1;
    }
    let k_lo = k.min(mode);
    let start = if k == 0 { 0 } else { k_lo };
    let mut weights: Vec<f64> = below.into_iter().rev().collect();
    weights.push(p_mode);
    // walk up from the mode until the remaining upper tail is below `tail`
    let mut p = p_mode;
    let mut k = mode;
    loop {
        if mass >= 1.0 - tail * 0.5 {
            break;
        }
        k += 1;
        p *= lam / k as f64;
        weights.push(p);
        mass += p;
        if k > mode + 20 + (40.0 * lam.sqrt()) as usize {
            break;
        }
    }
    (start, weights)
}

fn apply_stochastic(gen: &SparseGenerator, lambda: f64, v: &[f64], out: &mut [f64]) {
    for (o, (&vi, &di)) in out.iter_mut().zip(v.iter().zip(&gen.diag)) {
        *o = vi * (1.0 - di / lambda);
    }
    for i in 0..gen.n() {
        let vi = v[i];
        if vi == 0.0 {
            continue;
        }
        let scale = vi / lambda;
        for (j, q) in gen.row(i) {
            out[j] += scale * q;
        }
    }
}

/// Distribution of the boxed walk at time `t` started from `x0`.
pub fn transition_distribution(
    gen: &SparseGenerator,
    x0: &Site,
    t: f64,
    tol: f64,
) -> Result<TransitionResult> {
    let i0 = gen
        .region
        .index_of(x0)
        .ok_or_else(|| Error::Domain(format!("start site {x0} outside region")))?;
    let mut init = vec![0.0; gen.n()];
    init[i0] = 1.0;
    transition_from(gen, init, t, tol)
}

/// Same as `transition_distribution` but from an arbitrary initial
/// distribution; lets a time grid be walked incrementally.
pub fn transition_from(
    gen: &SparseGenerator,
    init: Vec<f64>,
    t: f64,
    tol: f64,
) -> Result<TransitionResult> {
    if t < 0.0 {
        return Err(Error::Domain("time must be >= 0".into()));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Domain("tol must lie in (0, 1)".into()));
    }
    let lambda = gen.lambda_max;
    let lam_t = lambda * t;
    if lam_t == 0.0 {
        let total: f64 = init.iter().sum();
        return Ok(TransitionResult {
            probs: init,
            escaped_mass: (1.0 - total).max(0.0),
            steps: 0,
        });
    }
    let (start, weights) = poisson_window(lam_t, tol);
    let k_hi = start + weights.len() - 1;
    let mut v = init;
    let mut w = vec![0.0; v.len()];
    let mut acc = vec![0.0; v.len()];
    for k in 0..=k_hi {
        if k >= start {
            let wt = weights[k - start];
            for (a, &vi) in acc.iter_mut().zip(&v) {
                *a += wt * vi;
            }
        }
        if k < k_hi {
            apply_stochastic(gen, lambda, &v, &mut w);
            std::mem::swap(&mut v, &mut w);
        }
    }
    let total: f64 = acc.iter().sum();
    Ok(TransitionResult {
        probs: acc,
        escaped_mass: (1.0 - total).max(0.0),
        steps: k_hi,
    })
}

/// Transition distributions at every time in the (strictly increasing) grid,
/// computed by chaining from one grid point to the next.
pub fn transition_grid(
    gen: &SparseGenerator,
    x0: &Site,
    ts: &[f64],
    tol: f64,
) -> Result<Vec<TransitionResult>> {
    if ts.windows(2).any(|w| w[1] <= w[0]) || ts.first().is_some_and(|&t| t <= 0.0) {
        return Err(Error::Domain("time grid must be strictly increasing and positive".into()));
    }
    let i0 = gen
        .region
        .index_of(x0)
        .ok_or_else(|| Error::Domain(format!("start site {x0} outside region")))?;
    let leg_tol = tol / ts.len() as f64;
    let mut cur = vec![0.0; gen.n()];
    cur[i0] = 1.0;
    let mut prev_t = 0.0;
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let res = transition_from(gen, cur, t - prev_t, leg_tol)?;
        cur = res.probs.clone();
        prev_t = t;
        out.push(res);
    }
    // escaped mass is cumulative along the chain
    for r in &mut out {
        let total: f64 = r.probs.iter().sum();
        r.escaped_mass = (1.0 - total).max(0.0);
    }
    Ok(out)
}
