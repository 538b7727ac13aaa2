//! Long-time on-diagonal kernels in dimension one.
//!
//! In d = 1 the symmetrized generator is tridiagonal, so a partial
//! eigendecomposition (Sturm-sequence bisection plus inverse iteration)
//! evaluates `p_t(x0, x0)` on time grids far beyond the reach of
//! uniformization: only eigenvalues below `~40 / t_min` contribute, and the
//! dropped spectral tail is bounded by `e^{-lambda_cut * t_min}`.

use crate::error::{Error, Result};
use crate::lattice::{LatticeParams, PowTable, Site};

/// One grid point of a d=1 on-diagonal evaluation.
#[derive(Debug, Clone, Copy)]
pub struct OndiagSample {
    pub t: f64,
    /// `p_t(x0, x0)` (density with respect to `nu`) of the reflected walk.
    pub p00: f64,
    /// Probability that the free walk has left `[-R, R]` by time `t`.
    pub exit_mass: f64,
}

const MAX_EIGENPAIRS: usize = 5000;
const LOG_TAIL: f64 = 40.0; // e^{-40} ~ 4e-18 spectral-tail bound

struct Tridiag {
    diag: Vec<f64>,
    off: Vec<f64>,
    nu: Vec<f64>,
}

/// Symmetrized tridiagonal matrix of the boxed d=1 walk.
fn build_tridiag(params: &LatticeParams, radius: i64, absorbing: bool) -> Tridiag {
    let n = (2 * radius + 1) as usize;
    let mut nu_pow = PowTable::new(params.alpha());
    let mut mu_pow = PowTable::new(-params.alpha());
    let nu: Vec<f64> = (0..n).map(|i| nu_pow.get((i as i64 - radius).abs())).collect();
    let mut off = Vec::with_capacity(n - 1);
    let mut diag = vec![0.0f64; n];
    for i in 0..n - 1 {
        let x = i as i64 - radius;
        let mu = mu_pow.get(x.abs().max((x + 1).abs()));
        off.push(-mu / (nu[i] * nu[i + 1]).sqrt());
        diag[i] += mu / nu[i];
        diag[i + 1] += mu / nu[i + 1];
    }
    if absorbing {
        let mu_edge = mu_pow.get(radius + 1);
        diag[0] += mu_edge / nu[0];
        diag[n - 1] += mu_edge / nu[n - 1];
    }
    Tridiag { diag, off, nu }
}

/// Number of eigenvalues strictly below `lambda`, by the LDL Sturm count.
fn sturm_count(diag: &[f64], off: &[f64], lambda: f64) -> usize {
    let tiny = f64::MIN_POSITIVE;
    let mut count = 0usize;
    let mut d = diag[0] - lambda;
    if d == 0.0 {
        d = -tiny;
    }
    if d < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        d = diag[i] - lambda - off[i - 1] * off[i - 1] / d;
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Tridiagonal LU with partial pivoting for `T - lambda I`.
struct TriLu {
    d: Vec<f64>,
    du1: Vec<f64>,
    du2: Vec<f64>,
    dl: Vec<f64>,
    piv: Vec<bool>,
}

fn factor_shifted(diag: &[f64], off: &[f64], lambda: f64) -> TriLu {
    let n = diag.len();
    let scale = diag
        .iter()
        .chain(off.iter())
        .fold(1.0f64, |m, &v| m.max(v.abs()));
    let tiny = 1e-30 * scale;
    let mut d: Vec<f64> = diag.iter().map(|&a| a - lambda).collect();
    let mut du1 = off.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut dl = off.to_vec();
    let mut piv = vec![false; n - 1];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let m = dl[i] / d[i];
            dl[i] = m;
            d[i + 1] -= m * du1[i];
        } else {
            piv[i] = true;
            let m = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = m;
            let next_d = d[i + 1];
            d[i + 1] = du1[i] - m * next_d;
            du1[i] = next_d;
            if i + 1 < n - 1 {
                du2[i] = du1[i + 1];
                du1[i + 1] = -m * du1[i + 1];
            }
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    TriLu { d, du1, du2, dl, piv }
}

impl TriLu {
    fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 0..n - 1 {
            if self.piv[i] {
                rhs.swap(i, i + 1);
            }
            rhs[i + 1] -= self.dl[i] * rhs[i];
        }
        rhs[n - 1] /= self.d[n - 1];
        if n >= 2 {
            rhs[n - 2] = (rhs[n - 2] - self.du1[n - 2] * rhs[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            rhs[i] = (rhs[i] - self.du1[i] * rhs[i + 1] - self.du2[i] * rhs[i + 2]) / self.d[i];
        }
    }
}

/// All eigenpairs with eigenvalue below `lambda_cut`, in increasing order.
fn partial_eigs(diag: &[f64], off: &[f64], lambda_cut: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = diag.len();
    let k = sturm_count(diag, off, lambda_cut);
    if k > MAX_EIGENPAIRS {
        return Err(Error::NoConvergence(format!(
            "{k} eigenvalues below cut {lambda_cut}; grid too dense for the spectral path"
        )));
    }
    let scale = diag
        .iter()
        .chain(off.iter())
        .fold(1.0f64, |m, &v| m.max(v.abs()));
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
    for j in 0..k {
        // bisect for the (j+1)-th smallest eigenvalue
        let mut lo = -1e-9 * scale;
        let mut hi = lambda_cut;
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(diag, off, mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * scale {
                break;
            }
        }
        let lambda = 0.5 * (lo + hi);
        // inverse iteration from a deterministic start
        let lu = factor_shifted(diag, off, lambda);
        let mut v: Vec<f64> = (0..n)
            .map(|i| {
                let h = (i as u64 ^ (j as u64) << 32).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        for _ in 0..3 {
            lu.solve_in_place(&mut v);
            // keep clustered eigenvectors mutually orthogonal
            for (lp, vp) in pairs.iter().rev() {
                if (lambda - lp).abs() > 1e-7 * scale {
                    break;
                }
                let c: f64 = v.iter().zip(vp).map(|(a, b)| a * b).sum();
                for (vi, &pi) in v.iter_mut().zip(vp) {
                    *vi -= c * pi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for vi in &mut v {
                *vi /= norm;
            }
        }
        pairs.push((lambda, v));
    }
    Ok(pairs)
}

/// On-diagonal reflected kernel and free-walk exit mass at each grid time.
pub fn ondiag_grid_1d(
    params: &LatticeParams,
    radius: i64,
    x0: &Site,
    ts: &[f64],
    budget: u64,
) -> Result<Vec<OndiagSample>> {
    if params.d() != 1 {
        return Err(Error::InvalidParam("spectral path requires d = 1".into()));
    }
    if radius < 1 {
        return Err(Error::InvalidParam("radius must be >= 1".into()));
    }
    let n = 2 * radius as u128 + 1;
    if n > budget as u128 {
        return Err(Error::Budget {
            needed: n,
            budget,
        });
    }
    if x0.0.len() != 1 || x0.0[0].abs() > radius - 1 {
        return Err(Error::Domain(
            "x0 must be a d=1 site strictly inside the box".into(),
        ));
    }
    if ts.is_empty() || ts.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Domain("time grid must be positive".into()));
    }
    let t_min = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let i0 = (x0.0[0] + radius) as usize;

    let refl = build_tridiag(params, radius, false);
    let lambda_cut = LOG_TAIL / t_min;
    let refl_pairs = partial_eigs(&refl.diag, &refl.off, lambda_cut)?;

    let abs = build_tridiag(params, radius, true);
    let abs_pairs = partial_eigs(&abs.diag, &abs.off, lambda_cut)?;
    let sqrt_nu: Vec<f64> = abs.nu.iter().map(|&v| v.sqrt()).collect();
    let overlaps: Vec<(f64, f64)> = abs_pairs
        .iter()
        .map(|(lam, psi)| {
            let s: f64 = psi.iter().zip(&sqrt_nu).map(|(a, b)| a * b).sum();
            (*lam, psi[i0] * s / sqrt_nu[i0])
        })
        .collect();

    let nu0 = refl.nu[i0];
    Ok(ts
        .iter()
        .map(|&t| {
            let prob: f64 = refl_pairs
                .iter()
                .map(|(lam, psi)| (-lam * t).exp() * psi[i0] * psi[i0])
                .sum();
            let survival: f64 = overlaps.iter().map(|(lam, c)| (-lam * t).exp() * c).sum();
            OndiagSample {
                t,
                p00: prob / nu0,
                exit_mass: (1.0 - survival).clamp(0.0, 1.0),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_generator, transition_distribution, Boundary};
    use crate::lattice::{BoxRegion, DEFAULT_SITE_BUDGET};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, SymmetricEigen};
    use smallvec::SmallVec;

    fn site1(x: i64) -> Site {
        Site::new(SmallVec::from_slice(&[x]))
    }

    #[test]
    fn partial_eigs_match_dense_solver() {
        let p = LatticeParams::new(1, 1.0).unwrap();
        let tri = build_tridiag(&p, 10, false);
        let n = tri.diag.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = tri.diag[i];
            if i + 1 < n {
                a[(i, i + 1)] = tri.off[i];
                a[(i + 1, i)] = tri.off[i];
            }
        }
        let mut dense: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        let cut = 1.5;
        let pairs = partial_eigs(&tri.diag, &tri.off, cut).unwrap();
        let expect: Vec<f64> = dense.into_iter().filter(|&l| l < cut).collect();
        assert_eq!(pairs.len(), expect.len());
        for ((lam, psi), want) in pairs.iter().zip(&expect) {
            assert!((lam - want).abs() < 1e-10, "{lam} vs {want}");
            // eigenvector residual
            for i in 0..n {
                let mut av = tri.diag[i] * psi[i];
                if i > 0 {
                    av += tri.off[i - 1] * psi[i - 1];
                }
                if i + 1 < n {
                    av += tri.off[i] * psi[i + 1];
                }
                assert!((av - lam * psi[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn matches_uniformization_at_moderate_time() {
        let p = LatticeParams::new(1, -0.5).unwrap();
        let region = BoxRegion::new(Site::origin(1), 200, DEFAULT_SITE_BUDGET).unwrap();
        let refl = build_generator(&p, &region, Boundary::Reflecting).unwrap();
        let abs = build_generator(&p, &region, Boundary::Absorbing).unwrap();
        let samples = ondiag_grid_1d(&p, 200, &site1(0), &[5.0, 20.0], DEFAULT_SITE_BUDGET).unwrap();
        for s in &samples {
            let r = transition_distribution(&refl, &site1(0), s.t, 1e-13).unwrap();
            let a = transition_distribution(&abs, &site1(0), s.t, 1e-13).unwrap();
            let i0 = region.index_of(&site1(0)).unwrap();
            assert_relative_eq!(s.p00, r.probs[i0], max_relative = 1e-7);
            assert!((s.exit_mass - a.escaped_mass).abs() < 1e-8);
        }
    }

    #[test]
    fn long_time_grid_reference_values() {
        let p = LatticeParams::new(1, -0.5).unwrap();
        let ts = [100.0, 200.0, 500.0, 1000.0];
        let want = [0.0279228, 0.01981882, 0.01257345, 0.00890294];
        let samples = ondiag_grid_1d(&p, 4000, &site1(0), &ts, DEFAULT_SITE_BUDGET).unwrap();
        for (s, w) in samples.iter().zip(&want) {
            assert_relative_eq!(s.p00, *w, max_relative = 3e-4);
            assert!(s.exit_mass < 0.05, "exit mass {}", s.exit_mass);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p2 = LatticeParams::new(2, 0.0).unwrap();
        assert!(ondiag_grid_1d(&p2, 10, &Site::origin(2), &[1.0], 1000).is_err());
        let p1 = LatticeParams::new(1, 0.0).unwrap();
        assert!(ondiag_grid_1d(&p1, 10, &site1(10), &[1.0], 1000).is_err());
        assert!(ondiag_grid_1d(&p1, 10, &site1(0), &[], 1000).is_err());
        assert!(ondiag_grid_1d(&p1, 10, &site1(0), &[0.0], 1000).is_err());
        assert!(ondiag_grid_1d(&p1, 1000, &site1(0), &[1.0], 100).is_err());
    }
}
