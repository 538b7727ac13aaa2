//! Joint simulation of two independent walks and collision accounting.
//!
//! Collision intervals are exact: one opens when a jump makes the two sites
//! equal (or at time zero for a shared start) and closes at the very next
//! jump of either walk, so every recorded interval has positive length and
//! endpoints that are jump events or the global start/horizon.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::{LatticeParams, Site};
use crate::walk::{EndReason, RngStream, Trajectory, Walker};

#[derive(Debug, Clone)]
pub struct JointTrajectory {
    pub traj_a: Trajectory,
    pub traj_b: Trajectory,
    pub collision_intervals: Vec<(f64, f64, Site)>,
}

/// Annulus `{ x : inner < |x|_inf <= outer }`.
#[derive(Debug, Clone, Copy)]
pub struct Annulus {
    pub inner: i64,
    pub outer: i64,
}

impl Annulus {
    pub fn contains_linf(&self, linf: i64) -> bool {
        linf > self.inner && linf <= self.outer
    }
}

/// Time caps for the collision integral: exit times of each walk plus a
/// hard horizon.
#[derive(Debug, Clone, Copy)]
pub struct Caps {
    pub theta_a: f64,
    pub theta_b: f64,
    pub t_cap: f64,
}

#[derive(Debug, Clone)]
pub struct AnnulusExperimentConfig {
    pub params: LatticeParams,
    pub k: u32,
    pub lambda: i64,
    pub trials: u64,
    pub seed: u64,
    pub step_budget: u64,
}

impl AnnulusExperimentConfig {
    /// Experiment horizon `t_k = lambda^{2k(1+alpha)}`.
    pub fn t_k(&self) -> f64 {
        (self.lambda as f64).powf(2.0 * self.k as f64 * (1.0 + self.params.alpha()))
    }
}

fn linf_of(coords: &[i64]) -> i64 {
    coords.iter().map(|c| c.abs()).max().unwrap_or(0)
}

/// Merged event loop over two walkers on a common clock.
///
/// `on_jump(t, is_a, coords)` sees every applied jump; `on_interval` sees
/// every closed collision interval `(start, end, site coords)`, with the
/// final one closed at the horizon if still open. Either callback returns
/// `true` to stop the run; the return value is the actual end time.
fn drive_joint(
    params: &LatticeParams,
    a0: &Site,
    b0: &Site,
    horizon: f64,
    rng_a: ChaCha8Rng,
    rng_b: ChaCha8Rng,
    step_budget: u64,
    mut on_jump: impl FnMut(f64, bool, &[i64]) -> bool,
    mut on_interval: impl FnMut(f64, f64, &[i64]) -> bool,
) -> Result<f64> {
    let mut wa = Walker::new(params, a0, rng_a, step_budget);
    let mut wb = Walker::new(params, b0, rng_b, step_budget);
    let mut next_a = wa.sample_jump()?;
    let mut next_b = wb.sample_jump()?;
    let mut open: Option<f64> = if a0 == b0 { Some(0.0) } else { None };
    loop {
        let ta = wa.time + next_a.0;
        let tb = wb.time + next_b.0;
        let (t, is_a) = if ta <= tb { (ta, true) } else { (tb, false) };
        if t > horizon {
            if let Some(s) = open {
                if s < horizon {
                    on_interval(s, horizon, &wa.coords);
                }
            }
            return Ok(horizon);
        }
        // any open interval closes at this jump, at the pre-jump common site
        if let Some(s) = open.take() {
            if on_interval(s, t, &wa.coords) {
                return Ok(t);
            }
        }
        if is_a {
            wa.jump_to(t, next_a.1.clone());
            next_a = wa.sample_jump()?;
        } else {
            wb.jump_to(t, next_b.1.clone());
            next_b = wb.sample_jump()?;
        }
        if wa.coords == wb.coords {
            open = Some(t);
        }
        let jumped: &SmallVec<[i64; 4]> = if is_a { &wa.coords } else { &wb.coords };
        if on_jump(t, is_a, jumped) {
            return Ok(t);
        }
    }
}

/// Run two independent walks to a common horizon, recording both paths and
/// all collision intervals.
pub fn joint_run(
    params: &LatticeParams,
    a0: &Site,
    b0: &Site,
    horizon: f64,
    stream_a: RngStream,
    stream_b: RngStream,
    step_budget: u64,
) -> Result<JointTrajectory> {
    if !(horizon > 0.0) {
        return Err(Error::Domain("horizon must be > 0".into()));
    }
    if a0.0.len() != params.d() || b0.0.len() != params.d() {
        return Err(Error::InvalidParam("start dimension mismatch".into()));
    }
    let mut events_a = Vec::new();
    let mut events_b = Vec::new();
    let mut intervals = Vec::new();
    drive_joint(
        params,
        a0,
        b0,
        horizon,
        stream_a.rng(),
        stream_b.rng(),
        step_budget,
        |t, is_a, coords| {
            let ev = (t, Site::new(SmallVec::from_slice(coords)));
            if is_a {
                events_a.push(ev);
            } else {
                events_b.push(ev);
            }
            false
        },
        |s, e, coords| {
            intervals.push((s, e, Site::new(SmallVec::from_slice(coords))));
            false
        },
    )?;
    Ok(JointTrajectory {
        traj_a: Trajectory {
            start: a0.clone(),
            events: events_a,
            end_time: horizon,
            end_reason: EndReason::Horizon,
        },
        traj_b: Trajectory {
            start: b0.clone(),
            events: events_b,
            end_time: horizon,
            end_reason: EndReason::Horizon,
        },
        collision_intervals: intervals,
    })
}

/// Exact capped collision local time in the annulus:
/// `sum of |interval ∩ [0, min(theta_a, theta_b, t_cap)]|` over intervals
/// whose site lies in the annulus.
pub fn collision_local_time(jt: &JointTrajectory, annulus: &Annulus, caps: &Caps) -> f64 {
    let cap = caps.theta_a.min(caps.theta_b).min(caps.t_cap);
    jt.collision_intervals
        .iter()
        .filter(|(_, _, u)| annulus.contains_linf(u.linf()))
        .map(|&(s, e, _)| (e.min(cap) - s).max(0.0))
        .sum()
}

/// Estimate `P(H_k > 0)`: starts drawn uniformly from `B(0, lambda^k)`,
/// joint run capped at `2 t_k` and at either walk reaching `lambda^{k+1}`,
/// success iff a positive collision interval opens in the annulus
/// `(lambda^k, 2 lambda^k]`. Returns the success frequency and its binomial
/// standard error.
pub fn annulus_collision_experiment(cfg: &AnnulusExperimentConfig) -> Result<(f64, f64)> {
    if cfg.params.d() != 2 {
        return Err(Error::Domain(
            "annulus collision experiment requires d = 2".into(),
        ));
    }
    if cfg.lambda < 2 {
        return Err(Error::InvalidParam(
            "lambda must be >= 2 (annulus nonempty)".into(),
        ));
    }
    if cfg.k < 1 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if cfg.trials < 100 {
        return Err(Error::InsufficientSamples {
            have: cfg.trials as usize,
            need: 100,
        });
    }
    let rk = cfg
        .lambda
        .checked_pow(cfg.k)
        .ok_or_else(|| Error::InvalidParam("lambda^k overflows".into()))?;
    let cap_radius = cfg
        .lambda
        .checked_pow(cfg.k + 1)
        .ok_or_else(|| Error::InvalidParam("lambda^(k+1) overflows".into()))?;
    let annulus = Annulus {
        inner: rk,
        outer: 2 * rk,
    };
    let horizon = 2.0 * cfg.t_k();
    let mut successes = 0u64;
    for trial in 0..cfg.trials {
        let mut start_rng = RngStream::new(cfg.seed, 3 * trial).rng();
        let draw = |rng: &mut ChaCha8Rng| {
            Site::new(SmallVec::from_slice(&[
                rng.gen_range(-rk..=rk),
                rng.gen_range(-rk..=rk),
            ]))
        };
        let a0 = draw(&mut start_rng);
        let b0 = draw(&mut start_rng);
        let mut success = false;
        drive_joint(
            &cfg.params,
            &a0,
            &b0,
            horizon,
            RngStream::new(cfg.seed, 3 * trial + 1).rng(),
            RngStream::new(cfg.seed, 3 * trial + 2).rng(),
            cfg.step_budget,
            |_, _, coords| linf_of(coords) >= cap_radius,
            |s, e, coords| {
                if e > s && annulus.contains_linf(linf_of(coords)) {
                    success = true;
                    true
                } else {
                    false
                }
            },
        )?;
        if success {
            successes += 1;
        }
    }
    let n = cfg.trials as f64;
    let p = successes as f64 / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

/// Estimate `P(Z_k > 0)` and `E[Z_k]` for `d >= 3`: both walks start at the
/// origin, the integral over the annulus `(2^k, 2^{k+1}]` is truncated at
/// `horizon_multiplier * 2^{k(2 + 2 alpha)}`.
pub fn zk_census(
    params: &LatticeParams,
    k: u32,
    horizon_multiplier: f64,
    trials: u64,
    seed: u64,
    step_budget: u64,
) -> Result<(f64, f64)> {
    if params.d() < 3 {
        return Err(Error::Domain("Z_k census requires d >= 3".into()));
    }
    if k < 1 || trials == 0 {
        return Err(Error::InvalidParam("k and trials must be positive".into()));
    }
    if !(horizon_multiplier > 0.0) {
        return Err(Error::InvalidParam(
            "horizon multiplier must be positive".into(),
        ));
    }
    let annulus = Annulus {
        inner: 1i64 << k,
        outer: 1i64 << (k + 1),
    };
    let horizon = horizon_multiplier * 2f64.powf(k as f64 * (2.0 + 2.0 * params.alpha()));
    let origin = Site::origin(params.d());
    let mut positive = 0u64;
    let mut total = 0.0f64;
    for trial in 0..trials {
        let mut z = 0.0f64;
        drive_joint(
            params,
            &origin,
            &origin,
            horizon,
            RngStream::new(seed, 2 * trial).rng(),
            RngStream::new(seed, 2 * trial + 1).rng(),
            step_budget,
            |_, _, _| false,
            |s, e, coords| {
                if annulus.contains_linf(linf_of(coords)) {
                    z += e - s;
                }
                false
            },
        )?;
        if z > 0.0 {
            positive += 1;
        }
        total += z;
    }
    let n = trials as f64;
    Ok((positive as f64 / n, total / n))
}
