//! Event-driven Monte Carlo simulation of the variable-speed walk.
//!
//! The walk holds at `x` for an exponential time with mean `nu_x / mu_x`,
//! then jumps to a neighbor `y` with probability `mu_xy / mu_x`. Everything
//! is exact event arithmetic — no time discretization — so downstream
//! collision bookkeeping can rely on interval endpoints being jump events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, LatticeParams, PowTable, Site};

pub const DEFAULT_STEP_BUDGET: u64 = 100_000_000;

/// Named RNG stream: trial `i` of an experiment uses `stream_id = i`, so
/// trials are independent yet individually reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndReason {
    Horizon,
    ExitedRegion,
    HitTarget,
}

/// A realized sample path: the start site plus the ordered jump events.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub start: Site,
    pub events: Vec<(f64, Site)>,
    pub end_time: f64,
    pub end_reason: EndReason,
}

impl Trajectory {
    pub fn final_site(&self) -> &Site {
        self.events.last().map(|(_, s)| s).unwrap_or(&self.start)
    }

    /// Site occupied at time `t` (left-continuous at jump times is not
    /// needed; jumps are effective at their event time).
    pub fn site_at(&self, t: f64) -> &Site {
        match self.events.partition_point(|&(tau, _)| tau <= t) {
            0 => &self.start,
            k => &self.events[k - 1].1,
        }
    }
}

#[derive(Debug, Clone)]
pub enum StopRule {
    Horizon(f64),
    ExitBox { center: Site, radius: i64 },
    HitSite(Site),
}

/// Low-level stepper holding the mutable simulation state. Rate lookups go
/// through growable power tables so the hot loop does no `powf` calls.
pub struct Walker {
    d: usize,
    nu_pow: PowTable,
    mu_pow: PowTable,
    rng: ChaCha8Rng,
    pub coords: SmallVec<[i64; 4]>,
    pub time: f64,
    pub steps_taken: u64,
    pub step_budget: u64,
}

impl Walker {
    pub fn new(params: &LatticeParams, x0: &Site, rng: ChaCha8Rng, step_budget: u64) -> Self {
        Self {
            d: params.d(),
            nu_pow: PowTable::new(params.alpha()),
            mu_pow: PowTable::new(-params.alpha()),
            rng,
            coords: x0.0.clone(),
            time: 0.0,
            steps_taken: 0,
            step_budget,
        }
    }

    pub fn site(&self) -> Site {
        Site::new(self.coords.clone())
    }

    fn linf(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Sample the next (holding time, landing coordinates) from the current
    /// site. Advances the RNG and the step counter but not the position.
    pub fn sample_jump(&mut self) -> Result<(f64, SmallVec<[i64; 4]>)> {
        if self.steps_taken >= self.step_budget {
            return Err(Error::StepBudget(self.step_budget));
        }
        self.steps_taken += 1;
        let x_linf = self.linf();
        let nu_x = self.nu_pow.get(x_linf);
        let mut rates = [0.0f64; 8];
        let mut mu_total = 0.0;
        for axis in 0..self.d {
            for (slot, dir) in [(2 * axis, 1i64), (2 * axis + 1, -1i64)] {
                let cj = self.coords[axis] + dir;
                let mut y_linf = cj.abs();
                for (i, c) in self.coords.iter().enumerate() {
                    if i != axis {
                        y_linf = y_linf.max(c.abs());
                    }
                }
                let mu = self.mu_pow.get(x_linf.max(y_linf));
                rates[slot] = mu;
                mu_total += mu;
            }
        }
        let u: f64 = self.rng.gen();
        let holding = -(nu_x / mu_total) * (1.0 - u).ln();
        let mut v: f64 = self.rng.gen::<f64>() * mu_total;
        let mut pick = 2 * self.d - 1;
        for (slot, &r) in rates.iter().enumerate().take(2 * self.d) {
            if v < r {
                pick = slot;
                break;
            }
            v -= r;
        }
        let mut next = self.coords.clone();
        let axis = pick / 2;
        next[axis] += if pick % 2 == 0 { 1 } else { -1 };
        Ok((holding, next))
    }

    pub fn jump_to(&mut self, t_jump: f64, coords: SmallVec<[i64; 4]>) {
        self.time = t_jump;
        self.coords = coords;
    }
}

/// One holding-time/jump draw from `current`.
pub fn step(params: &LatticeParams, current: &Site, rng: &mut ChaCha8Rng) -> (f64, Site) {
    let mut w = Walker::new(params, current, rng.clone(), u64::MAX);
    let (holding, next) = w.sample_jump().expect("fresh walker has budget");
    *rng = w.rng;
    (holding, Site::new(next))
}

/// Simulate from `x0` until the stop rule fires.
pub fn run(
    params: &LatticeParams,
    x0: &Site,
    stop: &StopRule,
    stream: RngStream,
    step_budget: u64,
) -> Result<Trajectory> {
    if x0.0.len() != params.d() {
        return Err(Error::InvalidParam("x0 dimension mismatch".into()));
    }
    match stop {
        StopRule::Horizon(h) if !(*h >= 0.0) => {
            return Err(Error::Domain("horizon must be >= 0".into()));
        }
        StopRule::ExitBox { center, radius } => {
            if *radius < 1 || center.linf_distance(x0) > *radius {
                return Err(Error::Domain("exit stop needs x0 inside B(w, r)".into()));
            }
        }
        _ => {}
    }
    if let StopRule::HitSite(target) = stop {
        if target == x0 {
            return Ok(Trajectory {
                start: x0.clone(),
                events: Vec::new(),
                end_time: 0.0,
                end_reason: EndReason::HitTarget,
            });
        }
    }
    let mut walker = Walker::new(params, x0, stream.rng(), step_budget);
    let mut events = Vec::new();
    loop {
        let (holding, next) = walker.sample_jump()?;
        let t_jump = walker.time + holding;
        if let StopRule::Horizon(h) = stop {
            if t_jump > *h {
                return Ok(Trajectory {
                    start: x0.clone(),
                    events,
                    end_time: *h,
                    end_reason: EndReason::Horizon,
                });
            }
        }
        walker.jump_to(t_jump, next);
        let site = walker.site();
        events.push((t_jump, site.clone()));
        match stop {
            StopRule::ExitBox { center, radius } => {
                if center.linf_distance(&site) > *radius {
                    return Ok(Trajectory {
                        start: x0.clone(),
                        events,
                        end_time: t_jump,
                        end_reason: EndReason::ExitedRegion,
                    });
                }
            }
            StopRule::HitSite(target) => {
                if &site == target {
                    return Ok(Trajectory {
                        start: x0.clone(),
                        events,
                        end_time: t_jump,
                        end_reason: EndReason::HitTarget,
                    });
                }
            }
            StopRule::Horizon(_) => {}
        }
    }
}

/// Exact d=1 ruin probability `P_x(sigma_{x-r} > sigma_{x+s})`: the chance
/// of reaching `x + s` before `x - r`, as a ratio of inverse-conductance
/// (resistance) sums.
pub fn ruin_probability_exact(params: &LatticeParams, x: i64, r: i64, s: i64) -> Result<f64> {
    if params.d() != 1 {
        return Err(Error::Domain("ruin probability requires d = 1".into()));
    }
    if r < 1 || s < 1 {
        return Err(Error::InvalidParam("r and s must be positive".into()));
    }
    let resistance = |i: i64| -> f64 {
        // 1 / mu_{i, i+1}
        let m = i.abs().max((i + 1).abs()).max(1);
        (m as f64).powf(params.alpha())
    };
    let num: f64 = (x - r..x).map(resistance).sum();
    let den: f64 = (x - r..x + s).map(resistance).sum();
    Ok(num / den)
}

/// Empirical time-`t` occupation of the free walk, recorded against a box:
/// a trial that leaves the box before `t` counts as escaped, matching the
/// absorbing-kernel distribution exactly.
pub fn mc_occupation(
    params: &LatticeParams,
    x0: &Site,
    region: &BoxRegion,
    t: f64,
    trials: u64,
    seed: u64,
    step_budget: u64,
) -> Result<(Vec<f64>, f64)> {
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be positive".into()));
    }
    if region.index_of(x0).is_none() {
        return Err(Error::Domain("x0 must lie in the region".into()));
    }
    let mut counts = vec![0u64; region.len()];
    let mut escaped = 0u64;
    for trial in 0..trials {
        let mut walker = Walker::new(params, x0, RngStream::new(seed, trial).rng(), step_budget);
        let outcome = loop {
            let (holding, next) = walker.sample_jump()?;
            let t_jump = walker.time + holding;
            if t_jump > t {
                break Some(walker.site());
            }
            walker.jump_to(t_jump, next);
            if region.index_of(&walker.site()).is_none() {
                break None;
            }
        };
        match outcome {
            Some(site) => counts[region.index_of(&site).expect("stayed inside")] += 1,
            None => escaped += 1,
        }
    }
    let n = trials as f64;
    Ok((
        counts.into_iter().map(|c| c as f64 / n).collect(),
        escaped as f64 / n,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_generator, transition_distribution, Boundary};
    use crate::lattice::DEFAULT_SITE_BUDGET;
    use approx::assert_relative_eq;

    fn site(coords: &[i64]) -> Site {
        Site::new(SmallVec::from_slice(coords))
    }

    #[test]
    fn holding_mean_uniform_case() {
        // alpha = 0: mean holding 1/(2d), uniform neighbor choice
        let p = LatticeParams::new(2, 0.0).unwrap();
        let mut rng = RngStream::new(7, 0).rng();
        let n = 200_000;
        let mut sum = 0.0;
        let mut east = 0u64;
        for _ in 0..n {
            let (h, next) = step(&p, &site(&[0, 0]), &mut rng);
            sum += h;
            if next == site(&[1, 0]) {
                east += 1;
            }
        }
        let mean = sum / n as f64;
        let se = 0.25 / (n as f64).sqrt();
        assert!((mean - 0.25).abs() < 4.0 * se, "mean {mean}");
        let freq = east as f64 / n as f64;
        let se_f = (0.25 * 0.75 / n as f64).sqrt();
        assert!((freq - 0.25).abs() < 4.0 * se_f, "freq {freq}");
    }

    #[test]
    fn neighbor_probability_asymmetric_case() {
        // d=1, alpha=1, x=4: P(next = 5) = (1/5) / (1/4 + 1/5) = 4/9
        let p = LatticeParams::new(1, 1.0).unwrap();
        let mut rng = RngStream::new(11, 0).rng();
        let n = 200_000u64;
        let mut up = 0u64;
        let mut hold_sum = 0.0;
        for _ in 0..n {
            let (h, next) = step(&p, &site(&[4]), &mut rng);
            hold_sum += h;
            if next == site(&[5]) {
                up += 1;
            }
        }
        let want = 4.0 / 9.0;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((up as f64 / n as f64 - want).abs() < 4.0 * se);
        // mean holding nu_4 / mu_4 = 4 / (1/4 + 1/5) = 80/9
        let want_hold = 80.0 / 9.0;
        let se_h = want_hold / (n as f64).sqrt();
        assert!((hold_sum / n as f64 - want_hold).abs() < 4.0 * se_h);
    }

    #[test]
    fn runs_are_reproducible() {
        let p = LatticeParams::new(2, -0.5).unwrap();
        let stop = StopRule::Horizon(5.0);
        let a = run(&p, &site(&[1, 2]), &stop, RngStream::new(42, 3), 1_000_000).unwrap();
        let b = run(&p, &site(&[1, 2]), &stop, RngStream::new(42, 3), 1_000_000).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.end_time, b.end_time);
        let c = run(&p, &site(&[1, 2]), &stop, RngStream::new(42, 4), 1_000_000).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn trivial_stop_rules() {
        let p = LatticeParams::new(2, 1.0).unwrap();
        let t = run(
            &p,
            &site(&[0, 0]),
            &StopRule::Horizon(0.0),
            RngStream::new(1, 0),
            1000,
        )
        .unwrap();
        assert!(t.events.is_empty());
        assert_eq!(t.end_time, 0.0);
        assert_eq!(t.end_reason, EndReason::Horizon);

        let t = run(
            &p,
            &site(&[3, 3]),
            &StopRule::HitSite(site(&[3, 3])),
            RngStream::new(1, 0),
            1000,
        )
        .unwrap();
        assert_eq!(t.end_time, 0.0);
        assert_eq!(t.end_reason, EndReason::HitTarget);
    }

    #[test]
    fn trajectory_invariants_hold() {
        let p = LatticeParams::new(2, -0.5).unwrap();
        for stream in 0..20 {
            let t = run(
                &p,
                &site(&[0, 0]),
                &StopRule::Horizon(10.0),
                RngStream::new(5, stream),
                10_000_000,
            )
            .unwrap();
            let mut prev_t = 0.0;
            let mut prev_site = t.start.clone();
            for (tau, s) in &t.events {
                assert!(*tau > prev_t);
                assert_eq!(prev_site.l1_distance(s), 1);
                prev_t = *tau;
                prev_site = s.clone();
            }
            assert!(t.end_time >= prev_t);
        }
    }

    #[test]
    fn exit_run_matches_absorbing_kernel_survival() {
        // P(tau > t) from trials against the absorbing-kernel mass
        let p = LatticeParams::new(1, 0.0).unwrap();
        let region = BoxRegion::new(Site::origin(1), 10, DEFAULT_SITE_BUDGET).unwrap();
        let gen = build_generator(&p, &region, Boundary::Absorbing).unwrap();
        let t_check = 40.0;
        let oracle = 1.0
            - transition_distribution(&gen, &site(&[0]), t_check, 1e-10)
                .unwrap()
                .escaped_mass;
        let n = 20_000u64;
        let mut survived = 0u64;
        for trial in 0..n {
            let tr = run(
                &p,
                &site(&[0]),
                &StopRule::ExitBox {
                    center: Site::origin(1),
                    radius: 10,
                },
                RngStream::new(123, trial),
                1_000_000,
            )
            .unwrap();
            if tr.end_time > t_check {
                survived += 1;
            }
        }
        let freq = survived as f64 / n as f64;
        let se = (oracle * (1.0 - oracle) / n as f64).sqrt();
        assert!(
            (freq - oracle).abs() < 4.0 * se.max(1e-3),
            "freq {freq} oracle {oracle}"
        );
    }

    #[test]
    fn step_budget_is_enforced() {
        let p = LatticeParams::new(1, 0.0).unwrap();
        let err = run(
            &p,
            &site(&[0]),
            &StopRule::HitSite(site(&[1_000_000])),
            RngStream::new(9, 0),
            1000,
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepBudget(1000)));
    }

    #[test]
    fn ruin_examples() {
        let p0 = LatticeParams::new(1, 0.0).unwrap();
        assert_relative_eq!(ruin_probability_exact(&p0, 0, 3, 5).unwrap(), 3.0 / 8.0);
        let p1 = LatticeParams::new(1, 1.0).unwrap();
        assert_relative_eq!(
            ruin_probability_exact(&p1, 4, 2, 2).unwrap(),
            7.0 / 18.0
        );
        // monotone decreasing in s
        let mut prev = 1.0;
        for s in 1..8 {
            let v = ruin_probability_exact(&p1, 4, 2, s).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let p2 = LatticeParams::new(2, 0.0).unwrap();
        assert!(ruin_probability_exact(&p2, 0, 1, 1).is_err());
    }

    #[test]
    fn ruin_monte_carlo_agrees_with_exact() {
        let p = LatticeParams::new(1, 1.0).unwrap();
        let (x, r, s) = (4i64, 2i64, 2i64);
        let exact = ruin_probability_exact(&p, x, r, s).unwrap();
        let n = 20_000u64;
        let mut hits_up = 0u64;
        for trial in 0..n {
            let mut w = Walker::new(&p, &site(&[x]), RngStream::new(77, trial).rng(), 1_000_000);
            loop {
                let (h, next) = w.sample_jump().unwrap();
                let t = w.time + h;
                w.jump_to(t, next);
                if w.coords[0] == x + s {
                    hits_up += 1;
                    break;
                }
                if w.coords[0] == x - r {
                    break;
                }
            }
        }
        let freq = hits_up as f64 / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((freq - exact).abs() < 3.0 * se, "freq {freq} exact {exact}");
    }

    #[test]
    fn occupation_matches_kernel_distribution() {
        let p = LatticeParams::new(1, 0.0).unwrap();
        let region = BoxRegion::new(Site::origin(1), 5, DEFAULT_SITE_BUDGET).unwrap();
        let gen = build_generator(&p, &region, Boundary::Absorbing).unwrap();
        let t = 2.0;
        let oracle = transition_distribution(&gen, &site(&[0]), t, 1e-10).unwrap();
        let (emp, escaped) =
            mc_occupation(&p, &site(&[0]), &region, t, 20_000, 321, 1_000_000).unwrap();
        let mut tv = (escaped - oracle.escaped_mass).abs();
        for (e, o) in emp.iter().zip(&oracle.probs) {
            tv += (e - o).abs();
        }
        tv /= 2.0;
        assert!(tv < 0.02, "tv {tv}");
    }
}
