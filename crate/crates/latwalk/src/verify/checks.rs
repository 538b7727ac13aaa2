//! Named acceptance checks behind a common trait, selectable by name.
//!
//! Each check is a self-contained experiment with a fixed configuration and
//! a verdict; the registry is what `verify all` and the acceptance suite
//! iterate over.

use smallvec::SmallVec;

use crate::collide::{annulus_collision_experiment, zk_census, AnnulusExperimentConfig};
use crate::error::Result;
use crate::kernel::{build_generator, exit_mass, transition_distribution, Boundary};
use crate::lattice::{BoxRegion, LatticeParams, Site, DEFAULT_SITE_BUDGET};
use crate::metric::intrinsic_constant;
use crate::walk::{mc_occupation, ruin_probability_exact, RngStream, Walker};

use super::audits::{
    comparability_audit, gaussian_sandwich_fit, ondiag_exponent_fit, poincare_audit,
    tent_counterexample_scan, ComparabilitySpec, SandwichSpec,
};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// One named acceptance check with a fixed, documented configuration.
pub trait Check {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self) -> Result<CheckOutcome>;
}

/// All checks, in reporting order.
pub fn registry() -> Vec<Box<dyn Check>> {
    vec![
        Box::new(BesselOracle),
        Box::new(OndiagExponentD1),
        Box::new(OndiagExponentD2),
        Box::new(GamblersRuin),
        Box::new(IntrinsicConstant),
        Box::new(MetricComparability),
        Box::new(PoincareProduct),
        Box::new(GaussianSandwich),
        Box::new(CollisionsInfinite),
        Box::new(CollisionsFinite),
        Box::new(TentScan),
        Box::new(McKernelEquivalence),
    ]
}

/// Run a single check by its registry name.
pub fn run_check(name: &str) -> Option<Result<CheckOutcome>> {
    registry()
        .into_iter()
        .find(|c| c.name() == name)
        .map(|c| c.run())
}

fn site(coords: &[i64]) -> Site {
    Site::new(SmallVec::from_slice(coords))
}

fn outcome(name: &'static str, pass: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, pass, detail }
}

/// `e^{-2t} I_0(2t)` via the series `sum_k t^{2k} / (k!)^2`.
fn bessel_p00(t: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..500 {
        term *= (t * t) / ((k * k) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum * (-2.0 * t).exp()
}

struct BesselOracle;

impl Check for BesselOracle {
    fn name(&self) -> &'static str {
        "bessel-oracle"
    }
    fn description(&self) -> &'static str {
        "d=1 alpha=0 kernel against the closed form e^{-2t} I_0(2t)"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let p = LatticeParams::new(1, 0.0)?;
        let region = BoxRegion::new(Site::origin(1), 200, DEFAULT_SITE_BUDGET)?;
        let gen = build_generator(&p, &region, Boundary::Reflecting)?;
        let i0 = region.index_of(&Site::origin(1)).expect("origin in box");
        let mut max_err = 0.0f64;
        let mut max_exit = 0.0f64;
        for t in [0.5, 1.0, 2.0, 5.0] {
            let dist = transition_distribution(&gen, &Site::origin(1), t, 1e-12)?;
            max_err = max_err.max((dist.probs[i0] - bessel_p00(t)).abs());
            let em = exit_mass(&p, &Site::origin(1), 200, &Site::origin(1), t, 1e-13, DEFAULT_SITE_BUDGET)?;
            max_exit = max_exit.max(em);
        }
        let pass = max_err < 1e-8 && max_exit < 1e-12;
        Ok(outcome(
            self.name(),
            pass,
            format!("max |p - oracle| = {max_err:.3e} (< 1e-8), max exit mass = {max_exit:.3e} (< 1e-12)"),
        ))
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

struct OndiagExponentD1;

impl Check for OndiagExponentD1 {
    fn name(&self) -> &'static str {
        "ondiag-exponent-d1"
    }
    fn description(&self) -> &'static str {
        "universal -1/2 on-diagonal decay in d=1 over t in [100, 1000]"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let ts = log_grid(100.0, 1000.0, 8);
        let mut detail = String::new();
        let mut pass = true;
        for (alpha, radius) in [(-0.5, 16000i64), (0.0, 400), (1.0, 60)] {
            let p = LatticeParams::new(1, alpha)?;
            let (slope, se) = ondiag_exponent_fit(&p, &ts, radius, 1e-4, 1e-10, DEFAULT_SITE_BUDGET)?;
            let ok = (slope + 0.5).abs() <= 0.05;
            pass &= ok;
            detail.push_str(&format!("alpha={alpha}: slope={slope:.4}+-{se:.4}; "));
        }
        detail.push_str("want -0.5+-0.05");
        Ok(outcome(self.name(), pass, detail))
    }
}

struct OndiagExponentD2;

impl Check for OndiagExponentD2 {
    fn name(&self) -> &'static str {
        "ondiag-exponent-d2"
    }
    fn description(&self) -> &'static str {
        "d=2 alpha=0 on-diagonal decay exponent -1 over t in [10, 200]"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let p = LatticeParams::new(2, 0.0)?;
        let ts = log_grid(10.0, 200.0, 8);
        let (slope, se) = ondiag_exponent_fit(&p, &ts, 126, 1e-4, 1e-9, DEFAULT_SITE_BUDGET)?;
        let pass = (slope + 1.0).abs() <= 0.07;
        Ok(outcome(
            self.name(),
            pass,
            format!("slope={slope:.4}+-{se:.4}, want -1+-0.07 (radius 126)"),
        ))
    }
}

struct GamblersRuin;

impl Check for GamblersRuin {
    fn name(&self) -> &'static str {
        "gamblers-ruin"
    }
    fn description(&self) -> &'static str {
        "exact d=1 ruin probability vs formula and Monte Carlo"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let p1 = LatticeParams::new(1, 1.0)?;
        let exact = ruin_probability_exact(&p1, 4, 2, 2)?;
        let formula_ok = (exact - 7.0 / 18.0).abs() < 1e-15;
        let p0 = LatticeParams::new(1, 0.0)?;
        let uniform_ok = [(3i64, 5i64), (2, 7), (1, 1)].iter().all(|&(r, s)| {
            ruin_probability_exact(&p0, 0, r, s)
                .map(|v| (v - r as f64 / (r + s) as f64).abs() < 1e-15)
                .unwrap_or(false)
        });
        // Monte Carlo: reach x+s before x-r
        let trials = 100_000u64;
        let mut up = 0u64;
        for trial in 0..trials {
            let mut w = Walker::new(&p1, &site(&[4]), RngStream::new(20_240_817, trial).rng(), 10_000_000);
            loop {
                let (h, next) = w.sample_jump()?;
                let t = w.time + h;
                w.jump_to(t, next);
                if w.coords[0] == 6 {
                    up += 1;
                    break;
                }
                if w.coords[0] == 2 {
                    break;
                }
            }
        }
        let freq = up as f64 / trials as f64;
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        let mc_ok = (freq - exact).abs() < 3.0 * se;
        let pass = formula_ok && uniform_ok && mc_ok;
        Ok(outcome(
            self.name(),
            pass,
            format!(
                "exact={exact:.6} (7/18), mc={freq:.6}+-{se:.6}, uniform-alpha formula {}",
                if uniform_ok { "ok" } else { "violated" }
            ),
        ))
    }
}

struct IntrinsicConstant;

impl Check for IntrinsicConstant {
    fn name(&self) -> &'static str {
        "intrinsic-constant"
    }
    fn description(&self) -> &'static str {
        "adaptedness constant: exact d=1 value and stability under box doubling"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let budget = 3_000_000u64;
        let p = LatticeParams::new(1, 0.0)?;
        let region = BoxRegion::new(Site::origin(1), 10, budget)?;
        let base = intrinsic_constant(&p, &region)?;
        let exact_ok = (base - 8.0).abs() < 1e-12;
        let mut pass = exact_ok;
        let mut detail = format!("d=1 alpha=0: {base} (want 8); ");
        for (d, alpha) in [(2usize, -0.5), (2, 1.0), (3, 2.0)] {
            let p = LatticeParams::new(d, alpha)?;
            let c32 = intrinsic_constant(&p, &BoxRegion::new(Site::origin(d), 32, budget)?)?;
            let c64 = intrinsic_constant(&p, &BoxRegion::new(Site::origin(d), 64, budget)?)?;
            let drift = (c64 / c32 - 1.0).abs();
            pass &= drift <= 0.01;
            detail.push_str(&format!("({d},{alpha}): drift={drift:.4}; "));
        }
        detail.push_str("want <= 0.01");
        Ok(outcome(self.name(), pass, detail))
    }
}

struct MetricComparability;

impl Check for MetricComparability {
    fn name(&self) -> &'static str {
        "metric-comparability"
    }
    fn description(&self) -> &'static str {
        "rho(x,y) / rho_x(|x-y|) band stability across scale doublings"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let mut pass = true;
        let mut detail = String::new();
        for alpha in [-0.5, 1.0] {
            let p = LatticeParams::new(2, alpha)?;
            let spec = ComparabilitySpec {
                scales: vec![16, 32, 64],
                pairs_per_scale: 1000,
                centers_per_scale: 20,
                seed: 90_210,
                stability_threshold: 0.10,
                budget: DEFAULT_SITE_BUDGET,
            };
            let reports = comparability_audit(&p, &spec)?;
            let r = reports
                .iter()
                .find(|r| r.name == "metric-profile")
                .expect("metric-profile audited");
            pass &= r.pass;
            detail.push_str(&format!(
                "alpha={alpha}: band [{:.3}, {:.3}], stability {:.4}; ",
                r.ratio_min, r.ratio_max, r.scale_stability
            ));
        }
        detail.push_str("want stability <= 0.10");
        Ok(outcome(self.name(), pass, detail))
    }
}

struct PoincareProduct;

impl Check for PoincareProduct {
    fn name(&self) -> &'static str {
        "poincare-product"
    }
    fn description(&self) -> &'static str {
        "spectral gap times rho_x(r)^2 bounded below and scale-stable"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let centers = [site(&[0, 0]), site(&[20, 0]), site(&[80, 0])];
        let radii = [5i64, 10, 20];
        let mut pass = true;
        let mut detail = String::new();
        for alpha in [-0.5, 1.0] {
            let p = LatticeParams::new(2, alpha)?;
            let report = poincare_audit(&p, &centers, &radii, 0.2, DEFAULT_SITE_BUDGET)?;
            pass &= report.pass;
            detail.push_str(&format!(
                "alpha={alpha}: product in [{:.4}, {:.4}], drift {:.4}; ",
                report.ratio_min, report.ratio_max, report.scale_stability
            ));
        }
        detail.push_str("want min > 0, drift <= 0.20");
        Ok(outcome(self.name(), pass, detail))
    }
}

struct GaussianSandwich;

impl Check for GaussianSandwich {
    fn name(&self) -> &'static str {
        "gaussian-sandwich"
    }
    fn description(&self) -> &'static str {
        "two-sided Gaussian envelope of z = log(p sqrt(V V)) against u = rho^2/t"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let p = LatticeParams::new(2, -0.5)?;
        // radius 340 covers both starts plus their ray targets with margin
        // while keeping the uniformization rate (which grows with the box
        // for alpha < 0) manageable
        let spec = SandwichSpec {
            box_radius: 340,
            x0s: vec![site(&[0, 0]), site(&[150, 0])],
            ts: vec![4.0, 6.0, 8.0, 12.0],
            u_max: 8.0,
            tol: 1e-12,
            cert_threshold: 1e-4,
            min_p: 1e-8,
            min_samples: 200,
            budget: 1_000_000,
            rho_budget: 20_000_000,
        };
        let out = gaussian_sandwich_fit(&p, &spec)?;
        let spread_limit = 100.0f64.ln();
        let pass = out.fit.violations == 0
            && out.fit.samples.len() >= 200
            && out.fit.spread <= spread_limit
            && out.fit.upper.slope < 0.0
            && out.fit.lower.slope < 0.0
            && out.fit.upper.slope.is_finite();
        Ok(outcome(
            self.name(),
            pass,
            format!(
                "{} certified samples, spread {:.3} (<= {:.3}), slope {:.4}, {} long-range samples under their envelope",
                out.fit.samples.len(),
                out.fit.spread,
                spread_limit,
                out.fit.upper.slope,
                out.long_range.len()
            ),
        ))
    }
}

struct CollisionsInfinite;

impl Check for CollisionsInfinite {
    fn name(&self) -> &'static str {
        "collisions-infinite"
    }
    fn description(&self) -> &'static str {
        "d=2: k * P(H_k > 0) stays above the 1/k envelope through k = 5"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let p = LatticeParams::new(2, -0.5)?;
        let trials = 2000u64;
        let mut stats = Vec::new();
        for k in 1..=5u32 {
            let cfg = AnnulusExperimentConfig {
                params: p,
                k,
                lambda: 4,
                trials,
                seed: 7_777_777,
                step_budget: 1_000_000_000,
            };
            stats.push(annulus_collision_experiment(&cfg)?);
        }
        let (p1, se1) = stats[0];
        let mut pass = p1 > 0.0;
        let mut detail = String::new();
        for (i, &(pk, sek)) in stats.iter().enumerate() {
            let k = (i + 1) as f64;
            // one-sided 95% lower bound on k p_k - 0.5 p_1
            let margin = 1.645 * (k * k * sek * sek + 0.25 * se1 * se1).sqrt();
            let ok = k * pk - 0.5 * p1 >= margin || i == 0;
            pass &= ok;
            detail.push_str(&format!("k={}: p={pk:.4}+-{sek:.4}; ", i + 1));
        }
        detail.push_str(&format!("envelope 0.5*p_1 = {:.4}", 0.5 * p1));
        Ok(outcome(self.name(), pass, detail))
    }
}

struct CollisionsFinite;

impl Check for CollisionsFinite {
    fn name(&self) -> &'static str {
        "collisions-finite"
    }
    fn description(&self) -> &'static str {
        "d=3: P(Z_k > 0) decays geometrically in k"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let p = LatticeParams::new(3, 2.0)?;
        let mut ps = Vec::new();
        let mut detail = String::new();
        for k in 1..=5u32 {
            let trials = 20_000u64 * (1 + k as u64 / 3);
            let (pk, _) = zk_census(&p, k, 10.0, trials, 31_337, 1_000_000_000)?;
            let se = (pk * (1.0 - pk) / trials as f64).sqrt();
            ps.push((pk, se));
            detail.push_str(&format!("k={k}: p={pk:.5}+-{se:.5}; "));
        }
        // mean successive ratio over k = 1..4 with propagated error
        let mut ratios = Vec::new();
        let mut vars = Vec::new();
        let mut defined = true;
        for w in ps.windows(2) {
            let ((pa, sa), (pb, sb)) = (w[0], w[1]);
            if pa <= 0.0 {
                defined = false;
                break;
            }
            let r = pb / pa;
            ratios.push(r);
            let var = if pb > 0.0 {
                r * r * (sa * sa / (pa * pa) + sb * sb / (pb * pb))
            } else {
                sa * sa / (pa * pa)
            };
            vars.push(var);
        }
        let (pass, summary) = if defined {
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let se = vars.iter().sum::<f64>().sqrt() / ratios.len() as f64;
            (
                mean + 1.645 * se <= 0.8,
                format!("mean ratio {mean:.3}+-{se:.3} (want <= 0.8 at 95%)"),
            )
        } else {
            (false, "a denominator frequency was zero".into())
        };
        detail.push_str(&summary);
        Ok(outcome(self.name(), pass, detail))
    }
}

struct TentScan;

impl Check for TentScan {
    fn name(&self) -> &'static str {
        "tent-scan"
    }
    fn description(&self) -> &'static str {
        "tent-function Dirichlet/mass ratio slope at alpha = -1/2"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let p = LatticeParams::new(2, -0.5)?;
        let (slope, se) = tent_counterexample_scan(&p, &[16, 32, 64, 128])?;
        let pass = (slope + 1.0).abs() <= 0.15;
        Ok(outcome(
            self.name(),
            pass,
            format!("slope={slope:.4}+-{se:.4}, want -1+-0.15"),
        ))
    }
}

struct McKernelEquivalence;

impl Check for McKernelEquivalence {
    fn name(&self) -> &'static str {
        "mc-kernel-equivalence"
    }
    fn description(&self) -> &'static str {
        "simulated occupation vs exact kernel in total variation"
    }
    fn run(&self) -> Result<CheckOutcome> {
        let p = LatticeParams::new(2, 1.0)?;
        let region = BoxRegion::new(Site::origin(2), 10, DEFAULT_SITE_BUDGET)?;
        let gen = build_generator(&p, &region, Boundary::Absorbing)?;
        let t = 5.0;
        let oracle = transition_distribution(&gen, &Site::origin(2), t, 1e-10)?;
        let (emp, escaped) = mc_occupation(
            &p,
            &Site::origin(2),
            &region,
            t,
            100_000,
            987_654_321,
            10_000_000,
        )?;
        let mut tv = (escaped - oracle.escaped_mass).abs();
        for (e, o) in emp.iter().zip(&oracle.probs) {
            tv += (e - o).abs();
        }
        tv /= 2.0;
        let pass = tv <= 0.02;
        Ok(outcome(
            self.name(),
            pass,
            format!("total variation {tv:.5} over 100000 trials (want <= 0.02)"),
        ))
    }
}
