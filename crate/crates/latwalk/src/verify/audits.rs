//! Quantitative audits: exponent fits, sandwich envelopes, comparability
//! bands, the Poincare product, the tent-function scan, and the recurrence
//! probe.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::kernel::{build_generator, ondiag_grid_1d, transition_grid, Boundary};
use crate::lattice::{BoxRegion, LatticeParams, PowTable, Site};
use crate::metric::{
    l1_geodesic_stats, rho, rho_ball, rho_multi, rho_profile, rho_profile_inverse,
    v_rho_closed_form,
};

use super::fits::{fit_envelopes, least_squares, log_log_slope, BoundFit, EnvelopeSample, LineFit};

/// Uniform container for a ratio-band audit: the observed ratio range and
/// how much the band moves when the sampling scale doubles.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub name: String,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub scale_stability: f64,
    pub pass: bool,
}

impl AuditReport {
    fn from_bands(name: &str, bands: &[(f64, f64)], threshold: f64) -> Self {
        let ratio_min = bands.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
        let ratio_max = bands.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
        // multiplicative band width and its worst relative change per doubling
        let widths: Vec<f64> = bands.iter().map(|&(lo, hi)| hi / lo).collect();
        let scale_stability = widths
            .windows(2)
            .map(|w| (w[1] / w[0] - 1.0).abs())
            .fold(0.0f64, f64::max);
        AuditReport {
            name: name.into(),
            ratio_min,
            ratio_max,
            scale_stability,
            pass: ratio_min > 0.0
                && ratio_min.is_finite()
                && ratio_max.is_finite()
                && scale_stability <= threshold,
        }
    }
}

/// One on-diagonal grid point with its escape certificate.
#[derive(Debug, Clone, Copy)]
pub struct OndiagPoint {
    pub t: f64,
    pub p00: f64,
    pub exit_mass: f64,
}

/// `p_t(0,0)` on a time grid with exit-mass certificates: spectral path in
/// d = 1, uniformization on a reflecting/absorbing box pair otherwise.
pub fn ondiag_grid(
    params: &LatticeParams,
    box_radius: i64,
    ts: &[f64],
    tol: f64,
    budget: u64,
) -> Result<Vec<OndiagPoint>> {
    if params.d() == 1 {
        let samples = ondiag_grid_1d(params, box_radius, &Site::origin(1), ts, budget)?;
        return Ok(samples
            .iter()
            .map(|s| OndiagPoint {
                t: s.t,
                p00: s.p00,
                exit_mass: s.exit_mass,
            })
            .collect());
    }
    let region = BoxRegion::new(Site::origin(params.d()), box_radius, budget)?;
    let refl = build_generator(params, &region, Boundary::Reflecting)?;
    let abs = build_generator(params, &region, Boundary::Absorbing)?;
    let origin = Site::origin(params.d());
    let i0 = region.index_of(&origin).expect("origin in centered box");
    let grid_r = transition_grid(&refl, &origin, ts, tol)?;
    let grid_a = transition_grid(&abs, &origin, ts, tol)?;
    Ok(ts
        .iter()
        .enumerate()
        .map(|(k, &t)| OndiagPoint {
            t,
            // nu at the origin is 1, so the probability is the density
            p00: grid_r[k].probs[i0],
            exit_mass: grid_a[k].escaped_mass,
        })
        .collect())
}

/// Least-squares slope of `log p_t(0,0)` against `log t`, with the slope's
/// standard error. Every grid point must pass the exit-mass certificate.
pub fn ondiag_exponent_fit(
    params: &LatticeParams,
    ts: &[f64],
    box_radius: i64,
    cert_threshold: f64,
    tol: f64,
    budget: u64,
) -> Result<(f64, f64)> {
    let grid = ondiag_grid(params, box_radius, ts, tol, budget)?;
    for p in &grid {
        if p.exit_mass >= cert_threshold {
            return Err(Error::Validity(format!(
                "exit mass {} at t = {} exceeds certificate threshold {}",
                p.exit_mass, p.t, cert_threshold
            )));
        }
    }
    let ts: Vec<f64> = grid.iter().map(|p| p.t).collect();
    let ps: Vec<f64> = grid.iter().map(|p| p.p00).collect();
    log_log_slope(&ts, &ps)
}

#[derive(Debug, Clone)]
pub struct SandwichSpec {
    pub box_radius: i64,
    pub x0s: Vec<Site>,
    pub ts: Vec<f64>,
    pub u_max: f64,
    pub tol: f64,
    pub cert_threshold: f64,
    /// Kernel values below this floor are numerical noise and are skipped.
    pub min_p: f64,
    pub min_samples: usize,
    pub budget: u64,
    /// Separate (usually larger) budget for the multi-target rho runs, whose
    /// search boxes can dwarf the kernel box.
    pub rho_budget: u64,
}

/// Result of the sandwich sampling run: the Gaussian-regime envelope fit
/// plus the long-range samples with their upper-only envelope.
#[derive(Debug, Clone)]
pub struct SandwichFit {
    pub fit: BoundFit,
    pub long_range: Vec<EnvelopeSample>,
    pub long_range_upper: Option<LineFit>,
}

const RAY_DIRECTIONS_2D: [(i64, i64); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Sample `z = log(p_t(x,y) sqrt(V_rho(x, sqrt t) V_rho(y, sqrt t)))`
/// against `u = rho(x,y)^2 / t` from exact kernel runs and fit supporting
/// envelopes. Samples with `t < (nu_x v nu_y) rho(x,y)` are routed to the
/// long-range list and checked against the upper-only envelope in
/// `w = (rho/eta)(1 v log(eta rho / t))`.
pub fn gaussian_sandwich_fit(params: &LatticeParams, spec: &SandwichSpec) -> Result<SandwichFit> {
    if params.d() != 2 {
        return Err(Error::InvalidParam(
            "sandwich sampler rays are wired for d = 2".into(),
        ));
    }
    let region = BoxRegion::new(Site::origin(2), spec.box_radius, spec.budget)?;
    let refl = build_generator(params, &region, Boundary::Reflecting)?;
    let abs = build_generator(params, &region, Boundary::Absorbing)?;
    let mut gaussian = Vec::new();
    let mut long_range = Vec::new();
    for x0 in &spec.x0s {
        if region.index_of(x0).is_none() {
            return Err(Error::Domain(format!("start {x0} outside the box")));
        }
        let grid_r = transition_grid(&refl, x0, &spec.ts, spec.tol)?;
        let grid_a = transition_grid(&abs, x0, &spec.ts, spec.tol)?;
        let nu_x = params.nu(x0);
        // targets along rays out to the Euclidean reach of u = u_max at the
        // largest time, with margin; one multi-target rho run covers them all
        let t_max = spec.ts.iter().copied().fold(0.0f64, f64::max);
        let rho_reach = (spec.u_max * t_max).sqrt();
        let reach = (1.5 * rho_profile_inverse(params, x0, rho_reach)?).ceil() as i64 + 2;
        let mut targets: Vec<Site> = vec![x0.clone()];
        for &(dx, dy) in &RAY_DIRECTIONS_2D {
            for step in 1..=reach {
                let y = Site::new(SmallVec::from_slice(&[
                    x0.coords()[0] + dx * step,
                    x0.coords()[1] + dy * step,
                ]));
                if !region.contains(&y) {
                    break;
                }
                targets.push(y);
            }
        }
        let rhos = rho_multi(params, x0, &targets, spec.rho_budget)?;
        for (k, &t) in spec.ts.iter().enumerate() {
            if grid_a[k].escaped_mass >= spec.cert_threshold {
                continue;
            }
            let vx = v_rho_closed_form(params, x0, t.sqrt())?;
            for (y, &d_rho) in targets.iter().zip(&rhos) {
                let u = d_rho * d_rho / t;
                if u > spec.u_max {
                    continue;
                }
                let iy = region.index_of(y).expect("targets stay in the box");
                let p = grid_r[k].probs[iy] / refl.nu_vec[iy];
                if p < spec.min_p {
                    continue;
                }
                let nu_y = params.nu(y);
                let eta = nu_x.max(nu_y);
                let vy = v_rho_closed_form(params, y, t.sqrt())?;
                let tag = format!("x0={x0} t={t}");
                if t >= eta * d_rho {
                    gaussian.push(EnvelopeSample {
                        u,
                        z: (p * (vx * vy).sqrt()).ln(),
                        tag,
                    });
                } else {
                    let w = (d_rho / eta) * (1.0f64).max((eta * d_rho / t).ln());
                    long_range.push(EnvelopeSample {
                        u: w,
                        z: p.ln(),
                        tag,
                    });
                }
            }
        }
    }
    if gaussian.len() < spec.min_samples {
        return Err(Error::InsufficientSamples {
            have: gaussian.len(),
            need: spec.min_samples,
        });
    }
    let fit = fit_envelopes(gaussian)?;
    let us: Vec<f64> = long_range.iter().map(|s| s.u).collect();
    let has_spread = us
        .iter()
        .fold(f64::NEG_INFINITY, |a, &u| a.max(u))
        > us.iter().fold(f64::INFINITY, |a, &u| a.min(u));
    let long_range_upper = if long_range.len() >= 2 && has_spread {
        let zs: Vec<f64> = long_range.iter().map(|s| s.z).collect();
        let (base, _) = least_squares(&us, &zs)?;
        let hi = long_range
            .iter()
            .map(|s| s.z - base.slope * s.u)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(LineFit {
            intercept: hi,
            slope: base.slope,
        })
    } else {
        None
    };
    Ok(SandwichFit {
        fit,
        long_range,
        long_range_upper,
    })
}

#[derive(Debug, Clone)]
pub struct ComparabilitySpec {
    pub scales: Vec<i64>,
    pub pairs_per_scale: usize,
    pub centers_per_scale: usize,
    pub seed: u64,
    pub stability_threshold: f64,
    pub budget: u64,
}

impl Default for ComparabilitySpec {
    fn default() -> Self {
        Self {
            scales: vec![16, 32, 64],
            pairs_per_scale: 200,
            centers_per_scale: 20,
            seed: 1,
            stability_threshold: 0.2,
            budget: crate::lattice::DEFAULT_SITE_BUDGET,
        }
    }
}

fn scaled_site(base_coords: &[f64], factor: f64) -> Site {
    Site::new(
        base_coords
            .iter()
            .map(|&c| (c * factor).round() as i64)
            .collect::<SmallVec<[i64; 4]>>(),
    )
}

/// Ratio-band audits for the metric/volume comparability claims, one report
/// per claim, each with its band and doubling stability.
pub fn comparability_audit(
    params: &LatticeParams,
    spec: &ComparabilitySpec,
) -> Result<Vec<AuditReport>> {
    if spec.scales.len() < 2 {
        return Err(Error::InvalidParam(
            "comparability audit needs at least two scales".into(),
        ));
    }
    let d = params.d();
    let alpha = params.alpha();
    let mut bands: HashMap<&'static str, Vec<(f64, f64)>> = HashMap::new();
    let push = |bands: &mut HashMap<&'static str, Vec<(f64, f64)>>,
                    name: &'static str,
                    values: &[f64]|
     -> Result<()> {
        if values.is_empty() {
            return Err(Error::InsufficientSamples { have: 0, need: 1 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validity(format!("{name}: non-finite ratio")));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        bands.entry(name).or_default().push((lo, hi));
        Ok(())
    };
    // configurations are drawn once as lattice points at the smallest scale
    // and rescaled exactly per scale: each scale then audits the same
    // relative geometries (nested, no re-rounding near the origin), so band
    // drift across doublings measures scale dependence rather than
    // sampling noise
    let base = *spec.scales.iter().min().expect("nonempty scales");
    if base < 2 {
        return Err(Error::InvalidParam("smallest scale must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    fn draw(rng: &mut ChaCha8Rng, d: usize, n: usize, half: i64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-half..=half) as f64).collect())
            .collect()
    }
    let unit_xs = draw(&mut rng, d, spec.pairs_per_scale, base);
    // displacements capped at scale/2 keep the rho search boxes small
    let unit_offs: Vec<Vec<f64>> = (0..spec.pairs_per_scale)
        .map(|_| loop {
            let off: Vec<f64> = (0..d)
                .map(|_| rng.gen_range(-base / 2..=base / 2) as f64)
                .collect();
            if off.iter().any(|&c| c != 0.0) {
                break off;
            }
        })
        .collect();
    let unit_centers = draw(&mut rng, d, spec.centers_per_scale, base);
    for &scale in &spec.scales {
        let m = scale as f64 / base as f64;
        let mut path_ratios = Vec::new();
        let mut metric_ratios = Vec::new();
        let mut nu_gap_ratios = Vec::new();
        for (ux, uo) in unit_xs.iter().zip(&unit_offs) {
            let x = scaled_site(ux, m);
            let mut off = scaled_site(uo, m);
            if off.linf() == 0 {
                off.0[0] = 1;
            }
            let y = Site::new(
                x.coords()
                    .iter()
                    .zip(off.coords())
                    .map(|(a, b)| a + b)
                    .collect::<SmallVec<[i64; 4]>>(),
            );
            let n = x.l1_distance(&y);
            let (mass, _, _) = l1_geodesic_stats(params, &x, &y)?;
            let base = x.linf().max(y.linf()).max(n).max(1) as f64;
            path_ratios.push(mass / (n as f64 * base.powf(alpha)));
            let d_rho = rho(params, &x, &y, spec.budget)?.distance;
            metric_ratios.push(d_rho / rho_profile(params, &x, x.linf_distance(&y) as f64)?);
            let (nu_x, nu_y) = (params.nu(&x), params.nu(&y));
            if nu_x != nu_y {
                let lhs = nu_x.max(nu_y) * (nu_x.ln() - nu_y.ln()).abs().powi(3);
                nu_gap_ratios.push(lhs / d_rho);
            }
        }
        push(&mut bands, "path-mass", &path_ratios)?;
        push(&mut bands, "metric-profile", &metric_ratios)?;
        // vacuous when alpha = 0: every nu is 1 and no pair has a weight gap
        if !nu_gap_ratios.is_empty() {
            push(&mut bands, "nu-gap", &nu_gap_ratios)?;
        }

        let mut ball_ratios = Vec::new();
        let mut vol_ratios = Vec::new();
        let mut growth_ratios = Vec::new();
        let r_eucl = (scale / 2).max(1) as f64;
        for uc in &unit_centers {
            let x = scaled_site(uc, m);
            // Euclidean reach of an intrinsic ball vs the profile inverse
            let r_int = rho_profile(params, &x, r_eucl)?;
            let ball = rho_ball(params, &x, r_int, spec.budget)?;
            let reach = ball
                .sites
                .iter()
                .map(|s| s.linf_distance(&x))
                .max()
                .unwrap_or(0)
                .max(1) as f64;
            ball_ratios.push(reach / rho_profile_inverse(params, &x, r_int)?);
            // exact Euclidean volume vs its closed form
            let v = params.volume_exact(&x, r_eucl, spec.budget)?;
            vol_ratios.push(v / params.volume_closed_form(&x, r_eucl)?);
            // polynomial volume growth relative to the lightest site in the
            // box
            let region = BoxRegion::new(x.clone(), scale, spec.budget)?;
            let mut nu_pow = PowTable::new(alpha);
            let nu_min = region
                .sites()
                .map(|s| nu_pow.get(s.linf()))
                .fold(f64::INFINITY, f64::min);
            let v_box = params.volume_exact(&x, scale as f64, spec.budget)?;
            growth_ratios.push((v_box / nu_min).ln() / (scale.max(2) as f64).ln());
        }
        push(&mut bands, "ball-reach", &ball_ratios)?;
        push(&mut bands, "volume-closed-form", &vol_ratios)?;
        push(&mut bands, "volume-growth", &growth_ratios)?;
    }
    let order = [
        "path-mass",
        "metric-profile",
        "ball-reach",
        "volume-closed-form",
        "volume-growth",
        "nu-gap",
    ];
    Ok(order
        .iter()
        .filter(|name| bands.contains_key(**name))
        .map(|name| AuditReport::from_bands(name, &bands[name], spec.stability_threshold))
        .collect())
}

/// Poincare product audit: `spectral_gap(B(x,r)) * rho_x(r)^2` over the
/// sampled boxes. The reported stability is the drift, across radius
/// doublings, of the product's geometric mean over centers; the extremes of
/// individual boxes land in the band.
pub fn poincare_audit(
    params: &LatticeParams,
    centers: &[Site],
    radii: &[i64],
    threshold: f64,
    budget: u64,
) -> Result<AuditReport> {
    if centers.is_empty() || radii.len() < 2 {
        return Err(Error::InvalidParam(
            "poincare audit needs centers and at least two radii".into(),
        ));
    }
    let mut min_p = f64::INFINITY;
    let mut max_p = f64::NEG_INFINITY;
    // stability is judged on the geometric mean across centers per radius:
    // individual boxes that straddle the origin carry genuine O(1) boundary
    // effects (the origin is heavy and weakly coupled for alpha < 0, a
    // low-conductance corridor for alpha > 0), which the aggregate absorbs
    let mut gm_by_radius = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut log_sum = 0.0f64;
        for x in centers {
            let region = BoxRegion::new(x.clone(), r, budget)?;
            let gen = build_generator(params, &region, Boundary::Reflecting)?;
            let gap = crate::kernel::spectral_gap(&gen)?;
            let product = gap * rho_profile(params, x, r as f64)?.powi(2);
            if !(product.is_finite() && product > 0.0) {
                return Err(Error::Validity("non-positive Poincare product".into()));
            }
            min_p = min_p.min(product);
            max_p = max_p.max(product);
            log_sum += product.ln();
        }
        gm_by_radius.push((log_sum / centers.len() as f64).exp());
    }
    let drift = gm_by_radius
        .windows(2)
        .map(|w| (w[1] / w[0] - 1.0).abs())
        .fold(0.0f64, f64::max);
    Ok(AuditReport {
        name: "poincare-product".into(),
        ratio_min: min_p,
        ratio_max: max_p,
        scale_stability: drift,
        pass: min_p > 0.0 && drift <= threshold,
    })
}

/// Dirichlet-form/mass ratio of the tent function `g = (s - |x|)_+` on a
/// log-log grid in `s`; the fitted slope should sit near `-(2 + 2 alpha)`.
pub fn tent_counterexample_scan(params: &LatticeParams, s_grid: &[i64]) -> Result<(f64, f64)> {
    if params.d() != 2 {
        return Err(Error::Domain("tent scan requires d = 2".into()));
    }
    let alpha = params.alpha();
    if !(-1.0 < alpha && alpha < 0.0) {
        return Err(Error::Domain("tent scan requires alpha in (-1, 0)".into()));
    }
    let s_vals: Vec<i64> = s_grid.iter().copied().filter(|&s| s >= 1).collect();
    if s_vals.len() < 2 {
        return Err(Error::InvalidParam(
            "tent scan needs at least two scales s >= 1".into(),
        ));
    }
    let mut ratios = Vec::new();
    let mut ss = Vec::new();
    for &s in &s_vals {
        let mut nu_pow = PowTable::new(alpha);
        let mut mu_pow = PowTable::new(-alpha);
        let g = |cx: i64, cy: i64| -> f64 {
            let linf = cx.abs().max(cy.abs());
            ((s - linf) as f64).max(0.0)
        };
        let mut mass = 0.0;
        let mut dirichlet = 0.0;
        for cx in -(s + 1)..=(s + 1) {
            for cy in -(s + 1)..=(s + 1) {
                let linf = cx.abs().max(cy.abs());
                let gx = g(cx, cy);
                if gx > 0.0 {
                    mass += gx * gx * nu_pow.get(linf);
                }
                // each edge once via its positive-direction endpoint
                for (nx, ny) in [(cx + 1, cy), (cx, cy + 1)] {
                    let diff = gx - g(nx, ny);
                    if diff != 0.0 {
                        let y_linf = nx.abs().max(ny.abs());
                        dirichlet += diff * diff * mu_pow.get(linf.max(y_linf));
                    }
                }
            }
        }
        if mass == 0.0 {
            continue;
        }
        ss.push(s as f64);
        ratios.push(dirichlet / mass);
    }
    log_log_slope(&ss, &ratios)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    RecurrentTrending,
    TransientTrending,
}

/// Integrate `p_t(0,0)` over `[1, t_max]` on a log grid and extrapolate the
/// tail with the fitted exponent. Recurrent-trending iff the exponent is
/// `>= -1 - tolerance`.
pub fn recurrence_probe(
    params: &LatticeParams,
    t_max: f64,
    box_radius: i64,
    cert_threshold: f64,
    tol: f64,
    exponent_tolerance: f64,
    budget: u64,
) -> Result<(f64, Verdict)> {
    if !(t_max > 1.0) {
        return Err(Error::Domain("t_max must exceed 1".into()));
    }
    let n_grid = 16usize;
    let ts: Vec<f64> = (0..n_grid)
        .map(|i| (t_max.ln() * i as f64 / (n_grid - 1) as f64).exp())
        .collect();
    let grid = ondiag_grid(params, box_radius, &ts, tol, budget)?;
    for p in &grid {
        if p.exit_mass >= cert_threshold {
            return Err(Error::Validity(format!(
                "exit mass {} at t = {} exceeds certificate threshold {}",
                p.exit_mass, p.t, cert_threshold
            )));
        }
    }
    // trapezoid over the log grid
    let mut integral = 0.0;
    for w in grid.windows(2) {
        integral += 0.5 * (w[0].p00 + w[1].p00) * (w[1].t - w[0].t);
    }
    // exponent from the upper half of the grid
    let half = &grid[n_grid / 2..];
    let ts_h: Vec<f64> = half.iter().map(|p| p.t).collect();
    let ps_h: Vec<f64> = half.iter().map(|p| p.p00).collect();
    let (exponent, _) = log_log_slope(&ts_h, &ps_h)?;
    let verdict = if exponent >= -1.0 - exponent_tolerance {
        Verdict::RecurrentTrending
    } else {
        Verdict::TransientTrending
    };
    if exponent < -1.0 {
        let last = grid.last().expect("nonempty grid");
        integral += last.p00 * last.t / (-1.0 - exponent);
    }
    Ok((integral, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn site(coords: &[i64]) -> Site {
        Site::new(SmallVec::from_slice(coords))
    }

    #[test]
    fn d1_exponent_is_universal_half() {
        // -(1 + alpha)/(2 + 2 alpha) = -1/2 for every alpha in d = 1
        let ts: Vec<f64> = (0..7).map(|i| 100.0 * 1.47f64.powi(i)).collect();
        for (alpha, radius) in [(0.0, 400), (1.0, 60)] {
            let p = LatticeParams::new(1, alpha).unwrap();
            let (slope, _) =
                ondiag_exponent_fit(&p, &ts, radius, 1e-4, 1e-10, 2_000_000).unwrap();
            assert!((slope + 0.5).abs() < 0.05, "alpha {alpha} slope {slope}");
        }
    }

    #[test]
    fn exponent_fit_rejects_uncertified_grid() {
        // a box far too small for the horizon fails the certificate
        let p = LatticeParams::new(1, 0.0).unwrap();
        let err =
            ondiag_exponent_fit(&p, &[100.0, 300.0], 20, 1e-4, 1e-10, 2_000_000).unwrap_err();
        assert!(matches!(err, Error::Validity(_)));
    }

    #[test]
    fn sandwich_fit_small_run() {
        let p = LatticeParams::new(2, -0.5).unwrap();
        let spec = SandwichSpec {
            box_radius: 120,
            x0s: vec![site(&[0, 0])],
            ts: vec![2.0, 4.0, 8.0],
            u_max: 4.0,
            tol: 1e-11,
            cert_threshold: 1e-3,
            min_p: 1e-9,
            min_samples: 30,
            budget: 2_000_000,
            rho_budget: 4_000_000,
        };
        let out = gaussian_sandwich_fit(&p, &spec).unwrap();
        assert_eq!(out.fit.violations, 0);
        assert!(out.fit.upper.slope < 0.0);
        assert!(out.fit.lower.slope < 0.0);
        assert!(out.fit.spread.is_finite());
        if let Some(up) = out.long_range_upper {
            for s in &out.long_range {
                assert!(s.z <= up.eval(s.u) + 1e-9);
            }
        }
    }

    #[test]
    fn comparability_alpha_zero_metric_band() {
        // alpha = 0: rho(x,y) = |x-y|_1 + 1, profile = |x-y|_inf, so the
        // ratio lives in [1, d+1] and the band cannot drift
        let p = LatticeParams::new(2, 0.0).unwrap();
        let spec = ComparabilitySpec {
            scales: vec![8, 16],
            pairs_per_scale: 60,
            centers_per_scale: 8,
            seed: 5,
            ..Default::default()
        };
        let reports = comparability_audit(&p, &spec).unwrap();
        let m = reports.iter().find(|r| r.name == "metric-profile").unwrap();
        assert!(m.ratio_min >= 1.0);
        assert!(m.ratio_max <= 3.0 + 1e-9);
        for r in &reports {
            assert!(r.ratio_min > 0.0, "{} min {}", r.name, r.ratio_min);
            assert!(r.ratio_max.is_finite());
        }
    }

    #[test]
    fn poincare_three_site_product_is_one() {
        let p = LatticeParams::new(1, 0.0).unwrap();
        let report =
            poincare_audit(&p, &[Site::origin(1)], &[1, 2], f64::INFINITY, 1000).unwrap();
        // r = 1: gap 1 and rho_0(1) = 1
        assert!(report.ratio_min <= 1.0 + 1e-9);
        assert!(report.ratio_max >= 1.0 - 1e-9);
        assert!(report.pass);
    }

    #[test]
    fn poincare_symmetric_centers_agree() {
        let p = LatticeParams::new(2, 1.0).unwrap();
        let a = poincare_audit(&p, &[site(&[6, 0])], &[3, 6], f64::INFINITY, 100_000).unwrap();
        let b = poincare_audit(&p, &[site(&[-6, 0])], &[3, 6], f64::INFINITY, 100_000).unwrap();
        assert_relative_eq!(a.ratio_min, b.ratio_min, max_relative = 1e-9);
        assert_relative_eq!(a.ratio_max, b.ratio_max, max_relative = 1e-9);
    }

    #[test]
    fn tent_scan_matches_expected_exponent() {
        let p = LatticeParams::new(2, -0.5).unwrap();
        let (slope, _) = tent_counterexample_scan(&p, &[16, 32, 64]).unwrap();
        assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
        // domain errors
        assert!(tent_counterexample_scan(&LatticeParams::new(1, -0.5).unwrap(), &[8, 16]).is_err());
        assert!(tent_counterexample_scan(&LatticeParams::new(2, 0.5).unwrap(), &[8, 16]).is_err());
    }

    #[test]
    fn recurrence_probe_classifies_known_cases() {
        let p1 = LatticeParams::new(1, 0.0).unwrap();
        let (integral, verdict) =
            recurrence_probe(&p1, 400.0, 300, 1e-4, 1e-10, 0.1, 2_000_000).unwrap();
        assert_eq!(verdict, Verdict::RecurrentTrending);
        assert!(integral > 0.0);
        let p3 = LatticeParams::new(3, 0.0).unwrap();
        let (_, verdict) = recurrence_probe(&p3, 25.0, 32, 1e-4, 1e-8, 0.1, 2_000_000).unwrap();
        assert_eq!(verdict, Verdict::TransientTrending);
    }
}
