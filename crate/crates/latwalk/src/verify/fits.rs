//! Least-squares fits and supporting-envelope constructions.

use crate::error::{Error, Result};

/// `z = intercept + slope * u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
}

impl LineFit {
    pub fn eval(&self, u: f64) -> f64 {
        self.intercept + self.slope * u
    }
}

/// Ordinary least squares of `z` on `u`; returns the fit and the standard
/// error of the slope.
pub fn least_squares(us: &[f64], zs: &[f64]) -> Result<(LineFit, f64)> {
    let n = us.len();
    if n != zs.len() || n < 2 {
        return Err(Error::InvalidParam(
            "least squares needs >= 2 paired samples".into(),
        ));
    }
    let nf = n as f64;
    let mean_u = us.iter().sum::<f64>() / nf;
    let mean_z = zs.iter().sum::<f64>() / nf;
    let mut suu = 0.0;
    let mut suz = 0.0;
    for (&u, &z) in us.iter().zip(zs) {
        suu += (u - mean_u) * (u - mean_u);
        suz += (u - mean_u) * (z - mean_z);
    }
    if suu == 0.0 {
        return Err(Error::InvalidParam(
            "least squares needs spread in the regressor".into(),
        ));
    }
    let slope = suz / suu;
    let intercept = mean_z - slope * mean_u;
    let fit = LineFit { intercept, slope };
    let stderr = if n > 2 {
        let ss_res: f64 = us
            .iter()
            .zip(zs)
            .map(|(&u, &z)| {
                let r = z - fit.eval(u);
                r * r
            })
            .sum();
        (ss_res / (nf - 2.0) / suu).sqrt()
    } else {
        0.0
    };
    Ok((fit, stderr))
}

/// Log-log slope: least squares of `ln z` on `ln u`.
pub fn log_log_slope(us: &[f64], zs: &[f64]) -> Result<(f64, f64)> {
    if us.iter().any(|&u| !(u > 0.0)) || zs.iter().any(|&z| !(z > 0.0)) {
        return Err(Error::Domain(
            "log-log fit requires strictly positive data".into(),
        ));
    }
    let lu: Vec<f64> = us.iter().map(|u| u.ln()).collect();
    let lz: Vec<f64> = zs.iter().map(|z| z.ln()).collect();
    let (fit, se) = least_squares(&lu, &lz)?;
    Ok((fit.slope, se))
}

/// One scatter point of an envelope fit, tagged with its origin.
#[derive(Debug, Clone)]
pub struct EnvelopeSample {
    pub u: f64,
    pub z: f64,
    pub tag: String,
}

/// Two-sided supporting-envelope fit: the least-squares slope with the
/// intercept shifted up (resp. down) until the line supports the cloud, so
/// `violations` is zero by construction and `spread` — the widest per-bin
/// z-range over integer u-bins — is the testable quantity.
#[derive(Debug, Clone)]
pub struct BoundFit {
    pub samples: Vec<EnvelopeSample>,
    pub upper: LineFit,
    pub lower: LineFit,
    pub violations: usize,
    pub spread: f64,
}

pub fn fit_envelopes(samples: Vec<EnvelopeSample>) -> Result<BoundFit> {
    let us: Vec<f64> = samples.iter().map(|s| s.u).collect();
    let zs: Vec<f64> = samples.iter().map(|s| s.z).collect();
    let (base, _) = least_squares(&us, &zs)?;
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for s in &samples {
        let resid = s.z - base.slope * s.u;
        hi = hi.max(resid);
        lo = lo.min(resid);
    }
    let upper = LineFit {
        intercept: hi,
        slope: base.slope,
    };
    let lower = LineFit {
        intercept: lo,
        slope: base.slope,
    };
    let violations = samples
        .iter()
        .filter(|s| s.z > upper.eval(s.u) + 1e-12 || s.z < lower.eval(s.u) - 1e-12)
        .count();
    Ok(BoundFit {
        spread: bin_spread(&samples),
        samples,
        upper,
        lower,
        violations,
    })
}

/// Max over integer u-bins `[k, k+1)` of the in-bin z-range.
pub fn bin_spread(samples: &[EnvelopeSample]) -> f64 {
    use std::collections::HashMap;
    let mut bins: HashMap<i64, (f64, f64)> = HashMap::new();
    for s in samples {
        let k = s.u.floor() as i64;
        let e = bins.entry(k).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(s.z);
        e.1 = e.1.max(s.z);
    }
    bins.values()
        .map(|&(lo, hi)| hi - lo)
        .fold(0.0f64, f64::max)
}
