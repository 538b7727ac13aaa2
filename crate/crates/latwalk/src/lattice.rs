//! The power-law weighted lattice: vertex weights, edge conductances, jump
//! rates, and finite box truncations with a dense site index.
//!
//! Sites carry weight `nu_x = (|x| v 1)^alpha` and nearest-neighbor edges
//! carry conductance `mu_xy = (|x| v |y|)^(-alpha)`, where `|.|` is the
//! L-infinity norm. The walk jumps from `x` at rate `mu_x / nu_x` and picks
//! neighbor `y` with probability `mu_xy / mu_x`.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Default ceiling on the number of sites any operation may materialize.
pub const DEFAULT_SITE_BUDGET: u64 = 2_000_000;

/// Model parameters: dimension `d >= 1` and exponent `alpha > -1`.
///
/// `alpha <= -1` is rejected at construction: there the walk explodes in
/// finite time and the heat-kernel behavior at the critical point is open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    d: usize,
    alpha: f64,
}

impl LatticeParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidParam("dimension d must be >= 1".into()));
        }
        if !(alpha > -1.0) || !alpha.is_finite() {
            return Err(Error::InvalidParam(format!(
                "alpha must be a finite real > -1 (critical case alpha = -1 is open, \
                 alpha < -1 explodes in finite time); got {alpha}"
            )));
        }
        Ok(Self { d, alpha })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Vertex weight `nu_x = (|x| v 1)^alpha`.
    pub fn nu(&self, x: &Site) -> f64 {
        debug_assert_eq!(x.dim(), self.d);
        pow_norm(x.linf(), self.alpha)
    }

    /// Edge conductance `mu_xy = (|x| v |y|)^(-alpha)` for nearest neighbors,
    /// 0 otherwise. Symmetric in `(x, y)`.
    pub fn conductance(&self, x: &Site, y: &Site) -> f64 {
        debug_assert_eq!(x.dim(), self.d);
        debug_assert_eq!(y.dim(), self.d);
        if x.l1_distance(y) != 1 {
            return 0.0;
        }
        pow_norm(x.linf().max(y.linf()), -self.alpha)
    }

    /// Total conductance `mu_x`, jump rate `mu_x / nu_x`, and mean holding
    /// time `nu_x / mu_x` at a site.
    pub fn site_rates(&self, x: &Site) -> SiteRates {
        let mut mu_total = 0.0;
        for y in x.neighbors() {
            mu_total += self.conductance(x, &y);
        }
        let nu = self.nu(x);
        SiteRates {
            mu_total,
            jump_rate: mu_total / nu,
            mean_holding: nu / mu_total,
        }
    }

    /// Exact volume `V(x, r) = nu(B(x, floor(r)))` by summation over the box.
    pub fn volume_exact(&self, x: &Site, r: f64, budget: u64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::Domain("volume_exact requires r >= 0".into()));
        }
        let region = BoxRegion::new(x.clone(), r.floor() as i64, budget)?;
        let mut total = 0.0;
        for idx in 0..region.len() {
            total += self.nu(&region.site_at(idx));
        }
        Ok(total)
    }

    /// Volume comparison profile `r^d (|x| v r)^alpha` (constants dropped).
    pub fn volume_closed_form(&self, x: &Site, r: f64) -> Result<f64> {
        if r < 1.0 {
            return Err(Error::Domain("volume_closed_form requires r >= 1".into()));
        }
        let scale = (x.linf() as f64).max(r);
        Ok(r.powi(self.d as i32) * scale.powf(self.alpha))
    }
}

/// Per-site rate summary; `jump_rate * mean_holding == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteRates {
    pub mu_total: f64,
    pub jump_rate: f64,
    pub mean_holding: f64,
}

fn pow_norm(norm: i64, exponent: f64) -> f64 {
    let base = norm.max(1) as f64;
    if exponent == 0.0 {
        1.0
    } else {
        base.powf(exponent)
    }
}

/// A lattice point in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(pub SmallVec<[i64; 4]>);

impl Site {
    pub fn new(coords: impl Into<SmallVec<[i64; 4]>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(d: usize) -> Self {
        Site(SmallVec::from_elem(0, d))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// L-infinity norm `|x|`.
    pub fn linf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// L1 norm `|x|_1`.
    pub fn l1(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn linf_distance(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn l1_distance(&self, other: &Site) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    /// The `2d` nearest neighbors.
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            [-1i64, 1].into_iter().map(move |step| {
                let mut c = self.0.clone();
                c[axis] += step;
                Site(c)
            })
        })
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let strs: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", strs.join(","))
    }
}

/// An L-infinity box `B(center, R)` with a row-major bijection between its
/// sites and `0 .. (2R+1)^d`.
#[derive(Debug, Clone)]
pub struct BoxRegion {
    center: Site,
    radius: i64,
    len: usize,
}

impl BoxRegion {
    pub fn new(center: Site, radius: i64, budget: u64) -> Result<Self> {
        if radius < 0 {
            return Err(Error::Domain("box radius must be >= 0".into()));
        }
        let side = 2 * radius as u128 + 1;
        let mut len: u128 = 1;
        for _ in 0..center.dim() {
            len = len.saturating_mul(side);
            if len > budget as u128 {
                return Err(Error::Budget {
                    needed: side.saturating_pow(center.dim() as u32),
                    budget,
                });
            }
        }
        Ok(Self {
            center,
            radius,
            len: len as usize,
        })
    }

    pub fn center(&self) -> &Site {
        &self.center
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn d(&self) -> usize {
        self.center.dim()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.center.linf_distance(x) <= self.radius
    }

    /// Row-major index of a site, or None if outside the box.
    pub fn index_of(&self, x: &Site) -> Option<usize> {
        let side = (2 * self.radius + 1) as usize;
        let mut idx = 0usize;
        for (c, c0) in x.0.iter().zip(&self.center.0) {
            let off = c - c0;
            if off.abs() > self.radius {
                return None;
            }
            idx = idx * side + (off + self.radius) as usize;
        }
        Some(idx)
    }

    /// Inverse of `index_of`.
    pub fn site_at(&self, mut idx: usize) -> Site {
        debug_assert!(idx < self.len);
        let side = (2 * self.radius + 1) as usize;
        let d = self.d();
        let mut coords = SmallVec::from_elem(0i64, d);
        for axis in (0..d).rev() {
            let off = (idx % side) as i64 - self.radius;
            coords[axis] = self.center.0[axis] + off;
            idx /= side;
        }
        Site(coords)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len).map(move |i| self.site_at(i))
    }
}

/// Growable lookup table for `(n v 1)^exponent` indexed by integer norm.
///
/// The walk and generator assembly evaluate `nu` and `mu` millions of times
/// on norms that repeat; a flat table is much cheaper than `powf` per call.
#[derive(Debug, Clone)]
pub struct PowTable {
    exponent: f64,
    table: Vec<f64>,
}

impl PowTable {
    pub fn new(exponent: f64) -> Self {
        Self {
            exponent,
            table: Vec::new(),
        }
    }

    #[inline]
    pub fn get(&mut self, norm: i64) -> f64 {
        let n = norm.max(0) as usize;
        if n >= self.table.len() {
            self.grow(n);
        }
        self.table[n]
    }

    #[cold]
    fn grow(&mut self, n: usize) {
        let new_len = (n + 1).max(self.table.len() * 2).max(64);
        for k in self.table.len()..new_len {
            self.table.push(pow_norm(k as i64, self.exponent));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn site(coords: &[i64]) -> Site {
        Site::new(SmallVec::from_slice(coords))
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LatticeParams::new(0, 0.0).is_err());
        assert!(LatticeParams::new(1, -1.0).is_err());
        assert!(LatticeParams::new(1, -1.5).is_err());
        assert!(LatticeParams::new(1, f64::NAN).is_err());
        assert!(LatticeParams::new(3, 8.0).is_ok());
    }

    #[test]
    fn nu_examples() {
        let p = LatticeParams::new(2, 2.0).unwrap();
        assert_relative_eq!(p.nu(&site(&[3, 4])), 16.0);
        let p = LatticeParams::new(2, 1.7).unwrap();
        assert_relative_eq!(p.nu(&site(&[0, 0])), 1.0);
        let p = LatticeParams::new(3, -0.5).unwrap();
        assert_relative_eq!(p.nu(&site(&[4, -9, 1])), 1.0 / 3.0);
    }

    #[test]
    fn conductance_examples() {
        let p = LatticeParams::new(2, 1.0).unwrap();
        assert_relative_eq!(p.conductance(&site(&[2, 0]), &site(&[3, 0])), 1.0 / 3.0);
        let p = LatticeParams::new(2, 0.7).unwrap();
        assert_relative_eq!(p.conductance(&site(&[0, 0]), &site(&[2, 0])), 0.0);
        let p = LatticeParams::new(2, 0.0).unwrap();
        assert_relative_eq!(p.conductance(&site(&[5, 1]), &site(&[5, 2])), 1.0);
    }

    #[test]
    fn site_rates_examples() {
        let p = LatticeParams::new(2, 0.0).unwrap();
        let r = p.site_rates(&site(&[7, -3]));
        assert_relative_eq!(r.mu_total, 4.0);
        assert_relative_eq!(r.jump_rate, 4.0);
        assert_relative_eq!(r.mean_holding, 0.25);

        let p = LatticeParams::new(1, 2.0).unwrap();
        let r = p.site_rates(&site(&[0]));
        assert_relative_eq!(r.mu_total, 2.0);
        assert_relative_eq!(r.jump_rate, 2.0);
        assert_relative_eq!(r.mean_holding, 0.5);

        // alpha=1, d=2, x=(5,0): neighbors (4,0),(6,0),(5,1),(5,-1)
        let p = LatticeParams::new(2, 1.0).unwrap();
        let r = p.site_rates(&site(&[5, 0]));
        let expected = 1.0 / 5.0 + 1.0 / 6.0 + 1.0 / 5.0 + 1.0 / 5.0;
        assert_relative_eq!(r.mu_total, expected, max_relative = 1e-12);
        assert_relative_eq!(r.jump_rate, expected / 5.0, max_relative = 1e-12);
        assert_relative_eq!(r.mean_holding, 5.0 / expected, max_relative = 1e-12);
        assert_relative_eq!(r.jump_rate * r.mean_holding, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn volume_examples() {
        let p = LatticeParams::new(1, 0.0).unwrap();
        assert_relative_eq!(
            p.volume_exact(&site(&[0]), 2.0, DEFAULT_SITE_BUDGET).unwrap(),
            5.0
        );
        let p = LatticeParams::new(1, 1.0).unwrap();
        assert_relative_eq!(
            p.volume_exact(&site(&[0]), 2.0, DEFAULT_SITE_BUDGET).unwrap(),
            7.0
        );
        let p = LatticeParams::new(3, -0.25).unwrap();
        let x = site(&[2, 1, -4]);
        assert_relative_eq!(
            p.volume_exact(&x, 0.0, DEFAULT_SITE_BUDGET).unwrap(),
            p.nu(&x)
        );
    }

    #[test]
    fn volume_closed_form_examples() {
        let p = LatticeParams::new(2, 0.0).unwrap();
        assert_relative_eq!(p.volume_closed_form(&site(&[9, 2]), 10.0).unwrap(), 100.0);
        let p = LatticeParams::new(2, 1.0).unwrap();
        assert_relative_eq!(p.volume_closed_form(&site(&[8, 0]), 2.0).unwrap(), 32.0);
        assert!(p.volume_closed_form(&site(&[8, 0]), 0.5).is_err());
    }

    #[test]
    fn volume_budget_error() {
        let p = LatticeParams::new(3, 0.0).unwrap();
        let err = p.volume_exact(&Site::origin(3), 100.0, 1000).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn box_region_roundtrip() {
        let region = BoxRegion::new(site(&[3, -2]), 2, 1000).unwrap();
        assert_eq!(region.len(), 25);
        for idx in 0..region.len() {
            let s = region.site_at(idx);
            assert!(region.contains(&s));
            assert_eq!(region.index_of(&s), Some(idx));
        }
        assert_eq!(region.index_of(&site(&[6, 0])), None);
    }

    #[test]
    fn pow_table_matches_direct() {
        let mut t = PowTable::new(-0.7);
        for n in [0i64, 1, 2, 17, 4096] {
            assert_relative_eq!(t.get(n), (n.max(1) as f64).powf(-0.7));
        }
    }

    proptest! {
        #[test]
        fn conductance_symmetry(
            alpha in -0.99f64..4.0,
            xs in prop::collection::vec(-20i64..20, 2),
            axis in 0usize..2,
            step in prop::sample::select(vec![-1i64, 1]),
        ) {
            let p = LatticeParams::new(2, alpha).unwrap();
            let x = site(&xs);
            let mut ys = xs.clone();
            ys[axis] += step;
            let y = site(&ys);
            prop_assert!((p.conductance(&x, &y) - p.conductance(&y, &x)).abs() < 1e-15);
            // reversibility: nu_x * q_xy = mu_xy symmetric
            let q_xy = p.conductance(&x, &y) / p.nu(&x);
            let q_yx = p.conductance(&y, &x) / p.nu(&y);
            prop_assert!((p.nu(&x) * q_xy - p.nu(&y) * q_yx).abs() < 1e-12);
        }

        #[test]
        fn volume_monotone_in_r(alpha in -0.9f64..3.0, r1 in 0.0f64..6.0, dr in 0.0f64..4.0) {
            let p = LatticeParams::new(2, alpha).unwrap();
            let x = site(&[3, 1]);
            let v1 = p.volume_exact(&x, r1, DEFAULT_SITE_BUDGET).unwrap();
            let v2 = p.volume_exact(&x, r1 + dr, DEFAULT_SITE_BUDGET).unwrap();
            prop_assert!(v2 >= v1 - 1e-12);
            prop_assert!(v1 >= p.nu(&x) - 1e-12);
        }
    }
}
