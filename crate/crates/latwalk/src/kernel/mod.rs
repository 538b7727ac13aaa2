//! Finite-box generators for the walk and exact transition computations.
//!
//! The walk restricted to a box comes in two flavors: reflecting (edges
//! leaving the box are dropped, the conservative reflected walk) and
//! absorbing (those edges route to a cemetery). Transition distributions are
//! computed by uniformization with an a-priori Poisson-tail error bound;
//! Neumann spectral gaps back the Poincare audits.

mod gap;
mod spectral1d;
mod uniformization;

pub use gap::spectral_gap;
pub use spectral1d::{ondiag_grid_1d, OndiagSample};
pub use uniformization::{
    transition_distribution, transition_from, transition_grid, TransitionResult,
};

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, LatticeParams, PowTable, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Reflecting,
    Absorbing,
}

/// Sparse rate matrix of the boxed walk.
///
/// Off-diagonal entries are jump rates `q_xy = mu_xy / nu_x` for
/// region-internal nearest-neighbor pairs (CSR, rows indexed by the region's
/// site index). `diag` is the total exit rate per site; for the absorbing
/// variant it includes the killing rate of edges leaving the region, so row
/// sums of `rates` fall short of `diag` exactly by that killing rate.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    pub region: BoxRegion,
    pub boundary: Boundary,
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    pub diag: Vec<f64>,
    pub nu_vec: Vec<f64>,
    pub lambda_max: f64,
}

impl SparseGenerator {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i] as usize;
        let hi = self.row_ptr[i + 1] as usize;
        self.cols[lo..hi]
            .iter()
            .zip(&self.rates[lo..hi])
            .map(|(&c, &r)| (c as usize, r))
    }

    /// Row sum of off-diagonal rates (equals `diag` for reflecting rows).
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, r)| r).sum()
    }
}

/// Assemble the generator of the boxed walk.
pub fn build_generator(
    params: &LatticeParams,
    region: &BoxRegion,
    boundary: Boundary,
) -> Result<SparseGenerator> {
    if region.d() != params.d() {
        return Err(Error::InvalidParam(
            "region dimension does not match params".into(),
        ));
    }
    let n = region.len();
    let mut nu_pow = PowTable::new(params.alpha());
    let mut mu_pow = PowTable::new(-params.alpha());
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut rates = Vec::new();
    let mut diag = Vec::with_capacity(n);
    let mut nu_vec = Vec::with_capacity(n);
    let mut lambda_max = 0.0f64;
    row_ptr.push(0u32);
    for i in 0..n {
        let x = region.site_at(i);
        let xn = x.linf();
        let nu_x = nu_pow.get(xn);
        let mut exit = 0.0;
        for y in x.neighbors() {
            let mu_xy = mu_pow.get(xn.max(y.linf()));
            match region.index_of(&y) {
                Some(j) => {
                    cols.push(j as u32);
                    rates.push(mu_xy / nu_x);
                    exit += mu_xy / nu_x;
                }
                None => {
                    if boundary == Boundary::Absorbing {
                        exit += mu_xy / nu_x; // killing rate
                    }
                }
            }
        }
        row_ptr.push(cols.len() as u32);
        diag.push(exit);
        nu_vec.push(nu_x);
        lambda_max = lambda_max.max(exit);
    }
    Ok(SparseGenerator {
        region: region.clone(),
        boundary,
        row_ptr,
        cols,
        rates,
        diag,
        nu_vec,
        lambda_max,
    })
}

/// One heat-kernel evaluation `p_t(x, y)` with its escape diagnostic.
#[derive(Debug, Clone)]
pub struct HeatKernelSample {
    pub x: Site,
    pub y: Site,
    pub t: f64,
    /// Density with respect to `nu`.
    pub p: f64,
    /// Probability that the free walk started at `x` has left the box by
    /// time `t`, from a companion absorbing run.
    pub escaped_mass: f64,
    pub tol: f64,
}

impl HeatKernelSample {
    /// The reflecting-box kernel stands in for the free-lattice kernel only
    /// while the walk has essentially not seen the boundary.
    pub fn is_free_lattice_valid(&self) -> bool {
        self.escaped_mass < 100.0 * self.tol
    }
}

/// Reflecting and absorbing generators on the same region, paired so that
/// every reflecting kernel value can carry an escape certificate.
pub struct KernelBox {
    pub params: LatticeParams,
    pub reflecting: SparseGenerator,
    pub absorbing: SparseGenerator,
}

impl KernelBox {
    pub fn new(params: &LatticeParams, region: &BoxRegion) -> Result<Self> {
        Ok(Self {
            params: *params,
            reflecting: build_generator(params, region, Boundary::Reflecting)?,
            absorbing: build_generator(params, region, Boundary::Absorbing)?,
        })
    }

    pub fn region(&self) -> &BoxRegion {
        &self.reflecting.region
    }
}

/// `p_t(x, y) = P_x(X_t = y) / nu_y` on the boxed walk, with the companion
/// absorbing run reporting how much mass the free walk would have carried
/// out of the box.
pub fn heat_kernel(
    kbox: &KernelBox,
    x: &Site,
    y: &Site,
    t: f64,
    tol: f64,
) -> Result<HeatKernelSample> {
    let region = kbox.region();
    let iy = region
        .index_of(y)
        .ok_or_else(|| Error::Domain(format!("site {y} outside region")))?;
    let refl = transition_distribution(&kbox.reflecting, x, t, tol)?;
    let abs = transition_distribution(&kbox.absorbing, x, t, tol)?;
    Ok(HeatKernelSample {
        x: x.clone(),
        y: y.clone(),
        t,
        p: refl.probs[iy] / kbox.reflecting.nu_vec[iy],
        escaped_mass: abs.escaped_mass,
        tol,
    })
}

/// `P_x0(tau_{w,R} <= t)`: probability of leaving `B(w, R)` by time `t`.
pub fn exit_mass(
    params: &LatticeParams,
    w: &Site,
    radius: i64,
    x0: &Site,
    t: f64,
    tol: f64,
    budget: u64,
) -> Result<f64> {
    if w.linf_distance(x0) > radius - 1 {
        return Err(Error::Domain(
            "exit_mass requires x0 strictly inside B(w, R)".into(),
        ));
    }
    let region = BoxRegion::new(w.clone(), radius, budget)?;
    let gen = build_generator(params, &region, Boundary::Absorbing)?;
    let res = transition_distribution(&gen, x0, t, tol)?;
    Ok(res.escaped_mass)
}
