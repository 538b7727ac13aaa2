//! Neumann spectral gap of the reflected walk on a box.
//!
//! The generator is symmetrized to `A_xy = -mu_xy / sqrt(nu_x nu_y)` with the
//! exit rates on the diagonal; `A` is positive semidefinite with kernel
//! spanned by `sqrt(nu)` when the box is connected, and the gap is its
//! smallest nonzero eigenvalue. Small systems go through a dense
//! eigendecomposition, larger ones through Lanczos with the kernel vector
//! deflated and full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

use super::{Boundary, SparseGenerator};

const DENSE_LIMIT: usize = 2000;
const LANCZOS_MAX_ITERS: usize = 500;

/// Smallest nonzero eigenvalue of the symmetrized reflected generator.
pub fn spectral_gap(gen: &SparseGenerator) -> Result<f64> {
    if gen.boundary != Boundary::Reflecting {
        return Err(Error::InvalidParam(
            "spectral gap is defined for the reflecting generator".into(),
        ));
    }
    if gen.n() < 2 {
        return Err(Error::InvalidParam(
            "spectral gap needs at least two sites".into(),
        ));
    }
    if !is_connected(gen) {
        return Err(Error::Validity("region graph is disconnected".into()));
    }
    if gen.n() <= DENSE_LIMIT {
        dense_gap(gen)
    } else {
        lanczos_gap(gen)
    }
}

fn is_connected(gen: &SparseGenerator) -> bool {
    let n = gen.n();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1usize;
    while let Some(i) = stack.pop() {
        for (j, _) in gen.row(i) {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

/// `out = A v` for the symmetrized matrix, without forming it.
fn apply_sym(gen: &SparseGenerator, sqrt_nu: &[f64], v: &[f64], out: &mut [f64]) {
    for (o, (&vi, &di)) in out.iter_mut().zip(v.iter().zip(&gen.diag)) {
        *o = di * vi;
    }
    for i in 0..gen.n() {
        let mut acc = 0.0;
        for (j, q) in gen.row(i) {
            acc += q * sqrt_nu[i] / sqrt_nu[j] * v[j];
        }
        out[i] -= acc;
    }
}

fn sqrt_nu_vec(gen: &SparseGenerator) -> Vec<f64> {
    gen.nu_vec.iter().map(|&nu| nu.sqrt()).collect()
}

fn dense_gap(gen: &SparseGenerator) -> Result<f64> {
    let n = gen.n();
    let sqrt_nu = sqrt_nu_vec(gen);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = gen.diag[i];
        for (j, q) in gen.row(i) {
            a[(i, j)] = -q * sqrt_nu[i] / sqrt_nu[j];
        }
    }
    // symmetrize away assembly round-off before the solver
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let scale = ev[n - 1].abs().max(1.0);
    if ev[0].abs() > 1e-8 * scale {
        return Err(Error::NoConvergence(format!(
            "kernel eigenvalue not resolved: lambda_0 = {}",
            ev[0]
        )));
    }
    Ok(ev[1])
}

/// Lanczos on the orthogonal complement of the kernel vector `sqrt(nu)`.
fn lanczos_gap(gen: &SparseGenerator) -> Result<f64> {
    let n = gen.n();
    let sqrt_nu = sqrt_nu_vec(gen);
    let phi_norm = sqrt_nu.iter().map(|x| x * x).sum::<f64>().sqrt();
    let phi: Vec<f64> = sqrt_nu.iter().map(|x| x / phi_norm).collect();

    let project = |v: &mut [f64]| {
        let c: f64 = v.iter().zip(&phi).map(|(a, b)| a * b).sum();
        for (vi, &pi) in v.iter_mut().zip(&phi) {
            *vi -= c * pi;
        }
    };

    // deterministic pseudo-random start, deflated
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let h = (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    project(&mut v);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for vi in &mut v {
        *vi /= norm;
    }

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last_ritz = f64::INFINITY;

    for k in 0..LANCZOS_MAX_ITERS {
        apply_sym(gen, &sqrt_nu, &basis[k], &mut w);
        let alpha: f64 = w.iter().zip(&basis[k]).map(|(a, b)| a * b).sum();
        alphas.push(alpha);
        // full reorthogonalization against the basis and the kernel vector
        project(&mut w);
        for b in &basis {
            let c: f64 = w.iter().zip(b).map(|(a, b)| a * b).sum();
            for (wi, &bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
        let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();

        if k >= 4 && (k % 5 == 0 || beta < 1e-14) {
            let ritz = smallest_ritz(&alphas, &betas);
            let scale = alphas.iter().fold(1.0f64, |m, &a| m.max(a.abs()));
            if (last_ritz - ritz).abs() <= 1e-10 * scale || beta < 1e-14 {
                return Ok(ritz.max(0.0));
            }
            last_ritz = ritz;
        }
        if beta < 1e-14 {
            return Ok(smallest_ritz(&alphas, &betas).max(0.0));
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    Err(Error::NoConvergence(
        "Lanczos did not converge within the iteration cap".into(),
    ))
}

fn smallest_ritz(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::build_generator;
    use crate::lattice::{BoxRegion, LatticeParams, Site, DEFAULT_SITE_BUDGET};
    use approx::assert_relative_eq;

    fn line_gen(alpha: f64, radius: i64) -> SparseGenerator {
        let p = LatticeParams::new(1, alpha).unwrap();
        let region = BoxRegion::new(Site::origin(1), radius, DEFAULT_SITE_BUDGET).unwrap();
        build_generator(&p, &region, Boundary::Reflecting).unwrap()
    }

    #[test]
    fn three_site_line_gap_is_one() {
        // eigenvalues of tridiag([1,2,1], off -1) are 0, 1, 3
        let gen = line_gen(0.0, 1);
        assert_relative_eq!(spectral_gap(&gen).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn simple_line_gap_matches_cosine_formula() {
        // rate-1 walk on a path of n sites: gap = 2 (1 - cos(pi / n))
        for radius in [5, 20, 60] {
            let gen = line_gen(0.0, radius);
            let n = gen.n() as f64;
            let expect = 2.0 * (1.0 - (std::f64::consts::PI / n).cos());
            assert_relative_eq!(spectral_gap(&gen).unwrap(), expect, max_relative = 1e-8);
        }
    }

    #[test]
    fn gap_times_radius_squared_is_order_one() {
        for radius in [10, 20, 40] {
            let gen = line_gen(0.0, radius);
            let scaled = spectral_gap(&gen).unwrap() * (radius * radius) as f64;
            assert!((1.0..10.0).contains(&scaled), "scaled gap {scaled}");
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let p = LatticeParams::new(2, 1.0).unwrap();
        let region = BoxRegion::new(Site::origin(2), 12, DEFAULT_SITE_BUDGET).unwrap();
        let gen = build_generator(&p, &region, Boundary::Reflecting).unwrap();
        assert!(gen.n() <= DENSE_LIMIT);
        let dense = dense_gap(&gen).unwrap();
        let lanczos = lanczos_gap(&gen).unwrap();
        assert_relative_eq!(dense, lanczos, max_relative = 1e-6);
    }

    #[test]
    fn absorbing_generator_rejected() {
        let p = LatticeParams::new(1, 0.0).unwrap();
        let region = BoxRegion::new(Site::origin(1), 3, DEFAULT_SITE_BUDGET).unwrap();
        let gen = build_generator(&p, &region, Boundary::Absorbing).unwrap();
        assert!(spectral_gap(&gen).is_err());
    }
}
