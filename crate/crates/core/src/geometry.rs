//! Vector primitives, reflection and perturbation maps, and sphere sampling.
//!
//! Vectors are plain `&[f64]` slices. All maps here are pure functions of
//! their arguments plus an explicit RNG, so they can be shared freely
//! between chains.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Below this norm a gradient is treated as zero.
pub const TOL_GRAD: f64 = 1e-12;
/// Degeneracy threshold for the partial-gradient reflection.
pub const TOL_DOT: f64 = 1e-10;
/// Orthonormality tolerance accepted by [`combine_directions`].
pub const TOL_ORTHO: f64 = 1e-8;

const PAIRWISE_BLOCK: usize = 64;

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Inner product; pairwise summation above 64 components.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BLOCK {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            s += x * y;
        }
        s
    } else {
        let mid = a.len() / 2;
        dot(&a[..mid], &b[..mid]) + dot(&a[mid..], &b[mid..])
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

/// `a + c * b`
pub fn axpy(a: &[f64], c: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + c * y).collect()
}

pub fn normalized(a: &[f64]) -> Vec<f64> {
    scale(a, 1.0 / norm(a))
}

/// Removes the component of `z` along the unit vector `e`, in place.
fn project_out(z: &mut [f64], e: &[f64]) {
    let c = dot(z, e);
    for (zi, ei) in z.iter_mut().zip(e) {
        *zi -= c * ei;
    }
}

pub fn standard_normal_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Positive-definite metric `Gamma = M^T M` used for preconditioning.
///
/// Velocities live on the ellipsoid `u^T Gamma u = 1`; `u* = M u` is the
/// corresponding unit vector in the transformed space `x* = M x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    gamma: DMatrix<f64>,
    factor: DMatrix<f64>,
    inverse_factor: DMatrix<f64>,
    identity: bool,
}

impl Metric {
    pub fn identity(d: usize) -> Self {
        let eye = DMatrix::identity(d, d);
        Metric {
            gamma: eye.clone(),
            factor: eye.clone(),
            inverse_factor: eye,
            identity: true,
        }
    }

    /// Builds the metric from a symmetric positive-definite `Gamma` via its
    /// Cholesky factor `Gamma = L L^T`, taking `M = L^T`.
    pub fn from_gamma(gamma: DMatrix<f64>) -> Result<Self> {
        let d = gamma.nrows();
        if gamma.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: gamma.ncols(),
            });
        }
        let gmax = gamma.amax();
        if (&gamma - gamma.transpose()).amax() > 1e-12 * gmax.max(1.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = gamma
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?;
        let factor = chol.l().transpose();
        let inverse_factor = factor
            .clone()
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite)?;
        if (factor.transpose() * &factor - &gamma).amax() > 1e-10 * gmax {
            return Err(Error::NotPositiveDefinite);
        }
        let identity = gamma == DMatrix::identity(d, d);
        Ok(Metric {
            gamma,
            factor,
            inverse_factor,
            identity,
        })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = diag.len();
        let gamma = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag));
        let factor = DMatrix::from_fn(d, d, |i, j| if i == j { diag[i].sqrt() } else { 0.0 });
        let inverse_factor =
            DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 / diag[i].sqrt() } else { 0.0 });
        let identity = diag.iter().all(|&g| g == 1.0);
        Ok(Metric {
            gamma,
            factor,
            inverse_factor,
            identity,
        })
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn inverse_factor(&self) -> &DMatrix<f64> {
        &self.inverse_factor
    }

    /// `M v`
    pub fn to_transformed(&self, v: &[f64]) -> Vec<f64> {
        if self.identity {
            return v.to_vec();
        }
        mat_vec(&self.factor, v)
    }

    /// `M^{-1} v`
    pub fn from_transformed(&self, v: &[f64]) -> Vec<f64> {
        if self.identity {
            return v.to_vec();
        }
        mat_vec(&self.inverse_factor, v)
    }

    /// `M^{-T} g`: maps a gradient (covector) into the transformed space.
    pub fn covector_to_transformed(&self, g: &[f64]) -> Vec<f64> {
        if self.identity {
            return g.to_vec();
        }
        mat_t_vec(&self.inverse_factor, g)
    }

    /// `Gamma^{-1} v = M^{-1} M^{-T} v`
    pub fn inverse_apply(&self, v: &[f64]) -> Vec<f64> {
        if self.identity {
            return v.to_vec();
        }
        mat_vec(&self.inverse_factor, &mat_t_vec(&self.inverse_factor, v))
    }

    /// `u^T Gamma u`
    pub fn quad_form(&self, u: &[f64]) -> f64 {
        let mu = self.to_transformed(u);
        dot(&mu, &mu)
    }
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let (r, c) = m.shape();
    debug_assert_eq!(c, v.len());
    (0..r)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..c {
                s += m[(i, j)] * v[j];
            }
            s
        })
        .collect()
}

pub(crate) fn mat_t_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let (r, c) = m.shape();
    debug_assert_eq!(r, v.len());
    (0..c).map(|j| dot(m.column(j).as_slice(), v)).collect()
}

/// Reflection of `u` in the hyperplane orthogonal to `v`:
/// `-u + 2 <u,v>/<v,v> v`.
pub fn reflect(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_dims(u, v)?;
    let vv = dot(v, v);
    let nv = vv.sqrt();
    if !(nv > TOL_GRAD) {
        return Err(Error::DegenerateDirection { norm: nv });
    }
    let c = 2.0 * dot(u, v) / vv;
    Ok(u.iter().zip(v).map(|(ui, vi)| -ui + c * vi).collect())
}

/// Metric reflection `-u + 2 <u,v>/(v^T Gamma^{-1} v) Gamma^{-1} v`.
///
/// Preserves `<u,v>` and `u^T Gamma u`, and equals the plain reflection of
/// `M u` in `M^{-T} v` mapped back through `M^{-1}`.
pub fn reflect_precond(u: &[f64], v: &[f64], metric: &Metric) -> Result<Vec<f64>> {
    check_dims(u, v)?;
    if metric.dim() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: metric.dim(),
        });
    }
    if metric.is_identity() {
        return reflect(u, v);
    }
    let nv = norm(v);
    if !(nv > TOL_GRAD) {
        return Err(Error::DegenerateDirection { norm: nv });
    }
    let w = metric.inverse_apply(v);
    let c = 2.0 * dot(u, v) / dot(v, &w);
    Ok(u.iter().zip(&w).map(|(ui, wi)| -ui + c * wi).collect())
}

/// Uniform draw on the unit sphere in `d` dimensions.
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    assert!(d >= 1, "sphere dimension must be at least 1");
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let z = standard_normal_vec(d, rng);
        let n = norm(&z);
        if n > 1e-300 {
            return scale(&z, 1.0 / n);
        }
    }
}

/// Uniform unit vector orthogonal to the unit vector `u`.
pub fn sample_orthogonal_unit<R: Rng + ?Sized>(u: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let d = u.len();
    if d < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: d });
    }
    let uh = normalized(u);
    loop {
        let mut z = standard_normal_vec(d, rng);
        project_out(&mut z, &uh);
        let n = norm(&z);
        if n < 1e-12 {
            continue;
        }
        for zi in z.iter_mut() {
            *zi /= n;
        }
        // second pass clears residual rounding along u
        project_out(&mut z, &uh);
        let n = norm(&z);
        return Ok(scale(&z, 1.0 / n));
    }
}

/// Perturbed bounce: rotates the part of `u_refl` orthogonal to `v` by an
/// amount set by `eps`, keeping `<u_refl, v>` and the norm fixed.
///
/// Returns `u_refl` unchanged (and draws nothing) when `eps == 0`, `d < 3`
/// or the orthogonal part vanishes.
pub fn perturb_bounce<R: Rng + ?Sized>(
    u_refl: &[f64],
    v: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dims(u_refl, v)?;
    let d = u_refl.len();
    let nv = norm(v);
    if !(nv > TOL_GRAD) {
        return Err(Error::DegenerateDirection { norm: nv });
    }
    if eps == 0.0 || d < 3 {
        return Ok(u_refl.to_vec());
    }
    let vh = scale(v, 1.0 / nv);
    let along = dot(u_refl, &vh);
    let perp = axpy(u_refl, -along, &vh);
    let n_perp = norm(&perp);
    if n_perp <= 1e-12 {
        return Ok(u_refl.to_vec());
    }
    let eh = scale(&perp, 1.0 / n_perp);
    let zeta = loop {
        let mut z = standard_normal_vec(d, rng);
        for _ in 0..2 {
            project_out(&mut z, &vh);
            project_out(&mut z, &eh);
        }
        let n = norm(&z);
        if n > 1e-12 {
            break scale(&z, 1.0 / n);
        }
    };
    let keep = (1.0 - eps * eps).sqrt();
    Ok((0..d)
        .map(|i| along * vh[i] + keep * perp[i] + eps * n_perp * zeta[i])
        .collect())
}

/// One step of the discretised spherical Brownian motion:
/// `(u + sqrt(kappa delta) zeta) / sqrt(1 + kappa delta)` with `zeta`
/// uniform on the unit sphere orthogonal to `u`.
///
/// In one dimension there is no orthogonal direction and `u` is returned.
pub fn perturb_velocity<R: Rng + ?Sized>(u: &[f64], kappa: f64, delta: f64, rng: &mut R) -> Vec<f64> {
    if kappa == 0.0 || u.len() < 2 {
        return u.to_vec();
    }
    let zeta = sample_orthogonal_unit(u, rng).expect("dimension checked above");
    let s = (kappa * delta).sqrt();
    let denom = (1.0 + kappa * delta).sqrt();
    u.iter().zip(&zeta).map(|(ui, zi)| (ui + s * zi) / denom).collect()
}

/// Partial-gradient reflection from the three inner products
/// `<u,g>`, `<zeta,g>`, `<zeta,u>`.
///
/// The reflection is invariant to the scale of `g`; callers pass products
/// against a normalised gradient so that the [`TOL_DOT`] thresholds are
/// scale free.
pub fn subset_reflect_products(
    u: &[f64],
    zeta: &[f64],
    ug: f64,
    zg: f64,
    zu: f64,
) -> Result<Vec<f64>> {
    check_dims(u, zeta)?;
    if ug.abs() <= TOL_DOT {
        return Err(Error::DegenerateConfiguration("<u,g> vanishes"));
    }
    let a_den = 2.0 * ug * (zg - zu * ug);
    if a_den.abs() <= TOL_DOT {
        return Err(Error::DegenerateConfiguration("denominator of a vanishes"));
    }
    let a = (zg * zg - ug * ug) / a_den;
    let b = zg / ug - a;
    if b.abs() <= TOL_DOT || !b.is_finite() {
        return Err(Error::DegenerateConfiguration("b vanishes"));
    }
    // The map `(zeta - a u) / b` is the mirror of `u` about the projection
    // of `g` onto span(u, zeta). Evaluating it in an orthonormal basis of
    // that plane avoids the cancellation in `1 / b` when `b` is small.
    let nu = norm(u);
    let e1: Vec<f64> = u.iter().map(|v| v / nu).collect();
    let ze1 = dot(zeta, &e1);
    let mut e2: Vec<f64> = zeta.iter().zip(&e1).map(|(zi, ei)| zi - ze1 * ei).collect();
    let s = norm(&e2);
    e2.iter_mut().for_each(|v| *v /= s);
    let p1 = ug;
    let p2 = (zg - ze1 * ug) / s;
    let n2 = p1 * p1 + p2 * p2;
    let c1 = (p1 - p2) * (p1 + p2) / n2;
    let c2 = 2.0 * p1 * p2 / n2;
    Ok(e1.iter().zip(&e2).map(|(ui, ei)| c1 * ui + c2 * ei).collect())
}

/// Reflection that preserves `|u|` and `<u,g>` using the direction `zeta`.
///
/// With `zeta = -g/|g|` it is the ordinary reflection; applying it twice
/// with the same `(g, zeta)` returns `u`.
pub fn subset_reflect(u: &[f64], g: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
    check_dims(u, g)?;
    check_dims(u, zeta)?;
    let ng = norm(g);
    if !(ng > TOL_GRAD) {
        return Err(Error::DegenerateDirection { norm: ng });
    }
    let ug = dot(u, g) / ng;
    let zg = dot(zeta, g) / ng;
    let zu = dot(zeta, u);
    subset_reflect_products(u, zeta, ug, zg, zu)
}

/// Unit combination `-sum c_i zeta_i / sqrt(sum c_i^2)` from precomputed
/// coefficients `c_i = <zeta_i, g>`.
pub fn combine_directions_products(zetas: &[Vec<f64>], coeffs: &[f64]) -> Result<Vec<f64>> {
    let first = zetas
        .first()
        .ok_or(Error::DegenerateConfiguration("no directions"))?;
    if coeffs.len() != zetas.len() {
        return Err(Error::DimensionMismatch {
            expected: zetas.len(),
            got: coeffs.len(),
        });
    }
    let s = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateConfiguration("all directional derivatives vanish"));
    }
    let mut out = vec![0.0; first.len()];
    for (z, c) in zetas.iter().zip(coeffs) {
        check_dims(first, z)?;
        for (o, zi) in out.iter_mut().zip(z) {
            *o -= c / s * zi;
        }
    }
    Ok(out)
}

/// The unit vector in `span(zetas)` with the most negative component along `g`.
pub fn combine_directions(zetas: &[Vec<f64>], g: &[f64]) -> Result<Vec<f64>> {
    let mut deviation: f64 = 0.0;
    for (i, zi) in zetas.iter().enumerate() {
        check_dims(g, zi)?;
        deviation = deviation.max((dot(zi, zi) - 1.0).abs());
        for zj in &zetas[..i] {
            deviation = deviation.max(dot(zi, zj).abs());
        }
    }
    if deviation > TOL_ORTHO {
        return Err(Error::NotOrthonormal { deviation });
    }
    let ng = norm(g);
    if !(ng > TOL_GRAD) {
        return Err(Error::DegenerateDirection { norm: ng });
    }
    let coeffs: Vec<f64> = zetas.iter().map(|z| dot(z, g) / ng).collect();
    if coeffs.iter().all(|c| c.abs() <= TOL_DOT) {
        return Err(Error::DegenerateConfiguration("all directional derivatives vanish"));
    }
    combine_directions_products(zetas, &coeffs)
}

/// `k` orthonormal vectors: `u` itself (normalised) followed by `k - 1`
/// random directions orthogonal to it and to each other.
pub fn random_orthonormal_with<R: Rng + ?Sized>(u: &[f64], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let d = u.len();
    assert!(k >= 1 && k <= d);
    let mut basis = vec![normalized(u)];
    while basis.len() < k {
        let mut z = standard_normal_vec(d, rng);
        for _ in 0..2 {
            for e in &basis {
                project_out(&mut z, e);
            }
        }
        let n = norm(&z);
        if n > 1e-8 {
            basis.push(scale(&z, 1.0 / n));
        }
    }
    basis
}
