//! Gaussian approximation at the mode, used as a cheap gradient field.

use nalgebra::{DMatrix, DVector};

use super::{nelder_mead, NelderMeadOptions, TargetModel};
use crate::error::{Error, Result};

/// Linear gradient field `V(x) = -H (x - m)`.
#[derive(Debug, Clone)]
pub struct GaussianSurrogate {
    mode: Vec<f64>,
    hessian: DMatrix<f64>,
    condition_number: f64,
    n_floored: usize,
}

const SYMMETRY_TOL: f64 = 1e-8;
const FLOOR_REL: f64 = 1e-6;

impl GaussianSurrogate {
    /// `hessian` must be symmetric (within 1e-8 relative) and positive
    /// definite.
    pub fn new(mode: Vec<f64>, hessian: DMatrix<f64>) -> Result<Self> {
        let d = mode.len();
        if hessian.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: hessian.nrows(),
            });
        }
        let scale = hessian.amax().max(f64::MIN_POSITIVE);
        if (&hessian - hessian.transpose()).amax() > SYMMETRY_TOL * scale {
            return Err(Error::InvalidConfig("surrogate Hessian is not symmetric".into()));
        }
        let eig = hessian.clone().symmetric_eigen();
        let lo = eig.eigenvalues.min();
        let hi = eig.eigenvalues.max();
        if !(lo > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(GaussianSurrogate {
            mode,
            hessian,
            condition_number: hi / lo,
            n_floored: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mode.len()
    }

    pub fn mode(&self) -> &[f64] {
        &self.mode
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    /// Eigenvalues raised to the floor during fitting.
    pub fn n_floored(&self) -> usize {
        self.n_floored
    }

    pub fn field(&self, x: &[f64]) -> Vec<f64> {
        let r = DVector::from_iterator(x.len(), x.iter().zip(&self.mode).map(|(a, b)| a - b));
        (-(&self.hessian * r)).as_slice().to_vec()
    }
}

/// Central-difference Hessian of `f` at `x` with step
/// `eps^{1/4} (1 + |x_i|)` per coordinate, symmetrised.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Result<DMatrix<f64>> {
    let d = x.len();
    let eval = |y: &[f64]| -> Result<f64> {
        let v = f(y);
        if v.is_nan() {
            Err(Error::NaNLogDensity)
        } else if !v.is_finite() {
            Err(Error::StencilOutsideSupport)
        } else {
            Ok(v)
        }
    };
    let h: Vec<f64> = x
        .iter()
        .map(|xi| {
            let hi = f64::EPSILON.powf(0.25) * (1.0 + xi.abs());
            (xi + hi) - xi
        })
        .collect();
    let f0 = eval(x)?;
    let mut y = x.to_vec();
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        y[i] = x[i] + h[i];
        let fp = eval(&y)?;
        y[i] = x[i] - h[i];
        let fm = eval(&y)?;
        y[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                y[i] = x[i] + si * h[i];
                y[j] = x[j] + sj * h[j];
                let v = eval(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                + corner(-1.0, -1.0)?)
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// Symmetrises `h` and raises every eigenvalue below
/// `1e-6 * max(largest eigenvalue, or 1 if none is positive)` to that floor.
/// Returns the regularised matrix and the number of floored eigenvalues.
pub fn regularise_hessian(h: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let sym = (h + h.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.max();
    let floor = FLOOR_REL * if top > 0.0 { top } else { 1.0 };
    let mut n_floored = 0;
    let vals = eig.eigenvalues.map(|v| {
        if v < floor {
            n_floored += 1;
            floor
        } else {
            v
        }
    });
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&vals) * q.transpose();
    ((&out + out.transpose()) * 0.5, n_floored)
}

/// Nelder–Mead on `-log pi` from `x0`, then the regularised negative
/// Hessian at the mode.
pub fn fit_gaussian_surrogate<T: TargetModel + ?Sized>(
    target: &T,
    x0: &[f64],
) -> Result<GaussianSurrogate> {
    fit_gaussian_surrogate_with(target, x0, &NelderMeadOptions::default())
}

pub fn fit_gaussian_surrogate_with<T: TargetModel + ?Sized>(
    target: &T,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Result<GaussianSurrogate> {
    if x0.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x0.len(),
        });
    }
    let opt = nelder_mead(|x| -target.log_density(x), x0, opts)?;
    let raw = numerical_hessian(|x| target.log_density(x), &opt.x)?;
    let (hessian, n_floored) = regularise_hessian(&(-raw));
    if n_floored > 0 {
        log::warn!(
            "surrogate Hessian: {n_floored} eigenvalue(s) raised to the positive-definite floor"
        );
    }
    let mut s = GaussianSurrogate::new(opt.x, hessian)?;
    s.n_floored = n_floored;
    Ok(s)
}
