use nalgebra::{DMatrix, DVector};

use super::TargetModel;
use crate::error::{Error, Result};

/// `log pi(x) = -1/4 sum x_i^4 / lambda_i^4`.
#[derive(Debug, Clone)]
pub struct QuarticTarget {
    inv_l4: Vec<f64>,
    lambdas: Vec<f64>,
}

pub fn quartic_target(lambdas: &[f64]) -> Result<QuarticTarget> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidConfig("quartic scales must be positive".into()));
    }
    Ok(QuarticTarget {
        inv_l4: lambdas.iter().map(|l| l.powi(-4)).collect(),
        lambdas: lambdas.to_vec(),
    })
}

impl QuarticTarget {
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

impl TargetModel for QuarticTarget {
    fn dim(&self) -> usize {
        self.inv_l4.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        -0.25
            * x.iter()
                .zip(&self.inv_l4)
                .map(|(xi, w)| xi.powi(4) * w)
                .sum::<f64>()
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().zip(&self.inv_l4).map(|(xi, w)| -xi.powi(3) * w).collect())
    }
}

/// Product of logistic densities with scale `i` in coordinate `i`:
/// `log pi(x) = sum_i x_i/i - 2 log(1 + exp(x_i/i))`.
#[derive(Debug, Clone)]
pub struct LogisticTarget {
    d: usize,
}

pub fn logistic_target(d: usize) -> Result<LogisticTarget> {
    if d == 0 {
        return Err(Error::DimensionTooSmall { min: 1, got: 0 });
    }
    Ok(LogisticTarget { d })
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl TargetModel for LogisticTarget {
    fn dim(&self) -> usize {
        self.d
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, xi)| {
                let t = xi / (i + 1) as f64;
                t - 2.0 * softplus(t)
            })
            .sum()
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(
            x.iter()
                .enumerate()
                .map(|(i, xi)| {
                    let s = (i + 1) as f64;
                    (1.0 - 2.0 * sigmoid(xi / s)) / s
                })
                .collect(),
        )
    }
}

/// Multivariate normal with dense covariance.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: Vec<f64>,
    precision: DMatrix<f64>,
}

pub fn gaussian_target(mean: &[f64], covariance: &DMatrix<f64>) -> Result<GaussianTarget> {
    let d = mean.len();
    if covariance.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: covariance.nrows(),
        });
    }
    let chol = covariance
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(GaussianTarget {
        mean: mean.to_vec(),
        precision: chol.inverse(),
    })
}

impl GaussianTarget {
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn centred(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, b)| a - b))
    }
}

impl TargetModel for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let r = self.centred(x);
        -0.5 * r.dot(&(&self.precision * &r))
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let r = self.centred(x);
        Some((-(&self.precision * r)).as_slice().to_vec())
    }
}
