//! Target densities, gradient providers and the MMPP model.

mod finite_diff;
mod matexp;
mod mmpp;
mod nelder_mead;
mod surrogate;
mod toy;

use std::sync::atomic::{AtomicU64, Ordering};

pub use finite_diff::{
    auto_step, directional_derivative, finite_diff_gradient, finite_diff_gradient_at, DiffScheme,
};
pub use matexp::matexp;
pub use mmpp::{
    log_likelihood_params, parse_event_file, simulate_mmpp, stationary_distribution,
    write_event_file, EventData, MmppModel, MmppParams,
};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use surrogate::{
    fit_gaussian_surrogate, fit_gaussian_surrogate_with, numerical_hessian, regularise_hessian,
    GaussianSurrogate,
};
pub use toy::{gaussian_target, logistic_target, quartic_target, GaussianTarget, LogisticTarget, QuarticTarget};

use crate::geometry::Metric;

/// An unnormalised log-density on R^d, optionally with an analytic gradient.
///
/// `log_density` may return `-inf` outside the support but never `+inf` or
/// NaN on valid input.
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    fn has_gradient(&self) -> bool {
        false
    }

    /// Analytic gradient of the log-density, when available.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl<T: TargetModel + ?Sized> TargetModel for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn has_gradient(&self) -> bool {
        (**self).has_gradient()
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        (**self).gradient(x)
    }
}

impl<T: TargetModel + ?Sized> TargetModel for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn has_gradient(&self) -> bool {
        (**self).has_gradient()
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        (**self).gradient(x)
    }
}

impl<T: TargetModel + ?Sized> TargetModel for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn has_gradient(&self) -> bool {
        (**self).has_gradient()
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        (**self).gradient(x)
    }
}

/// Counts log-density evaluations of the wrapped target.
pub struct CountingTarget<T> {
    inner: T,
    count: AtomicU64,
}

impl<T: TargetModel> CountingTarget<T> {
    pub fn new(inner: T) -> Self {
        CountingTarget {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn evaluations(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::Relaxed);
    }
}

impl<T: TargetModel> TargetModel for CountingTarget<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.log_density(x)
    }
    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.inner.gradient(x)
    }
}

/// The density of `x* = M x` when `x` has density `pi`:
/// `pi*(x*) = pi(M^{-1} x*)`, with gradient `M^{-T} grad pi`.
pub struct TransformedTarget<T> {
    inner: T,
    metric: Metric,
}

impl<T: TargetModel> TransformedTarget<T> {
    pub fn new(inner: T, metric: Metric) -> Self {
        assert_eq!(inner.dim(), metric.dim());
        TransformedTarget { inner, metric }
    }
}

impl<T: TargetModel> TargetModel for TransformedTarget<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn log_density(&self, y: &[f64]) -> f64 {
        self.inner.log_density(&self.metric.from_transformed(y))
    }
    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }
    fn gradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        let g = self.inner.gradient(&self.metric.from_transformed(y))?;
        Some(self.metric.covector_to_transformed(&g))
    }
}

/// Wraps a closure as a gradient-free target.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnTarget { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> TargetModel for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}
