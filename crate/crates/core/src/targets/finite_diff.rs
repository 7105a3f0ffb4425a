use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffScheme {
    Forward,
    Central,
}

impl DiffScheme {
    /// Extra log-density evaluations per differentiated direction.
    pub fn cost(self) -> u64 {
        match self {
            DiffScheme::Forward => 1,
            DiffScheme::Central => 2,
        }
    }
}

/// Default step for coordinate value `xi`: `sqrt(eps)(1+|xi|)` forward,
/// `cbrt(eps)(1+|xi|)` central.
pub fn auto_step(scheme: DiffScheme, xi: f64) -> f64 {
    let base = match scheme {
        DiffScheme::Forward => f64::EPSILON.sqrt(),
        DiffScheme::Central => f64::EPSILON.cbrt(),
    };
    base * (1.0 + xi.abs())
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Result<f64> {
    let v = f(x);
    if v.is_nan() {
        return Err(Error::NaNLogDensity);
    }
    if v == f64::NEG_INFINITY {
        return Err(Error::StencilOutsideSupport);
    }
    Ok(v)
}

/// Finite-difference gradient. `h = None` selects [`auto_step`] per
/// coordinate. The forward scheme evaluates `f(x)` itself; use
/// [`finite_diff_gradient_at`] to reuse a known value.
pub fn finite_diff_gradient<F: Fn(&[f64]) -> f64>(
    f: F,
    x: &[f64],
    scheme: DiffScheme,
    h: Option<f64>,
) -> Result<Vec<f64>> {
    let fx = match scheme {
        DiffScheme::Forward => eval(&f, x)?,
        DiffScheme::Central => f64::NAN,
    };
    finite_diff_gradient_at(f, x, fx, scheme, h)
}

/// As [`finite_diff_gradient`] with `fx = f(x)` already known (ignored by
/// the central scheme). Costs `d` evaluations forward, `2d` central.
pub fn finite_diff_gradient_at<F: Fn(&[f64]) -> f64>(
    f: F,
    x: &[f64],
    fx: f64,
    scheme: DiffScheme,
    h: Option<f64>,
) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let hi = h.unwrap_or_else(|| auto_step(scheme, x[i]));
        // exactly representable step
        let up = x[i] + hi;
        let hi = up - x[i];
        y[i] = up;
        let f_up = eval(&f, &y)?;
        let gi = match scheme {
            DiffScheme::Forward => (f_up - fx) / hi,
            DiffScheme::Central => {
                y[i] = x[i] - hi;
                let f_down = eval(&f, &y)?;
                (f_up - f_down) / (2.0 * hi)
            }
        };
        y[i] = x[i];
        g.push(gi);
    }
    Ok(g)
}

/// Estimate of `<zeta, grad f(x)>` from one (forward) or two (central)
/// extra evaluations. `fx` is only used by the forward scheme.
pub fn directional_derivative<F: Fn(&[f64]) -> f64>(
    f: F,
    x: &[f64],
    fx: Option<f64>,
    zeta: &[f64],
    scheme: DiffScheme,
    h: Option<f64>,
) -> Result<f64> {
    if zeta.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: zeta.len(),
        });
    }
    let h = h.unwrap_or_else(|| {
        let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let zmax = zeta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        auto_step(scheme, xmax) / zmax.max(f64::MIN_POSITIVE)
    });
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(zeta).map(|(a, z)| a + s * z).collect() };
    match scheme {
        DiffScheme::Forward => {
            let f0 = match fx {
                Some(v) => v,
                None => eval(&f, x)?,
            };
            Ok((eval(&f, &shifted(h))? - f0) / h)
        }
        DiffScheme::Central => {
            Ok((eval(&f, &shifted(h))? - eval(&f, &shifted(-h))?) / (2.0 * h))
        }
    }
}
