//! Nelder–Mead simplex minimisation.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Edge length of the axis-aligned initial simplex.
    pub initial_edge: f64,
    /// Stop when `max f - min f` over the simplex falls below this.
    pub f_spread_tol: f64,
    pub max_iter: usize,
    /// Fresh simplices built around the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            initial_edge: 0.1,
            f_spread_tol: 1e-10,
            max_iter: 5000,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SIGMA: f64 = 0.5;

/// Minimises `f` from `x0`. Non-finite values are treated as `+inf`.
///
/// Fails only when the iteration cap is reached without improving on `f(x0)`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Result<NelderMeadResult> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::DimensionTooSmall { min: 1, got: 0 });
    }
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| -> f64 {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let f0 = eval(x0);

    let mut best_x = x0.to_vec();
    let mut best_f = f0;
    let mut iterations = 0usize;
    let mut converged = false;

    for round in 0..=opts.restarts {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_x.clone(), best_f));
        for i in 0..n {
            let mut v = best_x.clone();
            v[i] += opts.initial_edge;
            let fv = eval(&v);
            simplex.push((v, fv));
        }
        converged = false;
        while iterations < opts.max_iter {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            if spread < opts.f_spread_tol {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for (v, _) in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(worst)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };
            let worst = simplex[n].0.clone();
            let xr = along(-ALPHA, &worst);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(-GAMMA, &worst);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(-RHO, &worst);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(RHO, &worst);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < fr.min(simplex[n].1) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for (v, fv) in simplex.iter_mut().skip(1) {
                        for (a, b) in v.iter_mut().zip(&x_best) {
                            *a = b + SIGMA * (*a - b);
                        }
                        *fv = eval(v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = simplex[0].1 < best_f;
        if simplex[0].1 <= best_f {
            best_x = simplex[0].0.clone();
            best_f = simplex[0].1;
        }
        if !converged || (round > 0 && !improved) {
            break;
        }
    }

    if !converged {
        if !(best_f < f0) {
            return Err(Error::Optimization(format!(
                "no improvement on the starting value after {iterations} iterations"
            )));
        }
        log::warn!("Nelder-Mead stopped at the iteration cap ({iterations}) before converging");
    }
    Ok(NelderMeadResult {
        x: best_x,
        f: best_f,
        iterations,
        evaluations: evals,
        converged,
    })
}
