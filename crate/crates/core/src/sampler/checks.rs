//! Numerical checks of kernel properties: delayed-rejection scaling in the
//! step size and the equivalence of preconditioning with a linear change of
//! variables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{accept_prob, dbps_step, dr_accept_prob, PhaseState, SamplerConfig};
use crate::error::{Error, Result};
use crate::geometry::{reflect, sample_unit_sphere, standard_normal_vec, Metric};
use crate::targets::{TargetModel, TransformedTarget};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub delta: f64,
    /// Mean of `1 - alpha_DR` over cloud states whose first-stage proposal
    /// can be rejected, with the rejection forced.
    pub mean_rejection: f64,
    /// Mean over the whole cloud of `(1 - alpha) (1 - alpha_DR)`: the
    /// probability that one iteration ends in a rejected bounce.
    pub joint_rejection: f64,
    /// Cloud states that could be rejected at stage one.
    pub n_effective: usize,
}

/// Second-stage rejection at each step size over a cloud of `n_per_delta`
/// states `x ~ N(0, I)`, `u` uniform on the sphere, drawn once and shared
/// by every `delta`.
pub fn dr_rejection_scaling<T: TargetModel + ?Sized, R: Rng + ?Sized>(
    target: &T,
    deltas: &[f64],
    n_per_delta: usize,
    rng: &mut R,
) -> Result<Vec<ScalingPoint>> {
    if !target.has_gradient() {
        return Err(Error::InvalidConfig("scaling check needs an analytic gradient".into()));
    }
    let d = target.dim();
    let cloud: Vec<(Vec<f64>, Vec<f64>)> = (0..n_per_delta)
        .map(|_| (standard_normal_vec(d, rng), sample_unit_sphere(d, rng)))
        .collect();
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut forced = 0.0;
        let mut joint = 0.0;
        let mut n_eff = 0;
        for (x, u) in &cloud {
            let lp = target.log_density(x);
            let xp: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + delta * b).collect();
            let lpp = target.log_density(&xp);
            let a1 = accept_prob(lp, lpp)?;
            if a1 >= 1.0 {
                continue;
            }
            let g = target.gradient(&xp).expect("checked has_gradient");
            let u2 = match reflect(u, &g) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let x2: Vec<f64> = (0..d).map(|i| x[i] + delta * u[i] - delta * u2[i]).collect();
            let a2 = dr_accept_prob(lp, lpp, target.log_density(&x2))?;
            forced += 1.0 - a2;
            joint += (1.0 - a1) * (1.0 - a2);
            n_eff += 1;
        }
        out.push(ScalingPoint {
            delta,
            mean_rejection: if n_eff > 0 { forced / n_eff as f64 } else { 0.0 },
            joint_rejection: joint / n_per_delta.max(1) as f64,
            n_effective: n_eff,
        });
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Compares the preconditioned kernel on `target` with the plain kernel on
/// the transformed target `pi(M^{-1} y)` along the preconditioned chain.
///
/// At every iteration the plain kernel is started from the mapped state
/// `(M x, M u)` with a copy of the same RNG stream, one step of each is
/// taken, and the deviation `|M x' - y'|_inf` (and the same for the
/// velocities) is recorded. Returns the maximum over `n_iters`
/// iterations, or `+inf` if the two steps ever take different branches.
///
/// Free-running coupled trajectories are not compared directly: rounding
/// differences grow geometrically through successive bounces.
pub fn precondition_equivalence_check<T: TargetModel + ?Sized>(
    target: &T,
    metric: &Metric,
    cfg: &SamplerConfig,
    x0: &[f64],
    n_iters: usize,
) -> Result<f64> {
    let pre_cfg = cfg.clone().with_metric(metric.clone());
    let mut plain_cfg = cfg.clone();
    plain_cfg.metric = None;
    pre_cfg.validate(target)?;
    let transformed = TransformedTarget::new(target, metric.clone());
    plain_cfg.validate(&transformed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = PhaseState::with_random_velocity(x0.to_vec(), Some(metric), &mut rng);
    let mut lp = target.log_density(x0);
    if lp == f64::NEG_INFINITY {
        return Err(Error::StartOutsideSupport);
    }
    let inf_dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..n_iters {
        let mut mapped = PhaseState {
            x: metric.to_transformed(&state.x),
            u: metric.to_transformed(&state.u),
        };
        let mut lp_mapped = transformed.log_density(&mapped.x);
        let mut rng_mapped = rng.clone();
        let a = dbps_step(&mut state, &mut lp, &pre_cfg, target, &mut rng)?;
        let b = dbps_step(&mut mapped, &mut lp_mapped, &plain_cfg, &transformed, &mut rng_mapped)?;
        if a.kind != b.kind {
            return Ok(f64::INFINITY);
        }
        worst = worst
            .max(inf_dist(&metric.to_transformed(&state.x), &mapped.x))
            .max(inf_dist(&metric.to_transformed(&state.u), &mapped.u));
    }
    Ok(worst)
}
