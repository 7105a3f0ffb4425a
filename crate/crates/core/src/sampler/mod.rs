//! The discrete bouncy particle sampler kernel and chain driver.

mod checks;

use std::cell::Cell;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, dot, perturb_bounce, perturb_velocity, random_orthonormal_with, reflect_precond,
    sample_unit_sphere, Metric, TOL_DOT, TOL_GRAD,
};
use crate::targets::{
    directional_derivative, finite_diff_gradient_at, DiffScheme, GaussianSurrogate, TargetModel,
};

pub use checks::{dr_rejection_scaling, log_log_slope, precondition_equivalence_check, ScalingPoint};

/// Source of the vector field used for bounces.
#[derive(Debug, Clone)]
pub enum GradientMode {
    Analytic,
    ForwardDifference,
    CentralDifference,
    Surrogate(Arc<GaussianSurrogate>),
}

impl GradientMode {
    fn scheme(&self) -> Option<DiffScheme> {
        match self {
            GradientMode::ForwardDifference => Some(DiffScheme::Forward),
            GradientMode::CentralDifference => Some(DiffScheme::Central),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub delta: f64,
    /// Bounce perturbation in `[0, 1]`.
    pub eps: f64,
    /// Velocity diffusion rate.
    pub kappa: f64,
    pub metric: Option<Metric>,
    /// Directions in which the gradient is evaluated per bounce; `None`
    /// uses the full gradient.
    pub n_cpt: Option<usize>,
    pub gradient_mode: GradientMode,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(delta: f64, eps: f64, kappa: f64) -> Self {
        SamplerConfig {
            delta,
            eps,
            kappa,
            metric: None,
            n_cpt: None,
            gradient_mode: GradientMode::Analytic,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = Some(metric);
        self
    }

    pub fn with_n_cpt(mut self, n_cpt: usize) -> Self {
        self.n_cpt = Some(n_cpt);
        self
    }

    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Self {
        self.gradient_mode = mode;
        self
    }

    /// Checks the configuration against a target.
    pub fn validate<T: TargetModel + ?Sized>(&self, target: &T) -> Result<()> {
        let d = target.dim();
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidConfig("delta must be positive and finite".into()));
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(Error::InvalidConfig("eps must lie in [0, 1]".into()));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidConfig("kappa must be non-negative".into()));
        }
        if self.eps > 0.0 && self.kappa > 0.0 {
            return Err(Error::InvalidConfig(
                "eps and kappa cannot both be positive".into(),
            ));
        }
        if let Some(k) = self.n_cpt {
            if k < 2 || k > d {
                return Err(Error::InvalidConfig(format!("n_cpt must lie in [2, {d}]")));
            }
        }
        if let Some(m) = &self.metric {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.dim(),
                });
            }
        }
        match &self.gradient_mode {
            GradientMode::Analytic if !target.has_gradient() => {
                return Err(Error::InvalidConfig(
                    "analytic gradient requested but the target has none".into(),
                ))
            }
            GradientMode::Surrogate(s) if s.dim() != d => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.dim(),
                })
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl PhaseState {
    /// Position `x` with `u = M^{-1} u*`, `u*` uniform on the unit sphere.
    pub fn with_random_velocity<R: Rng + ?Sized>(
        x: Vec<f64>,
        metric: Option<&Metric>,
        rng: &mut R,
    ) -> Self {
        let u_star = sample_unit_sphere(x.len(), rng);
        let u = match metric {
            Some(m) => m.from_transformed(&u_star),
            None => u_star,
        };
        PhaseState { x, u }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    PlainAccept,
    BounceAccept,
    BounceReject,
    DegenerateSkip,
}

impl StepKind {
    pub fn code(self) -> char {
        match self {
            StepKind::PlainAccept => 'A',
            StepKind::BounceAccept => 'B',
            StepKind::BounceReject => 'R',
            StepKind::DegenerateSkip => 'S',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'A' => Some(StepKind::PlainAccept),
            'B' => Some(StepKind::BounceAccept),
            'R' => Some(StepKind::BounceReject),
            'S' => Some(StepKind::DegenerateSkip),
            _ => None,
        }
    }

    /// Bounce accepted or rejected; these end a segment.
    pub fn is_dr_event(self) -> bool {
        matches!(self, StepKind::BounceAccept | StepKind::BounceReject)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub kind: StepKind,
    /// First-stage proposal `x + delta u`.
    pub x_proposed: Vec<f64>,
    /// Log density at the state after the step.
    pub log_pi: f64,
    /// Log-density evaluations spent in this step.
    pub evaluations: u64,
    /// For delayed-rejection events: the unit velocity (in transformed
    /// coordinates) entering the step, and after the flip but before the
    /// velocity perturbation.
    pub segment: Option<(Vec<f64>, Vec<f64>)>,
}

/// `min(1, pi(x')/pi(x))` from log densities.
pub fn accept_prob(log_pi_x: f64, log_pi_xp: f64) -> Result<f64> {
    if log_pi_x == f64::NEG_INFINITY && log_pi_xp == f64::NEG_INFINITY {
        return Err(Error::BothLogDensitiesInfinite);
    }
    Ok((log_pi_xp - log_pi_x).min(0.0).exp())
}

/// Second-stage acceptance probability
/// `min(1, (1 - a(x'',x')) / (1 - a(x,x')) * pi(x'')/pi(x))`.
pub fn dr_accept_prob(log_pi_x: f64, log_pi_xp: f64, log_pi_xpp: f64) -> Result<f64> {
    let first = log_pi_xp - log_pi_x;
    if !(first < 0.0) {
        return Err(Error::StageOneAccepted);
    }
    let second = log_pi_xp - log_pi_xpp;
    if !(second < 0.0) {
        // proposal x'' would accept x' outright: numerator vanishes
        return Ok(0.0);
    }
    let log_ratio = (-second.exp_m1()).ln() - (-first.exp_m1()).ln() + (log_pi_xpp - log_pi_x);
    Ok(log_ratio.min(0.0).exp())
}

fn to_star(metric: Option<&Metric>, u: &[f64]) -> Vec<f64> {
    match metric {
        Some(m) => m.to_transformed(u),
        None => u.to_vec(),
    }
}

fn from_star(metric: Option<&Metric>, u: &[f64]) -> Vec<f64> {
    match metric {
        Some(m) => m.from_transformed(u),
        None => u.to_vec(),
    }
}

fn covector_star(metric: Option<&Metric>, g: &[f64]) -> Vec<f64> {
    match metric {
        Some(m) => m.covector_to_transformed(g),
        None => g.to_vec(),
    }
}

/// Result of the bounce computation before the second-stage test.
enum Bounce {
    Proposal(Vec<f64>),
    Degenerate,
}

/// One DBPS iteration from `state` (whose log density is `log_pi`).
///
/// The RNG is consumed in a fixed order: the stage-one uniform; if the
/// proposal is rejected, the bounce direction draws, the bounce
/// perturbation draws and (unless the bounce is degenerate) the stage-two
/// uniform; then the velocity perturbation draws.
pub fn dbps_step<T: TargetModel + ?Sized, R: Rng + ?Sized>(
    state: &mut PhaseState,
    log_pi: &mut f64,
    cfg: &SamplerConfig,
    target: &T,
    rng: &mut R,
) -> Result<StepOutcome> {
    let count = Cell::new(0u64);
    let logp = |y: &[f64]| -> f64 {
        count.set(count.get() + 1);
        target.log_density(y)
    };
    let checked = |v: f64| -> Result<f64> {
        if v.is_nan() {
            Err(Error::NaNLogDensity)
        } else {
            Ok(v)
        }
    };
    let metric = cfg.metric.as_ref();
    let delta = cfg.delta;
    let lp0 = *log_pi;

    let x_prop: Vec<f64> = state.x.iter().zip(&state.u).map(|(x, u)| x + delta * u).collect();
    let lp_prop = checked(logp(&x_prop))?;
    let alpha = accept_prob(lp0, lp_prop)?;
    let u1: f64 = rng.random();

    let kind;
    let mut segment = None;
    if u1 < alpha {
        // (x', -u) then the flip restores u
        state.x.clone_from(&x_prop);
        *log_pi = lp_prop;
        kind = StepKind::PlainAccept;
    } else {
        let before = to_star(metric, &state.u);
        let bounce = bounce_velocity(state, &x_prop, lp_prop, cfg, target, &logp, rng)?;
        match bounce {
            Bounce::Degenerate => {
                state.u.iter_mut().for_each(|v| *v = -*v);
                kind = StepKind::DegenerateSkip;
            }
            Bounce::Proposal(u2) => {
                let x2: Vec<f64> = (0..state.x.len())
                    .map(|i| state.x[i] + delta * state.u[i] - delta * u2[i])
                    .collect();
                let lp2 = checked(logp(&x2))?;
                let a2 = dr_accept_prob(lp0, lp_prop, lp2)?;
                let v: f64 = rng.random();
                if v < a2 {
                    state.x = x2;
                    state.u = u2.iter().map(|v| -v).collect();
                    *log_pi = lp2;
                    kind = StepKind::BounceAccept;
                } else {
                    state.u.iter_mut().for_each(|v| *v = -*v);
                    kind = StepKind::BounceReject;
                }
                segment = Some((before, to_star(metric, &state.u)));
            }
        }
    }

    if cfg.kappa > 0.0 {
        let u_star = to_star(metric, &state.u);
        let moved = perturb_velocity(&u_star, cfg.kappa, delta, rng);
        state.u = from_star(metric, &moved);
    }

    Ok(StepOutcome {
        kind,
        x_proposed: x_prop,
        log_pi: *log_pi,
        evaluations: count.get(),
        segment,
    })
}

/// The bounce velocity `u''` at the rejected point `x'`, or `Degenerate`
/// when the gradient information cannot define one.
fn bounce_velocity<T: TargetModel + ?Sized, R: Rng + ?Sized, F: Fn(&[f64]) -> f64>(
    state: &PhaseState,
    x_prop: &[f64],
    lp_prop: f64,
    cfg: &SamplerConfig,
    target: &T,
    logp: &F,
    rng: &mut R,
) -> Result<Bounce> {
    let metric = cfg.metric.as_ref();
    let scheme = cfg.gradient_mode.scheme();
    if scheme == Some(DiffScheme::Forward) && lp_prop == f64::NEG_INFINITY {
        // forward differences need a finite value at x'
        if let Some(k) = cfg.n_cpt {
            random_orthonormal_with(&to_star(metric, &state.u), k, rng);
        }
        return Ok(Bounce::Degenerate);
    }
    let full_gradient = |x: &[f64]| -> Result<Option<Vec<f64>>> {
        let g = match &cfg.gradient_mode {
            GradientMode::Analytic => target
                .gradient(x)
                .ok_or_else(|| Error::InvalidConfig("target has no analytic gradient".into()))?,
            GradientMode::Surrogate(s) => s.field(x),
            GradientMode::ForwardDifference | GradientMode::CentralDifference => {
                match finite_diff_gradient_at(logp, x, lp_prop, scheme.unwrap(), None) {
                    Ok(g) => g,
                    Err(Error::StencilOutsideSupport) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
        };
        Ok(Some(g))
    };

    match cfg.n_cpt {
        None => {
            let g = match full_gradient(x_prop)? {
                Some(g) if g.iter().all(|v| v.is_finite()) => g,
                _ => return Ok(Bounce::Degenerate),
            };
            let reflected = match metric {
                Some(m) => reflect_precond(&state.u, &g, m),
                None => geometry::reflect(&state.u, &g),
            };
            let mut u2 = match reflected {
                Ok(u) => u,
                Err(_) => return Ok(Bounce::Degenerate),
            };
            if cfg.eps > 0.0 {
                let u_star = to_star(metric, &u2);
                let g_star = covector_star(metric, &g);
                match perturb_bounce(&u_star, &g_star, cfg.eps, rng) {
                    Ok(p) => u2 = from_star(metric, &p),
                    Err(_) => return Ok(Bounce::Degenerate),
                }
            }
            Ok(Bounce::Proposal(u2))
        }
        Some(k) => {
            let u_star = to_star(metric, &state.u);
            let zetas = random_orthonormal_with(&u_star, k, rng);
            let coeffs: Vec<f64> = match scheme {
                None => {
                    let g = match full_gradient(x_prop)? {
                        Some(g) if g.iter().all(|v| v.is_finite()) => g,
                        _ => return Ok(Bounce::Degenerate),
                    };
                    let g_star = covector_star(metric, &g);
                    zetas.iter().map(|z| dot(z, &g_star)).collect()
                }
                Some(s) => {
                    let mut c = Vec::with_capacity(k);
                    for z in &zetas {
                        let w = from_star(metric, z);
                        match directional_derivative(logp, x_prop, Some(lp_prop), &w, s, None) {
                            Ok(v) => c.push(v),
                            Err(Error::StencilOutsideSupport) => return Ok(Bounce::Degenerate),
                            Err(e) => return Err(e),
                        }
                    }
                    c
                }
            };
            let s = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !(s > TOL_GRAD) || !s.is_finite() {
                return Ok(Bounce::Degenerate);
            }
            let unit: Vec<f64> = coeffs.iter().map(|c| c / s).collect();
            if unit.iter().all(|c| c.abs() <= TOL_DOT) {
                return Ok(Bounce::Degenerate);
            }
            let zeta = match geometry::combine_directions_products(&zetas, &unit) {
                Ok(z) => z,
                Err(_) => return Ok(Bounce::Degenerate),
            };
            // products against the projected gradient g_P / |g_P|
            let ug = unit[0];
            let zg: f64 = -unit.iter().map(|c| c * c).sum::<f64>().sqrt();
            let zu = dot(&zeta, &u_star);
            let mut u2_star = match geometry::subset_reflect_products(&u_star, &zeta, ug, zg, zu) {
                Ok(v) => v,
                Err(_) => return Ok(Bounce::Degenerate),
            };
            if cfg.eps > 0.0 {
                let mut g_proj = vec![0.0; u_star.len()];
                for (z, c) in zetas.iter().zip(&unit) {
                    for (gp, zi) in g_proj.iter_mut().zip(z) {
                        *gp += c * zi;
                    }
                }
                match perturb_bounce(&u2_star, &g_proj, cfg.eps, rng) {
                    Ok(p) => u2_star = p,
                    Err(_) => return Ok(Bounce::Degenerate),
                }
            }
            Ok(Bounce::Proposal(from_star(metric, &u2_star)))
        }
    }
}

/// A running chain owning its state and RNG stream.
pub struct Chain<'a, T: TargetModel + ?Sized> {
    target: &'a T,
    cfg: SamplerConfig,
    state: PhaseState,
    log_pi: f64,
    rng: ChaCha8Rng,
    iteration: u64,
    evaluations: u64,
}

impl<'a, T: TargetModel + ?Sized> Chain<'a, T> {
    /// Starts at `x0` with a velocity drawn from the chain's own stream.
    pub fn new(target: &'a T, cfg: SamplerConfig, x0: &[f64]) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        if x0.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: x0.len(),
            });
        }
        let state = PhaseState::with_random_velocity(x0.to_vec(), cfg.metric.as_ref(), &mut rng);
        Self::start(target, cfg, state, rng)
    }

    /// Starts from an explicit phase state.
    pub fn with_state(target: &'a T, cfg: SamplerConfig, state: PhaseState) -> Result<Self> {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self::start(target, cfg, state, rng)
    }

    fn start(target: &'a T, cfg: SamplerConfig, state: PhaseState, rng: ChaCha8Rng) -> Result<Self> {
        cfg.validate(target)?;
        let d = target.dim();
        if state.x.len() != d || state.u.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: state.x.len().max(state.u.len()),
            });
        }
        let speed = match &cfg.metric {
            Some(m) => m.quad_form(&state.u).sqrt(),
            None => geometry::norm(&state.u),
        };
        if (speed - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidConfig(format!(
                "initial velocity must have unit (metric) norm, got {speed}"
            )));
        }
        let log_pi = target.log_density(&state.x);
        if log_pi.is_nan() {
            return Err(Error::NaNLogDensity);
        }
        if log_pi == f64::NEG_INFINITY {
            return Err(Error::StartOutsideSupport);
        }
        Ok(Chain {
            target,
            cfg,
            state,
            log_pi,
            rng,
            iteration: 0,
            evaluations: 1,
        })
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        let out = dbps_step(
            &mut self.state,
            &mut self.log_pi,
            &self.cfg,
            self.target,
            &mut self.rng,
        )?;
        self.iteration += 1;
        self.evaluations += out.evaluations;
        Ok(out)
    }

    pub fn state(&self) -> &PhaseState {
        &self.state
    }

    pub fn log_pi(&self) -> f64 {
        self.log_pi
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Log-density evaluations so far, including the initial one.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub n_iters: usize,
    pub thin: usize,
    /// Keep the velocity pair of every delayed-rejection event.
    pub record_velocities: bool,
}

impl RunOptions {
    pub fn new(n_iters: usize, thin: usize) -> Self {
        RunOptions {
            n_iters,
            thin,
            record_velocities: false,
        }
    }
}

/// Velocities around one delayed-rejection event, in transformed
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub iter: usize,
    pub velocity_before: Vec<f64>,
    pub velocity_after: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub dim: usize,
    pub thin: usize,
    /// Positions after iterations `thin, 2 thin, ...`, row-major.
    pub positions: Vec<f64>,
    /// Log density after every iteration.
    pub log_pi: Vec<f64>,
    pub kinds: Vec<StepKind>,
    /// 1-based iterations whose kind is a delayed-rejection event.
    pub dr_iters: Vec<usize>,
    /// `<velocity after event k, velocity before event k+1>` for
    /// consecutive delayed-rejection events.
    pub segment_cosines: Vec<f64>,
    pub segments: Option<Vec<SegmentRecord>>,
    pub evaluations: u64,
    pub final_state: PhaseState,
}

impl ChainTrace {
    pub fn n_thinned(&self) -> usize {
        self.positions.len() / self.dim.max(1)
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Thinned series of coordinate `j`.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.positions.iter().skip(j).step_by(self.dim).copied().collect()
    }

    /// Log density at the thinned iterations.
    pub fn thinned_log_pi(&self) -> Vec<f64> {
        self.log_pi
            .iter()
            .skip(self.thin - 1)
            .step_by(self.thin)
            .copied()
            .collect()
    }
}

/// Runs `opts.n_iters` iterations from `x0`; see [`Chain::new`].
pub fn run_chain<T: TargetModel + ?Sized>(
    target: &T,
    cfg: &SamplerConfig,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<ChainTrace> {
    let chain = Chain::new(target, cfg.clone(), x0)?;
    drive(chain, opts)
}

pub fn run_chain_from<T: TargetModel + ?Sized>(
    target: &T,
    cfg: &SamplerConfig,
    init: PhaseState,
    opts: &RunOptions,
) -> Result<ChainTrace> {
    let chain = Chain::with_state(target, cfg.clone(), init)?;
    drive(chain, opts)
}

fn drive<T: TargetModel + ?Sized>(mut chain: Chain<'_, T>, opts: &RunOptions) -> Result<ChainTrace> {
    if opts.n_iters == 0 || opts.thin == 0 {
        return Err(Error::InvalidConfig("n_iters and thin must be at least 1".into()));
    }
    let d = chain.target.dim();
    let n = opts.n_iters;
    let mut positions = Vec::with_capacity(n / opts.thin * d);
    let mut log_pi = Vec::with_capacity(n);
    let mut kinds = Vec::with_capacity(n);
    let mut dr_iters = Vec::new();
    let mut cosines = Vec::new();
    let mut segments = opts.record_velocities.then(Vec::new);
    let mut last_after: Option<Vec<f64>> = None;

    for it in 1..=n {
        let out = chain.step()?;
        log_pi.push(out.log_pi);
        kinds.push(out.kind);
        if let Some((before, after)) = out.segment {
            dr_iters.push(it);
            if let Some(prev) = &last_after {
                cosines.push(dot(prev, &before));
            }
            if let Some(s) = segments.as_mut() {
                s.push(SegmentRecord {
                    iter: it,
                    velocity_before: before,
                    velocity_after: after.clone(),
                });
            }
            last_after = Some(after);
        }
        if it % opts.thin == 0 {
            positions.extend_from_slice(&chain.state.x);
        }
    }
    Ok(ChainTrace {
        dim: d,
        thin: opts.thin,
        positions,
        log_pi,
        kinds,
        dr_iters,
        segment_cosines: cosines,
        segments,
        evaluations: chain.evaluations,
        final_state: chain.state.clone(),
    })
}

#[cfg(test)]
mod tests;
