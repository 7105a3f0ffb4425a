//! Builds targets, sampler configurations and starting points from a
//! configuration.

use std::sync::Arc;

use dbps::geometry::{standard_normal_vec, Metric};
use dbps::sampler::{GradientMode, SamplerConfig};
use dbps::targets::{
    fit_gaussian_surrogate_with, gaussian_target, logistic_target, nelder_mead,
    parse_event_file, quartic_target, simulate_mmpp, EventData, GaussianSurrogate, MmppModel,
    MmppParams, NelderMeadOptions, TargetModel,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, GradientSpec, MetricSpec, SamplerSpec, TargetSpec};
use crate::error::{CliError, CliResult};

/// Standard deviation of the jitter added to the posterior mode when
/// starting MMPP chains.
pub const MMPP_START_JITTER: f64 = 0.1;

pub struct MmppContext {
    pub model: Arc<MmppModel>,
    /// Posterior mode found by Nelder–Mead.
    pub mode: Vec<f64>,
    pub data: EventData,
}

/// Everything a replicate needs besides its seed.
pub struct Prepared {
    pub target: Arc<dyn TargetModel>,
    pub scales: Option<Vec<f64>>,
    pub mmpp: Option<MmppContext>,
    surrogate: Option<Arc<GaussianSurrogate>>,
}

impl Prepared {
    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Surrogate fitted for this target, if one was needed.
    pub fn surrogate(&self) -> Option<&Arc<GaussianSurrogate>> {
        self.surrogate.as_ref()
    }
}

fn cfg_err(e: dbps::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Simulated or loaded MMPP event data.
pub fn mmpp_data(spec: &TargetSpec) -> CliResult<EventData> {
    let TargetSpec::Mmpp {
        data_file,
        simulate,
        ..
    } = spec
    else {
        return Err(CliError::Config("not an MMPP target".into()));
    };
    match data_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            parse_event_file(&text).map_err(cfg_err)
        }
        None => {
            let params = MmppParams::cyclic(&simulate.rates, &simulate.lambda).map_err(cfg_err)?;
            let mut rng = ChaCha8Rng::seed_from_u64(simulate.seed);
            let times = simulate_mmpp(&params, simulate.t_end, &mut rng);
            EventData::new(times, simulate.t_end).map_err(cfg_err)
        }
    }
}

/// Nelder–Mead start for the MMPP posterior: unit switching rates and
/// Poisson rates spread geometrically around the empirical event rate.
pub fn mmpp_search_start(model: &MmppModel) -> Vec<f64> {
    let k = model.k();
    let data = model.data();
    let mean_rate = (data.times.len().max(1) as f64 / data.t_end).ln();
    let spread = |i: usize| (i as f64 - (k as f64 - 1.0) / 2.0) * 0.5;
    std::iter::repeat(0.0)
        .take(model.pattern().len())
        .chain((0..k).map(|i| mean_rate + spread(i)))
        .collect()
}

fn build_target(spec: &TargetSpec) -> CliResult<(Arc<dyn TargetModel>, Option<MmppContext>)> {
    Ok(match spec {
        TargetSpec::Quartic { .. } => {
            let scales = spec.scales().expect("quartic has scales");
            (Arc::new(quartic_target(&scales).map_err(cfg_err)?), None)
        }
        TargetSpec::Gaussian { mean, covariance } => {
            let d = mean.len();
            if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
                return Err(CliError::Config("covariance must be d x d".into()));
            }
            let cov = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
            (Arc::new(gaussian_target(mean, &cov).map_err(cfg_err)?), None)
        }
        TargetSpec::Logistic { d } => (Arc::new(logistic_target(*d).map_err(cfg_err)?), None),
        TargetSpec::Mmpp { k, prior_sd, .. } => {
            let data = mmpp_data(spec)?;
            let model = Arc::new(MmppModel::cyclic(*k, data.clone(), *prior_sd).map_err(cfg_err)?);
            let start = mmpp_search_start(&model);
            let opt = nelder_mead(|t| -model.log_density(t), &start, &NelderMeadOptions::default())?;
            let ctx = MmppContext {
                model: model.clone(),
                mode: opt.x,
                data,
            };
            (model, Some(ctx))
        }
    })
}

pub fn prepare(cfg: &ExperimentConfig) -> CliResult<Prepared> {
    let (target, mmpp) = build_target(&cfg.target)?;
    let mut prep = Prepared {
        target,
        scales: cfg.target.scales(),
        mmpp,
        surrogate: None,
    };
    if cfg.sampler.gradient == GradientSpec::Surrogate {
        prep.fit_surrogate()?;
    }
    Ok(prep)
}

impl Prepared {
    /// Fits the Gaussian surrogate from the MMPP mode (or the origin).
    pub fn fit_surrogate(&mut self) -> CliResult<Arc<GaussianSurrogate>> {
        if let Some(s) = &self.surrogate {
            return Ok(s.clone());
        }
        let start = match &self.mmpp {
            Some(m) => m.mode.clone(),
            None => vec![0.0; self.dim()],
        };
        let s = Arc::new(fit_gaussian_surrogate_with(
            &*self.target,
            &start,
            &NelderMeadOptions::default(),
        )?);
        self.surrogate = Some(s.clone());
        Ok(s)
    }
}

/// Metric from its specification.
pub fn build_metric(spec: &MetricSpec, scales: Option<&[f64]>, d: usize) -> CliResult<Metric> {
    let m = match spec {
        MetricSpec::Diagonal(v) => Metric::from_diagonal(v),
        MetricSpec::Gamma(rows) => {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(CliError::Config("gamma must be d x d".into()));
            }
            Metric::from_gamma(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
        }
        MetricSpec::InverseSquaredScales => {
            let s = scales.ok_or_else(|| {
                CliError::Config("inverse_squared_scales needs a target with scales".into())
            })?;
            Metric::from_diagonal(&s.iter().map(|l| l.powi(-2)).collect::<Vec<_>>())
        }
    }
    .map_err(cfg_err)?;
    if m.dim() != d {
        return Err(CliError::Config(format!("metric has dimension {}, target {d}", m.dim())));
    }
    Ok(m)
}

/// Sampler configuration (seed 0) for `spec` on the prepared target.
pub fn sampler_config(prep: &Prepared, spec: &SamplerSpec) -> CliResult<SamplerConfig> {
    let mut sc = SamplerConfig::new(spec.delta, spec.eps, spec.kappa);
    sc.n_cpt = spec.n_cpt;
    sc.gradient_mode = match spec.gradient {
        GradientSpec::Analytic => GradientMode::Analytic,
        GradientSpec::Forward => GradientMode::ForwardDifference,
        GradientSpec::Central => GradientMode::CentralDifference,
        GradientSpec::Surrogate => match &prep.surrogate {
            Some(s) => GradientMode::Surrogate(s.clone()),
            None => return Err(CliError::Config("surrogate has not been fitted".into())),
        },
    };
    if let Some(m) = &spec.metric {
        sc.metric = Some(build_metric(m, prep.scales.as_deref(), prep.dim())?);
    }
    sc.validate(&*prep.target).map_err(cfg_err)?;
    Ok(sc)
}

/// Replicate starting point: i.i.d. standard normal scaled by the target
/// scales (toy targets), the Gaussian mean plus a unit-normal offset, or
/// the MMPP posterior mode with a small jitter.
pub fn starting_point(prep: &Prepared, target: &TargetSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = prep.dim();
    let z = standard_normal_vec(d, rng);
    if let Some(m) = &prep.mmpp {
        return m.mode.iter().zip(&z).map(|(a, b)| a + MMPP_START_JITTER * b).collect();
    }
    match target {
        TargetSpec::Gaussian { mean, .. } => mean.iter().zip(&z).map(|(a, b)| a + b).collect(),
        _ => match &prep.scales {
            Some(s) => z.iter().zip(s).map(|(a, b)| a * b).collect(),
            None => z,
        },
    }
}
