//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalePattern {
    /// `lambda_i = i`.
    Index,
    /// `lambda_i = 1`.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scales {
    Pattern(ScalePattern),
    Values(Vec<f64>),
}

impl Default for Scales {
    fn default() -> Self {
        Scales::Pattern(ScalePattern::Index)
    }
}

/// Parameters of simulated MMPP data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmppSimulation {
    /// Cycle rates `q_{12}, q_{23}, ..., q_{k1}`.
    pub rates: Vec<f64>,
    pub lambda: Vec<f64>,
    pub t_end: f64,
    pub seed: u64,
}

impl Default for MmppSimulation {
    fn default() -> Self {
        MmppSimulation {
            rates: vec![2.0, 1.0, 0.5, 0.5],
            lambda: vec![15.0, 5.0, 1.0, 10.0],
            t_end: 25.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Quartic {
        d: usize,
        #[serde(default)]
        scales: Scales,
    },
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
    Logistic {
        d: usize,
    },
    Mmpp {
        #[serde(default = "default_k")]
        k: usize,
        /// Event file; when absent, data are simulated.
        #[serde(default)]
        data_file: Option<PathBuf>,
        #[serde(default)]
        simulate: MmppSimulation,
        #[serde(default = "default_prior_sd")]
        prior_sd: f64,
    },
}

fn default_k() -> usize {
    4
}

fn default_prior_sd() -> f64 {
    2.0
}

impl TargetSpec {
    /// Per-coordinate scales of the toy targets, used for starting points
    /// and preconditioning.
    pub fn scales(&self) -> Option<Vec<f64>> {
        match self {
            TargetSpec::Quartic { d, scales } => Some(match scales {
                Scales::Pattern(ScalePattern::Index) => (1..=*d).map(|i| i as f64).collect(),
                Scales::Pattern(ScalePattern::Unit) => vec![1.0; *d],
                Scales::Values(v) => v.clone(),
            }),
            TargetSpec::Logistic { d } => Some((1..=*d).map(|i| i as f64).collect()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientSpec {
    #[default]
    Analytic,
    Forward,
    Central,
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    /// Diagonal of `Gamma`.
    Diagonal(Vec<f64>),
    /// Full `Gamma`, row by row.
    Gamma(Vec<Vec<f64>>),
    /// `Gamma = diag(lambda_i^{-2})` from the target scales.
    InverseSquaredScales,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSpec {
    pub delta: f64,
    pub eps: f64,
    pub kappa: f64,
    pub n_cpt: Option<usize>,
    pub gradient: GradientSpec,
    pub metric: Option<MetricSpec>,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            delta: 10f64.powf(0.5),
            eps: 0.0,
            kappa: 10f64.powf(-1.5),
            n_cpt: None,
            gradient: GradientSpec::Analytic,
            metric: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Delta,
    Eps,
    Kappa,
    NCpt,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Delta => "delta",
            SweepAxis::Eps => "eps",
            SweepAxis::Kappa => "kappa",
            SweepAxis::NCpt => "n_cpt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Grid values are log10 of the parameter.
    #[serde(default)]
    pub log10: bool,
}

impl SweepSpec {
    pub fn parameter(&self, g: usize) -> f64 {
        if self.log10 {
            10f64.powf(self.values[g])
        } else {
            self.values[g]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeSpec {
    pub multipliers: Vec<f64>,
    /// Iteration cap per run.
    pub cap: usize,
    /// Length of the reference run giving the median log density and the
    /// pool of starting points.
    pub reference_iters: usize,
    /// Thinning of the reference run when building the pool.
    pub pool_thin: usize,
}

impl Default for ConvergeSpec {
    fn default() -> Self {
        ConvergeSpec {
            multipliers: vec![10.0, 100.0, 1000.0],
            cap: 10_000_000,
            reference_iters: 100_000,
            pool_thin: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreconditionSpec {
    /// Settings of the preconditioned run.
    pub sampler: SamplerSpec,
    /// Iterations of the equivalence check.
    pub equivalence_iters: usize,
}

impl Default for PreconditionSpec {
    fn default() -> Self {
        PreconditionSpec {
            sampler: SamplerSpec {
                delta: 10f64.powf(-0.2),
                eps: 0.0,
                kappa: 1.0,
                metric: Some(MetricSpec::InverseSquaredScales),
                ..SamplerSpec::default()
            },
            equivalence_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmppRunSpec {
    /// Directions per bounce in the partial-gradient variant.
    pub n_cpt: usize,
}

impl Default for MmppRunSpec {
    fn default() -> Self {
        MmppRunSpec { n_cpt: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default = "default_n_iters")]
    pub n_iters: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub converge: ConvergeSpec,
    #[serde(default)]
    pub precondition: PreconditionSpec,
    #[serde(default)]
    pub mmpp: MmppRunSpec,
    /// Cost of a bounce relative to a plain iteration, for the efficiency
    /// ratio.
    #[serde(default)]
    pub omega: f64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_n_iters() -> usize {
    100_000
}

fn default_thin() -> usize {
    1
}

fn default_replicates() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("dbps-out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.n_iters == 0 || self.thin == 0 {
            return bad("n_iters and thin must be at least 1");
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep grid is empty");
            }
            if s.axis == SweepAxis::NCpt && s.values.iter().any(|v| v.fract() != 0.0 || *v < 2.0) {
                return bad("n_cpt grid values must be integers >= 2");
            }
        }
        if self.converge.multipliers.iter().any(|m| !(*m > 0.0)) {
            return bad("multipliers must be positive");
        }
        Ok(())
    }

    /// Switches to the full run lengths: 10^6 iterations (10^5 for MMPP)
    /// and a 250 s MMPP window.
    pub fn full_scale(mut self) -> Self {
        match &mut self.target {
            TargetSpec::Mmpp { simulate, .. } => {
                simulate.t_end = 250.0;
                self.n_iters = self.n_iters.max(100_000);
            }
            _ => self.n_iters = self.n_iters.max(1_000_000),
        }
        self
    }

    /// Canonical JSON of the configuration without the output directory.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(m) = v.as_object_mut() {
            m.remove("out");
        }
        serde_json::to_string(&v).expect("value serialises")
    }

    /// First 16 hex digits of the SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// `out/<hash>`.
    pub fn output_dir(&self) -> PathBuf {
        self.out.join(self.hash())
    }
}
