//! Chain-quality statistics: effective sample sizes, bounce fractions,
//! direction persistence across segments and convergence from the tails.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{ChainTrace, StepKind};

/// Shortest series accepted by [`ess`].
pub const MIN_ESS_LEN: usize = 100;

/// Normalised autocorrelations `rho_0 = 1, rho_1, ...` of the demeaned
/// series (biased covariance estimator), computed by FFT.
pub fn autocorrelation(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) {
        return Err(Error::ConstantSeries);
    }
    Ok(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Effective sample size with Geyer's initial monotone positive sequence:
/// `n / (1 + 2 sum rho_k)` with the sum truncated at the first
/// non-positive pair `rho_{2m} + rho_{2m+1}` and pair sums forced to be
/// non-increasing. Clamped to `(0, n]`.
pub fn ess(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_ESS_LEN {
        return Err(Error::SeriesTooShort {
            len: n,
            min: MIN_ESS_LEN,
        });
    }
    let first = series[0];
    if series.iter().all(|v| *v == first) {
        return Err(Error::ConstantSeries);
    }
    let rho = autocorrelation(series)?;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for m in 0..n / 2 {
        let pair = rho[2 * m] + rho[2 * m + 1];
        if !(pair > 0.0) {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
    }
    let tau = 2.0 * sum - 1.0;
    let nf = n as f64;
    Ok(if tau > 1.0 { nf / tau } else { nf })
}

/// Sample mean and its Monte Carlo standard error `sd / sqrt(ess)`.
pub fn mean_with_standard_error(series: &[f64]) -> Result<(f64, f64)> {
    let e = ess(series)?;
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / e).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStats {
    pub f_b: f64,
    pub f_r: f64,
    pub c_rms: Option<f64>,
}

/// `sqrt(mean c^2)`, or `None` for an empty slice.
pub fn c_rms_from_cosines(cosines: &[f64]) -> Option<f64> {
    if cosines.is_empty() {
        return None;
    }
    Some((cosines.iter().map(|c| c * c).sum::<f64>() / cosines.len() as f64).sqrt())
}

/// Fractions of accepted and rejected bounces, and the root-mean-square
/// cosine between the velocities at the two ends of each segment between
/// consecutive bounce events (undefined with fewer than two events).
pub fn segment_stats(trace: &ChainTrace) -> SegmentStats {
    let n = trace.kinds.len().max(1) as f64;
    let count = |k: StepKind| trace.kinds.iter().filter(|&&x| x == k).count() as f64;
    SegmentStats {
        f_b: count(StepKind::BounceAccept) / n,
        f_r: count(StepKind::BounceReject) / n,
        c_rms: c_rms_from_cosines(&trace.segment_cosines),
    }
}

/// Bounces per unit cost, `f_b / (1 + omega (f_b + f_r))`, where `omega` is
/// the cost of a bounce relative to a plain iteration.
pub fn efficiency_ratio(f_b: f64, f_r: f64, omega: f64) -> f64 {
    f_b / (1.0 + omega * (f_b + f_r))
}

/// First index whose value strictly exceeds `m_pi`.
pub fn convergence_time(logpi: &[f64], m_pi: f64) -> Option<usize> {
    logpi.iter().position(|v| *v > m_pi)
}

/// Sample median, averaging the two middle values for even lengths.
pub fn median(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut v = series.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Median of the log-density series of a converged run.
pub fn reference_median_logpi(trace: &ChainTrace) -> Result<f64> {
    median(&trace.log_pi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub n_iters: usize,
    pub f_b: f64,
    pub f_r: f64,
    pub c_rms: Option<f64>,
    /// Per-coordinate ESS of the thinned positions; `None` where the
    /// series is constant or too short.
    pub ess: Vec<Option<f64>>,
    pub ess_min: Option<f64>,
    pub ess_lp: Option<f64>,
    pub n_degenerate: usize,
    pub evaluations: u64,
}

impl DiagnosticsSummary {
    pub fn from_trace(trace: &ChainTrace) -> Self {
        let seg = segment_stats(trace);
        let ess_coords: Vec<Option<f64>> =
            (0..trace.dim).map(|j| ess(&trace.coordinate(j)).ok()).collect();
        let ess_min = if ess_coords.iter().all(Option::is_some) {
            ess_coords.iter().flatten().copied().reduce(f64::min)
        } else {
            None
        };
        DiagnosticsSummary {
            n_iters: trace.kinds.len(),
            f_b: seg.f_b,
            f_r: seg.f_r,
            c_rms: seg.c_rms,
            ess_min,
            ess: ess_coords,
            ess_lp: ess(&trace.thinned_log_pi()).ok(),
            n_degenerate: trace
                .kinds
                .iter()
                .filter(|&&k| k == StepKind::DegenerateSkip)
                .count(),
            evaluations: trace.evaluations,
        }
    }

    /// `ess_min` per 10^6 log-density evaluations.
    pub fn ess_min_per_million_evals(&self) -> Option<f64> {
        self.ess_min.map(|e| e * 1e6 / self.evaluations.max(1) as f64)
    }

    pub fn ess_lp_per_million_evals(&self) -> Option<f64> {
        self.ess_lp.map(|e| e * 1e6 / self.evaluations.max(1) as f64)
    }
}
