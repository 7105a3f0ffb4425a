//! Markov-modulated Poisson process: likelihood, posterior on log-rates,
//! exact simulation and the event-file format.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{matexp, TargetModel};
use crate::error::{Error, Result};

/// A generator matrix and per-state event rates.
#[derive(Debug, Clone, PartialEq)]
pub struct MmppParams {
    pub q: DMatrix<f64>,
    pub lambda: Vec<f64>,
}

impl MmppParams {
    /// Builds `Q` from off-diagonal entries; the diagonal is set to minus
    /// the row sum.
    pub fn new(mut q: DMatrix<f64>, lambda: Vec<f64>) -> Result<Self> {
        let k = lambda.len();
        if k == 0 {
            return Err(Error::DimensionTooSmall { min: 1, got: 0 });
        }
        if q.shape() != (k, k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: q.nrows(),
            });
        }
        for i in 0..k {
            let mut row = 0.0;
            for j in 0..k {
                if i != j {
                    let v = q[(i, j)];
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(Error::InvalidConfig(format!(
                            "generator entry ({i},{j}) must be finite and non-negative"
                        )));
                    }
                    row += v;
                }
            }
            q[(i, i)] = -row;
        }
        if lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidConfig(
                "event rates must be finite and non-negative".into(),
            ));
        }
        Ok(MmppParams { q, lambda })
    }

    /// The cyclic chain `1 -> 2 -> ... -> k -> 1` with the given jump rates.
    pub fn cyclic(rates: &[f64], lambda: &[f64]) -> Result<Self> {
        let k = lambda.len();
        if rates.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: rates.len(),
            });
        }
        let mut q = DMatrix::zeros(k, k);
        if k > 1 {
            for (i, r) in rates.iter().enumerate() {
                q[(i, (i + 1) % k)] += r;
            }
        }
        MmppParams::new(q, lambda.to_vec())
    }

    pub fn k(&self) -> usize {
        self.lambda.len()
    }
}

/// Stationary law of a generator: solves `pi Q = 0` with `sum pi = 1`.
pub fn stationary_distribution(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let k = q.nrows();
    if k == 0 || q.ncols() != k {
        return Err(Error::InvalidConfig("generator must be square and nonempty".into()));
    }
    // rows of Q^T give the balance equations; replace the last by normalization
    let mut a = q.transpose();
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidConfig("generator is not irreducible".into()))?;
    Ok(pi.iter().copied().collect())
}

/// Exact simulation on `[0, t_end]`, starting in the first state.
pub fn simulate_mmpp<R: Rng + ?Sized>(params: &MmppParams, t_end: f64, rng: &mut R) -> Vec<f64> {
    let k = params.k();
    let mut events = Vec::new();
    let mut state = 0usize;
    let mut t = 0.0;
    while t < t_end {
        let leave = -params.q[(state, state)];
        let sojourn_end = if leave > 0.0 {
            let e = Exp::new(leave).expect("positive rate");
            (t + e.sample(rng)).min(t_end)
        } else {
            t_end
        };
        let lam = params.lambda[state];
        if lam > 0.0 {
            let e = Exp::new(lam).expect("positive rate");
            let mut s = t + e.sample(rng);
            while s < sojourn_end {
                events.push(s);
                s += e.sample(rng);
            }
        }
        t = sojourn_end;
        if t >= t_end {
            break;
        }
        let mut u = rng.random::<f64>() * leave;
        let mut next = state;
        for j in 0..k {
            if j == state || params.q[(state, j)] <= 0.0 {
                continue;
            }
            next = j;
            u -= params.q[(state, j)];
            if u < 0.0 {
                break;
            }
        }
        state = next;
    }
    events
}

/// Observed event times on `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventData {
    pub times: Vec<f64>,
    pub t_end: f64,
}

impl EventData {
    pub fn new(times: Vec<f64>, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidConfig("t_end must be positive".into()));
        }
        let mut prev = 0.0;
        for (i, &t) in times.iter().enumerate() {
            if !(t >= 0.0 && t <= t_end) {
                return Err(Error::Parse {
                    line: i + 2,
                    msg: format!("event time {t} outside [0, {t_end}]"),
                });
            }
            if i > 0 && t <= prev {
                return Err(Error::Parse {
                    line: i + 2,
                    msg: "event times must be strictly increasing".into(),
                });
            }
            prev = t;
        }
        Ok(EventData { times, t_end })
    }
}

/// Parses the text format: a `t_end=<seconds>` header, then one event time
/// per line. Blank lines are ignored.
pub fn parse_event_file(text: &str) -> Result<EventData> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing t_end header".into(),
    })?;
    let t_end = header
        .strip_prefix("t_end=")
        .and_then(|v| v.trim().parse::<f64>().ok())
        .ok_or(Error::Parse {
            line: hline,
            msg: format!("expected `t_end=<seconds>`, found `{header}`"),
        })?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Parse {
            line: hline,
            msg: "t_end must be positive".into(),
        });
    }
    let mut times = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for (line, l) in lines {
        let t: f64 = l.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("not a number: `{l}`"),
        })?;
        if !(t >= 0.0 && t <= t_end) {
            return Err(Error::Parse {
                line,
                msg: format!("event time {t} outside [0, {t_end}]"),
            });
        }
        if t <= prev {
            return Err(Error::Parse {
                line,
                msg: "event times must be strictly increasing".into(),
            });
        }
        prev = t;
        times.push(t);
    }
    Ok(EventData { times, t_end })
}

pub fn write_event_file(data: &EventData) -> String {
    let mut s = format!("t_end={}\n", data.t_end);
    for t in &data.times {
        s.push_str(&format!("{t}\n"));
    }
    s
}

/// Posterior over the natural logs of the free rates of an MMPP.
///
/// Parameter layout: one log-rate per entry of `pattern` (in order), then
/// `log lambda_1, ..., log lambda_k`. Each log-parameter has an independent
/// `N(0, prior_sd^2)` prior.
#[derive(Debug, Clone)]
pub struct MmppModel {
    k: usize,
    pattern: Vec<(usize, usize)>,
    data: EventData,
    prior_sd: f64,
}

impl MmppModel {
    pub fn new(
        k: usize,
        pattern: Vec<(usize, usize)>,
        data: EventData,
        prior_sd: f64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::DimensionTooSmall { min: 1, got: 0 });
        }
        for (n, &(i, j)) in pattern.iter().enumerate() {
            if i >= k || j >= k || i == j {
                return Err(Error::InvalidConfig(format!(
                    "pattern entry ({i},{j}) is not an off-diagonal position"
                )));
            }
            if pattern[..n].contains(&(i, j)) {
                return Err(Error::InvalidConfig(format!("pattern entry ({i},{j}) repeated")));
            }
        }
        if !(prior_sd > 0.0) {
            return Err(Error::InvalidConfig("prior_sd must be positive".into()));
        }
        Ok(MmppModel {
            k,
            pattern,
            data,
            prior_sd,
        })
    }

    /// Cyclic pattern `(1,2), (2,3), ..., (k,1)` (no free jumps when `k = 1`).
    pub fn cyclic(k: usize, data: EventData, prior_sd: f64) -> Result<Self> {
        let pattern = if k > 1 {
            (0..k).map(|i| (i, (i + 1) % k)).collect()
        } else {
            Vec::new()
        };
        MmppModel::new(k, pattern, data, prior_sd)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pattern(&self) -> &[(usize, usize)] {
        &self.pattern
    }

    pub fn data(&self) -> &EventData {
        &self.data
    }

    pub fn prior_sd(&self) -> f64 {
        self.prior_sd
    }

    pub fn n_params(&self) -> usize {
        self.pattern.len() + self.k
    }

    pub fn params_from_theta(&self, theta: &[f64]) -> Result<MmppParams> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        let mut q = DMatrix::zeros(self.k, self.k);
        for (&(i, j), t) in self.pattern.iter().zip(theta) {
            q[(i, j)] = t.exp();
        }
        let lambda = theta[self.pattern.len()..].iter().map(|t| t.exp()).collect();
        MmppParams::new(q, lambda)
    }

    /// Log-parameters of `params`; entries outside the pattern are ignored.
    pub fn theta_from_params(&self, params: &MmppParams) -> Vec<f64> {
        self.pattern
            .iter()
            .map(|&(i, j)| params.q[(i, j)].ln())
            .chain(params.lambda.iter().map(|l| l.ln()))
            .collect()
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        match self.params_from_theta(theta) {
            Ok(p) => log_likelihood_params(&p, &self.data),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        let prior: f64 = theta.iter().map(|t| t * t).sum::<f64>() / (2.0 * self.prior_sd.powi(2));
        self.log_likelihood(theta) - prior
    }
}

impl TargetModel for MmppModel {
    fn dim(&self) -> usize {
        self.n_params()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        self.log_posterior(theta)
    }
}

/// Log-likelihood of `data` under `params`, starting in the first state.
pub fn log_likelihood_params(params: &MmppParams, data: &EventData) -> f64 {
    let mut segments = Vec::with_capacity(data.times.len() + 1);
    let mut prev = 0.0;
    for &t in &data.times {
        segments.push((t - prev, true));
        prev = t;
    }
    segments.push((data.t_end - prev, false));
    propagate(params, &segments)
}

/// Propagates `e_1^T` through `exp((Q - Lambda) dt)` for each segment,
/// followed by `Lambda` when the segment ends in an event, renormalising
/// after every factor. Returns the accumulated log-normaliser plus the log
/// of the final total mass.
fn propagate(params: &MmppParams, segments: &[(f64, bool)]) -> f64 {
    let k = params.k();
    let mut a = params.q.clone();
    for i in 0..k {
        a[(i, i)] -= params.lambda[i];
    }
    let mut v = DVector::<f64>::zeros(k).transpose();
    v[0] = 1.0;
    let mut log_norm = 0.0;
    for &(dt, event) in segments {
        v = &v * matexp(&(&a * dt));
        if !renormalise(&mut v, &mut log_norm) {
            return f64::NEG_INFINITY;
        }
        if event {
            for i in 0..k {
                v[i] *= params.lambda[i];
            }
            if !renormalise(&mut v, &mut log_norm) {
                return f64::NEG_INFINITY;
            }
        }
    }
    if log_norm.is_nan() {
        f64::NEG_INFINITY
    } else {
        log_norm
    }
}

fn renormalise(v: &mut nalgebra::RowDVector<f64>, log_norm: &mut f64) -> bool {
    let s: f64 = v.iter().map(|x| x.abs()).sum();
    if !(s > 0.0) || !s.is_finite() {
        return false;
    }
    *v /= s;
    *log_norm += s.ln();
    true
}
