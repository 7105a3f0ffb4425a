//! The experiment subcommands. Each writes its files under
//! `<out>/<config hash>/` and returns an in-memory report.

use std::path::{Path, PathBuf};

use dbps::diagnostics::{
    convergence_time, efficiency_ratio, median, DiagnosticsSummary,
};
use dbps::sampler::{
    log_log_slope, precondition_equivalence_check, run_chain, Chain, RunOptions, SamplerConfig,
};
use dbps::targets::write_event_file;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, GradientSpec, SamplerSpec, SweepAxis, TargetSpec};
use crate::error::{CliError, CliResult};
use crate::output::{segments_csv, to_json, trace_csv, write_file};
use crate::runner::{
    derive_seed, par_map, replicate_jobs, run_jobs, start_rng, thread_cpu_seconds, ReplicateRun,
};
use crate::setup::{prepare, sampler_config, starting_point, Prepared};
use crate::svg::{render, Panel, Series};

fn prepare_dir(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    // without `out`, so the directory content depends only on its hash
    let mut v = serde_json::to_value(cfg).expect("config serialises");
    if let Some(m) = v.as_object_mut() {
        m.remove("out");
    }
    write_file(&dir.join("config.json"), &to_json(&v))?;
    Ok(dir)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub runs: Vec<ReplicateRun>,
}

/// One trace CSV, segment sidecar and summary JSON per replicate.
pub fn cmd_run(cfg: &ExperimentConfig, workers: usize) -> CliResult<RunReport> {
    let prep = prepare(cfg)?;
    let base = sampler_config(&prep, &cfg.sampler)?;
    let dir = prepare_dir(cfg)?;
    let jobs = replicate_jobs(&prep, &cfg.target, &base, cfg.seed, 0, cfg.replicates);
    let opts = RunOptions {
        n_iters: cfg.n_iters,
        thin: cfg.thin,
        record_velocities: true,
    };
    let runs = run_jobs(&prep, jobs, &opts, true, workers)?;
    for run in &runs {
        let trace = run.trace.as_ref().expect("traces kept");
        let r = run.replicate;
        write_file(&dir.join(format!("trace_r{r}.csv")), &trace_csv(trace))?;
        write_file(&dir.join(format!("segments_r{r}.csv")), &segments_csv(trace)?)?;
        write_file(&dir.join(format!("summary_r{r}.json")), &to_json(&run.summary))?;
    }
    Ok(RunReport { dir, runs })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub grid: usize,
    /// Grid value as configured (log10 when the grid is logarithmic).
    pub value: f64,
    pub parameter: f64,
    pub replicate: usize,
    pub seed: u64,
    pub summary: DiagnosticsSummary,
    pub efficiency: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub dir: PathBuf,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Per-grid-point mean of `f` over replicates (missing values skipped).
    pub fn mean_by_grid<F: Fn(&SweepRow) -> Option<f64>>(&self, f: F) -> Vec<f64> {
        (0..self.values.len())
            .map(|g| {
                let v: Vec<f64> = self.rows.iter().filter(|r| r.grid == g).filter_map(&f).collect();
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            })
            .collect()
    }

    /// Per-grid-point values of `f`, one vector per grid point.
    pub fn by_grid<F: Fn(&SweepRow) -> Option<f64>>(&self, f: F) -> Vec<Vec<f64>> {
        (0..self.values.len())
            .map(|g| self.rows.iter().filter(|r| r.grid == g).filter_map(&f).collect())
            .collect()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sweep_csv(report: &SweepReport) -> String {
    let mut s = format!(
        "grid,{},parameter,replicate,seed,f_b,f_r,c_rms,ess_min,ess_lp,evaluations,ess_min_per_1e6_evals,ess_lp_per_1e6_evals,efficiency\n",
        report.axis.name()
    );
    for r in &report.rows {
        let m = &r.summary;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.grid,
            r.value,
            r.parameter,
            r.replicate,
            r.seed,
            m.f_b,
            m.f_r,
            opt(m.c_rms),
            opt(m.ess_min),
            opt(m.ess_lp),
            m.evaluations,
            opt(m.ess_min_per_million_evals()),
            opt(m.ess_lp_per_million_evals()),
            r.efficiency
        ));
    }
    s
}

fn replicate_series<F: Fn(&SweepRow) -> Option<f64>>(report: &SweepReport, label: &str, f: F) -> Vec<Series> {
    let reps = report.rows.iter().map(|r| r.replicate).max().map_or(0, |m| m + 1);
    (0..reps)
        .map(|rep| Series {
            label: format!("{label} r{rep}"),
            points: report
                .rows
                .iter()
                .filter(|r| r.replicate == rep)
                .filter_map(|r| f(r).map(|y| (r.value, y)))
                .collect(),
            line: true,
        })
        .collect()
}

fn sweep_svg(report: &SweepReport, log10: bool) -> String {
    let x_label = if log10 {
        format!("log10 {}", report.axis.name())
    } else {
        report.axis.name().to_string()
    };
    let panel = |title: &str, y: &str, log_y: bool, series: Vec<Series>| Panel {
        title: title.into(),
        x_label: x_label.clone(),
        y_label: y.into(),
        log_y,
        series,
    };
    let mut fractions = vec![
        Series {
            label: "f_b".into(),
            points: report.values.iter().copied().zip(report.mean_by_grid(|r| Some(r.summary.f_b))).collect(),
            line: true,
        },
        Series {
            label: "f_r".into(),
            points: report.values.iter().copied().zip(report.mean_by_grid(|r| Some(r.summary.f_r))).collect(),
            line: true,
        },
    ];
    fractions.push(Series {
        label: "c_rms".into(),
        points: report.values.iter().copied().zip(report.mean_by_grid(|r| r.summary.c_rms)).collect(),
        line: true,
    });
    render(&[
        panel("bounce fractions (mean)", "fraction", false, fractions),
        panel("ESS_min", "ESS", true, replicate_series(report, "ess_min", |r| r.summary.ess_min)),
        panel("ESS_lp", "ESS", true, replicate_series(report, "ess_lp", |r| r.summary.ess_lp)),
        panel(
            "ESS_min per 1e6 evaluations",
            "ESS",
            true,
            replicate_series(report, "ess_min", |r| r.summary.ess_min_per_million_evals()),
        ),
    ])
}

fn apply_axis(spec: &SamplerSpec, axis: SweepAxis, value: f64) -> SamplerSpec {
    let mut s = spec.clone();
    match axis {
        SweepAxis::Delta => s.delta = value,
        SweepAxis::Eps => s.eps = value,
        SweepAxis::Kappa => s.kappa = value,
        SweepAxis::NCpt => s.n_cpt = Some(value.round() as usize),
    }
    s
}

/// Runs every grid point and replicate; writes `sweep.csv` and `sweep.svg`.
pub fn cmd_sweep(cfg: &ExperimentConfig, workers: usize) -> CliResult<SweepReport> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep requires a sweep axis".into()))?;
    let prep = prepare(cfg)?;
    let mut jobs = Vec::new();
    for g in 0..sweep.values.len() {
        let spec = apply_axis(&cfg.sampler, sweep.axis, sweep.parameter(g));
        let base = sampler_config(&prep, &spec)?;
        jobs.extend(replicate_jobs(&prep, &cfg.target, &base, cfg.seed, g, cfg.replicates));
    }
    let dir = prepare_dir(cfg)?;
    let runs = run_jobs(&prep, jobs, &RunOptions::new(cfg.n_iters, cfg.thin), false, workers)?;
    let rows = runs
        .into_iter()
        .map(|run| SweepRow {
            grid: run.grid,
            value: sweep.values[run.grid],
            parameter: sweep.parameter(run.grid),
            replicate: run.replicate,
            seed: run.seed,
            efficiency: efficiency_ratio(run.summary.f_b, run.summary.f_r, cfg.omega),
            summary: run.summary,
        })
        .collect();
    let report = SweepReport {
        dir: dir.clone(),
        axis: sweep.axis,
        values: sweep.values.clone(),
        rows,
    };
    write_file(&dir.join("sweep.csv"), &sweep_csv(&report))?;
    write_file(&dir.join("sweep.svg"), &sweep_svg(&report, sweep.log10))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeRow {
    pub multiplier: f64,
    pub replicate: usize,
    pub seed: u64,
    /// Iterations until the log density first exceeds the reference
    /// median; `None` if the cap was reached.
    pub n_cvg: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ConvergeReport {
    pub dir: PathBuf,
    pub m_pi: f64,
    pub rows: Vec<ConvergeRow>,
    /// Least-squares slope of `log10 n_cvg` on `log10 multiplier`, with
    /// capped runs entered at the cap (so a lower bound when any are
    /// capped).
    pub slope: f64,
    pub cap: usize,
}

impl ConvergeReport {
    pub fn n_censored(&self) -> usize {
        self.rows.iter().filter(|r| r.n_cvg.is_none()).count()
    }
}

/// Runs from scaled reference draws until the log density exceeds the
/// reference median; writes `converge.csv` and `converge.svg`.
pub fn cmd_converge(cfg: &ExperimentConfig, workers: usize) -> CliResult<ConvergeReport> {
    let cs = &cfg.converge;
    if cs.multipliers.is_empty() {
        return Err(CliError::Config("converge needs at least one multiplier".into()));
    }
    let prep = prepare(cfg)?;
    let base = sampler_config(&prep, &cfg.sampler)?;
    let dir = prepare_dir(cfg)?;

    // reference run: median log density and a pool of approximate draws
    let mut rng = start_rng(cfg.seed, usize::MAX);
    let x_ref = starting_point(&prep, &cfg.target, &mut rng);
    let ref_cfg = base.clone().with_seed(derive_seed(cfg.seed, usize::MAX, usize::MAX));
    let reference = run_chain(
        &*prep.target,
        &ref_cfg,
        &x_ref,
        &RunOptions::new(cs.reference_iters, cs.pool_thin),
    )?;
    let m_pi = median(&reference.log_pi)?;
    let pool: Vec<Vec<f64>> = (0..reference.n_thinned()).map(|i| reference.position(i).to_vec()).collect();

    let mut jobs = Vec::new();
    for (g, &phi) in cs.multipliers.iter().enumerate() {
        for r in 0..cfg.replicates {
            jobs.push((g, phi, r, derive_seed(cfg.seed, r, g)));
        }
    }
    let rows = par_map(jobs, workers, |(_, phi, r, seed)| {
        let mut pick = ChaCha8Rng::seed_from_u64(seed);
        pick.set_stream(2);
        let x0: Vec<f64> = pool[pick.random_range(0..pool.len())].iter().map(|v| phi * v).collect();
        let mut chain = Chain::new(&*prep.target, base.clone().with_seed(seed), &x0)?;
        let mut n_cvg = convergence_time(&[chain.log_pi()], m_pi);
        let mut n = 0;
        while n_cvg.is_none() && n < cs.cap {
            chain.step()?;
            n += 1;
            if chain.log_pi() > m_pi {
                n_cvg = Some(n);
            }
        }
        Ok(ConvergeRow {
            multiplier: phi,
            replicate: r,
            seed,
            n_cvg,
        })
    })?;
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.multiplier, r.n_cvg.unwrap_or(cs.cap).max(1) as f64))
        .collect();
    let slope = log_log_slope(&points);
    let report = ConvergeReport {
        dir: dir.clone(),
        m_pi,
        rows,
        slope,
        cap: cs.cap,
    };

    let mut csv = String::from("multiplier,replicate,seed,n_cvg,converged\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.multiplier,
            r.replicate,
            r.seed,
            r.n_cvg.unwrap_or(cs.cap),
            r.n_cvg.is_some()
        ));
    }
    csv.push_str(&format!("# m_pi={m_pi} slope={slope}\n"));
    write_file(&dir.join("converge.csv"), &csv)?;
    let series = (0..cfg.replicates)
        .map(|rep| Series {
            label: format!("r{rep}"),
            points: report
                .rows
                .iter()
                .filter(|r| r.replicate == rep)
                .map(|r| (r.multiplier.log10(), (r.n_cvg.unwrap_or(cs.cap).max(1) as f64).log10()))
                .collect(),
            line: true,
        })
        .collect();
    write_file(
        &dir.join("converge.svg"),
        &render(&[Panel {
            title: format!("convergence from the tails, slope {slope:.2}"),
            x_label: "log10 multiplier".into(),
            y_label: "log10 n_cvg".into(),
            log_y: false,
            series,
        }]),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantRun {
    pub replicate: usize,
    pub seed: u64,
    pub cpu_seconds: f64,
    pub summary: DiagnosticsSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct MmppVariant {
    pub name: String,
    /// Set when the variant could not be run.
    pub error: Option<String>,
    pub runs: Vec<VariantRun>,
    pub f_b: f64,
    pub f_r: f64,
    pub c_rms: Option<f64>,
    /// Mean over replicates of `ess_lp / cpu_seconds`.
    pub ess_lp_per_cpu_second: f64,
    /// Mean over replicates of per-parameter `ess / cpu_seconds`.
    pub ess_per_cpu_second: Vec<f64>,
    /// Smallest per-parameter ESS over replicates.
    pub ess_floor: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MmppReport {
    #[serde(skip)]
    pub dir: PathBuf,
    pub n_events: usize,
    pub t_end: f64,
    pub mode: Vec<f64>,
    pub surrogate_fit_cpu_seconds: Option<f64>,
    pub surrogate_condition_number: Option<f64>,
    pub variants: Vec<MmppVariant>,
}

impl MmppReport {
    pub fn variant(&self, name: &str) -> Option<&MmppVariant> {
        self.variants.iter().find(|v| v.name == name)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn summarise_variant(name: &str, runs: Vec<ReplicateRun>) -> MmppVariant {
    let d = runs.first().map_or(0, |r| r.summary.ess.len());
    let c: Vec<f64> = runs.iter().filter_map(|r| r.summary.c_rms).collect();
    MmppVariant {
        name: name.into(),
        error: None,
        f_b: mean(runs.iter().map(|r| r.summary.f_b)),
        f_r: mean(runs.iter().map(|r| r.summary.f_r)),
        c_rms: (!c.is_empty()).then(|| mean(c.iter().copied())),
        ess_lp_per_cpu_second: mean(
            runs.iter().map(|r| r.summary.ess_lp.unwrap_or(0.0) / r.cpu_seconds.max(1e-9)),
        ),
        ess_per_cpu_second: (0..d)
            .map(|j| mean(runs.iter().map(|r| r.summary.ess[j].unwrap_or(0.0) / r.cpu_seconds.max(1e-9))))
            .collect(),
        ess_floor: runs
            .iter()
            .flat_map(|r| r.summary.ess.iter().map(|e| e.unwrap_or(0.0)))
            .reduce(f64::min),
        runs: runs
            .into_iter()
            .map(|r| VariantRun {
                replicate: r.replicate,
                seed: r.seed,
                cpu_seconds: r.cpu_seconds,
                summary: r.summary,
            })
            .collect(),
    }
}

/// Full central-difference gradient, `n_cpt` directional derivatives and
/// the Gaussian surrogate at matched `(delta, kappa)`; writes `events.txt`
/// and `mmpp.json`.
pub fn cmd_mmpp(cfg: &ExperimentConfig, workers: usize) -> CliResult<MmppReport> {
    if !matches!(cfg.target, TargetSpec::Mmpp { .. }) {
        return Err(CliError::Config("mmpp requires an MMPP target".into()));
    }
    let mut prep = prepare(cfg)?;
    let dir = prepare_dir(cfg)?;
    let ctx = prep.mmpp.as_ref().expect("MMPP target");
    write_file(&dir.join("events.txt"), &write_event_file(&ctx.data))?;
    let n_events = ctx.data.times.len();
    let t_end = ctx.data.t_end;
    let mode = ctx.mode.clone();

    let t0 = thread_cpu_seconds();
    let surrogate = prep.fit_surrogate();
    let fit_seconds = thread_cpu_seconds() - t0;

    let full = SamplerSpec {
        gradient: GradientSpec::Central,
        n_cpt: None,
        ..cfg.sampler.clone()
    };
    let partial = SamplerSpec {
        n_cpt: Some(cfg.mmpp.n_cpt),
        ..full.clone()
    };
    let surr = SamplerSpec {
        gradient: GradientSpec::Surrogate,
        n_cpt: None,
        ..cfg.sampler.clone()
    };
    let names = ["full", "n_cpt", "surrogate"];
    let mut jobs = Vec::new();
    let mut failed = None;
    for (g, spec) in [full, partial, surr].iter().enumerate() {
        if g == 2 {
            if let Err(e) = &surrogate {
                failed = Some(e.to_string());
                continue;
            }
        }
        let base = sampler_config(&prep, spec)?;
        jobs.extend(replicate_jobs(&prep, &cfg.target, &base, cfg.seed, g, cfg.replicates));
    }
    let runs = run_jobs(&prep, jobs, &RunOptions::new(cfg.n_iters, cfg.thin), false, workers)?;
    let mut variants = Vec::new();
    for (g, name) in names.iter().enumerate() {
        let rs: Vec<ReplicateRun> = runs.iter().filter(|r| r.grid == g).cloned().collect();
        if rs.is_empty() {
            variants.push(MmppVariant {
                name: name.to_string(),
                error: failed.clone(),
                runs: Vec::new(),
                f_b: f64::NAN,
                f_r: f64::NAN,
                c_rms: None,
                ess_lp_per_cpu_second: 0.0,
                ess_per_cpu_second: Vec::new(),
                ess_floor: None,
            });
        } else {
            variants.push(summarise_variant(name, rs));
        }
    }
    let ok = surrogate.ok();
    let report = MmppReport {
        dir: dir.clone(),
        n_events,
        t_end,
        mode,
        surrogate_fit_cpu_seconds: ok.as_ref().map(|_| fit_seconds),
        surrogate_condition_number: ok.as_ref().map(|s| s.condition_number()),
        variants,
    };
    write_file(&dir.join("mmpp.json"), &to_json(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct PreconditionReport {
    #[serde(skip)]
    pub dir: PathBuf,
    pub equivalence_deviation: f64,
    pub plain: Vec<DiagnosticsSummary>,
    pub preconditioned: Vec<DiagnosticsSummary>,
    pub plain_ess_min: f64,
    pub preconditioned_ess_min: f64,
    pub ess_min_ratio: f64,
}

/// Plain and preconditioned runs at their own settings plus the
/// equivalence check; writes `precondition.json`.
pub fn cmd_precondition(cfg: &ExperimentConfig, workers: usize) -> CliResult<PreconditionReport> {
    let prep = prepare(cfg)?;
    let plain = sampler_config(&prep, &cfg.sampler)?;
    let pre = sampler_config(&prep, &cfg.precondition.sampler)?;
    let metric = pre
        .metric
        .clone()
        .ok_or_else(|| CliError::Config("preconditioned sampler needs a metric".into()))?;
    let dir = prepare_dir(cfg)?;
    let mut jobs = replicate_jobs(&prep, &cfg.target, &plain, cfg.seed, 0, cfg.replicates);
    jobs.extend(replicate_jobs(&prep, &cfg.target, &pre, cfg.seed, 1, cfg.replicates));
    let runs = run_jobs(&prep, jobs, &RunOptions::new(cfg.n_iters, cfg.thin), false, workers)?;

    let mut check_cfg = pre.clone().with_seed(derive_seed(cfg.seed, 0, 2));
    check_cfg.metric = None;
    let x0 = starting_point(&prep, &cfg.target, &mut start_rng(cfg.seed, 0));
    let deviation = precondition_equivalence_check(
        &*prep.target,
        &metric,
        &check_cfg,
        &x0,
        cfg.precondition.equivalence_iters,
    )?;

    let pick = |g: usize| -> Vec<DiagnosticsSummary> {
        runs.iter().filter(|r| r.grid == g).map(|r| r.summary.clone()).collect()
    };
    let (p, q) = (pick(0), pick(1));
    let mean_min = |v: &[DiagnosticsSummary]| mean(v.iter().map(|s| s.ess_min.unwrap_or(0.0)));
    let report = PreconditionReport {
        dir: dir.clone(),
        equivalence_deviation: deviation,
        plain_ess_min: mean_min(&p),
        preconditioned_ess_min: mean_min(&q),
        ess_min_ratio: mean_min(&q) / mean_min(&p),
        plain: p,
        preconditioned: q,
    };
    write_file(&dir.join("precondition.json"), &to_json(&report))?;
    Ok(report)
}

/// Diagnostics recomputed from a trace CSV and, when present, its segment
/// sidecar (`segments_*.csv` next to `trace_*.csv`).
pub fn cmd_diag(trace_path: &Path, segments_path: Option<&Path>) -> CliResult<DiagnosticsSummary> {
    let text = std::fs::read_to_string(trace_path)?;
    let mut trace = crate::output::parse_trace_csv(&text)?;
    let sidecar = segments_path.map(Path::to_path_buf).or_else(|| {
        let name = trace_path.file_name()?.to_str()?;
        let alt = trace_path.with_file_name(name.replacen("trace", "segments", 1));
        (alt != trace_path && alt.exists()).then_some(alt)
    });
    if let Some(p) = sidecar {
        crate::output::attach_segments(&mut trace, &std::fs::read_to_string(p)?)?;
    }
    Ok(DiagnosticsSummary::from_trace(&trace))
}

/// Sampler configuration for library callers that bypass the config file.
pub fn sampler_for(cfg: &ExperimentConfig) -> CliResult<(Prepared, SamplerConfig)> {
    let prep = prepare(cfg)?;
    let sc = sampler_config(&prep, &cfg.sampler)?;
    Ok((prep, sc))
}
