//! Trace CSV, segment sidecar and summary JSON files.

use std::fmt::Write as _;
use std::path::Path;

use dbps::geometry::dot;
use dbps::sampler::{ChainTrace, PhaseState, SegmentRecord, StepKind};

use crate::error::{CliError, CliResult};

/// `iter,logpi,kind,x_1,...,x_d`, one row per iteration; positions only on
/// thinned rows.
pub fn trace_csv(trace: &ChainTrace) -> String {
    let d = trace.dim;
    let mut s = String::from("iter,logpi,kind");
    for j in 1..=d {
        write!(s, ",x_{j}").unwrap();
    }
    s.push('\n');
    for (i, (lp, kind)) in trace.log_pi.iter().zip(&trace.kinds).enumerate() {
        let it = i + 1;
        write!(s, "{it},{lp},{}", kind.code()).unwrap();
        if it % trace.thin == 0 {
            for v in trace.position(it / trace.thin - 1) {
                write!(s, ",{v}").unwrap();
            }
        } else {
            for _ in 0..d {
                s.push(',');
            }
        }
        s.push('\n');
    }
    s
}

/// `iter,kind,before_1..before_d,after_1..after_d` for every bounce event.
pub fn segments_csv(trace: &ChainTrace) -> CliResult<String> {
    let segs = trace
        .segments
        .as_ref()
        .ok_or_else(|| CliError::Runtime("trace was run without velocity recording".into()))?;
    let d = trace.dim;
    let mut s = String::from("iter,kind");
    for j in 1..=d {
        write!(s, ",before_{j}").unwrap();
    }
    for j in 1..=d {
        write!(s, ",after_{j}").unwrap();
    }
    s.push('\n');
    for rec in segs {
        write!(s, "{},{}", rec.iter, trace.kinds[rec.iter - 1].code()).unwrap();
        for v in rec.velocity_before.iter().chain(&rec.velocity_after) {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

fn parse_f64(field: &str, line: usize) -> CliResult<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| CliError::Runtime(format!("line {line}: bad number {field:?}")))
}

/// Reads a trace CSV. The thinning is inferred from the first row with
/// positions; evaluation counts and the final velocity are not stored and
/// come back as zero.
pub fn parse_trace_csv(text: &str) -> CliResult<ChainTrace> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Runtime("empty trace file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[..3] != ["iter", "logpi", "kind"] {
        return Err(CliError::Runtime("trace header must start with iter,logpi,kind,x_1".into()));
    }
    let d = cols.len() - 3;
    let mut log_pi = Vec::new();
    let mut kinds = Vec::new();
    let mut positions = Vec::new();
    let mut thin = None;
    let mut dr_iters = Vec::new();
    for (n, line) in lines.enumerate() {
        let lno = n + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != d + 3 {
            return Err(CliError::Runtime(format!("line {lno}: expected {} fields", d + 3)));
        }
        let it = parse_f64(f[0], lno)? as usize;
        if it != n + 1 {
            return Err(CliError::Runtime(format!("line {lno}: iterations must be consecutive")));
        }
        log_pi.push(parse_f64(f[1], lno)?);
        let kind = f[2]
            .chars()
            .next()
            .and_then(StepKind::from_code)
            .ok_or_else(|| CliError::Runtime(format!("line {lno}: unknown kind {:?}", f[2])))?;
        if kind.is_dr_event() {
            dr_iters.push(it);
        }
        kinds.push(kind);
        if !f[3].is_empty() {
            thin.get_or_insert(it);
            for v in &f[3..] {
                positions.push(parse_f64(v, lno)?);
            }
        }
    }
    let thin = thin.ok_or_else(|| CliError::Runtime("trace has no position rows".into()))?;
    let last = positions.len().checked_sub(d).map(|s| positions[s..].to_vec());
    Ok(ChainTrace {
        dim: d,
        thin,
        positions,
        log_pi,
        kinds,
        dr_iters,
        segment_cosines: Vec::new(),
        segments: None,
        evaluations: 0,
        final_state: PhaseState {
            x: last.unwrap_or_default(),
            u: vec![0.0; d],
        },
    })
}

/// Reads a segment sidecar and attaches it (and the derived segment
/// cosines) to `trace`.
pub fn attach_segments(trace: &mut ChainTrace, text: &str) -> CliResult<()> {
    let d = trace.dim;
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let lno = n + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 2 + 2 * d {
            return Err(CliError::Runtime(format!("segments line {lno}: expected {} fields", 2 + 2 * d)));
        }
        let vals = f[2..].iter().map(|v| parse_f64(v, lno)).collect::<CliResult<Vec<_>>>()?;
        records.push(SegmentRecord {
            iter: parse_f64(f[0], lno)? as usize,
            velocity_before: vals[..d].to_vec(),
            velocity_after: vals[d..].to_vec(),
        });
    }
    trace.segment_cosines = records
        .windows(2)
        .map(|w| dot(&w[0].velocity_after, &w[1].velocity_before))
        .collect();
    trace.segments = Some(records);
    Ok(())
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable value");
    s.push('\n');
    s
}
