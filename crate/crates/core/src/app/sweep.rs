//! (g1, g2) phase-diagram sweep with an append-only checkpoint.
//!
//! Checkpoint layout: a header line `dicke-checkpoint v1 <fingerprint>`
//! followed by one tab-separated record per finished cell, each ending in a
//! CRC-32 of the rest of the line. Floats are stored as raw bit patterns so
//! a resumed sweep reproduces an uninterrupted one byte for byte.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::commands::otoc_options;
use super::config::RunConfig;
use super::output::{number, write_atomic, Report};
use crate::diagnostics::r_statistic;
use crate::error::{Error, Result};
use crate::exec::{with_threads, Execution};
use crate::otoc::otoc_deficit_at;
use crate::spectra::{converge_cutoff, order_parameter};

pub const SWEEP_COLUMNS: [&str; 11] = [
    "g1",
    "g2",
    "j",
    "omega",
    "omega0",
    "beta",
    "t",
    "n_max",
    "r_mean",
    "otoc_deficit",
    "order_parameter",
];

const CHECKPOINT_MAGIC: &str = "dicke-checkpoint v1";

/// Diagnostics of one grid cell. Unrequested values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    /// Largest cutoff any requested diagnostic resolved to.
    pub n_max: Option<usize>,
    pub r_mean: Option<f64>,
    pub otoc_deficit: Option<f64>,
    pub order_parameter: Option<f64>,
    pub failure: Option<String>,
}

/// Evaluates the requested diagnostics at (g1, g2).
pub fn evaluate_cell(cfg: &RunConfig, g1: f64, g2: f64) -> CellResult {
    match try_evaluate(cfg, g1, g2) {
        Ok(cell) => cell,
        Err(e) => {
            let nan = |on: bool| on.then_some(f64::NAN);
            CellResult {
                n_max: None,
                r_mean: nan(cfg.diagnostics.r),
                otoc_deficit: nan(cfg.diagnostics.otoc),
                order_parameter: nan(cfg.diagnostics.order),
                failure: Some(e.to_string()),
            }
        }
    }
}

fn try_evaluate(cfg: &RunConfig, g1: f64, g2: f64) -> Result<CellResult> {
    let params = cfg.model()?.with_couplings(g1, g2);
    let convergence = cfg.convergence();
    let mut cell = CellResult {
        n_max: None,
        r_mean: None,
        otoc_deficit: None,
        order_parameter: None,
        failure: None,
    };
    let widest = |n: usize, cell: &mut CellResult| cell.n_max = Some(cell.n_max.map_or(n, |m| m.max(n)));
    if cfg.diagnostics.r {
        let spec = converge_cutoff(&params, Some(cfg.sector()?), cfg.window.1, &convergence, false)?;
        cell.r_mean = Some(r_statistic(&spec, &cfg.level_window())?.mean);
        widest(spec.n_max(), &mut cell);
    }
    if cfg.diagnostics.otoc {
        let point = otoc_deficit_at(&params, &otoc_options(cfg)?, Execution::Sequential)?;
        cell.otoc_deficit = Some(point.deficit);
        widest(point.n_max, &mut cell);
    }
    if cfg.diagnostics.order {
        cell.order_parameter = Some(order_parameter(&params, &convergence)?);
    }
    Ok(cell)
}

fn fingerprint(cfg: &RunConfig) -> String {
    let text: String = cfg
        .physics_text()
        .lines()
        .filter(|l| !l.starts_with("g1 ") && !l.starts_with("g2 ") && !l.starts_with("levels "))
        .map(|l| format!("{l}\n"))
        .collect();
    format!("{:08x}", crc32fast::hash(text.as_bytes()))
}

fn header_line(cfg: &RunConfig) -> String {
    format!("{CHECKPOINT_MAGIC} {}", fingerprint(cfg))
}

fn encode_float(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{:016x}", v.to_bits()))
}

fn decode_float(s: &str) -> Option<Option<f64>> {
    if s == "-" {
        return Some(None);
    }
    u64::from_str_radix(s, 16).ok().map(|b| Some(f64::from_bits(b)))
}

fn encode_record(i1: usize, i2: usize, cell: &CellResult) -> String {
    let message = cell
        .failure
        .as_deref()
        .map_or_else(|| "-".to_string(), |m| m.replace(['\t', '\n', '\r'], " "));
    let body = format!(
        "{i1}\t{i2}\t{}\t{}\t{}\t{}\t{}\t{message}",
        if cell.failure.is_some() { "failed" } else { "done" },
        cell.n_max.map_or_else(|| "-".into(), |n| n.to_string()),
        encode_float(cell.r_mean),
        encode_float(cell.otoc_deficit),
        encode_float(cell.order_parameter),
    );
    format!("{body}\t{:08x}\n", crc32fast::hash(body.as_bytes()))
}

fn decode_record(line: &str) -> Option<(usize, usize, CellResult)> {
    let (body, crc) = line.rsplit_once('\t')?;
    if u32::from_str_radix(crc, 16).ok()? != crc32fast::hash(body.as_bytes()) {
        return None;
    }
    let f: Vec<&str> = body.split('\t').collect();
    let [i1, i2, status, n_max, r, otoc, order, message] = f[..] else {
        return None;
    };
    let failed = match status {
        "done" => false,
        "failed" => true,
        _ => return None,
    };
    Some((
        i1.parse().ok()?,
        i2.parse().ok()?,
        CellResult {
            n_max: if n_max == "-" { None } else { Some(n_max.parse().ok()?) },
            r_mean: decode_float(r)?,
            otoc_deficit: decode_float(otoc)?,
            order_parameter: decode_float(order)?,
            failure: failed.then(|| message.to_string()),
        },
    ))
}

type Cells = BTreeMap<(usize, usize), CellResult>;

/// Valid records of an existing checkpoint. Corrupt or out-of-range lines
/// are dropped; a foreign header is refused.
fn load_checkpoint(path: &Path, cfg: &RunConfig, shape: (usize, usize)) -> Result<Cells> {
    let text = match fs::read(path) {
        Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Cells::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut lines = text.split_inclusive('\n');
    match lines.next() {
        None => return Ok(Cells::new()),
        // an interrupted header write
        Some(first) if !first.ends_with('\n') && header_line(cfg).starts_with(first) => return Ok(Cells::new()),
        Some(first) if first.trim_end() == header_line(cfg) => {}
        Some(_) => return Err(Error::ResumeMismatch { path: path.to_path_buf() }),
    }
    let mut cells = Cells::new();
    for line in lines {
        let Some(line) = line.strip_suffix('\n') else { continue };
        if let Some((i1, i2, cell)) = decode_record(line) {
            if i1 < shape.0 && i2 < shape.1 {
                cells.entry((i1, i2)).or_insert(cell);
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub exec: Execution,
    /// Stop scheduling new cells after this many have been evaluated in
    /// this run; the final CSV is then not written.
    pub stop_after: Option<usize>,
    pub progress: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            exec: Execution::default(),
            stop_after: None,
            progress: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// The final CSV, absent when the run stopped early.
    pub csv: Option<PathBuf>,
    pub checkpoint: PathBuf,
    pub resumed_cells: usize,
    pub evaluated_cells: usize,
    pub failed_cells: usize,
}

pub fn run_sweep(cfg: &RunConfig, options: &SweepOptions) -> Result<SweepOutcome> {
    cfg.model()?;
    if cfg.diagnostics.otoc || cfg.diagnostics.r {
        cfg.sector()?;
    }
    let t = cfg
        .time
        .single()
        .ok_or_else(|| Error::Config("sweep needs a single time, not a range".into()))?;
    let g1_values = cfg.grid.g1.values();
    let g2_values = cfg.grid.g2.values();
    let shape = (g1_values.len(), g2_values.len());
    let checkpoint = cfg.checkpoint_path();

    let mut cells = if cfg.resume {
        load_checkpoint(&checkpoint, cfg, shape)?
    } else {
        Cells::new()
    };
    let resumed_cells = cells.len();
    let mut text = format!("{}\n", header_line(cfg));
    for (&(i1, i2), cell) in &cells {
        text.push_str(&encode_record(i1, i2, cell));
    }
    write_atomic(&checkpoint, text.as_bytes())?;

    let pending: Vec<(usize, usize)> = (0..shape.0)
        .flat_map(|a| (0..shape.1).map(move |b| (a, b)))
        .filter(|key| !cells.contains_key(key))
        .collect();
    let total = pending.len();
    let writer = Mutex::new(
        OpenOptions::new()
            .append(true)
            .open(&checkpoint)
            .map_err(|e| Error::io(&checkpoint, e))?,
    );
    let started = AtomicUsize::new(0);
    let finished = AtomicUsize::new(0);
    let evaluate = |&(i1, i2): &(usize, usize)| -> Result<Option<CellResult>> {
        if let Some(limit) = options.stop_after {
            if started.fetch_add(1, Ordering::SeqCst) >= limit {
                return Ok(None);
            }
        }
        let cell = evaluate_cell(cfg, g1_values[i1], g2_values[i2]);
        let record = encode_record(i1, i2, &cell);
        {
            let mut file: std::sync::MutexGuard<'_, File> = writer.lock().unwrap_or_else(|p| p.into_inner());
            file.write_all(record.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| Error::io(&checkpoint, e))?;
        }
        let done = finished.fetch_add(1, Ordering::SeqCst) + 1;
        if options.progress {
            eprintln!(
                "sweep: {done}/{total} g1 = {} g2 = {}{}",
                g1_values[i1],
                g2_values[i2],
                cell.failure.as_deref().map_or_else(String::new, |m| format!(" failed: {m}"))
            );
        }
        Ok(Some(cell))
    };
    let results = with_threads(cfg.threads, || options.exec.map(&pending, evaluate));
    let mut evaluated_cells = 0;
    for (key, result) in pending.iter().zip(results) {
        if let Some(cell) = result? {
            cells.insert(*key, cell);
            evaluated_cells += 1;
        }
    }
    let failed_cells = cells.values().filter(|c| c.failure.is_some()).count();
    let mut outcome = SweepOutcome {
        csv: None,
        checkpoint,
        resumed_cells,
        evaluated_cells,
        failed_cells,
    };
    if cells.len() < shape.0 * shape.1 {
        return Ok(outcome);
    }

    let mut report = Report::new("sweep", cfg, &SWEEP_COLUMNS);
    let optional = |on: bool, v: Option<f64>| if on { number(v.unwrap_or(f64::NAN)) } else { String::new() };
    for ((i1, i2), cell) in &cells {
        report.row(vec![
            number(g1_values[*i1]),
            number(g2_values[*i2]),
            number(cfg.j.value()),
            number(cfg.omega),
            number(cfg.omega0),
            number(cfg.beta),
            number(t),
            cell.n_max.map_or_else(|| "nan".into(), |n| n.to_string()),
            optional(cfg.diagnostics.r, cell.r_mean),
            optional(cfg.diagnostics.otoc, cell.otoc_deficit),
            optional(cfg.diagnostics.order, cell.order_parameter),
        ]);
    }
    report.result("cells", cells.len());
    report.result("row_order", "g1-major, g2 ascending within each g1");
    report.result("failed_cells", failed_cells);
    for ((i1, i2), cell) in &cells {
        if let Some(message) = &cell.failure {
            report.result(&format!("failed g1 = {} g2 = {}", g1_values[*i1], g2_values[*i2]), message);
        }
    }
    if let Some(sum) = cfg.model()?.qpt_coupling_sum() {
        report.result("annotation_qpt_line", format!("g1 + g2 = {}", number(sum)));
    }
    report.result("annotation_dicke_line", "g1 = g2");
    report.result(
        "annotation_mask",
        format!("plots may mask sqrt(g1^2 + g2^2) < {}; data rows are unmasked", number(cfg.mask_radius)),
    );
    report.result("n_max_column", "largest cutoff resolved by the requested diagnostics");
    if cfg.diagnostics.otoc {
        report.result("thermal_trace", format!("parity {} sector only", cfg.parity));
    }
    outcome.csv = Some(report.write(&cfg.out)?);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip_bit_exactly() {
        let cell = CellResult {
            n_max: Some(412),
            r_mean: Some(0.1 + 0.2),
            otoc_deficit: None,
            order_parameter: Some(f64::NAN),
            failure: None,
        };
        let line = encode_record(3, 7, &cell);
        let (a, b, back) = decode_record(line.trim_end()).unwrap();
        assert_eq!((a, b), (3, 7));
        assert_eq!(back.r_mean.unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
        assert!(back.order_parameter.unwrap().is_nan());
        assert_eq!(back.otoc_deficit, None);

        let failed = CellResult {
            failure: Some("cutoff\tceiling".into()),
            ..cell
        };
        let (_, _, back) = decode_record(encode_record(0, 0, &failed).trim_end()).unwrap();
        assert_eq!(back.failure.as_deref(), Some("cutoff ceiling"));
    }

    #[test]
    fn corrupt_records_are_rejected() {
        let cell = CellResult {
            n_max: Some(5),
            r_mean: Some(0.5),
            otoc_deficit: None,
            order_parameter: None,
            failure: None,
        };
        let line = encode_record(1, 1, &cell);
        let line = line.trim_end();
        assert!(decode_record(&line[..line.len() - 3]).is_none());
        assert!(decode_record(&line.replacen("1\t1", "1\t2", 1)).is_none());
    }

    #[test]
    fn fingerprint_ignores_plumbing_and_point_couplings() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.threads = Some(7);
        b.g1 = 0.9;
        b.out = PathBuf::from("/elsewhere");
        assert_eq!(fingerprint(&a), fingerprint(&b));
        b.beta = 0.2;
        assert_ne!(fingerprint(&a), fingerprint(&b));
    }
}
