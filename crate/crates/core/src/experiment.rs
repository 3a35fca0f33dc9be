//! On-disk experiments: single runs writing `series.csv`, `outcome.txt`
//! and snapshots, and amplitude sweeps aggregated into `sweep.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::diagnostics::{flagged_time_fraction, mean_decay_residual, mean_phi, phi_threshold, DiagnosticsRecord};
use crate::dynamics::{run_setup, Classification, OutcomeReport};
use crate::error::{KsError, Result};
use crate::snapshot::write_snapshot;
use crate::spectral::inverse_transform;

pub const SERIES_HEADER: &str =
    "t,mean,l1,l2,linf,min,l2_meanfree,neg_sobolev,phi,low_mode_fraction,tail_fraction,grad_sup";
pub const SWEEP_HEADER: &str = "A,classification,peak_linf,mean_phi,flagged_time_fraction";

pub const SERIES_FILE: &str = "series.csv";
pub const OUTCOME_FILE: &str = "outcome.txt";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const FINAL_SNAPSHOT: &str = "final.ksf";

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), num)
}

pub fn series_row(r: &DiagnosticsRecord) -> String {
    [
        num(r.t),
        num(r.mean),
        num(r.l1),
        num(r.l2),
        num(r.linf),
        num(r.min),
        num(r.l2_meanfree),
        num(r.neg_sobolev),
        opt(r.phi),
        opt(r.low_mode_fraction),
        num(r.tail_fraction),
        num(r.grad_sup),
    ]
    .join(",")
}

/// Summary of a finished experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub report: OutcomeReport,
    pub mean_phi: Option<f64>,
    pub flagged_time_fraction: f64,
    pub phi_threshold: Option<f64>,
    pub mean_decay_residual: Option<f64>,
    pub records: usize,
    /// `(t, max_x ρ)` at every step.
    pub max_trace: Vec<(f64, f64)>,
    pub dir: PathBuf,
}

impl ExperimentSummary {
    fn to_text(&self) -> String {
        let r = &self.report;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("classification", r.classification.to_string());
        kv("t_final", num(r.t_final));
        kv("steps", r.steps.to_string());
        kv("initial_linf", num(r.initial_linf));
        kv("peak_linf", num(r.peak_linf));
        kv("tail_fraction", num(r.tail_fraction));
        kv("max_tail_fraction", num(r.max_tail_fraction));
        kv("resolved_until", opt(r.resolved_until));
        kv("mean_phi", opt(self.mean_phi));
        kv("phi_threshold", opt(self.phi_threshold));
        kv("flagged_time_fraction", num(self.flagged_time_fraction));
        kv("mean_decay_residual", opt(self.mean_decay_residual));
        kv("records", self.records.to_string());
        s
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| KsError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| KsError::io(path, e))
}

/// Runs `config` and writes its artifacts into `config.output.dir`.
pub fn run_experiment(config: &SimConfig) -> Result<ExperimentSummary> {
    let setup = config.setup()?;
    let dir = config.output.dir.clone();
    create_dir(&dir)?;

    let mut csv = String::from(SERIES_HEADER);
    csv.push('\n');
    let mut index = 0usize;
    let snapshots = config.output.snapshots;
    let out = run_setup(&setup, |r, hat| {
        csv.push_str(&series_row(r));
        csv.push('\n');
        if snapshots {
            write_snapshot(&inverse_transform(hat), dir.join(format!("snap_{index:06}.ksf")))?;
        }
        index += 1;
        Ok(())
    })?;
    write_file(&dir.join(SERIES_FILE), &csv)?;
    write_snapshot(&out.final_field, dir.join(FINAL_SNAPSHOT))?;

    let kernel = setup.diag_kernel;
    let threshold = kernel.map(|k| phi_threshold(setup.diag_modes, &k));
    let effective_alpha = if config.disable_dissipation { f64::NAN } else { config.alpha };
    let summary = ExperimentSummary {
        mean_phi: mean_phi(&out.records),
        flagged_time_fraction: threshold.map_or(0.0, |th| flagged_time_fraction(&out.records, th)),
        phi_threshold: threshold,
        mean_decay_residual: mean_decay_residual(&out.records, effective_alpha).ok(),
        records: out.records.len(),
        max_trace: out.max_trace,
        report: out.report,
        dir: dir.clone(),
    };
    write_file(&dir.join(OUTCOME_FILE), &summary.to_text())?;
    Ok(summary)
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub amplitude: f64,
    /// The run outcome, or the error message of a failed child.
    pub outcome: std::result::Result<ExperimentSummary, String>,
}

impl SweepRow {
    pub fn classification(&self) -> Option<Classification> {
        self.outcome.as_ref().ok().map(|s| s.report.classification)
    }

    fn csv(&self) -> String {
        match &self.outcome {
            Ok(s) => format!(
                "{},{},{},{},{}",
                num(self.amplitude),
                s.report.classification,
                num(s.report.peak_linf),
                opt(s.mean_phi),
                num(s.flagged_time_fraction)
            ),
            Err(_) => format!("{},failed,nan,nan,nan", num(self.amplitude)),
        }
    }
}

/// Per-amplitude output directory below `root`.
pub fn sweep_child_dir(root: &Path, amplitude: f64) -> PathBuf {
    root.join(format!("A_{}", num(amplitude)))
}

/// Runs `config` once per amplitude (concurrently) and writes `sweep.csv`,
/// rows sorted by amplitude, into `config.output.dir`. A failing child is
/// recorded in its row and in `error.txt` of its directory.
pub fn sweep_amplitude(config: &SimConfig, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(KsError::param("values", "at least one amplitude is required"));
    }
    if let Some(bad) = values.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
        return Err(KsError::param("values", format!("amplitudes must be finite and >= 0, got {bad}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let root = config.output.dir.clone();
    create_dir(&root)?;

    let rows: Vec<SweepRow> = sorted
        .par_iter()
        .map(|&a| {
            let mut child = config.with_amplitude(a);
            child.output.dir = sweep_child_dir(&root, a);
            let outcome = run_experiment(&child).map_err(|e| {
                log::error!("sweep child A={a} failed: {e}");
                let _ = create_dir(&child.output.dir)
                    .and_then(|_| write_file(&child.output.dir.join("error.txt"), &format!("{e}\n")));
                e.to_string()
            });
            SweepRow { amplitude: a, outcome }
        })
        .collect();

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    write_file(&root.join(SWEEP_FILE), &csv)?;
    Ok(rows)
}

fn parse_cell(s: &str, column: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| KsError::param("csv", format!("column {column}: cannot parse {s:?}")))
}

/// Reads a `series.csv`, insisting on the exact header.
pub fn read_series(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| KsError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SERIES_HEADER => {}
        Some(h) => {
            let expected: Vec<&str> = SERIES_HEADER.split(',').collect();
            let found: Vec<&str> = h.split(',').collect();
            let col = expected
                .iter()
                .zip(found.iter().chain(std::iter::repeat(&"<missing>")))
                .find(|(e, f)| e != f)
                .map_or_else(|| format!("unexpected extra column {:?}", found[expected.len()]), |(e, f)| {
                    format!("expected column {e:?}, found {f:?}")
                });
            return Err(KsError::param("csv", format!("{}: header mismatch: {col}", path.display())));
        }
        None => return Err(KsError::param("csv", format!("{}: empty file", path.display()))),
    }
    let names: Vec<&str> = SERIES_HEADER.split(',').collect();
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != names.len() {
                return Err(KsError::param("csv", format!("row has {} cells, expected {}", cells.len(), names.len())));
            }
            cells.iter().zip(&names).map(|(c, n)| parse_cell(c, n)).collect()
        })
        .collect()
}
