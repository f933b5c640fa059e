//! Result documents and plot-ready outputs. Documents are versioned JSON;
//! per-frame series are delimited text so any plotting stack can consume
//! them. All files are written atomically (write to a temp name, then
//! rename).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::WindowSummary;
use crate::error::{Error, Result};
use crate::harness::{RunMetrics, RunRecord};
use crate::metrics::{self, MetricSeries};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub sut: String,
    pub sequence: String,
    pub seed: u64,
    pub repetitions: usize,
}

/// Per-run metric summary as serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_index: usize,
    pub exit: String,
    pub ate_rmse: Option<f64>,
    pub ate_mean: Option<f64>,
    pub ate_median: Option<f64>,
    pub ate_max: Option<f64>,
    pub rpe_trans_rmse: Option<f64>,
    pub rpe_rot_rmse: Option<f64>,
    pub crt: Option<f64>,
    pub normalized_ate: Option<f64>,
    pub frame_rate: Option<f64>,
    #[serde(default)]
    pub series_file: Option<String>,
}

impl RunSummary {
    pub fn from_metrics(run_index: usize, record: &RunRecord, m: &RunMetrics) -> Self {
        RunSummary {
            run_index,
            exit: record.exit.to_string(),
            ate_rmse: m.ate.as_ref().map(|a| a.rmse),
            ate_mean: m.ate.as_ref().map(|a| a.mean),
            ate_median: m.ate.as_ref().map(|a| a.median),
            ate_max: m.ate.as_ref().map(|a| a.max),
            rpe_trans_rmse: m.rpe.as_ref().map(|r| r.trans_rmse),
            rpe_rot_rmse: m.rpe.as_ref().map(|r| r.rot_rmse),
            crt: m.crt.as_ref().map(|c| c.correct_ratio),
            normalized_ate: m.normalized_ate,
            frame_rate: m.frame_rate,
            series_file: None,
        }
    }

    pub fn completed(&self) -> bool {
        self.exit == "completed"
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateSummary {
    /// Median of the normalized ATE-RMSE over completed runs.
    pub median_normalized_ate: Option<f64>,
    pub crash_rate: f64,
}

/// One sequence of a lifelong session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub id: String,
    pub crt_threshold: f64,
    pub exit: String,
    pub ate_rmse: Option<f64>,
    pub rpe_trans_rmse: Option<f64>,
    pub crt: Option<f64>,
    pub normalized_ate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: String,
    pub metadata: ExperimentMetadata,
    pub runs: Vec<RunSummary>,
    pub aggregate: AggregateSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifelong: Option<Vec<SequenceSummary>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_correlation: Option<Vec<WindowSummary>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
}

impl ResultDocument {
    pub fn new(metadata: ExperimentMetadata) -> Self {
        ResultDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            metadata,
            runs: Vec::new(),
            aggregate: AggregateSummary {
                median_normalized_ate: None,
                crash_rate: 0.0,
            },
            lifelong: None,
            window_correlation: None,
            restarts: None,
        }
    }

    /// Recompute the aggregate block from the per-run entries.
    pub fn recompute_aggregate(&mut self) {
        let completed: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.completed())
            .filter_map(|r| r.normalized_ate)
            .collect();
        self.aggregate.median_normalized_ate = metrics::aggregate_runs(&completed).ok();
        let crashes = self.runs.iter().filter(|r| !r.completed()).count();
        self.aggregate.crash_rate = if self.runs.is_empty() {
            0.0
        } else {
            crashes as f64 / self.runs.len() as f64
        };
    }

    /// Self-consistency: the stored aggregate must equal the aggregate
    /// recomputed from the document's own per-run entries.
    pub fn verify_consistency(&self) -> Result<()> {
        let mut copy = self.clone();
        copy.recompute_aggregate();
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
            _ => false,
        };
        if !close(
            copy.aggregate.median_normalized_ate,
            self.aggregate.median_normalized_ate,
        ) || (copy.aggregate.crash_rate - self.aggregate.crash_rate).abs() > 1e-12
        {
            return Err(Error::Format(
                "aggregate block is inconsistent with per-run entries".into(),
            ));
        }
        Ok(())
    }
}

/// Write bytes to `path` atomically: temp file in the same directory, then
/// rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_document(path: &Path, doc: &ResultDocument) -> Result<()> {
    let json = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    write_atomic(path, json.as_bytes())
}

pub fn read_document(path: &Path) -> Result<ResultDocument> {
    let text = std::fs::read_to_string(path)?;
    let doc: ResultDocument = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            expected: SCHEMA_VERSION.to_string(),
            found: doc.schema_version,
        });
    }
    Ok(doc)
}

/// Per-frame time series file: one row per delivered pose estimate with
/// columns `timestamp,ate_so_far,rpe,tracked`. Missing values (before
/// alignment is possible) are empty fields.
pub fn render_series_csv(series: &MetricSeries, record: &RunRecord) -> String {
    let tracked: std::collections::HashMap<u64, bool> = record
        .tracking_events
        .iter()
        .map(|(t, f)| (t.0.to_bits(), *f))
        .collect();
    let mut out = String::from("timestamp,ate_so_far,rpe,tracked\n");
    for e in &series.entries {
        let ate = e
            .ate_rmse_so_far
            .map(|v| format!("{v:.9}"))
            .unwrap_or_default();
        let rpe = e
            .latest_rpe_trans
            .map(|v| format!("{v:.9}"))
            .unwrap_or_default();
        let tr = tracked.get(&e.time.0.to_bits()).copied().unwrap_or(true);
        out.push_str(&format!(
            "{:.9},{},{},{}\n",
            e.time.0,
            ate,
            rpe,
            if tr { 1 } else { 0 }
        ));
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "-".to_string(),
    }
}

/// Text comparison table across documents, ordered by median normalized ATE
/// (documents without one sort last).
pub fn comparison_table(docs: &[ResultDocument]) -> String {
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = docs[a].aggregate.median_normalized_ate;
        let kb = docs[b].aggregate.median_normalized_ate;
        match (ka, kb) {
            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
    });

    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:<20} {:>16} {:>12} {:>10} {:>12}\n",
        "SUT", "sequence", "med_norm_ATE", "crash_rate", "CRT", "FPS"
    ));
    for &i in &order {
        let d = &docs[i];
        let crts: Vec<f64> = d.runs.iter().filter_map(|r| r.crt).collect();
        let crt = metrics::aggregate_runs(&crts).ok();
        let fps: Vec<f64> = d.runs.iter().filter_map(|r| r.frame_rate).collect();
        let fps = metrics::aggregate_runs(&fps).ok();
        out.push_str(&format!(
            "{:<20} {:<20} {:>16} {:>12.3} {:>10} {:>12}\n",
            d.metadata.sut,
            d.metadata.sequence,
            fmt_opt(d.aggregate.median_normalized_ate),
            d.aggregate.crash_rate,
            fmt_opt(crt),
            fmt_opt(fps),
        ));
    }
    out
}

/// Plot-ready CRT bars: one row per document (and per lifelong sequence).
pub fn render_crt_bars(docs: &[ResultDocument]) -> String {
    let mut out = String::from("sut,sequence,crt_threshold,crt\n");
    for d in docs {
        if let Some(seqs) = &d.lifelong {
            for s in seqs {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    d.metadata.sut,
                    s.id,
                    s.crt_threshold,
                    fmt_opt(s.crt)
                ));
            }
        } else {
            let crts: Vec<f64> = d.runs.iter().filter_map(|r| r.crt).collect();
            if let Ok(m) = metrics::aggregate_runs(&crts) {
                out.push_str(&format!(
                    "{},{},,{m:.6}\n",
                    d.metadata.sut, d.metadata.sequence
                ));
            }
        }
    }
    out
}

/// SUT x sequence grid of median frame rates, the shape of a frame-rate
/// summary table.
pub fn frame_rate_table(docs: &[ResultDocument]) -> String {
    let mut suts: Vec<String> = docs.iter().map(|d| d.metadata.sut.clone()).collect();
    suts.sort();
    suts.dedup();
    let mut seqs: Vec<String> = docs.iter().map(|d| d.metadata.sequence.clone()).collect();
    seqs.sort();
    seqs.dedup();

    let mut out = format!("{:<20}", "sequence");
    for sut in &suts {
        out.push_str(&format!(" {sut:>12}"));
    }
    out.push('\n');
    for seq in &seqs {
        out.push_str(&format!("{seq:<20}"));
        for sut in &suts {
            let rates: Vec<f64> = docs
                .iter()
                .filter(|d| &d.metadata.sut == sut && &d.metadata.sequence == seq)
                .flat_map(|d| d.runs.iter().filter_map(|r| r.frame_rate))
                .collect();
            let cell = metrics::aggregate_runs(&rates)
                .map(|v| format!("{v:.1}"))
                .unwrap_or_else(|_| "-".to_string());
            out.push_str(&format!(" {cell:>12}"));
        }
        out.push('\n');
    }
    out
}

/// Concatenated error-over-time plot data from the per-run series files
/// referenced by the documents. Missing files are skipped and reported.
pub fn render_error_over_time(
    docs: &[ResultDocument],
    base_dirs: &[PathBuf],
) -> (String, Vec<String>) {
    let mut out = String::from("sut,sequence,run,timestamp,ate_so_far,rpe,tracked\n");
    let mut missing = Vec::new();
    for (d, base) in docs.iter().zip(base_dirs) {
        for r in &d.runs {
            let Some(file) = &r.series_file else { continue };
            let path = base.join(file);
            match std::fs::read_to_string(&path) {
                Ok(text) => {
                    for line in text.lines().skip(1) {
                        out.push_str(&format!(
                            "{},{},{},{line}\n",
                            d.metadata.sut, d.metadata.sequence, r.run_index
                        ));
                    }
                }
                Err(_) => missing.push(path.display().to_string()),
            }
        }
    }
    (out, missing)
}
