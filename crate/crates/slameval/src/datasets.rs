//! Dataset-side input formats: TUM trajectory text, EuRoC ground-truth CSV,
//! sequence manifests for lifelong runs, and perturbation-window sidecars.
//!
//! TUM lines are `timestamp tx ty tz qx qy qz qw` (space separated, `#`
//! comments). EuRoC ground truth is a CSV with a header row and columns
//! `timestamp_ns, px, py, pz, qw, qx, qy, qz, ...`; extra columns are
//! ignored. Manifests and window sidecars are TOML; see docs/FORMATS.md for
//! annotated samples.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PoseSE3, Timestamp, Trajectory};
use crate::metrics::MetricSeries;

/// Strict fails on the first malformed row; lenient skips it with a warning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug)]
pub struct ParsedTrajectory {
    pub trajectory: Trajectory,
    pub warnings: Vec<String>,
}

fn parse_fields(line: &str) -> Option<Vec<f64>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields
        .iter()
        .map(|f| f.parse::<f64>().ok())
        .collect::<Option<Vec<f64>>>()
        .filter(|v| v.len() == fields.len())
}

/// Parse a TUM-format trajectory. Quaternions are normalized on load; a norm
/// off by more than 1e-3 produces a warning. Non-monotonic timestamps are
/// rejected, never sorted.
pub fn parse_tum_trajectory(reader: impl BufRead, mode: ParseMode) -> Result<ParsedTrajectory> {
    let mut trajectory = Trajectory::new("tum");
    let mut warnings = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values = match parse_fields(trimmed) {
            Some(v) if v.len() == 8 => v,
            _ => {
                let msg = format!("expected 8 numeric fields, got {:?}", trimmed);
                match mode {
                    ParseMode::Strict => {
                        return Err(Error::Parse {
                            line: lineno,
                            message: msg,
                        })
                    }
                    ParseMode::Lenient => {
                        warnings.push(format!("line {lineno}: skipped ({msg})"));
                        continue;
                    }
                }
            }
        };
        let (pose, norm_dev) = PoseSE3::from_parts(
            [values[1], values[2], values[3]],
            [values[4], values[5], values[6], values[7]],
        )
        .map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if norm_dev > 1e-3 {
            warnings.push(format!(
                "line {lineno}: quaternion norm off by {norm_dev:.2e}, renormalized"
            ));
        }
        trajectory.push(Timestamp(values[0]), pose)?;
    }

    Ok(ParsedTrajectory {
        trajectory,
        warnings,
    })
}

/// Write a trajectory in TUM format with enough digits to round-trip f64.
pub fn serialize_tum_trajectory(traj: &Trajectory, mut w: impl Write) -> Result<()> {
    writeln!(w, "# timestamp tx ty tz qx qy qz qw")?;
    for (t, p) in traj.samples() {
        let q = p.quaternion_xyzw();
        writeln!(
            w,
            "{:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}",
            t.0, p.translation.x, p.translation.y, p.translation.z, q[0], q[1], q[2], q[3]
        )?;
    }
    Ok(())
}

/// Parse EuRoC MAV ground truth CSV. Timestamps are nanoseconds and the
/// quaternion is stored w-first; both are converted on load.
pub fn parse_euroc_groundtruth(reader: impl BufRead, mode: ParseMode) -> Result<ParsedTrajectory> {
    let mut trajectory = Trajectory::new("euroc");
    let mut warnings = Vec::new();
    let mut saw_header = false;
    let mut epoch_ns: Option<f64> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') || (!saw_header && trimmed.chars().any(|c| c.is_alphabetic())) {
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() < 8 {
            return Err(Error::Format(format!(
                "line {lineno}: EuRoC ground truth needs at least 8 columns \
                 (timestamp, position, quaternion), got {}",
                fields.len()
            )));
        }
        let parsed: Option<Vec<f64>> = fields[..8].iter().map(|f| f.parse().ok()).collect();
        let Some(v) = parsed else {
            match mode {
                ParseMode::Strict => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("malformed row {:?}", trimmed),
                    })
                }
                ParseMode::Lenient => {
                    warnings.push(format!("line {lineno}: skipped malformed row"));
                    continue;
                }
            }
        };
        // Timestamps are absolute unix nanoseconds; rebase on the first row
        // so Timestamp stays within f64 precision.
        let epoch = *epoch_ns.get_or_insert(v[0]);
        let t = (v[0] - epoch) / 1e9;
        // Input order is (qw, qx, qy, qz); internal order is (qx, qy, qz, qw).
        let (pose, norm_dev) = PoseSE3::from_parts([v[1], v[2], v[3]], [v[5], v[6], v[7], v[4]])
            .map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
        if norm_dev > 1e-3 {
            warnings.push(format!(
                "line {lineno}: quaternion norm off by {norm_dev:.2e}, renormalized"
            ));
        }
        trajectory.push(Timestamp(t), pose)?;
    }

    Ok(ParsedTrajectory {
        trajectory,
        warnings,
    })
}

/// One sequence of a lifelong manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub id: String,
    pub gt_path: PathBuf,
    pub frames_path: PathBuf,
    pub environment: String,
    #[serde(default)]
    pub crt_threshold: Option<f64>,
    #[serde(default)]
    pub windows_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub sequences: Vec<SequenceEntry>,
    /// environment -> CRT threshold overrides, merged over the built-ins.
    #[serde(default)]
    pub defaults: BTreeMap<String, f64>,
    /// Directory the manifest's relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Default CRT thresholds per indoor environment class.
pub fn builtin_crt_defaults() -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("office".to_string(), 1.0),
        ("home".to_string(), 3.0),
        ("cafe".to_string(), 3.0),
        ("corridor".to_string(), 5.0),
        ("market".to_string(), 5.0),
    ])
}

impl SequenceManifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Load and validate a manifest, filling missing CRT thresholds from the
/// environment defaults.
pub fn load_manifest(path: &Path) -> Result<SequenceManifest> {
    let text = std::fs::read_to_string(path)?;
    let mut manifest: SequenceManifest =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    manifest.base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let mut defaults = builtin_crt_defaults();
    defaults.extend(manifest.defaults.clone());

    let mut seen = std::collections::HashSet::new();
    for entry in &mut manifest.sequences {
        if !seen.insert(entry.id.clone()) {
            return Err(Error::Config(format!(
                "duplicate sequence id {:?}",
                entry.id
            )));
        }
        if entry.crt_threshold.is_none() {
            entry.crt_threshold = defaults.get(&entry.environment).copied();
        }
        match entry.crt_threshold {
            None => {
                return Err(Error::Config(format!(
                    "sequence {:?}: unknown environment {:?} and no explicit crt_threshold",
                    entry.id, entry.environment
                )))
            }
            Some(t) if t <= 0.0 => {
                return Err(Error::Config(format!(
                    "sequence {:?}: crt_threshold must be positive, got {t}",
                    entry.id
                )))
            }
            _ => {}
        }
    }
    Ok(manifest)
}

/// Frame schedule file: one timestamp per line, `#` comments.
pub fn parse_frame_times(reader: impl BufRead) -> Result<Vec<Timestamp>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let t: f64 = trimmed.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            message: format!("expected a timestamp, got {:?}", trimmed),
        })?;
        if let Some(prev) = out.last() {
            let Timestamp(p) = prev;
            if t <= *p {
                return Err(Error::Format(format!(
                    "non-monotonic frame timestamp {t} after {p}"
                )));
            }
        }
        out.push(Timestamp(t));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Illumination,
    Dynamic,
    Blur,
    Other,
}

/// A hand-authored interval during which a perturbation is present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationWindow {
    pub start: f64,
    pub end: f64,
    pub kind: WindowKind,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WindowFile {
    windows: Vec<PerturbationWindow>,
}

pub fn load_windows(path: &Path) -> Result<Vec<PerturbationWindow>> {
    let text = std::fs::read_to_string(path)?;
    let file: WindowFile =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for w in &file.windows {
        if w.start >= w.end {
            return Err(Error::Config(format!(
                "window [{}, {}] must have start < end",
                w.start, w.end
            )));
        }
    }
    Ok(file.windows)
}

/// Error statistics inside one perturbation window versus outside all of them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowSummary {
    pub start: f64,
    pub end: f64,
    pub kind: WindowKind,
    pub in_samples: usize,
    pub in_mean: f64,
    pub in_max: f64,
    pub out_mean: f64,
    /// in_mean / out_mean; `None` when either side has no samples.
    pub ratio: Option<f64>,
}

/// Compare an error series inside each window against the series outside
/// every window. Windows with no overlapping samples are reported with
/// `in_samples = 0` rather than treated as an error.
pub fn correlate_windows(
    samples: &[(Timestamp, f64)],
    windows: &[PerturbationWindow],
) -> Vec<WindowSummary> {
    let outside: Vec<f64> = samples
        .iter()
        .filter(|(t, _)| !windows.iter().any(|w| t.0 >= w.start && t.0 <= w.end))
        .map(|(_, v)| *v)
        .collect();
    let out_mean = if outside.is_empty() {
        0.0
    } else {
        outside.iter().sum::<f64>() / outside.len() as f64
    };

    windows
        .iter()
        .map(|w| {
            let inside: Vec<f64> = samples
                .iter()
                .filter(|(t, _)| t.0 >= w.start && t.0 <= w.end)
                .map(|(_, v)| *v)
                .collect();
            let in_mean = if inside.is_empty() {
                0.0
            } else {
                inside.iter().sum::<f64>() / inside.len() as f64
            };
            let in_max = inside.iter().cloned().fold(0.0, f64::max);
            let ratio = if inside.is_empty() || outside.is_empty() || out_mean == 0.0 {
                None
            } else {
                Some(in_mean / out_mean)
            };
            WindowSummary {
                start: w.start,
                end: w.end,
                kind: w.kind,
                in_samples: inside.len(),
                in_mean,
                in_max,
                out_mean,
                ratio,
            }
        })
        .collect()
}

/// Convenience: correlate on the per-pose RPE channel of a monitor series,
/// the channel that localizes perturbation spikes in time.
pub fn correlate_windows_series(
    series: &MetricSeries,
    windows: &[PerturbationWindow],
) -> Vec<WindowSummary> {
    correlate_windows(&series.rpe_samples(), windows)
}
