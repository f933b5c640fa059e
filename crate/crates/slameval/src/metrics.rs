//! Trajectory accuracy metrics: ATE, RPE, CRT, length normalization,
//! cross-run aggregation, and the continuous per-pose monitoring loop.

use crate::alignment::{umeyama_align, Alignment, AlignmentMode};
use crate::error::{Error, Result};
use crate::geometry::{
    associate, AssociationPolicy, MatchedPair, MatchedPairs, PoseSE3, Timestamp, Trajectory,
};

/// Absolute trajectory error over a matched pair set.
#[derive(Debug, Clone)]
pub struct AteResult {
    pub per_pose_errors: Vec<(Timestamp, f64)>,
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub alignment_used: Alignment,
}

/// Interval over which relative pose error is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RpeDelta {
    Frames(usize),
    Seconds(f64),
}

impl Default for RpeDelta {
    fn default() -> Self {
        RpeDelta::Seconds(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct RpeResult {
    pub per_pair_trans_errors: Vec<(Timestamp, f64)>,
    pub per_pair_rot_errors: Vec<(Timestamp, f64)>,
    pub trans_rmse: f64,
    pub rot_rmse: f64,
    pub delta: RpeDelta,
}

/// How CRT weighs each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrtMode {
    /// Fraction of frames tracked within the threshold.
    #[default]
    FrameCount,
    /// Each frame weighted by the time gap to the next frame; the last frame
    /// gets the mean gap.
    TimeWeighted,
}

#[derive(Debug, Clone)]
pub struct CrtResult {
    pub correct_ratio: f64,
    pub mode: CrtMode,
    pub threshold: f64,
    pub counted_frames: usize,
    pub total_frames: usize,
}

/// One monitoring entry per delivered pose estimate. ATE is over the prefix
/// seen so far and is `None` until three pairs have been matched.
#[derive(Debug, Clone, Copy)]
pub struct MonitorEntry {
    pub time: Timestamp,
    pub ate_rmse_so_far: Option<f64>,
    pub latest_rpe_trans: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct MetricSeries {
    pub entries: Vec<MonitorEntry>,
}

impl MetricSeries {
    pub fn last(&self) -> Option<&MonitorEntry> {
        self.entries.last()
    }

    /// (time, value) samples of the prefix-ATE channel.
    pub fn ate_samples(&self) -> Vec<(Timestamp, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.ate_rmse_so_far.map(|v| (e.time, v)))
            .collect()
    }

    /// (time, value) samples of the per-pose RPE channel.
    pub fn rpe_samples(&self) -> Vec<(Timestamp, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.latest_rpe_trans.map(|v| (e.time, v)))
            .collect()
    }
}

fn rmse(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Absolute trajectory error: align estimate positions onto ground truth with
/// Umeyama's method, then take per-pose translational distances.
pub fn ate(matched: &MatchedPairs, mode: AlignmentMode) -> Result<AteResult> {
    if matched.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: matched.len(),
        });
    }
    let src = matched.estimate_translations();
    let tgt = matched.ground_truth_translations();
    let alignment = umeyama_align(&src, &tgt, mode)?;

    let per_pose_errors: Vec<(Timestamp, f64)> = matched
        .pairs
        .iter()
        .map(|p| {
            (
                p.time,
                (p.ground_truth.translation - alignment.apply_point(&p.estimate.translation))
                    .norm(),
            )
        })
        .collect();

    let errs: Vec<f64> = per_pose_errors.iter().map(|(_, e)| *e).collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let max = errs.iter().cloned().fold(0.0, f64::max);
    let mut sorted = errs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = median_of_sorted(&sorted);

    Ok(AteResult {
        rmse: rmse(errs.iter().cloned()),
        mean,
        median,
        max,
        per_pose_errors,
        alignment_used: alignment,
    })
}

/// Relative-motion error transform for one (i, j) index pair.
fn relative_error(a: &MatchedPair, b: &MatchedPair) -> PoseSE3 {
    let gt_motion = a.ground_truth.inverse().compose(&b.ground_truth);
    let est_motion = a.estimate.inverse().compose(&b.estimate);
    gt_motion.inverse().compose(&est_motion)
}

/// Index pairs (i, j) to evaluate for the given delta.
///
/// For `Seconds(s)`, each i is paired with the j > i whose time offset is
/// closest to s, accepted when within s/2 of the target.
fn rpe_index_pairs(matched: &MatchedPairs, delta: RpeDelta) -> Vec<(usize, usize)> {
    let n = matched.len();
    match delta {
        RpeDelta::Frames(k) => {
            if k == 0 || n <= k {
                return Vec::new();
            }
            (0..n - k).map(|i| (i, i + k)).collect()
        }
        RpeDelta::Seconds(s) => {
            let mut out = Vec::new();
            for i in 0..n {
                let target = matched.pairs[i].time.0 + s;
                let mut best: Option<(f64, usize)> = None;
                for j in i + 1..n {
                    let off = (matched.pairs[j].time.0 - target).abs();
                    match best {
                        None => best = Some((off, j)),
                        Some((b, _)) if off < b => best = Some((off, j)),
                        _ => {}
                    }
                    if matched.pairs[j].time.0 > target {
                        break;
                    }
                }
                if let Some((off, j)) = best {
                    if off <= s * 0.5 {
                        out.push((i, j));
                    }
                }
            }
            out
        }
    }
}

/// Relative pose error over the matched set at the given interval.
pub fn rpe(matched: &MatchedPairs, delta: RpeDelta) -> Result<RpeResult> {
    let index_pairs = rpe_index_pairs(matched, delta);
    if index_pairs.is_empty() {
        return Err(Error::InsufficientData {
            needed: 2,
            got: matched.len(),
        });
    }
    let mut trans = Vec::with_capacity(index_pairs.len());
    let mut rot = Vec::with_capacity(index_pairs.len());
    for (i, j) in index_pairs {
        let e = relative_error(&matched.pairs[i], &matched.pairs[j]);
        let t = matched.pairs[i].time;
        trans.push((t, e.translation.norm()));
        rot.push((t, e.rotation_angle()));
    }
    Ok(RpeResult {
        trans_rmse: rmse(trans.iter().map(|(_, e)| *e)),
        rot_rmse: rmse(rot.iter().map(|(_, e)| *e)),
        per_pair_trans_errors: trans,
        per_pair_rot_errors: rot,
        delta,
    })
}

/// Correct rate of tracking. A frame is correct when it is tracked and its
/// error is within the threshold; untracked frames always count against the
/// ratio.
pub fn crt(
    per_frame_errors: &[(Timestamp, f64)],
    tracked: &[bool],
    threshold: f64,
    mode: CrtMode,
) -> Result<CrtResult> {
    if per_frame_errors.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if per_frame_errors.len() != tracked.len() {
        return Err(Error::InvalidArgument(format!(
            "error list ({}) and tracked flags ({}) differ in length",
            per_frame_errors.len(),
            tracked.len()
        )));
    }
    if threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "CRT threshold must be positive, got {threshold}"
        )));
    }

    let n = per_frame_errors.len();
    let correct: Vec<bool> = per_frame_errors
        .iter()
        .zip(tracked)
        .map(|((_, e), &tr)| tr && *e <= threshold)
        .collect();
    let counted = correct.iter().filter(|&&c| c).count();

    let ratio = match mode {
        CrtMode::FrameCount => counted as f64 / n as f64,
        CrtMode::TimeWeighted => {
            let mut weights = Vec::with_capacity(n);
            for w in per_frame_errors.windows(2) {
                weights.push(w[1].0 .0 - w[0].0 .0);
            }
            // Last frame has no successor; give it the mean gap.
            let mean_gap = if weights.is_empty() {
                1.0
            } else {
                weights.iter().sum::<f64>() / weights.len() as f64
            };
            weights.push(mean_gap);
            let total: f64 = weights.iter().sum();
            let correct_weight: f64 = weights
                .iter()
                .zip(&correct)
                .filter(|(_, &c)| c)
                .map(|(w, _)| *w)
                .sum();
            correct_weight / total
        }
    };

    Ok(CrtResult {
        correct_ratio: ratio,
        mode,
        threshold,
        counted_frames: counted,
        total_frames: n,
    })
}

/// ATE-RMSE divided by the metric length of the sequence.
pub fn normalized_ate_rmse(ate_rmse: f64, length: f64) -> Result<f64> {
    if length <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sequence length must be positive, got {length}"
        )));
    }
    Ok(ate_rmse / length)
}

/// Median across repeated runs; even counts average the two central values.
pub fn aggregate_runs(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(median_of_sorted(&sorted))
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Re-runs association and alignment over the estimate prefix each time a new
/// pose arrives, mirroring batch `ate` exactly.
pub struct ContinuousMonitor {
    gt: Trajectory,
    policy: AssociationPolicy,
    mode: AlignmentMode,
    estimates: Trajectory,
    series: MetricSeries,
}

impl ContinuousMonitor {
    pub fn new(gt: Trajectory, policy: AssociationPolicy, mode: AlignmentMode) -> Self {
        ContinuousMonitor {
            gt,
            policy,
            mode,
            estimates: Trajectory::new("est"),
            series: MetricSeries::default(),
        }
    }

    /// Feed one estimated pose. Events must arrive in timestamp order.
    pub fn observe(&mut self, t: Timestamp, pose: PoseSE3) -> Result<MonitorEntry> {
        if let Some((last, _)) = self.estimates.samples().last() {
            if t.0 <= last.0 {
                return Err(Error::Protocol(format!(
                    "out-of-order pose event at t={} after t={}",
                    t.0, last.0
                )));
            }
        }
        self.estimates.push(t, pose)?;

        let matched = associate(&self.estimates, &self.gt, &self.policy);
        let ate_rmse_so_far = if matched.len() >= 3 {
            ate(&matched, self.mode).ok().map(|r| r.rmse)
        } else {
            None
        };
        let latest_rpe_trans = if matched.len() >= 2 {
            let a = &matched.pairs[matched.len() - 2];
            let b = &matched.pairs[matched.len() - 1];
            Some(relative_error(a, b).translation.norm())
        } else {
            None
        };

        let entry = MonitorEntry {
            time: t,
            ate_rmse_so_far,
            latest_rpe_trans,
        };
        self.series.entries.push(entry);
        Ok(entry)
    }

    pub fn series(&self) -> &MetricSeries {
        &self.series
    }

    pub fn into_series(self) -> MetricSeries {
        self.series
    }
}

/// Drive a monitor over a whole event stream.
pub fn continuous_monitor(
    gt: &Trajectory,
    events: impl IntoIterator<Item = (Timestamp, PoseSE3)>,
    policy: AssociationPolicy,
    mode: AlignmentMode,
) -> Result<MetricSeries> {
    if gt.is_empty() {
        return Err(Error::InvalidArgument("empty ground truth".into()));
    }
    let mut monitor = ContinuousMonitor::new(gt.clone(), policy, mode);
    for (t, p) in events {
        monitor.observe(t, p)?;
    }
    Ok(monitor.into_series())
}
