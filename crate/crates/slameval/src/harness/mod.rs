//! Experiment harness: drives a system under test (SUT) through a frame
//! schedule in lockstep, records poses, timings and failures, and orchestrates
//! repeated and lifelong experiments.

mod process;
mod sim;

pub use process::ProcessSut;
pub use sim::{SimModel, SimulatedSut, SimulatedSutConfig};

use std::sync::mpsc;
use std::time::{Duration, Instant};

use crate::alignment::AlignmentMode;
use crate::datasets::{self, ParseMode, SequenceManifest};
use crate::error::{Error, Result};
use crate::geometry::{associate, AssociationPolicy, PoseSE3, Timestamp, Trajectory};
use crate::metrics::{
    self, ate, rpe, AteResult, ContinuousMonitor, CrtMode, CrtResult, MetricSeries, RpeDelta,
    RpeResult,
};

/// Opaque reference to sensor data; the harness never decodes frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRef(pub u64);

#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub time: Timestamp,
    pub reference: FrameRef,
}

/// Strictly increasing frame delivery schedule.
#[derive(Debug, Clone, Default)]
pub struct FrameSchedule {
    frames: Vec<Frame>,
}

impl FrameSchedule {
    pub fn from_times(times: &[Timestamp]) -> Result<Self> {
        let mut frames = Vec::with_capacity(times.len());
        for (i, &t) in times.iter().enumerate() {
            if let Some(prev) = frames.last() {
                let Frame {
                    time: Timestamp(p), ..
                } = prev;
                if t.0 <= *p {
                    return Err(Error::InvalidArgument(format!(
                        "frame timestamps must be strictly increasing ({} after {})",
                        t.0, p
                    )));
                }
            }
            frames.push(Frame {
                time: t,
                reference: FrameRef(i as u64),
            });
        }
        Ok(FrameSchedule { frames })
    }

    /// Schedule covering the ground-truth timestamps themselves.
    pub fn from_trajectory(gt: &Trajectory) -> Self {
        FrameSchedule {
            frames: gt
                .timestamps()
                .enumerate()
                .map(|(i, t)| Frame {
                    time: t,
                    reference: FrameRef(i as u64),
                })
                .collect(),
        }
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Result of processing one frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameResult {
    pub pose: Option<PoseSE3>,
    pub tracking: bool,
}

/// Behavioral contract for a system under test. At most one `process_frame`
/// is in flight per instance; the harness enforces lockstep delivery.
pub trait Sut {
    fn init(&mut self) -> Result<()>;
    fn process_frame(&mut self, frame: &Frame) -> Result<FrameResult>;
    fn shutdown(&mut self);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Completed,
    Crashed { at_frame: usize },
    TimedOut { at_frame: usize },
}

impl ExitStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, ExitStatus::Completed)
    }
}

impl std::fmt::Display for ExitStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExitStatus::Completed => write!(f, "completed"),
            ExitStatus::Crashed { at_frame } => write!(f, "crashed@{at_frame}"),
            ExitStatus::TimedOut { at_frame } => write!(f, "timed_out@{at_frame}"),
        }
    }
}

/// Ordered delivery log; proves the lockstep invariant after the fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarnessEvent {
    Delivered(usize),
    Returned(usize),
}

/// Everything recorded about one experiment run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub estimated: Trajectory,
    pub tracking_events: Vec<(Timestamp, bool)>,
    /// Wall time of each completed `process_frame` call, seconds. Excludes
    /// monitoring and the frame a crash or timeout occurred on.
    pub per_frame_wall_time: Vec<f64>,
    pub exit: ExitStatus,
    pub restarts: usize,
    pub event_log: Vec<HarnessEvent>,
}

impl RunRecord {
    /// Check the event log: frame i+1 may only be delivered after frame i
    /// returned.
    pub fn lockstep_holds(&self) -> bool {
        let mut outstanding: Option<usize> = None;
        for ev in &self.event_log {
            match *ev {
                HarnessEvent::Delivered(i) => {
                    if outstanding.is_some() {
                        return false;
                    }
                    outstanding = Some(i);
                }
                HarnessEvent::Returned(i) => {
                    if outstanding != Some(i) {
                        return false;
                    }
                    outstanding = None;
                }
            }
        }
        true
    }
}

/// Average frame rate over the SUT-side processing time only.
pub fn measure_frame_rate(record: &RunRecord) -> Result<f64> {
    let n = record.per_frame_wall_time.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let total: f64 = record.per_frame_wall_time.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument(
            "total processing time is zero".into(),
        ));
    }
    Ok(n as f64 / total)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub frame_timeout: Duration,
    /// When false, no monitor thread is started and the series is empty.
    pub monitor: bool,
    pub policy: AssociationPolicy,
    pub alignment: AlignmentMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            frame_timeout: Duration::from_secs(30),
            monitor: true,
            policy: AssociationPolicy::default(),
            alignment: AlignmentMode::Se3,
        }
    }
}

/// Deliver the schedule to an initialized SUT in lockstep and stream every
/// returned pose to a continuous monitor running off the delivery path.
pub fn run_experiment(
    sut: &mut dyn Sut,
    schedule: &FrameSchedule,
    gt: &Trajectory,
    config: &ExperimentConfig,
) -> Result<(RunRecord, MetricSeries)> {
    let mut record = RunRecord {
        estimated: Trajectory::new("est"),
        tracking_events: Vec::new(),
        per_frame_wall_time: Vec::new(),
        exit: ExitStatus::Completed,
        restarts: 0,
        event_log: Vec::new(),
    };

    // Pose events flow to the monitor thread over an unbounded channel, so
    // delivery never blocks on monitor progress.
    let (monitor_tx, monitor_handle) = if config.monitor {
        let (tx, rx) = mpsc::channel::<(Timestamp, PoseSE3)>();
        let mut monitor = ContinuousMonitor::new(gt.clone(), config.policy, config.alignment);
        let handle = std::thread::spawn(move || {
            while let Ok((t, p)) = rx.recv() {
                // An out-of-order event here is a harness defect, not a SUT
                // failure; drop it rather than poison the run.
                let _ = monitor.observe(t, p);
            }
            monitor.into_series()
        });
        (Some(tx), Some(handle))
    } else {
        (None, None)
    };

    for (i, frame) in schedule.frames().iter().enumerate() {
        record.event_log.push(HarnessEvent::Delivered(i));
        let start = Instant::now();
        let outcome = sut.process_frame(frame);
        let elapsed = start.elapsed();
        record.event_log.push(HarnessEvent::Returned(i));

        if elapsed >= config.frame_timeout {
            record.exit = ExitStatus::TimedOut { at_frame: i };
            break;
        }
        match outcome {
            Err(_) => {
                record.exit = ExitStatus::Crashed { at_frame: i };
                break;
            }
            Ok(result) => {
                record.per_frame_wall_time.push(elapsed.as_secs_f64());
                record.tracking_events.push((frame.time, result.tracking));
                if let Some(pose) = result.pose {
                    record.estimated.push(frame.time, pose)?;
                    if let Some(tx) = &monitor_tx {
                        let _ = tx.send((frame.time, pose));
                    }
                }
            }
        }
    }

    drop(monitor_tx);
    let series = match monitor_handle {
        Some(h) => h
            .join()
            .map_err(|_| Error::Protocol("monitor thread panicked".into()))?,
        None => MetricSeries::default(),
    };
    Ok((record, series))
}

/// Per-run metric summary computed after the fact from a run record.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub ate: Option<AteResult>,
    pub rpe: Option<RpeResult>,
    pub crt: Option<CrtResult>,
    pub normalized_ate: Option<f64>,
    pub frame_rate: Option<f64>,
}

/// Evaluate a finished run against ground truth. CRT is computed over the
/// full frame schedule: frames without a matched pose count as untracked.
pub fn summarize_run(
    record: &RunRecord,
    schedule: &FrameSchedule,
    gt: &Trajectory,
    config: &ExperimentConfig,
    rpe_delta: RpeDelta,
    crt_threshold: Option<f64>,
    crt_mode: CrtMode,
) -> Result<RunMetrics> {
    let matched = associate(&record.estimated, gt, &config.policy);
    let ate_result = ate(&matched, config.alignment).ok();
    let rpe_result = rpe(&matched, rpe_delta).ok();

    let normalized_ate = match &ate_result {
        Some(a) => Some(metrics::normalized_ate_rmse(a.rmse, gt.metric_length()?)?),
        None => None,
    };

    let crt_result = match (crt_threshold, &ate_result) {
        (Some(threshold), Some(a)) => {
            let mut errors = Vec::with_capacity(schedule.len());
            let mut tracked = Vec::with_capacity(schedule.len());
            let by_time: std::collections::HashMap<u64, f64> = a
                .per_pose_errors
                .iter()
                .map(|(t, e)| (t.0.to_bits(), *e))
                .collect();
            let tracking: std::collections::HashMap<u64, bool> = record
                .tracking_events
                .iter()
                .map(|(t, f)| (t.0.to_bits(), *f))
                .collect();
            for frame in schedule.frames() {
                let key = frame.time.0.to_bits();
                match by_time.get(&key) {
                    Some(e) if tracking.get(&key).copied().unwrap_or(false) => {
                        errors.push((frame.time, *e));
                        tracked.push(true);
                    }
                    _ => {
                        errors.push((frame.time, f64::INFINITY));
                        tracked.push(false);
                    }
                }
            }
            metrics::crt(&errors, &tracked, threshold, crt_mode).ok()
        }
        _ => None,
    };

    Ok(RunMetrics {
        ate: ate_result,
        rpe: rpe_result,
        crt: crt_result,
        normalized_ate,
        frame_rate: measure_frame_rate(record).ok(),
    })
}

#[derive(Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub series: MetricSeries,
    pub metrics: RunMetrics,
}

#[derive(Debug)]
pub struct RepeatedOutcome {
    pub runs: Vec<RunOutcome>,
    /// Median normalized ATE-RMSE over completed runs; `None` when every run
    /// crashed or timed out.
    pub aggregate_normalized_ate: Option<f64>,
    pub crash_count: usize,
    pub crash_rate: f64,
}

/// Run n independent experiments with fresh SUT instances.
pub fn run_repeated(
    mut sut_factory: impl FnMut(usize) -> Box<dyn Sut>,
    schedule: &FrameSchedule,
    gt: &Trajectory,
    n: usize,
    config: &ExperimentConfig,
    rpe_delta: RpeDelta,
    crt_threshold: Option<f64>,
) -> Result<RepeatedOutcome> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "repetition count must be >= 1".into(),
        ));
    }
    let mut runs = Vec::with_capacity(n);
    for run_idx in 0..n {
        let mut sut = sut_factory(run_idx);
        sut.init()?;
        let (record, series) = run_experiment(sut.as_mut(), schedule, gt, config)?;
        sut.shutdown();
        let metrics = summarize_run(
            &record,
            schedule,
            gt,
            config,
            rpe_delta,
            crt_threshold,
            CrtMode::FrameCount,
        )?;
        runs.push(RunOutcome {
            record,
            series,
            metrics,
        });
    }

    let crash_count = runs
        .iter()
        .filter(|r| !r.record.exit.is_completed())
        .count();
    let completed: Vec<f64> = runs
        .iter()
        .filter(|r| r.record.exit.is_completed())
        .filter_map(|r| r.metrics.normalized_ate)
        .collect();
    let aggregate = metrics::aggregate_runs(&completed).ok();

    Ok(RepeatedOutcome {
        runs,
        aggregate_normalized_ate: aggregate,
        crash_count,
        crash_rate: crash_count as f64 / n as f64,
    })
}

#[derive(Debug)]
pub struct SequenceOutcome {
    pub id: String,
    pub crt_threshold: f64,
    pub record: RunRecord,
    pub series: MetricSeries,
    pub metrics: RunMetrics,
}

#[derive(Debug)]
pub struct LifelongOutcome {
    pub sequences: Vec<SequenceOutcome>,
    pub restarts: usize,
}

#[derive(Debug, Clone)]
pub struct LifelongOptions {
    /// When true, a fresh SUT instance is created for every sequence instead
    /// of persisting state across the session.
    pub reset_between: bool,
    pub config: ExperimentConfig,
    pub rpe_delta: RpeDelta,
    pub crt_mode: CrtMode,
}

impl Default for LifelongOptions {
    fn default() -> Self {
        LifelongOptions {
            reset_between: false,
            config: ExperimentConfig::default(),
            rpe_delta: RpeDelta::default(),
            crt_mode: CrtMode::FrameCount,
        }
    }
}

/// Feed the manifest's sequences to the SUT in order. A crash mid-sequence
/// leaves the remaining frames untracked; the SUT is restarted (restart
/// counted) and the session continues with the next sequence.
pub fn run_lifelong(
    mut sut_factory: impl FnMut() -> Box<dyn Sut>,
    manifest: &SequenceManifest,
    opts: &LifelongOptions,
) -> Result<LifelongOutcome> {
    let mut outcomes = Vec::new();
    let mut restarts = 0usize;
    let mut sut: Option<Box<dyn Sut>> = None;

    for entry in &manifest.sequences {
        let gt_path = manifest.resolve(&entry.gt_path);
        let gt = datasets::parse_tum_trajectory(
            std::io::BufReader::new(std::fs::File::open(&gt_path)?),
            ParseMode::Strict,
        )?
        .trajectory;
        let frames_path = manifest.resolve(&entry.frames_path);
        let times = datasets::parse_frame_times(std::io::BufReader::new(std::fs::File::open(
            &frames_path,
        )?))?;
        let schedule = FrameSchedule::from_times(&times)?;

        if opts.reset_between {
            if let Some(mut old) = sut.take() {
                old.shutdown();
            }
        }
        if sut.is_none() {
            let mut fresh = sut_factory();
            fresh.init()?;
            sut = Some(fresh);
        }
        let active = sut.as_mut().unwrap();

        let (mut record, series) = run_experiment(active.as_mut(), &schedule, &gt, &opts.config)?;

        if !record.exit.is_completed() {
            // Remaining frames of the crashed sequence count as untracked.
            let delivered = record.tracking_events.len();
            for frame in &schedule.frames()[delivered..] {
                record.tracking_events.push((frame.time, false));
            }
            if let Some(mut dead) = sut.take() {
                dead.shutdown();
            }
            restarts += 1;
        }

        let metrics = summarize_run(
            &record,
            &schedule,
            &gt,
            &opts.config,
            opts.rpe_delta,
            entry.crt_threshold,
            opts.crt_mode,
        )?;
        outcomes.push(SequenceOutcome {
            id: entry.id.clone(),
            crt_threshold: entry.crt_threshold.unwrap_or(f64::NAN),
            record,
            series,
            metrics,
        });
    }

    if let Some(mut s) = sut.take() {
        s.shutdown();
    }
    Ok(LifelongOutcome {
        sequences: outcomes,
        restarts,
    })
}
