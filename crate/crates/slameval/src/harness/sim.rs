//! Synthetic SUTs for desk-scale verification. Each simulator reads only the
//! ground-truth trajectory and the frame timestamps; frames stay opaque.

use std::time::Duration;

use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{PoseSE3, Trajectory};

use super::{Frame, FrameResult, Sut};

/// Failure/noise model of a simulated SUT.
#[derive(Debug, Clone)]
pub enum SimModel {
    /// Echo ground truth at each scheduled timestamp.
    Perfect,
    /// Accumulate `rate` meters per frame along `axis` on top of ground truth.
    Drift { rate: f64, axis: Vector3<f64> },
    /// Report lost tracking while the frame time is inside any interval.
    TrackingLoss { intervals: Vec<(f64, f64)> },
    /// Gaussian position noise of the given sigma inside the windows,
    /// ground truth outside.
    PerturbationSensitive {
        windows: Vec<(f64, f64)>,
        sigma: f64,
    },
    /// Segfault-style hard crash at a frame index, with the given per-run
    /// probability.
    CrashAt { frame: usize, probability: f64 },
}

impl SimModel {
    /// Names and spec strings understood by `parse`, for `slameval simulate`.
    pub fn descriptions() -> &'static [(&'static str, &'static str)] {
        &[
            ("perfect", "echo ground truth exactly"),
            (
                "drift:RATE[:AXIS]",
                "add RATE m/frame drift along AXIS (x|y|z, default x)",
            ),
            (
                "tracking-loss:START-END[,START-END...]",
                "report lost tracking inside the given time intervals",
            ),
            (
                "perturb:SIGMA:START-END[,START-END...]",
                "Gaussian position noise of SIGMA meters inside the windows",
            ),
            (
                "crash:FRAME[:PROB]",
                "hard crash at FRAME with per-run probability PROB (default 1.0)",
            ),
            ("sleep:MILLIS", "perfect model with a fixed per-frame delay"),
        ]
    }

    /// Parse a CLI simulator spec like `drift:0.01:x` or `crash:50:0.1`.
    pub fn parse(spec: &str) -> Result<(SimModel, Option<Duration>)> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = |msg: &str| Error::Config(format!("simulator spec {spec:?}: {msg}"));
        let model = match parts[0] {
            "perfect" => (SimModel::Perfect, None),
            "sleep" => {
                let ms: f64 = parts
                    .get(1)
                    .ok_or_else(|| bad("missing delay"))?
                    .parse()
                    .map_err(|_| bad("bad delay"))?;
                (
                    SimModel::Perfect,
                    Some(Duration::from_secs_f64(ms / 1000.0)),
                )
            }
            "drift" => {
                let rate: f64 = parts
                    .get(1)
                    .ok_or_else(|| bad("missing rate"))?
                    .parse()
                    .map_err(|_| bad("bad rate"))?;
                let axis = match parts.get(2).copied().unwrap_or("x") {
                    "x" => Vector3::x(),
                    "y" => Vector3::y(),
                    "z" => Vector3::z(),
                    other => return Err(bad(&format!("unknown axis {other:?}"))),
                };
                (SimModel::Drift { rate, axis }, None)
            }
            "tracking-loss" => {
                let intervals = parse_intervals(parts.get(1).copied().unwrap_or(""))
                    .ok_or_else(|| bad("bad intervals"))?;
                (SimModel::TrackingLoss { intervals }, None)
            }
            "perturb" => {
                let sigma: f64 = parts
                    .get(1)
                    .ok_or_else(|| bad("missing sigma"))?
                    .parse()
                    .map_err(|_| bad("bad sigma"))?;
                let windows = parse_intervals(parts.get(2).copied().unwrap_or(""))
                    .ok_or_else(|| bad("bad windows"))?;
                (SimModel::PerturbationSensitive { windows, sigma }, None)
            }
            "crash" => {
                let frame: usize = parts
                    .get(1)
                    .ok_or_else(|| bad("missing frame index"))?
                    .parse()
                    .map_err(|_| bad("bad frame index"))?;
                let probability: f64 = match parts.get(2) {
                    Some(p) => p.parse().map_err(|_| bad("bad probability"))?,
                    None => 1.0,
                };
                if !(0.0..=1.0).contains(&probability) {
                    return Err(bad("probability must be in [0, 1]"));
                }
                (SimModel::CrashAt { frame, probability }, None)
            }
            other => return Err(bad(&format!("unknown model {other:?}"))),
        };
        Ok(model)
    }
}

fn parse_intervals(s: &str) -> Option<Vec<(f64, f64)>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',')
        .map(|iv| {
            let (a, b) = iv.split_once('-')?;
            let start: f64 = a.parse().ok()?;
            let end: f64 = b.parse().ok()?;
            (start < end).then_some((start, end))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimulatedSutConfig {
    pub model: SimModel,
    pub seed: u64,
    /// Fixed processing delay per frame, for timing experiments.
    pub frame_delay: Option<Duration>,
}

impl SimulatedSutConfig {
    pub fn new(model: SimModel, seed: u64) -> Self {
        SimulatedSutConfig {
            model,
            seed,
            frame_delay: None,
        }
    }
}

/// In-process simulated SLAM system.
pub struct SimulatedSut {
    config: SimulatedSutConfig,
    gt: Trajectory,
    rng: ChaCha8Rng,
    frames_seen: usize,
    drift: Vector3<f64>,
    crash_armed: bool,
}

impl SimulatedSut {
    pub fn new(config: SimulatedSutConfig, gt: Trajectory) -> Self {
        SimulatedSut {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            gt,
            frames_seen: 0,
            drift: Vector3::zeros(),
            crash_armed: false,
        }
    }

    fn gt_pose_at(&self, frame: &Frame) -> Result<PoseSE3> {
        if let Ok(p) = self.gt.interpolate_pose(frame.time) {
            return Ok(p);
        }
        self.gt
            .nearest_pose(frame.time)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::InvalidArgument("simulator has empty ground truth".into()))
    }
}

impl Sut for SimulatedSut {
    fn init(&mut self) -> Result<()> {
        self.rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        self.frames_seen = 0;
        self.drift = Vector3::zeros();
        // The crash decision is drawn once per run at startup.
        self.crash_armed = match self.config.model {
            SimModel::CrashAt { probability, .. } => self.rng.random::<f64>() < probability,
            _ => false,
        };
        Ok(())
    }

    fn process_frame(&mut self, frame: &Frame) -> Result<FrameResult> {
        if let Some(delay) = self.config.frame_delay {
            std::thread::sleep(delay);
        }
        let index = self.frames_seen;
        self.frames_seen += 1;

        let gt_pose = self.gt_pose_at(frame)?;
        match &self.config.model {
            SimModel::Perfect => Ok(FrameResult {
                pose: Some(gt_pose),
                tracking: true,
            }),
            SimModel::Drift { rate, axis } => {
                self.drift += *rate * axis;
                Ok(FrameResult {
                    pose: Some(PoseSE3 {
                        rotation: gt_pose.rotation,
                        translation: gt_pose.translation + self.drift,
                    }),
                    tracking: true,
                })
            }
            SimModel::TrackingLoss { intervals } => {
                let lost = intervals
                    .iter()
                    .any(|&(a, b)| frame.time.0 >= a && frame.time.0 <= b);
                Ok(FrameResult {
                    pose: (!lost).then_some(gt_pose),
                    tracking: !lost,
                })
            }
            SimModel::PerturbationSensitive { windows, sigma } => {
                let inside = windows
                    .iter()
                    .any(|&(a, b)| frame.time.0 >= a && frame.time.0 <= b);
                let translation = if inside {
                    let normal = Normal::new(0.0, *sigma)
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    gt_pose.translation
                        + Vector3::new(
                            normal.sample(&mut self.rng),
                            normal.sample(&mut self.rng),
                            normal.sample(&mut self.rng),
                        )
                } else {
                    gt_pose.translation
                };
                Ok(FrameResult {
                    pose: Some(PoseSE3 {
                        rotation: gt_pose.rotation,
                        translation,
                    }),
                    tracking: true,
                })
            }
            SimModel::CrashAt { frame: at, .. } => {
                if self.crash_armed && index == *at {
                    return Err(Error::Protocol("simulated segfault".into()));
                }
                Ok(FrameResult {
                    pose: Some(gt_pose),
                    tracking: true,
                })
            }
        }
    }

    fn shutdown(&mut self) {}
}
