//! Rigid-body poses, stamped trajectories, timestamp association and
//! interpolation. Everything downstream (alignment, metrics, harness)
//! consumes these types.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Seconds since the sequence epoch.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Timestamp(pub f64);

impl Timestamp {
    pub fn seconds(&self) -> f64 {
        self.0
    }
}

/// An element of SE(3): unit-quaternion rotation plus translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3 {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl PoseSE3 {
    pub fn identity() -> Self {
        PoseSE3 {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Build from translation components and quaternion in (qx, qy, qz, qw)
    /// storage order. The quaternion is normalized; returns the deviation of
    /// the input norm from 1 so callers can warn on sloppy data.
    pub fn from_parts(t: [f64; 3], q_xyzw: [f64; 4]) -> Result<(Self, f64)> {
        let [qx, qy, qz, qw] = q_xyzw;
        for v in t.iter().chain(q_xyzw.iter()) {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite pose component {v}"
                )));
            }
        }
        let raw = Quaternion::new(qw, qx, qy, qz);
        let norm = raw.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidArgument("zero-norm quaternion".into()));
        }
        let pose = PoseSE3 {
            rotation: UnitQuaternion::from_quaternion(raw),
            translation: Vector3::new(t[0], t[1], t[2]),
        };
        Ok((pose, (norm - 1.0).abs()))
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        PoseSE3 {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Quaternion components in (qx, qy, qz, qw) storage order.
    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    /// Group composition a·b, rotation renormalized.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        let rotation =
            UnitQuaternion::from_quaternion((self.rotation * other.rotation).into_inner());
        PoseSE3 {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> PoseSE3 {
        let inv_rot = self.rotation.inverse();
        PoseSE3 {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    /// Rotation angle in radians, in [0, pi].
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }
}

/// Time-ordered sequence of stamped poses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    samples: Vec<(Timestamp, PoseSE3)>,
    pub frame_id: String,
}

impl Trajectory {
    pub fn new(frame_id: impl Into<String>) -> Self {
        Trajectory {
            samples: Vec::new(),
            frame_id: frame_id.into(),
        }
    }

    pub fn from_samples(
        frame_id: impl Into<String>,
        samples: Vec<(Timestamp, PoseSE3)>,
    ) -> Result<Self> {
        let mut traj = Trajectory::new(frame_id);
        for (t, p) in samples {
            traj.push(t, p)?;
        }
        Ok(traj)
    }

    /// Append a sample; timestamps must be strictly increasing.
    pub fn push(&mut self, t: Timestamp, pose: PoseSE3) -> Result<()> {
        if !t.0.is_finite() || t.0 < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "timestamp {} must be finite and non-negative",
                t.0
            )));
        }
        if let Some((last, _)) = self.samples.last() {
            if t.0 <= last.0 {
                return Err(Error::Format(format!(
                    "non-monotonic timestamp {} after {}",
                    t.0, last.0
                )));
            }
        }
        self.samples.push((t, pose));
        Ok(())
    }

    pub fn samples(&self) -> &[(Timestamp, PoseSE3)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = Timestamp> + '_ {
        self.samples.iter().map(|(t, _)| *t)
    }

    pub fn translations(&self) -> Vec<Vector3<f64>> {
        self.samples.iter().map(|(_, p)| p.translation).collect()
    }

    /// Pose at time t by linear interpolation of translation and slerp of
    /// rotation between the bracketing samples.
    pub fn interpolate_pose(&self, t: Timestamp) -> Result<PoseSE3> {
        let first = self
            .samples
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?
            .0;
        let last = self.samples.last().unwrap().0;
        if t.0 < first.0 || t.0 > last.0 {
            return Err(Error::OutOfRange {
                t: t.0,
                first: first.0,
                last: last.0,
            });
        }
        let idx = self.samples.partition_point(|(ts, _)| ts.0 < t.0);
        if idx < self.samples.len() && self.samples[idx].0 .0 == t.0 {
            return Ok(self.samples[idx].1);
        }
        let (t0, p0) = self.samples[idx - 1];
        let (t1, p1) = self.samples[idx];
        let alpha = (t.0 - t0.0) / (t1.0 - t0.0);
        let translation = p0.translation.lerp(&p1.translation, alpha);
        let rotation = p0
            .rotation
            .try_slerp(&p1.rotation, alpha, 1e-9)
            .unwrap_or(if alpha < 0.5 {
                p0.rotation
            } else {
                p1.rotation
            });
        Ok(PoseSE3 {
            rotation,
            translation,
        })
    }

    /// Nearest sample in time.
    pub fn nearest_pose(&self, t: Timestamp) -> Option<(Timestamp, PoseSE3)> {
        if self.samples.is_empty() {
            return None;
        }
        let idx = self.samples.partition_point(|(ts, _)| ts.0 < t.0);
        let mut best = None;
        for cand in [idx.wrapping_sub(1), idx] {
            if let Some(&(ts, p)) = self.samples.get(cand) {
                let d = (ts.0 - t.0).abs();
                match best {
                    None => best = Some((d, ts, p)),
                    Some((bd, _, _)) if d < bd => best = Some((d, ts, p)),
                    _ => {}
                }
            }
        }
        best.map(|(_, ts, p)| (ts, p))
    }

    /// Metric length: sum of Euclidean distances between consecutive
    /// translations.
    pub fn metric_length(&self) -> Result<f64> {
        if self.samples.is_empty() {
            return Err(Error::InvalidArgument(
                "trajectory length undefined for empty trajectory".into(),
            ));
        }
        Ok(self
            .samples
            .windows(2)
            .map(|w| (w[1].1.translation - w[0].1.translation).norm())
            .sum())
    }

    /// Apply a rigid/similarity transform to every pose:
    /// translation -> s·R·x + t, rotation -> R·q. Timestamps unchanged.
    pub fn transformed(
        &self,
        rotation: &UnitQuaternion<f64>,
        translation: &Vector3<f64>,
        scale: f64,
    ) -> Trajectory {
        Trajectory {
            frame_id: self.frame_id.clone(),
            samples: self
                .samples
                .iter()
                .map(|(t, p)| {
                    (
                        *t,
                        PoseSE3 {
                            rotation: rotation * p.rotation,
                            translation: scale * (rotation * p.translation) + translation,
                        },
                    )
                })
                .collect(),
        }
    }
}

/// How estimate timestamps are matched to ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssociationMethod {
    /// Match each estimate to the nearest-in-time ground-truth sample,
    /// one-to-one.
    Nearest,
    /// Interpolate ground truth at each estimate timestamp.
    Interpolate,
}

#[derive(Debug, Clone, Copy)]
pub struct AssociationPolicy {
    pub max_time_diff: f64,
    pub method: AssociationMethod,
}

impl Default for AssociationPolicy {
    fn default() -> Self {
        AssociationPolicy {
            max_time_diff: 0.02,
            method: AssociationMethod::Nearest,
        }
    }
}

/// One matched (estimate, ground-truth) pose pair.
#[derive(Debug, Clone, Copy)]
pub struct MatchedPair {
    pub time: Timestamp,
    pub estimate: PoseSE3,
    pub ground_truth: PoseSE3,
}

#[derive(Debug, Clone, Default)]
pub struct MatchedPairs {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_est: usize,
    pub unmatched_gt: usize,
}

impl MatchedPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn estimate_translations(&self) -> Vec<Vector3<f64>> {
        self.pairs.iter().map(|p| p.estimate.translation).collect()
    }

    pub fn ground_truth_translations(&self) -> Vec<Vector3<f64>> {
        self.pairs
            .iter()
            .map(|p| p.ground_truth.translation)
            .collect()
    }
}

/// Match estimate samples to ground truth under the given policy.
///
/// Nearest mode is greedy on time distance with one-to-one ground-truth
/// usage; ties resolve to the earlier ground-truth sample. Interpolate mode
/// evaluates ground truth at each estimate timestamp when the bracketing gap
/// is within the tolerance.
pub fn associate(est: &Trajectory, gt: &Trajectory, policy: &AssociationPolicy) -> MatchedPairs {
    match policy.method {
        AssociationMethod::Nearest => associate_nearest(est, gt, policy.max_time_diff),
        AssociationMethod::Interpolate => associate_interpolated(est, gt, policy.max_time_diff),
    }
}

fn associate_nearest(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> MatchedPairs {
    // Slack for time differences computed from rounded decimal stamps.
    let limit = max_dt + 1e-12;
    // All candidate pairs within tolerance, cheapest time distance first.
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    let gt_samples = gt.samples();
    for (i, (te, _)) in est.samples().iter().enumerate() {
        let idx = gt_samples.partition_point(|(tg, _)| tg.0 < te.0);
        let lo = idx.saturating_sub(2);
        let hi = (idx + 2).min(gt_samples.len());
        for (j, (tg, _)) in gt_samples[lo..hi].iter().enumerate() {
            let d = (tg.0 - te.0).abs();
            if d <= limit {
                candidates.push((d, i, lo + j));
            }
        }
    }
    // Ties on distance go to the earlier ground-truth sample.
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.2.cmp(&b.2))
            .then(a.1.cmp(&b.1))
    });

    let mut est_used = vec![false; est.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut matches: Vec<(usize, usize)> = Vec::new();
    for (_, i, j) in candidates {
        if !est_used[i] && !gt_used[j] {
            est_used[i] = true;
            gt_used[j] = true;
            matches.push((i, j));
        }
    }
    matches.sort_by_key(|&(i, _)| i);

    let pairs = matches
        .iter()
        .map(|&(i, j)| {
            let (te, pe) = est.samples()[i];
            let (_, pg) = gt_samples[j];
            MatchedPair {
                time: te,
                estimate: pe,
                ground_truth: pg,
            }
        })
        .collect::<Vec<_>>();
    MatchedPairs {
        unmatched_est: est.len() - pairs.len(),
        unmatched_gt: gt.len() - pairs.len(),
        pairs,
    }
}

fn associate_interpolated(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> MatchedPairs {
    let mut pairs = Vec::new();
    let gt_samples = gt.samples();
    for &(te, pe) in est.samples() {
        let Some((tn, _)) = gt.nearest_pose(te) else {
            continue;
        };
        if (tn.0 - te.0).abs() > max_dt + 1e-12 {
            continue;
        }
        let pg = if let Ok(p) = gt.interpolate_pose(te) {
            p
        } else {
            // Outside the ground-truth span but within tolerance of an
            // endpoint; fall back to the nearest sample.
            gt.nearest_pose(te).unwrap().1
        };
        pairs.push(MatchedPair {
            time: te,
            estimate: pe,
            ground_truth: pg,
        });
    }
    let matched_gt: usize = pairs.len().min(gt_samples.len());
    MatchedPairs {
        unmatched_est: est.len() - pairs.len(),
        unmatched_gt: gt_samples.len() - matched_gt,
        pairs,
    }
}
