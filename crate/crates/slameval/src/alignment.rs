//! Least-squares registration of matched point sets (Umeyama's closed-form
//! solution), with optional scale estimation.

use nalgebra::{Matrix3, UnitQuaternion, Vector3, SVD};

use crate::error::{Error, Result};
use crate::geometry::Trajectory;

/// Whether alignment solves over SE(3) or Sim(3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignmentMode {
    #[default]
    Se3,
    Sim3,
}

/// A similarity transform x -> s·R·x + t. `scale` is 1.0 in SE(3) mode.
#[derive(Debug, Clone, Copy)]
pub struct Alignment {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Alignment {
    pub fn identity() -> Self {
        Alignment {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// Sum of squared residuals over a matched point set.
    pub fn residual(&self, source: &[Vector3<f64>], target: &[Vector3<f64>]) -> f64 {
        source
            .iter()
            .zip(target)
            .map(|(s, t)| (t - self.apply_point(s)).norm_squared())
            .sum()
    }

    pub fn rotation_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation)
    }
}

/// Solve min_{s,R,t} sum_i ||target_i - (s·R·source_i + t)||^2.
///
/// The rotation comes from the SVD of the centered cross-covariance with the
/// diagonal sign matrix correcting reflections, so det(R) = +1 always. With
/// `AlignmentMode::Se3` the scale is forced to 1.
pub fn umeyama_align(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    mode: AlignmentMode,
) -> Result<Alignment> {
    if source.len() != target.len() {
        return Err(Error::InvalidArgument(format!(
            "point sets differ in length: {} vs {}",
            source.len(),
            target.len()
        )));
    }
    let n = source.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let nf = n as f64;

    let mu_src: Vector3<f64> = source.iter().sum::<Vector3<f64>>() / nf;
    let mu_tgt: Vector3<f64> = target.iter().sum::<Vector3<f64>>() / nf;

    let mut sigma = Matrix3::zeros();
    let mut var_src = 0.0;
    for (s, t) in source.iter().zip(target) {
        let sc = s - mu_src;
        let tc = t - mu_tgt;
        sigma += tc * sc.transpose();
        var_src += sc.norm_squared();
    }
    sigma /= nf;
    var_src /= nf;

    let svd = SVD::new(sigma, true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::DegenerateGeometry("SVD of cross-covariance failed".into()))?;
    let v_t = svd.v_t.unwrap();
    let d = svd.singular_values;

    // Rank < 2 leaves the rotation underdetermined; refuse rather than
    // return a silently wrong answer.
    if d[0] < 1e-15 || d[1] <= 1e-9 * d[0] {
        return Err(Error::DegenerateGeometry(format!(
            "centered covariance has rank < 2 (singular values {:.3e}, {:.3e}, {:.3e})",
            d[0], d[1], d[2]
        )));
    }

    let mut sign = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        sign[(2, 2)] = -1.0;
    }
    let rotation = u * sign * v_t;

    let scale = match mode {
        AlignmentMode::Se3 => 1.0,
        AlignmentMode::Sim3 => {
            if var_src < 1e-15 {
                return Err(Error::DegenerateGeometry(
                    "source points coincident; scale undefined".into(),
                ));
            }
            (d[0] * sign[(0, 0)] + d[1] * sign[(1, 1)] + d[2] * sign[(2, 2)]) / var_src
        }
    };

    let translation = mu_tgt - scale * (rotation * mu_src);
    Ok(Alignment {
        rotation,
        translation,
        scale,
    })
}

/// Map every pose through the alignment: translations get s·R·x + t, rotations
/// are left-multiplied by R. Timestamps are untouched.
pub fn apply_alignment(a: &Alignment, traj: &Trajectory) -> Trajectory {
    traj.transformed(&a.rotation_quaternion(), &a.translation, a.scale)
}
