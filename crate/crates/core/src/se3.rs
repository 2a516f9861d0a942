//! Rigid-body transforms and the perception-to-action transform chain.
//!
//! Translations are in millimeters. Angles cross the public API in degrees
//! unless a function name says otherwise; internally everything is radians.

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Orthonormality and determinant tolerance for rotation matrices.
pub const ORTHO_TOL: f64 = 1e-9;

/// An element of SE(3): `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Build from a rotation matrix and translation, rejecting non-rotations.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::Parameter("transform has non-finite entries".into()));
        }
        let drift = orthonormality_drift(&rotation);
        if drift >= ORTHO_TOL {
            return Err(Error::Parameter(format!(
                "rotation is not orthonormal (max |RᵀR − I| = {drift:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() >= ORTHO_TOL {
            return Err(Error::Parameter(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Build from an approximately orthonormal matrix by projecting it onto SO(3).
    pub fn new_projected(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let projected = nearest_rotation(&rotation)
            .ok_or_else(|| Error::Parameter("rotation matrix is singular".into()))?;
        Self::new(projected, translation)
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Rotation3<f64>) -> Self {
        Self {
            rotation: rotation.into_inner(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation by `angle_rad` about `axis` (any nonzero vector) through the origin.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle_rad: f64) -> Self {
        let axis = Unit::new_normalize(*axis);
        Self::from_rotation(Rotation3::from_axis_angle(&axis, angle_rad))
    }

    pub fn rot_x(deg: f64) -> Self {
        Self::from_axis_angle(&Vector3::x(), deg.to_radians())
    }

    pub fn rot_y(deg: f64) -> Self {
        Self::from_axis_angle(&Vector3::y(), deg.to_radians())
    }

    pub fn rot_z(deg: f64) -> Self {
        Self::from_axis_angle(&Vector3::z(), deg.to_radians())
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: q.to_rotation_matrix().into_inner(),
            translation,
        }
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    /// `self · other` as homogeneous transforms.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let rotation = self.rotation * other.rotation;
        let translation = self.rotation * other.translation + self.translation;
        let rotation = if orthonormality_drift(&rotation) > ORTHO_TOL {
            nearest_rotation(&rotation).unwrap_or(rotation)
        } else {
            rotation
        };
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Parameter(format!(
                "homogeneous matrix has bottom row {bottom:?}"
            )));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Rotation as 9 floats, row-major.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn from_row_major(r: &[f64], t: &[f64]) -> Result<Self> {
        if r.len() != 9 || t.len() != 3 {
            return Err(Error::Parameter(format!(
                "expected 9 rotation and 3 translation values, got {} and {}",
                r.len(),
                t.len()
            )));
        }
        Self::new(
            Matrix3::from_row_slice(r),
            Vector3::new(t[0], t[1], t[2]),
        )
    }

    /// Geodesic rotation angle of this transform, in radians within [0, π].
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// True when both invariants (orthonormal, det = +1) hold within [`ORTHO_TOL`].
    pub fn is_valid(&self) -> bool {
        orthonormality_drift(&self.rotation) < ORTHO_TOL
            && (self.rotation.determinant() - 1.0).abs() < ORTHO_TOL
    }

    /// Largest elementwise difference of the homogeneous matrices.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        (self.to_homogeneous() - other.to_homogeneous()).amax()
    }
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

/// `max |RᵀR − I|` over all entries.
pub fn orthonormality_drift(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Polar projection onto SO(3): `U·Vᵀ` from the SVD, with the sign of the
/// last singular direction flipped when needed to keep det = +1.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let svd = m.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    if svd.singular_values.min() <= f64::EPSILON {
        return None;
    }
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        let col = -u.column(2);
        u.set_column(2, &col);
        r = u * v_t;
    }
    Some(r)
}

/// Geodesic angle of a rotation matrix in radians, computed from both the
/// symmetric and antisymmetric parts so it stays accurate near 0 and π.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let cos = (r.trace() - 1.0) / 2.0;
    let skew = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let sin = skew.norm() / 2.0;
    sin.atan2(cos).clamp(0.0, std::f64::consts::PI)
}

/// Ground-truth and estimated object poses in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePair {
    pub gt: RigidTransform,
    pub est: RigidTransform,
}

impl PosePair {
    pub fn exact(gt: RigidTransform) -> Self {
        Self { gt, est: gt }
    }
}

/// Gripper pose in the world implied by the true object pose: `T_w2c · T_c2o^gt · T_o2g`.
pub fn gripper_target_gt(
    t_w2c: &RigidTransform,
    t_c2o_gt: &RigidTransform,
    t_o2g: &RigidTransform,
) -> RigidTransform {
    t_w2c.compose(t_c2o_gt).compose(t_o2g)
}

/// Gripper pose the robot actually commands from an estimated object pose.
pub fn gripper_target_est(
    t_w2c: &RigidTransform,
    t_c2o_est: &RigidTransform,
    t_o2g: &RigidTransform,
) -> RigidTransform {
    t_w2c.compose(t_c2o_est).compose(t_o2g)
}

fn check_sigma(name: &str, sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!(
            "{name} must be a finite value ≥ 0, got {sigma}"
        )));
    }
    Ok(())
}

/// Synthesize an estimated pose around `t`.
///
/// The translation offset is isotropic Gaussian with per-axis deviation
/// `sigma_t_mm`. The rotation offset has an axis uniform on the sphere and an
/// angle `|N(0, sigma_r_deg)|`, applied about the object origin in the
/// parent frame (so it does not move the object's origin).
pub fn perturb_pose(
    t: &RigidTransform,
    sigma_t_mm: f64,
    sigma_r_deg: f64,
    seed: u64,
) -> Result<RigidTransform> {
    check_sigma("sigma_t_mm", sigma_t_mm)?;
    check_sigma("sigma_r_deg", sigma_r_deg)?;
    if sigma_t_mm == 0.0 && sigma_r_deg == 0.0 {
        return Ok(*t);
    }
    let mut rng = seed::rng(seed);
    let mut out = *t;
    if sigma_t_mm > 0.0 {
        let normal = Normal::new(0.0, sigma_t_mm).expect("validated sigma");
        let offset = Vector3::new(
            normal.sample(&mut rng),
            normal.sample(&mut rng),
            normal.sample(&mut rng),
        );
        out.translation += offset;
    }
    if sigma_r_deg > 0.0 {
        let axis: [f64; 3] = UnitSphere.sample(&mut rng);
        let normal = Normal::new(0.0, sigma_r_deg).expect("validated sigma");
        let angle = normal.sample(&mut rng).abs().to_radians();
        let offset = RigidTransform::from_axis_angle(&Vector3::from(axis), angle);
        out.rotation = offset.rotation * t.rotation;
    }
    Ok(out)
}

/// Rotate `t` about a fixed axis of its own (object) frame by a signed angle
/// drawn from `N(0, sigma_r_deg)`.
pub fn perturb_about_axis(
    t: &RigidTransform,
    axis: &Vector3<f64>,
    sigma_r_deg: f64,
    seed: u64,
) -> Result<RigidTransform> {
    check_sigma("sigma_r_deg", sigma_r_deg)?;
    if axis.norm() < 1e-12 {
        return Err(Error::Parameter("rotation axis must be nonzero".into()));
    }
    if sigma_r_deg == 0.0 {
        return Ok(*t);
    }
    let mut rng = seed::rng(seed);
    let angle: f64 = rng.sample::<f64, _>(Normal::new(0.0, sigma_r_deg).expect("validated"));
    Ok(t.compose(&RigidTransform::from_axis_angle(axis, angle.to_radians())))
}

/// JSON form `{"R": [9 floats row-major], "t": [3 floats, mm]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PoseJson {
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    pub t: Vec<f64>,
}

impl From<&RigidTransform> for PoseJson {
    fn from(t: &RigidTransform) -> Self {
        PoseJson {
            r: t.rotation_row_major().to_vec(),
            t: t.translation.iter().copied().collect(),
        }
    }
}

impl TryFrom<&PoseJson> for RigidTransform {
    type Error = Error;

    fn try_from(p: &PoseJson) -> Result<Self> {
        RigidTransform::from_row_major(&p.r, &p.t)
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = PoseJson::deserialize(d)?;
        RigidTransform::try_from(&p).map_err(serde::de::Error::custom)
    }
}
