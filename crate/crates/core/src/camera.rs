//! Planar orthographic camera observing point features on a rigid object.
//!
//! Poses are `(x, y, angle)` in the world frame. A camera observes the
//! camera-frame coordinates of every feature whose outward normal faces it;
//! the camera looks along its local +x axis.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Rotation2, Vector2};

use crate::error::{Error, Result};
use crate::model::{ControlVector, GaussianNoiseSpec, MeasurementSystem, ParameterVector};

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// `a − b` wrapped into `(−π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// Planar pose with the angle wrapped into `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub angle: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, angle: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && angle.is_finite()) {
            return Err(Error::invalid("pose components must be finite"));
        }
        Ok(Self { x, y, angle: wrap_angle(angle) })
    }

    fn from_slice(v: &[f64]) -> Result<Self> {
        Error::check_dim("pose", 3, v.len())?;
        Self::new(v[0], v[1], v[2])
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.x, self.y, self.angle]
    }

    /// World-from-local transform.
    pub fn transform(&self) -> RigidTransform2 {
        RigidTransform2::new(self.angle, self.translation())
    }
}

pub type ObjectPose = Pose2;
pub type CameraPose = Pose2;

/// `x ↦ R(angle) x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform2 {
    pub rotation: Rotation2<f64>,
    pub translation: Vector2<f64>,
}

impl RigidTransform2 {
    pub fn new(angle: f64, translation: Vector2<f64>) -> Self {
        Self { rotation: Rotation2::new(angle), translation }
    }

    pub fn identity() -> Self {
        Self::new(0.0, Vector2::zeros())
    }

    pub fn angle(&self) -> f64 {
        self.rotation.angle()
    }

    pub fn apply(&self, point: &Vector2<f64>) -> Vector2<f64> {
        self.rotation * point + self.translation
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self { rotation: inv, translation: -(inv * self.translation) }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform2) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Camera-from-object transform.
pub fn object_to_camera(object: &ObjectPose, camera: &CameraPose) -> RigidTransform2 {
    camera.transform().inverse().compose(&object.transform())
}

pub fn camera_to_object(object: &ObjectPose, camera: &CameraPose) -> RigidTransform2 {
    object_to_camera(object, camera).inverse()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub position: Vector2<f64>,
    /// Outward unit normal in the object frame.
    pub normal: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    features: Vec<Feature>,
}

impl FeatureSet {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("feature set is empty"));
        }
        for f in &features {
            if !(f.position.iter().all(|x| x.is_finite())) || (f.normal.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("features need finite positions and unit normals"));
            }
        }
        Ok(Self { features })
    }

    /// Corners of the square `[−1, 1]²`, each with the outward diagonal as normal.
    pub fn square_corners() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let corners = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        Self::new(
            corners
                .iter()
                .map(|&(x, y)| Feature { position: Vector2::new(x, y), normal: Vector2::new(x * s, y * s) })
                .collect(),
        )
        .expect("corner normals are unit length")
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Dot products within this of zero count as grazing.
const GRAZING_TOL: f64 = 1e-12;

/// Whether feature `index` faces the camera. Grazing views are not visible.
pub fn visible(object: &ObjectPose, camera: &CameraPose, index: usize, features: &FeatureSet) -> Result<bool> {
    let f = features
        .features
        .get(index)
        .ok_or_else(|| Error::invalid(format!("feature index {index} out of range")))?;
    let normal_world = Rotation2::new(object.angle) * f.normal;
    let view = Rotation2::new(camera.angle) * Vector2::x();
    Ok(normal_world.dot(&view) < -GRAZING_TOL)
}

fn visible_indices(object: &ObjectPose, camera: &CameraPose, features: &FeatureSet) -> Vec<usize> {
    (0..features.len())
        .filter(|&i| visible(object, camera, i, features).unwrap_or(false))
        .collect()
}

fn project_indices(object: &ObjectPose, camera: &CameraPose, features: &FeatureSet, indices: &[usize]) -> DVector<f64> {
    let t = object_to_camera(object, camera);
    let mut out = DVector::zeros(2 * indices.len());
    for (k, &i) in indices.iter().enumerate() {
        let c = t.apply(&features.features[i].position);
        out[2 * k] = c.x;
        out[2 * k + 1] = c.y;
    }
    out
}

fn jacobian_indices(object: &ObjectPose, camera: &CameraPose, features: &FeatureSet, indices: &[usize]) -> DMatrix<f64> {
    let cam_from_world: Matrix2<f64> = *Rotation2::new(-camera.angle).matrix();
    let world_from_obj: Matrix2<f64> = *Rotation2::new(object.angle).matrix();
    let quarter_turn = Matrix2::new(0.0, -1.0, 1.0, 0.0);
    let mut out = DMatrix::zeros(2 * indices.len(), 3);
    for (k, &i) in indices.iter().enumerate() {
        let d_angle = cam_from_world * world_from_obj * quarter_turn * features.features[i].position;
        out.view_mut((2 * k, 0), (2, 2)).copy_from(&cam_from_world);
        out[(2 * k, 2)] = d_angle.x;
        out[(2 * k + 1, 2)] = d_angle.y;
    }
    out
}

/// Camera-frame coordinates of the visible features, stacked in feature order.
pub fn project_features(object: &ObjectPose, camera: &CameraPose, features: &FeatureSet) -> Result<DVector<f64>> {
    let idx = visible_indices(object, camera, features);
    if idx.is_empty() {
        return Err(Error::Unobservable);
    }
    Ok(project_indices(object, camera, features, &idx))
}

/// Camera measurement system: the parameter is the object pose, the control
/// the camera pose. Which features are observed at a control is decided at
/// the nominal object pose, so the observation length depends only on the
/// control.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraSystem {
    features: FeatureSet,
    nominal: ObjectPose,
    noise_std: f64,
}

impl CameraSystem {
    pub fn new(features: FeatureSet, nominal: ObjectPose, noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(Error::invalid("noise standard deviation must be non-negative"));
        }
        Ok(Self { features, nominal, noise_std })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn nominal(&self) -> &ObjectPose {
        &self.nominal
    }

    fn observed(&self, u: &ControlVector) -> Result<(CameraPose, Vec<usize>)> {
        let camera = Pose2::from_slice(u.as_slice())?;
        Ok((camera, visible_indices(&self.nominal, &camera, &self.features)))
    }
}

impl MeasurementSystem for CameraSystem {
    fn param_dim(&self) -> usize {
        3
    }

    fn control_dim(&self) -> usize {
        3
    }

    fn obs_dim(&self, u: &ControlVector) -> usize {
        self.observed(u).map(|(_, idx)| 2 * idx.len()).unwrap_or(0)
    }

    fn evaluate(&self, u: &ControlVector, p: &ParameterVector) -> Result<DVector<f64>> {
        let (camera, idx) = self.observed(u)?;
        if idx.is_empty() {
            return Err(Error::Unobservable);
        }
        Ok(project_indices(&Pose2::from_slice(p.as_slice())?, &camera, &self.features, &idx))
    }

    fn jacobian(&self, u: &ControlVector, p: &ParameterVector) -> Result<DMatrix<f64>> {
        let (camera, idx) = self.observed(u)?;
        if idx.is_empty() {
            return Err(Error::Unobservable);
        }
        Ok(jacobian_indices(&Pose2::from_slice(p.as_slice())?, &camera, &self.features, &idx))
    }

    fn noise(&self, u: &ControlVector, _p: &ParameterVector) -> Result<GaussianNoiseSpec> {
        GaussianNoiseSpec::isotropic(self.obs_dim(u), self.noise_std * self.noise_std)
    }
}
