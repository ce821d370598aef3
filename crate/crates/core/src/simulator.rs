//! Ground-truth kinematics and synthetic sensors. Every sensor reads the
//! world's true map; the navigation map is never consulted here.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{embed_visual, FeatureVector, Vocabulary};
use crate::error::Result;
use crate::geometry::{project_onto_segment, Point2, Pose2};
use crate::perception::{GridGeometry, OccupancyGrid};
use crate::scalar::Scalar;
use crate::world_model::{in_view, LandmarkId, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState<T> {
    pub pose: Pose2<T>,
    pub speed: T,
    pub steering: T,
    pub wheelbase: T,
    pub max_steer: T,
}

impl<T: Scalar> VehicleState<T> {
    pub fn at_rest(pose: Pose2<T>, wheelbase: T, max_steer: T) -> Self {
        Self {
            pose,
            speed: T::zero(),
            steering: T::zero(),
            wheelbase,
            max_steer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control<T> {
    pub accel: T,
    pub steer: T,
}

/// Kinematic bicycle model integrated with one explicit Euler step.
pub fn step_kinematics<T: Scalar>(state: &VehicleState<T>, control: Control<T>, dt: T) -> VehicleState<T> {
    assert!(dt > T::zero(), "dt must be positive");
    let steer = control.steer.max(-state.max_steer).min(state.max_steer);
    let v = state.speed;
    let th = state.pose.theta;
    let pose = Pose2::new(
        state.pose.x + v * th.cos() * dt,
        state.pose.y + v * th.sin() * dt,
        th + v / state.wheelbase * steer.tan() * dt,
    );
    VehicleState {
        pose,
        speed: (v + control.accel * dt).max(T::zero()),
        steering: steer,
        ..*state
    }
}

/// Relative motion `prev⁻¹ ⊕ curr`, expressed in the previous vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdometryDelta<T> {
    pub dx: T,
    pub dy: T,
    pub dtheta: T,
}

impl<T: Scalar> OdometryDelta<T> {
    pub fn zero() -> Self {
        Self {
            dx: T::zero(),
            dy: T::zero(),
            dtheta: T::zero(),
        }
    }

    pub fn as_pose(&self) -> Pose2<T> {
        Pose2::new(self.dx, self.dy, self.dtheta)
    }

    pub fn translation(&self) -> T {
        self.dx.hypot(self.dy)
    }

    /// Accumulates a following delta onto this one.
    pub fn then(&self, next: &OdometryDelta<T>) -> Self {
        let p = self.as_pose().compose(&next.as_pose());
        Self {
            dx: p.x,
            dy: p.y,
            dtheta: p.theta,
        }
    }
}

/// Odometry error model. Standard deviations scale with the size of each
/// reported motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct OdometryNoise<T> {
    /// Translation std per meter traveled, applied to both axes.
    pub trans_std_per_meter: T,
    /// Heading std per radian turned.
    pub rot_std_per_radian: T,
    /// Heading std per meter traveled.
    pub rot_std_per_meter: T,
    /// Fractional scale error of reported translation (0.03 = 3% long).
    pub scale_bias: T,
}

impl<T: Scalar> Default for OdometryNoise<T> {
    fn default() -> Self {
        Self {
            trans_std_per_meter: T::c(0.05),
            rot_std_per_radian: T::c(0.05),
            rot_std_per_meter: T::c(0.001),
            scale_bias: T::zero(),
        }
    }
}

impl<T: Scalar> OdometryNoise<T> {
    pub fn noiseless() -> Self {
        Self {
            trans_std_per_meter: T::zero(),
            rot_std_per_radian: T::zero(),
            rot_std_per_meter: T::zero(),
            scale_bias: T::zero(),
        }
    }
}

/// Local occupancy window: `length` along the heading, `width` across.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct GridSpec<T> {
    pub length: T,
    pub width: T,
    pub resolution: T,
}

impl<T: Scalar> Default for GridSpec<T> {
    fn default() -> Self {
        Self {
            length: T::c(30.0),
            width: T::c(15.0),
            resolution: T::c(0.25),
        }
    }
}

impl<T: Scalar> GridSpec<T> {
    pub fn geometry(&self) -> Result<GridGeometry<T>> {
        GridGeometry::centered(self.length, self.width, self.resolution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct SensorRig<T> {
    pub fov: T,
    pub max_range: T,
    pub points_per_landmark: usize,
    pub point_scatter_std: T,
    pub feature_noise_std: T,
    pub odometry: OdometryNoise<T>,
    pub grid: GridSpec<T>,
}

impl<T: Scalar> Default for SensorRig<T> {
    fn default() -> Self {
        Self {
            fov: T::c(90f64.to_radians()),
            max_range: T::c(40.0),
            points_per_landmark: 5,
            point_scatter_std: T::c(0.3),
            feature_noise_std: T::c(0.25),
            odometry: OdometryNoise::default(),
            grid: GridSpec::default(),
        }
    }
}

/// Noisy relative motion between two ground-truth poses.
pub fn sense_odometry<T: Scalar, R: Rng + ?Sized>(
    prev: &Pose2<T>,
    curr: &Pose2<T>,
    noise: &OdometryNoise<T>,
    rng: &mut R,
) -> OdometryDelta<T> {
    let rel = prev.between(curr);
    let dist = rel.x.hypot(rel.y);
    let trans_std = noise.trans_std_per_meter * dist;
    let rot_std = noise.rot_std_per_radian * rel.theta.abs() + noise.rot_std_per_meter * dist;
    let scale = T::one() + noise.scale_bias;
    let mut dx = rel.x * scale;
    let mut dy = rel.y * scale;
    let mut dtheta = rel.theta;
    if trans_std > T::zero() {
        dx += T::sample_normal(rng, T::zero(), trans_std);
        dy += T::sample_normal(rng, T::zero(), trans_std);
    }
    if rot_std > T::zero() {
        dtheta += T::sample_normal(rng, T::zero(), rot_std);
    }
    OdometryDelta {
        dx,
        dy,
        dtheta: crate::geometry::normalize_angle(dtheta),
    }
}

/// A lidar return that projects into the image, carrying the visual feature
/// of the pixel it lands on.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePoint<T> {
    /// Vehicle frame.
    pub position: Point2<T>,
    pub feature: FeatureVector<T>,
    /// Ground truth, for evaluation only.
    pub source_landmark: Option<LandmarkId>,
}

/// Feature points for every physical landmark in view. Scatter offsets are
/// truncated at three standard deviations.
pub fn sense_landmarks<T: Scalar, R: Rng + ?Sized>(
    world: &World<T>,
    state: &VehicleState<T>,
    rig: &SensorRig<T>,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Vec<FeaturePoint<T>>> {
    let pose = &state.pose;
    let mut out = Vec::new();
    let limit = rig.point_scatter_std * T::c(3.0);
    for lm in &world.true_map().landmarks {
        if !in_view(pose, lm.position, rig.fov, rig.max_range) {
            continue;
        }
        for _ in 0..rig.points_per_landmark {
            let mut offset = Point2::zero();
            if rig.point_scatter_std > T::zero() {
                offset = Point2::new(
                    T::sample_normal(rng, T::zero(), rig.point_scatter_std),
                    T::sample_normal(rng, T::zero(), rig.point_scatter_std),
                );
                let n = offset.norm();
                if n > limit {
                    offset = offset * (limit / n);
                }
            }
            let feature = embed_visual(&lm.tag, rig.feature_noise_std.to_f64_lossy(), vocab, rng)?;
            out.push(FeaturePoint {
                position: pose.inverse_transform_point(lm.position + offset),
                feature,
                source_landmark: Some(lm.id),
            });
        }
    }
    Ok(out)
}

/// Bird's-eye road occupancy around the vehicle: a cell is free iff its
/// center lies within half the road width of a true-map centerline.
pub fn sense_road_grid<T: Scalar>(
    world: &World<T>,
    state: &VehicleState<T>,
    rig: &SensorRig<T>,
) -> Result<OccupancyGrid<T>> {
    let geometry = rig.grid.geometry()?;
    let net = &world.true_map().network;
    let center = state.pose.position();
    let reach = rig.grid.length.hypot(rig.grid.width) * T::c(0.5);
    let candidates: Vec<(Point2<T>, Point2<T>, T)> = net
        .edges()
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let (a, b) = net.edge_endpoints(i);
            let half = e.width * T::c(0.5);
            (project_onto_segment(center, a, b).distance <= reach + half).then_some((a, b, half))
        })
        .collect();
    let mut occ = OccupancyGrid::filled(geometry, true);
    if candidates.is_empty() {
        return Ok(occ);
    }
    for j in 0..geometry.height {
        for i in 0..geometry.width {
            let p = state.pose.transform_point(geometry.cell_center(i, j));
            let free = candidates
                .iter()
                .any(|&(a, b, half)| project_onto_segment(p, a, b).distance <= half);
            if free {
                occ.set(i, j, false);
            }
        }
    }
    Ok(occ)
}
