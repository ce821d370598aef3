//! Monte Carlo localization against a language-augmented topometric map.
//!
//! Each particle is scored by matching the map landmarks it should be able to
//! see against the observed feature points (best cosine match per landmark,
//! weighted by a logistic distance factor), plus a road-alignment term that
//! sums the observed signed distance field at the road points nearest to the
//! hypothesis. Scores become weights through a shifted exponential and the set
//! is resampled systematically when the effective sample size drops.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::cosine_sim;
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Point2, Pose2};
use crate::perception::{EsdfSampler, Grid2D};
use crate::scalar::{sigmoid, Scalar};
use crate::simulator::{FeaturePoint, OdometryDelta};
use crate::world_model::{nearest_road_points, visible_landmarks, Landmark, TopometricMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle<T> {
    pub pose: Pose2<T>,
    pub weight: T,
}

impl<T: Scalar> Particle<T> {
    pub fn new(pose: Pose2<T>, weight: T) -> Self {
        Self { pose, weight }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet<T> {
    pub particles: Vec<Particle<T>>,
}

impl<T: Scalar> ParticleSet<T> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Particle<T>> {
        self.particles.iter()
    }

    pub fn total_weight(&self) -> T {
        self.particles.iter().fold(T::zero(), |a, p| a + p.weight)
    }

    /// `1 / sum(w^2)` of the normalized weights.
    pub fn effective_sample_size(&self) -> T {
        let total = self.total_weight();
        let sq = self
            .particles
            .iter()
            .fold(T::zero(), |a, p| a + (p.weight / total).powi(2));
        T::one() / sq
    }
}

/// Per-particle motion noise, scaled by the size of each odometry step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct MotionNoise<T> {
    pub trans_std_per_meter: T,
    pub rot_std_per_radian: T,
    pub rot_std_per_meter: T,
}

impl<T: Scalar> Default for MotionNoise<T> {
    fn default() -> Self {
        Self {
            trans_std_per_meter: T::c(0.1),
            rot_std_per_radian: T::c(0.1),
            rot_std_per_meter: T::c(0.005),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode<T> {
    /// Uniform over the map bounds with uniform heading.
    Bbox,
    /// Uniform by arc length over the road network, heading along the road
    /// (either direction) within ±30°.
    Road,
    /// Gaussian around a known pose.
    Pose {
        x: T,
        y: T,
        theta: T,
        position_std: T,
        heading_std: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct FilterConfig<T> {
    pub particles: usize,
    pub alpha: T,
    pub beta: T,
    pub lambda: T,
    pub epsilon: T,
    pub road_points: usize,
    pub motion: MotionNoise<T>,
    pub resample_ess_frac: T,
    pub temperature: T,
    pub outside_value: T,
    pub init: InitMode<T>,
}

impl<T: Scalar> Default for FilterConfig<T> {
    fn default() -> Self {
        Self {
            particles: 500,
            alpha: T::c(-0.5),
            beta: T::c(2.0),
            lambda: T::c(0.05),
            epsilon: T::c(0.1),
            road_points: crate::world_model::DEFAULT_ROAD_POINTS,
            motion: MotionNoise::default(),
            resample_ess_frac: T::c(0.5),
            temperature: T::one(),
            outside_value: T::c(crate::perception::DEFAULT_OUTSIDE_VALUE),
            init: InitMode::Road,
        }
    }
}

impl<T: Scalar> FilterConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.particles < 2 {
            return bad("filter needs at least 2 particles");
        }
        if !(self.epsilon > T::zero()) {
            return bad("epsilon must be > 0");
        }
        if !(self.lambda >= T::zero()) {
            return bad("lambda must be >= 0");
        }
        if !(self.resample_ess_frac > T::zero() && self.resample_ess_frac <= T::one()) {
            return bad("resample_ess_frac must lie in (0, 1]");
        }
        if !(self.temperature > T::zero()) {
            return bad("temperature must be > 0");
        }
        if self.road_points == 0 {
            return bad("road_points must be >= 1");
        }
        Ok(())
    }
}

pub fn init<T: Scalar, R: Rng + ?Sized>(
    map: &TopometricMap<T>,
    cfg: &FilterConfig<T>,
    rng: &mut R,
) -> Result<ParticleSet<T>> {
    cfg.validate()?;
    let n = cfg.particles;
    let w = T::one() / T::c(n as f64);
    let net = &map.network;
    let mut particles = Vec::with_capacity(n);
    match cfg.init {
        InitMode::Pose {
            x,
            y,
            theta,
            position_std,
            heading_std,
        } => {
            for _ in 0..n {
                let pose = Pose2::new(
                    T::sample_normal(rng, x, position_std),
                    T::sample_normal(rng, y, position_std),
                    T::sample_normal(rng, theta, heading_std),
                );
                particles.push(Particle::new(pose, w));
            }
        }
        _ if net.is_empty() => return Err(Error::EmptyMap),
        InitMode::Bbox => {
            let b = map.bounds;
            for _ in 0..n {
                let pose = Pose2::new(
                    T::sample_uniform(rng, b.min_x, b.max_x),
                    T::sample_uniform(rng, b.min_y, b.max_y),
                    T::sample_uniform(rng, -T::PI(), T::PI()),
                );
                particles.push(Particle::new(pose, w));
            }
        }
        InitMode::Road => {
            let cumulative: Vec<T> = (0..net.edges().len())
                .scan(T::zero(), |acc, e| {
                    *acc += net.edge_length(e);
                    Some(*acc)
                })
                .collect();
            let total = *cumulative.last().unwrap();
            let spread = T::FRAC_PI_6();
            for _ in 0..n {
                let u = T::sample_unit(rng) * total;
                let e = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
                let (a, b) = net.edge_endpoints(e);
                let len = net.edge_length(e);
                let dir = (b - a) * (T::one() / len);
                let normal = Point2::new(-dir.y, dir.x);
                let half = net.edges()[e].width * T::c(0.5);
                let p = a + dir * T::sample_uniform(rng, T::zero(), len)
                    + normal * T::sample_uniform(rng, -half, half);
                let mut heading = dir.y.atan2(dir.x);
                if rng.random::<bool>() {
                    heading += T::PI();
                }
                heading += T::sample_uniform(rng, -spread, spread);
                particles.push(Particle::new(Pose2::new(p.x, p.y, heading), w));
            }
        }
    }
    Ok(ParticleSet { particles })
}

/// Propagates every particle through the odometry delta with per-particle
/// noise. Weights are untouched.
pub fn predict<T: Scalar, R: Rng + ?Sized>(
    set: &mut ParticleSet<T>,
    odo: &OdometryDelta<T>,
    cfg: &FilterConfig<T>,
    rng: &mut R,
) {
    let m = &cfg.motion;
    let dist = odo.translation();
    let trans_std = m.trans_std_per_meter * dist;
    let rot_std = m.rot_std_per_radian * odo.dtheta.abs() + m.rot_std_per_meter * dist;
    for p in &mut set.particles {
        let mut d = Pose2 {
            x: odo.dx,
            y: odo.dy,
            theta: odo.dtheta,
        };
        if trans_std > T::zero() {
            d.x += T::sample_normal(rng, T::zero(), trans_std);
            d.y += T::sample_normal(rng, T::zero(), trans_std);
        }
        if rot_std > T::zero() {
            d.theta += T::sample_normal(rng, T::zero(), rot_std);
        }
        p.pose = p.pose.compose(&d);
    }
}

/// Importance factor of one hypothesis.
///
/// `landmarks` are the map landmarks visible from the hypothesis, `points`
/// the observed feature points in the vehicle frame, `esdf` the observed
/// field anchored at `particle.pose`, and `road_points` the road samples
/// nearest the hypothesis. The returned score may be negative.
pub fn importance_factor<T: Scalar>(
    particle: &Particle<T>,
    landmarks: &[&Landmark<T>],
    points: &[FeaturePoint<T>],
    esdf: &EsdfSampler<'_, T>,
    road_points: &[Point2<T>],
    cfg: &FilterConfig<T>,
) -> T {
    let mut w_lm = T::zero();
    for lm in landmarks {
        let mut best: Option<&FeaturePoint<T>> = None;
        let mut c = T::zero();
        for l in points {
            let sim = cosine_sim(&lm.text_feature, &l.feature);
            if sim > c {
                best = Some(l);
                c = sim;
            }
        }
        let Some(l) = best else { continue };
        let l_map = particle.pose.transform_point(l.position);
        let d_recip = T::one() / (l_map.distance(lm.position) + cfg.epsilon);
        let d = cfg.alpha + sigmoid(cfg.beta * d_recip);
        w_lm += c * d;
    }
    w_lm + cfg.lambda * road_alignment(esdf, road_points)
}

fn road_alignment<T: Scalar>(esdf: &EsdfSampler<'_, T>, road_points: &[Point2<T>]) -> T {
    road_points
        .iter()
        .fold(T::zero(), |acc, &r| acc + esdf.sample(r))
}

/// Road-geometry-only score used by the baseline: the raw alignment sum.
pub fn baseline_weight_maplite<T: Scalar>(
    particle: &Particle<T>,
    esdf: &EsdfSampler<'_, T>,
    road_points: &[Point2<T>],
    _cfg: &FilterConfig<T>,
) -> T {
    debug_assert_eq!(esdf.anchor, particle.pose);
    road_alignment(esdf, road_points)
}

/// Which observation model scores particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationModel {
    /// Landmark matching plus `lambda`-weighted road alignment.
    Multimodal,
    /// Road alignment only.
    RoadOnly,
}

/// Everything observed at one filter update.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a, T> {
    pub map: &'a TopometricMap<T>,
    pub points: &'a [FeaturePoint<T>],
    pub esdf: &'a Grid2D<T, T>,
    pub fov: T,
    pub max_range: T,
}

/// Scores every particle in parallel. Each score depends only on its own
/// particle, so the result is independent of scheduling.
pub fn score_particles<T: Scalar>(
    set: &ParticleSet<T>,
    obs: &Observation<'_, T>,
    model: ObservationModel,
    cfg: &FilterConfig<T>,
) -> Result<Vec<T>> {
    let base = EsdfSampler::new(obs.esdf, Pose2::identity(), cfg.outside_value);
    set.particles
        .par_iter()
        .map(|p| {
            let sampler = base.with_anchor(p.pose);
            let road = nearest_road_points(obs.map, p.pose.position(), cfg.road_points)?;
            Ok(match model {
                ObservationModel::RoadOnly => baseline_weight_maplite(p, &sampler, &road, cfg),
                ObservationModel::Multimodal => {
                    let visible = if obs.points.is_empty() {
                        Vec::new()
                    } else {
                        visible_landmarks(obs.map, &p.pose, obs.fov, obs.max_range)
                    };
                    importance_factor(p, &visible, obs.points, &sampler, &road, cfg)
                }
            })
        })
        .collect()
}

/// Multiplies each weight by `exp(temperature * (score - max))`, normalizes,
/// and resamples systematically when the effective sample size falls below
/// `resample_ess_frac * N`. Returns whether a resample happened.
pub fn reweight_and_resample<T: Scalar, R: Rng + ?Sized>(
    set: &mut ParticleSet<T>,
    raw_scores: &[T],
    cfg: &FilterConfig<T>,
    rng: &mut R,
) -> Result<bool> {
    if raw_scores.len() != set.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} particles",
            raw_scores.len(),
            set.len()
        )));
    }
    let log_w: Vec<T> = set
        .particles
        .iter()
        .zip(raw_scores)
        .map(|(p, &s)| {
            let lw = p.weight.ln() + cfg.temperature * s;
            if lw.is_nan() {
                T::neg_infinity()
            } else {
                lw
            }
        })
        .collect();
    let max = log_w.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return Err(Error::WeightCollapse);
    }
    let mut total = T::zero();
    for (p, &lw) in set.particles.iter_mut().zip(&log_w) {
        p.weight = (lw - max).exp();
        total += p.weight;
    }
    for p in &mut set.particles {
        p.weight /= total;
    }
    let n = T::c(set.len() as f64);
    if set.effective_sample_size() < cfg.resample_ess_frac * n {
        systematic_resample(set, rng);
        return Ok(true);
    }
    Ok(false)
}

/// Low-variance resampling to `N` equally weighted particles.
pub fn systematic_resample<T: Scalar, R: Rng + ?Sized>(set: &mut ParticleSet<T>, rng: &mut R) {
    let n = set.len();
    if n == 0 {
        return;
    }
    let total = set.total_weight();
    let step = T::one() / T::c(n as f64);
    let start = T::sample_unit(rng) * step;
    let mut out = Vec::with_capacity(n);
    let mut j = 0usize;
    let mut cumulative = set.particles[0].weight / total;
    for i in 0..n {
        let u = start + T::c(i as f64) * step;
        while u >= cumulative && j + 1 < n {
            j += 1;
            cumulative += set.particles[j].weight / total;
        }
        out.push(Particle::new(set.particles[j].pose, step));
    }
    set.particles = out;
}

/// Point estimate with an uncertainty summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate<T> {
    /// Component-wise weighted median.
    pub position: Point2<T>,
    /// Weighted circular mean.
    pub yaw: T,
    /// Root-mean-square weighted distance of particles to `position`.
    pub spread: T,
}

impl<T: Scalar> PoseEstimate<T> {
    pub fn pose(&self) -> Pose2<T> {
        Pose2::new(self.position.x, self.position.y, self.yaw)
    }
}

/// Weighted median; on an exact half split the lower central value wins.
pub fn weighted_median<T: Scalar>(values: &mut [(T, T)]) -> T {
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let total = values.iter().fold(T::zero(), |a, v| a + v.1);
    let half = total * T::c(0.5);
    let slack = total * T::c(1e-9);
    let mut acc = T::zero();
    for &(v, w) in values.iter() {
        acc += w;
        if acc >= half - slack {
            return v;
        }
    }
    values.last().map(|v| v.0).unwrap_or_else(T::nan)
}

pub fn estimate<T: Scalar>(set: &ParticleSet<T>) -> PoseEstimate<T> {
    assert!(!set.is_empty(), "estimate needs at least one particle");
    let mut xs: Vec<(T, T)> = set.iter().map(|p| (p.pose.x, p.weight)).collect();
    let mut ys: Vec<(T, T)> = set.iter().map(|p| (p.pose.y, p.weight)).collect();
    let position = Point2::new(weighted_median(&mut xs), weighted_median(&mut ys));
    let total = set.total_weight();
    let (mut s, mut c, mut sq) = (T::zero(), T::zero(), T::zero());
    for p in set.iter() {
        let (si, ci) = p.pose.theta.sin_cos();
        s += p.weight * si;
        c += p.weight * ci;
        sq += p.weight * p.pose.position().distance_squared(position);
    }
    PoseEstimate {
        position,
        yaw: normalize_angle(s.atan2(c)),
        spread: (sq / total).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{embed_text, FeatureVector, Vocabulary};
    use crate::perception::{esdf, GridGeometry, OccupancyGrid};
    use crate::world_model::{Bounds, Edge, RoadNetwork};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(99)
    }

    fn road_map() -> TopometricMap<f64> {
        let nodes = BTreeMap::from([
            (0, Point2::new(0.0, 0.0)),
            (1, Point2::new(200.0, 0.0)),
            (2, Point2::new(200.0, 100.0)),
        ]);
        let edges = vec![Edge { a: 0, b: 1, width: 6.0 }, Edge { a: 1, b: 2, width: 8.0 }];
        let net = RoadNetwork::new(nodes, edges).unwrap();
        let bounds = Bounds { min_x: -10.0, min_y: -10.0, max_x: 210.0, max_y: 110.0 };
        TopometricMap::new(net, vec![], bounds).unwrap()
    }

    /// Grid around a vehicle driving along +x on a 6 m road.
    fn straight_road_esdf() -> Grid2D<f64, f64> {
        let g = GridGeometry::<f64>::centered(30.0, 15.0, 0.25).unwrap();
        let mut occ = OccupancyGrid::filled(g, true);
        for j in 0..g.height {
            for i in 0..g.width {
                if g.cell_center(i, j).y.abs() <= 3.0 {
                    occ.set(i, j, false);
                }
            }
        }
        esdf(&occ)
    }

    #[test]
    fn init_modes() {
        let map = road_map();
        let cfg = FilterConfig { particles: 100, ..FilterConfig::default() };
        let set = init(&map, &cfg, &mut rng()).unwrap();
        assert_eq!(set.len(), 100);
        assert!(set.iter().all(|p| p.weight == 0.01));
        for p in set.iter() {
            let near = map.network.edges().iter().enumerate().any(|(i, _)| {
                let (a, b) = map.network.edge_endpoints(i);
                crate::geometry::project_onto_segment(p.pose.position(), a, b).distance <= 4.0 + 1e-9
            });
            assert!(near);
        }

        let cfg = FilterConfig { particles: 100_000, init: InitMode::Bbox, ..FilterConfig::default() };
        let set = init(&map, &cfg, &mut rng()).unwrap();
        let (sx, sy) = set.iter().fold((0.0, 0.0), |a, p| (a.0 + p.pose.x, a.1 + p.pose.y));
        let n = set.len() as f64;
        let c = map.bounds.center();
        assert!((sx / n - c.x).abs() < 0.01 * map.bounds.width());
        assert!((sy / n - c.y).abs() < 0.01 * map.bounds.height());
    }

    #[test]
    fn init_rejects_empty_map() {
        let net = RoadNetwork::new(BTreeMap::new(), vec![]).unwrap();
        let map = TopometricMap::new(net, vec![], Bounds { min_x: 0.0, min_y: 0.0, max_x: 1.0, max_y: 1.0 }).unwrap();
        assert!(matches!(init(&map, &FilterConfig::default(), &mut rng()), Err(Error::EmptyMap)));
    }

    #[test]
    fn predict_cases() {
        let mut set = ParticleSet {
            particles: vec![
                Particle::new(Pose2::new(1.0, 1.0, 0.0), 0.5),
                Particle::new(Pose2::new(0.0, 0.0, PI / 2.0), 0.5),
            ],
        };
        let before = set.clone();
        let cfg = FilterConfig::default();
        predict(&mut set, &OdometryDelta::zero(), &cfg, &mut rng());
        assert_eq!(set, before);

        let quiet = FilterConfig {
            motion: MotionNoise { trans_std_per_meter: 0.0, rot_std_per_radian: 0.0, rot_std_per_meter: 0.0 },
            ..cfg
        };
        predict(&mut set, &OdometryDelta { dx: 1.0, dy: 0.0, dtheta: 0.0 }, &quiet, &mut rng());
        assert!((set.particles[0].pose.x - 2.0).abs() < 1e-12);
        assert!((set.particles[1].pose.y - 1.0).abs() < 1e-12);
        assert_eq!(set.particles[0].weight, 0.5);
    }

    #[test]
    fn predict_mean_displacement() {
        let n = 10_000;
        let mut set = ParticleSet {
            particles: vec![Particle::new(Pose2::new(0.0, 0.0, 0.3), 1.0 / n as f64); n],
        };
        let odo = OdometryDelta { dx: 4.0, dy: 0.0, dtheta: 0.0 };
        predict(&mut set, &odo, &FilterConfig::default(), &mut rng());
        let mean_disp = set.iter().map(|p| p.pose.position().norm()).sum::<f64>() / n as f64;
        assert!((mean_disp - 4.0).abs() / 4.0 < 0.02, "{mean_disp}");
    }

    #[test]
    fn importance_hand_value() {
        let vocab = Vocabulary::default();
        let feat: FeatureVector<f64> = embed_text("bench", &vocab).unwrap();
        let lm = Landmark { id: 0, position: Point2::new(10.0, 0.0), tag: "bench".into(), text_feature: feat.clone() };
        let pt = FeaturePoint { position: Point2::new(10.0, 0.0), feature: feat, source_landmark: Some(0) };
        let grid = straight_road_esdf();
        let p = Particle::new(Pose2::identity(), 1.0);
        let sampler = EsdfSampler::new(&grid, p.pose, -5.0);
        let cfg = FilterConfig { lambda: 0.0, ..FilterConfig::default() };
        let w = importance_factor(&p, &[&lm], &[pt], &sampler, &[], &cfg);
        // d~ = 1 / 0.1 = 10; sigma(20) = 0.99999999793884...
        let sigma20 = 1.0 / (1.0 + (-20.0f64).exp());
        assert!((sigma20 - 0.999999998).abs() < 1e-9);
        assert!((w - (-0.5 + sigma20)).abs() < 1e-12);
        assert!((w - 0.5).abs() < 1e-6);
    }

    #[test]
    fn importance_empty_inputs() {
        let g = GridGeometry::centered(30.0, 15.0, 0.25).unwrap();
        let zero = Grid2D::filled(g, 0.0);
        let p = Particle::new(Pose2::identity(), 1.0);
        let s = EsdfSampler::new(&zero, p.pose, -5.0);
        let r = [Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)];
        assert_eq!(importance_factor(&p, &[], &[], &s, &r, &FilterConfig::default()), 0.0);
    }

    #[test]
    fn baseline_prefers_aligned_heading() {
        let map = road_map();
        let grid = straight_road_esdf();
        let cfg = FilterConfig::default();
        let aligned = Particle::new(Pose2::new(100.0, 0.0, 0.0), 1.0);
        let rotated = Particle::new(Pose2::new(100.0, 0.0, PI / 2.0), 1.0);
        let score = |p: &Particle<f64>| {
            let r = nearest_road_points(&map, p.pose.position(), cfg.road_points).unwrap();
            let s = EsdfSampler::new(&grid, p.pose, cfg.outside_value);
            let b = baseline_weight_maplite(p, &s, &r, &cfg);
            let full = importance_factor(p, &[], &[], &s, &r, &FilterConfig { lambda: 1.0, ..cfg });
            assert_eq!(b, full);
            b
        };
        assert!(score(&aligned) > score(&rotated));

        let far = Particle::new(Pose2::new(100.0, 80.0, 0.0), 1.0);
        let r = nearest_road_points(&map, Point2::new(100.0, 0.0), cfg.road_points).unwrap();
        let s = EsdfSampler::new(&grid, far.pose, cfg.outside_value);
        assert_eq!(baseline_weight_maplite(&far, &s, &r, &cfg), cfg.road_points as f64 * -5.0);
    }

    fn uniform(n: usize) -> ParticleSet<f64> {
        ParticleSet {
            particles: (0..n)
                .map(|i| Particle::new(Pose2::new(i as f64, 0.0, 0.0), 1.0 / n as f64))
                .collect(),
        }
    }

    #[test]
    fn reweight_equal_scores() {
        let mut set = uniform(10);
        let resampled = reweight_and_resample(&mut set, &[3.0; 10], &FilterConfig::default(), &mut rng()).unwrap();
        assert!(!resampled);
        assert!(set.iter().all(|p| (p.weight - 0.1).abs() < 1e-15));
    }

    #[test]
    fn reweight_saturates_on_dominant_score() {
        let mut set = uniform(10);
        let mut scores = [0.0; 10];
        scores[6] = 1000.0;
        assert!(reweight_and_resample(&mut set, &scores, &FilterConfig::default(), &mut rng()).unwrap());
        assert!(set.iter().all(|p| p.pose.x == 6.0 && p.weight == 0.1));
    }

    #[test]
    fn reweight_collapse() {
        let mut set = uniform(4);
        let r = reweight_and_resample(&mut set, &[f64::NEG_INFINITY; 4], &FilterConfig::default(), &mut rng());
        assert!(matches!(r, Err(Error::WeightCollapse)));
    }

    #[test]
    fn systematic_uniform_keeps_each_once() {
        for seed in 0..50 {
            let mut set = uniform(37);
            systematic_resample(&mut set, &mut ChaCha8Rng::seed_from_u64(seed));
            let xs: Vec<f64> = set.iter().map(|p| p.pose.x).collect();
            assert_eq!(xs, (0..37).map(|i| i as f64).collect::<Vec<_>>());
        }
    }

    #[test]
    fn estimate_cases() {
        let p = Pose2::<f64>::new(3.0, -2.0, 1.0);
        let set = ParticleSet { particles: vec![Particle::new(p, 0.25); 4] };
        let e = estimate(&set);
        assert_eq!(e.position, p.position());
        assert_eq!(e.spread, 0.0);
        assert!((e.yaw - 1.0).abs() < 1e-12);

        let mut parts = vec![Particle::new(Pose2::new(0.0, 0.0, 0.0), 0.002); 250];
        parts.extend(vec![Particle::new(Pose2::new(10.0, 0.0, 0.0), 0.002); 250]);
        let e = estimate(&ParticleSet { particles: parts });
        assert_eq!(e.position.x, 0.0);
        assert!((e.spread - 50f64.sqrt()).abs() < 1e-9);

        let a = 179f64.to_radians();
        let set = ParticleSet {
            particles: vec![
                Particle::new(Pose2::new(0.0, 0.0, a), 0.5),
                Particle::new(Pose2::new(0.0, 0.0, -a), 0.5),
            ],
        };
        assert!((estimate(&set).yaw.abs() - PI).abs() < 1e-9);
    }
}
