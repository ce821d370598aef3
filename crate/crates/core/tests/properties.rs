mod oracles;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use proptest::prelude::*;
use toponav::embedding::{cosine_sim, embed_text, FeatureVector, Vocabulary};
use toponav::geometry::{Point2, Pose2};
use toponav::localization::{
    importance_factor, reweight_and_resample, score_particles, FilterConfig, Observation, ObservationModel, Particle,
    ParticleSet,
};
use toponav::perception::{esdf, EsdfSampler};
use toponav::planning::{stanley_steer, waypoints_ahead, Route, StanleyParams, Trajectory, TrajectoryState};
use toponav::simulator::{sense_landmarks, sense_road_grid, SensorRig, VehicleState};
use toponav::world_model::{
    corrupt_landmarks, nearest_road_points, scale_map, visible_landmarks, Bounds, Edge, Landmark, RoadNetwork,
    TopometricMap, World,
};

/// A 3x3 block grid with landmarks scattered beside the roads.
fn town(vocab: &Vocabulary) -> TopometricMap<f64> {
    let mut nodes = BTreeMap::new();
    for j in 0..3u32 {
        for i in 0..3u32 {
            nodes.insert(j * 3 + i, Point2::new(i as f64 * 200.0, j as f64 * 150.0));
        }
    }
    let mut edges = Vec::new();
    for j in 0..3u32 {
        for i in 0..3u32 {
            let id = j * 3 + i;
            if i < 2 {
                edges.push(Edge { a: id, b: id + 1, width: 7.0 });
            }
            if j < 2 {
                edges.push(Edge { a: id, b: id + 3, width: 7.0 });
            }
        }
    }
    let network = RoadNetwork::new(nodes, edges).unwrap();
    let landmarks = (0..18u32)
        .map(|k| {
            let x = 25.0 + (k % 6) as f64 * 65.0;
            let y = (k / 6) as f64 * 150.0 + if k % 2 == 0 { 6.0 } else { -6.0 };
            Landmark::new(k, Point2::new(x, y), oracles::TAGS[k as usize % oracles::TAGS.len()], vocab).unwrap()
        })
        .collect();
    let bounds = Bounds {
        min_x: -50.0,
        min_y: -50.0,
        max_x: 450.0,
        max_y: 350.0,
    };
    TopometricMap::new(network, landmarks, bounds).unwrap()
}

fn vocab() -> Vocabulary {
    Vocabulary::default()
}

#[test]
fn random_tag_pairs_are_nearly_orthogonal() {
    let v = vocab();
    let feats: Vec<FeatureVector<f64>> = (0..200).map(|i| embed_text(&format!("object {i}"), &v).unwrap()).collect();
    let mut small = 0usize;
    let mut total = 0usize;
    for a in 0..feats.len() {
        for b in a + 1..feats.len() {
            total += 1;
            if total > 10_000 {
                break;
            }
            if feats[a].dot(&feats[b]).abs() < 0.5 {
                small += 1;
            }
        }
    }
    let total = total.min(10_000);
    assert!(small as f64 / total as f64 >= 0.999, "{small}/{total}");
}

#[test]
fn score_order_does_not_matter() {
    let v = vocab();
    let map = town(&v);
    let world = World::new(map.clone());
    let rig = SensorRig::default();
    let state = VehicleState::at_rest(Pose2::new(10.0, 0.0, 0.0), 2.7, 0.6);
    let mut r = oracles::rng(3);
    let points = sense_landmarks(&world, &state, &rig, &v, &mut r).unwrap();
    let field = esdf(&sense_road_grid(&world, &state, &rig).unwrap());
    let particles: Vec<Particle<f64>> = (0..64)
        .map(|k| Particle::new(Pose2::new(k as f64 * 1.5, (k % 5) as f64 - 2.0, 0.05 * (k % 7) as f64 - 0.15), 1.0 / 64.0))
        .collect();
    let set = ParticleSet { particles };
    let cfg = FilterConfig::default();
    let obs = Observation {
        map: &map,
        points: &points,
        esdf: &field,
        fov: rig.fov,
        max_range: rig.max_range,
    };
    let batch = score_particles(&set, &obs, ObservationModel::Multimodal, &cfg).unwrap();
    for (k, p) in set.particles.iter().enumerate().rev() {
        let lms = visible_landmarks(&map, &p.pose, rig.fov, rig.max_range);
        let road = nearest_road_points(&map, p.pose.position(), cfg.road_points).unwrap();
        let sampler = EsdfSampler::new(&field, p.pose, cfg.outside_value);
        assert_eq!(importance_factor(p, &lms, &points, &sampler, &road, &cfg), batch[k]);
    }
}

#[test]
fn sensing_ignores_the_nav_map() {
    let v = vocab();
    let base = World::new(town(&v));
    let distorted = World::new(town(&v))
        .with_scaled_nav(1.2)
        .unwrap()
        .with_corrupted_nav(0.5, 0.3, 9, &v)
        .unwrap();
    let rig = SensorRig::default();
    let state = VehicleState::at_rest(Pose2::new(60.0, 1.0, 0.05), 2.7, 0.6);
    let a = sense_landmarks(&base, &state, &rig, &v, &mut oracles::rng(1)).unwrap();
    let b = sense_landmarks(&distorted, &state, &rig, &v, &mut oracles::rng(1)).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let g1 = sense_road_grid(&base, &state, &rig).unwrap();
    let g2 = sense_road_grid(&distorted, &state, &rig).unwrap();
    let g3 = sense_road_grid(&base, &state, &rig).unwrap();
    assert_eq!(g1, g2);
    assert_eq!(g1, g3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_round_trips(seed in 0u64..1000, factor in 0.5f64..2.0) {
        let map = oracles::random_map(seed);
        let back = scale_map(&scale_map(&map, factor).unwrap(), 1.0 / factor).unwrap();
        for (id, p) in map.network.nodes() {
            let q = back.network.node(*id).unwrap();
            prop_assert!((p.x - q.x).abs() < 1e-6 && (p.y - q.y).abs() < 1e-6);
        }
    }

    #[test]
    fn corruption_keeps_positions(seed in 0u64..1000, fn_frac in 0.0f64..0.5, fp_frac in 0.0f64..0.5) {
        let v = vocab();
        let map = town(&v);
        let bad = corrupt_landmarks(&map, fn_frac, fp_frac, seed, &v).unwrap();
        for lm in &bad.landmarks {
            let orig = map.landmark(lm.id).unwrap();
            prop_assert_eq!(orig.position, lm.position);
        }
    }

    #[test]
    fn full_circle_sees_everything(x in -100.0f64..500.0, y in -100.0f64..400.0, t in -PI..PI) {
        let map = town(&vocab());
        let seen = visible_landmarks(&map, &Pose2::new(x, y, t), 2.0 * PI, f64::INFINITY);
        prop_assert_eq!(seen.len(), map.landmarks.len());
    }

    #[test]
    fn nearest_road_points_sorted(x in -100.0f64..500.0, y in -100.0f64..400.0, v in 1usize..40) {
        let map = town(&vocab());
        let p = Point2::new(x, y);
        let pts = nearest_road_points(&map, p, v).unwrap();
        prop_assert_eq!(pts.len(), v);
        for w in pts.windows(2) {
            prop_assert!(w[0].distance(p) <= w[1].distance(p));
        }
    }

    #[test]
    fn text_embedding_is_pure_and_cosine_bounded(a in "[a-z ]{1,12}", b in "[a-z ]{1,12}") {
        prop_assume!(!a.trim().is_empty() && !b.trim().is_empty());
        let v = vocab();
        let fa: FeatureVector<f64> = embed_text(&a, &v).unwrap();
        prop_assert_eq!(&fa, &embed_text(&a, &v).unwrap());
        let fb: FeatureVector<f64> = embed_text(&b, &v).unwrap();
        let c = cosine_sim(&fa, &fb);
        prop_assert_eq!(c, cosine_sim(&fb, &fa));
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn esdf_within_cap(seed in 0u64..1000) {
        let occ = oracles::random_grid(seed, 40, 24);
        let cap = occ.geometry.diagonal();
        let e = esdf(&occ);
        prop_assert!(e.values().iter().all(|v| v.abs() <= cap));
    }

    #[test]
    fn landmark_score_bounds(seed in 0u64..10_000) {
        let v = vocab();
        let case = oracles::scoring_case(seed, &v);
        let cfg = FilterConfig { lambda: 0.0, ..case.cfg };
        let lms: Vec<&Landmark<f64>> = case.landmarks.iter().collect();
        let sampler = EsdfSampler::new(&case.grid, case.particle.pose, cfg.outside_value);
        let w = importance_factor(&case.particle, &lms, &case.points, &sampler, &[], &cfg);
        prop_assert!(w >= 0.0);
        prop_assert!(w <= lms.len() as f64 * (cfg.alpha + 1.0));
        let defaults = FilterConfig::default();
        let w = importance_factor(&case.particle, &lms, &case.points, &sampler, &[], &FilterConfig { lambda: 0.0, ..defaults });
        prop_assert!(w <= 0.5 * lms.len() as f64 + 1e-12);
    }

    #[test]
    fn unmatched_landmark_bounded_effect(seed in 0u64..10_000) {
        let v = vocab();
        let case = oracles::scoring_case(seed, &v);
        let cfg = FilterConfig { lambda: 0.0, ..case.cfg };
        let pose = case.particle.pose;
        let extra = Landmark::new(99, pose.transform_point(Point2::new(15.0, 3.0)), "fountain", &v).unwrap();
        let sampler = EsdfSampler::new(&case.grid, pose, cfg.outside_value);
        let base: Vec<&Landmark<f64>> = case.landmarks.iter().collect();
        let mut more = base.clone();
        more.push(&extra);
        let before = importance_factor(&case.particle, &base, &case.points, &sampler, &[], &cfg);
        let after = importance_factor(&case.particle, &more, &case.points, &sampler, &[], &cfg);
        let delta = after - before;
        if case.points.is_empty() {
            prop_assert_eq!(delta, 0.0);
        } else {
            let max_c = case.points.iter().map(|l| cosine_sim(&extra.text_feature, &l.feature)).fold(0.0, f64::max);
            let nearest = case
                .points
                .iter()
                .map(|l| pose.transform_point(l.position).distance(extra.position))
                .fold(f64::INFINITY, f64::min);
            let bound = (cfg.alpha + 1.0 / (1.0 + (-cfg.beta / (nearest + cfg.epsilon)).exp())) * max_c;
            prop_assert!(delta >= -1e-12 && delta <= bound + 1e-12, "delta {} bound {}", delta, bound);
        }
    }

    #[test]
    fn reweight_keeps_count_and_normalizes(scores in prop::collection::vec(-50.0f64..50.0, 2..200), t in 0.1f64..10.0) {
        let n = scores.len();
        let mut set = ParticleSet {
            particles: (0..n).map(|k| Particle::new(Pose2::new(k as f64, 0.0, 0.0), 1.0 / n as f64)).collect(),
        };
        let cfg = FilterConfig { temperature: t, ..FilterConfig::default() };
        reweight_and_resample(&mut set, &scores, &cfg, &mut oracles::rng(0)).unwrap();
        prop_assert_eq!(set.len(), n);
        prop_assert!((set.total_weight() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn waypoints_stay_within_horizon(seed in 0u64..1000, horizon in 1.0f64..40.0, spacing in 0.2f64..5.0) {
        let map = oracles::random_map(seed);
        let mut r = oracles::rng(seed);
        let (a, b) = (oracles::random_snap(&map, &mut r), oracles::random_snap(&map, &mut r));
        let Ok(route) = toponav::planning::astar_route(&map, a, b) else { return Ok(()) };
        prop_assume!(!route.is_empty());
        let wps = waypoints_ahead(&route, &Pose2::new(route.points[0].x, route.points[0].y, 0.0), horizon, spacing).unwrap();
        let arc: f64 = wps.windows(2).map(|w| w[0].distance(w[1])).sum();
        prop_assert!(arc <= horizon + spacing + 1e-9);
    }

    #[test]
    fn stanley_steers_back_to_the_path(offset in -5.0f64..5.0, speed in 0.0f64..15.0) {
        prop_assume!(offset.abs() > 1e-3);
        let path = Route::from_points(Vec::new(), (0..30).map(|k| Point2::new(k as f64, 0.0)));
        let traj = Trajectory {
            states: path.points.iter().map(|&point| TrajectoryState { point, heading: 0.0, speed, time: 0.0 }).collect(),
            lateral_offset: 0.0,
            cost: 0.0,
            min_clearance: f64::INFINITY,
        };
        let state = VehicleState { speed, ..VehicleState::at_rest(Pose2::new(5.0, offset, 0.0), 2.7, 0.6) };
        let delta = stanley_steer(&state, &traj, &StanleyParams::default());
        prop_assert_eq!(delta.signum(), -offset.signum());
    }
}
