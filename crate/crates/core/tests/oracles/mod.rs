//! Naive reference implementations and random instance generators shared by
//! the core integration tests and the harness acceptance suite.
//!
//! Nothing here calls the library function it is checked against; it only
//! borrows plain data types.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toponav::embedding::{embed_visual, Vocabulary};
use toponav::geometry::{Point2, Pose2};
use toponav::localization::{FilterConfig, Particle};
use toponav::perception::{esdf, Grid2D, GridGeometry, OccupancyGrid};
use toponav::planning::Snap;
use toponav::simulator::FeaturePoint;
use toponav::world_model::{Bounds, Edge, Landmark, NodeId, RoadNetwork, TopometricMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const TAGS: [&str; 12] = [
    "bench",
    "fire hydrant",
    "stop sign",
    "mailbox",
    "street lamp",
    "bus stop",
    "billboard",
    "trash can",
    "phone booth",
    "water tower",
    "traffic light",
    "parking meter",
];

// ---------------------------------------------------------------- scoring

fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for k in 0..a.len() {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    let c = dot / (na.sqrt() * nb.sqrt());
    if c < 0.0 {
        0.0
    } else if c > 1.0 {
        1.0
    } else {
        c
    }
}

fn naive_sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn rotate(x: f64, y: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Bilinear lookup of a map point in a vehicle-frame grid held by a vehicle
/// at `anchor`; `outside` beyond the grid.
pub fn naive_sample(grid: &Grid2D<f64, f64>, anchor: &Pose2<f64>, p: Point2<f64>, outside: f64) -> f64 {
    let (vx, vy) = rotate(p.x - anchor.x, p.y - anchor.y, -anchor.theta);
    let g = &grid.geometry;
    let (lx, ly) = rotate(vx - g.origin.x, vy - g.origin.y, -g.origin.theta);
    let (w, h, res) = (g.width, g.height, g.resolution);
    if lx < 0.0 || ly < 0.0 || lx > w as f64 * res || ly > h as f64 * res {
        return outside;
    }
    let u = (lx / res - 0.5).clamp(0.0, (w - 1) as f64);
    let v = (ly / res - 0.5).clamp(0.0, (h - 1) as f64);
    let i0 = (u.floor() as usize).min(w - 1);
    let j0 = (v.floor() as usize).min(h - 1);
    let i1 = (i0 + 1).min(w - 1);
    let j1 = (j0 + 1).min(h - 1);
    let fx = u - i0 as f64;
    let fy = v - j0 as f64;
    let at = |i, j| *grid.get(i, j);
    (1.0 - fy) * ((1.0 - fx) * at(i0, j0) + fx * at(i1, j0)) + fy * ((1.0 - fx) * at(i0, j1) + fx * at(i1, j1))
}

/// Landmark score plus weighted road score, one plain loop per term.
pub fn naive_importance(
    pose: &Pose2<f64>,
    landmarks: &[Landmark<f64>],
    points: &[FeaturePoint<f64>],
    grid: &Grid2D<f64, f64>,
    road: &[Point2<f64>],
    cfg: &FilterConfig<f64>,
) -> f64 {
    let mut w_lm = 0.0;
    for lm in landmarks {
        let mut best = None;
        let mut best_c = 0.0;
        for (k, l) in points.iter().enumerate() {
            let c = naive_cosine(lm.text_feature.values(), l.feature.values());
            if c > best_c {
                best_c = c;
                best = Some(k);
            }
        }
        if let Some(k) = best {
            let (dx, dy) = rotate(points[k].position.x, points[k].position.y, pose.theta);
            let mx = pose.x + dx;
            let my = pose.y + dy;
            let dist = ((mx - lm.position.x).powi(2) + (my - lm.position.y).powi(2)).sqrt();
            let d = cfg.alpha + naive_sigmoid(cfg.beta / (dist + cfg.epsilon));
            w_lm += best_c * d;
        }
    }
    let mut w_road = 0.0;
    for &r in road {
        w_road += naive_sample(grid, pose, r, cfg.outside_value);
    }
    w_lm + cfg.lambda * w_road
}

pub struct ScoringCase {
    pub particle: Particle<f64>,
    pub landmarks: Vec<Landmark<f64>>,
    pub points: Vec<FeaturePoint<f64>>,
    pub grid: Grid2D<f64, f64>,
    pub road: Vec<Point2<f64>>,
    pub cfg: FilterConfig<f64>,
}

/// A random (particle, landmarks, feature points, field) instance. Some
/// feature points are generated from the landmarks' own tags near their
/// true positions so that matches with high cosine actually occur.
pub fn scoring_case(seed: u64, vocab: &Vocabulary) -> ScoringCase {
    let mut r = rng(seed);
    let pose = Pose2::new(
        r.random_range(-50.0..50.0),
        r.random_range(-50.0..50.0),
        r.random_range(-3.14..3.14),
    );
    let cfg = FilterConfig {
        alpha: r.random_range(-0.5..0.0),
        beta: r.random_range(0.5..4.0),
        epsilon: r.random_range(0.05..1.0),
        lambda: r.random_range(0.0..0.2),
        outside_value: r.random_range(-10.0..0.0),
        ..FilterConfig::default()
    };
    let n_lm = r.random_range(0..8usize);
    let landmarks: Vec<Landmark<f64>> = (0..n_lm)
        .map(|id| {
            let tag = TAGS[r.random_range(0..TAGS.len())];
            let p = pose.transform_point(Point2::new(r.random_range(0.0..40.0), r.random_range(-20.0..20.0)));
            Landmark::new(id as u32, p, tag, vocab).unwrap()
        })
        .collect();
    let mut points = Vec::new();
    for lm in &landmarks {
        if r.random_bool(0.6) {
            let local = pose.inverse_transform_point(lm.position);
            let jitter = Point2::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
            points.push(FeaturePoint {
                position: local + jitter,
                feature: embed_visual(&lm.tag, 0.25, vocab, &mut r).unwrap(),
                source_landmark: Some(lm.id),
            });
        }
    }
    for _ in 0..r.random_range(0..12usize) {
        let tag = TAGS[r.random_range(0..TAGS.len())];
        points.push(FeaturePoint {
            position: Point2::new(r.random_range(0.0..40.0), r.random_range(-20.0..20.0)),
            feature: embed_visual(tag, r.random_range(0.0..1.0), vocab, &mut r).unwrap(),
            source_landmark: None,
        });
    }
    let geometry = GridGeometry::centered(40.0, 20.0, 0.5).unwrap();
    let density = r.random_range(0.05..0.95);
    let occ = OccupancyGrid::from_values(geometry, (0..geometry.len()).map(|_| r.random_bool(density)).collect()).unwrap();
    let road = (0..r.random_range(0..15usize))
        .map(|_| pose.transform_point(Point2::new(r.random_range(-30.0..30.0), r.random_range(-15.0..15.0))))
        .collect();
    ScoringCase {
        particle: Particle::new(pose, 1.0),
        landmarks,
        points,
        grid: esdf(&occ),
        road,
        cfg,
    }
}

// ---------------------------------------------------------------- distance fields

/// Distance from every cell center to the nearest occupied cell center, by
/// scanning all pairs; the grid diagonal when nothing is occupied.
pub fn brute_distance_transform(occ: &OccupancyGrid<f64>) -> Vec<f64> {
    let (w, h) = (occ.width(), occ.height());
    let res = occ.geometry.resolution;
    let cap = res * (w as f64).hypot(h as f64);
    let occupied: Vec<(i64, i64)> = (0..h)
        .flat_map(|j| (0..w).map(move |i| (i, j)))
        .filter(|&(i, j)| *occ.get(i, j))
        .map(|(i, j)| (i as i64, j as i64))
        .collect();
    let mut out = Vec::with_capacity(w * h);
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            let best = occupied
                .iter()
                .map(|&(a, b)| (a - i) * (a - i) + (b - j) * (b - j))
                .min();
            out.push(match best {
                Some(d2) => ((d2 as f64).sqrt() * res).min(cap),
                None => cap,
            });
        }
    }
    out
}

/// Random occupancy grid; the density varies per seed and the first seeds
/// cover the empty and full grids.
pub fn random_grid(seed: u64, width: usize, height: usize) -> OccupancyGrid<f64> {
    let mut r = rng(seed);
    let res = [0.1, 0.25, 0.5, 1.0][r.random_range(0..4)];
    let geometry = GridGeometry {
        origin: Pose2::new(0.0, 0.0, 0.0),
        resolution: res,
        width,
        height,
    };
    let density = match seed % 10 {
        0 => 0.0,
        1 => 1.0,
        2..=4 => r.random_range(0.0005..0.01),
        _ => r.random_range(0.01..0.9),
    };
    let values = (0..geometry.len()).map(|_| r.random_bool(density)).collect();
    OccupancyGrid::from_values(geometry, values).unwrap()
}

/// Grid whose occupied cells form a half-plane with a random normal and
/// offset; its distance field has no ridges on either side.
pub fn half_plane_grid(seed: u64, size: usize) -> OccupancyGrid<f64> {
    let mut r = rng(seed);
    let angle: f64 = r.random_range(-3.14..3.14);
    let offset = r.random_range(-0.3..0.3) * size as f64;
    let c = size as f64 / 2.0;
    let geometry = GridGeometry {
        origin: Pose2::new(0.0, 0.0, 0.0),
        resolution: 0.25,
        width: size,
        height: size,
    };
    let mut values = Vec::with_capacity(size * size);
    for j in 0..size {
        for i in 0..size {
            let (x, y) = (i as f64 + 0.5 - c, j as f64 + 0.5 - c);
            values.push(x * angle.cos() + y * angle.sin() > offset);
        }
    }
    OccupancyGrid::from_values(geometry, values).unwrap()
}

/// Central-difference gradient norms of `field` at cells whose whole
/// `(2 * margin + 1)^2` neighbourhood shares the center's occupancy.
pub fn gradient_norms_away_from_boundary(occ: &OccupancyGrid<f64>, field: &Grid2D<f64, f64>, margin: usize) -> Vec<f64> {
    let (w, h) = (occ.width(), occ.height());
    let res = occ.geometry.resolution;
    let mut out = Vec::new();
    for j in margin..h - margin {
        for i in margin..w - margin {
            let me = *occ.get(i, j);
            let uniform = (j - margin..=j + margin).all(|b| (i - margin..=i + margin).all(|a| *occ.get(a, b) == me));
            if !uniform {
                continue;
            }
            let gx = (field.get(i + 1, j) - field.get(i - 1, j)) / (2.0 * res);
            let gy = (field.get(i, j + 1) - field.get(i, j - 1)) / (2.0 * res);
            out.push(gx.hypot(gy));
        }
    }
    out
}

// ---------------------------------------------------------------- graphs

/// Random connected-or-not road graph with straight edges.
pub fn random_map(seed: u64) -> TopometricMap<f64> {
    let mut r = rng(seed);
    let n = r.random_range(4..30u32);
    let mut nodes = BTreeMap::new();
    for id in 0..n {
        nodes.insert(id, Point2::new(r.random_range(0.0..500.0), r.random_range(0.0..500.0)));
    }
    let mut pairs = std::collections::BTreeSet::new();
    // a random tree over most nodes, leaving some seeds disconnected
    let connected = if seed % 7 == 3 { n - 2 } else { n };
    for id in 1..connected {
        let other = r.random_range(0..id);
        pairs.insert((other, id));
    }
    for _ in 0..r.random_range(0..2 * n) {
        let a = r.random_range(0..connected);
        let b = r.random_range(0..connected);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(a, b)| Edge {
            a,
            b,
            width: r.random_range(3.0..8.0),
        })
        .collect();
    let network = RoadNetwork::new(nodes, edges).unwrap();
    let bounds = Bounds {
        min_x: -1.0,
        min_y: -1.0,
        max_x: 501.0,
        max_y: 501.0,
    };
    TopometricMap::new(network, Vec::new(), bounds).unwrap()
}

pub fn random_snap(map: &TopometricMap<f64>, r: &mut ChaCha8Rng) -> Snap<f64> {
    let edge = r.random_range(0..map.network.edges().len());
    Snap {
        edge,
        s: r.random_range(0.0..=map.network.edge_length(edge)),
    }
}

/// Shortest network distance between two snapped positions by Dijkstra over
/// the nodes, O(V^2). `None` when unreachable.
pub fn dijkstra_cost(map: &TopometricMap<f64>, start: Snap<f64>, goal: Snap<f64>) -> Option<f64> {
    let net = &map.network;
    if start.edge == goal.edge {
        return Some((start.s - goal.s).abs());
    }
    let ids: Vec<NodeId> = net.nodes().keys().copied().collect();
    let pos = |id: NodeId| ids.iter().position(|&x| x == id).unwrap();
    let mut dist = vec![f64::INFINITY; ids.len()];
    let mut done = vec![false; ids.len()];
    let se = net.edges()[start.edge];
    let slen = net.edge_length(start.edge);
    dist[pos(se.a)] = dist[pos(se.a)].min(start.s);
    dist[pos(se.b)] = dist[pos(se.b)].min(slen - start.s);
    loop {
        let mut u = None;
        for k in 0..ids.len() {
            if !done[k] && dist[k].is_finite() && u.is_none_or(|b: usize| dist[k] < dist[b]) {
                u = Some(k);
            }
        }
        let Some(u) = u else { break };
        done[u] = true;
        for (e, edge) in net.edges().iter().enumerate() {
            let other = if pos(edge.a) == u {
                pos(edge.b)
            } else if pos(edge.b) == u {
                pos(edge.a)
            } else {
                continue;
            };
            let d = dist[u] + net.edge_length(e);
            if d < dist[other] {
                dist[other] = d;
            }
        }
    }
    let ge = net.edges()[goal.edge];
    let glen = net.edge_length(goal.edge);
    let best = (dist[pos(ge.a)] + goal.s).min(dist[pos(ge.b)] + glen - goal.s);
    best.is_finite().then_some(best)
}
