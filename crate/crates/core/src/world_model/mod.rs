//! Language-augmented topometric map, the ground-truth world, and the
//! corruptions applied to the navigation copy of the map.

mod index;
mod io;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{embed_text, FeatureVector, Vocabulary};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Point2, Pose2};
use crate::scalar::Scalar;

pub use index::PointIndex;
pub use io::{load_map, map_from_str, map_to_canonical_string, save_map, MAP_FORMAT_VERSION};

pub type NodeId = u32;
pub type LandmarkId = u32;
pub type EdgeId = usize;

pub const DEFAULT_ROAD_SPACING: f64 = 1.0;
pub const DEFAULT_ROAD_POINTS: usize = 10;

/// Bucket size of the road-point index, in meters.
const INDEX_CELL: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge<T> {
    pub a: NodeId,
    pub b: NodeId,
    pub width: T,
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Scalar> Bounds<T> {
    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn center(&self) -> Point2<T> {
        let half = T::c(0.5);
        Point2::new(
            (self.min_x + self.max_x) * half,
            (self.min_y + self.max_y) * half,
        )
    }

    pub fn width(&self) -> T {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> T {
        self.max_y - self.min_y
    }
}

/// Undirected road graph with sampled centerline points.
#[derive(Debug, Clone)]
pub struct RoadNetwork<T = f64> {
    nodes: BTreeMap<NodeId, Point2<T>>,
    edges: Vec<Edge<T>>,
    lengths: Vec<T>,
    adjacency: BTreeMap<NodeId, Vec<(EdgeId, NodeId)>>,
    spacing: T,
    road_points: PointIndex<T>,
}

impl<T: Scalar> RoadNetwork<T> {
    pub fn new(nodes: BTreeMap<NodeId, Point2<T>>, edges: Vec<Edge<T>>) -> Result<Self> {
        Self::with_spacing(nodes, edges, T::c(DEFAULT_ROAD_SPACING))
    }

    pub fn with_spacing(
        nodes: BTreeMap<NodeId, Point2<T>>,
        edges: Vec<Edge<T>>,
        spacing: T,
    ) -> Result<Self> {
        if !(spacing > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "road point spacing must be > 0, got {spacing}"
            )));
        }
        let mut lengths = Vec::with_capacity(edges.len());
        let mut adjacency: BTreeMap<NodeId, Vec<(EdgeId, NodeId)>> =
            nodes.keys().map(|&id| (id, Vec::new())).collect();
        for (i, e) in edges.iter().enumerate() {
            let pa = *nodes.get(&e.a).ok_or(Error::DanglingEdge { edge: i, node: e.a })?;
            let pb = *nodes.get(&e.b).ok_or(Error::DanglingEdge { edge: i, node: e.b })?;
            let len = pa.distance(pb);
            if !(len > T::zero()) {
                return Err(Error::InvalidEdge {
                    edge: i,
                    reason: "zero length".into(),
                });
            }
            if !(e.width > T::zero()) {
                return Err(Error::InvalidEdge {
                    edge: i,
                    reason: format!("width must be > 0, got {}", e.width),
                });
            }
            lengths.push(len);
            adjacency.get_mut(&e.a).unwrap().push((i, e.b));
            adjacency.get_mut(&e.b).unwrap().push((i, e.a));
        }
        let pts = sample_edges(&nodes, &edges, spacing);
        Ok(Self {
            nodes,
            edges,
            lengths,
            adjacency,
            spacing,
            road_points: PointIndex::new(pts, T::c(INDEX_CELL)),
        })
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, Point2<T>> {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<Point2<T>> {
        self.nodes.get(&id).copied()
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn edge_length(&self, edge: EdgeId) -> T {
        self.lengths[edge]
    }

    pub fn total_length(&self) -> T {
        self.lengths.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Endpoints of an edge in `a -> b` order.
    pub fn edge_endpoints(&self, edge: EdgeId) -> (Point2<T>, Point2<T>) {
        let e = &self.edges[edge];
        (self.nodes[&e.a], self.nodes[&e.b])
    }

    /// `(edge, other node)` pairs incident to `node`, in edge-id order.
    pub fn neighbors(&self, node: NodeId) -> &[(EdgeId, NodeId)] {
        self.adjacency.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.neighbors(node).len()
    }

    /// Node ids with three or more incident edges.
    pub fn intersections(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency
            .iter()
            .filter(|(_, n)| n.len() >= 3)
            .map(|(&id, _)| id)
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn road_points(&self) -> &[Point2<T>] {
        self.road_points.points()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    fn map_nodes(&self, f: impl Fn(Point2<T>) -> Point2<T>) -> Self {
        let nodes = self.nodes.iter().map(|(&id, &p)| (id, f(p))).collect();
        Self::with_spacing(nodes, self.edges.clone(), self.spacing)
            .expect("similarity transform preserves validity")
    }
}

/// Centerline samples of each edge: `ceil(len / spacing) + 1` evenly spaced
/// points including both endpoints.
pub fn sample_road_points<T: Scalar>(network: &RoadNetwork<T>, spacing: T) -> Vec<Point2<T>> {
    if spacing == network.spacing {
        return network.road_points().to_vec();
    }
    sample_edges(&network.nodes, &network.edges, spacing)
}

fn sample_edges<T: Scalar>(
    nodes: &BTreeMap<NodeId, Point2<T>>,
    edges: &[Edge<T>],
    spacing: T,
) -> Vec<Point2<T>> {
    let mut out = Vec::new();
    for e in edges {
        let (a, b) = (nodes[&e.a], nodes[&e.b]);
        let n = (a.distance(b) / spacing).ceil().to_usize().unwrap_or(1).max(1);
        for i in 0..=n {
            out.push(a.lerp(b, T::c(i as f64) / T::c(n as f64)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark<T = f64> {
    pub id: LandmarkId,
    pub position: Point2<T>,
    pub tag: String,
    pub text_feature: FeatureVector<T>,
}

impl<T: Scalar> Landmark<T> {
    /// Builds a landmark, embedding its tag.
    pub fn new(id: LandmarkId, position: Point2<T>, tag: &str, vocab: &Vocabulary) -> Result<Self> {
        let text_feature = embed_text(tag, vocab)?;
        Ok(Self {
            id,
            position,
            tag: tag.trim().to_string(),
            text_feature,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TopometricMap<T = f64> {
    pub network: RoadNetwork<T>,
    pub landmarks: Vec<Landmark<T>>,
    pub bounds: Bounds<T>,
}

impl<T: Scalar> TopometricMap<T> {
    pub fn new(network: RoadNetwork<T>, landmarks: Vec<Landmark<T>>, bounds: Bounds<T>) -> Result<Self> {
        if !(bounds.max_x >= bounds.min_x && bounds.max_y >= bounds.min_y) {
            return Err(Error::InvalidArgument("inverted bounds".into()));
        }
        for (&id, &p) in network.nodes() {
            if !bounds.contains(p) {
                return Err(Error::OutOfBounds {
                    kind: "node",
                    id,
                    x: p.x.to_f64_lossy(),
                    y: p.y.to_f64_lossy(),
                });
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for lm in &landmarks {
            if !seen.insert(lm.id) {
                return Err(Error::DuplicateId {
                    kind: "landmark",
                    id: lm.id,
                });
            }
            if lm.tag.trim().is_empty() {
                return Err(Error::EmptyTag);
            }
            if !bounds.contains(lm.position) {
                return Err(Error::OutOfBounds {
                    kind: "landmark",
                    id: lm.id,
                    x: lm.position.x.to_f64_lossy(),
                    y: lm.position.y.to_f64_lossy(),
                });
            }
        }
        Ok(Self {
            network,
            landmarks,
            bounds,
        })
    }

    pub fn landmark(&self, id: LandmarkId) -> Option<&Landmark<T>> {
        self.landmarks.iter().find(|l| l.id == id)
    }
}

/// The `v` sampled road points nearest to `position`, closest first.
pub fn nearest_road_points<T: Scalar>(
    map: &TopometricMap<T>,
    position: Point2<T>,
    v: usize,
) -> Result<Vec<Point2<T>>> {
    let idx = &map.network.road_points;
    if idx.is_empty() {
        return Err(Error::NoRoadPoints);
    }
    Ok(idx
        .nearest(position, v.max(1))
        .into_iter()
        .map(|i| idx.points()[i])
        .collect())
}

/// Isotropic scaling about a fixed center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity<T> {
    pub center: Point2<T>,
    pub factor: T,
}

impl<T: Scalar> Similarity<T> {
    pub fn identity() -> Self {
        Self {
            center: Point2::zero(),
            factor: T::one(),
        }
    }

    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        if self.factor == T::one() {
            return p;
        }
        self.center + (p - self.center) * self.factor
    }

    /// Scaling leaves headings unchanged.
    pub fn apply_pose(&self, pose: &Pose2<T>) -> Pose2<T> {
        let p = self.apply(pose.position());
        Pose2::new(p.x, p.y, pose.theta)
    }
}

/// The transform `scale_map` applies for a given factor.
pub fn scale_transform<T: Scalar>(map: &TopometricMap<T>, factor: T) -> Similarity<T> {
    Similarity {
        center: map.bounds.center(),
        factor,
    }
}

/// Scales every node, landmark and the bounds about the bounds centroid.
/// Road widths and topology are unchanged.
pub fn scale_map<T: Scalar>(map: &TopometricMap<T>, factor: T) -> Result<TopometricMap<T>> {
    if !(factor > T::zero() && factor.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale factor must be > 0, got {factor}"
        )));
    }
    if factor == T::one() {
        return Ok(map.clone());
    }
    let s = scale_transform(map, factor);
    let lo = s.apply(Point2::new(map.bounds.min_x, map.bounds.min_y));
    let hi = s.apply(Point2::new(map.bounds.max_x, map.bounds.max_y));
    Ok(TopometricMap {
        network: map.network.map_nodes(|p| s.apply(p)),
        landmarks: map
            .landmarks
            .iter()
            .map(|l| Landmark {
                position: s.apply(l.position),
                ..l.clone()
            })
            .collect(),
        bounds: Bounds {
            min_x: lo.x,
            min_y: lo.y,
            max_x: hi.x,
            max_y: hi.y,
        },
    })
}

fn frac_count(frac: f64, n: usize) -> usize {
    ((frac * n as f64) + 1e-9).floor() as usize
}

/// Simulates missing (false negative) and mislabeled (false positive) map
/// landmarks. Positions of surviving landmarks never change.
pub fn corrupt_landmarks<T: Scalar>(
    map: &TopometricMap<T>,
    fn_frac: f64,
    fp_frac: f64,
    seed: u64,
    vocab: &Vocabulary,
) -> Result<TopometricMap<T>> {
    let valid = |f: f64| (0.0..=1.0).contains(&f);
    if !valid(fn_frac) || !valid(fp_frac) || fn_frac + fp_frac > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "corruption fractions fn={fn_frac} fp={fp_frac} must lie in [0,1] and sum to <= 1"
        )));
    }
    let n = map.landmarks.len();
    let n_fn = frac_count(fn_frac, n);
    let n_fp = frac_count(fp_frac, n).min(n - n_fn);
    if n_fn == 0 && n_fp == 0 {
        return Ok(map.clone());
    }
    if n_fp > 0 && vocab.decoys().is_empty() {
        return Err(Error::InvalidArgument("vocabulary has no decoys".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut removed = vec![false; n];
    for i in sample(&mut rng, n, n_fn) {
        removed[i] = true;
    }
    let survivors: Vec<usize> = (0..n).filter(|&i| !removed[i]).collect();
    let mut relabel: Vec<Option<usize>> = vec![None; n];
    for j in sample(&mut rng, survivors.len(), n_fp) {
        relabel[survivors[j]] = Some(rng.random_range(0..vocab.decoys().len()));
    }
    let mut landmarks = Vec::with_capacity(n - n_fn);
    for &i in &survivors {
        let lm = &map.landmarks[i];
        match relabel[i] {
            Some(d) => landmarks.push(Landmark::new(lm.id, lm.position, &vocab.decoys()[d], vocab)?),
            None => landmarks.push(lm.clone()),
        }
    }
    Ok(TopometricMap {
        network: map.network.clone(),
        landmarks,
        bounds: map.bounds,
    })
}

/// Whether `target` lies within range and inside the viewing cone of `pose`.
#[inline]
pub fn in_view<T: Scalar>(pose: &Pose2<T>, target: Point2<T>, fov: T, max_range: T) -> bool {
    let d = target - pose.position();
    if d.norm() > max_range {
        return false;
    }
    if fov >= T::TAU() {
        return true;
    }
    let bearing = normalize_angle(d.y.atan2(d.x) - pose.theta);
    bearing.abs() <= fov * T::c(0.5)
}

/// Landmarks of `map` that may be seen from `pose`.
pub fn visible_landmarks<'a, T: Scalar>(
    map: &'a TopometricMap<T>,
    pose: &Pose2<T>,
    fov: T,
    max_range: T,
) -> Vec<&'a Landmark<T>> {
    map.landmarks
        .iter()
        .filter(|l| in_view(pose, l.position, fov, max_range))
        .collect()
}

/// Ground truth plus the (possibly corrupted) copy used for navigation.
#[derive(Debug, Clone)]
pub struct World<T = f64> {
    true_map: Arc<TopometricMap<T>>,
    nav_map: Arc<TopometricMap<T>>,
    nav_transform: Similarity<T>,
}

impl<T: Scalar> World<T> {
    pub fn new(map: TopometricMap<T>) -> Self {
        let map = Arc::new(map);
        Self {
            true_map: map.clone(),
            nav_map: map,
            nav_transform: Similarity::identity(),
        }
    }

    pub fn true_map(&self) -> &TopometricMap<T> {
        &self.true_map
    }

    pub fn nav_map(&self) -> &TopometricMap<T> {
        &self.nav_map
    }

    /// Maps ground-truth coordinates into the navigation map frame.
    pub fn nav_transform(&self) -> Similarity<T> {
        self.nav_transform
    }

    /// Replaces the navigation map with a scaled copy.
    pub fn with_scaled_nav(mut self, factor: T) -> Result<Self> {
        let nav = scale_map(&self.nav_map, factor)?;
        let s = scale_transform(&self.nav_map, factor);
        self.nav_transform = Similarity {
            center: s.center,
            factor: self.nav_transform.factor * factor,
        };
        self.nav_map = Arc::new(nav);
        Ok(self)
    }

    pub fn with_corrupted_nav(
        mut self,
        fn_frac: f64,
        fp_frac: f64,
        seed: u64,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        self.nav_map = Arc::new(corrupt_landmarks(&self.nav_map, fn_frac, fp_frac, seed, vocab)?);
        Ok(self)
    }
}
