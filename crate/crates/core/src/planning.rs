//! Route planning on the navigation map, local trajectory sampling against
//! the observed distance field, and the steering/speed controllers.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_sim, embed_text, Vocabulary};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, project_onto_segment, Point2, Pose2};
use crate::perception::EsdfSampler;
use crate::scalar::Scalar;
use crate::simulator::VehicleState;
use crate::world_model::{EdgeId, Landmark, NodeId, TopometricMap};

/// A position on the network: an edge and the arc length from its `a` node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snap<T> {
    pub edge: EdgeId,
    pub s: T,
}

/// Nearest centerline point over all edges; ties go to the lowest edge id.
pub fn snap_to_network<T: Scalar>(map: &TopometricMap<T>, point: Point2<T>) -> Result<Snap<T>> {
    let net = &map.network;
    let mut best: Option<(T, Snap<T>)> = None;
    for e in 0..net.edges().len() {
        let (a, b) = net.edge_endpoints(e);
        let pr = project_onto_segment(point, a, b);
        if best.map_or(true, |(d, _)| pr.distance < d) {
            best = Some((
                pr.distance,
                Snap {
                    edge: e,
                    s: pr.t * net.edge_length(e),
                },
            ));
        }
    }
    best.map(|(_, s)| s).ok_or(Error::EmptyMap)
}

pub fn snap_point<T: Scalar>(map: &TopometricMap<T>, snap: &Snap<T>) -> Point2<T> {
    let (a, b) = map.network.edge_endpoints(snap.edge);
    a.lerp(b, snap.s / map.network.edge_length(snap.edge))
}

/// Polyline route with cumulative arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route<T> {
    /// Graph nodes traversed between the spliced endpoints.
    pub nodes: Vec<NodeId>,
    pub points: Vec<Point2<T>>,
    pub cumulative: Vec<T>,
}

impl<T: Scalar> Route<T> {
    /// Builds a route through `points`, dropping consecutive duplicates.
    pub fn from_points(nodes: Vec<NodeId>, points: impl IntoIterator<Item = Point2<T>>) -> Self {
        let mut pts: Vec<Point2<T>> = Vec::new();
        for p in points {
            if pts.last().map_or(true, |&q| q.distance(p) > T::zero()) {
                pts.push(p);
            }
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut acc = T::zero();
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                acc += pts[i - 1].distance(*p);
            }
            cumulative.push(acc);
        }
        Self {
            nodes,
            points: pts,
            cumulative,
        }
    }

    /// Route through the given node sequence.
    pub fn from_nodes(map: &TopometricMap<T>, nodes: &[NodeId]) -> Result<Self> {
        let net = &map.network;
        for w in nodes.windows(2) {
            if !net.neighbors(w[0]).iter().any(|&(_, n)| n == w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "nodes {} and {} are not connected by an edge",
                    w[0], w[1]
                )));
            }
        }
        let pts = nodes
            .iter()
            .map(|&n| {
                net.node(n)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown node {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_points(nodes.to_vec(), pts))
    }

    pub fn length(&self) -> T {
        self.cumulative.last().copied().unwrap_or_else(T::zero)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn segment_at(&self, s: T) -> usize {
        let n = self.points.len();
        if n < 2 {
            return 0;
        }
        self.cumulative
            .partition_point(|&c| c <= s)
            .saturating_sub(1)
            .min(n - 2)
    }

    pub fn point_at(&self, s: T) -> Point2<T> {
        if self.points.len() < 2 {
            return self.points[0];
        }
        let s = s.max(T::zero()).min(self.length());
        let i = self.segment_at(s);
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        self.points[i].lerp(self.points[i + 1], (s - self.cumulative[i]) / seg)
    }

    pub fn heading_at(&self, s: T) -> T {
        if self.points.len() < 2 {
            return T::zero();
        }
        let i = self.segment_at(s.max(T::zero()).min(self.length()));
        let d = self.points[i + 1] - self.points[i];
        d.y.atan2(d.x)
    }

    /// Arc position of the closest route point and the signed lateral offset
    /// of `p` (positive to the left of the direction of travel).
    pub fn project(&self, p: Point2<T>) -> (T, T) {
        self.project_within(p, T::neg_infinity(), T::infinity())
    }

    /// Like [`Route::project`], restricted to arc positions in `[lo, hi]`.
    /// Keeps tracking stable on routes that pass the same place twice.
    pub fn project_within(&self, p: Point2<T>, lo: T, hi: T) -> (T, T) {
        if self.points.len() < 2 {
            return (T::zero(), T::zero());
        }
        let lo = lo.max(T::zero());
        let hi = hi.min(self.length()).max(lo);
        let mut best = (T::infinity(), lo, T::zero());
        for i in 0..self.points.len() - 1 {
            let (s_a, s_b) = (self.cumulative[i], self.cumulative[i + 1]);
            if s_b < lo || s_a > hi {
                continue;
            }
            let a = self.point_at(s_a.max(lo));
            let b = self.point_at(s_b.min(hi));
            let pr = project_onto_segment(p, a, b);
            if pr.distance < best.0 {
                let (ra, rb) = (self.points[i], self.points[i + 1]);
                let side = (rb - ra).cross(p - ra);
                let lat = if side < T::zero() { -pr.distance } else { pr.distance };
                let s = s_a.max(lo) + pr.t * a.distance(b);
                best = (pr.distance, s, lat);
            }
        }
        (best.1, best.2)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier<T> {
    f: T,
    g: T,
    node: u32,
}

impl<T: Scalar> Eq for Frontier<T> {}

impl<T: Scalar> Ord for Frontier<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then g, then node id
        other
            .f
            .partial_cmp(&self.f)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.g.partial_cmp(&self.g).unwrap_or(Ordering::Equal))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<T: Scalar> PartialOrd for Frontier<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest route between two snapped positions, found with A* under the
/// straight-line distance heuristic.
pub fn astar_route<T: Scalar>(map: &TopometricMap<T>, start: Snap<T>, goal: Snap<T>) -> Result<Route<T>> {
    let net = &map.network;
    if start.edge >= net.edges().len() || goal.edge >= net.edges().len() {
        return Err(Error::InvalidArgument("snap references a missing edge".into()));
    }
    let start_pt = snap_point(map, &start);
    let goal_pt = snap_point(map, &goal);
    if start.edge == goal.edge {
        return Ok(Route::from_points(Vec::new(), [start_pt, goal_pt]));
    }

    // Virtual goal node; reached from the goal edge's endpoints.
    const GOAL: u32 = u32::MAX;
    let ge = net.edges()[goal.edge];
    let glen = net.edge_length(goal.edge);
    let goal_links = [(ge.a, goal.s), (ge.b, glen - goal.s)];

    let h = |n: u32| -> T {
        if n == GOAL {
            T::zero()
        } else {
            net.node(n).unwrap().distance(goal_pt)
        }
    };

    let mut best_g: HashMap<u32, T> = HashMap::new();
    let mut parent: HashMap<u32, Option<u32>> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let se = net.edges()[start.edge];
    let slen = net.edge_length(start.edge);
    for (node, g) in [(se.a, start.s), (se.b, slen - start.s)] {
        if best_g.get(&node).map_or(true, |&old| g < old) {
            best_g.insert(node, g);
            parent.insert(node, None);
            heap.push(Frontier { f: g + h(node), g, node });
        }
    }

    while let Some(Frontier { g, node, .. }) = heap.pop() {
        if g > best_g[&node] {
            continue;
        }
        if node == GOAL {
            let mut nodes = Vec::new();
            let mut cur = parent[&GOAL];
            while let Some(n) = cur {
                nodes.push(n);
                cur = parent[&n];
            }
            nodes.reverse();
            let pts = std::iter::once(start_pt)
                .chain(nodes.iter().map(|&n| net.node(n).unwrap()))
                .chain(std::iter::once(goal_pt));
            return Ok(Route::from_points(nodes.clone(), pts.collect::<Vec<_>>()));
        }
        let mut relax = |next: u32, cost: T, heap: &mut BinaryHeap<Frontier<T>>| {
            let ng = g + cost;
            if best_g.get(&next).map_or(true, |&old| ng < old) {
                best_g.insert(next, ng);
                parent.insert(next, Some(node));
                heap.push(Frontier { f: ng + h(next), g: ng, node: next });
            }
        };
        for &(e, other) in net.neighbors(node) {
            relax(other, net.edge_length(e), &mut heap);
        }
        for &(n, cost) in &goal_links {
            if n == node {
                relax(GOAL, cost, &mut heap);
            }
        }
    }
    Err(Error::Unreachable)
}

/// Points every `spacing` meters along the route, starting at the projection
/// of `est_pose` and covering at most `horizon` meters.
pub fn waypoints_ahead<T: Scalar>(
    route: &Route<T>,
    est_pose: &Pose2<T>,
    horizon: T,
    spacing: T,
) -> Result<Vec<Point2<T>>> {
    if route.is_empty() {
        return Err(Error::EmptyRoute);
    }
    let (s0, _) = route.project(est_pose.position());
    waypoints_from(route, s0, horizon, spacing)
}

/// Waypoints starting at arc position `s0`.
pub fn waypoints_from<T: Scalar>(route: &Route<T>, s0: T, horizon: T, spacing: T) -> Result<Vec<Point2<T>>> {
    if route.is_empty() {
        return Err(Error::EmptyRoute);
    }
    if !(spacing > T::zero()) {
        return Err(Error::InvalidArgument("waypoint spacing must be > 0".into()));
    }
    let end = (s0 + horizon).min(route.length());
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let s = s0 + spacing * T::c(k as f64);
        if s > end + T::c(1e-9) {
            break;
        }
        out.push(route.point_at(s.min(end)));
        k += 1;
    }
    let last = route.point_at(end);
    if out.last().map_or(true, |&p| p.distance(last) > T::c(1e-9)) {
        out.push(last);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct FrenetParams<T> {
    pub d_max: T,
    pub d_step: T,
    pub c_safe: T,
    pub e_min: T,
    pub w_lat: T,
    pub w_obs: T,
    pub w_goal: T,
    /// Arc-length step between sampled states.
    pub sample_step: T,
    /// Speed assigned to sampled states when the vehicle is slower.
    pub min_speed: T,
}

impl<T: Scalar> Default for FrenetParams<T> {
    fn default() -> Self {
        Self {
            d_max: T::c(3.0),
            d_step: T::c(0.5),
            c_safe: T::c(1.5),
            e_min: T::c(0.3),
            w_lat: T::one(),
            w_obs: T::c(10.0),
            w_goal: T::one(),
            sample_step: T::one(),
            min_speed: T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState<T> {
    pub point: Point2<T>,
    pub heading: T,
    pub speed: T,
    pub time: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub states: Vec<TrajectoryState<T>>,
    pub lateral_offset: T,
    pub cost: T,
    /// Smallest field value over the checked states.
    pub min_clearance: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn points(&self) -> Vec<Point2<T>> {
        self.states.iter().map(|s| s.point).collect()
    }
}

/// Samples lateral-offset candidates around the waypoint polyline and
/// returns the cheapest one that keeps clear of obstacles. The first state
/// (the vehicle's own position) is not collision-checked.
pub fn plan_frenet<T: Scalar>(
    waypoints: &[Point2<T>],
    state: &VehicleState<T>,
    esdf: &EsdfSampler<'_, T>,
    params: &FrenetParams<T>,
) -> Result<Trajectory<T>> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 waypoints".into()));
    }
    if !(params.d_step > T::zero() && params.d_max >= T::zero() && params.sample_step > T::zero()) {
        return Err(Error::InvalidArgument("invalid frenet sampling parameters".into()));
    }
    let reference = Route::from_points(Vec::new(), waypoints.iter().copied());
    let length = reference.length();
    if !(length > T::zero()) {
        return Err(Error::InvalidArgument("waypoints span zero length".into()));
    }
    let (_, d0) = reference.project(state.pose.position());
    let speed = state.speed.max(params.min_speed);
    let samples = (length / params.sample_step).ceil().to_usize().unwrap_or(1).max(1);

    let steps = (params.d_max / params.d_step + T::c(1e-9)).floor().to_i64().unwrap_or(0);
    let mut best: Option<Trajectory<T>> = None;
    for k in -steps..=steps {
        let dc = params.d_step * T::c(k as f64);
        let mut states = Vec::with_capacity(samples + 1);
        let mut obstacle = T::zero();
        let mut clearance = T::infinity();
        for i in 0..=samples {
            let s = length * T::c(i as f64) / T::c(samples as f64);
            let tau = s / length;
            let blend = tau * tau * (T::c(3.0) - T::c(2.0) * tau);
            let dblend = T::c(6.0) * tau * (T::one() - tau) / length;
            let offset = d0 + (dc - d0) * blend;
            let heading_ref = reference.heading_at(s);
            let normal = Point2::new(-heading_ref.sin(), heading_ref.cos());
            let point = reference.point_at(s) + normal * offset;
            let heading = normalize_angle(heading_ref + ((dc - d0) * dblend).atan());
            if i > 0 {
                let e = esdf.sample(point);
                clearance = clearance.min(e);
                let gap = (params.c_safe - e).max(T::zero());
                obstacle += gap * gap;
            }
            states.push(TrajectoryState {
                point,
                heading,
                speed,
                time: s / speed,
            });
        }
        let cost = params.w_lat * dc * dc + params.w_obs * obstacle + params.w_goal * dc.abs();
        if !(clearance > params.e_min) || !cost.is_finite() {
            continue;
        }
        if best.as_ref().map_or(true, |b| cost < b.cost) {
            best = Some(Trajectory {
                states,
                lateral_offset: dc,
                cost,
                min_clearance: clearance,
            });
        }
    }
    best.ok_or(Error::NoFeasibleTrajectory)
}

/// Stanley law: `heading_error + atan2(k * cross_track, speed + v_soft)`,
/// clamped to `±max_steer`. `cross_track` is positive when the path lies to
/// the vehicle's left.
pub fn stanley_law<T: Scalar>(heading_error: T, cross_track: T, speed: T, k: T, v_soft: T, max_steer: T) -> T {
    let delta = heading_error + (k * cross_track).atan2(speed + v_soft);
    delta.max(-max_steer).min(max_steer)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct StanleyParams<T> {
    pub k: T,
    pub v_soft: T,
}

impl<T: Scalar> Default for StanleyParams<T> {
    fn default() -> Self {
        Self {
            k: T::c(2.0),
            v_soft: T::c(0.1),
        }
    }
}

/// Steering command tracking `traj` from the vehicle's front axle.
pub fn stanley_steer<T: Scalar>(state: &VehicleState<T>, traj: &Trajectory<T>, params: &StanleyParams<T>) -> T {
    let path = Route::from_points(Vec::new(), traj.states.iter().map(|s| s.point));
    if path.points.len() < 2 {
        return T::zero();
    }
    let front = state
        .pose
        .transform_point(Point2::new(state.wheelbase, T::zero()));
    let (s, lateral) = path.project(front);
    let heading_error = normalize_angle(path.heading_at(s) - state.pose.theta);
    stanley_law(heading_error, -lateral, state.speed, params.k, params.v_soft, state.max_steer)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct PidGains<T> {
    pub kp: T,
    pub ki: T,
    pub kd: T,
    /// Bound on the integral term.
    pub i_max: T,
    pub accel_min: T,
    pub accel_max: T,
}

impl<T: Scalar> Default for PidGains<T> {
    fn default() -> Self {
        Self {
            kp: T::c(1.0),
            ki: T::c(0.1),
            kd: T::c(0.05),
            i_max: T::c(1.0),
            accel_min: T::c(-4.0),
            accel_max: T::c(2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState<T> {
    /// Accumulated, already multiplied by `ki`.
    pub integral: T,
    pub prev_error: Option<T>,
}

pub fn pid_speed<T: Scalar>(target: T, current: T, gains: &PidGains<T>, dt: T, st: &mut PidState<T>) -> T {
    assert!(dt > T::zero(), "dt must be positive");
    let e = target - current;
    st.integral = (st.integral + gains.ki * e * dt).max(-gains.i_max).min(gains.i_max);
    let de = st.prev_error.map_or(T::zero(), |p| (e - p) / dt);
    st.prev_error = Some(e);
    (gains.kp * e + st.integral + gains.kd * de)
        .max(gains.accel_min)
        .min(gains.accel_max)
}

/// Landmark whose tag best matches a free-text query; ties go to the lowest id.
pub fn resolve_language_goal<'a, T: Scalar>(
    map: &'a TopometricMap<T>,
    query: &str,
    vocab: &Vocabulary,
) -> Result<&'a Landmark<T>> {
    let q = embed_text::<T>(query, vocab)?;
    let mut best: Option<(T, &Landmark<T>)> = None;
    for lm in &map.landmarks {
        let sim = cosine_sim(&q, &lm.text_feature);
        let better = match best {
            None => true,
            Some((b, cur)) => sim > b || (sim == b && lm.id < cur.id),
        };
        if better {
            best = Some((sim, lm));
        }
    }
    best.map(|(_, l)| l).ok_or(Error::NoLandmarks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::SynonymGroup;
    use crate::perception::{esdf, Grid2D, GridGeometry, OccupancyGrid};
    use crate::world_model::{Bounds, Edge, RoadNetwork};
    use std::collections::BTreeMap;

    fn map_from(nodes: &[(u32, f64, f64)], edges: &[(u32, u32)]) -> TopometricMap<f64> {
        let nodes: BTreeMap<_, _> = nodes.iter().map(|&(i, x, y)| (i, Point2::new(x, y))).collect();
        let edges = edges.iter().map(|&(a, b)| Edge { a, b, width: 6.0 }).collect();
        let net = RoadNetwork::new(nodes, edges).unwrap();
        let bounds = Bounds { min_x: -500.0, min_y: -500.0, max_x: 500.0, max_y: 500.0 };
        TopometricMap::new(net, vec![], bounds).unwrap()
    }

    fn car(pose: Pose2<f64>, speed: f64) -> VehicleState<f64> {
        VehicleState { speed, ..VehicleState::at_rest(pose, 2.7, 0.6) }
    }

    #[test]
    fn snap_cases() {
        let m = map_from(&[(0, 0.0, 0.0), (1, 100.0, 0.0), (2, 100.0, 50.0)], &[(0, 1), (1, 2)]);
        let s = snap_to_network(&m, Point2::new(100.0, 0.0)).unwrap();
        assert_eq!(s, Snap { edge: 0, s: 100.0 });
        let s = snap_to_network(&m, Point2::new(50.0, 3.0)).unwrap();
        assert_eq!(s, Snap { edge: 0, s: 50.0 });
    }

    #[test]
    fn astar_trivial_cases() {
        let m = map_from(&[(0, 0.0, 0.0), (1, 100.0, 0.0)], &[(0, 1)]);
        let a = Snap { edge: 0, s: 30.0 };
        let r = astar_route(&m, a, a).unwrap();
        assert_eq!(r.length(), 0.0);
        let r = astar_route(&m, Snap { edge: 0, s: 0.0 }, Snap { edge: 0, s: 100.0 }).unwrap();
        assert_eq!(r.length(), 100.0);
    }

    #[test]
    fn astar_splices_endpoints_and_rejects_disconnected() {
        let m = map_from(
            &[(0, 0.0, 0.0), (1, 100.0, 0.0), (2, 100.0, 100.0), (3, 300.0, 0.0), (4, 400.0, 0.0)],
            &[(0, 1), (1, 2), (3, 4)],
        );
        let r = astar_route(&m, Snap { edge: 0, s: 20.0 }, Snap { edge: 1, s: 40.0 }).unwrap();
        assert_eq!(r.nodes, vec![1]);
        assert!((r.length() - 120.0).abs() < 1e-12);
        assert_eq!(r.points[0], Point2::new(20.0, 0.0));
        assert_eq!(*r.points.last().unwrap(), Point2::new(100.0, 40.0));
        assert!(matches!(
            astar_route(&m, Snap { edge: 0, s: 1.0 }, Snap { edge: 2, s: 1.0 }),
            Err(Error::Unreachable)
        ));
    }

    #[test]
    fn waypoint_cases() {
        let route = Route::from_points(vec![], [Point2::new(0.0, 0.0), Point2::new(100.0, 0.0)]);
        let w = waypoints_ahead(&route, &Pose2::new(10.0, 1.0, 0.0), 15.0, 1.0).unwrap();
        assert_eq!(w.len(), 16);
        assert_eq!(w[0], Point2::new(10.0, 0.0));
        assert_eq!(*w.last().unwrap(), Point2::new(25.0, 0.0));

        let w = waypoints_ahead(&route, &Pose2::new(95.0, 0.0, 0.0), 15.0, 1.0).unwrap();
        assert_eq!(*w.last().unwrap(), Point2::new(100.0, 0.0));
        assert_eq!(w.len(), 6);

        let empty = Route::<f64>::from_points(vec![], []);
        assert!(matches!(waypoints_ahead(&empty, &Pose2::identity(), 15.0, 1.0), Err(Error::EmptyRoute)));
    }

    #[test]
    fn windowed_projection_on_revisiting_route() {
        let route = Route::<f64>::from_points(
            vec![],
            [Point2::new(0.0, 0.0), Point2::new(50.0, 0.0), Point2::new(50.0, 1.0), Point2::new(0.0, 1.0)],
        );
        let p = Point2::new(10.0, 0.6);
        assert!((route.project(p).0 - 91.0).abs() < 1e-9);
        let (s, lat) = route.project_within(p, 0.0, 30.0);
        assert!((s - 10.0).abs() < 1e-9);
        assert!((lat - 0.6).abs() < 1e-9);
    }

    #[test]
    fn waypoint_gaps_on_curved_route() {
        let pts: Vec<_> = (0..=40)
            .map(|i| {
                let a = i as f64 * 0.05;
                Point2::new(20.0 * a.cos(), 20.0 * a.sin())
            })
            .collect();
        let route = Route::from_points(vec![], pts);
        let w = waypoints_ahead(&route, &Pose2::new(20.0, 0.5, 1.6), 15.0, 1.0).unwrap();
        let mut arc = 0.0;
        for p in w.windows(2) {
            let gap = p[0].distance(p[1]);
            assert!(gap <= 1.0 + 1e-6);
            arc += gap;
        }
        assert!(arc <= 15.0 + 1.0);
    }

    fn road_grid(obstacle: Option<(f64, f64)>) -> Grid2D<f64, f64> {
        let g = GridGeometry::<f64>::centered(30.0, 15.0, 0.25).unwrap();
        let mut occ = OccupancyGrid::filled(g, true);
        for j in 0..g.height {
            for i in 0..g.width {
                let c = g.cell_center(i, j);
                let mut free = c.y.abs() <= 5.0;
                if let Some((x0, x1)) = obstacle {
                    if c.x >= x0 && c.x <= x1 && c.y.abs() <= 1.0 {
                        free = false;
                    }
                }
                if !free {
                    continue;
                }
                occ.set(i, j, false);
            }
        }
        esdf(&occ)
    }

    #[test]
    fn frenet_prefers_centerline_when_clear() {
        let grid = road_grid(None);
        let wps: Vec<_> = (0..=10).map(|i| Point2::new(i as f64, 0.0)).collect();
        let s = EsdfSampler::new(&grid, Pose2::identity(), -5.0);
        let t = plan_frenet(&wps, &car(Pose2::identity(), 5.0), &s, &FrenetParams::default()).unwrap();
        assert_eq!(t.lateral_offset, 0.0);
        assert!(t.states.len() >= 2);
    }

    #[test]
    fn frenet_swerves_around_obstacle() {
        let grid = road_grid(Some((6.0, 8.0)));
        let wps: Vec<_> = (0..=12).map(|i| Point2::new(i as f64, 0.0)).collect();
        let s = EsdfSampler::new(&grid, Pose2::identity(), -5.0);
        let p = FrenetParams::default();
        let t = plan_frenet(&wps, &car(Pose2::identity(), 5.0), &s, &p).unwrap();
        assert!(t.lateral_offset != 0.0);
        assert!(t.states[1..].iter().all(|st| s.sample(st.point) > p.e_min));

        let single = FrenetParams { d_max: 0.0, ..p };
        assert!(matches!(
            plan_frenet(&wps, &car(Pose2::identity(), 5.0), &s, &single),
            Err(Error::NoFeasibleTrajectory)
        ));
        let clear = road_grid(None);
        let s = EsdfSampler::new(&clear, Pose2::identity(), -5.0);
        assert_eq!(plan_frenet(&wps, &car(Pose2::identity(), 5.0), &s, &single).unwrap().lateral_offset, 0.0);
    }

    #[test]
    fn stanley_values() {
        assert_eq!(stanley_law(0.0, 0.0, 5.0, 2.0, 0.1, 0.6), 0.0);
        assert!((stanley_law::<f64>(0.1, 0.0, 5.0, 2.0, 0.1, 0.6) - 0.1).abs() < 1e-15);
        let d = stanley_law(0.0, 1.0, 5.0, 2.0, 0.1, 0.6);
        assert!((d - 2.0f64.atan2(5.1)).abs() < 1e-12);
        assert!((d - 0.373_5).abs() < 5e-4);
    }

    #[test]
    fn stanley_steers_towards_path() {
        let traj = Trajectory {
            states: (0..20)
                .map(|i| TrajectoryState { point: Point2::new(i as f64, 0.0), heading: 0.0, speed: 5.0, time: 0.0 })
                .collect(),
            lateral_offset: 0.0,
            cost: 0.0,
            min_clearance: 1.0,
        };
        let p = StanleyParams::default();
        assert_eq!(stanley_steer(&car(Pose2::new(0.0, 0.0, 0.0), 5.0), &traj, &p), 0.0);
        // left of the path -> steer right (negative)
        assert!(stanley_steer(&car(Pose2::new(0.0, 1.0, 0.0), 5.0), &traj, &p) < 0.0);
        assert!(stanley_steer(&car(Pose2::new(0.0, -1.0, 0.0), 5.0), &traj, &p) > 0.0);
    }

    #[test]
    fn pid_cases() {
        let g = PidGains::default();
        let mut st = PidState::default();
        assert_eq!(pid_speed(5.0, 5.0, &g, 0.1, &mut st), 0.0);
        let mut st = PidState::default();
        assert!(pid_speed(5.0, 3.0, &g, 0.1, &mut st) > 0.0);

        let gains = PidGains { kp: 0.0, kd: 0.0, ki: 0.3, i_max: 0.5, accel_min: -10.0, accel_max: 10.0 };
        let (e, dt) = (0.8, 0.1);
        for n in [1usize, 5, 20, 50] {
            let mut st = PidState::default();
            let mut out = 0.0;
            for _ in 0..n {
                out = pid_speed(e, 0.0, &gains, dt, &mut st);
            }
            let expect = (gains.ki * e * n as f64 * dt).min(gains.i_max);
            assert!((out - expect).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn language_goal_resolution() {
        let vocab = Vocabulary::new(
            64,
            0.2,
            vec![SynonymGroup { tags: vec!["bench".into(), "place where I can sit".into()] }],
            vec![],
        )
        .unwrap();
        let mut m = map_from(&[(0, 0.0, 0.0), (1, 100.0, 0.0)], &[(0, 1)]);
        assert!(matches!(resolve_language_goal(&m, "bench", &vocab), Err(Error::NoLandmarks)));
        m.landmarks = ["fountain", "bench", "stop sign", "mailbox"]
            .iter()
            .enumerate()
            .map(|(i, t)| Landmark::new(i as u32, Point2::new(10.0 * i as f64, 5.0), t, &vocab).unwrap())
            .collect();
        assert_eq!(resolve_language_goal(&m, "stop sign", &vocab).unwrap().id, 2);
        assert_eq!(resolve_language_goal(&m, "place where I can sit", &vocab).unwrap().id, 1);

        m.landmarks.truncate(1);
        assert_eq!(resolve_language_goal(&m, "anything at all", &vocab).unwrap().id, 0);
    }
}
