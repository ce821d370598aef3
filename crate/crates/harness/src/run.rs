//! Open-loop localization runs and closed-loop navigation runs.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use toponav::geometry::{normalize_angle, Point2};
use toponav::localization::{
    estimate, init, predict, reweight_and_resample, score_particles, FilterConfig, InitMode, Observation,
    ObservationModel, ParticleSet, PoseEstimate,
};
use toponav::metrics::{RunLog, StepRecord};
use toponav::perception::{esdf, EsdfSampler};
use toponav::planning::{
    astar_route, pid_speed, plan_frenet, resolve_language_goal, snap_to_network, stanley_steer, waypoints_from,
    PidState, Route, Trajectory, TrajectoryState,
};
use toponav::simulator::{
    sense_landmarks, sense_odometry, sense_road_grid, step_kinematics, Control, FeaturePoint, OdometryDelta,
    VehicleState,
};
use toponav::world_model::{Similarity, TopometricMap, World};
use toponav::{EsdfGridd, Point2d, Pose2d};

use crate::error::{Error, Result};
use crate::scenario::{stream, Goal, InitSpec, Method, PlannerParams, Scenario, SimParams};

/// Speed below which the vehicle counts as stopped.
const STOPPED: f64 = 0.1;
/// Estimate-to-route distance that triggers a new A* search.
const REPLAN_DISTANCE: f64 = 10.0;

pub fn inverse_apply(s: &Similarity<f64>, p: Point2d) -> Point2d {
    s.center + (p - s.center) * (1.0 / s.factor)
}

/// One sensor snapshot.
pub struct Sensed {
    pub points: Vec<FeaturePoint<f64>>,
    pub esdf: EsdfGridd,
}

pub fn sense(
    world: &World<f64>,
    state: &VehicleState<f64>,
    scenario: &Scenario,
    rng: &mut ChaCha8Rng,
) -> Result<Sensed> {
    let rig = &scenario.file.rig;
    let points = sense_landmarks(world, state, rig, &scenario.vocab, rng)?;
    let occ = sense_road_grid(world, state, rig)?;
    Ok(Sensed {
        points,
        esdf: esdf(&occ),
    })
}

/// The particle filter as configured for one method.
pub struct Localizer {
    pub method: Method,
    pub cfg: FilterConfig<f64>,
    pub set: ParticleSet<f64>,
    rng: ChaCha8Rng,
}

impl Localizer {
    pub fn new(
        method: Method,
        base: &FilterConfig<f64>,
        init_spec: InitSpec,
        start_nav: Pose2d,
        nav_map: &TopometricMap<f64>,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        let mut cfg = *base;
        if method == Method::AltpilotL {
            cfg.lambda = 0.0;
        }
        cfg.init = match init_spec {
            InitSpec::Start {
                position_std,
                heading_std,
            } => InitMode::Pose {
                x: start_nav.x,
                y: start_nav.y,
                theta: start_nav.theta,
                position_std,
                heading_std,
            },
            InitSpec::Road => InitMode::Road,
            InitSpec::Bbox => InitMode::Bbox,
        };
        let set = init(nav_map, &cfg, &mut rng)?;
        Ok(Self { method, cfg, set, rng })
    }

    pub fn update(
        &mut self,
        odo: &OdometryDelta<f64>,
        sensed: &Sensed,
        nav_map: &TopometricMap<f64>,
        scenario: &Scenario,
    ) -> Result<()> {
        predict(&mut self.set, odo, &self.cfg, &mut self.rng);
        let model = match self.method {
            Method::Deadreckon => return Ok(()),
            Method::Maplite => ObservationModel::RoadOnly,
            Method::AltpilotL | Method::Altpilot => ObservationModel::Multimodal,
        };
        let obs = Observation {
            map: nav_map,
            points: &sensed.points,
            esdf: &sensed.esdf,
            fov: scenario.file.rig.fov,
            max_range: scenario.file.rig.max_range,
        };
        let scores = score_particles(&self.set, &obs, model, &self.cfg)?;
        reweight_and_resample(&mut self.set, &scores, &self.cfg, &mut self.rng)?;
        Ok(())
    }

    pub fn estimate(&self) -> PoseEstimate<f64> {
        estimate(&self.set)
    }
}

/// Follows a route with Stanley steering and PID speed control.
struct Tracker<'a> {
    route: Route<f64>,
    s: f64,
    pid: PidState<f64>,
    planner: &'a PlannerParams,
    sim: &'a SimParams,
}

struct Command {
    control: Control<f64>,
    remaining: f64,
}

impl<'a> Tracker<'a> {
    fn new(route: Route<f64>, planner: &'a PlannerParams, sim: &'a SimParams) -> Self {
        Self {
            route,
            s: 0.0,
            pid: PidState::default(),
            planner,
            sim,
        }
    }

    fn replace_route(&mut self, route: Route<f64>) {
        self.route = route;
        self.s = 0.0;
    }

    fn turn_ahead(&self, s: f64) -> f64 {
        let h0 = self.route.heading_at(s);
        (1..=10)
            .map(|k| normalize_angle(self.route.heading_at(s + 2.0 * k as f64) - h0).abs())
            .fold(0.0, f64::max)
    }

    /// `pose` is in the route's frame. With a sampler, the local trajectory
    /// comes from the Frenet planner; otherwise the waypoints are tracked.
    fn command(&mut self, pose: Pose2d, speed: f64, sampler: Option<&EsdfSampler<'_, f64>>) -> Result<Command> {
        let (s, _) = self
            .route
            .project_within(pose.position(), self.s - 5.0, self.s + 25.0);
        self.s = s;
        let remaining = self.route.length() - s;
        let p = self.planner;
        let wps = waypoints_from(&self.route, s, p.horizon, p.spacing)?;
        let state = VehicleState {
            pose,
            speed,
            steering: 0.0,
            wheelbase: self.sim.wheelbase,
            max_steer: self.sim.max_steer,
        };
        let traj = match sampler {
            Some(sampler) if wps.len() >= 2 => {
                plan_frenet(&wps, &state, sampler, &p.frenet).unwrap_or_else(|_| waypoint_trajectory(&wps, speed))
            }
            _ => waypoint_trajectory(&wps, speed),
        };
        let steer = stanley_steer(&state, &traj, &p.stanley);

        let mut target = self.sim.cruise_speed;
        if self.turn_ahead(s) > 0.35 {
            target = target.min(self.sim.turn_speed);
        }
        // the speed loop lags the profile by roughly half a second
        let stop_room = (remaining - 0.5 * p.goal_tolerance - 0.5 * speed).max(0.0);
        target = target.min((2.0 * p.decel * stop_room).sqrt());
        let accel = pid_speed(target, speed, &p.pid, self.sim.dt, &mut self.pid);
        Ok(Command {
            control: Control { accel, steer },
            remaining,
        })
    }
}

fn waypoint_trajectory(wps: &[Point2d], speed: f64) -> Trajectory<f64> {
    let states = wps
        .iter()
        .enumerate()
        .map(|(i, &point)| {
            let next = wps.get(i + 1).or_else(|| wps.get(i.wrapping_sub(1)));
            let heading = next.map_or(0.0, |&q| {
                let d = if wps.get(i + 1).is_some() { q - point } else { point - q };
                d.y.atan2(d.x)
            });
            TrajectoryState {
                point,
                heading,
                speed,
                time: 0.0,
            }
        })
        .collect();
    Trajectory {
        states,
        lateral_offset: 0.0,
        cost: 0.0,
        min_clearance: f64::INFINITY,
    }
}

/// A run log plus what the metrics need to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFile {
    pub scenario: String,
    pub scenario_hash: String,
    pub method: Method,
    pub seed: u64,
    /// Physical landmarks (id, x, y) expressed in the nav frame.
    pub landmarks: Vec<(u32, f64, f64)>,
    /// Requested goal in the nav frame, for closed-loop runs.
    pub goal: Option<Point2d>,
    pub log: RunLog<f64>,
}

impl LogFile {
    fn new(scenario: &Scenario, world: &World<f64>, method: Method, seed: u64) -> Self {
        let tf = world.nav_transform();
        let landmarks = world
            .true_map()
            .landmarks
            .iter()
            .map(|l| {
                let p = tf.apply(l.position);
                (l.id, p.x, p.y)
            })
            .collect();
        let mut log = RunLog::default();
        log.metadata.insert("scenario".into(), scenario.file.name.clone());
        log.metadata.insert("method".into(), method.name().into());
        log.metadata.insert("seed".into(), seed.to_string());
        Self {
            scenario: scenario.file.name.clone(),
            scenario_hash: scenario.hash.clone(),
            method,
            seed,
            landmarks,
            goal: None,
            log,
        }
    }
}

fn record(time: f64, gt_nav: Pose2d, est: PoseEstimate<f64>, distance: f64) -> StepRecord<f64> {
    StepRecord {
        time,
        gt: gt_nav,
        estimate: est,
        distance,
    }
}

fn budget_steps(length: f64, sim: &SimParams) -> usize {
    let seconds = sim.budget_factor * (length / sim.cruise_speed + 10.0);
    (seconds / sim.dt).ceil() as usize
}

/// Drives the scenario's ground-truth route while `method` localizes on the
/// nav map.
pub fn run_open_loop(scenario: &Scenario, method: Method, seed: u64) -> Result<LogFile> {
    let f = &scenario.file;
    let world = scenario.world(seed)?;
    let tf = world.nav_transform();
    let start = scenario.start_pose();
    let mut out = LogFile::new(scenario, &world, method, seed);

    let mut odo_rng = stream(seed, "sim/odometry");
    let mut sensor_rng = stream(seed, "sim/landmarks");
    let mut loc = Localizer::new(
        method,
        &f.filter,
        f.init,
        tf.apply_pose(&start),
        world.nav_map(),
        stream(seed, "filter"),
    )?;
    out.log.push(record(0.0, tf.apply_pose(&start), loc.estimate(), 0.0))?;
    if f.route.len() < 2 {
        return Ok(out);
    }
    let route = Route::from_nodes(world.true_map(), &f.route)?;
    if route.length() <= 0.0 {
        return Ok(out);
    }

    let mut state = VehicleState::at_rest(start, f.sim.wheelbase, f.sim.max_steer);
    let mut tracker = Tracker::new(route, &f.planner, &f.sim);
    let mut acc = OdometryDelta::zero();
    let mut distance = 0.0;
    let mut pending = false;
    let budget = budget_steps(tracker.route.length(), &f.sim);
    for k in 1..=budget {
        let cmd = tracker.command(state.pose, state.speed, None)?;
        if cmd.remaining <= f.planner.goal_tolerance && state.speed < STOPPED {
            break;
        }
        let next = step_kinematics(&state, cmd.control, f.sim.dt);
        let odo = sense_odometry(&state.pose, &next.pose, &f.rig.odometry, &mut odo_rng);
        distance += odo.translation();
        acc = acc.then(&odo);
        state = next;
        pending = true;
        if k % f.sim.filter_period == 0 {
            let sensed = sense(&world, &state, scenario, &mut sensor_rng)?;
            loc.update(&acc, &sensed, world.nav_map(), scenario)?;
            acc = OdometryDelta::zero();
            pending = false;
            out.log
                .push(record(k as f64 * f.sim.dt, tf.apply_pose(&state.pose), loc.estimate(), distance))?;
        }
    }
    if pending {
        // account for the tail since the last update
        let last_t = out.log.records.last().map_or(0.0, |r| r.time);
        let sensed = sense(&world, &state, scenario, &mut sensor_rng)?;
        loc.update(&acc, &sensed, world.nav_map(), scenario)?;
        out.log.push(record(
            last_t + f.sim.dt * f.sim.filter_period as f64,
            tf.apply_pose(&state.pose),
            loc.estimate(),
            distance,
        ))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavResult {
    pub method: Method,
    pub seed: u64,
    /// The stack declared the goal reached before the step budget ran out.
    pub success: bool,
    /// Ground-truth distance from the final vehicle position to the goal.
    pub goal_distance: f64,
    /// Ground-truth distance driven.
    pub path_length: f64,
    pub steps: usize,
    pub wall_time_s: f64,
    /// Landmark chosen for a text goal.
    pub goal_landmark: Option<u32>,
    pub error: Option<String>,
}

/// Resolves a goal to a nav-frame point and, for text goals, the landmark.
pub fn resolve_goal(goal: &Goal, scenario: &Scenario, nav: &TopometricMap<f64>) -> Result<(Point2d, Option<u32>)> {
    match goal {
        Goal::Point { x, y } => Ok((Point2::new(*x, *y), None)),
        Goal::Node { id } => nav
            .network
            .node(*id)
            .map(|p| (p, None))
            .ok_or_else(|| Error::config(format!("goal node {id} not in map"))),
        Goal::Text { query } => {
            let lm = resolve_language_goal(nav, query, &scenario.vocab)?;
            Ok((lm.position, Some(lm.id)))
        }
    }
}

/// Full stack: the filter estimate drives route following on the nav map
/// while the vehicle moves through the true world.
pub fn run_closed_loop(scenario: &Scenario, method: Method, seed: u64, goal: &Goal) -> Result<(NavResult, LogFile)> {
    let started = Instant::now();
    let f = &scenario.file;
    let world = scenario.world(seed)?;
    let tf = world.nav_transform();
    let start = scenario.start_pose();
    let mut out = LogFile::new(scenario, &world, method, seed);
    let (goal_nav, goal_landmark) = resolve_goal(goal, scenario, world.nav_map())?;
    out.goal = Some(goal_nav);
    let goal_true = match goal_landmark {
        Some(id) => world
            .true_map()
            .landmark(id)
            .map(|l| l.position)
            .unwrap_or_else(|| inverse_apply(&tf, goal_nav)),
        None => inverse_apply(&tf, goal_nav),
    };

    let mut odo_rng = stream(seed, "sim/odometry");
    let mut sensor_rng = stream(seed, "sim/landmarks");
    let mut loc = Localizer::new(
        method,
        &f.filter,
        f.init,
        tf.apply_pose(&start),
        world.nav_map(),
        stream(seed, "filter"),
    )?;
    let mut state = VehicleState::at_rest(start, f.sim.wheelbase, f.sim.max_steer);
    let mut est = loc.estimate();
    out.log.push(record(0.0, tf.apply_pose(&start), est, 0.0))?;

    let mut result = NavResult {
        method,
        seed,
        success: false,
        goal_distance: start.position().distance(goal_true),
        path_length: 0.0,
        steps: 0,
        wall_time_s: 0.0,
        goal_landmark,
        error: None,
    };
    let finish = |mut r: NavResult, state: &VehicleState<f64>| {
        r.goal_distance = state.pose.position().distance(goal_true);
        r.wall_time_s = started.elapsed().as_secs_f64();
        r
    };

    let nav = world.nav_map();
    let route = snap_to_network(nav, goal_nav).and_then(|goal_snap| {
        snap_to_network(nav, est.position)
            .and_then(|a| astar_route(nav, a, goal_snap))
            .map(|r| (r, goal_snap))
    });
    let (route, goal_snap) = match route {
        Ok(r) => r,
        Err(e) => {
            result.error = Some(e.to_string());
            return Ok((finish(result, &state), out));
        }
    };

    let mut sensed = sense(&world, &state, scenario, &mut sensor_rng)?;
    let mut anchor = est.pose();
    let mut tracker = Tracker::new(route, &f.planner, &f.sim);
    let mut acc = OdometryDelta::zero();
    let mut distance = 0.0;
    let budget = budget_steps(tracker.route.length(), &f.sim);
    for k in 1..=budget + 1 {
        let est_now = anchor.compose(&acc.as_pose());
        let sampler = EsdfSampler::new(&sensed.esdf, anchor, f.filter.outside_value);
        let cmd = tracker.command(est_now, state.speed, Some(&sampler))?;
        if cmd.remaining <= f.planner.goal_tolerance && state.speed < STOPPED {
            result.success = true;
            break;
        }
        if k > budget {
            break;
        }
        let next = step_kinematics(&state, cmd.control, f.sim.dt);
        let odo = sense_odometry(&state.pose, &next.pose, &f.rig.odometry, &mut odo_rng);
        distance += odo.translation();
        result.path_length += state.pose.position().distance(next.pose.position());
        acc = acc.then(&odo);
        state = next;
        result.steps = k;
        if k % f.sim.filter_period == 0 {
            sensed = sense(&world, &state, scenario, &mut sensor_rng)?;
            loc.update(&acc, &sensed, nav, scenario)?;
            acc = OdometryDelta::zero();
            est = loc.estimate();
            anchor = est.pose();
            if tracker.route.project(est.position).1.abs() > REPLAN_DISTANCE {
                // a failed replan keeps the old route
                if let Ok(r) = snap_to_network(nav, est.position).and_then(|a| astar_route(nav, a, goal_snap)) {
                    tracker.replace_route(r);
                }
            }
            out.log
                .push(record(k as f64 * f.sim.dt, tf.apply_pose(&state.pose), est, distance))?;
        }
    }
    Ok((finish(result, &state), out))
}
