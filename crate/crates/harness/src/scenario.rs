//! Scenario files.
//!
//! A scenario is a TOML document naming a map and a vocabulary (paths are
//! relative to the scenario file) plus every knob of the simulation:
//!
//! ```toml
//! name = "reference"
//! map = "reference_map.json"
//! vocabulary = "reference_vocab.toml"
//! methods = ["deadreckon", "maplite", "altpilot_l", "altpilot"]
//! seeds = [0, 1, 2]
//! route = [0, 1, 2]
//! map_noise = 0.0     # nav map scaled by 1 + map_noise
//! fn_frac = 0.0
//! fp_frac = 0.0
//!
//! [goal]
//! kind = "point"
//! x = 120.0
//! y = 0.0
//!
//! [init]
//! mode = "start"
//! position_std = 1.0
//! heading_std = 0.03
//! ```
//!
//! Optional tables `[sim]`, `[rig]`, `[filter]` and `[planner]` override
//! defaults field by field. `filter.init` is ignored; `[init]` decides.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use toponav::embedding::{stable_hash, Vocabulary};
use toponav::localization::FilterConfig;
use toponav::planning::{FrenetParams, PidGains, StanleyParams};
use toponav::simulator::SensorRig;
use toponav::world_model::{load_map, NodeId, TopometricMap, World};
use toponav::Pose2d;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Deadreckon,
    Maplite,
    AltpilotL,
    Altpilot,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Deadreckon, Method::Maplite, Method::AltpilotL, Method::Altpilot];

    pub fn name(self) -> &'static str {
        match self {
            Method::Deadreckon => "deadreckon",
            Method::Maplite => "maplite",
            Method::AltpilotL => "altpilot_l",
            Method::Altpilot => "altpilot",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Goal {
    Point { x: f64, y: f64 },
    Node { id: NodeId },
    Text { query: String },
}

impl Goal {
    /// Parses the CLI's `x,y` form.
    pub fn parse_point(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::config(format!("goal must look like \"x,y\", got {s:?}"));
        if parts.len() != 2 {
            return Err(bad());
        }
        let x = parts[0].parse().map_err(|_| bad())?;
        let y = parts[1].parse().map_err(|_| bad())?;
        Ok(Goal::Point { x, y })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Gaussian around the true start pose (tracking).
    Start { position_std: f64, heading_std: f64 },
    /// Global: along the roads of the nav map.
    Road,
    /// Global: uniform over the map bounds.
    Bbox,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Start {
            position_std: 1.0,
            heading_std: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub dt: f64,
    /// Simulation steps between filter updates.
    pub filter_period: usize,
    pub cruise_speed: f64,
    /// Speed through sharp turns.
    pub turn_speed: f64,
    pub wheelbase: f64,
    pub max_steer: f64,
    /// Step budget as a multiple of the route's cruise time.
    pub budget_factor: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.1,
            filter_period: 5,
            cruise_speed: 8.0,
            turn_speed: 4.0,
            wheelbase: 2.7,
            max_steer: 0.6,
            budget_factor: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    pub horizon: f64,
    pub spacing: f64,
    /// Remaining route length at which the goal counts as reached.
    pub goal_tolerance: f64,
    pub decel: f64,
    pub frenet: FrenetParams<f64>,
    pub stanley: StanleyParams<f64>,
    pub pid: PidGains<f64>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            horizon: 15.0,
            spacing: 1.0,
            goal_tolerance: 2.0,
            decel: 1.5,
            frenet: FrenetParams::default(),
            stanley: StanleyParams::default(),
            pid: PidGains {
                kp: 2.0,
                ..PidGains::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub map: PathBuf,
    pub vocabulary: PathBuf,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub route: Vec<NodeId>,
    #[serde(default)]
    pub start: Option<StartPose>,
    #[serde(default)]
    pub goal: Option<Goal>,
    #[serde(default)]
    pub map_noise: f64,
    #[serde(default)]
    pub fn_frac: f64,
    #[serde(default)]
    pub fp_frac: f64,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub rig: SensorRig<f64>,
    #[serde(default)]
    pub filter: FilterConfig<f64>,
    #[serde(default)]
    pub planner: PlannerParams,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// A loaded, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub map: TopometricMap<f64>,
    pub vocab: Vocabulary,
    /// Hex digest of the scenario, map and vocabulary sources.
    pub hash: String,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_str_in(&text, dir, &path.display().to_string())
    }

    /// Parses scenario text whose relative paths resolve against `dir`.
    pub fn from_str_in(text: &str, dir: &Path, location: &str) -> Result<Self> {
        let mut file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::config(format!("{location}: {e}")))?;
        file.map = dir.join(&file.map);
        file.vocabulary = dir.join(&file.vocabulary);
        let vocab_text = std::fs::read_to_string(&file.vocabulary).map_err(|e| Error::io(&file.vocabulary, e))?;
        let vocab = Vocabulary::from_toml_str(&vocab_text, &file.vocabulary.display().to_string())?;
        let map_text = std::fs::read_to_string(&file.map).map_err(|e| Error::io(&file.map, e))?;
        let map = load_map(&file.map, &vocab)?;
        let mut digest = Vec::new();
        for part in [text, &map_text, &vocab_text] {
            digest.extend_from_slice(part.as_bytes());
            digest.push(0);
        }
        let scenario = Self {
            file,
            map,
            vocab,
            hash: format!("{:016x}", stable_hash(&digest)),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.file;
        if f.seeds.is_empty() {
            return Err(Error::config("scenario needs at least one seed"));
        }
        if f.methods.is_empty() {
            return Err(Error::config("scenario needs at least one method"));
        }
        if !(f.map_noise > -1.0) {
            return Err(Error::config("map_noise must be > -1"));
        }
        if !(f.sim.dt > 0.0) || f.sim.filter_period == 0 || !(f.sim.cruise_speed > 0.0) {
            return Err(Error::config("sim.dt, sim.filter_period and sim.cruise_speed must be positive"));
        }
        for &n in &f.route {
            if self.map.network.node(n).is_none() {
                return Err(Error::config(format!("route references unknown node {n}")));
            }
        }
        if f.route.is_empty() && f.start.is_none() {
            return Err(Error::config("scenario needs a route or a start pose"));
        }
        f.filter.validate()?;
        Ok(())
    }

    /// True start pose: explicit, or the first route node facing the second.
    pub fn start_pose(&self) -> Pose2d {
        if let Some(s) = self.file.start {
            return Pose2d::new(s.x, s.y, s.theta);
        }
        let net = &self.map.network;
        let a = net.node(self.file.route[0]).unwrap();
        let theta = match self.file.route.get(1) {
            Some(&n) => {
                let b = net.node(n).unwrap();
                (b.y - a.y).atan2(b.x - a.x)
            }
            None => 0.0,
        };
        Pose2d::new(a.x, a.y, theta)
    }

    /// The world for one seed: nav map scaled by the noise factor, then
    /// corrupted with the seed's corruption stream.
    pub fn world(&self, seed: u64) -> Result<World<f64>> {
        let mut world = World::new(self.map.clone());
        if self.file.map_noise != 0.0 {
            world = world.with_scaled_nav(1.0 + self.file.map_noise)?;
        }
        if self.file.fn_frac > 0.0 || self.file.fp_frac > 0.0 {
            let corruption_seed = stream_seed(seed, "corruption");
            world = world.with_corrupted_nav(self.file.fn_frac, self.file.fp_frac, corruption_seed, &self.vocab)?;
        }
        Ok(world)
    }
}

/// Seed of the named random stream for a run seed.
pub fn stream_seed(seed: u64, label: &str) -> u64 {
    stable_hash(format!("{seed}/{label}").as_bytes())
}

pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, label))
}
