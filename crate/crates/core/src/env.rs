//! Two-agent grasp-lift-transport task on top of the planar world.
//!
//! Each control step clamps both actions, advances the physics, runs the
//! sense → delta → ternarize pipeline, builds the per-agent observations for
//! the configured [`ForceVariant`], scores the step and checks termination.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec2;
use crate::physics::{
    self, grasp_point, world_reset, world_step, AgentControl, GeometryProfile, WorldConfig,
    WorldState, NUM_AGENTS,
};
use crate::sensing::{
    delta, sense, ternarize, DeltaForce, ForceFrame, SensorConfig, TernaryFrame, FORCE_DIM,
};

pub const OBS_DIM: usize = 18;
/// Channels before the force block.
pub const NON_FORCE_DIM: usize = OBS_DIM - FORCE_DIM;
pub const PRIVILEGED_DIM: usize = NUM_AGENTS * OBS_DIM + NUM_AGENTS * FORCE_DIM;
pub const ACTION_DIM: usize = 3;

/// Offsets of the named blocks inside an [`AgentObservation`].
pub mod layout {
    pub const GRIPPER_POSITION: usize = 0;
    pub const GRIPPER_VELOCITY: usize = 2;
    pub const APERTURE: usize = 4;
    pub const APERTURE_RATE: usize = 5;
    pub const GRASP_FLAG: usize = 6;
    /// Own grasp point relative to the gripper.
    pub const GRASP_POINT: usize = 7;
    /// Rod centroid relative to its initial resting position.
    pub const ROD_POSITION: usize = 9;
    pub const ROD_TILT: usize = 11;
    /// Target relative to the rod centroid.
    pub const TARGET: usize = 12;
    pub const FORCE: usize = 14;
}

/// What the force block of an observation carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceVariant {
    Raw,
    Ternary,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentObservation {
    pub variant: ForceVariant,
    pub values: [f64; OBS_DIM],
}

impl AgentObservation {
    pub fn non_force(&self) -> &[f64] {
        &self.values[..NON_FORCE_DIM]
    }

    pub fn force(&self) -> &[f64] {
        &self.values[layout::FORCE..]
    }
}

/// Both agents' ternary-channel observations followed by both delta forces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivilegedObservation {
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub velocity: Vec2,
    pub pinch: f64,
}

impl AgentAction {
    /// Map an unbounded policy output to a command: the first two entries
    /// scale the velocity limit, the third maps [-1, 1] onto [0, max_pinch].
    pub fn from_policy_output(out: &[f64], task: &TaskConfig) -> Self {
        AgentAction {
            velocity: Vec2::new(out[0], out[1]) * task.max_speed,
            pinch: 0.5 * (out[2] + 1.0) * task.max_pinch,
        }
        .clamped(task)
    }

    pub fn clamped(&self, task: &TaskConfig) -> Self {
        let v = task.max_speed;
        let clamp = |x: f64, lo: f64, hi: f64| if x.is_nan() { 0.0 } else { x.clamp(lo, hi) };
        AgentAction {
            velocity: Vec2::new(clamp(self.velocity.x, -v, v), clamp(self.velocity.z, -v, v)),
            pinch: clamp(self.pinch, 0.0, task.max_pinch),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub reach: f64,
    pub grasp: f64,
    pub grasp_team: f64,
    pub lift: f64,
    pub pos: f64,
    pub ori: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn terms(&self) -> [f64; 6] {
        [
            self.reach,
            self.grasp,
            self.grasp_team,
            self.lift,
            self.pos,
            self.ori,
        ]
    }

    pub const TERM_NAMES: [&'static str; 6] = ["reach", "grasp", "grasp_team", "lift", "pos", "ori"];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    /// Weights of reach, grasp, team grasp, lift, position and orientation.
    pub weights: [f64; 6],
    /// Target offset ranges relative to the initial rod position.
    pub target_x_range: [f64; 2],
    pub target_z_range: [f64; 2],
    pub success_threshold: f64,
    pub success_hold_steps: u32,
    /// Episode length in control steps.
    pub horizon: u32,
    /// Rod centroid clearance above the table needed for the lift term.
    pub lift_height: f64,
    /// Physics steps per control step.
    pub action_repeat: u32,
    pub max_speed: f64,
    pub max_pinch: f64,
    /// Length scale of the exponential distance shaping.
    pub shaping_length: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            weights: [3.0, 4.0, 7.5, 9.5, 20.0, 3.0],
            target_x_range: [-0.20, 0.20],
            target_z_range: [0.45, 0.80],
            success_threshold: 0.06,
            success_hold_steps: 50,
            horizon: 1000,
            lift_height: 0.1,
            action_repeat: 1,
            max_speed: 0.5,
            max_pinch: 20.0,
            shaping_length: 0.2,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("task.weights must be non-negative"));
        }
        if self.success_threshold.is_nan() || self.success_threshold <= 0.0 {
            return Err(Error::config("task.success_threshold must be > 0"));
        }
        if self.horizon == 0 {
            return Err(Error::config("task.horizon must be > 0"));
        }
        if self.action_repeat == 0 {
            return Err(Error::config("task.action_repeat must be >= 1"));
        }
        for (key, r) in [
            ("target_x_range", self.target_x_range),
            ("target_z_range", self.target_z_range),
        ] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::config(format!("task.{key} must be an ordered pair")));
            }
        }
        for (key, v) in [
            ("max_speed", self.max_speed),
            ("max_pinch", self.max_pinch),
            ("shaping_length", self.shaping_length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("task.{key} must be > 0")));
            }
        }
        Ok(())
    }
}

/// World, sensor and task configuration of one environment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub world: WorldConfig,
    pub sensor: SensorConfig,
    pub task: TaskConfig,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.sensor.validate()?;
        self.task.validate()
    }
}

/// A change to the grasping environment applied at evaluation time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Variation {
    ForceScale(f64),
    Geometry(GeometryProfile),
}

impl fmt::Display for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variation::ForceScale(s) => write!(f, "force_scale={s}"),
            Variation::Geometry(GeometryProfile::RectangularSlab) => write!(f, "geometry=slab"),
            Variation::Geometry(GeometryProfile::ThinCylinder) => write!(f, "geometry=cylinder"),
        }
    }
}

impl FromStr for Variation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("unknown variation descriptor '{s}'")))?;
        match key.trim() {
            "force_scale" => {
                let v: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad force scale '{value}'")))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::config(format!("force scale must be > 0, got {v}")));
                }
                Ok(Variation::ForceScale(v))
            }
            "geometry" => value.parse().map(Variation::Geometry),
            _ => Err(Error::config(format!("unknown variation descriptor '{s}'"))),
        }
    }
}

/// Label of a variation list as used in result tables.
pub fn variation_label(variations: &[Variation]) -> String {
    if variations.is_empty() {
        "nominal".to_string()
    } else {
        variations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Return `config` with each variation applied in order.
pub fn apply_variation(config: &EnvConfig, variations: &[Variation]) -> Result<EnvConfig> {
    let mut out = config.clone();
    for v in variations {
        match *v {
            Variation::ForceScale(s) => {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::config(format!("force scale must be > 0, got {s}")));
                }
                out.world.gripper_force_scale = s;
            }
            Variation::Geometry(profile) => {
                out.world.geometry_profile = profile;
                out.world.rod_thickness = profile.nominal_thickness();
            }
        }
    }
    out.validate()?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Success,
    Dropped,
    Timeout,
}

impl Outcome {
    pub fn is_done(self) -> bool {
        self != Outcome::Running
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::Running => "running",
            Outcome::Success => "success",
            Outcome::Dropped => "dropped",
            Outcome::Timeout => "timeout",
        };
        f.write_str(s)
    }
}

/// Stateful success/drop/timeout detection across an episode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TerminationTracker {
    hold_steps: u32,
    lifted: bool,
}

/// Rod clearance above the resting height that counts as "lifted".
const LIFTED_CLEARANCE: f64 = 0.02;

impl TerminationTracker {
    pub fn check_termination(
        &mut self,
        world: &WorldState,
        target: Vec2,
        t: u32,
        world_config: &WorldConfig,
        task: &TaskConfig,
    ) -> Outcome {
        let distance = world.rod.position.distance(target);
        if distance < task.success_threshold {
            self.hold_steps += 1;
        } else {
            self.hold_steps = 0;
        }
        let supported = world.touches_support();
        if !supported && world.rod.position.z > world_config.rest_height() + LIFTED_CLEARANCE {
            self.lifted = true;
        }
        if self.hold_steps >= task.success_hold_steps {
            Outcome::Success
        } else if world.touches_floor() || (self.lifted && supported) {
            Outcome::Dropped
        } else if t >= task.horizon {
            Outcome::Timeout
        } else {
            Outcome::Running
        }
    }
}

pub fn compute_reward(
    world: &WorldState,
    target: Vec2,
    world_config: &WorldConfig,
    task: &TaskConfig,
) -> [RewardBreakdown; NUM_AGENTS] {
    let both = world.grippers.iter().all(|g| g.grasp_flag);
    let gate = if both { 1.0 } else { 0.0 };
    let rod = &world.rod;
    let lifted = both && rod.position.z > world_config.table_height + task.lift_height;
    let pos = (-rod.position.distance(target) / task.shaping_length).exp();
    let mut out = [RewardBreakdown::default(); NUM_AGENTS];
    for (agent, r) in out.iter_mut().enumerate() {
        let g = &world.grippers[agent];
        let reach_dist = g.position.distance(grasp_point(rod, world_config, agent));
        r.reach = (-reach_dist / task.shaping_length).exp();
        r.grasp = if g.grasp_flag { 1.0 } else { 0.0 };
        r.grasp_team = gate;
        r.lift = if lifted { 1.0 } else { 0.0 };
        r.pos = gate * pos;
        r.ori = -gate * rod.tilt.abs();
        r.total = weighted_total(&r.terms(), &task.weights);
    }
    out
}

pub fn weighted_total(terms: &[f64; 6], weights: &[f64; 6]) -> f64 {
    terms.iter().zip(weights).map(|(t, w)| t * w).sum()
}

/// Sensed, delta and ternary forces of the latest step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceSnapshot {
    pub sensed: ForceFrame,
    pub delta: DeltaForce,
    pub ternary: TernaryFrame,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observations: [AgentObservation; NUM_AGENTS],
    pub privileged: PrivilegedObservation,
    pub rewards: [RewardBreakdown; NUM_AGENTS],
    pub done: bool,
    pub outcome: Outcome,
    pub forces: ForceSnapshot,
    /// Distance between rod centroid and target after the step.
    pub position_error: f64,
}

/// One task instance; reset before the first step.
#[derive(Clone, Debug)]
pub struct GraspEnv {
    config: EnvConfig,
    variant: ForceVariant,
    state: WorldState,
    origin: Vec2,
    target: Vec2,
    noise_rng: ChaCha8Rng,
    forces: ForceSnapshot,
    t: u32,
    tracker: TerminationTracker,
    done: bool,
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over (seed, stream)
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl GraspEnv {
    pub fn new(config: EnvConfig, variant: ForceVariant) -> Result<Self> {
        config.validate()?;
        let state = world_reset(&config.world, 0)?;
        let origin = state.rod.position;
        let zero_frame = ForceFrame {
            t: 0,
            values: [[0.0; FORCE_DIM]; NUM_AGENTS],
        };
        Ok(Self {
            config,
            variant,
            state,
            origin,
            target: origin,
            noise_rng: ChaCha8Rng::seed_from_u64(0),
            forces: ForceSnapshot {
                sensed: zero_frame,
                delta: DeltaForce::default(),
                ternary: TernaryFrame::default(),
            },
            t: 0,
            tracker: TerminationTracker::default(),
            done: true,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn variant(&self) -> ForceVariant {
        self.variant
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn target(&self) -> Vec2 {
        self.target
    }

    pub fn forces(&self) -> &ForceSnapshot {
        &self.forces
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn position_error(&self) -> f64 {
        self.state.rod.position.distance(self.target)
    }

    pub fn reset(
        &mut self,
        seed: u64,
    ) -> Result<([AgentObservation; NUM_AGENTS], PrivilegedObservation)> {
        self.state = world_reset(&self.config.world, derive_seed(seed, 1))?;
        self.origin = self.state.rod.position;
        let mut target_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
        let task = &self.config.task;
        let dx = sample_range(&mut target_rng, task.target_x_range);
        let dz = sample_range(&mut target_rng, task.target_z_range);
        self.target = self.origin + Vec2::new(dx, dz);
        self.noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
        let true_forces = physics::finger_sensor_forces(&self.state);
        let sensed = sense(&true_forces, &self.config.sensor, 0, &mut self.noise_rng);
        // The history starts with a copy of the first frame, so the first delta is zero.
        let previous = ForceFrame { t: -1, ..sensed };
        let d = delta(&sensed, &previous)?;
        self.forces = ForceSnapshot {
            sensed,
            delta: d,
            ternary: ternarize(&d, self.config.sensor.epsilon()),
        };
        self.t = 0;
        self.tracker = TerminationTracker::default();
        self.done = false;
        Ok((self.observations(self.variant), self.privileged()))
    }

    pub fn step(&mut self, actions: &[AgentAction; NUM_AGENTS]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Lifecycle(
                "step called on a finished episode; call reset first".into(),
            ));
        }
        let task = &self.config.task;
        let controls = actions.map(|a| {
            let a = a.clamped(task);
            AgentControl {
                velocity: a.velocity,
                pinch: a.pinch,
            }
        });
        for _ in 0..task.action_repeat {
            self.state = world_step(&self.state, &controls, &self.config.world)?;
        }
        self.t += 1;

        let true_forces = physics::finger_sensor_forces(&self.state);
        let sensed = sense(
            &true_forces,
            &self.config.sensor,
            self.t as i64,
            &mut self.noise_rng,
        );
        let d = delta(&sensed, &self.forces.sensed)?;
        self.forces = ForceSnapshot {
            sensed,
            delta: d,
            ternary: ternarize(&d, self.config.sensor.epsilon()),
        };

        let rewards = compute_reward(&self.state, self.target, &self.config.world, task);
        let outcome = self.tracker.check_termination(
            &self.state,
            self.target,
            self.t,
            &self.config.world,
            task,
        );
        self.done = outcome.is_done();
        Ok(StepResult {
            observations: self.observations(self.variant),
            privileged: self.privileged(),
            rewards,
            done: self.done,
            outcome,
            forces: self.forces,
            position_error: self.position_error(),
        })
    }

    /// Observations of both agents with the force block filled per `variant`.
    pub fn observations(&self, variant: ForceVariant) -> [AgentObservation; NUM_AGENTS] {
        std::array::from_fn(|agent| self.observation(agent, variant))
    }

    fn observation(&self, agent: usize, variant: ForceVariant) -> AgentObservation {
        use layout::*;
        let g = &self.state.grippers[agent];
        let rod = &self.state.rod;
        let gp = grasp_point(rod, &self.config.world, agent) - g.position;
        let rod_rel = rod.position - self.origin;
        let to_target = self.target - rod.position;
        let mut v = [0.0; OBS_DIM];
        v[GRIPPER_POSITION] = g.position.x;
        v[GRIPPER_POSITION + 1] = g.position.z;
        v[GRIPPER_VELOCITY] = g.velocity.x;
        v[GRIPPER_VELOCITY + 1] = g.velocity.z;
        v[APERTURE] = g.aperture;
        v[APERTURE_RATE] = g.aperture_rate;
        v[GRASP_FLAG] = if g.grasp_flag { 1.0 } else { 0.0 };
        v[GRASP_POINT] = gp.x;
        v[GRASP_POINT + 1] = gp.z;
        v[ROD_POSITION] = rod_rel.x;
        v[ROD_POSITION + 1] = rod_rel.z;
        v[ROD_TILT] = rod.tilt;
        v[TARGET] = to_target.x;
        v[TARGET + 1] = to_target.z;
        let force = &mut v[FORCE..];
        match variant {
            ForceVariant::Raw => force.copy_from_slice(&self.forces.sensed.values[agent]),
            ForceVariant::Ternary => {
                for (f, &t) in force.iter_mut().zip(&self.forces.ternary.values[agent]) {
                    *f = t as f64;
                }
            }
            ForceVariant::None => {}
        }
        AgentObservation { variant, values: v }
    }

    pub fn privileged(&self) -> PrivilegedObservation {
        let mut values = Vec::with_capacity(PRIVILEGED_DIM);
        for obs in self.observations(ForceVariant::Ternary) {
            values.extend_from_slice(&obs.values);
        }
        for d in &self.forces.delta.values {
            values.extend_from_slice(d);
        }
        PrivilegedObservation { values }
    }
}

fn sample_range<R: Rng>(rng: &mut R, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..=range[1])
    }
}
