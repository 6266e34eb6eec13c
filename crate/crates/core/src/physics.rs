//! Planar rigid-body world: a rod resting on a narrow pedestal and two
//! velocity-servoed two-finger grippers.
//!
//! The world lives in the vertical (x, z) plane. The rod is a rectangle of
//! `rod_length × rod_thickness` whose ends overhang a pedestal of half-width
//! `table_half_width`; each gripper pinches one overhanging end between an
//! upper and a lower finger tip. Contacts are penalty springs with viscous
//! Coulomb-clamped friction, integrated with semi-implicit Euler over
//! `substeps` sub-steps per control step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{wrap_angle, Vec2};

pub const NUM_AGENTS: usize = 2;
pub const UPPER_FINGER: usize = 0;
pub const LOWER_FINGER: usize = 1;

/// Pinch targets below this are treated as "open the fingers".
const PINCH_OPEN_THRESHOLD: f64 = 0.05;
/// Depth beyond which a rod corner is considered past the pedestal edge.
const MAX_SUPPORT_DEPTH: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryProfile {
    RectangularSlab,
    ThinCylinder,
}

impl std::str::FromStr for GeometryProfile {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slab" | "rectangular_slab" => Ok(GeometryProfile::RectangularSlab),
            "cylinder" | "thin_cylinder" => Ok(GeometryProfile::ThinCylinder),
            _ => Err(crate::error::Error::config(format!(
                "unknown geometry '{s}' (expected slab or cylinder)"
            ))),
        }
    }
}

impl GeometryProfile {
    /// Cross-section thickness of the default object for this profile.
    pub fn nominal_thickness(self) -> f64 {
        match self {
            GeometryProfile::RectangularSlab => 0.036,
            GeometryProfile::ThinCylinder => 0.02,
        }
    }

    /// Stiffness multiplier for the curved, lower-area cylinder contact.
    pub fn stiffness_factor(self) -> f64 {
        match self {
            GeometryProfile::RectangularSlab => 1.0,
            GeometryProfile::ThinCylinder => 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    /// Magnitude of gravitational acceleration, acting along -z.
    pub gravity: f64,
    /// Control step in seconds.
    pub dt: f64,
    /// Integration sub-steps per control step.
    pub substeps: u32,
    pub rod_length: f64,
    pub rod_thickness: f64,
    pub rod_mass: f64,
    /// Height of the pedestal top surface.
    pub table_height: f64,
    pub table_half_width: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    /// Viscous coefficient of the tangential contact term, N·s/m.
    pub friction_damping: f64,
    pub friction_mu: f64,
    /// Multiplier on the commanded pinch force.
    pub gripper_force_scale: f64,
    pub geometry_profile: GeometryProfile,
    /// Distance of each grasp point from the rod centre along the rod axis.
    pub grasp_offset: f64,
    /// First-order velocity servo time constant of the gripper base.
    pub servo_time_constant: f64,
    pub aperture_max: f64,
    /// Maximum finger opening/closing speed, m/s.
    pub aperture_speed: f64,
    /// Admittance gain of the pinch force loop, (m/s)/N.
    pub pinch_gain: f64,
    /// Normal force each finger needs for the grasp flag.
    pub grasp_force_min: f64,
    /// Half-widths of the uniform spawn offset around each grasp point.
    pub spawn_offset_x: f64,
    pub spawn_offset_z: f64,
    /// Gripper workspace box, `[x_min, x_max]` and `[z_min, z_max]`.
    pub workspace_x: [f64; 2],
    pub workspace_z: [f64; 2],
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            dt: 0.01,
            substeps: 10,
            rod_length: 0.72,
            rod_thickness: 0.036,
            rod_mass: 0.4,
            table_height: 0.4,
            table_half_width: 0.15,
            contact_stiffness: 5.0e3,
            contact_damping: 50.0,
            friction_damping: 80.0,
            friction_mu: 0.8,
            gripper_force_scale: 1.0,
            geometry_profile: GeometryProfile::RectangularSlab,
            grasp_offset: 0.28,
            servo_time_constant: 0.05,
            aperture_max: 0.10,
            aperture_speed: 0.4,
            pinch_gain: 0.05,
            grasp_force_min: 0.5,
            spawn_offset_x: 0.08,
            spawn_offset_z: 0.025,
            workspace_x: [-1.5, 1.5],
            workspace_z: [0.0, 2.0],
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gravity", self.gravity),
            ("dt", self.dt),
            ("rod_length", self.rod_length),
            ("rod_thickness", self.rod_thickness),
            ("rod_mass", self.rod_mass),
            ("table_half_width", self.table_half_width),
            ("contact_stiffness", self.contact_stiffness),
            ("contact_damping", self.contact_damping),
            ("friction_damping", self.friction_damping),
            ("gripper_force_scale", self.gripper_force_scale),
            ("servo_time_constant", self.servo_time_constant),
            ("aperture_max", self.aperture_max),
            ("aperture_speed", self.aperture_speed),
            ("pinch_gain", self.pinch_gain),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("world.{key} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("friction_mu", self.friction_mu),
            ("table_height", self.table_height),
            ("grasp_force_min", self.grasp_force_min),
            ("spawn_offset_x", self.spawn_offset_x),
            ("spawn_offset_z", self.spawn_offset_z),
        ];
        for (key, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("world.{key} must be >= 0, got {v}")));
            }
        }
        if self.substeps == 0 {
            return Err(Error::config("world.substeps must be >= 1"));
        }
        if self.grasp_offset <= self.table_half_width || self.grasp_offset >= self.rod_length / 2.0
        {
            return Err(Error::config(format!(
                "world.grasp_offset must lie on the overhang ({} .. {}), got {}",
                self.table_half_width,
                self.rod_length / 2.0,
                self.grasp_offset
            )));
        }
        if self.workspace_x[0] >= self.workspace_x[1] || self.workspace_z[0] >= self.workspace_z[1]
        {
            return Err(Error::config("world.workspace bounds must be increasing"));
        }
        Ok(())
    }

    pub fn substep(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    pub fn effective_stiffness(&self) -> f64 {
        self.contact_stiffness * self.geometry_profile.stiffness_factor()
    }

    pub fn rod_inertia(&self) -> f64 {
        self.rod_mass * (self.rod_length.powi(2) + self.rod_thickness.powi(2)) / 12.0
    }

    /// Centroid height of the rod lying flat on the pedestal.
    pub fn rest_height(&self) -> f64 {
        self.table_height + self.rod_thickness / 2.0
    }

    /// Side of the rod handled by `agent`: -1 for agent 0, +1 for agent 1.
    pub fn side(agent: usize) -> f64 {
        if agent == 0 {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodState {
    pub position: Vec2,
    /// Counter-clockwise tilt in (-π, π].
    pub tilt: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
}

impl RodState {
    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.tilt.is_finite()
            && self.linear_velocity.is_finite()
            && self.angular_velocity.is_finite()
    }

    pub fn to_world(&self, local: Vec2) -> Vec2 {
        self.position + local.rotate(self.tilt)
    }

    pub fn to_local(&self, world: Vec2) -> Vec2 {
        (world - self.position).rotate(-self.tilt)
    }

    /// Velocity of the rod material point located at `world`.
    pub fn point_velocity(&self, world: Vec2) -> Vec2 {
        self.linear_velocity + (world - self.position).perp() * self.angular_velocity
    }

    /// Unit vector along the rod's local +z axis.
    pub fn up(&self) -> Vec2 {
        Vec2::new(0.0, 1.0).rotate(self.tilt)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Finger tip separation.
    pub aperture: f64,
    pub aperture_rate: f64,
    pub grasp_flag: bool,
}

impl GripperState {
    pub fn finger_position(&self, finger: usize) -> Vec2 {
        let half = self.aperture / 2.0;
        let dz = if finger == UPPER_FINGER { half } else { -half };
        self.position + Vec2::new(0.0, dz)
    }

    pub fn finger_velocity(&self, finger: usize) -> Vec2 {
        let half = self.aperture_rate / 2.0;
        let dz = if finger == UPPER_FINGER { half } else { -half };
        self.velocity + Vec2::new(0.0, dz)
    }
}

/// What the rod is touching at a contact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactSource {
    Finger { agent: usize, finger: usize },
    Table,
    Floor,
}

/// A penalty contact acting on the rod.
///
/// `normal` points in the direction the contact pushes the rod,
/// `relative_velocity` is the velocity of the rod material point relative to
/// the other body, and `force` is the force applied to the rod.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub source: ContactSource,
    pub point: Vec2,
    pub penetration: f64,
    pub normal: Vec2,
    pub relative_velocity: Vec2,
    pub force: Vec2,
}

impl ContactPoint {
    pub fn normal_force(&self) -> f64 {
        self.force.dot(self.normal)
    }

    pub fn tangential_force(&self) -> f64 {
        self.force.dot(self.normal.perp())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub rod: RodState,
    pub grippers: [GripperState; NUM_AGENTS],
    pub contacts: Vec<ContactPoint>,
    pub sim_time: f64,
}

impl WorldState {
    pub fn is_finite(&self) -> bool {
        self.rod.is_finite()
            && self.grippers.iter().all(|g| {
                g.position.is_finite()
                    && g.velocity.is_finite()
                    && g.aperture.is_finite()
                    && g.aperture_rate.is_finite()
            })
            && self.contacts.iter().all(|c| c.force.is_finite())
            && self.sim_time.is_finite()
    }

    pub fn touches_support(&self) -> bool {
        self.contacts
            .iter()
            .any(|c| matches!(c.source, ContactSource::Table | ContactSource::Floor))
    }

    pub fn touches_floor(&self) -> bool {
        self.contacts
            .iter()
            .any(|c| matches!(c.source, ContactSource::Floor))
    }
}

/// Commanded gripper velocity and pinch force for one agent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentControl {
    pub velocity: Vec2,
    pub pinch: f64,
}

impl AgentControl {
    pub fn is_finite(&self) -> bool {
        self.velocity.is_finite() && self.pinch.is_finite()
    }
}

/// Penalty contact force on a body moving with `rel_velocity` relative to
/// the surface it touches; `normal` is the unit push-out direction.
pub fn contact_force(
    penetration: f64,
    rel_velocity: Vec2,
    normal: Vec2,
    config: &WorldConfig,
) -> Vec2 {
    if penetration <= 0.0 {
        return Vec2::ZERO;
    }
    let normal_speed = rel_velocity.dot(normal);
    let fn_ = (config.effective_stiffness() * penetration - config.contact_damping * normal_speed)
        .max(0.0);
    let tangent = normal.perp();
    let limit = config.friction_mu * fn_;
    let ft = (-config.friction_damping * rel_velocity.dot(tangent)).clamp(-limit, limit);
    normal * fn_ + tangent * ft
}

/// Grasp point of `agent` in world coordinates.
pub fn grasp_point(rod: &RodState, config: &WorldConfig, agent: usize) -> Vec2 {
    rod.to_world(Vec2::new(WorldConfig::side(agent) * config.grasp_offset, 0.0))
}

pub fn world_reset(config: &WorldConfig, seed: u64) -> Result<WorldState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rod = RodState {
        position: Vec2::new(0.0, config.rest_height()),
        tilt: 0.0,
        linear_velocity: Vec2::ZERO,
        angular_velocity: 0.0,
    };
    let mut grippers = [GripperState {
        position: Vec2::ZERO,
        velocity: Vec2::ZERO,
        aperture: config.aperture_max,
        aperture_rate: 0.0,
        grasp_flag: false,
    }; NUM_AGENTS];
    for (agent, g) in grippers.iter_mut().enumerate() {
        let dx = rng.random_range(-1.0..=1.0) * config.spawn_offset_x;
        let dz = rng.random_range(-1.0..=1.0) * config.spawn_offset_z;
        g.position = grasp_point(&rod, config, agent) + Vec2::new(dx, dz);
    }
    let mut state = WorldState {
        rod,
        grippers,
        contacts: Vec::new(),
        sim_time: 0.0,
    };
    collect_contacts(&state.rod, &state.grippers, config, &mut state.contacts);
    update_grasp_flags(&mut state, config);
    Ok(state)
}

/// Fill `out` with every active contact on the rod, in a fixed order:
/// fingers (agent-major), pedestal corners, rod corners on the pedestal,
/// rod corners on the floor.
fn collect_contacts(
    rod: &RodState,
    grippers: &[GripperState; NUM_AGENTS],
    config: &WorldConfig,
    out: &mut Vec<ContactPoint>,
) {
    out.clear();
    let half_len = config.rod_length / 2.0;
    let half_h = config.rod_thickness / 2.0;
    let up = rod.up();

    let mut push = |source, point: Vec2, penetration: f64, normal: Vec2, other_velocity: Vec2| {
        let relative_velocity = rod.point_velocity(point) - other_velocity;
        let force = contact_force(penetration, relative_velocity, normal, config);
        out.push(ContactPoint {
            source,
            point,
            penetration,
            normal,
            relative_velocity,
            force,
        });
    };

    for (agent, g) in grippers.iter().enumerate() {
        for finger in [UPPER_FINGER, LOWER_FINGER] {
            let p = g.finger_position(finger);
            let local = rod.to_local(p);
            if local.x.abs() > half_len {
                continue;
            }
            let (penetration, normal) = if finger == UPPER_FINGER {
                if !(0.0..half_h).contains(&local.z) {
                    continue;
                }
                (half_h - local.z, -up)
            } else {
                if !(local.z > -half_h && local.z <= 0.0) {
                    continue;
                }
                (local.z + half_h, up)
            };
            push(
                ContactSource::Finger { agent, finger },
                p,
                penetration,
                normal,
                g.finger_velocity(finger),
            );
        }
    }

    let w = config.table_half_width;
    for cx in [-w, w] {
        let corner = Vec2::new(cx, config.table_height);
        let local = rod.to_local(corner);
        if local.x.abs() <= half_len && local.z > -half_h && local.z <= 0.0 {
            push(ContactSource::Table, corner, local.z + half_h, up, Vec2::ZERO);
        }
    }

    let corners = [
        Vec2::new(-half_len, -half_h),
        Vec2::new(half_len, -half_h),
        Vec2::new(half_len, half_h),
        Vec2::new(-half_len, half_h),
    ];
    for local in &corners[..2] {
        let p = rod.to_world(*local);
        let depth = config.table_height - p.z;
        if p.x.abs() <= w && depth > 0.0 && depth < MAX_SUPPORT_DEPTH.min(half_h) {
            push(ContactSource::Table, p, depth, Vec2::new(0.0, 1.0), Vec2::ZERO);
        }
    }
    for local in &corners {
        let p = rod.to_world(*local);
        if p.z < 0.0 {
            push(ContactSource::Floor, p, -p.z, Vec2::new(0.0, 1.0), Vec2::ZERO);
        }
    }
}

fn update_grasp_flags(state: &mut WorldState, config: &WorldConfig) {
    let compression = finger_compression(&state.contacts);
    for (agent, g) in state.grippers.iter_mut().enumerate() {
        g.grasp_flag = compression[agent]
            .iter()
            .all(|&n| n >= config.grasp_force_min);
    }
}

/// Normal force magnitude on each finger, `[agent][finger]`.
fn finger_compression(contacts: &[ContactPoint]) -> [[f64; 2]; NUM_AGENTS] {
    let mut out = [[0.0; 2]; NUM_AGENTS];
    for c in contacts {
        if let ContactSource::Finger { agent, finger } = c.source {
            out[agent][finger] += c.normal_force();
        }
    }
    out
}

/// Advance the world by one control step.
pub fn world_step(
    state: &WorldState,
    controls: &[AgentControl; NUM_AGENTS],
    config: &WorldConfig,
) -> Result<WorldState> {
    if let Some((i, _)) = controls.iter().enumerate().find(|(_, c)| !c.is_finite()) {
        return Err(Error::Input(format!("non-finite control for agent {i}")));
    }
    let h = config.substep();
    let mass = config.rod_mass;
    let inertia = config.rod_inertia();
    let servo_alpha = (h / config.servo_time_constant).min(1.0);
    let gravity = Vec2::new(0.0, -config.gravity * mass);

    let mut rod = state.rod;
    let mut grippers = state.grippers;
    let mut contacts = Vec::with_capacity(12);

    for _ in 0..config.substeps {
        collect_contacts(&rod, &grippers, config, &mut contacts);

        let mut force = gravity;
        let mut torque = 0.0;
        for c in &contacts {
            force += c.force;
            torque += (c.point - rod.position).cross(c.force);
        }
        let squeeze = finger_elastic_compression(&contacts, config);

        rod.linear_velocity += force * (h / mass);
        rod.angular_velocity += torque * h / inertia;
        rod.position += rod.linear_velocity * h;
        rod.tilt = wrap_angle(rod.tilt + rod.angular_velocity * h);

        for (agent, g) in grippers.iter_mut().enumerate() {
            let ctrl = &controls[agent];
            g.velocity += (ctrl.velocity - g.velocity) * servo_alpha;
            let mut next = g.position + g.velocity * h;
            if next.x < config.workspace_x[0] || next.x > config.workspace_x[1] {
                next.x = next.x.clamp(config.workspace_x[0], config.workspace_x[1]);
                g.velocity.x = 0.0;
            }
            if next.z < config.workspace_z[0] || next.z > config.workspace_z[1] {
                next.z = next.z.clamp(config.workspace_z[0], config.workspace_z[1]);
                g.velocity.z = 0.0;
            }
            g.position = next;

            let target = ctrl.pinch.max(0.0) * config.gripper_force_scale;
            let commanded_rate = if target < PINCH_OPEN_THRESHOLD {
                config.aperture_speed
            } else {
                let measured = 0.5 * (squeeze[agent][0] + squeeze[agent][1]);
                -(config.pinch_gain * (target - measured))
                    .clamp(-config.aperture_speed, config.aperture_speed)
            };
            let next_aperture = (g.aperture + commanded_rate * h).clamp(0.0, config.aperture_max);
            g.aperture_rate = (next_aperture - g.aperture) / h;
            g.aperture = next_aperture;
        }
    }

    let mut next = WorldState {
        rod,
        grippers,
        contacts,
        sim_time: state.sim_time + config.dt,
    };
    collect_contacts(&next.rod, &next.grippers, config, &mut next.contacts);
    update_grasp_flags(&mut next, config);
    if !next.is_finite() {
        return Err(Error::NonFinite(format!(
            "world state became non-finite at t = {:.3}",
            next.sim_time
        )));
    }
    Ok(next)
}

/// Spring part of each finger's normal force; the pinch loop regulates this
/// so that contact damping does not feed back into the finger speed.
fn finger_elastic_compression(
    contacts: &[ContactPoint],
    config: &WorldConfig,
) -> [[f64; 2]; NUM_AGENTS] {
    let k = config.effective_stiffness();
    let mut out = [[0.0; 2]; NUM_AGENTS];
    for c in contacts {
        if let ContactSource::Finger { agent, finger } = c.source {
            out[agent][finger] += k * c.penetration;
        }
    }
    out
}

/// World-frame force each finger applies to the rod, `[agent][finger]`.
pub fn finger_forces(state: &WorldState) -> [[Vec2; 2]; NUM_AGENTS] {
    let mut out = [[Vec2::ZERO; 2]; NUM_AGENTS];
    for c in &state.contacts {
        if let ContactSource::Finger { agent, finger } = c.source {
            out[agent][finger] += c.force;
        }
    }
    out
}

/// Per-finger forces in the finger pad frame, flattened per agent as
/// `[upper shear, upper normal, lower shear, lower normal]`.
///
/// Shear is the force along world x that the finger applies to the rod;
/// normal is the pad compression (positive when pressing on the rod).
pub fn finger_sensor_forces(state: &WorldState) -> [[f64; 4]; NUM_AGENTS] {
    let forces = finger_forces(state);
    let mut out = [[0.0; 4]; NUM_AGENTS];
    for agent in 0..NUM_AGENTS {
        let upper = forces[agent][UPPER_FINGER];
        let lower = forces[agent][LOWER_FINGER];
        out[agent] = [upper.x, -upper.z, lower.x, lower.z];
    }
    out
}

/// Kinetic + gravitational + contact-spring energy of the rod.
pub fn rod_mechanical_energy(state: &WorldState, config: &WorldConfig) -> f64 {
    let rod = &state.rod;
    let kinetic = 0.5 * config.rod_mass * rod.linear_velocity.dot(rod.linear_velocity)
        + 0.5 * config.rod_inertia() * rod.angular_velocity.powi(2);
    let potential = config.rod_mass * config.gravity * rod.position.z;
    let elastic: f64 = state
        .contacts
        .iter()
        .map(|c| 0.5 * config.effective_stiffness() * c.penetration.powi(2))
        .sum();
    kinetic + potential + elastic
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_controls() -> [AgentControl; 2] {
        [AgentControl::default(); 2]
    }

    #[test]
    fn reset_is_deterministic_and_rests_on_table() {
        let cfg = WorldConfig::default();
        let a = world_reset(&cfg, 0).unwrap();
        let b = world_reset(&cfg, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rod.position.z, cfg.table_height + cfg.rod_thickness / 2.0);
        assert_eq!(a.rod.linear_velocity, Vec2::ZERO);
        assert_eq!(a.rod.angular_velocity, 0.0);
        assert!(a.contacts.is_empty());
    }

    #[test]
    fn reset_seeds_move_grippers() {
        let cfg = WorldConfig::default();
        let a = world_reset(&cfg, 0).unwrap();
        let b = world_reset(&cfg, 1).unwrap();
        assert_ne!(a.grippers[0].position.x, b.grippers[0].position.x);
        assert_ne!(a.grippers[1].position.x, b.grippers[1].position.x);
    }

    #[test]
    fn reset_rejects_invalid_config() {
        let cfg = WorldConfig {
            dt: 0.0,
            ..WorldConfig::default()
        };
        assert!(matches!(world_reset(&cfg, 0), Err(Error::Config(_))));
        let cfg = WorldConfig {
            rod_mass: -1.0,
            ..WorldConfig::default()
        };
        assert!(matches!(world_reset(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn contact_force_cases() {
        let cfg = WorldConfig::default();
        let n = Vec2::new(0.0, 1.0);
        assert_eq!(contact_force(0.0, Vec2::new(3.0, -2.0), n, &cfg), Vec2::ZERO);
        let p = 0.002;
        let f = contact_force(p, Vec2::ZERO, n, &cfg);
        assert_eq!(f, Vec2::new(0.0, cfg.contact_stiffness * p));
        // Large slip saturates on the Coulomb cone.
        let f = contact_force(p, Vec2::new(50.0, 0.0), n, &cfg);
        let expected = cfg.friction_mu * cfg.contact_stiffness * p;
        assert!((f.x.abs() - expected).abs() < 1e-12, "{} vs {}", f.x, expected);
        assert!(f.x < 0.0);
    }

    #[test]
    fn step_rejects_non_finite_controls() {
        let cfg = WorldConfig::default();
        let s = world_reset(&cfg, 3).unwrap();
        let mut c = zero_controls();
        c[1].pinch = f64::NAN;
        assert!(matches!(world_step(&s, &c, &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn finger_forces_empty_without_contacts() {
        let cfg = WorldConfig::default();
        let s = world_reset(&cfg, 0).unwrap();
        assert_eq!(finger_forces(&s), [[Vec2::ZERO; 2]; 2]);
        assert_eq!(finger_sensor_forces(&s), [[0.0; 4]; 2]);
    }

    #[test]
    fn single_finger_touch_is_local() {
        let cfg = WorldConfig::default();
        let mut s = world_reset(&cfg, 0).unwrap();
        // Drop agent 1's lower finger just inside the rod bottom face.
        let g = &mut s.grippers[1];
        g.aperture = cfg.aperture_max;
        let bottom = cfg.rest_height() - cfg.rod_thickness / 2.0;
        g.position = Vec2::new(cfg.grasp_offset, bottom + 0.001 + g.aperture / 2.0);
        collect_contacts(&s.rod, &s.grippers, &cfg, &mut s.contacts);
        let f = finger_forces(&s);
        let nonzero: Vec<_> = (0..2)
            .flat_map(|a| (0..2).map(move |k| (a, k)))
            .filter(|&(a, k)| f[a][k] != Vec2::ZERO)
            .collect();
        assert_eq!(nonzero, vec![(1, LOWER_FINGER)]);
    }

    #[test]
    fn pinch_opens_and_closes_fingers() {
        let cfg = WorldConfig::default();
        let mut s = world_reset(&cfg, 0).unwrap();
        let mut c = zero_controls();
        c[0].pinch = 10.0;
        for _ in 0..60 {
            s = world_step(&s, &c, &cfg).unwrap();
        }
        assert!(s.grippers[0].aperture < cfg.rod_thickness);
        assert_eq!(s.grippers[1].aperture, cfg.aperture_max);
    }
}
