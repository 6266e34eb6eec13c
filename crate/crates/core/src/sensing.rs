//! Finger force sensing and its derived representations: frame-to-frame
//! delta force and the ternary {-1, 0, 1} discretization of that delta.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::NUM_AGENTS;

/// Force channels per agent: two fingers, two axes each.
pub const FORCE_DIM: usize = 4;

/// Smallest deadband used when the sensor is noise free, in Newtons.
/// Integrator round-off would otherwise flip signs at rest.
pub const MIN_DEADBAND: f64 = 0.01;

pub type AgentForces = [f64; FORCE_DIM];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub noise_std: f64,
    pub gain: f64,
    pub bias: f64,
    /// Explicit deadband; `None` means `max(2 * noise_std, MIN_DEADBAND)`.
    pub deadband_epsilon: Option<f64>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            noise_std: 0.0,
            gain: 1.0,
            bias: 0.0,
            deadband_epsilon: None,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::config(format!(
                "sensor.noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(Error::config(format!(
                "sensor.gain must be > 0, got {}",
                self.gain
            )));
        }
        if !self.bias.is_finite() {
            return Err(Error::config("sensor.bias must be finite"));
        }
        if let Some(eps) = self.deadband_epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::config(format!(
                    "sensor.deadband_epsilon must be >= 0, got {eps}"
                )));
            }
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.deadband_epsilon
            .unwrap_or_else(|| (2.0 * self.noise_std).max(MIN_DEADBAND))
    }
}

/// Sensed forces of both agents at integer time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceFrame {
    pub t: i64,
    pub values: [AgentForces; NUM_AGENTS],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaForce {
    pub values: [AgentForces; NUM_AGENTS],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TernaryFrame {
    pub values: [[i8; FORCE_DIM]; NUM_AGENTS],
}

/// Apply the sensor model `gain * f + bias + N(0, noise_std²)` to true forces.
pub fn sense<R: Rng + ?Sized>(
    true_forces: &[AgentForces; NUM_AGENTS],
    config: &SensorConfig,
    t: i64,
    rng: &mut R,
) -> ForceFrame {
    let noise = (config.noise_std > 0.0)
        .then(|| Normal::new(0.0, config.noise_std).expect("validated noise_std"));
    let mut values = [[0.0; FORCE_DIM]; NUM_AGENTS];
    for (out, input) in values.iter_mut().zip(true_forces) {
        for (o, &f) in out.iter_mut().zip(input) {
            *o = config.gain * f + config.bias;
            if let Some(n) = &noise {
                *o += n.sample(rng);
            }
        }
    }
    ForceFrame { t, values }
}

/// Elementwise `current - previous`; the frames must be consecutive.
pub fn delta(current: &ForceFrame, previous: &ForceFrame) -> Result<DeltaForce> {
    if current.t != previous.t + 1 {
        return Err(Error::Sequencing {
            expected: previous.t + 1,
            found: current.t,
        });
    }
    let values = std::array::from_fn(|a| {
        std::array::from_fn(|k| current.values[a][k] - previous.values[a][k])
    });
    Ok(DeltaForce { values })
}

pub fn ternarize_value(v: f64, epsilon: f64) -> i8 {
    if v > epsilon {
        1
    } else if v < -epsilon {
        -1
    } else {
        0
    }
}

pub fn ternarize(delta: &DeltaForce, epsilon: f64) -> TernaryFrame {
    let mut values = [[0i8; FORCE_DIM]; NUM_AGENTS];
    for (out, d) in values.iter_mut().zip(&delta.values) {
        for (o, &v) in out.iter_mut().zip(d) {
            *o = ternarize_value(v, epsilon);
        }
    }
    TernaryFrame { values }
}
