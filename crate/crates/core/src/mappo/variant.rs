use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{AgentObservation, ForceVariant, NON_FORCE_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::physics::NUM_AGENTS;
use crate::sensing::{DeltaForce, FORCE_DIM};

/// Raw and delta force channels are divided by this before entering a network.
pub const FORCE_SCALE_N: f64 = 10.0;
/// Extra ground-truth rod state appended to the critic input when enabled:
/// linear velocity (2) and angular velocity (1).
pub const GROUND_TRUTH_DIM: usize = 3;

/// The four training setups compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineVariant {
    /// Ternary actor, critic with ternary and delta force.
    #[serde(rename = "ours")]
    Ours,
    #[serde(rename = "raw", alias = "raw_force")]
    RawForce,
    #[serde(rename = "ternary", alias = "ternary_force")]
    TernaryForce,
    #[serde(rename = "noforce", alias = "no_force")]
    NoForce,
}

impl BaselineVariant {
    pub const ALL: [BaselineVariant; 4] = [
        BaselineVariant::Ours,
        BaselineVariant::RawForce,
        BaselineVariant::TernaryForce,
        BaselineVariant::NoForce,
    ];

    pub fn actor_force(self) -> ForceVariant {
        match self {
            BaselineVariant::Ours | BaselineVariant::TernaryForce => ForceVariant::Ternary,
            BaselineVariant::RawForce => ForceVariant::Raw,
            BaselineVariant::NoForce => ForceVariant::None,
        }
    }

    pub fn actor_input_dim(self) -> usize {
        OBS_DIM
    }

    pub fn critic_input_dim(self, ground_truth: bool) -> usize {
        let base = NUM_AGENTS * OBS_DIM;
        let delta = if self == BaselineVariant::Ours {
            NUM_AGENTS * FORCE_DIM
        } else {
            0
        };
        base + delta + if ground_truth { GROUND_TRUTH_DIM } else { 0 }
    }

    pub fn code(self) -> u8 {
        match self {
            BaselineVariant::Ours => 0,
            BaselineVariant::RawForce => 1,
            BaselineVariant::TernaryForce => 2,
            BaselineVariant::NoForce => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Short name used on the command line and in result tables.
    pub fn name(self) -> &'static str {
        match self {
            BaselineVariant::Ours => "ours",
            BaselineVariant::RawForce => "raw",
            BaselineVariant::TernaryForce => "ternary",
            BaselineVariant::NoForce => "noforce",
        }
    }
}

impl fmt::Display for BaselineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ours" => Ok(BaselineVariant::Ours),
            "raw" | "rawforce" | "raw_force" => Ok(BaselineVariant::RawForce),
            "ternary" | "ternaryforce" | "ternary_force" => Ok(BaselineVariant::TernaryForce),
            "noforce" | "no_force" | "none" => Ok(BaselineVariant::NoForce),
            _ => Err(Error::config(format!(
                "unknown variant '{s}' (expected ours, raw, ternary or noforce)"
            ))),
        }
    }
}

/// Running mean/variance of the non-force observation channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub count: f64,
    pub mean: Vec<f64>,
    /// Sum of squared deviations (Welford / Chan).
    pub m2: Vec<f64>,
    pub frozen: bool,
}

impl Default for ObsNormalizer {
    fn default() -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; NON_FORCE_DIM],
            m2: vec![0.0; NON_FORCE_DIM],
            frozen: false,
        }
    }
}

impl ObsNormalizer {
    /// Merge a batch of raw observations into the running statistics.
    pub fn update<'a>(&mut self, batch: impl IntoIterator<Item = &'a [f64]>) {
        if self.frozen {
            return;
        }
        let mut n = 0.0;
        let mut mean = [0.0; NON_FORCE_DIM];
        let mut m2 = [0.0; NON_FORCE_DIM];
        for x in batch {
            n += 1.0;
            for k in 0..NON_FORCE_DIM {
                let d = x[k] - mean[k];
                mean[k] += d / n;
                m2[k] += d * (x[k] - mean[k]);
            }
        }
        if n == 0.0 {
            return;
        }
        let total = self.count + n;
        for k in 0..NON_FORCE_DIM {
            let d = mean[k] - self.mean[k];
            self.mean[k] += d * n / total;
            self.m2[k] += m2[k] + d * d * self.count * n / total;
        }
        self.count = total;
    }

    pub fn std(&self, k: usize) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            (self.m2[k] / self.count).sqrt().max(1e-4)
        }
    }

    fn normalize_into(&self, obs: &AgentObservation, out: &mut Vec<f64>) {
        for k in 0..NON_FORCE_DIM {
            let z = (obs.values[k] - self.mean[k]) / self.std(k);
            out.push(z.clamp(-10.0, 10.0));
        }
        for &f in obs.force() {
            out.push(match obs.variant {
                ForceVariant::Raw => f / FORCE_SCALE_N,
                ForceVariant::Ternary | ForceVariant::None => f,
            });
        }
    }
}

fn check_variant(obs: &AgentObservation, expected: ForceVariant, who: &str) -> Result<()> {
    if obs.variant != expected {
        return Err(Error::Composition(format!(
            "{who} expects {expected:?} force channels, observation carries {:?}",
            obs.variant
        )));
    }
    Ok(())
}

/// Actor input: the agent's observation with normalized non-force channels.
pub fn build_actor_input(
    obs: &AgentObservation,
    variant: BaselineVariant,
    normalizer: &ObsNormalizer,
) -> Result<Vec<f64>> {
    check_variant(obs, variant.actor_force(), "actor")?;
    let mut out = Vec::with_capacity(OBS_DIM);
    normalizer.normalize_into(obs, &mut out);
    Ok(out)
}

/// Critic input from both agents' observations (already carrying the
/// variant's force channels) and, for `Ours`, both delta forces.
pub fn build_critic_input(
    observations: &[AgentObservation],
    deltas: Option<&DeltaForce>,
    ground_truth: Option<&[f64; GROUND_TRUTH_DIM]>,
    variant: BaselineVariant,
    normalizers: &[ObsNormalizer],
) -> Result<Vec<f64>> {
    if observations.len() != NUM_AGENTS || normalizers.len() != NUM_AGENTS {
        return Err(Error::Composition(format!(
            "critic needs data of {NUM_AGENTS} agents, got {}",
            observations.len()
        )));
    }
    let mut out = Vec::with_capacity(variant.critic_input_dim(ground_truth.is_some()));
    for (obs, norm) in observations.iter().zip(normalizers) {
        check_variant(obs, variant.actor_force(), "critic")?;
        norm.normalize_into(obs, &mut out);
    }
    if variant == BaselineVariant::Ours {
        let d = deltas.ok_or_else(|| Error::Composition("critic needs delta forces".into()))?;
        for agent in &d.values {
            out.extend(agent.iter().map(|v| v / FORCE_SCALE_N));
        }
    }
    if let Some(gt) = ground_truth {
        out.extend_from_slice(gt);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(variant: ForceVariant, force: [f64; 4]) -> AgentObservation {
        let mut values = [0.5; OBS_DIM];
        values[NON_FORCE_DIM..].copy_from_slice(&force);
        AgentObservation { variant, values }
    }

    #[test]
    fn ternary_channels_pass_through() {
        let o = obs(ForceVariant::Ternary, [1.0, -1.0, 0.0, 0.0]);
        let x = build_actor_input(&o, BaselineVariant::Ours, &ObsNormalizer::default()).unwrap();
        assert_eq!(&x[NON_FORCE_DIM..], &[1.0, -1.0, 0.0, 0.0]);
        assert_eq!(x.len(), OBS_DIM);
    }

    #[test]
    fn actor_rejects_mismatched_variant() {
        let o = obs(ForceVariant::Raw, [1.0; 4]);
        assert!(matches!(
            build_actor_input(&o, BaselineVariant::Ours, &ObsNormalizer::default()),
            Err(Error::Composition(_))
        ));
    }

    #[test]
    fn critic_dims() {
        assert_eq!(BaselineVariant::Ours.critic_input_dim(false), 44);
        assert_eq!(BaselineVariant::RawForce.critic_input_dim(false), 36);
        assert_eq!(BaselineVariant::Ours.critic_input_dim(true), 47);
        let norms = [ObsNormalizer::default(), ObsNormalizer::default()];
        let o = obs(ForceVariant::Ternary, [1.0, 0.0, -1.0, 0.0]);
        let c = build_critic_input(
            &[o, o],
            Some(&DeltaForce::default()),
            None,
            BaselineVariant::Ours,
            &norms,
        )
        .unwrap();
        assert_eq!(c.len(), 44);
        assert!(c[36..].iter().all(|&v| v == 0.0));
        assert!(build_critic_input(&[o], None, None, BaselineVariant::Ours, &norms).is_err());
        assert!(build_critic_input(&[o, o], None, None, BaselineVariant::Ours, &norms).is_err());
    }

    #[test]
    fn normalizer_matches_batch_statistics() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| (0..OBS_DIM).map(|k| (i * (k + 1)) as f64 * 0.1).collect())
            .collect();
        let mut a = ObsNormalizer::default();
        a.update(rows[..20].iter().map(|r| r.as_slice()));
        a.update(rows[20..].iter().map(|r| r.as_slice()));
        let mut b = ObsNormalizer::default();
        b.update(rows.iter().map(|r| r.as_slice()));
        for k in 0..NON_FORCE_DIM {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let m = col.iter().sum::<f64>() / 50.0;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 50.0;
            assert!((a.mean[k] - m).abs() < 1e-9);
            assert!((a.std(k) - v.sqrt().max(1e-4)).abs() < 1e-9);
            assert!((a.mean[k] - b.mean[k]).abs() < 1e-9);
        }
        let mut f = a.clone();
        f.frozen = true;
        f.update(rows.iter().map(|r| r.as_slice()));
        assert_eq!(f.count, a.count);
    }

    #[test]
    fn variant_names_roundtrip() {
        for v in BaselineVariant::ALL {
            assert_eq!(v.name().parse::<BaselineVariant>().unwrap(), v);
            assert_eq!(BaselineVariant::from_code(v.code()), Some(v));
        }
        assert!("bogus".parse::<BaselineVariant>().is_err());
    }
}
