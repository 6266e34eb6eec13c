use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::ppo::Actor;
use super::variant::{BaselineVariant, ObsNormalizer};
use super::PolicySet;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::{read_u32, DiagGaussian, Mlp};
use crate::physics::NUM_AGENTS;

const MAGIC: &[u8; 4] = b"TGCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained policies plus everything needed to evaluate them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub policy: PolicySet,
    pub env_config: EnvConfig,
    pub train_config: TrainConfig,
    pub seed: u64,
    pub iteration: u64,
    pub env_steps: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    variant: BaselineVariant,
    actor_dims: Vec<Vec<usize>>,
    critic_dims: Vec<Vec<usize>>,
    critic_ground_truth: bool,
    normalizers: [ObsNormalizer; NUM_AGENTS],
    env_config: EnvConfig,
    train_config: TrainConfig,
    seed: u64,
    iteration: u64,
    env_steps: u64,
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn integrity(field: &str, expected: impl ToString, found: impl ToString) -> Error {
    Error::Integrity {
        field: field.to_string(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

impl Checkpoint {
    pub fn variant(&self) -> BaselineVariant {
        self.policy.variant
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let p = &self.policy;
        let header = Header {
            variant: p.variant,
            actor_dims: p.actors.iter().map(|a| a.net.sizes().to_vec()).collect(),
            critic_dims: p.critics.iter().map(|c| c.sizes().to_vec()).collect(),
            critic_ground_truth: p.critic_ground_truth,
            normalizers: p.normalizers.clone(),
            env_config: self.env_config.clone(),
            train_config: self.train_config.clone(),
            seed: self.seed,
            iteration: self.iteration,
            env_steps: self.env_steps,
        };
        let json = serde_json::to_vec(&header)
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(p.variant.code());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (actor, critic) in p.actors.iter().zip(&p.critics) {
            actor.net.write_to(&mut out, &actor.head.log_std)?;
            critic.write_to(&mut out, &[])?;
        }
        let sum = fnv1a(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 4 + 1 + 4 + 8 {
            return Err(integrity("length", "at least 21 bytes", bytes.len()));
        }
        if &bytes[..4] != MAGIC {
            return Err(integrity(
                "magic",
                String::from_utf8_lossy(MAGIC),
                String::from_utf8_lossy(&bytes[..4]),
            ));
        }
        let mut r = &bytes[4..];
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(integrity("format version", CHECKPOINT_VERSION, version));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        let actual = fnv1a(body);
        if stored != actual {
            return Err(integrity(
                "checksum",
                format!("{stored:016x}"),
                format!("{actual:016x}"),
            ));
        }
        let mut r = &body[8..];
        let mut code = [0u8; 1];
        r.read_exact(&mut code)
            .map_err(|e| Error::Format(format!("truncated checkpoint: {e}")))?;
        let json_len = read_u32(&mut r)? as usize;
        if json_len > r.len() {
            return Err(integrity("header length", format!("<= {}", r.len()), json_len));
        }
        let header: Header = serde_json::from_slice(&r[..json_len])
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        r = &r[json_len..];
        if BaselineVariant::from_code(code[0]) != Some(header.variant) {
            return Err(integrity("variant", header.variant.code(), code[0]));
        }
        let slots = header.actor_dims.len();
        if !(slots == 1 || slots == NUM_AGENTS) || header.critic_dims.len() != slots {
            return Err(integrity(
                "network count",
                format!("1 or {NUM_AGENTS} actor/critic pairs"),
                format!("{slots} actors, {} critics", header.critic_dims.len()),
            ));
        }
        let mut actors = Vec::with_capacity(slots);
        let mut critics = Vec::with_capacity(slots);
        for slot in 0..slots {
            let (net, log_std) = Mlp::read_from(&mut r)?;
            if net.sizes() != header.actor_dims[slot].as_slice() {
                return Err(integrity(
                    "actor dims",
                    format!("{:?}", header.actor_dims[slot]),
                    format!("{:?}", net.sizes()),
                ));
            }
            if log_std.len() != net.output_dim() {
                return Err(integrity("log-std length", net.output_dim(), log_std.len()));
            }
            actors.push(Actor {
                net,
                head: DiagGaussian { log_std },
            });
            let (critic, _) = Mlp::read_from(&mut r)?;
            if critic.sizes() != header.critic_dims[slot].as_slice() {
                return Err(integrity(
                    "critic dims",
                    format!("{:?}", header.critic_dims[slot]),
                    format!("{:?}", critic.sizes()),
                ));
            }
            critics.push(critic);
        }
        if !r.is_empty() {
            return Err(integrity("trailing bytes", 0, r.len()));
        }
        let expected_actor = header.variant.actor_input_dim();
        let expected_critic = header.variant.critic_input_dim(header.critic_ground_truth);
        if actors[0].net.input_dim() != expected_actor {
            return Err(integrity("actor input dim", expected_actor, actors[0].net.input_dim()));
        }
        if critics[0].input_dim() != expected_critic {
            return Err(integrity("critic input dim", expected_critic, critics[0].input_dim()));
        }
        Ok(Checkpoint {
            policy: PolicySet {
                variant: header.variant,
                actors,
                critics,
                normalizers: header.normalizers,
                critic_ground_truth: header.critic_ground_truth,
            },
            env_config: header.env_config,
            train_config: header.train_config,
            seed: header.seed,
            iteration: header.iteration,
            env_steps: header.env_steps,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
