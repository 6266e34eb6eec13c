//! Cooperative two-gripper grasp-lift-transport in a planar world, with
//! ternary force representation and asymmetric actor-critic MAPPO.

pub mod env;
pub mod error;
pub mod experiment;
pub mod mappo;
pub mod math;
pub mod nn;
pub mod physics;
pub mod sensing;

pub use error::{Error, Result};
pub use math::Vec2;
