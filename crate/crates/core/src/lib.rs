//! Complementary temporal difference learning (CTDL) agents and the
//! explanation pipeline built on their episodic memory.
//!
//! * [`env`]: grid world and continuous mountain car.
//! * [`approx`]: dense networks, backpropagation, SGD/Adam.
//! * [`som`]: the TD-gated self-organizing map.
//! * [`agent`]: discrete and continuous CTDL agents, A2C baseline, guidance.
//! * [`explain`]: trace pruning, online explanations, shuffled controls, file IO.
//! * [`harness`]: seeded population experiments, comparisons, metrics, rendering.

pub mod agent;
pub mod approx;
pub mod env;
pub mod error;
pub mod explain;
pub mod harness;
pub mod seed;
pub mod som;

pub use agent::{Agent, AgentConfig, AgentVariant, CombinedEstimate, Decision, EpisodeTrace, Transition};
pub use env::{EnvAction, EnvSpec, Environment, GridWorldSpec, MountainCarSpec, Observation, StepResult};
pub use error::{Error, Result};
pub use explain::{Explanation, ExplanationEntry, Provenance, TraceRow};
pub use som::{Som, SomConfig, SomUnit};
