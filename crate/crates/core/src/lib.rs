//! Finite MDP evaluation and control, chain analysis, performance metrics and the
//! simulation and hypothesis-testing tools for a controlled M/M/1 admission queue.

pub mod chain;
pub mod error;
pub mod linalg;
pub mod mdp;
pub mod metrics;
pub mod queue;
pub mod random_mdp;
pub mod solvers;
pub mod stats;
pub mod study;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use mdp::{apply_policy, enumerate_policies, MdpModel, ModelDocument, Policy, PolicyModel};
