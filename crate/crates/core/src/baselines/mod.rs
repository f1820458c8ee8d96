//! Comparison learners: independent double-DQN agents and additive value
//! decomposition, plus a brute-force individual-global-max checker.

mod igm;
mod iql;
mod vdn;

pub use igm::{additive_joint_q, igm_check, vdn_igm_check, ENUMERATION_CAP};
pub use iql::{double_dqn_targets, IqlAgent, IqlLearner};
pub use vdn::{vdn_joint_q, vdn_loss, VdnLearner, VdnTransition};
