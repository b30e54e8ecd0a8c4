use thiserror::Error;

use crate::model::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("state {0} is outside the state space")]
    InvalidState(State),

    #[error("cannot transmit with an empty battery")]
    EmptyBatteryTransmit,

    #[error("relative value iteration did not converge after {iterations} iterations (span residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("distribution propagation did not converge after {steps} steps (total variation {residual:e})")]
    PropagationNotConverged { steps: usize, residual: f64 },

    #[error("instance has {states} states; brute force supports at most {limit}")]
    InstanceTooLarge { states: usize, limit: usize },

    #[error("trace horizon {horizon} exceeds the limit of {limit} slots")]
    TraceTooLong { horizon: u64, limit: u64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(&'static str),

    #[error("action table has {got} entries, expected {expected}")]
    TableSize { got: usize, expected: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
