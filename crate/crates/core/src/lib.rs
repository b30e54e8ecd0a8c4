//! Optimal transmission scheduling for an energy-harvesting sensor that
//! tracks a two-state Markov source, with the long-run average Version
//! Innovation Age (VIA) as the cost.
//!
//! - [`model`]: parameters, states, dynamics and the transition kernel.
//! - [`solver`]: relative value iteration and structural checks.
//! - [`policies`]: optimal table, randomized stationary and greedy policies.
//! - [`evaluate`]: exact evaluation through the induced Markov chain.
//! - [`simulate`]: seeded Monte Carlo simulation.
//! - [`cli`]: config loading and the `via-eh` subcommands.

pub mod cli;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod policies;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use evaluate::{
    brute_force_optimal, exact_metrics, induced_chain, stationary_distribution, ExactMetrics,
};
pub use model::{transition_kernel, validate_kernel, Action, State, SystemParams, TransitionRow};
pub use policies::{ActionTable, Policy, PolicyKind};
pub use simulate::{simulate, trace, SimConfig, SimStats};
pub use solver::{
    delta_v_profile, extract_policy, relative_value_iteration, threshold_report, RviOptions,
    Solution,
};
