//! Stationary transmission policies: tabulated (optimal) and the two
//! state-agnostic baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{enumerate_states, Action, State, SystemParams};

/// Deterministic action per state, in canonical state order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTable {
    params: SystemParams,
    actions: Vec<Action>,
}

impl ActionTable {
    pub fn new(params: &SystemParams, actions: Vec<Action>) -> Result<Self> {
        if actions.len() != params.num_states() {
            return Err(Error::TableSize {
                got: actions.len(),
                expected: params.num_states(),
            });
        }
        Ok(Self {
            params: *params,
            actions,
        })
    }

    pub fn from_fn(params: &SystemParams, mut f: impl FnMut(State) -> Action) -> Self {
        Self {
            params: *params,
            actions: enumerate_states(params).into_iter().map(&mut f).collect(),
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn get(&self, s: State) -> Action {
        self.actions[self.params.index(s)]
    }

    pub fn set(&mut self, s: State, a: Action) {
        let i = self.params.index(s);
        self.actions[i] = a;
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// `(state, action)` pairs in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (State, Action)> + '_ {
        self.actions
            .iter()
            .enumerate()
            .map(|(i, &a)| (self.params.state_at(i), a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    OptimalTable(ActionTable),
    /// Transmit with a fixed probability whenever the battery is nonempty.
    RandomizedStationary(f64),
    /// Transmit whenever the battery is nonempty.
    Greedy,
}

/// Serializable policy selector used in configs and output rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Optimal,
    Rs,
    Greedy,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Optimal => "optimal",
            PolicyKind::Rs => "rs",
            PolicyKind::Greedy => "greedy",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" => Ok(PolicyKind::Optimal),
            "rs" | "randomized" => Ok(PolicyKind::Rs),
            "greedy" => Ok(PolicyKind::Greedy),
            other => Err(format!(
                "unknown policy `{other}` (expected optimal, rs or greedy)"
            )),
        }
    }
}

impl Policy {
    /// Probability of transmitting in state `s`. Always 0 with an empty battery.
    pub fn action_distribution(&self, s: State) -> f64 {
        if s.e == 0 {
            return 0.0;
        }
        match self {
            Policy::OptimalTable(table) => f64::from(table.get(s).as_u8()),
            Policy::RandomizedStationary(p_alpha) => *p_alpha,
            Policy::Greedy => 1.0,
        }
    }

    /// Samples an action given a uniform draw `u ∈ [0, 1)`.
    pub fn decide(&self, s: State, u: f64) -> Action {
        if u < self.action_distribution(s) {
            Action::Transmit
        } else {
            Action::Idle
        }
    }

    /// True when `decide` in `s` does not depend on `u`.
    pub fn is_deterministic_at(&self, s: State) -> bool {
        let prob = self.action_distribution(s);
        prob == 0.0 || prob == 1.0
    }

    /// Renders the policy as a deterministic table. Randomized policies
    /// transmit wherever the transmit probability is positive.
    pub fn to_table(&self, params: &SystemParams) -> ActionTable {
        match self {
            Policy::OptimalTable(table) => table.clone(),
            _ => ActionTable::from_fn(params, |s| {
                if self.action_distribution(s) > 0.0 {
                    Action::Transmit
                } else {
                    Action::Idle
                }
            }),
        }
    }
}
