//! Exact long-run evaluation of stationary policies through the induced
//! Markov chain, and exhaustive search over deterministic policies for tiny
//! instances.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Action, Kernel, State, SystemParams};
use crate::policies::{ActionTable, Policy};

/// Largest state space accepted by [`brute_force_optimal`].
pub const BRUTE_FORCE_MAX_STATES: usize = 14;

const PROPAGATION_TOL: f64 = 1e-12;
const PROPAGATION_MAX_STEPS: usize = 10_000_000;
const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// Policy-averaged transition matrix over the canonical state order.
#[derive(Debug, Clone)]
pub struct InducedChain {
    n: usize,
    /// Row-major `n × n`.
    matrix: Vec<f64>,
    /// `Pr[a = 1 | s] · 1{e > 0}`.
    pub transmit: Vec<f64>,
    /// VIA cost of each state.
    pub cost: Vec<f64>,
}

impl InducedChain {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n..(i + 1) * self.n]
    }

    /// One step of distribution propagation, `dist · P`.
    pub fn propagate(&self, dist: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += mass * w;
            }
        }
    }
}

pub fn induced_chain(policy: &Policy, params: &SystemParams) -> InducedChain {
    let kernel = Kernel::new(params);
    induced_chain_with(&kernel, policy)
}

fn induced_chain_with(kernel: &Kernel, policy: &Policy) -> InducedChain {
    let params = kernel.params();
    let n = kernel.num_states();
    let mut matrix = vec![0.0; n * n];
    let mut transmit = vec![0.0; n];
    let mut cost = vec![0.0; n];
    for i in 0..n {
        let s = params.state_at(i);
        let prob = policy.action_distribution(s);
        transmit[i] = prob;
        cost[i] = s.delta as f64;
        for (action, weight) in [(Action::Idle, 1.0 - prob), (Action::Transmit, prob)] {
            if weight == 0.0 {
                continue;
            }
            for &(j, w) in kernel.row(i, action) {
                matrix[i * n + j] += weight * w;
            }
        }
    }
    InducedChain {
        n,
        matrix,
        transmit,
        cost,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    StationarySolve,
    Propagation,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::StationarySolve => "stationary-solve",
            Method::Propagation => "propagation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    pub method: Method,
}

fn max_balance_error(chain: &InducedChain, pi: &[f64]) -> f64 {
    let mut next = vec![0.0; pi.len()];
    chain.propagate(pi, &mut next);
    next.iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Direct solve of `πP = π, Σπ = 1`; `None` when the system is singular.
fn solve_balance(chain: &InducedChain) -> Option<Vec<f64>> {
    let n = chain.len();
    // (P^T − I) with the last equation replaced by normalization
    let mut a = DMatrix::from_fn(n, n, |i, j| {
        chain.get(j, i) - if i == j { 1.0 } else { 0.0 }
    });
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;

    let lu = a.lu();
    let u = lu.u();
    let diag = u.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
        (lo.min(d.abs()), hi.max(d.abs()))
    });
    if lo.is_nan() || lo <= 1e-13 * hi {
        return None;
    }
    let x = lu.solve(&b)?;
    let pi: Vec<f64> = x.iter().copied().collect();
    let sane = pi.iter().all(|&v| v.is_finite() && v > -1e-12)
        && ((pi.iter().sum::<f64>() - 1.0).abs() < 1e-10)
        && max_balance_error(chain, &pi) < STATIONARY_RESIDUAL_TOL;
    sane.then_some(pi)
}

/// Long-run distribution from a point mass at `(0, 0, 0)`.
fn propagate_to_limit(chain: &InducedChain) -> Result<Vec<f64>> {
    let n = chain.len();
    let mut dist = vec![0.0; n];
    dist[0] = 1.0;
    let mut next = vec![0.0; n];
    let mut tv = f64::INFINITY;
    for _ in 0..PROPAGATION_MAX_STEPS {
        chain.propagate(&dist, &mut next);
        tv = 0.5
            * next
                .iter()
                .zip(&dist)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        std::mem::swap(&mut dist, &mut next);
        if tv < PROPAGATION_TOL {
            return Ok(dist);
        }
    }
    Err(Error::PropagationNotConverged {
        steps: PROPAGATION_MAX_STEPS,
        residual: tv,
    })
}

pub fn stationary_distribution(chain: &InducedChain) -> Result<StationaryDistribution> {
    if let Some(pi) = solve_balance(chain) {
        return Ok(StationaryDistribution {
            pi,
            method: Method::StationarySolve,
        });
    }
    Ok(StationaryDistribution {
        pi: propagate_to_limit(chain)?,
        method: Method::Propagation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactMetrics {
    pub avg_via: f64,
    pub avg_energy: f64,
    pub method: Method,
}

fn metrics_of(chain: &InducedChain) -> Result<ExactMetrics> {
    let dist = stationary_distribution(chain)?;
    let dot = |w: &[f64]| dist.pi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    Ok(ExactMetrics {
        avg_via: dot(&chain.cost),
        avg_energy: dot(&chain.transmit),
        method: dist.method,
    })
}

pub fn exact_metrics(policy: &Policy, params: &SystemParams) -> Result<ExactMetrics> {
    params.validate()?;
    metrics_of(&induced_chain(policy, params))
}

/// Exhaustive minimum of the average VIA over deterministic stationary
/// policies that idle on an empty battery.
///
/// Ties keep the policy enumerated first; the enumeration visits transmit
/// sets in increasing bitmask order over the nonempty-battery states.
pub fn brute_force_optimal(params: &SystemParams) -> Result<(f64, ActionTable)> {
    params.validate()?;
    let n = params.num_states();
    if n > BRUTE_FORCE_MAX_STATES {
        return Err(Error::InstanceTooLarge {
            states: n,
            limit: BRUTE_FORCE_MAX_STATES,
        });
    }
    let kernel = Kernel::new(params);
    let free: Vec<State> = (0..n)
        .map(|i| params.state_at(i))
        .filter(|s| s.e > 0)
        .collect();

    let mut best: Option<(f64, ActionTable)> = None;
    for mask in 0u32..(1 << free.len()) {
        let mut table = ActionTable::from_fn(params, |_| Action::Idle);
        for (bit, &s) in free.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                table.set(s, Action::Transmit);
            }
        }
        let policy = Policy::OptimalTable(table);
        let value = metrics_of(&induced_chain_with(&kernel, &policy))?.avg_via;
        if best.as_ref().is_none_or(|(b, _)| value < b - 1e-12) {
            let Policy::OptimalTable(table) = policy else {
                unreachable!()
            };
            best = Some((value, table));
        }
    }
    Ok(best.expect("at least one policy enumerated"))
}
