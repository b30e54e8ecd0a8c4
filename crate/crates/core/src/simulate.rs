//! Seeded slot-by-slot Monte Carlo simulation of the closed loop.
//!
//! Randomness comes from a single ChaCha8 stream seeded with
//! `SimConfig::seed`. Draw order within a slot is fixed and part of the
//! output contract:
//!
//! 1. action (only when the policy is randomized in the current state),
//! 2. channel outcome (only when transmitting),
//! 3. source transition,
//! 4. energy arrival.
//!
//! Before the first slot one uniform draws `X_1` from the stationary source
//! law; the battery and VIA start at zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{battery_step, source_transition_prob, via_step, Action, State, SystemParams};
use crate::policies::Policy;

/// Longest horizon accepted by [`trace`].
pub const TRACE_MAX_HORIZON: u64 = 100_000;

const BATCHES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: u64,
    pub seed: u64,
    /// Leading slots excluded from the averages.
    pub burn_in: u64,
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 1_000_000,
            seed: 1,
            burn_in: 10_000,
            record_trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidSimConfig("horizon must be at least 1"));
        }
        if self.burn_in >= self.horizon {
            return Err(Error::InvalidSimConfig(
                "burn_in must be smaller than horizon",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimStats {
    pub avg_via: f64,
    pub avg_energy: f64,
    /// Batch-means standard error of `avg_via`.
    pub via_std_error: f64,
    /// Batch-means standard error of `avg_energy`.
    pub energy_std_error: f64,
    pub slot_count: u64,
    pub seed: u64,
}

/// One simulated slot. `channel` is absent when idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub t: u64,
    pub e: usize,
    pub x: u8,
    pub delta: usize,
    pub action: u8,
    pub channel: Option<u8>,
    pub arrival: u8,
}

fn run(
    policy: &Policy,
    params: &SystemParams,
    config: &SimConfig,
    mut on_slot: impl FnMut(&TraceRecord),
) -> SimStats {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (_, w1) = params.source_stationary();
    let mut state = State::new(0, u8::from(rng.random::<f64>() < w1), 0);

    let slots = config.horizon - config.burn_in;
    let batches = BATCHES.min(slots);
    let batch_len = slots / batches;
    let mut batch_via = vec![0.0; batches as usize];
    let mut batch_energy = vec![0.0; batches as usize];
    let (mut sum_via, mut sum_energy) = (0.0, 0.0);

    for t in 0..config.horizon {
        let action = if state.e == 0 {
            Action::Idle
        } else if policy.is_deterministic_at(state) {
            policy.decide(state, 0.0)
        } else {
            policy.decide(state, rng.random::<f64>())
        };
        let success = action
            .is_transmit()
            .then(|| rng.random::<f64>() < params.p_s);
        let flip = 1 - state.x;
        let changed = rng.random::<f64>() < source_transition_prob(state.x, flip, params);
        let arrival = rng.random::<f64>() < params.beta;

        on_slot(&TraceRecord {
            t,
            e: state.e,
            x: state.x,
            delta: state.delta,
            action: action.as_u8(),
            channel: success.map(u8::from),
            arrival: u8::from(arrival),
        });

        if t >= config.burn_in {
            let k = t - config.burn_in;
            let via = state.delta as f64;
            let spent = f64::from(action.as_u8());
            sum_via += via;
            sum_energy += spent;
            let b = (k / batch_len).min(batches - 1) as usize;
            batch_via[b] += via;
            batch_energy[b] += spent;
        }

        let next = State::new(
            battery_step(state.e, arrival, action, params).expect("idle on empty battery"),
            if changed { flip } else { state.x },
            via_step(
                state.delta,
                changed,
                action,
                success.unwrap_or(false),
                params,
            ),
        );
        state = next;
    }

    let n = slots as f64;
    // the last batch absorbs the remainder
    let sizes: Vec<f64> = (0..batches)
        .map(|b| {
            if b == batches - 1 {
                (slots - b * batch_len) as f64
            } else {
                batch_len as f64
            }
        })
        .collect();
    SimStats {
        avg_via: sum_via / n,
        avg_energy: sum_energy / n,
        via_std_error: batch_std_error(&batch_via, &sizes),
        energy_std_error: batch_std_error(&batch_energy, &sizes),
        slot_count: slots,
        seed: config.seed,
    }
}

fn batch_std_error(sums: &[f64], sizes: &[f64]) -> f64 {
    let k = sums.len();
    if k < 2 {
        return 0.0;
    }
    let means: Vec<f64> = sums.iter().zip(sizes).map(|(s, n)| s / n).collect();
    let mean = means.iter().sum::<f64>() / k as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

pub fn simulate(policy: &Policy, params: &SystemParams, config: &SimConfig) -> Result<SimStats> {
    params.validate()?;
    config.validate()?;
    Ok(run(policy, params, config, |_| {}))
}

/// Per-slot records of one run. Requires `record_trace` and a horizon of at
/// most [`TRACE_MAX_HORIZON`].
pub fn trace(
    policy: &Policy,
    params: &SystemParams,
    config: &SimConfig,
) -> Result<Vec<TraceRecord>> {
    params.validate()?;
    if !config.record_trace {
        return Err(Error::InvalidSimConfig("record_trace is not set"));
    }
    if config.horizon > TRACE_MAX_HORIZON {
        return Err(Error::TraceTooLong {
            horizon: config.horizon,
            limit: TRACE_MAX_HORIZON,
        });
    }
    if config.horizon == 0 {
        return Err(Error::InvalidSimConfig("horizon must be at least 1"));
    }
    // burn-in only affects averages; traces cover every slot
    let cfg = SimConfig {
        burn_in: config.burn_in.min(config.horizon - 1),
        ..*config
    };
    let mut rows = Vec::with_capacity(config.horizon as usize);
    run(policy, params, &cfg, |r| rows.push(*r));
    Ok(rows)
}
