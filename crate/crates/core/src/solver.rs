//! Relative value iteration for the average-VIA problem, policy extraction
//! and structural checks on the result.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{enumerate_states, Action, Kernel, State, SystemParams};
use crate::policies::ActionTable;

/// Tolerance used by the `ΔV` monotonicity check.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RviOptions {
    /// Stop once the span of successive iterate differences drops below this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// State whose value is pinned to zero after every sweep.
    pub reference: State,
    /// Starting table; zeros when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-9,
            max_iters: 1_000_000,
            reference: State::new(0, 0, 0),
            initial: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Optimal long-run average VIA (reference-state gain).
    pub theta_star: f64,
    /// Differential values, canonical order, zero at the reference state.
    pub v: Vec<f64>,
    pub policy: ActionTable,
    pub iterations: usize,
    pub span_residual: f64,
}

impl Solution {
    pub fn value(&self, s: State) -> f64 {
        self.v[self.policy.params().index(s)]
    }
}

fn span(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

/// One Bellman sweep: `Δ(s) + min_a Σ Pr[s'|s,a] w(s')`.
fn bellman_sweep(kernel: &Kernel, w: &[f64], out: &mut [f64]) {
    let params = kernel.params();
    for (i, slot) in out.iter_mut().enumerate() {
        let cost = params.state_at(i).delta as f64;
        let idle = kernel.expect(i, Action::Idle, w);
        let transmit = kernel.expect(i, Action::Transmit, w);
        *slot = cost + idle.min(transmit);
    }
}

pub fn relative_value_iteration(params: &SystemParams, opts: &RviOptions) -> Result<Solution> {
    params.validate()?;
    params.check_state(opts.reference)?;
    if opts.epsilon.is_nan() || opts.epsilon <= 0.0 {
        return Err(Error::InvalidParam {
            name: "epsilon",
            value: opts.epsilon,
            reason: "must be positive",
        });
    }
    let kernel = Kernel::new(params);
    let n = kernel.num_states();
    let r = params.index(opts.reference);

    let mut w = match &opts.initial {
        Some(init) if init.len() != n => {
            return Err(Error::TableSize {
                got: init.len(),
                expected: n,
            })
        }
        Some(init) => init.clone(),
        None => vec![0.0; n],
    };
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;

    for k in 1..=opts.max_iters {
        bellman_sweep(&kernel, &w, &mut next);
        residual = span(next.iter().zip(&w).map(|(a, b)| a - b));
        let gain = next[r] - w[r];
        let pin = next[r];
        for (dst, src) in w.iter_mut().zip(&next) {
            *dst = src - pin;
        }
        if residual < opts.epsilon {
            let policy = extract_policy_with(&kernel, &w);
            return Ok(Solution {
                theta_star: gain,
                v: w,
                policy,
                iterations: k,
                span_residual: residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual,
    })
}

fn delta_v_with(kernel: &Kernel, v: &[f64]) -> Vec<f64> {
    (0..kernel.num_states())
        .map(|i| {
            if kernel.params().state_at(i).e == 0 {
                0.0
            } else {
                kernel.expect(i, Action::Transmit, v) - kernel.expect(i, Action::Idle, v)
            }
        })
        .collect()
}

fn extract_policy_with(kernel: &Kernel, v: &[f64]) -> ActionTable {
    let dv = delta_v_with(kernel, v);
    ActionTable::from_fn(kernel.params(), |s| {
        if dv[kernel.params().index(s)] < 0.0 {
            Action::Transmit
        } else {
            Action::Idle
        }
    })
}

/// Greedy policy of a value table: transmit iff `ΔV(s) < 0`, ties idle.
pub fn extract_policy(v: &[f64], params: &SystemParams) -> ActionTable {
    extract_policy_with(&Kernel::new(params), v)
}

/// `max_s |θ + V(s) − min_a(Δ(s) + Σ Pr·V)|`.
pub fn bellman_residual(theta: f64, v: &[f64], params: &SystemParams) -> f64 {
    let kernel = Kernel::new(params);
    let mut tv = vec![0.0; v.len()];
    bellman_sweep(&kernel, v, &mut tv);
    tv.iter()
        .zip(v)
        .map(|(t, vi)| (theta + vi - t).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Transmitting at `Δ` implies transmitting at every larger `Δ`.
    MonotoneInVia,
    /// Transmitting at `e` implies transmitting at every larger `e`.
    MonotoneInBattery,
    EmptyBatteryIdle,
    ZeroViaIdle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThresholdViolation {
    pub rule: ThresholdRule,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThresholdEntry {
    pub e: usize,
    pub x: u8,
    /// Smallest `Δ` with action 1.
    pub threshold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThresholdReport {
    pub thresholds: Vec<ThresholdEntry>,
    pub violations: Vec<ThresholdViolation>,
    pub empty_battery_idle: bool,
    pub zero_via_idle: bool,
}

impl ThresholdReport {
    pub fn is_threshold(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn threshold(&self, e: usize, x: u8) -> Option<usize> {
        self.thresholds
            .iter()
            .find(|t| t.e == e && t.x == x)
            .and_then(|t| t.threshold)
    }
}

pub fn threshold_report(policy: &ActionTable, params: &SystemParams) -> ThresholdReport {
    let act = |e, x, d| policy.get(State::new(e, x, d)).is_transmit();
    let mut violations = Vec::new();
    let mut thresholds = Vec::new();

    for e in 0..=params.e_max {
        for x in 0..=1u8 {
            thresholds.push(ThresholdEntry {
                e,
                x,
                threshold: (0..=params.delta_max).find(|&d| act(e, x, d)),
            });
            for d in 0..=params.delta_max {
                let s = State::new(e, x, d);
                if !act(e, x, d) {
                    continue;
                }
                if e == 0 {
                    violations.push(ThresholdViolation {
                        rule: ThresholdRule::EmptyBatteryIdle,
                        state: s,
                    });
                }
                if d == 0 {
                    violations.push(ThresholdViolation {
                        rule: ThresholdRule::ZeroViaIdle,
                        state: s,
                    });
                }
                if d < params.delta_max && !act(e, x, d + 1) {
                    violations.push(ThresholdViolation {
                        rule: ThresholdRule::MonotoneInVia,
                        state: State::new(e, x, d + 1),
                    });
                }
                if e < params.e_max && !act(e + 1, x, d) {
                    violations.push(ThresholdViolation {
                        rule: ThresholdRule::MonotoneInBattery,
                        state: State::new(e + 1, x, d),
                    });
                }
            }
        }
    }

    let empty_battery_idle = !violations
        .iter()
        .any(|v| v.rule == ThresholdRule::EmptyBatteryIdle);
    let zero_via_idle = !violations
        .iter()
        .any(|v| v.rule == ThresholdRule::ZeroViaIdle);
    ThresholdReport {
        thresholds,
        violations,
        empty_battery_idle,
        zero_via_idle,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityFlag {
    pub e: usize,
    pub x: u8,
    /// `ΔV(e, x, delta + 1) − ΔV(e, x, delta)`, positive when flagged.
    pub delta: usize,
    pub increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaVProfile {
    /// `V¹(s) − V⁰(s)` in canonical order.
    pub delta_v: Vec<f64>,
    /// Increases over `Δ ∈ [1, Δ_max − 1]` beyond [`MONOTONE_TOL`].
    pub flags: Vec<MonotonicityFlag>,
    /// Increases on the last step into `Δ_max`; informational only.
    pub cap_increases: Vec<MonotonicityFlag>,
    #[serde(skip)]
    params: SystemParams,
}

impl DeltaVProfile {
    pub fn get(&self, s: State) -> f64 {
        self.delta_v[self.params.index(s)]
    }

    pub fn is_monotone(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn is_monotone_at(&self, e: usize, x: u8) -> bool {
        !self.flags.iter().any(|f| f.e == e && f.x == x)
    }
}

pub fn delta_v_profile(v: &[f64], params: &SystemParams) -> DeltaVProfile {
    let kernel = Kernel::new(params);
    let delta_v = delta_v_with(&kernel, v);
    let mut flags = Vec::new();
    let mut cap_increases = Vec::new();
    for e in 0..=params.e_max {
        for x in 0..=1u8 {
            for d in 1..params.delta_max {
                let lo = delta_v[params.index(State::new(e, x, d))];
                let hi = delta_v[params.index(State::new(e, x, d + 1))];
                let increase = hi - lo;
                if increase > MONOTONE_TOL {
                    let flag = MonotonicityFlag {
                        e,
                        x,
                        delta: d,
                        increase,
                    };
                    if d + 1 == params.delta_max {
                        cap_increases.push(flag);
                    } else {
                        flags.push(flag);
                    }
                }
            }
        }
    }
    DeltaVProfile {
        delta_v,
        flags,
        cap_increases,
        params: *params,
    }
}

/// States where the solution transmits, for diagnostics.
pub fn transmit_states(policy: &ActionTable) -> Vec<State> {
    enumerate_states(policy.params())
        .into_iter()
        .filter(|&s| policy.get(s).is_transmit())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig2(beta: f64) -> SystemParams {
        SystemParams {
            beta,
            ..SystemParams::default()
        }
    }

    #[test]
    fn solution_invariants() {
        let pr = fig2(0.2);
        let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
        assert_eq!(sol.value(State::new(0, 0, 0)), 0.0);
        assert!(sol.theta_star >= 0.0 && sol.theta_star <= pr.delta_max as f64);
        assert!(sol.span_residual < 1e-9);
        assert!(bellman_residual(sol.theta_star, &sol.v, &pr) < 1e-8);
        for (s, a) in sol.policy.iter() {
            if s.e == 0 {
                assert_eq!(a, Action::Idle);
            }
        }
    }

    #[test]
    fn frozen_source_costs_nothing() {
        let pr = SystemParams {
            p: 1e-6,
            q: 1e-6,
            beta: 0.5,
            p_s: 0.5,
            e_max: 2,
            delta_max: 2,
            p_alpha: 0.5,
        };
        let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
        assert!(sol.theta_star <= 1e-3, "{}", sol.theta_star);
    }

    #[test]
    fn dead_channel_saturates() {
        for beta in [0.2, 0.7] {
            let pr = SystemParams {
                p: 0.5,
                q: 0.5,
                beta,
                p_s: 0.0,
                e_max: 3,
                delta_max: 4,
                p_alpha: 0.5,
            };
            let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
            assert!((sol.theta_star - 4.0).abs() < 1e-8, "{}", sol.theta_star);
        }
    }

    #[test]
    fn rejects_bad_reference_and_epsilon() {
        let pr = SystemParams::default();
        let opts = RviOptions {
            reference: State::new(11, 0, 0),
            ..RviOptions::default()
        };
        assert!(matches!(
            relative_value_iteration(&pr, &opts),
            Err(Error::InvalidState(_))
        ));
        let opts = RviOptions {
            epsilon: 0.0,
            ..RviOptions::default()
        };
        assert!(relative_value_iteration(&pr, &opts).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let opts = RviOptions {
            max_iters: 3,
            ..RviOptions::default()
        };
        match relative_value_iteration(&SystemParams::default(), &opts) {
            Err(Error::NotConverged {
                iterations: 3,
                residual,
            }) => assert!(residual > 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reference_state_independence() {
        let pr = fig2(0.4);
        let a = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
        let b = relative_value_iteration(
            &pr,
            &RviOptions {
                reference: State::new(7, 1, 5),
                ..RviOptions::default()
            },
        )
        .unwrap();
        assert!((a.theta_star - b.theta_star).abs() < 1e-8);
        assert_eq!(a.policy, b.policy);
    }

    #[test]
    fn initial_value_independence() {
        let pr = SystemParams {
            p: 0.7,
            q: 0.4,
            ..fig2(0.2)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let init: Vec<f64> = (0..pr.num_states())
            .map(|_| rng.random_range(-50.0..50.0))
            .collect();
        let a = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
        let b = relative_value_iteration(
            &pr,
            &RviOptions {
                initial: Some(init),
                ..RviOptions::default()
            },
        )
        .unwrap();
        assert!((a.theta_star - b.theta_star).abs() < 1e-8);
        assert_eq!(a.policy, b.policy);
    }

    #[test]
    fn extraction_sign_rule_and_idle_rules() {
        let pr = fig2(0.2);
        let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
        let profile = delta_v_profile(&sol.v, &pr);
        let policy = extract_policy(&sol.v, &pr);
        assert_eq!(policy, sol.policy);
        for (s, a) in policy.iter() {
            assert_eq!(a.is_transmit(), profile.get(s) < 0.0, "{s}");
            if s.e == 0 {
                assert_eq!(profile.get(s), 0.0);
                assert_eq!(a, Action::Idle);
            }
            if s.delta == 0 {
                assert_eq!(a, Action::Idle, "{s}");
            }
        }
    }

    #[test]
    fn delta_v_consistent_with_thresholds() {
        let pr = fig2(0.2);
        let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
        let profile = delta_v_profile(&sol.v, &pr);
        assert!(profile.is_monotone(), "{:?}", profile.flags);
        let report = threshold_report(&sol.policy, &pr);
        for t in &report.thresholds {
            if let Some(th) = t.threshold {
                assert!(profile.get(State::new(t.e, t.x, th)) < 0.0);
                if th >= 2 {
                    assert!(profile.get(State::new(t.e, t.x, th - 1)) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn optimal_policy_is_threshold_with_source_asymmetry() {
        let pr = fig2(0.2);
        let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
        let report = threshold_report(&sol.policy, &pr);
        assert!(report.is_threshold(), "{:?}", report.violations);
        assert!(report.empty_battery_idle && report.zero_via_idle);
        for e in 1..=pr.e_max {
            if let (Some(t0), Some(t1)) = (report.threshold(e, 0), report.threshold(e, 1)) {
                assert!(t0 <= t1, "e={e}: {t0} > {t1}");
            }
        }
        assert!(!transmit_states(&sol.policy).is_empty());
    }

    #[test]
    fn greedy_table_breaks_zero_via_rule() {
        let pr = SystemParams::default();
        let table = crate::policies::Policy::Greedy.to_table(&pr);
        let report = threshold_report(&table, &pr);
        assert!(!report.zero_via_idle);
        assert!(report.empty_battery_idle);
        assert!(report
            .violations
            .iter()
            .all(|v| v.rule == ThresholdRule::ZeroViaIdle));
    }

    #[test]
    fn threshold_report_catches_injected_faults() {
        let pr = SystemParams::default();
        let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
        let mut table = sol.policy.clone();
        let th = threshold_report(&table, &pr)
            .threshold(5, 0)
            .expect("transmits at e=5");
        table.set(State::new(5, 0, th + 1), Action::Idle);
        let report = threshold_report(&table, &pr);
        assert!(
            report
                .violations
                .iter()
                .any(|v| v.rule == ThresholdRule::MonotoneInVia
                    && v.state == State::new(5, 0, th + 1))
        );
    }

    #[test]
    fn sign_rule_on_synthetic_values() {
        // V that rewards low VIA strongly makes transmitting attractive at
        // positive VIA and never at zero VIA.
        let pr = SystemParams {
            e_max: 2,
            delta_max: 3,
            ..SystemParams::default()
        };
        let v: Vec<f64> = enumerate_states(&pr)
            .into_iter()
            .map(|s| 10.0 * s.delta as f64 - 0.1 * s.e as f64)
            .collect();
        let profile = delta_v_profile(&v, &pr);
        let policy = extract_policy(&v, &pr);
        let s = State::new(1, 0, 3);
        assert!(profile.get(s) < 0.0);
        assert_eq!(policy.get(s), Action::Transmit);
        assert_eq!(policy.get(State::new(1, 0, 0)), Action::Idle);
        assert_eq!(policy.get(State::new(0, 0, 3)), Action::Idle);
    }
}
