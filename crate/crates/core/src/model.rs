//! System model: parameters, the `(e, X, Δ)` state space, the per-slot
//! dynamics primitives and the one-step transition kernel.
//!
//! States are indexed lexicographically by battery level, then source
//! state, then VIA. Every value or action table in this crate uses that
//! ordering (see [`SystemParams::index`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums of the transition kernel.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Scalar parameters of the energy-harvesting monitoring system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Source transition probability 0 → 1.
    pub p: f64,
    /// Source transition probability 1 → 0.
    pub q: f64,
    /// Energy arrival probability per slot.
    pub beta: f64,
    /// Channel success probability.
    pub p_s: f64,
    /// Battery capacity in energy units.
    pub e_max: usize,
    /// Cap on the VIA.
    pub delta_max: usize,
    /// Transmit probability of the randomized stationary baseline.
    pub p_alpha: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            p: 0.4,
            q: 0.7,
            beta: 0.2,
            p_s: 0.5,
            e_max: 10,
            delta_max: 10,
            p_alpha: 0.5,
        }
    }
}

fn open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            value,
            reason: "must lie in the open interval (0, 1)",
        })
    }
}

fn closed_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        open_unit("p", self.p)?;
        open_unit("q", self.q)?;
        open_unit("beta", self.beta)?;
        closed_unit("p_s", self.p_s)?;
        closed_unit("p_alpha", self.p_alpha)?;
        if self.delta_max == 0 {
            return Err(Error::InvalidParam {
                name: "delta_max",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }

    pub fn p_f(&self) -> f64 {
        1.0 - self.p_s
    }

    pub fn num_states(&self) -> usize {
        (self.e_max + 1) * 2 * (self.delta_max + 1)
    }

    /// Canonical index of `s` in the lexicographic `(e, x, delta)` order.
    #[inline]
    pub fn index(&self, s: State) -> usize {
        (s.e * 2 + s.x as usize) * (self.delta_max + 1) + s.delta
    }

    /// Inverse of [`SystemParams::index`].
    #[inline]
    pub fn state_at(&self, idx: usize) -> State {
        let width = self.delta_max + 1;
        let delta = idx % width;
        let rest = idx / width;
        State {
            e: rest / 2,
            x: (rest % 2) as u8,
            delta,
        }
    }

    pub fn contains(&self, s: State) -> bool {
        s.e <= self.e_max && s.x <= 1 && s.delta <= self.delta_max
    }

    pub fn check_state(&self, s: State) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::InvalidState(s))
        }
    }

    /// Stationary law of the source, `(Pr[X=0], Pr[X=1])`.
    pub fn source_stationary(&self) -> (f64, f64) {
        let total = self.p + self.q;
        (self.q / total, self.p / total)
    }
}

/// A point `(e, X, Δ)` of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub e: usize,
    pub x: u8,
    pub delta: usize,
}

impl State {
    pub const fn new(e: usize, x: u8, delta: usize) -> Self {
        Self { e, x, delta }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.e, self.x, self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Idle,
    Transmit,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::Idle, Action::Transmit];

    pub fn as_u8(self) -> u8 {
        match self {
            Action::Idle => 0,
            Action::Transmit => 1,
        }
    }

    pub fn from_u8(a: u8) -> Option<Self> {
        match a {
            0 => Some(Action::Idle),
            1 => Some(Action::Transmit),
            _ => None,
        }
    }

    pub fn is_transmit(self) -> bool {
        self == Action::Transmit
    }
}

/// `Pr[X_{t+1} = x_next | X_t = x]`.
pub fn source_transition_prob(x: u8, x_next: u8, params: &SystemParams) -> f64 {
    match (x, x_next) {
        (0, 0) => 1.0 - params.p,
        (0, _) => params.p,
        (_, 0) => params.q,
        _ => 1.0 - params.q,
    }
}

/// One-slot VIA update. `success` is ignored when idling.
pub fn via_step(
    delta: usize,
    source_changed: bool,
    action: Action,
    success: bool,
    params: &SystemParams,
) -> usize {
    let delivered = action.is_transmit() && success;
    match (source_changed, delivered) {
        (false, false) => delta,
        (true, false) => (delta + 1).min(params.delta_max),
        (true, true) => 1.min(params.delta_max),
        (false, true) => 0,
    }
}

/// One-slot battery update `min(e + b − a, E_max)`.
pub fn battery_step(
    e: usize,
    arrival: bool,
    action: Action,
    params: &SystemParams,
) -> Result<usize> {
    if e == 0 && action.is_transmit() {
        return Err(Error::EmptyBatteryTransmit);
    }
    let spent = usize::from(action.is_transmit());
    Ok((e + usize::from(arrival) - spent).min(params.e_max))
}

/// All states in canonical order.
pub fn enumerate_states(params: &SystemParams) -> Vec<State> {
    let mut out = Vec::with_capacity(params.num_states());
    for e in 0..=params.e_max {
        for x in 0..=1u8 {
            for delta in 0..=params.delta_max {
                out.push(State { e, x, delta });
            }
        }
    }
    out
}

/// Sparse successor distribution for one `(state, action)` pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionRow {
    entries: Vec<(State, f64)>,
}

impl TransitionRow {
    fn add(&mut self, s: State, prob: f64) {
        if prob <= 0.0 {
            return;
        }
        match self.entries.iter_mut().find(|(t, _)| *t == s) {
            Some((_, w)) => *w += prob,
            None => self.entries.push((s, prob)),
        }
    }

    pub fn entries(&self) -> &[(State, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    /// Probability mass on `s` (0 when absent).
    pub fn prob(&self, s: State) -> f64 {
        self.entries
            .iter()
            .find(|(t, _)| *t == s)
            .map_or(0.0, |(_, w)| *w)
    }
}

/// `Pr[S_{t+1} | S_t = s, α_t = action]`.
///
/// With an empty battery the action is coerced to idle, so both rows coincide.
/// Transmitting at `Δ = 0` is allowed; the success and failure branches collapse
/// onto the same successors in that case.
pub fn transition_kernel(s: State, action: Action, params: &SystemParams) -> TransitionRow {
    let action = if s.e == 0 { Action::Idle } else { action };
    let beta = params.beta;
    let mut row = TransitionRow::default();

    let channel: &[(bool, f64)] = if action.is_transmit() {
        &[(true, params.p_s), (false, params.p_f())]
    } else {
        &[(false, 1.0)]
    };

    for x_next in 0..=1u8 {
        let p_src = source_transition_prob(s.x, x_next, params);
        let changed = x_next != s.x;
        for &(arrival, p_arr) in &[(true, beta), (false, 1.0 - beta)] {
            let e_next = battery_step(s.e, arrival, action, params)
                .expect("action is idle whenever the battery is empty");
            for &(success, p_ch) in channel {
                let delta_next = via_step(s.delta, changed, action, success, params);
                row.add(State::new(e_next, x_next, delta_next), p_src * p_arr * p_ch);
            }
        }
    }
    row
}

/// Precomputed kernel over the whole state space, indexed canonically.
#[derive(Debug, Clone)]
pub struct Kernel {
    params: SystemParams,
    rows: Vec<[Vec<(usize, f64)>; 2]>,
}

impl Kernel {
    pub fn new(params: &SystemParams) -> Self {
        let rows = enumerate_states(params)
            .into_iter()
            .map(|s| {
                Action::BOTH.map(|a| {
                    transition_kernel(s, a, params)
                        .entries()
                        .iter()
                        .map(|&(t, w)| (params.index(t), w))
                        .collect()
                })
            })
            .collect();
        Self {
            params: *params,
            rows,
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, idx: usize, action: Action) -> &[(usize, f64)] {
        &self.rows[idx][action.as_u8() as usize]
    }

    /// `Σ_{s'} Pr[s' | s, a] · values(s')`.
    #[inline]
    pub fn expect(&self, idx: usize, action: Action, values: &[f64]) -> f64 {
        self.row(idx, action)
            .iter()
            .map(|&(j, w)| w * values[j])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelViolation {
    pub state: State,
    pub action: u8,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct KernelReport {
    pub rows_checked: usize,
    pub max_row_sum_error: f64,
    pub violations: Vec<KernelViolation>,
}

impl KernelReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every kernel row for stochasticity, bounds and the empty-battery
/// action equivalence.
pub fn validate_kernel(params: &SystemParams) -> KernelReport {
    let mut report = KernelReport::default();
    for s in enumerate_states(params) {
        let rows = Action::BOTH.map(|a| transition_kernel(s, a, params));
        for (a, row) in Action::BOTH.iter().zip(&rows) {
            report.rows_checked += 1;
            let mut flag = |detail: String| {
                report.violations.push(KernelViolation {
                    state: s,
                    action: a.as_u8(),
                    detail,
                })
            };
            let err = (row.total() - 1.0).abs();
            if err > ROW_SUM_TOL {
                flag(format!("row sums to {}", row.total()));
            }
            if row.len() > 8 {
                flag(format!("{} successors", row.len()));
            }
            for (i, &(t, w)) in row.entries().iter().enumerate() {
                if w.is_nan() || w <= 0.0 {
                    flag(format!("non-positive probability {w} on {t}"));
                }
                if !params.contains(t) {
                    flag(format!("successor {t} out of bounds"));
                }
                if row.entries()[..i].iter().any(|(u, _)| *u == t) {
                    flag(format!("duplicate successor {t}"));
                }
            }
            report.max_row_sum_error = report.max_row_sum_error.max(err);
        }
        if s.e == 0 && rows[0] != rows[1] {
            report.violations.push(KernelViolation {
                state: s,
                action: 1,
                detail: "empty-battery rows differ between actions".into(),
            });
        }
    }
    report
}
