//! Cross-checks between the solver, the exact evaluator, brute force and
//! simulation.

use proptest::prelude::*;
use via_eh::cli::sim_tolerance;
use via_eh::evaluate::{
    brute_force_optimal, exact_metrics, induced_chain, stationary_distribution, Method,
};
use via_eh::model::{enumerate_states, Action, SystemParams};
use via_eh::policies::{ActionTable, Policy};
use via_eh::simulate::{simulate, SimConfig};
use via_eh::solver::{bellman_residual, relative_value_iteration, threshold_report, RviOptions};

fn params(p: f64, q: f64, beta: f64, p_s: f64) -> SystemParams {
    SystemParams {
        p,
        q,
        beta,
        p_s,
        ..SystemParams::default()
    }
}

fn tiny(p: f64, q: f64, beta: f64, p_s: f64) -> SystemParams {
    SystemParams {
        e_max: 1,
        delta_max: 2,
        ..params(p, q, beta, p_s)
    }
}

#[test]
fn rvi_matches_brute_force_on_reference_instance() {
    let pr = tiny(0.4, 0.7, 0.3, 0.5);
    let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
    let (theta, argmin) = brute_force_optimal(&pr).unwrap();
    assert!(
        (sol.theta_star - theta).abs() < 1e-6,
        "{} vs {theta}",
        sol.theta_star
    );
    let report = threshold_report(&argmin, &pr);
    assert!(report.is_threshold(), "{:?}", report.violations);
    // the brute-force argmin achieves the RVI optimum too
    let exact = exact_metrics(&Policy::OptimalTable(argmin), &pr).unwrap();
    assert!((exact.avg_via - sol.theta_star).abs() < 1e-6);
}

#[test]
fn brute_force_dead_channel_all_policies_tie() {
    let pr = tiny(0.5, 0.5, 0.4, 0.0);
    let (theta, _) = brute_force_optimal(&pr).unwrap();
    assert!((theta - 2.0).abs() < 1e-9);
    for mask in [0u32, 0b111111, 0b101010] {
        let mut table = ActionTable::from_fn(&pr, |_| Action::Idle);
        for (bit, s) in enumerate_states(&pr)
            .into_iter()
            .filter(|s| s.e > 0)
            .enumerate()
        {
            if mask >> bit & 1 == 1 {
                table.set(s, Action::Transmit);
            }
        }
        let m = exact_metrics(&Policy::OptimalTable(table), &pr).unwrap();
        assert!((m.avg_via - 2.0).abs() < 1e-9);
    }
}

#[test]
fn threshold_structure_on_crossed_grid() {
    for p in [0.4, 0.7] {
        for q in [0.4, 0.7] {
            for beta in [0.2, 0.4] {
                let pr = params(p, q, beta, 0.5);
                let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
                let report = threshold_report(&sol.policy, &pr);
                assert!(report.is_threshold(), "{pr:?}: {:?}", report.violations);
                assert!(bellman_residual(sol.theta_star, &sol.v, &pr) < 1e-8);
                let exact = exact_metrics(&Policy::OptimalTable(sol.policy), &pr).unwrap();
                assert!((exact.avg_via - sol.theta_star).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn optimal_beats_baselines() {
    let pr = params(0.5, 0.6, 0.2, 0.9);
    let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
    let opt = exact_metrics(&Policy::OptimalTable(sol.policy), &pr).unwrap();
    let rs = exact_metrics(&Policy::RandomizedStationary(0.5), &pr).unwrap();
    let greedy = exact_metrics(&Policy::Greedy, &pr).unwrap();
    assert!(opt.avg_via <= rs.avg_via && opt.avg_via <= greedy.avg_via);
    assert!(opt.avg_energy <= pr.beta + 1e-9);
}

#[test]
fn stationary_distribution_axioms() {
    let pr = SystemParams::default();
    let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
    for policy in [
        Policy::OptimalTable(sol.policy),
        Policy::RandomizedStationary(0.5),
        Policy::Greedy,
    ] {
        let dist = stationary_distribution(&induced_chain(&policy, &pr)).unwrap();
        assert_eq!(dist.method, Method::StationarySolve);
        assert!(dist.pi.iter().all(|&m| m >= -1e-14));
        assert!((dist.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn simulated_optimal_policy_matches_exact() {
    let pr = params(0.5, 0.6, 0.4, 0.9);
    let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
    let policy = Policy::OptimalTable(sol.policy);
    let exact = exact_metrics(&policy, &pr).unwrap();
    let cfg = SimConfig {
        horizon: 1_000_000,
        seed: 99,
        burn_in: 10_000,
        record_trace: false,
    };
    let stats = simulate(&policy, &pr, &cfg).unwrap();
    let tol = sim_tolerance(exact.avg_via, stats.via_std_error);
    assert!(
        (stats.avg_via - exact.avg_via).abs() <= tol,
        "{stats:?} vs {exact:?}"
    );
    let tol = sim_tolerance(exact.avg_energy, stats.energy_std_error);
    assert!((stats.avg_energy - exact.avg_energy).abs() <= tol);
}

#[test]
fn simulated_greedy_energy_is_arrival_rate() {
    let pr = params(0.4, 0.7, 0.5, 0.5);
    let cfg = SimConfig {
        horizon: 1_000_000,
        seed: 5,
        burn_in: 10_000,
        record_trace: false,
    };
    let stats = simulate(&Policy::Greedy, &pr, &cfg).unwrap();
    assert!(
        (stats.avg_energy - 0.5).abs() <= 3.0 * stats.energy_std_error,
        "{stats:?}"
    );
}

fn arb_tiny() -> impl Strategy<Value = SystemParams> {
    (0.05f64..0.95, 0.05f64..0.95, 0.05f64..0.95, 0.0f64..=1.0)
        .prop_map(|(p, q, beta, p_s)| tiny(p, q, beta, p_s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn oracle_agreement_on_tiny_instances(pr in arb_tiny()) {
        let sol = relative_value_iteration(&pr, &RviOptions::default()).unwrap();
        let (theta, _) = brute_force_optimal(&pr).unwrap();
        prop_assert!((sol.theta_star - theta).abs() < 1e-6);
    }

    #[test]
    fn energy_never_exceeds_arrivals(
        p in 0.05f64..0.95, q in 0.05f64..0.95, beta in 0.05f64..0.95,
        p_s in 0.0f64..=1.0, p_alpha in 0.0f64..=1.0,
    ) {
        let pr = SystemParams { e_max: 4, delta_max: 4, ..params(p, q, beta, p_s) };
        for policy in [Policy::Greedy, Policy::RandomizedStationary(p_alpha)] {
            let m = exact_metrics(&policy, &pr).unwrap();
            prop_assert!(m.avg_energy <= beta + 1e-9);
            prop_assert!(m.avg_via >= 0.0 && m.avg_via <= 4.0 + 1e-9);
        }
        let g = exact_metrics(&Policy::Greedy, &pr).unwrap();
        prop_assert!((g.avg_energy - beta).abs() < 1e-9);
        let rs = exact_metrics(&Policy::RandomizedStationary(p_alpha), &pr).unwrap();
        prop_assert!(rs.avg_energy <= p_alpha.min(beta) + 1e-9);
    }
}
