mod common;

use common::{problem, system_matrix, unit_graph, weighted_graph};
use nalgebra::DVector;
use proptest::prelude::*;
use sisalloc_core::centralized::{feasibility_report, solve_centralized, Bound};
use sisalloc_core::epidemic::{integrate, mean_field_dominates, simulate_markov, verify_decay, EpidemicParams, InitialState};
use sisalloc_core::spectral::spectral_abscissa;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// `1 - p_i <= 1` makes the nonlinear flow dominated by its
    /// linearization `p(t) <= exp((BA - D) t) p(0)`.
    #[test]
    fn mean_field_below_linearization(
        n in 3usize..8,
        seed in 0u64..1000,
        beta in prop::collection::vec(0.05f64..1.0, 8),
        delta in prop::collection::vec(0.05f64..1.0, 8),
        p0 in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        let g = weighted_graph(n, 0.4, seed);
        let params = EpidemicParams::new(beta[..n].to_vec(), delta[..n].to_vec()).unwrap();
        let traj = integrate(&p0[..n], &g, &params, 4.0, 0.01).unwrap();
        let m = system_matrix(&g, &params.beta, &params.delta);
        let x0 = DVector::from_column_slice(&p0[..n]);
        for k in (0..traj.len()).step_by(50) {
            let bound = (&m * traj.times[k]).exp() * &x0;
            for i in 0..n {
                prop_assert!(traj.states[k][i] <= bound[i] + 1e-9, "t={} node {}", traj.times[k], i);
                prop_assert!((0.0..=1.0).contains(&traj.states[k][i]));
            }
        }
    }
}

#[test]
fn optimal_allocation_decays_at_requested_rate() {
    for seed in 0..5 {
        let prob = problem(unit_graph(8, 0.32, seed), 0.2);
        let a = solve_centralized(&prob, 1e-9).unwrap().allocation;
        let params = EpidemicParams::new(a.beta, a.delta).unwrap();
        let traj = integrate(&[0.1; 8], &prob.graph, &params, 50.0, 0.01).unwrap();
        let rep = verify_decay(&traj, 0.2).unwrap();
        assert!(rep.pass, "seed {seed}: rate {}", rep.achieved_rate);
    }
}

#[test]
fn unstable_corner_does_not_decay() {
    let prob = problem(unit_graph(8, 0.32, 3), 0.2);
    let report = feasibility_report(&prob).unwrap();
    let worst = report.corners.iter().find(|c| c.beta == Bound::Hi && c.delta == Bound::Lo).unwrap();
    assert!(worst.abscissa > 0.0);
    let b = prob.bounds().node(0);
    let params = EpidemicParams::new(vec![b.beta.hi; 8], vec![b.delta.lo; 8]).unwrap();
    assert!(spectral_abscissa(&prob.graph, &params.beta, &params.delta).unwrap() > 0.0);
    let traj = integrate(&[0.1; 8], &prob.graph, &params, 50.0, 0.01).unwrap();
    let rep = verify_decay(&traj, 0.2).unwrap();
    assert!(!rep.pass);
    assert!(rep.achieved_rate < 0.01);
}

#[test]
fn zero_initial_condition_passes_trivially() {
    let g = unit_graph(5, 0.5, 1);
    let params = EpidemicParams::new(vec![0.9; 5], vec![0.1; 5]).unwrap();
    let traj = integrate(&[0.0; 5], &g, &params, 10.0, 0.01).unwrap();
    let rep = verify_decay(&traj, 0.2).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.achieved_rate, f64::INFINITY);
}

#[test]
fn monte_carlo_stays_below_mean_field() {
    let prob = problem(unit_graph(8, 0.32, 6), 0.2);
    let a = solve_centralized(&prob, 1e-9).unwrap().allocation;
    let params = EpidemicParams::new(a.beta, a.delta).unwrap();
    let mf = integrate(&[0.1; 8], &prob.graph, &params, 20.0, 0.01).unwrap();
    let mc = simulate_markov(&prob.graph, &params, InitialState::Bernoulli(0.1), 20.0, 0.01, 200, 11).unwrap();
    let dom = mean_field_dominates(&mc, &mf, 3.0).unwrap();
    assert!(dom.holds, "worst excess {}", dom.worst_excess);
}

#[test]
fn monte_carlo_is_seeded() {
    let g = unit_graph(5, 0.5, 2);
    let params = EpidemicParams::new(vec![0.5; 5], vec![0.4; 5]).unwrap();
    let run = |seed| simulate_markov(&g, &params, InitialState::Bernoulli(0.3), 5.0, 0.01, 50, seed).unwrap();
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
}
