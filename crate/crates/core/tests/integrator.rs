use hbvm::hamiltonians::{problem_biot, problem_fhp, problem_fpu, problem_harmonic};
use hbvm::integrator::{adjoint_consistency_check, per_step_energy_error, rk_step};
use hbvm::{
    convergence_study, drift_experiment, hbvm_step, integrate, ButcherTableau, CanonicalSystem, SolverOptions,
};

fn options_for(sys: &dyn CanonicalSystem) -> SolverOptions {
    if sys.name() == "fpu" {
        SolverOptions::newton()
    } else {
        SolverOptions::default()
    }
}

fn step_for(sys: &dyn CanonicalSystem) -> f64 {
    match sys.name() {
        "fhp" => 0.16,
        "fpu" => 0.05,
        _ => 0.1,
    }
}

#[test]
fn energy_conserved_for_polynomial_problems_within_degree() {
    let problems: Vec<Box<dyn CanonicalSystem>> =
        vec![Box::new(problem_fhp()), Box::new(problem_fpu()), Box::new(problem_harmonic())];
    for (k, s) in [(1, 1), (2, 2), (4, 2), (6, 2), (6, 3)] {
        let tab = ButcherTableau::hbvm(k, s).unwrap();
        for sys in &problems {
            let nu = sys.poly_degree().unwrap() as usize;
            if nu * s > 2 * k {
                continue;
            }
            let y0 = sys.initial_state();
            let traj = integrate(&tab, sys.as_ref(), &y0, step_for(sys.as_ref()), 1000, &options_for(sys.as_ref()))
                .unwrap();
            let err = traj.max_energy_error();
            assert!(err <= 1e-10, "HBVM({k},{s}) {}: {err:e}", sys.name());
        }
    }
}

#[test]
fn one_step_energy_of_hbvm_6_2_on_fhp() {
    let tab = ButcherTableau::hbvm(6, 2).unwrap();
    let opts = SolverOptions::default();
    let err = per_step_energy_error(&tab, &problem_fhp(), &problem_fhp().initial_state(), 0.16, &opts).unwrap();
    assert!(err <= 10.0 * opts.tolerance, "{err:e}");
}

#[test]
fn energy_error_is_visible_below_the_degree_threshold() {
    // HBVM(2,2) cannot preserve a degree-6 Hamiltonian
    let tab = ButcherTableau::hbvm(2, 2).unwrap();
    let sys = problem_fhp();
    let err = per_step_energy_error(&tab, &sys, &sys.initial_state(), 0.16, &SolverOptions::default()).unwrap();
    assert!(err > 1e-10, "{err:e}");
}

#[test]
fn adjoint_residuals_are_small() {
    let opts = SolverOptions::default();
    let r = adjoint_consistency_check(&ButcherTableau::hbvm(2, 2).unwrap(), &problem_harmonic(), &[1.0, 0.0], 0.1, &opts)
        .unwrap();
    assert!(r <= 1e-12, "{r:e}");
    let fhp = problem_fhp();
    let r = adjoint_consistency_check(&ButcherTableau::hbvm(6, 2).unwrap(), &fhp, &fhp.initial_state(), 0.16, &opts)
        .unwrap();
    assert!(r <= 1e-11, "{r:e}");

    let problems: Vec<Box<dyn CanonicalSystem>> = vec![
        Box::new(problem_fhp()),
        Box::new(problem_fpu()),
        Box::new(problem_biot()),
        Box::new(problem_harmonic()),
    ];
    for (k, s) in [(1, 1), (2, 2), (4, 2), (6, 2), (6, 3)] {
        let tab = ButcherTableau::hbvm(k, s).unwrap();
        for sys in &problems {
            let opts = options_for(sys.as_ref());
            let r = adjoint_consistency_check(&tab, sys.as_ref(), &sys.initial_state(), step_for(sys.as_ref()), &opts)
                .unwrap();
            let scale = 1.0 + sys.initial_state().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(r <= 50.0 * opts.tolerance * scale, "HBVM({k},{s}) {}: {r:e}", sys.name());
        }
    }
}

#[test]
fn low_rank_solver_matches_full_stage_iteration() {
    let opts = SolverOptions::default();
    for (k, s) in [(2, 1), (4, 2), (6, 2), (6, 3)] {
        let tab = ButcherTableau::hbvm(k, s).unwrap();
        for sys in [&problem_fhp() as &dyn CanonicalSystem, &problem_biot()] {
            let y0 = sys.initial_state();
            let fast = hbvm_step(&tab, sys, &y0, 0.05, &opts).unwrap().y1;
            let full = rk_step(&tab, sys, &y0, 0.05, &opts).unwrap();
            for (a, b) in fast.iter().zip(&full) {
                assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()), "HBVM({k},{s}) {}", sys.name());
            }
        }
    }
}

#[test]
fn convergence_orders_on_fhp() {
    let sys = problem_fhp();
    let y0 = sys.initial_state();
    let opts = SolverOptions::default();
    for (k, s) in [(2, 1), (4, 2), (6, 2), (6, 3)] {
        let tab = ButcherTableau::hbvm(k, s).unwrap();
        let h0 = if s == 3 { 0.32 } else { 0.08 };
        let rep = convergence_study(&tab, &sys, &y0, h0, 4, 2.56, &opts).unwrap();
        let last = *rep.orders.last().unwrap();
        assert!((last - 2.0 * s as f64).abs() <= 0.2, "HBVM({k},{s}) orders {:?}", rep.orders);
    }
}

#[test]
fn tiny_step_reference_keeps_energy() {
    let tab = ButcherTableau::hbvm(6, 3).unwrap();
    let problems: Vec<Box<dyn CanonicalSystem>> = vec![
        Box::new(problem_fhp()),
        Box::new(problem_fpu()),
        Box::new(problem_biot()),
        Box::new(problem_harmonic()),
    ];
    for sys in &problems {
        let y0 = sys.initial_state();
        let traj = integrate(&tab, sys.as_ref(), &y0, 1e-3, 200, &options_for(sys.as_ref())).unwrap();
        assert!(traj.max_energy_error() <= 1e-10, "{}: {:e}", sys.name(), traj.max_energy_error());
    }
}

#[test]
fn larger_k_improves_biot_energy() {
    let sys = problem_biot();
    let y0 = sys.initial_state();
    let opts = SolverOptions::default();
    let coarse = drift_experiment(&ButcherTableau::hbvm(4, 2).unwrap(), &sys, &y0, 0.1, 10_000, &opts).unwrap();
    let fine = drift_experiment(&ButcherTableau::hbvm(6, 2).unwrap(), &sys, &y0, 0.1, 10_000, &opts).unwrap();
    assert!(
        fine.max_abs_deviation * 10.0 <= coarse.max_abs_deviation,
        "HBVM(6,2) {:e} vs HBVM(4,2) {:e}",
        fine.max_abs_deviation,
        coarse.max_abs_deviation
    );
}

#[test]
fn runs_are_deterministic() {
    let tab = ButcherTableau::hbvm(6, 2).unwrap();
    let sys = problem_fpu();
    let y0 = sys.initial_state();
    let a = integrate(&tab, &sys, &y0, 0.05, 200, &SolverOptions::newton()).unwrap();
    let b = integrate(&tab, &sys, &y0, 0.05, 200, &SolverOptions::newton()).unwrap();
    assert_eq!(a, b);
    let c1 = convergence_study(&tab, &problem_fhp(), &problem_fhp().initial_state(), 0.32, 3, 2.56, &SolverOptions::default())
        .unwrap();
    let c2 = convergence_study(&tab, &problem_fhp(), &problem_fhp().initial_state(), 0.32, 3, 2.56, &SolverOptions::default())
        .unwrap();
    assert_eq!(c1, c2);
}
