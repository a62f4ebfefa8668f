mod common;

use cardiac_sdc::adaptivity::{select_active, SweepSystem};
use cardiac_sdc::collocation::CollocationScheme;
use cardiac_sdc::sdc::{sdc_residual, sdc_sweep, SdcState};
use common::*;

#[test]
fn converged_step_is_l_stable() {
    let scheme = CollocationScheme::radau_iia(3).unwrap();
    for lambda in [-1e4, -1e6, -1e8] {
        let problem = Decay::new(lambda);
        let mut state = SdcState::new(1.0, vec![1.0], vec![], 3);
        converge(&mut state, &problem, &scheme, 1e-300, 50);
        let end = state.end_u()[0].abs();
        assert!(end <= 10.0 / lambda.abs(), "lambda {lambda}: |u(T)| = {end:e}");
    }
}

#[test]
fn nonlinear_collocation_residual_vanishes_at_convergence() {
    let scheme = CollocationScheme::radau_iia(3).unwrap();
    let problem = PowerDecay::new(3);
    let mut state = SdcState::new(0.4, vec![1.0], vec![], 3);
    let sweeps = converge(&mut state, &problem, &scheme, 1e-15, 60);
    assert!(sweeps < 60);
    let (phi, _) = sdc_residual(&state, &problem, &scheme).unwrap();
    for p in phi {
        assert!(p[0].abs() < 1e-14, "{p:?}");
    }
}

#[test]
fn zero_drop_tolerance_keeps_every_dof_and_matches_full_sweeps() {
    let c = standard_config();
    let sim = cardiac_sdc::driver::Simulation::new(c).unwrap();
    let s0 = sim.initial_state().unwrap();
    let cg = sim.config.sdc.cg();
    let mut full = SdcState::new(0.1, s0.u.clone(), s0.w.clone(), 3);
    let mut restricted = full.clone();
    let whole = SweepSystem::full(&sim.ops);
    let mut system = SweepSystem::full(&sim.ops);
    for _ in 0..4 {
        sdc_sweep(&mut full, &sim.ops, &sim.scheme, &whole, &cg).unwrap();
        let report = sdc_sweep(&mut restricted, &sim.ops, &sim.scheme, &system, &cg).unwrap();
        let next = select_active(&report.corrections, 0.0, system.active());
        system = system.restrict(&sim.ops, next).unwrap();
        assert_eq!(system.active().len(), sim.ops.dofs().len());
    }
    assert_eq!(full.u, restricted.u);
    assert_eq!(full.w, restricted.w);
}

/// Correction norms shrink by at least 0.9 per sweep beyond the second, in
/// the median over all steps of the standard run.
#[test]
fn corrections_decay_after_the_second_sweep() {
    let out = run(&standard_config());
    let mut ratios = Vec::new();
    for step in &out.log.steps {
        for k in 2..step.sweeps.len() {
            let (prev, cur) = (step.sweeps[k - 1].correction, step.sweeps[k].correction);
            if prev > 0.0 {
                ratios.push((cur / prev).sqrt());
            }
        }
    }
    assert!(ratios.len() > 20, "only {} sweep pairs", ratios.len());
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!(median <= 0.9, "median contraction {median}");
}

#[test]
fn emi_sweeps_converge_to_tight_tolerance() {
    let mut c = load_config("emi_chain.toml");
    c.output.snapshot_every = 0;
    c.sdc.end_time = 10.0 * c.sdc.dt;
    c.sdc.tol = 1e-12;
    c.sdc.cg_reduction = 1e-10;
    let out = run(&c);
    for step in &out.log.steps {
        assert!(step.converged, "step {} took {} sweeps", step.step, step.sweeps.len());
        assert!(step.sweeps.len() <= 12, "step {} took {} sweeps", step.step, step.sweeps.len());
    }
}
