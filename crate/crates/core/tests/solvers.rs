//! Cross-solver checks through the scenario layer.

mod common;

use common::{rabi_hamiltonian, trace_distance, UnitaryOracle};
use rabi_dme::exec::Exec;
use rabi_dme::scenario::{evolve_run, parse_config, planned_runs, preset_config, run_scenario, RunKind, TruncChoice};

#[test]
fn zero_rates_all_solvers_agree() {
    let cfg = parse_config(
        "[model]\nOmega0 = 1.5\ng = 0.5\n[initial]\nkind = \"squeezed_vacuum\"\ns = 0.4\n[grid]\nt_max = 30.0\nn_samples = 31\n[trunc]\nQ1 = 25\n",
    )
    .unwrap();
    let out = run_scenario(&cfg, Exec::Parallel).unwrap();
    let gksl = &out.trajectory(RunKind::Gksl).unwrap().records;
    for t in &out.trajectories {
        for (a, b) in gksl.iter().zip(&t.records) {
            assert!((a.p_e - b.p_e).abs() < 1e-6, "{} at t = {}", t.run.tag(), a.t);
        }
    }
}

#[test]
fn figure_ten_emits_series_and_snapshots() {
    let mut cfg = preset_config(10).unwrap();
    // shortened axis and truncation; structure matches the full run
    cfg.grid.t_max = 30.0;
    cfg.grid.n_samples = 31;
    cfg.snapshots = vec![10.0, 20.0, 30.0];
    cfg.trunc = TruncChoice::Fixed(14);
    cfg.tail_tol = 0.5;
    let out = run_scenario(&cfg, Exec::Parallel).unwrap();
    assert_eq!(out.trajectories.len(), 3);
    for t in &out.trajectories {
        assert_eq!(t.records.len(), 31);
        assert_eq!(t.distributions.len(), 3);
        assert!(t.postselected_distributions.is_empty());
        assert!(t.distributions.iter().all(|d| d.probabilities.len() == 15));
    }
}

#[test]
fn modulated_runs_use_bare_dme_and_postselect() {
    let mut cfg = preset_config(17).unwrap();
    cfg.grid.t_max = 50.0;
    cfg.grid.n_samples = 11;
    cfg.snapshots = vec![50.0];
    cfg.trunc = TruncChoice::Fixed(6);
    assert!(planned_runs(&cfg).iter().all(|r| !matches!(r, RunKind::DmeDressed(_))));
    let out = run_scenario(&cfg, Exec::Parallel).unwrap();
    for t in &out.trajectories {
        let last = t.records.last().unwrap().postselected.unwrap();
        assert!(last.p_g > 0.5 && last.f_ph.is_finite() && last.m_opt >= last.m_av);
        let ps = &t.postselected_distributions;
        assert_eq!(ps.len(), 1);
        assert!((ps[0].probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn unitary_gksl_matches_eigen_propagator() {
    let cfg = parse_config(
        "[model]\nOmega0 = 2.0\ng = 0.4\n[initial]\nkind = \"odd_cat\"\nalpha = 1.2\n[grid]\nt_max = 20.0\nn_samples = 21\n[trunc]\nQ1 = 14\n[integrator]\nrel_tol = 1e-10\nabs_tol = 1e-12\n",
    )
    .unwrap();
    let trunc = rabi_dme::hilbert::TruncationScheme::new(14);
    let field = cfg.initial.field.generate(trunc, cfg.tail_tol).unwrap();
    let rho0 = rabi_dme::states::initial_bare_state(&field, false, trunc).unwrap();
    let oracle = UnitaryOracle::new(&rabi_hamiltonian(14, 1.0, 2.0, 0.4), &rho0.to_density());
    let mut worst = 0.0f64;
    evolve_run(&cfg, RunKind::Gksl, &field, trunc, Exec::Sequential, |_, t, s| {
        worst = worst.max(trace_distance(&s.to_density(), &oracle.at(t)));
        Ok(())
    })
    .unwrap();
    assert!(worst < 1e-8, "{worst:e}");
}
