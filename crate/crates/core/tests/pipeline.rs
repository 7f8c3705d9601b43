use approx::assert_abs_diff_eq;

use hybrid_ei::analysis::{
    lyapunov_trace, razumikhin_audit, zeno_recursion_oracle, zeno_report, AuditSpec, ZenoVerdict,
};
use hybrid_ei::certificates::{select_parameters, BetaBranch, SelectionInput};
use hybrid_ei::commands::simulate;
use hybrid_ei::config::parse_config;
use hybrid_ei::{EventKind, Side};

fn v(x: &[f64]) -> f64 {
    x[0] * x[0]
}

#[test]
fn hybrid_lyapunov_sup_on_initial_segment() {
    let sim = simulate(&parse_config("mode = hybrid\nhorizon = 60").unwrap()).unwrap();
    let trace = lyapunov_trace(&sim.trajectory, v, 0.0, sim.t0);
    assert_eq!(trace.series.len(), sim.trajectory.len());
    assert_abs_diff_eq!(trace.sup, 1.0, epsilon = 1e-12);
    assert!(trace.sup_time <= sim.t0);
    assert!(!trace.lambda_too_large);
}

#[test]
fn lambda_above_fitted_rate_is_flagged() {
    let sim = simulate(&parse_config("mode = hybrid\nhorizon = 100").unwrap()).unwrap();
    assert!(lyapunov_trace(&sim.trajectory, v, 1.0, sim.t0).lambda_too_large);
}

#[test]
fn dwell_growth_bound_holds_before_impulses() {
    let cfg = parse_config("mode = hybrid\nhorizon = 40").unwrap();
    let sim = simulate(&cfg).unwrap();
    let cbar = 0.6 * 3.0f64.sqrt();
    let records = &sim.events.records;
    let mut intervals = 0;
    for pair in records.windows(2).filter(|w| w[1].kind == EventKind::ImpulsePlusUpdate) {
        let spec = AuditSpec {
            q: 3.0,
            tau: cfg.r,
            tolerance: 10.0 * cfg.dt,
            span: Some((pair[0].time, pair[1].time)),
        };
        let audit = razumikhin_audit(&sim.trajectory, v, &spec, |_, val| cbar * val);
        assert!(audit.is_clean(), "{:?}", audit.violations.first());
        intervals += 1;
    }
    assert!(intervals > 0);
}

#[test]
fn coarse_step_keeps_contraction_ratio() {
    let cfg = parse_config("mode = event_only\ndt = 0.1\nzeno_guard = 200\nhorizon = 10").unwrap();
    let sim = simulate(&cfg).unwrap();
    let report = zeno_report(&sim, None);
    assert!(report.contraction_ratios.len() >= 20);
    for r in &report.contraction_ratios[..20] {
        assert_abs_diff_eq!(*r, 0.625, epsilon = 1e-2);
    }
    assert_eq!(report.verdict, ZenoVerdict::ZenoSuspected);
    let oracle = zeno_recursion_oracle(1.0, -0.1, -0.2, 0.36, 16.0, 10.0).unwrap();
    assert!(report.accumulation_estimate < 10.0);
    assert_abs_diff_eq!(report.accumulation_estimate, oracle.accumulation_time, epsilon = 1e-3);
}

#[test]
fn hybrid_gaps_respect_dwell() {
    let sim = simulate(&parse_config("mode = hybrid\nhorizon = 100").unwrap()).unwrap();
    assert_eq!(zeno_report(&sim, Some(0.666)).verdict, ZenoVerdict::DwellBounded);
    for r in sim.events.records.iter().filter(|r| r.kind == EventKind::ImpulsePlusUpdate) {
        let left = sim.trajectory.sample(r.sample_index, Side::Left)[0];
        assert_eq!(left, r.state_before[0]);
    }
}

#[test]
fn selected_parameters_stabilize() {
    let report = select_parameters(&SelectionInput::new(-0.1, -0.2).with_target_h(0.666)).unwrap();
    assert!(report.condition_iii.passes);
    let c = report.constants;
    assert_abs_diff_eq!(c.beta, BetaBranch::Contraction.beta(c.rho), epsilon = 1e-12);
    let cfg = parse_config(&format!("mode = hybrid\nq = {}\nbeta = {}\nh = {}\nhorizon = 80", c.q, c.beta, c.h)).unwrap();
    let sim = simulate(&cfg).unwrap();
    assert!(sim.max_norm_on(60.0, 80.0) < sim.max_norm_on(0.0, 20.0));
}
