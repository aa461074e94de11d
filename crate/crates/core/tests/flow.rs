mod common;

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use sphereflow::flow::{run_flow, Flow, FlowConfig, Integrator};
use sphereflow::lab::local_monotone_constant;
use sphereflow::operators::{energy, OperatorParams};
use sphereflow::presets::Preset;
use sphereflow::{build_basis, norms, DomainSpec, Field, SpectralBasis};

fn basis(level: u32) -> Arc<SpectralBasis> {
    build_basis(&DomainSpec::interval(1.0, level).unwrap()).unwrap()
}

fn config(p: f64, level: u32, dt: f64, horizon: f64) -> FlowConfig {
    FlowConfig::new(OperatorParams::new(p).unwrap(), level, dt, horizon).with_stationarity_tol(0.0)
}

fn mixed(b: &Arc<SpectralBasis>) -> Field {
    Preset::Mixed.build(b, 0).unwrap()
}

#[test]
fn linear_flow_reaches_first_mode() {
    let b = basis(9);
    let run = run_flow(&mixed(&b), &config(2.0, 9, 1e-4, 5.0)).unwrap();
    let u = &run.final_state().u;
    let target = Field::from_fn(&b, |x| SQRT_2 * (PI * x[0]).sin());
    let e = u - &target;
    let h1 = (e.l2_norm().powi(2) + e.h1_seminorm_sq()).sqrt();
    assert!(h1 < 1e-4, "H1 error {h1:e}");
    let final_energy = run.ledger.last().unwrap().energy;
    assert!((final_energy - (PI * PI / 2.0 + 0.5)).abs() < 1e-6);
    // monotone energy column
    assert!(run.ledger.max_energy_increase() <= 1e-12);
}

#[test]
fn linear_flow_coefficient_ratio() {
    let b = basis(9);
    let mut flow = Flow::new(&mixed(&b), &config(2.0, 9, 1e-4, 0.1)).unwrap();
    flow.advance_to(0.1).unwrap();
    let a = flow.state().u.coefficients();
    let expect = (-3.0 * PI * PI * 0.1).exp();
    assert!((a[1] / a[0] / expect - 1.0).abs() < 1e-6);
}

#[test]
fn renormalized_runs_stay_on_the_sphere() {
    let b = basis(9);
    for (p, u0) in [(2.0, mixed(&b)), (4.0, Preset::PositiveRandom.build(&b, 5).unwrap())] {
        let run = run_flow(&u0, &config(p, 9, 1e-4, 2.0)).unwrap();
        assert!(run.ledger.max_norm_error() <= 1e-12, "p = {p}: {:e}", run.ledger.max_norm_error());
        assert!(run.ledger.dissipation_residual().unwrap() < 1e-3);
    }
}

#[test]
fn unrenormalized_drift_is_small() {
    let b = basis(9);
    for (p, u0) in [(2.0, mixed(&b)), (4.0, Preset::PositiveRandom.build(&b, 5).unwrap())] {
        let run = run_flow(&u0, &config(p, 9, 1e-4, 2.0).with_renormalize(false)).unwrap();
        let drift = (run.final_state().u.l2_norm() - 1.0).abs();
        assert!(drift <= 1e-6, "p = {p}: drift {drift:e}");
    }
}

/// Drift at `T` for a kinked datum, whose high modes keep the truncation
/// error well above rounding.
fn tent_drift(p: f64, dt: f64, integrator: Integrator) -> f64 {
    let b = basis(9);
    let u0 = Field::from_fn(&b, common::tent(1.0));
    let cfg = config(p, 9, dt, 0.05).with_renormalize(false).with_integrator(integrator);
    let run = run_flow(&u0, &cfg).unwrap();
    (run.final_state().u.l2_norm() - 1.0).abs()
}

#[test]
fn drift_shrinks_at_integrator_order() {
    for integrator in [Integrator::Rk4, Integrator::Heun] {
        let order = integrator.order() as i32;
        for p in [2.0, 4.0] {
            let coarse = tent_drift(p, 4e-4, integrator);
            let fine = tent_drift(p, 2e-4, integrator);
            let ratio = coarse / fine;
            // the drift is produced in the stiff transient, so it may fall one
            // order faster than the global error
            let ideal = 2f64.powi(order);
            assert!(
                (0.6 * ideal..3.2 * ideal).contains(&ratio),
                "{} p = {p}: drift {coarse:e} -> {fine:e}, ratio {ratio}",
                integrator.name()
            );
        }
    }
}

#[test]
fn dissipation_identity_improves_with_dt() {
    let b = basis(9);
    for (p, u0) in [(2.0, mixed(&b)), (4.0, Preset::PositiveRandom.build(&b, 5).unwrap())] {
        let coarse = run_flow(&u0, &config(p, 9, 1e-4, 2.0)).unwrap().ledger.dissipation_residual().unwrap();
        let fine = run_flow(&u0, &config(p, 9, 5e-5, 2.0)).unwrap().ledger.dissipation_residual().unwrap();
        assert!(coarse < 1e-3 && fine < 2.5e-4, "p = {p}: {coarse:e}, {fine:e}");
        assert!(fine <= coarse);
    }
}

#[test]
fn galerkin_levels_converge() {
    let fine = basis(12);
    let u0 = Preset::Bump.build(&fine, 0).unwrap();
    let dt = 0.4 / fine.lambda_max();
    let finals: Vec<Field> = (7..=12)
        .map(|m| {
            let run = run_flow(&u0, &config(4.0, m, dt, 0.05)).unwrap();
            run.final_state().u.transfer_to(&fine).unwrap()
        })
        .collect();
    let gaps: Vec<f64> = finals.windows(2).map(|w| (&w[0] - &w[1]).l2_norm()).collect();
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "gaps {gaps:?}");
    }
}

#[test]
fn identical_runs_agree_bit_for_bit() {
    let b = basis(9);
    let u0 = Preset::PositiveRandom.build(&b, 11).unwrap();
    let cfg = config(4.0, 9, 1e-4, 0.5);
    let (r1, r2) = (run_flow(&u0, &cfg).unwrap(), run_flow(&u0, &cfg).unwrap());
    assert_eq!(r1.final_state().u.coefficients(), r2.final_state().u.coefficients());
    let (mut c1, mut c2) = (Vec::new(), Vec::new());
    r1.ledger.write_csv(&mut c1, &[]).unwrap();
    r2.ledger.write_csv(&mut c2, &[]).unwrap();
    assert_eq!(c1, c2);
}

/// `d/dt ½‖u - v‖² = ⟨𝒢(u) - 𝒢(v), u - v⟩` on `V_m`, so `ln(d(t)/d(0))` is
/// bounded by the time integral of the local monotonicity bracket.
#[test]
fn trajectories_separate_at_most_at_the_monotone_rate() {
    let b = basis(9);
    let p = 4.0;
    let u0 = Preset::PositiveRandom.build(&b, 1).unwrap();
    let v0 = Preset::PositiveRandom.build(&b, 2).unwrap();
    let cfg = config(p, 9, 1e-4, 1.0);
    let (mut fu, mut fv) = (Flow::new(&u0, &cfg).unwrap(), Flow::new(&v0, &cfg).unwrap());
    let c = local_monotone_constant(p, 1.0);
    let bracket = |u: &Field, v: &Field| {
        let (nu, nv) = (norms(u, p).unwrap(), norms(v, p).unwrap());
        let v2 = nv.l2 * nv.l2;
        nu.h1_seminorm.powi(2)
            + 0.5 * (nu.h1_seminorm + nv.h1_seminorm).powi(2) * v2
            + nu.lp.powf(p)
            + c * (nu.lp.powf(p - 1.0) + nv.lp.powf(p - 1.0)) * v2
    };
    let d0 = (&fu.state().u - &fv.state().u).l2_norm();
    let mut integral = 0.0;
    let mut prev = bracket(&fu.state().u, &fv.state().u);
    let mut k_emp = f64::NEG_INFINITY;
    for step in 1..=10_000 {
        fu.step().unwrap();
        fv.step().unwrap();
        let (u, v) = (&fu.state().u, &fv.state().u);
        let now = bracket(u, v);
        integral += 0.5 * (prev + now) * 1e-4;
        prev = now;
        let growth = ((u - v).l2_norm() / d0).ln();
        assert!(growth <= integral + 1e-9, "step {step}: {growth} > {integral}");
        k_emp = k_emp.max(growth / (step as f64 * 1e-4));
    }
    eprintln!("empirical Gronwall rate K = {k_emp:.4} (bracket integral {integral:.1})");
    assert!(k_emp.is_finite());
    // the ground state attracts both runs
    assert!((energy(&fu.state().u, p).unwrap() - energy(&fv.state().u, p).unwrap()).abs() < 1e-6);
}
