mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use sphereflow::flow::FlowConfig;
use sphereflow::ground_state::{
    cross_validate, lambda_search, linear_ground_state, mass_curve, solve_by_flow, stationary_residual,
    sub_super_solve, LambdaSearchOptions, SubSuperOptions,
};
use sphereflow::lab::FieldSampler;
use sphereflow::operators::{energy, nonlinearity, s_functional, OperatorParams};
use sphereflow::presets::Preset;
use sphereflow::{build_basis, DomainSpec, Error, Field, GroundStateResult, SpectralBasis};

fn basis(level: u32) -> Arc<SpectralBasis> {
    build_basis(&DomainSpec::interval(1.0, level).unwrap()).unwrap()
}

fn flow_minimizer(b: &Arc<SpectralBasis>, p: f64) -> GroundStateResult {
    let cfg = FlowConfig::new(OperatorParams::new(p).unwrap(), b.domain().level(), 1e-4, 50.0)
        .with_stationarity_tol(1e-10);
    solve_by_flow(&Preset::Bump.build(b, 0).unwrap(), &cfg).unwrap()
}

fn shooting(b: &Arc<SpectralBasis>, p: f64) -> GroundStateResult {
    lambda_search(p, b, &LambdaSearchOptions::default()).unwrap().result
}

#[test]
fn both_solvers_match_the_finite_difference_oracle() {
    let b = basis(9);
    let fd = common::fd_ground_state(4.0, 1.0, 4000);
    assert!((fd.mass() - 1.0).abs() < 1e-12);
    for r in [flow_minimizer(&b, 4.0), shooting(&b, 4.0)] {
        let gap = fd.l2_distance(&r.profile);
        assert!(gap < 1e-5, "{}: L2 gap to oracle {gap:e}", r.method.name());
        assert!((r.lambda - fd.lambda).abs() < 1e-5, "{}: lambda {} vs {}", r.method.name(), r.lambda, fd.lambda);
        assert!(r.residual < 1e-6);
        assert!((r.lambda - s_functional(&r.profile, 4.0).unwrap()).abs() < 1e-8);
        assert!((r.profile.l2_norm() - 1.0).abs() < 1e-8);
        assert!(r.profile.min_sample() > 0.0);
    }
}

#[test]
fn solvers_cross_validate() {
    let b = basis(9);
    let report = cross_validate(&flow_minimizer(&b, 4.0), &shooting(&b, 4.0)).unwrap();
    assert!(report.pass, "{report:?}");
    let p2 = cross_validate(&flow_minimizer(&b, 2.0), &linear_ground_state(&b).unwrap()).unwrap();
    assert!(p2.pass, "{p2:?}");
}

#[test]
fn cross_validation_against_itself_is_exact() {
    let b = basis(9);
    let r = shooting(&b, 4.0);
    let c = cross_validate(&r, &r).unwrap();
    assert_eq!((c.l2_gap, c.lambda_gap, c.energy_gap), (0.0, 0.0, 0.0));
}

#[test]
fn fixed_lambda_iteration_matches_oracle() {
    let b = basis(9);
    let lambda = 2.0 * PI * PI;
    let out = sub_super_solve(lambda, 4.0, &b, &SubSuperOptions::default()).unwrap();
    let u = &out.profile;
    let residual = (&u.laplacian() + &u.scaled(lambda)).axpy(-1.0, &nonlinearity(u, 4.0).unwrap()).unwrap();
    assert!(residual.l2_norm() < 1e-7, "residual {:e}", residual.l2_norm());
    let fd = common::fd_fixed_lambda(lambda, 4.0, 1.0, 4000);
    assert!(fd.l2_distance(u) < 1e-5, "gap {:e}", fd.l2_distance(u));
    assert!(out.max_increase <= 0.0 || out.max_increase < 1e-12);
    assert!(out.min_gap_to_sub >= -1e-12 && out.max_gap_to_super <= 1e-12);
}

#[test]
fn near_bifurcation_mass_vanishes() {
    let b = basis(9);
    // the amplitude decays algebraically here, so allow more iterations
    let opts = SubSuperOptions { max_iter: 20_000_000, ..SubSuperOptions::default() };
    let out = sub_super_solve(PI * PI + 1e-12, 4.0, &b, &opts).unwrap();
    let mass = out.profile.l2_norm().powi(2);
    assert!(mass < 1e-5, "mass {mass:e}");
    eprintln!("mass {mass:e} after {} iterations", out.iterations);
    assert!(matches!(sub_super_solve(PI * PI, 4.0, &b, &SubSuperOptions::default()), Err(Error::NoPositiveSolution { .. })));
}

#[test]
fn mass_curve_increases_on_the_bracket() {
    let b = basis(9);
    let search = lambda_search(4.0, &b, &LambdaSearchOptions::default()).unwrap();
    let lo = b.lambda_min() + 0.05;
    let hi = search.bisection_lambda + 1.0;
    let lambdas: Vec<f64> = (0..=20).map(|i| lo + (hi - lo) * i as f64 / 20.0).collect();
    let curve = mass_curve(&lambdas, 4.0, &b, &SubSuperOptions::default()).unwrap();
    for w in curve.windows(2) {
        assert!(w[1].1 > w[0].1, "{w:?}");
    }
}

#[test]
fn linear_case_is_dispatched() {
    let b = basis(9);
    assert!(lambda_search(2.0, &b, &LambdaSearchOptions::default()).is_err());
    let r = linear_ground_state(&b).unwrap();
    assert!((r.lambda - (PI * PI + 1.0)).abs() < 1e-10);
    assert!((r.energy - (PI * PI / 2.0 + 0.5)).abs() < 1e-10);
    assert!(stationary_residual(&Field::mode(&b, 1), 2.0).unwrap() < 1e-10);
}

#[test]
fn ground_state_minimizes_energy_over_random_unit_fields() {
    let b = basis(9);
    let u = shooting(&b, 4.0);
    let sampler = FieldSampler::new(99);
    let mut rng = sampler.rng();
    for _ in 0..100 {
        let v = sampler.draw_unit(&mut rng, &b);
        assert!(u.energy <= energy(&v, 4.0).unwrap());
    }
    // and over small perturbations of itself
    for _ in 0..100 {
        let v = u.profile.axpy(1e-3, &sampler.draw(&mut rng, &b, 4.0)).unwrap().normalized().unwrap();
        assert!(u.energy <= energy(&v, 4.0).unwrap() + 1e-14);
    }
}

#[test]
fn rectangle_ground_state_cross_validates() {
    let b = build_basis(&DomainSpec::rectangle(1.0, 0.8, 8).unwrap()).unwrap();
    let a = flow_minimizer(&b, 4.0);
    let c = shooting(&b, 4.0);
    let report = cross_validate(&a, &c).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(a.profile.min_sample() > 0.0 && c.profile.min_sample() > 0.0);
}
