//! Stationary solutions on the unit sphere.
//!
//! Two independent routes to the positive ground state:
//!
//! * [`solve_by_flow`] runs the constrained flow until it is stationary and
//!   reads off the multiplier `λ = 𝒮(U)`;
//! * [`lambda_search`] fixes `λ`, solves `-Δu + |u|^{p-2}u = λu` for the
//!   positive solution by monotone sub/super-solution iteration
//!   ([`sub_super_solve`]) and bisects on `λ` until `‖u‖_{L²} = 1`.
//!
//! For `p = 2` the ground state is the first eigenfunction with
//! `λ = λ_1 + 1`; see [`linear_ground_state`].

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{check_exponent, Field, SpectralBasis};
use crate::error::{Error, Result};
use crate::flow::{Flow, FlowConfig};
use crate::operators::{energy, rhs_g, s_functional, signed_power};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Flow,
    SubSuper,
    Eigenfunction,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Flow => "flow",
            Method::SubSuper => "sub_super",
            Method::Eigenfunction => "eigenfunction",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub profile: Field,
    /// Multiplier `λ = 𝒮(U)`.
    pub lambda: f64,
    /// `‖ΔU - |U|^{p-2}U + 𝒮(U)U‖_{L²}`.
    pub residual: f64,
    pub energy: f64,
    pub iterations: usize,
    pub method: Method,
    pub p: f64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    lambda: f64,
    energy: f64,
    residual: f64,
    method: &'a str,
    iterations: usize,
}

impl GroundStateResult {
    /// Derive `λ`, residual and energy from a profile.
    pub fn from_profile(profile: Field, p: f64, method: Method, iterations: usize) -> Result<Self> {
        let lambda = s_functional(&profile, p)?;
        let residual = stationary_residual(&profile, p)?;
        let energy = energy(&profile, p)?;
        Ok(GroundStateResult { profile, lambda, residual, energy, iterations, method, p })
    }

    /// JSON sidecar `{lambda, energy, residual, method, iterations}`.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&Sidecar {
            lambda: self.lambda,
            energy: self.energy,
            residual: self.residual,
            method: self.method.name(),
            iterations: self.iterations,
        })
        .expect("plain numeric record")
    }

    pub fn write_sidecar<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.sidecar_json())?;
        Ok(())
    }
}

/// `‖𝒢(U)‖_{L²}`.
pub fn stationary_residual(u: &Field, p: f64) -> Result<f64> {
    Ok(rhs_g(u, p)?.l2_norm())
}

/// The first eigenfunction, which is the ground state when `p = 2`.
pub fn linear_ground_state(basis: &Arc<SpectralBasis>) -> Result<GroundStateResult> {
    GroundStateResult::from_profile(Field::mode(basis, 0), 2.0, Method::Eigenfunction, 0)
}

/// Run the flow from `u0` until `‖∇_ℳℰ‖ < config.stationarity_tol`.
/// `config.horizon` bounds the integration time.
pub fn solve_by_flow(u0: &Field, config: &FlowConfig) -> Result<GroundStateResult> {
    if !(config.stationarity_tol > 0.0) {
        return Err(Error::InvalidFlowConfig("solve_by_flow needs a positive stationarity tolerance".into()));
    }
    let mut flow = Flow::new(u0, config)?;
    let stationary = flow.advance_to(config.horizon)?;
    if !stationary {
        return Err(Error::NonConvergence { steps: flow.state().steps, residual: flow.grad_norm() });
    }
    let steps = flow.state().steps;
    let (state, _) = flow.into_parts();
    GroundStateResult::from_profile(state.u, config.params.p, Method::Flow, steps)
}

/// Controls for [`sub_super_solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubSuperOptions {
    /// Stop once the grid sup-norm of the increment is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Allowed pointwise increase before the iteration counts as non-monotone.
    pub monotone_slack: f64,
}

impl Default for SubSuperOptions {
    fn default() -> Self {
        SubSuperOptions { tol: 1e-10, max_iter: 2_000_000, monotone_slack: 1e-12 }
    }
}

/// Profile and diagnostics of a sub/super-solution iteration.
#[derive(Clone, Debug)]
pub struct SubSuperOutcome {
    pub profile: Field,
    pub iterations: usize,
    /// Constant super-solution `ū`.
    pub super_value: f64,
    /// Amplitude `ε` of the sub-solution `ε w_1`.
    pub sub_amplitude: f64,
    /// Shift `k` of the iteration operator `-Δ + k`.
    pub shift: f64,
    /// Largest pointwise increase seen between consecutive iterates.
    pub max_increase: f64,
    /// Smallest value of `u_j - ε w_1` over all iterates and grid nodes.
    pub min_gap_to_sub: f64,
    /// Largest value of `u_j - ū` over all iterates and grid nodes.
    pub max_gap_to_super: f64,
    pub last_increment: f64,
}

/// The constant super-solution `max(λ^{1/(p-1)}, λ^{1/(p-2)})`.
pub fn super_solution(lambda: f64, p: f64) -> f64 {
    lambda.powf(1.0 / (p - 1.0)).max(lambda.powf(1.0 / (p - 2.0)))
}

/// `sup |f'|` on `[0, ū]` for `f(u) = λu - u^{p-1}`.
pub fn iteration_shift(lambda: f64, p: f64, super_value: f64) -> f64 {
    lambda.max((p - 1.0) * super_value.powf(p - 2.0) - lambda)
}

/// Positive solution of `-Δu + |u|^{p-2}u = λu` by the monotone iteration
/// `(-Δ + k) u_{j+1} = f(u_j) + k u_j`, started at the constant
/// super-solution and solved diagonally on `basis`.
pub fn sub_super_solve(
    lambda: f64,
    p: f64,
    basis: &Arc<SpectralBasis>,
    opts: &SubSuperOptions,
) -> Result<SubSuperOutcome> {
    check_exponent(p)?;
    if p < 3.0 {
        return Err(Error::InvalidExponent(p));
    }
    let lambda1 = basis.lambda_min();
    if !(lambda > lambda1) {
        return Err(Error::NoPositiveSolution { lambda, lambda1 });
    }
    let ubar = super_solution(lambda, p);
    let k = iteration_shift(lambda, p, ubar);
    let w1_max: f64 = basis.domain().lengths().iter().map(|l| (2.0 / l).sqrt()).product();
    let eps = 0.5 * (lambda - lambda1).powf(1.0 / (p - 2.0)) / w1_max;
    let sub: Vec<f64> = basis.mode_samples(0).iter().map(|w| eps * w).collect();

    let denom: Vec<f64> = basis.eigenvalues().iter().map(|l| l + k).collect();
    let mut u = vec![ubar; basis.num_points()];
    let mut next = vec![0.0; basis.num_points()];
    let mut g = vec![0.0; basis.num_points()];
    let mut coeffs = vec![0.0; basis.len()];
    let (mut max_increase, mut min_gap, mut max_gap) = (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut increment = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        for (gi, &x) in g.iter_mut().zip(&u) {
            *gi = lambda * x - signed_power(x, p) + k * x;
        }
        basis.analyze_into(&g, &mut coeffs)?;
        for (c, d) in coeffs.iter_mut().zip(&denom) {
            *c /= d;
        }
        basis.synthesize_into(&coeffs, &mut next)?;
        iterations += 1;
        increment = 0.0;
        let mut step_increase = f64::NEG_INFINITY;
        for j in 0..next.len() {
            let diff = next[j] - u[j];
            increment = f64::max(increment, diff.abs());
            step_increase = step_increase.max(diff);
            min_gap = min_gap.min(next[j] - sub[j]);
            max_gap = max_gap.max(next[j] - ubar);
        }
        max_increase = max_increase.max(step_increase);
        if step_increase > opts.monotone_slack * ubar.max(1.0) {
            return Err(Error::NonMonotoneIteration { iteration: iterations, excess: step_increase });
        }
        std::mem::swap(&mut u, &mut next);
        if increment < opts.tol {
            break;
        }
    }
    if increment >= opts.tol {
        return Err(Error::NonConvergence { steps: iterations, residual: increment });
    }
    Ok(SubSuperOutcome {
        profile: Field::from_coefficients(basis, coeffs)?,
        iterations,
        super_value: ubar,
        sub_amplitude: eps,
        shift: k,
        max_increase,
        min_gap_to_sub: min_gap,
        max_gap_to_super: max_gap,
        last_increment: increment,
    })
}

/// `‖u_λ‖²_{L²}` of the sub/super solution at each `λ`, evaluated in parallel.
pub fn mass_curve(
    lambdas: &[f64],
    p: f64,
    basis: &Arc<SpectralBasis>,
    opts: &SubSuperOptions,
) -> Result<Vec<(f64, f64)>> {
    lambdas
        .par_iter()
        .map(|&l| sub_super_solve(l, p, basis, opts).map(|o| (l, o.profile.l2_norm().powi(2))))
        .collect()
}

/// Controls for [`lambda_search`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaSearchOptions {
    /// Target accuracy of `‖u‖²_{L²} = 1`.
    pub mass_tol: f64,
    /// Bracket doublings allowed before giving up.
    pub max_expansions: usize,
    pub max_bisections: usize,
    pub inner: SubSuperOptions,
}

impl Default for LambdaSearchOptions {
    fn default() -> Self {
        LambdaSearchOptions {
            mass_tol: 1e-8,
            max_expansions: 20,
            max_bisections: 200,
            inner: SubSuperOptions { tol: 1e-12, ..SubSuperOptions::default() },
        }
    }
}

/// Result of [`lambda_search`] with the bisection trail.
#[derive(Clone, Debug)]
pub struct LambdaSearch {
    pub result: GroundStateResult,
    /// The `λ` at which the unit-mass profile was found.
    pub bisection_lambda: f64,
    pub mass_error: f64,
    /// Every `(λ, mass)` evaluated, in order.
    pub trail: Vec<(f64, f64)>,
}

/// Bisect on `λ ∈ (λ_1, λ_hi]` until the positive solution has unit mass.
pub fn lambda_search(p: f64, basis: &Arc<SpectralBasis>, opts: &LambdaSearchOptions) -> Result<LambdaSearch> {
    check_exponent(p)?;
    if p < 3.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda search needs p >= 3 (got {p}); the linear case is the first eigenfunction"
        )));
    }
    let lambda1 = basis.lambda_min();
    let mut trail = Vec::new();
    let mut total_iterations = 0;
    let mut eval = |l: f64, trail: &mut Vec<(f64, f64)>| -> Result<(f64, Field)> {
        let out = sub_super_solve(l, p, basis, &opts.inner)?;
        total_iterations += out.iterations;
        let mass = out.profile.l2_norm().powi(2);
        trail.push((l, mass));
        Ok((mass, out.profile))
    };

    let mut lo = lambda1;
    let mut gap = 1.0;
    let mut hi = lambda1 + gap;
    let (mut hi_mass, mut hi_profile) = eval(hi, &mut trail)?;
    let mut expansions = 0;
    while hi_mass < 1.0 {
        if expansions == opts.max_expansions {
            return Err(Error::BracketNotFound(hi));
        }
        lo = hi;
        gap *= 2.0;
        hi = lambda1 + gap;
        (hi_mass, hi_profile) = eval(hi, &mut trail)?;
        expansions += 1;
    }

    let (mut best_l, mut best_mass, mut best) = (hi, hi_mass, hi_profile);
    for _ in 0..opts.max_bisections {
        if (best_mass - 1.0).abs() < opts.mass_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (mass, profile) = eval(mid, &mut trail)?;
        if mass < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (mass - 1.0).abs() < (best_mass - 1.0).abs() {
            (best_l, best_mass, best) = (mid, mass, profile);
        }
    }
    let mass_error = (best_mass - 1.0).abs();
    if mass_error >= opts.mass_tol {
        return Err(Error::NonConvergence { steps: trail.len(), residual: mass_error });
    }
    let profile = best.normalized()?;
    let result = GroundStateResult::from_profile(profile, p, Method::SubSuper, total_iterations)?;
    Ok(LambdaSearch { result, bisection_lambda: best_l, mass_error, trail })
}

/// Gaps between two ground-state results.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossValidation {
    pub l2_gap: f64,
    pub lambda_gap: f64,
    pub energy_gap: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub const CROSS_VALIDATION_THRESHOLD: f64 = 1e-5;

/// Compare two results on the same geometry and exponent.
pub fn cross_validate(a: &GroundStateResult, b: &GroundStateResult) -> Result<CrossValidation> {
    if a.p != b.p {
        return Err(Error::InvalidArgument(format!("exponents differ: {} vs {}", a.p, b.p)));
    }
    let (da, db) = (a.profile.basis().domain(), b.profile.basis().domain());
    if da.lengths() != db.lengths() {
        return Err(Error::BasisMismatch);
    }
    let other = if a.profile.same_basis(&b.profile) {
        b.profile.clone()
    } else {
        b.profile.transfer_to(a.profile.basis())?
    };
    let mut l2 = (&a.profile - &other).l2_norm();
    if !a.profile.same_basis(&b.profile) {
        // mass of b outside a's modes
        l2 = (l2 * l2 + (b.profile.l2_norm().powi(2) - other.l2_norm().powi(2)).max(0.0)).sqrt();
    }
    let lambda_gap = (a.lambda - b.lambda).abs();
    let energy_gap = (a.energy - b.energy).abs();
    let threshold = CROSS_VALIDATION_THRESHOLD;
    let pass = l2 < threshold && lambda_gap < threshold && energy_gap < threshold;
    Ok(CrossValidation { l2_gap: l2, lambda_gap, energy_gap, threshold, pass })
}
