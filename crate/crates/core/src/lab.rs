//! Randomized verification of operator inequalities and identities.
//!
//! Every check evaluates both sides on the quadrature grid or by Parseval and
//! reports a margin: positive means the inequality holds with room to spare.
//! Inequalities carry an additive tolerance, identities a relative one.
//!
//! Fields are drawn by [`FieldSampler`] with coefficients `σ g_n / n²`,
//! `g_n` standard normal, one ChaCha8 stream per case so any failure can be
//! replayed from its seed.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{check_exponent, norms, DomainSpec, Field, SpectralBasis};
use crate::error::Result;
use crate::flow::FlowState;
use crate::operators::{
    apply_sm, energy, grad_energy, nonlinearity_samples, project_pm, rhs_g, rhs_unconstrained, s_functional,
    symbol_sm,
};

/// Random smooth fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSampler {
    pub seed: u64,
    pub sigma: f64,
    /// Only the first `n` modes receive a nonzero coefficient.
    pub active_modes: Option<usize>,
    /// Rescale so that `max(‖u‖_{L^{2p-2}}, ‖∇u‖_{L²}) ≤ cap`.
    pub cap: Option<f64>,
}

impl FieldSampler {
    pub fn new(seed: u64) -> Self {
        FieldSampler { seed, sigma: 1.0, active_modes: None, cap: None }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_active_modes(mut self, n: usize) -> Self {
        self.active_modes = Some(n);
        self
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// One field from `rng`; `p` selects the `L^{2p-2}` norm used by the cap.
    pub fn draw(&self, rng: &mut ChaCha8Rng, basis: &Arc<SpectralBasis>, p: f64) -> Field {
        let active = self.active_modes.unwrap_or(basis.len()).min(basis.len());
        let coeffs: Vec<f64> = (0..basis.len())
            .map(|n| {
                let g: f64 = StandardNormal.sample(rng);
                if n < active {
                    self.sigma * g / ((n + 1) * (n + 1)) as f64
                } else {
                    0.0
                }
            })
            .collect();
        let u = Field::from_coefficients(basis, coeffs).expect("basis-sized");
        match self.cap {
            Some(cap) => {
                let proxy = norms(&u, p.max(2.0)).expect("p >= 2").intersection_proxy();
                if proxy > cap {
                    u.scaled(cap / proxy)
                } else {
                    u
                }
            }
            None => u,
        }
    }

    /// A field with unit L² norm.
    pub fn draw_unit(&self, rng: &mut ChaCha8Rng, basis: &Arc<SpectralBasis>) -> Field {
        loop {
            if let Ok(u) = self.draw(rng, basis, 2.0).normalized() {
                return u;
            }
        }
    }
}

/// Seed of case `case` in a suite seeded with `base`.
pub fn case_seed(base: u64, case: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(case as u64)
}

/// Both sides of a checked relation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub lhs: f64,
    pub rhs: f64,
    /// Slack including tolerance; the check passes iff `margin ≥ 0`.
    pub margin: f64,
    pub pass: bool,
}

impl CheckOutcome {
    /// `lhs ≤ rhs + tol`.
    pub fn at_most(lhs: f64, rhs: f64, tol: f64) -> Self {
        let margin = rhs + tol - lhs;
        CheckOutcome { lhs, rhs, margin, pass: margin >= 0.0 }
    }

    /// `lhs ≥ rhs - tol`.
    pub fn at_least(lhs: f64, rhs: f64, tol: f64) -> Self {
        let margin = lhs - rhs + tol;
        CheckOutcome { lhs, rhs, margin, pass: margin >= 0.0 }
    }

    /// `|lhs - rhs| ≤ rel · max(|lhs|, |rhs|, 1)`.
    pub fn identity(lhs: f64, rhs: f64, rel: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        let margin = rel * scale - (lhs - rhs).abs();
        CheckOutcome { lhs, rhs, margin, pass: margin >= 0.0 }
    }
}

fn grid_integral(basis: &SpectralBasis, f: impl Fn(usize) -> f64) -> f64 {
    basis.weight() * (0..basis.num_points()).map(f).sum::<f64>()
}

fn nonlinear_pairing(u: &Field, v: &Field, p: f64) -> f64 {
    let (nu, nv) = (nonlinearity_samples(u.samples(), p), nonlinearity_samples(v.samples(), p));
    let (us, vs) = (u.samples(), v.samples());
    grid_integral(u.basis(), |j| (nu[j] - nv[j]) * (us[j] - vs[j]))
}

fn weighted_sq(weight: &Field, diff: &[f64], p: f64) -> f64 {
    let w = weight.samples();
    grid_integral(weight.basis(), |j| w[j].abs().powf(p - 2.0) * diff[j] * diff[j])
}

/// Lower bounds on `⟨𝒩(u) - 𝒩(v), u - v⟩`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MonotoneOutcome {
    /// `≥ ½‖|u|^{(p-2)/2}(u-v)‖² + ½‖|v|^{(p-2)/2}(u-v)‖²`.
    pub weighted: CheckOutcome,
    /// `≥ 2^{2-p}‖u-v‖_p^p`.
    pub lp: CheckOutcome,
}

pub fn check_monotone_nonlinearity(u: &Field, v: &Field, p: f64, tol: f64) -> Result<MonotoneOutcome> {
    check_exponent(p)?;
    let lhs = nonlinear_pairing(u, v, p);
    let diff: Vec<f64> = u.samples().iter().zip(v.samples()).map(|(a, b)| a - b).collect();
    let weighted = 0.5 * weighted_sq(u, &diff, p) + 0.5 * weighted_sq(v, &diff, p);
    let lp = 2f64.powf(2.0 - p) * grid_integral(u.basis(), |j| diff[j].abs().powf(p));
    Ok(MonotoneOutcome {
        weighted: CheckOutcome::at_least(lhs, weighted, tol),
        lp: CheckOutcome::at_least(lhs, lp, tol),
    })
}

/// `C(p, |𝒪|) = p² 2^{2p-4} |𝒪|^{1/p}`.
pub fn local_monotone_constant(p: f64, measure: f64) -> f64 {
    p * p * 2f64.powf(2.0 * p - 4.0) * measure.powf(1.0 / p)
}

/// `⟨𝒢(u) - 𝒢(v), u - v⟩` with the pairing taken in coefficient space.
pub fn g_pairing(u: &Field, v: &Field, p: f64) -> Result<f64> {
    let dg = &rhs_g(u, p)? - &rhs_g(v, p)?;
    dg.inner(&(u - v))
}

/// Upper bound on `⟨𝒢(u) - 𝒢(v), u - v⟩` by the explicit bracket times
/// `‖u - v‖²`.
pub fn check_local_monotone_g(u: &Field, v: &Field, p: f64, tol: f64) -> Result<CheckOutcome> {
    check_exponent(p)?;
    let lhs = g_pairing(u, v, p)?;
    let (nu, nv) = (norms(u, p)?, norms(v, p)?);
    let v2 = nv.l2 * nv.l2;
    let c = local_monotone_constant(p, u.basis().domain().measure());
    let bracket = nu.h1_seminorm.powi(2)
        + 0.5 * (nu.h1_seminorm + nv.h1_seminorm).powi(2) * v2
        + nu.lp.powf(p)
        + c * (nu.lp.powf(p - 1.0) + nv.lp.powf(p - 1.0)) * v2;
    let rhs = bracket * (u - v).l2_norm().powi(2);
    Ok(CheckOutcome::at_most(lhs, rhs, tol))
}

/// `⟨(Δu - 𝒩(u)) - (Δv - 𝒩(v)), u - v⟩ ≤ 0`.
pub fn check_plain_monotone_g(u: &Field, v: &Field, p: f64, tol: f64) -> Result<CheckOutcome> {
    let lhs = (&rhs_unconstrained(u, p)? - &rhs_unconstrained(v, p)?).inner(&(u - v))?;
    Ok(CheckOutcome::at_most(lhs, 0.0, tol))
}

/// Lipschitz estimates for the three parts of `|u|^{p-2}u - (‖∇u‖² + ‖u‖_p^p) u`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LipschitzOutcome {
    /// `‖F₁(u) - F₁(v)‖ ≤ (p-1)‖u-v‖_{2p-2}(‖u‖_{2p-2} + ‖v‖_{2p-2})^{p-2}`.
    pub f1: CheckOutcome,
    /// The same with exponent `2p-2`; only meaningful when the base is ≥ 1,
    /// otherwise `None`.
    pub f1_literal: Option<CheckOutcome>,
    /// `‖F₂(u) - F₂(v)‖ ≤ (λ₁^{-1/2}‖∇u‖² + (‖∇u‖ + ‖∇v‖)‖v‖)‖∇(u-v)‖`.
    pub f2: CheckOutcome,
    /// `‖F₃(u) - F₃(v)‖ ≤ ‖u‖_p^p ‖u-v‖ + p‖u-v‖_p(‖u‖_p + ‖v‖_p)^{p-1}‖v‖`.
    pub f3: CheckOutcome,
}

pub fn check_lipschitz_chain(u: &Field, v: &Field, p: f64, tol: f64) -> Result<LipschitzOutcome> {
    check_exponent(p)?;
    let basis = u.basis();
    let diff = u - v;
    let (nu, nv, nd) = (norms(u, p)?, norms(v, p)?, norms(&diff, p)?);

    let (fu, fv) = (nonlinearity_samples(u.samples(), p), nonlinearity_samples(v.samples(), p));
    let f1_lhs = grid_integral(basis, |j| (fu[j] - fv[j]).powi(2)).sqrt();
    let base = nu.l2p_minus_2 + nv.l2p_minus_2;
    let f1 = CheckOutcome::at_most(f1_lhs, (p - 1.0) * nd.l2p_minus_2 * base.powf(p - 2.0), tol);
    let f1_literal = (base >= 1.0)
        .then(|| CheckOutcome::at_most(f1_lhs, (p - 1.0) * nd.l2p_minus_2 * base.powf(2.0 * p - 2.0), tol));

    let (hu, hv) = (nu.h1_seminorm, nv.h1_seminorm);
    let f2_diff = &u.scaled(hu * hu) - &v.scaled(hv * hv);
    let poincare = 1.0 / basis.lambda_min().sqrt();
    let f2 = CheckOutcome::at_most(
        f2_diff.l2_norm(),
        (poincare * hu * hu + (hu + hv) * nv.l2) * nd.h1_seminorm,
        tol,
    );

    let (pu, pv) = (nu.lp.powf(p), nv.lp.powf(p));
    let f3_diff = &u.scaled(pu) - &v.scaled(pv);
    let f3 = CheckOutcome::at_most(
        f3_diff.l2_norm(),
        pu * nd.l2 + p * nd.lp * (nu.lp + nv.lp).powf(p - 1.0) * nv.l2,
        tol,
    );
    Ok(LipschitzOutcome { f1, f1_literal, f2, f3 })
}

/// `(𝒩(u), -Δu) = (p-1)‖|u|^{(p-2)/2}∇u‖²`.
pub fn check_lap_nn(u: &Field, p: f64, rel: f64) -> Result<CheckOutcome> {
    check_exponent(p)?;
    let basis = u.basis();
    let n = nonlinearity_samples(u.samples(), p);
    let minus_lap = u.laplacian().scaled(-1.0);
    let ml = minus_lap.samples();
    let lhs = grid_integral(basis, |j| n[j] * ml[j]);
    let grads = u.gradient_samples();
    let us = u.samples();
    let rhs = (p - 1.0)
        * grid_integral(basis, |j| {
            let g2: f64 = grads.iter().map(|g| g[j] * g[j]).sum();
            us[j].abs().powf(p - 2.0) * g2
        });
    Ok(CheckOutcome::identity(lhs, rhs, rel))
}

/// `‖∇_ℳℰ(u)‖² = ‖∇ℰ(u)‖² - 𝒮(u)²` for unit `u`.
pub fn check_grad_m_relation(u: &Field, p: f64, rel: f64) -> Result<CheckOutcome> {
    let lhs = rhs_g(u, p)?.l2_norm().powi(2);
    let rhs = grad_energy(u, p)?.l2_norm().powi(2) - s_functional(u, p)?.powi(2);
    let scale = grad_energy(u, p)?.l2_norm().powi(2);
    let margin = rel * scale.max(1.0) - (lhs - rhs).abs();
    Ok(CheckOutcome { lhs, rhs, margin, pass: margin >= 0.0 })
}

/// `‖∇ℰ(u)‖² = ‖Δu‖² + ‖u‖_{2p-2}^{2p-2} + 2(p-1)‖|u|^{(p-2)/2}∇u‖²`, with
/// the left side integrated pointwise on the grid.
pub fn check_l2_grad_e(u: &Field, p: f64, rel: f64) -> Result<CheckOutcome> {
    check_exponent(p)?;
    let basis = u.basis();
    let n = nonlinearity_samples(u.samples(), p);
    let minus_lap = u.laplacian().scaled(-1.0);
    let ml = minus_lap.samples();
    let lhs = grid_integral(basis, |j| (ml[j] + n[j]).powi(2));
    let us = u.samples();
    let lap_sq = minus_lap.l2_norm().powi(2);
    let high = grid_integral(basis, |j| us[j].abs().powf(2.0 * p - 2.0));
    let grads = u.gradient_samples();
    let cross = grid_integral(basis, |j| {
        let g2: f64 = grads.iter().map(|g| g[j] * g[j]).sum();
        us[j].abs().powf(p - 2.0) * g2
    });
    Ok(CheckOutcome::identity(lhs, lap_sq + high + 2.0 * (p - 1.0) * cross, rel))
}

/// `(𝒢(u), u) = 0` for unit `u`, relative to `‖𝒢(u)‖`.
pub fn check_tangency(u: &Field, p: f64, tol: f64) -> Result<CheckOutcome> {
    let g = rhs_g(u, p)?;
    let lhs = g.inner(u)?.abs();
    Ok(CheckOutcome::at_most(lhs, 0.0, tol * g.l2_norm().max(1.0)))
}

/// Central differences of `ℰ` along `w` against `(∇ℰ(u), w)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GradientConsistency {
    pub directional: f64,
    /// Errors at `h = 1e-3` and `h = 1e-4`.
    pub errors: [f64; 2],
    /// Distance of the second error below `max(first / 25, rounding floor)`.
    pub margin: f64,
    pub pass: bool,
}

pub fn check_gradient_consistency(u: &Field, w: &Field, p: f64) -> Result<GradientConsistency> {
    let directional = grad_energy(u, p)?.inner(w)?;
    let mut errors = [0.0; 2];
    for (e, h) in errors.iter_mut().zip([1e-3, 1e-4]) {
        let fd = (energy(&u.axpy(h, w)?, p)? - energy(&u.axpy(-h, w)?, p)?) / (2.0 * h);
        *e = (fd - directional).abs();
    }
    // the rounding floor of the difference quotient at h = 1e-4
    let floor = 1e-11 * energy(u, p)?.abs().max(1.0) / 1e-4;
    let margin = floor.max(errors[0] / 25.0) - errors[1];
    Ok(GradientConsistency { directional, errors, margin, pass: margin >= 0.0 })
}

/// Decay table of `|⟨𝒢(ψ + λζ) - 𝒢(ψ), η⟩|` at `λ = 2^{-j}`, `j = 0..=12`.
#[derive(Clone, Debug, Serialize)]
pub struct HemiTable {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub strictly_decreasing: bool,
    /// `values[12] / values[11]`.
    pub terminal_ratio: f64,
}

impl HemiTable {
    /// Strictly decreasing with terminal ratio in `[lo, hi]`.
    pub fn passes(&self, lo: f64, hi: f64) -> bool {
        self.strictly_decreasing && (lo..=hi).contains(&self.terminal_ratio)
    }
}

pub fn hemicontinuity_probe(psi: &Field, zeta: &Field, eta: &Field, p: f64) -> Result<HemiTable> {
    let g0 = rhs_g(psi, p)?;
    let lambdas: Vec<f64> = (0..=12).map(|j| 2f64.powi(-j)).collect();
    let values = lambdas
        .iter()
        .map(|&l| Ok((&rhs_g(&psi.axpy(l, zeta)?, p)? - &g0).inner(eta)?.abs()))
        .collect::<Result<Vec<f64>>>()?;
    let strictly_decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let terminal_ratio = values[12] / values[11];
    Ok(HemiTable { lambdas, values, strictly_decreasing, terminal_ratio })
}

/// Algebra of `P_m` and `S_m` on a pair of fields, one outcome per property.
pub fn check_projection_algebra(u: &Field, v: &Field, level: u32, tol: f64) -> Result<Vec<(&'static str, CheckOutcome)>> {
    let m = level;
    let pu = project_pm(u, m);
    let su = apply_sm(u, m);
    let diff = |a: &Field, b: &Field| (a - b).l2_norm();
    let zero = |name, x: f64| (name, CheckOutcome::at_most(x, 0.0, tol));
    let mut out = vec![
        zero("pm_idempotent", diff(&project_pm(&pu, m), &pu)),
        zero("pm_self_adjoint", (pu.inner(v)? - u.inner(&project_pm(v, m))?).abs()),
        zero("sm_self_adjoint", (su.inner(v)? - u.inner(&apply_sm(v, m))?).abs()),
        ("pm_norm_at_most_one", CheckOutcome::at_most(pu.l2_norm(), u.l2_norm(), tol)),
        ("sm_norm_at_most_one", CheckOutcome::at_most(su.l2_norm(), u.l2_norm(), tol)),
        zero("pm_attains_norm_one", (project_pm(&Field::mode(u.basis(), 0), m).l2_norm() - 1.0).abs()),
        zero("pm_sn_commute", diff(&project_pm(&apply_sm(u, m + 1), m), &apply_sm(&pu, m + 1))),
        zero("pm_sn_commute_lower", diff(&project_pm(&apply_sm(u, m - 1), m), &apply_sm(&pu, m - 1))),
        zero("pm_s_prev_is_s_prev", diff(&project_pm(&apply_sm(u, m - 1), m), &apply_sm(u, m - 1))),
        zero("pm_sm_is_sm", diff(&project_pm(&su, m), &su)),
        zero("s_next_pm_is_pm", diff(&apply_sm(&pu, m + 1), &pu)),
    ];
    // finite ranges with R(S_{m-1}) ⊆ R(P_m) ⊆ R(S_m): count modes with a
    // nonzero multiplier
    let basis = u.basis();
    let rank = |f: &dyn Fn(f64) -> f64| basis.eigenvalues().iter().filter(|l| f(**l) != 0.0).count() as f64;
    let cutoff = crate::domain::dyadic_cutoff(m);
    let r_prev = rank(&|l| symbol_sm(l, m - 1).unwrap_or(0.0));
    let r_pm = rank(&|l| if l < cutoff { 1.0 } else { 0.0 });
    let r_sm = rank(&|l| symbol_sm(l, m).unwrap_or(0.0));
    out.push(("ranges_nested_lower", CheckOutcome::at_most(r_prev, r_pm, 0.0)));
    out.push(("ranges_nested_upper", CheckOutcome::at_most(r_pm, r_sm, 0.0)));
    out.push(("ranges_finite", CheckOutcome::at_most(r_sm, basis.len() as f64, 0.0)));
    // pointwise convergence: errors non-increasing up to the basis level
    let top = basis.domain().level();
    let pm_err: Vec<f64> = (1..=top).map(|k| diff(&project_pm(u, k), u)).collect();
    let sm_err: Vec<f64> = (1..=top + 1).map(|k| diff(&apply_sm(u, k), u)).collect();
    let worst_rise = |e: &[f64]| e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    out.push(("pm_converges", CheckOutcome::at_most(worst_rise(&pm_err).max(*pm_err.last().unwrap()), 0.0, tol)));
    out.push(("sm_converges", CheckOutcome::at_most(worst_rise(&sm_err).max(*sm_err.last().unwrap()), 0.0, tol)));
    Ok(out)
}

/// Result of [`positivity_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Positivity {
    /// The first state is not positive, so the check does not apply.
    Skipped { initial_min: f64 },
    Pass { min: f64 },
    Fail { min: f64, t: f64 },
}

/// Grid values floor for a run started from positive data.
pub const POSITIVITY_FLOOR: f64 = -1e-10;

pub fn positivity_check(trajectory: &[FlowState]) -> Positivity {
    let Some(first) = trajectory.first() else {
        return Positivity::Skipped { initial_min: f64::NAN };
    };
    let initial_min = first.u.min_sample();
    if !(initial_min > 0.0) {
        return Positivity::Skipped { initial_min };
    }
    let (min, t) = trajectory
        .iter()
        .map(|s| (s.u.min_sample(), s.t))
        .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc });
    if min >= POSITIVITY_FLOOR {
        Positivity::Pass { min }
    } else {
        Positivity::Fail { min, t }
    }
}

/// Largest `‖S_m u‖_p / ‖u‖_p` over `samples` random fields and all levels
/// `1..=basis level`.
pub fn empirical_sm_lp_bound(basis: &Arc<SpectralBasis>, p: f64, samples: usize, seed: u64) -> Result<f64> {
    check_exponent(p)?;
    let sampler = FieldSampler::new(seed);
    let mut rng = sampler.rng();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = sampler.draw(&mut rng, basis, p);
        let base = norms(&u, p)?.lp;
        if base == 0.0 {
            continue;
        }
        for m in 1..=basis.domain().level() {
            worst = worst.max(norms(&apply_sm(&u, m), p)?.lp / base);
        }
    }
    Ok(worst)
}

/// Settings of [`run_suite`].
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub domain: DomainSpec,
    pub cases: usize,
    pub hemicontinuity_cases: usize,
    pub seed: u64,
    /// Additive tolerance for inequalities.
    pub tolerance: f64,
    /// Relative tolerance for identities.
    pub identity_tolerance: f64,
    pub sigma: f64,
    /// Ball radius for the Lipschitz sampler; odd cases use `2R`.
    pub radius: f64,
}

impl SuiteConfig {
    pub fn new(domain: DomainSpec) -> Self {
        SuiteConfig {
            domain,
            cases: 500,
            hemicontinuity_cases: 20,
            seed: 20240901,
            tolerance: 1e-9,
            identity_tolerance: 1e-6,
            sigma: 1.0,
            radius: 2.0,
        }
    }
}

/// Exponents cycled through by the inequality checks.
pub const SWEEP_EXPONENTS: [f64; 5] = [2.0, 2.5, 3.0, 4.0, 6.0];
/// Exponents for identities that need exact quadrature of polynomial
/// integrands.
pub const IDENTITY_EXPONENTS: [f64; 3] = [2.0, 4.0, 6.0];

/// One case of one check.
#[derive(Clone, Debug, Serialize)]
pub struct CaseRecord {
    pub case: usize,
    pub seed: u64,
    pub p: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    pub worst_margin: f64,
    pub records: Vec<CaseRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub cases: usize,
    pub tolerance: f64,
    pub identity_tolerance: f64,
    /// Cases where the literal `2p-2` exponent of the F₁ chain applies.
    pub f1_literal_applicable: usize,
    /// Largest observed `‖S_m u‖_p / ‖u‖_p`, reported without a bound.
    pub sm_lp_ratio: f64,
    pub checks: Vec<CheckSummary>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("finite report")
    }
}

/// Order of checks in the report.
pub const CHECK_NAMES: &[&str] = &[
    "mono_2",
    "nonlinear_est",
    "g_local_monotone",
    "g_plain_monotone",
    "lipschitz_f1",
    "lipschitz_f1_literal",
    "lipschitz_f2",
    "lipschitz_f3",
    "lap_nn",
    "grad_m_relation",
    "l2_grad_e",
    "tangency",
    "gradient_consistency",
    "projection_algebra",
    "hemicontinuity",
];

/// Basis used by the suite: the configured domain with six-fold
/// oversampling so that the polynomial identities integrate exactly.
pub fn suite_basis(domain: &DomainSpec) -> Result<Arc<SpectralBasis>> {
    let nodes: Vec<usize> = (0..domain.dimension()).map(|a| (6 * domain.max_mode(a) as usize).max(16)).collect();
    Ok(Arc::new(SpectralBasis::new(domain.clone().with_quadrature(&nodes)?)?))
}

fn run_case(
    cfg: &SuiteConfig,
    basis: &Arc<SpectralBasis>,
    case: usize,
) -> Result<Vec<(&'static str, CaseRecord)>> {
    let seed = case_seed(cfg.seed, case);
    let sampler = FieldSampler::new(seed).with_sigma(cfg.sigma);
    let mut rng = sampler.rng();
    let (tol, rel) = (cfg.tolerance, cfg.identity_tolerance);
    let rec = |p: f64, o: CheckOutcome| CaseRecord { case, seed, p, margin: o.margin, pass: o.pass };
    let mut out = Vec::new();

    let p = SWEEP_EXPONENTS[case % SWEEP_EXPONENTS.len()];
    let (u, v) = (sampler.draw(&mut rng, basis, p), sampler.draw(&mut rng, basis, p));
    let mono = check_monotone_nonlinearity(&u, &v, p, tol)?;
    out.push(("mono_2", rec(p, mono.weighted)));
    out.push(("nonlinear_est", rec(p, mono.lp)));

    let unit_cap = sampler.with_cap(1.0);
    let (cu, cv) = (unit_cap.draw(&mut rng, basis, p), unit_cap.draw(&mut rng, basis, p));
    out.push(("g_local_monotone", rec(p, check_local_monotone_g(&cu, &cv, p, tol)?)));
    out.push(("g_plain_monotone", rec(p, check_plain_monotone_g(&u, &v, p, tol)?)));

    let radius = if case % 2 == 0 { cfg.radius } else { 2.0 * cfg.radius };
    let ball = sampler.with_cap(radius);
    let (lu, lv) = (ball.draw(&mut rng, basis, p), ball.draw(&mut rng, basis, p));
    let lip = check_lipschitz_chain(&lu, &lv, p, tol)?;
    out.push(("lipschitz_f1", rec(p, lip.f1)));
    if let Some(lit) = lip.f1_literal {
        out.push(("lipschitz_f1_literal", rec(p, lit)));
    }
    out.push(("lipschitz_f2", rec(p, lip.f2)));
    out.push(("lipschitz_f3", rec(p, lip.f3)));

    let q = IDENTITY_EXPONENTS[case % IDENTITY_EXPONENTS.len()];
    let w = sampler.draw(&mut rng, basis, q);
    out.push(("lap_nn", rec(q, check_lap_nn(&w, q, rel)?)));
    out.push(("l2_grad_e", rec(q, check_l2_grad_e(&w, q, rel)?)));

    let unit = sampler.draw_unit(&mut rng, basis);
    out.push(("grad_m_relation", rec(p, check_grad_m_relation(&unit, p, rel)?)));
    out.push(("tangency", rec(p, check_tangency(&unit, p, tol)?)));

    let dir = sampler.draw(&mut rng, basis, p);
    let gc = check_gradient_consistency(&unit, &dir, p)?;
    let gc_outcome = CheckOutcome { lhs: gc.errors[1], rhs: gc.errors[0], margin: gc.margin, pass: gc.pass };
    out.push(("gradient_consistency", rec(p, gc_outcome)));

    let top = basis.domain().level();
    if top >= 5 {
        let m = 4 + (case as u32 % (top - 4));
        let (pu, pv) = (sampler.draw(&mut rng, basis, 2.0), sampler.draw(&mut rng, basis, 2.0));
        let algebra = check_projection_algebra(&pu, &pv, m, tol)?;
        let worst = algebra.iter().map(|(_, o)| *o).fold(
            CheckOutcome { lhs: 0.0, rhs: 0.0, margin: f64::INFINITY, pass: true },
            |a, b| if b.margin < a.margin { b } else { a },
        );
        out.push(("projection_algebra", rec(m as f64, worst)));
    }

    if case < cfg.hemicontinuity_cases {
        let psi = sampler.draw(&mut rng, basis, 4.0);
        let zeta_raw = sampler.draw(&mut rng, basis, 4.0);
        let eta = sampler.draw(&mut rng, basis, 4.0);
        let zeta = zeta_raw.scaled(1e-4 * psi.l2_norm() / zeta_raw.l2_norm());
        let table = hemicontinuity_probe(&psi, &zeta, &eta, 4.0)?;
        let pass = table.passes(0.4, 0.6);
        let margin = if pass { (table.terminal_ratio - 0.4).min(0.6 - table.terminal_ratio) } else { -1.0 };
        out.push(("hemicontinuity", CaseRecord { case, seed, p: 4.0, margin, pass }));
    }
    Ok(out)
}

/// Run every check over `cfg.cases` seeded cases, in parallel.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let basis = suite_basis(&cfg.domain)?;
    let per_case = (0..cfg.cases)
        .into_par_iter()
        .map(|c| run_case(cfg, &basis, c))
        .collect::<Result<Vec<_>>>()?;
    let mut checks: Vec<CheckSummary> = CHECK_NAMES
        .iter()
        .map(|n| CheckSummary {
            name: n.to_string(),
            cases: 0,
            passed: 0,
            failed: 0,
            worst_margin: f64::INFINITY,
            records: Vec::new(),
        })
        .collect();
    for records in per_case {
        for (name, r) in records {
            let s = checks.iter_mut().find(|c| c.name == name).expect("registered check");
            s.cases += 1;
            if r.pass {
                s.passed += 1;
            } else {
                s.failed += 1;
            }
            s.worst_margin = s.worst_margin.min(r.margin);
            s.records.push(r);
        }
    }
    let f1_literal_applicable = checks.iter().find(|c| c.name == "lipschitz_f1_literal").map_or(0, |c| c.cases);
    let sm_lp_ratio = empirical_sm_lp_bound(&basis, 4.0, 50, cfg.seed)?;
    let pass = checks.iter().all(|c| c.failed == 0);
    Ok(SuiteReport {
        seed: cfg.seed,
        cases: cfg.cases,
        tolerance: cfg.tolerance,
        identity_tolerance: cfg.identity_tolerance,
        f1_literal_applicable,
        sm_lp_ratio,
        checks,
        pass,
    })
}
