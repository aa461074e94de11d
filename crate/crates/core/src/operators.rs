//! The nonlinearity, energy functionals, tangent projection and the dyadic
//! projections `P_m`, `S_m`.
//!
//! Every operator acts on [`Field`]s. Linear parts (Laplacian, `P_m`, `S_m`)
//! are diagonal on the eigen-coefficients; the nonlinearity `|u|^{p-2}u` is
//! evaluated on the quadrature grid and analyzed back onto the basis.

use crate::domain::{abs_pow, check_exponent, dyadic_cutoff, lp_norm_pow, Field};
use crate::error::{Error, Result};

/// Norms below this are treated as a degenerate base point.
pub const DEGENERATE_NORM: f64 = 1e-8;

/// Smooth dyadic cutoff.
///
/// `χ ≡ 1` on `(0, 1]`, `χ ≡ 0` on `[2, ∞)` and `χ(γ) = 1 - q(γ - 1)` in
/// between, with the quintic smoothstep `q(t) = 6t⁵ - 15t⁴ + 10t³`.
/// The band function is `ρ(γ) = χ(γ) - χ(2γ)`, supported in `[1/2, 2]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CutoffSpec;

impl CutoffSpec {
    pub fn chi(&self, gamma: f64) -> f64 {
        if gamma <= 1.0 {
            1.0
        } else if gamma >= 2.0 {
            0.0
        } else {
            1.0 - smoothstep(gamma - 1.0)
        }
    }

    pub fn rho(&self, gamma: f64) -> f64 {
        self.chi(gamma) - self.chi(2.0 * gamma)
    }

    /// `s_m(γ) = χ(γ / 2^m)`.
    pub fn symbol(&self, gamma: f64, level: u32) -> Result<f64> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("symbol argument {gamma} must be positive")));
        }
        Ok(self.chi(gamma / 2f64.powi(level as i32)))
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// `s_m(γ)` for the default cutoff.
pub fn symbol_sm(gamma: f64, level: u32) -> Result<f64> {
    CutoffSpec.symbol(gamma, level)
}

/// Exponent and constraint radius of the problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorParams {
    pub p: f64,
    /// L² radius of the constraint sphere. `1` unless explicitly changed.
    pub radius: f64,
}

impl OperatorParams {
    pub fn new(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(OperatorParams { p, radius: 1.0 })
    }

    /// Constrain to the sphere of radius `c` instead of the unit sphere.
    pub fn with_radius(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!("constraint radius {c} must be positive")));
        }
        self.radius = c;
        Ok(self)
    }
}

/// `P_m`: zero every coefficient with `λ_n ≥ 2^{m+1}`.
pub fn project_pm(u: &Field, level: u32) -> Field {
    let cutoff = dyadic_cutoff(level);
    u.map_coefficients(|lambda, a| if lambda < cutoff { a } else { 0.0 })
}

/// `S_m`: multiply each coefficient by `s_m(λ_n)`.
pub fn apply_sm(u: &Field, level: u32) -> Field {
    let scale = 2f64.powi(level as i32);
    u.map_coefficients(|lambda, a| CutoffSpec.chi(lambda / scale) * a)
}

/// `|x|^{p-2} x` with `0 ↦ 0`.
pub fn signed_power(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x
    } else if x == 0.0 {
        0.0
    } else {
        abs_pow(x, p - 2.0) * x
    }
}

/// `|u|^{p-2}u` applied to grid samples.
pub fn nonlinearity_samples(samples: &[f64], p: f64) -> Vec<f64> {
    samples.iter().map(|&x| signed_power(x, p)).collect()
}

/// `𝒩(u) = |u|^{p-2}u`, evaluated on the grid and re-analyzed.
pub fn nonlinearity(u: &Field, p: f64) -> Result<Field> {
    check_exponent(p)?;
    if p == 2.0 {
        return Ok(u.clone());
    }
    Field::from_samples(u.basis(), &nonlinearity_samples(u.samples(), p))
}

/// Orthogonal projection of `z` onto the complement of `base`:
/// `z - ((base, z) / ‖base‖²) base`. For a unit base this is
/// `z - (base, z) base`.
pub fn tangent_project(base: &Field, z: &Field) -> Result<Field> {
    let n2 = base.inner(base)?;
    if !(n2.sqrt() >= DEGENERATE_NORM) {
        return Err(Error::DegenerateBase(n2.sqrt()));
    }
    let c = base.inner(z)? / n2;
    z.axpy(-c, base)
}

/// `Δu`.
pub fn laplacian(u: &Field) -> Field {
    u.laplacian()
}

/// `ℰ(u) = ½‖∇u‖² + (1/p)‖u‖_p^p`.
pub fn energy(u: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(0.5 * u.h1_seminorm_sq() + lp_norm_pow(u.basis(), u.samples(), p) / p)
}

/// `𝒮(u) = ‖∇u‖² + ‖u‖_p^p`.
pub fn s_functional(u: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(u.h1_seminorm_sq() + lp_norm_pow(u.basis(), u.samples(), p))
}

/// `∇ℰ(u) = -Δu + 𝒩(u)`.
pub fn grad_energy(u: &Field, p: f64) -> Result<Field> {
    let n = nonlinearity(u, p)?;
    n.axpy(-1.0, &u.laplacian())
}

/// `∇_ℳℰ(u) = π_u(∇ℰ(u))`.
pub fn grad_energy_tangent(u: &Field, p: f64) -> Result<Field> {
    tangent_project(u, &grad_energy(u, p)?)
}

/// `𝒢(u) = Δu - 𝒩(u) + 𝒮(u) u`.
pub fn rhs_g(u: &Field, p: f64) -> Result<Field> {
    let s = s_functional(u, p)?;
    let n = nonlinearity(u, p)?;
    Ok(u.laplacian().axpy(-1.0, &n)?.axpy(s, u)?)
}

/// `Δu - 𝒩(u)`, the part of `𝒢` without the multiplier term.
pub fn rhs_unconstrained(u: &Field, p: f64) -> Result<Field> {
    let n = nonlinearity(u, p)?;
    u.laplacian().axpy(-1.0, &n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_basis, DomainSpec, SpectralBasis};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn basis(level: u32) -> Arc<SpectralBasis> {
        build_basis(&DomainSpec::interval(1.0, level).unwrap()).unwrap()
    }

    fn field(b: &Arc<SpectralBasis>, raw: &[f64]) -> Field {
        let c = (0..b.len()).map(|n| raw[n % raw.len()] / (n + 1) as f64).collect();
        Field::from_coefficients(b, c).unwrap()
    }

    fn unit(b: &Arc<SpectralBasis>, raw: &[f64]) -> Option<Field> {
        field(b, raw).normalized().ok()
    }

    fn coeff_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 12)
    }

    #[test]
    fn symbol_examples() {
        assert_eq!(symbol_sm(5.0, 3).unwrap(), 1.0);
        assert_eq!(symbol_sm(16.0, 3).unwrap(), 0.0);
        assert_abs_diff_eq!(symbol_sm(12.0, 3).unwrap(), 0.5, epsilon = 1e-15);
        assert!(symbol_sm(0.0, 3).is_err());
        assert!(symbol_sm(-1.0, 3).is_err());
    }

    #[test]
    fn rho_support() {
        for i in 0..2000 {
            let g = i as f64 * 0.002;
            if !(0.5..=2.0).contains(&g) {
                assert_eq!(CutoffSpec.rho(g), 0.0, "rho({g})");
            }
        }
    }

    #[test]
    fn projection_examples() {
        let b = basis(5);
        let u = &Field::mode(&b, 0) + &Field::mode(&b, 1);
        let pu = project_pm(&u, 3);
        assert_eq!(pu.coefficients()[0], 1.0);
        assert!(pu.coefficients()[1..].iter().all(|a| *a == 0.0));
        assert!(project_pm(&Field::zeros(&b), 3).coefficients().iter().all(|a| *a == 0.0));
    }

    #[test]
    fn sm_damps_the_top_band_kept_by_pm() {
        // λ = 9π² ≈ 88.8 lies in [2^6, 2^7): kept by P_6, damped by S_6
        let b = basis(9);
        let w3 = Field::mode(&b, 2);
        assert_eq!(project_pm(&w3, 6).coefficients()[2], 1.0);
        let s = apply_sm(&project_pm(&w3, 6), 6).coefficients()[2];
        assert!(s > 0.0 && s < 1.0);
        assert_eq!(apply_sm(&project_pm(&w3, 6), 7).coefficients()[2], 1.0);
    }

    #[test]
    fn sm_converges_on_smooth_field() {
        let b = basis(13);
        let psi = Field::from_coefficients(&b, (1..=b.len()).map(|n| (n as f64).powi(-3)).collect()).unwrap();
        let errs: Vec<f64> = (4..=12).map(|m| (&apply_sm(&psi, m) - &psi).l2_norm()).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(errs.last().unwrap() < &1e-3);
    }

    #[test]
    fn nonlinearity_examples() {
        assert_eq!(signed_power(-2.0, 3.0), -4.0);
        assert_eq!(signed_power(0.0, 2.5), 0.0);
        assert_abs_diff_eq!(signed_power(-4.0, 2.5), -8.0, epsilon = 1e-12);
        let b = basis(9);
        let u = field(&b, &[0.3, -0.2, 0.9]);
        assert_eq!(nonlinearity(&u, 2.0).unwrap().coefficients(), u.coefficients());
        assert!(matches!(nonlinearity(&u, 1.9), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn tangent_examples() {
        let b = basis(9);
        let w1 = Field::mode(&b, 0);
        let w2 = Field::mode(&b, 1);
        assert!(tangent_project(&w1, &w1).unwrap().l2_norm() < 1e-15);
        assert_eq!(tangent_project(&w1, &w2).unwrap().coefficients(), w2.coefficients());
        let t = tangent_project(&w1, &(&w1 + &w2)).unwrap();
        assert_eq!(t.coefficients(), w2.coefficients());
        let tiny = w1.scaled(1e-9);
        assert!(matches!(tangent_project(&tiny, &w2), Err(Error::DegenerateBase(_))));
    }

    #[test]
    fn closed_form_functionals() {
        let b = basis(9);
        let w1 = Field::mode(&b, 0);
        let pi2 = PI * PI;
        assert_abs_diff_eq!(energy(&w1, 2.0).unwrap(), pi2 / 2.0 + 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(energy(&w1, 4.0).unwrap(), pi2 / 2.0 + 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(s_functional(&w1, 2.0).unwrap(), pi2 + 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s_functional(&w1, 4.0).unwrap(), pi2 + 1.5, epsilon = 1e-12);
        let z = Field::zeros(&b);
        assert_eq!(energy(&z, 3.0).unwrap(), 0.0);
        assert_eq!(s_functional(&z, 3.0).unwrap(), 0.0);
        assert!(grad_energy(&z, 3.0).unwrap().coefficients().iter().all(|a| *a == 0.0));

        let g = grad_energy(&w1, 2.0).unwrap();
        assert_abs_diff_eq!(g.coefficients()[0], pi2 + 1.0, epsilon = 1e-12);
        assert!(g.coefficients()[1..].iter().all(|a| a.abs() < 1e-14));
        assert!(rhs_g(&w1, 2.0).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn rhs_g_is_negative_tangent_gradient_on_sphere() {
        let b = basis(9);
        let u = unit(&b, &[0.7, -0.3, 0.2, 0.5]).unwrap();
        for p in [2.0, 3.0, 4.0] {
            let lhs = rhs_g(&u, p).unwrap();
            let rhs = grad_energy_tangent(&u, p).unwrap();
            assert!((&lhs + &rhs).l2_norm() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partition_of_unity(gamma in 1e-6f64..4096.0) {
            let s: f64 = (-20..=20).map(|n| CutoffSpec.rho(2f64.powi(-n) * gamma)).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn chi_in_unit_interval(gamma in 0.0f64..10.0) {
            let c = CutoffSpec.chi(gamma);
            prop_assert!((0.0..=1.0).contains(&c));
        }

        #[test]
        fn symbol_bounds(gamma in 1e-3f64..5000.0, m in 0u32..12) {
            let s = symbol_sm(gamma, m).unwrap();
            let lo = 2f64.powi(m as i32);
            if gamma <= lo { prop_assert_eq!(s, 1.0); }
            else if gamma >= 2.0 * lo { prop_assert_eq!(s, 0.0); }
            else { prop_assert!(s > 0.0 && s < 1.0); }
        }

        #[test]
        fn pm_idempotent_self_adjoint(a in coeff_strategy(), c in coeff_strategy(), m in 3u32..9) {
            let b = basis(9);
            let (u, v) = (field(&b, &a), field(&b, &c));
            let pu = project_pm(&u, m);
            prop_assert!((&project_pm(&pu, m) - &pu).l2_norm() < 1e-10);
            let l = pu.inner(&v).unwrap();
            let r = u.inner(&project_pm(&v, m)).unwrap();
            prop_assert!((l - r).abs() < 1e-10);
        }

        #[test]
        fn sm_contracts_and_commutes(a in coeff_strategy(), m in 4u32..9, n in 4u32..9) {
            let b = basis(9);
            let u = field(&b, &a);
            prop_assert!(apply_sm(&u, m).l2_norm() <= u.l2_norm() + 1e-15);
            prop_assert!((&apply_sm(&project_pm(&u, m), m + 1) - &project_pm(&u, m)).l2_norm() < 1e-10);
            prop_assert!((&project_pm(&apply_sm(&u, m), m) - &apply_sm(&u, m)).l2_norm() < 1e-10);
            prop_assert!((&project_pm(&apply_sm(&u, m - 1), m) - &apply_sm(&u, m - 1)).l2_norm() < 1e-10);
            let lhs = project_pm(&apply_sm(&u, n), m);
            let rhs = apply_sm(&project_pm(&u, m), n);
            prop_assert!((&lhs - &rhs).l2_norm() < 1e-10);
        }

        #[test]
        fn nonlinearity_monotone(a in coeff_strategy(), c in coeff_strategy(), pi in 0usize..4) {
            let p = [2.0, 2.5, 3.0, 4.0][pi];
            let b = basis(9);
            let (u, v) = (field(&b, &a), field(&b, &c));
            let diff = &u - &v;
            let nd: Vec<f64> = nonlinearity_samples(u.samples(), p)
                .iter()
                .zip(nonlinearity_samples(v.samples(), p))
                .map(|(x, y)| x - y)
                .collect();
            let pairing = b.integrate(&nd.iter().zip(diff.samples()).map(|(x, y)| x * y).collect::<Vec<_>>());
            prop_assert!(pairing >= -1e-12);
        }

        #[test]
        fn tangency_on_sphere(a in coeff_strategy(), pi in 0usize..4) {
            let p = [2.0, 3.0, 4.0, 6.0][pi];
            let b = basis(9);
            if let Some(u) = unit(&b, &a) {
                let g = rhs_g(&u, p).unwrap();
                let scale = g.l2_norm().max(1.0);
                prop_assert!(g.inner(&u).unwrap().abs() < 1e-9 * scale);
                let t = tangent_project(&u, &field(&b, &a[3..])).unwrap();
                prop_assert!(t.inner(&u).unwrap().abs() < 1e-10);
            }
        }
    }
}
