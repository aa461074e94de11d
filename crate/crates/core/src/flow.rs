//! Time integration of the projected Galerkin system on `V_m`.
//!
//! The right-hand side is `-P_m ∇_ℳℰ(u)`, with the tangent projection taken
//! relative to the current norm:
//!
//! ```text
//!     u' = -P_m [ ∇ℰ(u) - ((u, ∇ℰ(u)) / ‖u‖²) u ],   ∇ℰ(u) = -Δu + |u|^{p-2}u.
//! ```
//!
//! On the sphere this is exactly `P_m(Δu - |u|^{p-2}u + 𝒮(u)u)`. Off the sphere
//! it keeps `‖u‖` a first integral, so the norm drift observed with
//! renormalization disabled measures integrator error only.

use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{abs_pow, dot, Field, SpectralBasis};
use crate::error::{Error, Result};
use crate::operators::{apply_sm, grad_energy, project_pm, tangent_project, OperatorParams};

/// Fixed-step explicit integrators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
    Heun,
}

impl Integrator {
    pub fn order(&self) -> u32 {
        match self {
            Integrator::Rk4 => 4,
            Integrator::Heun => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Integrator::Rk4 => "rk4",
            Integrator::Heun => "heun",
        }
    }
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "heun" => Ok(Integrator::Heun),
            other => Err(Error::InvalidFlowConfig(format!("unknown integrator '{other}'"))),
        }
    }
}

/// Largest `dt · λ_max` accepted for the explicit schemes.
pub const STABILITY_MARGIN: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub params: OperatorParams,
    /// Dyadic level `m` of the Galerkin space.
    pub level: u32,
    pub dt: f64,
    /// Final time `T`. `T = 0` yields a single ledger row.
    pub horizon: f64,
    pub integrator: Integrator,
    /// Rescale onto the constraint sphere after every step.
    pub renormalize: bool,
    /// Stop once `‖∇_ℳℰ‖_{L²}` falls below this value. Zero disables.
    pub stationarity_tol: f64,
    /// Keep every `stride`-th state in the trajectory.
    pub stride: usize,
}

impl FlowConfig {
    pub fn new(params: OperatorParams, level: u32, dt: f64, horizon: f64) -> Self {
        FlowConfig {
            params,
            level,
            dt,
            horizon,
            integrator: Integrator::Rk4,
            renormalize: true,
            stationarity_tol: 1e-8,
            stride: 100,
        }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_renormalize(mut self, on: bool) -> Self {
        self.renormalize = on;
        self
    }

    pub fn with_stationarity_tol(mut self, tol: f64) -> Self {
        self.stationarity_tol = tol;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    /// Check step size, horizon and the stability bound against `basis`.
    pub fn validate(&self, basis: &SpectralBasis) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidFlowConfig(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return bad(format!("horizon T = {} must be non-negative", self.horizon));
        }
        if self.horizon > 0.0 && self.horizon < self.dt {
            return bad(format!("horizon T = {} is shorter than dt = {}", self.horizon, self.dt));
        }
        if !(self.stationarity_tol >= 0.0) {
            return bad(format!("stationarity tolerance {} must be non-negative", self.stationarity_tol));
        }
        if self.stride == 0 {
            return bad("trajectory stride must be at least 1".into());
        }
        let limit = STABILITY_MARGIN / basis.lambda_max();
        if self.dt > limit {
            return bad(format!(
                "dt = {} exceeds the explicit stability bound {limit:e} (0.5 / lambda_max)",
                self.dt
            ));
        }
        Ok(())
    }
}

/// Galerkin state `u_m(t)`.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub u: Field,
    pub t: f64,
    pub steps: usize,
}

/// Smoothed, normalized initial state `c · S_{m-1}u₀ / ‖S_{m-1}u₀‖` on `V_m`.
pub fn init_state(u0: &Field, level: u32, params: &OperatorParams) -> Result<FlowState> {
    if level == 0 {
        return Err(Error::InvalidFlowConfig("level must be at least 1".into()));
    }
    let basis = level_basis(u0.basis(), level)?;
    let smoothed = apply_sm(u0, level - 1);
    let norm = smoothed.l2_norm();
    if !(norm > 1e-8) {
        return Err(Error::AnnihilatedInitialDatum(norm));
    }
    let u = smoothed.transfer_to(&basis)?.scaled(params.radius / norm);
    Ok(FlowState { u, t: 0.0, steps: 0 })
}

/// The basis of `V_m` on the same geometry, reusing `basis` when it already
/// sits at level `m`.
pub fn level_basis(basis: &Arc<SpectralBasis>, level: u32) -> Result<Arc<SpectralBasis>> {
    if basis.domain().level() == level {
        return Ok(basis.clone());
    }
    let domain = basis.domain().at_level(level)?;
    Ok(Arc::new(SpectralBasis::new(domain)?))
}

/// `-P_m ∇_ℳℰ(u)` for a state on any basis containing `V_m`.
pub fn rhs_galerkin(state: &FlowState, config: &FlowConfig) -> Result<Field> {
    let grad = grad_energy(&state.u, config.params.p)?;
    let tangent = tangent_project(&state.u, &grad)?;
    Ok(project_pm(&tangent, config.level).scaled(-1.0))
}

/// Everything derived from one synthesis of the current coefficients.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub rhs: Vec<f64>,
    pub energy: f64,
    pub s: f64,
    /// `‖∇_ℳℰ‖²_{L²}`, the squared norm of the Galerkin right-hand side.
    pub grad_sq: f64,
    pub min_value: f64,
}

/// Evaluator for the Galerkin vector field on a fixed basis, with reusable
/// grid buffers.
pub struct GalerkinSystem {
    basis: Arc<SpectralBasis>,
    p: f64,
    samples: Vec<f64>,
    nl_samples: Vec<f64>,
    nl: Vec<f64>,
}

impl GalerkinSystem {
    pub fn new(basis: Arc<SpectralBasis>, p: f64) -> Self {
        let (np, nm) = (basis.num_points(), basis.len());
        GalerkinSystem { basis, p, samples: vec![0.0; np], nl_samples: vec![0.0; np], nl: vec![0.0; nm] }
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn evaluate(&mut self, a: &[f64]) -> Result<Evaluation> {
        let basis = &self.basis;
        let p = self.p;
        basis.synthesize_into(a, &mut self.samples)?;
        let lp_pow;
        if p == 2.0 {
            self.nl.copy_from_slice(a);
            lp_pow = dot(a, a);
        } else {
            for (o, &x) in self.nl_samples.iter_mut().zip(&self.samples) {
                *o = if x == 0.0 { 0.0 } else { abs_pow(x, p - 2.0) * x };
            }
            lp_pow = basis.weight() * self.nl_samples.iter().zip(&self.samples).map(|(n, x)| n * x).sum::<f64>();
            basis.analyze_into(&self.nl_samples, &mut self.nl)?;
        }
        let lambdas = basis.eigenvalues();
        let h1_sq: f64 = a.iter().zip(lambdas).map(|(x, l)| l * x * x).sum();
        let norm_sq = dot(a, a);
        let mut rhs: Vec<f64> = a.iter().zip(lambdas).zip(&self.nl).map(|((x, l), n)| -(l * x + n)).collect();
        let along = if norm_sq > 0.0 { -dot(a, &rhs) / norm_sq } else { 0.0 };
        for (r, x) in rhs.iter_mut().zip(a) {
            *r += along * x;
        }
        let grad_sq = dot(&rhs, &rhs);
        let min_value = self.samples.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Evaluation { rhs, energy: 0.5 * h1_sq + lp_pow / p, s: h1_sq + lp_pow, grad_sq, min_value })
    }
}

/// One row of the energy ledger.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub energy: f64,
    pub s: f64,
    pub grad_m_sq: f64,
    /// Trapezoid approximation of `∫₀ᵗ ‖∇_ℳℰ‖² ds`.
    pub dissipation_integral: f64,
    /// `|‖u‖ - c|` before renormalization.
    pub sphere_drift: f64,
    pub min_value: f64,
    /// `|‖u‖ - c|` of the stored state, after any renormalization.
    pub norm_error: f64,
}

pub const LEDGER_COLUMNS: &str = "t,energy,S,gradM_sq,dissipation_integral,sphere_drift,min_value";

#[derive(Clone, Debug, Default)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&LedgerRow> {
        self.rows.last()
    }

    /// `max_t |ℰ(u₀) - ℰ(u(t)) - ∫₀ᵗ‖∇_ℳℰ‖²| / |ℰ(u₀)|`.
    pub fn dissipation_residual(&self) -> Result<f64> {
        dissipation_residual(self)
    }

    /// Largest single-step energy increase (negative when strictly dissipative).
    pub fn max_energy_increase(&self) -> f64 {
        self.rows.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_sphere_drift(&self) -> f64 {
        self.rows.iter().map(|r| r.sphere_drift).fold(0.0, f64::max)
    }

    pub fn max_norm_error(&self) -> f64 {
        self.rows.iter().map(|r| r.norm_error).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.rows.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min)
    }

    /// Empirical `C` in `drift ≤ C·dt²`.
    pub fn drift_constant(&self, dt: f64) -> f64 {
        self.max_sphere_drift() / (dt * dt)
    }

    /// CSV with optional `#` header lines, then the column line and one row
    /// per step.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{LEDGER_COLUMNS}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.t, r.energy, r.s, r.grad_m_sq, r.dissipation_integral, r.sphere_drift, r.min_value
            )?;
        }
        Ok(())
    }
}

pub fn dissipation_residual(ledger: &EnergyLedger) -> Result<f64> {
    let first = ledger.rows.first().ok_or(Error::EmptyLedger)?;
    let e0 = first.energy;
    let scale = if e0.abs() > 0.0 { e0.abs() } else { 1.0 };
    Ok(ledger
        .rows
        .iter()
        .map(|r| (e0 - r.energy - r.dissipation_integral).abs() / scale)
        .fold(0.0, f64::max))
}

/// Stateful integrator for one run.
pub struct Flow {
    config: FlowConfig,
    system: GalerkinSystem,
    state: FlowState,
    current: Evaluation,
    ledger: EnergyLedger,
}

impl Flow {
    /// Smooth and normalize `u0` onto `V_m`, then start a run.
    pub fn new(u0: &Field, config: &FlowConfig) -> Result<Self> {
        let state = init_state(u0, config.level, &config.params)?;
        Self::from_state(state, config)
    }

    /// Start from a state already in `V_m`, without smoothing.
    pub fn from_state(state: FlowState, config: &FlowConfig) -> Result<Self> {
        let basis = state.u.basis().clone();
        if basis.domain().level() != config.level {
            return Err(Error::InvalidFlowConfig(format!(
                "state lives at level {}, config asks for level {}",
                basis.domain().level(),
                config.level
            )));
        }
        config.validate(&basis)?;
        let mut system = GalerkinSystem::new(basis, config.params.p);
        let current = system.evaluate(state.u.coefficients())?;
        let norm_error = (state.u.l2_norm() - config.params.radius).abs();
        let ledger = EnergyLedger {
            rows: vec![LedgerRow {
                t: state.t,
                energy: current.energy,
                s: current.s,
                grad_m_sq: current.grad_sq,
                dissipation_integral: 0.0,
                sphere_drift: norm_error,
                min_value: current.min_value,
                norm_error,
            }],
        };
        Ok(Flow { config: config.clone(), system, state, current, ledger })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn into_parts(self) -> (FlowState, EnergyLedger) {
        (self.state, self.ledger)
    }

    /// `‖∇_ℳℰ(u)‖_{L²}` at the current state.
    pub fn grad_norm(&self) -> f64 {
        self.current.grad_sq.sqrt()
    }

    pub fn energy(&self) -> f64 {
        self.current.energy
    }

    pub fn s_value(&self) -> f64 {
        self.current.s
    }

    pub fn is_stationary(&self) -> bool {
        self.grad_norm() < self.config.stationarity_tol
    }

    /// One step of size `dt`.
    pub fn step(&mut self) -> Result<()> {
        self.step_by(self.config.dt)
    }

    /// One step of size `h ≤ dt`.
    pub fn step_by(&mut self, h: f64) -> Result<()> {
        let a = self.state.u.coefficients();
        let k1 = &self.current.rhs;
        let next: Vec<f64> = match self.config.integrator {
            Integrator::Heun => {
                let y1 = combine(a, &[(h, k1)]);
                let k2 = self.system.evaluate(&y1)?.rhs;
                combine(a, &[(0.5 * h, k1), (0.5 * h, &k2)])
            }
            Integrator::Rk4 => {
                let y2 = combine(a, &[(0.5 * h, k1)]);
                let k2 = self.system.evaluate(&y2)?.rhs;
                let y3 = combine(a, &[(0.5 * h, &k2)]);
                let k3 = self.system.evaluate(&y3)?.rhs;
                let y4 = combine(a, &[(h, &k3)]);
                let k4 = self.system.evaluate(&y4)?.rhs;
                combine(a, &[(h / 6.0, k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)])
            }
        };
        let t = self.state.t + h;
        let steps = self.state.steps + 1;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::BlowUp { t, step: steps });
        }
        let radius = self.config.params.radius;
        let norm = dot(&next, &next).sqrt();
        let drift = (norm - radius).abs();
        let next = if self.config.renormalize {
            if !(norm > 0.0) {
                return Err(Error::BlowUp { t, step: steps });
            }
            let c = radius / norm;
            next.into_iter().map(|x| x * c).collect()
        } else {
            next
        };
        let u = Field::from_coefficients(self.system.basis(), next)?;
        let norm_error = (u.l2_norm() - radius).abs();
        let eval = self.system.evaluate(u.coefficients())?;
        let prev = self.ledger.rows.last().expect("ledger starts with a row");
        let row = LedgerRow {
            t,
            energy: eval.energy,
            s: eval.s,
            grad_m_sq: eval.grad_sq,
            dissipation_integral: prev.dissipation_integral + 0.5 * h * (prev.grad_m_sq + eval.grad_sq),
            sphere_drift: drift,
            min_value: eval.min_value,
            norm_error,
        };
        self.ledger.rows.push(row);
        self.state = FlowState { u, t, steps };
        self.current = eval;
        Ok(())
    }

    /// Integrate up to time `target`, shortening the last step to land on it.
    /// Stops early at stationarity; returns whether that happened.
    pub fn advance_to(&mut self, target: f64) -> Result<bool> {
        self.advance_with(target, |_| {})
    }

    /// As [`Flow::advance_to`], calling `observe` after every step.
    pub fn advance_with(&mut self, target: f64, mut observe: impl FnMut(&Flow)) -> Result<bool> {
        let dt = self.config.dt;
        loop {
            if self.is_stationary() {
                return Ok(true);
            }
            let remaining = target - self.state.t;
            if remaining <= dt * 1e-9 {
                return Ok(false);
            }
            if remaining <= dt * (1.0 + 1e-9) {
                self.step_by(remaining)?;
                self.state.t = target;
                if let Some(r) = self.ledger.rows.last_mut() {
                    r.t = target;
                }
            } else {
                self.step_by(dt)?;
            }
            observe(self);
        }
    }
}

fn combine(a: &[f64], terms: &[(f64, &Vec<f64>)]) -> Vec<f64> {
    let mut out = a.to_vec();
    for (c, k) in terms {
        for (o, x) in out.iter_mut().zip(k.iter()) {
            *o += c * x;
        }
    }
    out
}

/// Output of [`run_flow`].
#[derive(Clone, Debug)]
pub struct FlowRun {
    /// States at `t = 0`, every `stride` steps, and the final time.
    pub trajectory: Vec<FlowState>,
    pub ledger: EnergyLedger,
    /// Whether the run stopped early on the stationarity test.
    pub stationary: bool,
}

impl FlowRun {
    pub fn final_state(&self) -> &FlowState {
        self.trajectory.last().expect("trajectory holds the initial state")
    }
}

/// Integrate from `u0` to `config.horizon`, or until stationary.
pub fn run_flow(u0: &Field, config: &FlowConfig) -> Result<FlowRun> {
    let mut flow = Flow::new(u0, config)?;
    let stride = config.stride;
    let mut trajectory = vec![flow.state().clone()];
    let stationary = flow.advance_with(config.horizon, |f| {
        if f.state().steps % stride == 0 {
            trajectory.push(f.state().clone());
        }
    })?;
    if trajectory.last().map(|s| s.steps) != Some(flow.state().steps) {
        trajectory.push(flow.state().clone());
    }
    let (_, ledger) = flow.into_parts();
    Ok(FlowRun { trajectory, ledger, stationary })
}
