//! Closed-form Dirichlet eigenbasis on intervals and rectangles.
//!
//! The eigenpairs of `-Δ` with homogeneous Dirichlet data on the box
//! `∏ (0, L_i)` are
//!
//! ```text
//!     λ_k = Σ_i (k_i π / L_i)²,      w_k(x) = ∏_i sqrt(2 / L_i) sin(k_i π x_i / L_i).
//! ```
//!
//! A basis at dyadic level `m` keeps every mode with `λ_k < 2^{m+1}`.
//! Grid values use the composite midpoint rule: along axis `i` the nodes are
//! `x_j = (j + 1/2) L_i / N_i` for `j = 0..N_i` and every node carries the
//! weight `∏ L_i / N_i`. With `N_i` strictly larger than the largest mode
//! number the sampled sines are exactly orthonormal (discrete sine transform
//! of type II), so coefficient ↔ sample transforms are exact on `V_m`.
//!
//! Transforms are dense `modes × nodes` matrix products.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// Minimum number of quadrature nodes per axis.
pub const MIN_QUADRATURE_NODES: usize = 16;

/// Quadrature oversampling relative to the largest admitted mode number.
pub const OVERSAMPLING: usize = 3;

/// Geometry of the box domain, its dyadic level and quadrature resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    lengths: Vec<f64>,
    nodes: Vec<usize>,
    level: u32,
}

impl DomainSpec {
    /// Box with the given edge lengths (one per axis) at dyadic level `level`.
    /// Quadrature defaults to `max(16, 3 × largest admitted mode number)`
    /// nodes per axis.
    pub fn new(lengths: &[f64], level: u32) -> Result<Self> {
        let d = lengths.len();
        if !(1..=2).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if let Some(bad) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidDomain(format!("edge length {bad} must be positive")));
        }
        if level > 40 {
            return Err(Error::InvalidDomain(format!("dyadic level {level} is too large")));
        }
        let mut spec = DomainSpec { lengths: lengths.to_vec(), nodes: vec![0; d], level };
        spec.nodes = (0..d)
            .map(|axis| (OVERSAMPLING * spec.max_mode(axis) as usize).max(MIN_QUADRATURE_NODES))
            .collect();
        Ok(spec)
    }

    pub fn interval(length: f64, level: u32) -> Result<Self> {
        Self::new(&[length], level)
    }

    pub fn rectangle(lx: f64, ly: f64, level: u32) -> Result<Self> {
        Self::new(&[lx, ly], level)
    }

    /// Override the number of quadrature nodes per axis. Each count must be at
    /// least 16 and at least three times the largest admitted mode number.
    pub fn with_quadrature(mut self, nodes: &[usize]) -> Result<Self> {
        if nodes.len() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), actual: nodes.len() });
        }
        for (axis, &n) in nodes.iter().enumerate() {
            let need = (OVERSAMPLING * self.max_mode(axis) as usize).max(MIN_QUADRATURE_NODES);
            if n < need {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: {n} quadrature nodes, need at least {need}"
                )));
            }
        }
        self.nodes = nodes.to_vec();
        Ok(self)
    }

    /// Same geometry and quadrature policy at another dyadic level.
    pub fn at_level(&self, level: u32) -> Result<Self> {
        Self::new(&self.lengths, level)
    }

    pub fn dimension(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn quadrature(&self) -> &[usize] {
        &self.nodes
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Lebesgue measure `|𝒪|`.
    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Eigenvalue cutoff `2^{m+1}` of `V_m`.
    pub fn cutoff(&self) -> f64 {
        dyadic_cutoff(self.level)
    }

    /// Largest mode number along `axis` admitted at this level (0 if none).
    pub fn max_mode(&self, axis: usize) -> u32 {
        let floor: f64 = self
            .lengths
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != axis)
            .map(|(_, l)| (PI / l).powi(2))
            .sum();
        let cutoff = self.cutoff();
        let mut k = 0u32;
        while axis_eigenvalue(k + 1, self.lengths[axis]) + floor < cutoff {
            k += 1;
        }
        k
    }
}

/// `2^{m+1}`, the upper eigenvalue bound of `V_m`.
pub fn dyadic_cutoff(level: u32) -> f64 {
    2f64.powi(level as i32 + 1)
}

fn axis_eigenvalue(k: u32, length: f64) -> f64 {
    (k as f64 * PI / length).powi(2)
}

/// One Dirichlet eigenmode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    index: [u32; 2],
    dim: u8,
    pub eigenvalue: f64,
}

impl Mode {
    /// Mode numbers `(k_1[, k_2])`.
    pub fn multi_index(&self) -> &[u32] {
        &self.index[..self.dim as usize]
    }
}

/// Sorted Dirichlet eigenbasis of `V_m` with its quadrature grid.
#[derive(Debug)]
pub struct SpectralBasis {
    domain: DomainSpec,
    modes: Vec<Mode>,
    eigenvalues: Vec<f64>,
    axis_nodes: Vec<Vec<f64>>,
    weight: f64,
    // synthesis matrix, row n holds w_n at every grid node
    synth: Vec<f64>,
    // per axis, per mode number k (index k-1): sampled sqrt(2/L) sin(kπx/L) and
    // its derivative
    sin_tab: Vec<Vec<Vec<f64>>>,
    dsin_tab: Vec<Vec<Vec<f64>>>,
}

/// Build the basis of all modes with `λ < 2^{m+1}`, sorted by eigenvalue with
/// ties broken lexicographically by multi-index.
pub fn build_basis(domain: &DomainSpec) -> Result<Arc<SpectralBasis>> {
    SpectralBasis::new(domain.clone()).map(Arc::new)
}

impl SpectralBasis {
    pub fn new(domain: DomainSpec) -> Result<Self> {
        let d = domain.dimension();
        if !(1..=2).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        let cutoff = domain.cutoff();
        let lengths = domain.lengths().to_vec();
        let kmax: Vec<u32> = (0..d).map(|a| domain.max_mode(a)).collect();

        let mut modes = Vec::new();
        match d {
            1 => {
                for k in 1..=kmax[0] {
                    let lambda = axis_eigenvalue(k, lengths[0]);
                    if lambda < cutoff {
                        modes.push(Mode { index: [k, 0], dim: 1, eigenvalue: lambda });
                    }
                }
            }
            _ => {
                for k1 in 1..=kmax[0] {
                    for k2 in 1..=kmax[1] {
                        let lambda = axis_eigenvalue(k1, lengths[0]) + axis_eigenvalue(k2, lengths[1]);
                        if lambda < cutoff {
                            modes.push(Mode { index: [k1, k2], dim: 2, eigenvalue: lambda });
                        }
                    }
                }
            }
        }
        if modes.is_empty() {
            return Err(Error::EmptyBasis { level: domain.level(), cutoff });
        }
        modes.sort_by(|a, b| {
            a.eigenvalue
                .partial_cmp(&b.eigenvalue)
                .expect("finite eigenvalues")
                .then_with(|| a.index.cmp(&b.index))
        });

        for (axis, &n) in domain.quadrature().iter().enumerate() {
            if n < MIN_QUADRATURE_NODES || n < OVERSAMPLING * kmax[axis] as usize {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: {n} quadrature nodes cannot resolve mode {}",
                    kmax[axis]
                )));
            }
        }

        let axis_nodes: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                let n = domain.quadrature()[a];
                let h = lengths[a] / n as f64;
                (0..n).map(|j| (j as f64 + 0.5) * h).collect()
            })
            .collect();
        let weight: f64 = (0..d).map(|a| lengths[a] / domain.quadrature()[a] as f64).product();

        let mut sin_tab = Vec::with_capacity(d);
        let mut dsin_tab = Vec::with_capacity(d);
        for a in 0..d {
            let l = lengths[a];
            let amp = (2.0 / l).sqrt();
            let mut s = Vec::with_capacity(kmax[a] as usize);
            let mut ds = Vec::with_capacity(kmax[a] as usize);
            for k in 1..=kmax[a] {
                let freq = k as f64 * PI / l;
                s.push(axis_nodes[a].iter().map(|x| amp * (freq * x).sin()).collect::<Vec<_>>());
                ds.push(axis_nodes[a].iter().map(|x| amp * freq * (freq * x).cos()).collect::<Vec<_>>());
            }
            sin_tab.push(s);
            dsin_tab.push(ds);
        }

        let points: usize = domain.quadrature().iter().product();
        let mut synth = vec![0.0; modes.len() * points];
        for (n, mode) in modes.iter().enumerate() {
            let row = &mut synth[n * points..(n + 1) * points];
            match d {
                1 => row.copy_from_slice(&sin_tab[0][mode.index[0] as usize - 1]),
                _ => {
                    let s0 = &sin_tab[0][mode.index[0] as usize - 1];
                    let s1 = &sin_tab[1][mode.index[1] as usize - 1];
                    let n1 = s1.len();
                    for (j0, a) in s0.iter().enumerate() {
                        for (j1, b) in s1.iter().enumerate() {
                            row[j0 * n1 + j1] = a * b;
                        }
                    }
                }
            }
        }

        let eigenvalues = modes.iter().map(|m| m.eigenvalue).collect();
        Ok(SpectralBasis { domain, modes, eigenvalues, axis_nodes, weight, synth, sin_tab, dsin_tab })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue `λ_1`.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Largest retained eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty basis")
    }

    /// Number of quadrature nodes.
    pub fn num_points(&self) -> usize {
        self.domain.quadrature().iter().product()
    }

    /// Quadrature weight shared by every node.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn axis_nodes(&self, axis: usize) -> &[f64] {
        &self.axis_nodes[axis]
    }

    /// Coordinates of grid node `j` (row-major, axis 0 slowest).
    pub fn point(&self, j: usize) -> Vec<f64> {
        match self.domain.dimension() {
            1 => vec![self.axis_nodes[0][j]],
            _ => {
                let n1 = self.axis_nodes[1].len();
                vec![self.axis_nodes[0][j / n1], self.axis_nodes[1][j % n1]]
            }
        }
    }

    /// Position of the mode with the given multi-index.
    pub fn index_of(&self, multi_index: &[u32]) -> Option<usize> {
        self.modes.iter().position(|m| m.multi_index() == multi_index)
    }

    /// `w_n` sampled on the grid.
    pub fn mode_samples(&self, n: usize) -> &[f64] {
        let p = self.num_points();
        &self.synth[n * p..(n + 1) * p]
    }

    /// Evaluate `w_n` at an arbitrary point.
    pub fn eval_mode(&self, n: usize, x: &[f64]) -> f64 {
        let mode = &self.modes[n];
        mode.multi_index()
            .iter()
            .zip(self.domain.lengths())
            .zip(x)
            .map(|((&k, &l), &xi)| (2.0 / l).sqrt() * (k as f64 * PI * xi / l).sin())
            .product()
    }

    /// Grid samples of `Σ a_n w_n`.
    pub fn synthesize_into(&self, coeffs: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(coeffs.len(), self.len())?;
        self.check_len(out.len(), self.num_points())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        let p = self.num_points();
        for (n, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.synth[n * p..(n + 1) * p];
            for (o, w) in out.iter_mut().zip(row) {
                *o += a * w;
            }
        }
        Ok(())
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_points()];
        self.synthesize_into(coeffs, &mut out)?;
        Ok(out)
    }

    /// Quadrature projection of grid samples onto the basis.
    pub fn analyze_into(&self, samples: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(samples.len(), self.num_points())?;
        self.check_len(out.len(), self.len())?;
        let p = self.num_points();
        for (n, o) in out.iter_mut().enumerate() {
            let row = &self.synth[n * p..(n + 1) * p];
            *o = self.weight * row.iter().zip(samples).map(|(w, s)| w * s).sum::<f64>();
        }
        Ok(())
    }

    pub fn analyze(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.analyze_into(samples, &mut out)?;
        Ok(out)
    }

    /// Grid samples of `∂u/∂x_axis` for `u = Σ a_n w_n`.
    pub fn derivative_samples(&self, coeffs: &[f64], axis: usize) -> Result<Vec<f64>> {
        self.check_len(coeffs.len(), self.len())?;
        let d = self.domain.dimension();
        let mut out = vec![0.0; self.num_points()];
        for (mode, &a) in self.modes.iter().zip(coeffs) {
            if a == 0.0 {
                continue;
            }
            let k = mode.multi_index();
            let factor = |ax: usize| -> &[f64] {
                if ax == axis {
                    &self.dsin_tab[ax][k[ax] as usize - 1]
                } else {
                    &self.sin_tab[ax][k[ax] as usize - 1]
                }
            };
            match d {
                1 => {
                    for (o, v) in out.iter_mut().zip(factor(0)) {
                        *o += a * v;
                    }
                }
                _ => {
                    let (f0, f1) = (factor(0), factor(1));
                    let n1 = f1.len();
                    for (j0, x) in f0.iter().enumerate() {
                        for (j1, y) in f1.iter().enumerate() {
                            out[j0 * n1 + j1] += a * x * y;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Quadrature integral of grid samples.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        self.weight * samples.iter().sum::<f64>()
    }

    fn check_len(&self, actual: usize, expected: usize) -> Result<()> {
        if actual != expected {
            return Err(Error::DimensionMismatch { expected, actual });
        }
        Ok(())
    }
}

/// A function on the domain, stored as eigen-coefficients with lazily cached
/// grid samples.
#[derive(Clone, Debug)]
pub struct Field {
    basis: Arc<SpectralBasis>,
    coeffs: Vec<f64>,
    samples: OnceLock<Vec<f64>>,
}

impl Field {
    pub fn zeros(basis: &Arc<SpectralBasis>) -> Self {
        Field { basis: basis.clone(), coeffs: vec![0.0; basis.len()], samples: OnceLock::new() }
    }

    pub fn from_coefficients(basis: &Arc<SpectralBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), actual: coeffs.len() });
        }
        Ok(Field { basis: basis.clone(), coeffs, samples: OnceLock::new() })
    }

    /// The eigenfunction `w_n` (zero-based position in the sorted basis).
    pub fn mode(basis: &Arc<SpectralBasis>, n: usize) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[n] = 1.0;
        f
    }

    /// Quadrature projection of grid samples.
    pub fn from_samples(basis: &Arc<SpectralBasis>, samples: &[f64]) -> Result<Self> {
        let coeffs = basis.analyze(samples)?;
        Ok(Field { basis: basis.clone(), coeffs, samples: OnceLock::new() })
    }

    /// Projection of a pointwise function sampled on the grid.
    pub fn from_fn(basis: &Arc<SpectralBasis>, f: impl Fn(&[f64]) -> f64) -> Self {
        let samples: Vec<f64> = (0..basis.num_points()).map(|j| f(&basis.point(j))).collect();
        Self::from_samples(basis, &samples).expect("grid-sized samples")
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coeffs
    }

    /// Grid samples, synthesized on first use.
    pub fn samples(&self) -> &[f64] {
        self.samples
            .get_or_init(|| self.basis.synthesize(&self.coeffs).expect("basis-sized coefficients"))
    }

    /// Grid samples of each partial derivative.
    pub fn gradient_samples(&self) -> Vec<Vec<f64>> {
        (0..self.basis.domain().dimension())
            .map(|axis| self.basis.derivative_samples(&self.coeffs, axis).expect("basis-sized"))
            .collect()
    }

    /// Point evaluation by direct summation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().enumerate().map(|(n, a)| a * self.basis.eval_mode(n, x)).sum()
    }

    pub fn same_basis(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) || self.basis.domain == other.basis.domain
    }

    /// L² inner product (Parseval).
    pub fn inner(&self, other: &Field) -> Result<f64> {
        if !self.same_basis(other) {
            return Err(Error::BasisMismatch);
        }
        Ok(dot(&self.coeffs, &other.coeffs))
    }

    pub fn l2_norm(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs).sqrt()
    }

    /// `‖∇u‖²_{L²} = Σ λ_n a_n²`.
    pub fn h1_seminorm_sq(&self) -> f64 {
        self.coeffs.iter().zip(self.basis.eigenvalues()).map(|(a, l)| l * a * a).sum()
    }

    pub fn min_sample(&self) -> f64 {
        self.samples().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_sample(&self) -> f64 {
        self.samples().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map_coefficients(|_, a| c * a)
    }

    /// Apply `a_n ↦ f(λ_n, a_n)`.
    pub fn map_coefficients(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        let coeffs =
            self.coeffs.iter().zip(self.basis.eigenvalues()).map(|(&a, &l)| f(l, a)).collect();
        Field { basis: self.basis.clone(), coeffs, samples: OnceLock::new() }
    }

    /// `Δu`, acting diagonally as `a_n ↦ -λ_n a_n`.
    pub fn laplacian(&self) -> Field {
        self.map_coefficients(|l, a| -l * a)
    }

    /// Rescale to unit L² norm.
    pub fn normalized(&self) -> Result<Field> {
        let n = self.l2_norm();
        if !(n > 1e-8) {
            return Err(Error::DegenerateBase(n));
        }
        Ok(self.scaled(1.0 / n))
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Field> {
        if !self.same_basis(other) {
            return Err(Error::BasisMismatch);
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + c * b).collect();
        Ok(Field { basis: self.basis.clone(), coeffs, samples: OnceLock::new() })
    }

    /// Re-express on another basis by matching multi-indices; modes missing
    /// from the target are dropped.
    pub fn transfer_to(&self, target: &Arc<SpectralBasis>) -> Result<Field> {
        if self.basis.domain().lengths() != target.domain().lengths() {
            return Err(Error::BasisMismatch);
        }
        let mut out = Field::zeros(target);
        for (mode, &a) in self.basis.modes().iter().zip(&self.coeffs) {
            if let Some(j) = target.index_of(mode.multi_index()) {
                out.coeffs[j] = a;
            }
        }
        Ok(out)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.axpy(1.0, rhs).expect("fields on the same basis")
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.axpy(-1.0, rhs).expect("fields on the same basis")
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, c: f64) -> Field {
        self.scaled(c)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scaled(-1.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Norms of a field for a given exponent `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub p: f64,
    /// `‖u‖_{L²}` by Parseval.
    pub l2: f64,
    /// `‖∇u‖_{L²}` by Parseval.
    pub h1_seminorm: f64,
    /// `‖u‖_{L^p}` by quadrature.
    pub lp: f64,
    /// `‖u‖_{L^{2p-2}}` by quadrature.
    pub l2p_minus_2: f64,
}

impl Norms {
    /// `max(‖u‖_{L^{2p-2}}, ‖∇u‖_{L²})`, the ball-radius proxy on
    /// `L^{2p-2} ∩ H¹_0`.
    pub fn intersection_proxy(&self) -> f64 {
        self.l2p_minus_2.max(self.h1_seminorm)
    }
}

pub fn norms(field: &Field, p: f64) -> Result<Norms> {
    check_exponent(p)?;
    let basis = field.basis();
    let samples = field.samples();
    Ok(Norms {
        p,
        l2: field.l2_norm(),
        h1_seminorm: field.h1_seminorm_sq().sqrt(),
        lp: lp_norm(basis, samples, p),
        l2p_minus_2: lp_norm(basis, samples, 2.0 * p - 2.0),
    })
}

/// Quadrature `L^q` norm of grid samples.
pub fn lp_norm(basis: &SpectralBasis, samples: &[f64], q: f64) -> f64 {
    lp_norm_pow(basis, samples, q).powf(1.0 / q)
}

/// Quadrature `∫|u|^q`.
pub fn lp_norm_pow(basis: &SpectralBasis, samples: &[f64], q: f64) -> f64 {
    basis.weight() * samples.iter().map(|v| abs_pow(*v, q)).sum::<f64>()
}

pub(crate) fn abs_pow(x: f64, q: f64) -> f64 {
    let a = x.abs();
    if q == 2.0 {
        a * a
    } else if q.fract() == 0.0 && q.abs() <= 64.0 {
        a.powi(q as i32)
    } else if a == 0.0 {
        0.0
    } else {
        a.powf(q)
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 2.0) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}
