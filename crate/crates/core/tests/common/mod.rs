//! Independent reference solutions for integration tests.
//!
//! Second-order finite differences for `-u'' + |u|^{p-2}u = λu` on `(0, L)`
//! with `u(0) = u(L) = 0`, solved by Newton's method. The unit-mass variant
//! adds `λ` as an unknown and the trapezoid mass `h Σ u_i² = 1` as an extra
//! equation; the bordered Jacobian is solved with two tridiagonal sweeps.

#![allow(dead_code)]

use sphereflow::Field;

pub struct FdSolution {
    /// Interior nodes `x_i = i h`, `i = 1..n-1`.
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub lambda: f64,
    pub h: f64,
    pub newton_steps: usize,
}

impl FdSolution {
    /// Trapezoid L² distance to a spectral field evaluated at the nodes.
    pub fn l2_distance(&self, field: &Field) -> f64 {
        let s: f64 = self.x.iter().zip(&self.u).map(|(x, u)| (field.eval(&[*x]) - u).powi(2)).sum();
        (self.h * s).sqrt()
    }

    pub fn mass(&self) -> f64 {
        self.h * self.u.iter().map(|u| u * u).sum::<f64>()
    }
}

/// Solve `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` (Thomas algorithm).
pub fn thomas(lower: f64, diag: &[f64], upper: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower * c[i - 1];
        c[i] = upper / m;
        d[i] = (rhs[i] - lower * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

fn signed_pow(u: f64, p: f64) -> f64 {
    u.abs().powf(p - 2.0) * u
}

fn residual(u: &[f64], lambda: f64, p: f64, h: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            (-left + 2.0 * u[i] - right) / (h * h) + signed_pow(u[i], p) - lambda * u[i]
        })
        .collect()
}

fn jacobian_diag(u: &[f64], lambda: f64, p: f64, h: f64) -> Vec<f64> {
    u.iter().map(|&v| 2.0 / (h * h) + (p - 1.0) * v.abs().powf(p - 2.0) - lambda).collect()
}

fn initial(length: f64, n: usize, amplitude: f64) -> (Vec<f64>, f64) {
    let h = length / n as f64;
    let x: Vec<f64> = (1..n).map(|i| i as f64 * h).collect();
    let u = x
        .iter()
        .map(|x| amplitude * (2.0 / length).sqrt() * (std::f64::consts::PI * x / length).sin())
        .collect();
    (u, h)
}

/// Unit-mass positive solution: unknowns `u` and `λ`.
pub fn fd_ground_state(p: f64, length: f64, n: usize) -> FdSolution {
    let (mut u, h) = initial(length, n, 1.0);
    let pi_l = std::f64::consts::PI / length;
    let mut lambda = pi_l * pi_l + 1.0;
    let mut steps = 0;
    for _ in 0..100 {
        let f = residual(&u, lambda, p, h);
        let g = h * u.iter().map(|v| v * v).sum::<f64>() - 1.0;
        let diag = jacobian_diag(&u, lambda, p, h);
        let off = -1.0 / (h * h);
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let xs = thomas(off, &diag, off, &neg_f);
        let ys = thomas(off, &diag, off, &u);
        let ux: f64 = u.iter().zip(&xs).map(|(a, b)| a * b).sum();
        let uy: f64 = u.iter().zip(&ys).map(|(a, b)| a * b).sum();
        let dl = (-g - 2.0 * h * ux) / (2.0 * h * uy);
        let mut biggest = dl.abs();
        for i in 0..u.len() {
            let d = xs[i] + dl * ys[i];
            biggest = biggest.max(d.abs());
            u[i] += d;
        }
        lambda += dl;
        steps += 1;
        // the residual is O(1/h²) times rounding, so stop on the update size
        if biggest < 1e-13 && g.abs() < 1e-13 {
            break;
        }
    }
    let x = (1..n).map(|i| i as f64 * h).collect();
    FdSolution { x, u, lambda, h, newton_steps: steps }
}

/// Positive solution at a fixed `λ > λ_1`, by Newton from a scaled first mode.
pub fn fd_fixed_lambda(lambda: f64, p: f64, length: f64, n: usize) -> FdSolution {
    let pi_l = std::f64::consts::PI / length;
    let amp = ((lambda - pi_l * pi_l).max(1e-3)).powf(1.0 / (p - 2.0));
    let (mut u, h) = initial(length, n, amp);
    let mut steps = 0;
    for _ in 0..200 {
        let f = residual(&u, lambda, p, h);
        let diag = jacobian_diag(&u, lambda, p, h);
        let off = -1.0 / (h * h);
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = thomas(off, &diag, off, &neg_f);
        for (v, d) in u.iter_mut().zip(&dx) {
            *v += d;
        }
        steps += 1;
        if dx.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-13 {
            break;
        }
    }
    let x = (1..n).map(|i| i as f64 * h).collect();
    FdSolution { x, u, lambda, h, newton_steps: steps }
}

/// Piecewise-linear tent `min(x, L - x)` on `(0, L)`.
pub fn tent(length: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| x[0].min(length - x[0])
}
