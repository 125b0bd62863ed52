//! Accelerated projected gradient for convex quadratic programs
//!
//! ```text
//! minimise ½ xᵀ C x − dᵀ x   subject to x ∈ S
//! ```
//!
//! where `C` is symmetric positive semidefinite and `S` is a product of a
//! nonnegative orthant, two-dimensional Euclidean balls and a free block.
//! The iteration is FISTA with function-value restart: a step that raises
//! the objective is discarded and momentum is reset, so the accepted
//! objective sequence never increases.

use serde::{Deserialize, Serialize};

use crate::assembly::{dot, norm};

/// Symmetric linear map `x ↦ C x`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Dense symmetric matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseSymmetric {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Copies the upper triangle onto the lower one.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                let v = 0.5 * (self.data[i * self.n + j] + self.data[j * self.n + i]);
                self.data[i * self.n + j] = v;
                self.data[j * self.n + i] = v;
            }
        }
    }
}

impl LinearOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        use rayon::prelude::*;
        y.par_iter_mut().enumerate().with_min_len(64).for_each(|(i, yi)| {
            *yi = dot(&self.data[i * self.n..(i + 1) * self.n], x);
        });
    }
}

/// Projects a 2-vector onto the closed ball of the given radius. The result
/// satisfies `hypot(v) <= radius` in floating point.
pub fn project_ball(v: &mut [f64; 2], radius: f64) {
    let r = v[0].hypot(v[1]);
    if r <= radius {
        return;
    }
    if radius <= 0.0 {
        *v = [0.0; 2];
        return;
    }
    let s = radius / r;
    *v = [v[0] * s, v[1] * s];
    while v[0].hypot(v[1]) > radius {
        v[0] *= 1.0 - f64::EPSILON;
        v[1] *= 1.0 - f64::EPSILON;
    }
}

/// Product set laid out as `[orthant | balls (2 each) | free]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeProduct {
    pub nonnegative: usize,
    pub radii: Vec<f64>,
    pub free: usize,
}

impl ConeProduct {
    pub fn dim(&self) -> usize {
        self.nonnegative + 2 * self.radii.len() + self.free
    }

    pub fn project(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for v in &mut x[..self.nonnegative] {
            *v = v.max(0.0);
        }
        let balls = &mut x[self.nonnegative..self.nonnegative + 2 * self.radii.len()];
        for (pair, &r) in balls.chunks_exact_mut(2).zip(&self.radii) {
            let mut v = [pair[0], pair[1]];
            project_ball(&mut v, r);
            pair.copy_from_slice(&v);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x[..self.nonnegative].iter().all(|&v| v >= 0.0)
            && x[self.nonnegative..self.nonnegative + 2 * self.radii.len()]
                .chunks_exact(2)
                .zip(&self.radii)
                .all(|(p, &r)| p[0].hypot(p[1]) <= r)
    }

    /// The set scaled by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { radii: self.radii.iter().map(|r| s * r).collect(), ..self.clone() }
    }
}

/// Settings of the projected gradient iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Threshold on `L̂ ‖x − P(x − ∇q/L̂)‖` relative to `max(‖d‖, 1)`.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: bool,
    pub power_steps: usize,
    /// Largest multiplier count for which the Schur complement is formed densely.
    pub explicit_limit: usize,
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100_000, restart: true, power_steps: 50, explicit_limit: 3000, record_history: false }
    }
}

/// How an iteration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Converged,
    MaxIterReached,
}

/// Result of [`solve_qp`].
#[derive(Debug, Clone, PartialEq)]
pub struct QpOutcome {
    pub x: Vec<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub residual: f64,
    pub objective: f64,
    pub lipschitz: f64,
    pub restarts: usize,
    /// Objective of every accepted iterate, when requested.
    pub history: Vec<f64>,
    /// Indices into `history` where momentum was reset.
    pub restart_points: Vec<usize>,
}

fn probe_vector(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 + 0.5 * (12.9898 * i as f64 + 0.31).sin()).collect()
}

/// Largest eigenvalue of `op` by power iteration, times 1.05.
pub fn estimate_lipschitz(op: &dyn LinearOperator, steps: usize) -> f64 {
    let n = op.dim();
    if n == 0 {
        return 0.0;
    }
    let mut x = probe_vector(n);
    let s = norm(&x);
    x.iter_mut().for_each(|v| *v /= s);
    let mut y = vec![0.0; n];
    let mut rayleigh = 0.0;
    for _ in 0..steps.max(1) {
        op.apply(&x, &mut y);
        rayleigh = dot(&x, &y);
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    1.05 * rayleigh.max(0.0)
}

fn objective(cx: &[f64], x: &[f64], d: &[f64]) -> f64 {
    0.5 * dot(x, cx) - dot(d, x)
}

/// Fixed-point residual `L ‖x − P(x − (Cx − d)/L)‖`.
fn stationarity(set: &ConeProduct, x: &[f64], cx: &[f64], d: &[f64], l: f64, scratch: &mut [f64]) -> f64 {
    for i in 0..x.len() {
        scratch[i] = x[i] - (cx[i] - d[i]) / l;
    }
    set.project(scratch);
    l * x.iter().zip(scratch.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Minimises `½ xᵀCx − dᵀx` over `set`.
///
/// `lipschitz` overrides the power-iteration estimate; `start` is projected
/// before use.
pub fn solve_qp(
    op: &dyn LinearOperator,
    d: &[f64],
    set: &ConeProduct,
    config: &SolverConfig,
    start: Option<&[f64]>,
    lipschitz: Option<f64>,
) -> QpOutcome {
    let n = op.dim();
    assert_eq!(d.len(), n, "linear term has wrong length");
    assert_eq!(set.dim(), n, "feasible set has wrong dimension");
    let d_norm = norm(d);
    let mut l = lipschitz.unwrap_or_else(|| estimate_lipschitz(op, config.power_steps));
    if l <= 0.0 || !l.is_finite() {
        l = 1.0;
    }
    if d_norm == 0.0 {
        return QpOutcome {
            x: vec![0.0; n],
            status: QpStatus::Converged,
            iterations: 1,
            residual: 0.0,
            objective: 0.0,
            lipschitz: l,
            restarts: 0,
            history: if config.record_history { vec![0.0] } else { Vec::new() },
            restart_points: Vec::new(),
        };
    }
    let threshold = config.tol * d_norm.max(1.0);

    let mut x = start.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    set.project(&mut x);
    let mut cx = vec![0.0; n];
    op.apply(&x, &mut cx);
    let mut qx = objective(&cx, &x, d);
    let mut y = x.clone();
    let mut cy = cx.clone();
    let mut z = vec![0.0; n];
    let mut cz = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut t = 1.0_f64;
    let mut plain = true;
    let mut restarts = 0;
    let mut history = Vec::new();
    let mut restart_points = Vec::new();
    if config.record_history {
        history.push(qx);
    }

    let mut residual = stationarity(set, &x, &cx, d, l, &mut scratch);
    let mut iterations = 1;
    let mut status = QpStatus::MaxIterReached;
    if residual <= threshold {
        status = QpStatus::Converged;
    }
    while status != QpStatus::Converged && iterations < config.max_iter {
        iterations += 1;
        for i in 0..n {
            z[i] = y[i] - (cy[i] - d[i]) / l;
        }
        set.project(&mut z);
        op.apply(&z, &mut cz);
        let qz = objective(&cz, &z, d);
        let slack = 1e-14 * (qx.abs() + qz.abs());
        if qz > qx && !(plain && qz <= qx + slack) {
            if plain {
                // A plain gradient step can only rise when the step is too long.
                l *= 2.0;
            }
            if plain || config.restart {
                y.copy_from_slice(&x);
                cy.copy_from_slice(&cx);
                t = 1.0;
                plain = true;
                restarts += 1;
                if config.record_history {
                    restart_points.push(history.len());
                }
                continue;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            y[i] = z[i] + beta * (z[i] - x[i]);
            cy[i] = cz[i] + beta * (cz[i] - cx[i]);
        }
        std::mem::swap(&mut x, &mut z);
        std::mem::swap(&mut cx, &mut cz);
        qx = qz;
        t = t_next;
        plain = false;
        if config.record_history {
            history.push(qx);
        }
        residual = stationarity(set, &x, &cx, d, l, &mut scratch);
        if residual <= threshold {
            status = QpStatus::Converged;
        }
    }
    set.project(&mut x);
    QpOutcome { x, status, iterations, residual, objective: qx, lipschitz: l, restarts, history, restart_points }
}
