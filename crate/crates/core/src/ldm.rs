//! Layer decomposition solver.
//!
//! Each interface carries a trial displacement trace `λ` on its free contact
//! nodes. Given the traces, every layer solves its own frictional contact
//! problem in dual form: the layer above an interface rests on the trace as
//! an obstacle with Tresca friction relative to it, and the layer below has
//! its top face pinned to the trace. The unbalanced interface forces are
//! then mapped through both layers' stiffness to correct the traces with
//! relaxation `θ`. The iteration stops once the relative change of the
//! traces drops below `tol`.
//!
//! Per-layer constraint rows are stacked as
//!
//! ```text
//! B = [ N  ]   normal rows, −e_z on lower contact nodes
//!     [ T  ]   x and y rows on lower contact nodes
//!     [ P  ]   x, y and z rows on upper contact nodes
//! ```
//!
//! with multipliers `ω_N ≥ 0`, `|ω_T| ≤ g_j` per node and `ω_P` free. The
//! nodal bound `g_j` is the friction bound integrated against the nodal
//! basis function.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{norm, DisplacementField};
use crate::error::{ContactError, Result};
use crate::mfem::{CholeskyFactor, SchurOperator};
use crate::problem::ContactProblem;
use crate::qp::{estimate_lipschitz, solve_qp, ConeProduct, QpStatus, SolverConfig};
use crate::sparse::CsrMatrix;

/// Outer iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdmConfig {
    pub theta: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub inner: SolverConfig,
}

/// Relaxation chosen by [`bracket_theta`] on the benchmark at `h = 0.4`.
pub const DEFAULT_THETA: f64 = 0.05;

impl Default for LdmConfig {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            tol: 1e-6,
            max_outer: 2000,
            inner: SolverConfig { tol: 1e-10, ..SolverConfig::default() },
        }
    }
}

impl LdmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(ContactError::Config(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.tol > 0.0) {
            return Err(ContactError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_outer == 0 || self.inner.max_iter == 0 {
            return Err(ContactError::Config("iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

/// Free contact nodes of one interface with their layer-local unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceNodes {
    pub interface: usize,
    /// Pair index within the interface pairing.
    pub pairs: Vec<usize>,
    /// First layer-local unknown of each node in the upper layer.
    pub upper_dofs: Vec<usize>,
    /// First layer-local unknown of each node in the lower layer.
    pub lower_dofs: Vec<usize>,
    /// `∫ g φ_j` per node.
    pub friction: Vec<f64>,
}

impl TraceNodes {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Displacement traces on every interface, three values per node.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTrace {
    pub values: Vec<Vec<f64>>,
}

/// Dual problem of one layer with trace-independent data precomputed.
pub struct LayerDualQp {
    pub layer: usize,
    pub schur: SchurOperator,
    pub set: ConeProduct,
    /// `B A⁻¹ b`.
    pub load_term: Vec<f64>,
    pub lipschitz: f64,
    lower: Option<usize>,
    upper: Option<usize>,
}

impl LayerDualQp {
    /// Linear term `B A⁻¹ b − c(λ)` of `min ½ωᵀCω − ωᵀ(·)`.
    pub fn linear_term(&self, traces: &InterfaceTrace) -> Result<Vec<f64>> {
        let mut d = self.load_term.clone();
        let lower_len = self.lower.map_or(0, |_| self.set.nonnegative);
        let upper_len = self.set.free / 3;
        for (k, expected) in [(self.lower, lower_len), (self.upper, upper_len)] {
            if let Some(k) = k {
                let actual = traces.values.get(k).map_or(0, |v| v.len());
                if actual != 3 * expected {
                    return Err(ContactError::DimensionMismatch { expected: 3 * expected, actual });
                }
            }
        }
        if let Some(k) = self.lower {
            let lam = &traces.values[k];
            let m = lower_len;
            for j in 0..m {
                d[j] += lam[3 * j + 2];
                d[m + 2 * j] -= lam[3 * j];
                d[m + 2 * j + 1] -= lam[3 * j + 1];
            }
        }
        if let Some(k) = self.upper {
            for (dv, l) in d[3 * lower_len..].iter_mut().zip(&traces.values[k]) {
                *dv -= l;
            }
        }
        Ok(d)
    }
}

/// Free contact nodes and lumped friction weights of every interface.
pub fn trace_nodes(problem: &ContactProblem) -> Vec<TraceNodes> {
    let dofs = &problem.dofs;
    problem
        .pairings
        .iter()
        .map(|pairing| {
            let up_base = dofs.layer_dofs(pairing.upper_layer).start;
            let lo_base = dofs.layer_dofs(pairing.lower_layer).start;
            let mut lumped = vec![0.0; pairing.pairs.len()];
            for tri in &pairing.triangles {
                for &v in &tri.vertices {
                    lumped[v] += tri.area / 3.0;
                }
            }
            let g = problem.friction[pairing.interface];
            let mut nodes = TraceNodes {
                interface: pairing.interface,
                pairs: Vec::new(),
                upper_dofs: Vec::new(),
                lower_dofs: Vec::new(),
                friction: Vec::new(),
            };
            for (j, p) in pairing.pairs.iter().enumerate() {
                let (Some(a), Some(b)) = (dofs.dof(pairing.upper_layer, p.upper, 0), dofs.dof(pairing.lower_layer, p.lower, 0))
                else {
                    continue;
                };
                nodes.pairs.push(j);
                nodes.upper_dofs.push(a - up_base);
                nodes.lower_dofs.push(b - lo_base);
                nodes.friction.push(g * lumped[j]);
            }
            nodes
        })
        .collect()
}

/// Assembles the constraint rows, Schur operator and feasible set of a layer.
pub fn build_layer_dual(problem: &ContactProblem, traces: &[TraceNodes], layer: usize, inner: &SolverConfig) -> Result<LayerDualQp> {
    let n_layers = problem.mesh.layer_count();
    if layer >= n_layers {
        return Err(ContactError::DimensionMismatch { expected: n_layers, actual: layer });
    }
    let lower = (layer + 1 < n_layers).then_some(layer);
    let upper = layer.checked_sub(1);
    let range = problem.dofs.layer_dofs(layer);
    let ndof = range.len();

    let mut rows = Vec::new();
    let mut nrows = 0;
    let mut set = ConeProduct::default();
    if let Some(k) = lower {
        let t = &traces[k];
        let m = t.len();
        for (j, &d) in t.upper_dofs.iter().enumerate() {
            rows.push((j, d + 2, -1.0));
            rows.push((m + 2 * j, d, 1.0));
            rows.push((m + 2 * j + 1, d + 1, 1.0));
        }
        nrows += 3 * m;
        set.nonnegative = m;
        set.radii = t.friction.clone();
    }
    if let Some(k) = upper {
        let t = &traces[k];
        for (j, &d) in t.lower_dofs.iter().enumerate() {
            for c in 0..3 {
                rows.push((nrows + 3 * j + c, d + c, 1.0));
            }
        }
        nrows += 3 * t.len();
        set.free = 3 * t.len();
    }
    let b_rows = CsrMatrix::from_triplets(nrows, ndof, rows);
    let factor = Arc::new(CholeskyFactor::single(problem.factor.layer(layer).clone()));
    let b = &problem.load[range];
    let load_term = b_rows.apply(&factor.solve(b));
    let schur = SchurOperator::new(factor, b_rows, inner.explicit_limit)?;
    let lipschitz = estimate_lipschitz(&schur, inner.power_steps);
    Ok(LayerDualQp { layer, schur, set, load_term, lipschitz, lower, upper })
}

/// Termination of the outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LdmStatus {
    Converged,
    MaxOuterReached,
    /// After burn-in the trace change grew tenfold above its best value or
    /// set no new minimum for a whole window.
    Diverged,
}

/// Outer iteration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdmReport {
    pub status: LdmStatus,
    pub outer_iterations: usize,
    pub epsilon_history: Vec<f64>,
    pub inner_iterations: usize,
    /// Inner solves that stopped at their iteration cap.
    pub inner_failures: usize,
    /// `max_l ‖A u + Bᵀω − b‖ / ‖b‖` at the last iterate.
    pub layer_equilibrium: f64,
    /// Every per-layer multiplier was inside its feasible set.
    pub feasible: bool,
    pub theta: f64,
    pub wall_time_s: f64,
}

/// Displacement, traces and report of an outer iteration.
pub struct LdmSolution {
    pub displacement: DisplacementField,
    pub traces: InterfaceTrace,
    pub multipliers: Vec<Vec<f64>>,
    pub nodes: Vec<TraceNodes>,
    pub report: LdmReport,
}

const BURN_IN: usize = 10;
const STALL_WINDOW: usize = 50;

/// Runs the layer decomposition iteration from zero traces.
pub fn solve_ldm(problem: &ContactProblem, config: &LdmConfig) -> Result<LdmSolution> {
    config.validate()?;
    let clock = Instant::now();
    let n_layers = problem.mesh.layer_count();
    if n_layers < 2 {
        return Err(ContactError::Config("layer decomposition needs at least two layers".into()));
    }
    let nodes = trace_nodes(problem);
    let duals = (0..n_layers)
        .into_par_iter()
        .map(|l| build_layer_dual(problem, &nodes, l, &config.inner))
        .collect::<Result<Vec<_>>>()?;
    let mut traces = InterfaceTrace { values: nodes.iter().map(|t| vec![0.0; 3 * t.len()]).collect() };
    let mut omegas: Vec<Vec<f64>> = duals.iter().map(|d| vec![0.0; d.set.dim()]).collect();
    let mut u = vec![0.0; problem.dof_count()];
    let mut history = Vec::new();
    let mut inner_iterations = 0;
    let mut inner_failures = 0;
    let mut status = LdmStatus::MaxOuterReached;
    let mut best = f64::INFINITY;
    let mut best_at = 0;
    let mut layer_equilibrium = 0.0;

    for outer in 1..=config.max_outer {
        let solved: Vec<(Vec<f64>, usize, bool)> = duals
            .par_iter()
            .zip(&omegas)
            .map(|(qp, warm)| {
                let d = qp.linear_term(&traces)?;
                let out = solve_qp(&qp.schur, &d, &qp.set, &config.inner, Some(warm), Some(qp.lipschitz));
                Ok((out.x, out.iterations, out.status == QpStatus::Converged))
            })
            .collect::<Result<_>>()?;
        for (l, (x, iters, ok)) in solved.into_iter().enumerate() {
            inner_iterations += iters;
            inner_failures += usize::from(!ok);
            omegas[l] = x;
        }

        // Layer displacements and interface reactions Bᵀω.
        layer_equilibrium = 0.0_f64;
        let mut reactions = Vec::with_capacity(n_layers);
        for (l, qp) in duals.iter().enumerate() {
            let range = problem.dofs.layer_dofs(l);
            let b = &problem.load[range.clone()];
            let bt = qp.schur.coupling().apply_transpose(&omegas[l]);
            let mut rhs: Vec<f64> = b.iter().zip(&bt).map(|(b, r)| b - r).collect();
            qp.schur.factor().solve_in_place(&mut rhs);
            let mut res = problem.stiffness.blocks[l].apply(&rhs);
            res.iter_mut().zip(b.iter().zip(&bt)).for_each(|(r, (b, t))| *r += t - b);
            let nb = norm(b);
            layer_equilibrium = layer_equilibrium.max(if nb > 0.0 { norm(&res) / nb } else { norm(&res) });
            u[range].copy_from_slice(&rhs);
            reactions.push(bt);
        }

        let updates: Vec<Vec<f64>> = nodes
            .par_iter()
            .map(|t| {
                let k = t.interface;
                let (up, lo) = (&reactions[k], &reactions[k + 1]);
                let mut half_r = vec![0.0; 3 * t.len()];
                for j in 0..t.len() {
                    for c in 0..3 {
                        half_r[3 * j + c] = -0.5 * (lo[t.lower_dofs[j] + c] + up[t.upper_dofs[j] + c]);
                    }
                }
                let mut q = vec![0.0; problem.dofs.layer_dofs(k).len()];
                let mut p = vec![0.0; problem.dofs.layer_dofs(k + 1).len()];
                for j in 0..t.len() {
                    for c in 0..3 {
                        q[t.upper_dofs[j] + c] = half_r[3 * j + c];
                        p[t.lower_dofs[j] + c] = half_r[3 * j + c];
                    }
                }
                problem.factor.layer(k).solve_in_place(&mut q);
                problem.factor.layer(k + 1).solve_in_place(&mut p);
                let mut step = vec![0.0; 3 * t.len()];
                for j in 0..t.len() {
                    for c in 0..3 {
                        step[3 * j + c] = p[t.lower_dofs[j] + c] + q[t.upper_dofs[j] + c];
                    }
                }
                step
            })
            .collect();

        let mut change = 0.0;
        let mut size = 0.0;
        for (lam, step) in traces.values.iter_mut().zip(&updates) {
            let mut diff = 0.0;
            for (l, s) in lam.iter_mut().zip(step) {
                *l -= config.theta * s;
                diff += (config.theta * s) * (config.theta * s);
            }
            change += diff.sqrt();
            size += norm(lam);
        }
        let eps = if size > 0.0 { change / size } else if change == 0.0 { 0.0 } else { f64::INFINITY };
        history.push(eps);
        if eps <= config.tol {
            status = LdmStatus::Converged;
            break;
        }
        if eps < best {
            best = eps;
            best_at = outer;
        }
        if !eps.is_finite() || (outer > BURN_IN && (eps > 10.0 * best || outer - best_at >= STALL_WINDOW)) {
            status = LdmStatus::Diverged;
            break;
        }
    }

    let feasible = duals.iter().zip(&omegas).all(|(d, w)| d.set.contains(w));
    let report = LdmReport {
        status,
        outer_iterations: history.len(),
        epsilon_history: history,
        inner_iterations,
        inner_failures,
        layer_equilibrium,
        feasible,
        theta: config.theta,
        wall_time_s: clock.elapsed().as_secs_f64(),
    };
    Ok(LdmSolution {
        displacement: DisplacementField::new(u, problem.dofs.clone())?,
        traces,
        multipliers: omegas,
        nodes,
        report,
    })
}

/// Relative trace change of every outer iteration.
pub fn ldm_energy_trace(report: &LdmReport) -> &[f64] {
    &report.epsilon_history
}

/// Outcome of one trial relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaTrial {
    pub theta: f64,
    pub status: LdmStatus,
    pub outer_iterations: usize,
    pub final_epsilon: f64,
}

/// Tries each candidate with a capped outer loop and returns the trials with
/// the index of the best: converged in the fewest iterations, otherwise the
/// smallest final change.
pub fn bracket_theta(problem: &ContactProblem, base: &LdmConfig, candidates: &[f64]) -> Result<(Vec<ThetaTrial>, usize)> {
    if candidates.is_empty() {
        return Err(ContactError::Config("no relaxation candidates".into()));
    }
    let mut trials = Vec::with_capacity(candidates.len());
    for &theta in candidates {
        let sol = solve_ldm(problem, &LdmConfig { theta, ..*base })?;
        let r = &sol.report;
        trials.push(ThetaTrial {
            theta,
            status: r.status,
            outer_iterations: r.outer_iterations,
            final_epsilon: r.epsilon_history.last().copied().unwrap_or(0.0),
        });
    }
    let score = |t: &ThetaTrial| match t.status {
        LdmStatus::Converged => (0, t.outer_iterations as f64),
        LdmStatus::MaxOuterReached => (1, t.final_epsilon),
        LdmStatus::Diverged => (2, t.final_epsilon),
    };
    let best = (0..trials.len())
        .min_by(|&a, &b| {
            let (sa, sb) = (score(&trials[a]), score(&trials[b]));
            sa.0.cmp(&sb.0).then(sa.1.total_cmp(&sb.1))
        })
        .unwrap();
    Ok((trials, best))
}
