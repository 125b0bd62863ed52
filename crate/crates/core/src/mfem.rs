//! Mixed finite element solver through the dual quadratic program.
//!
//! Eliminating the displacement from the saddle-point system
//!
//! ```text
//! K u + Gᵀ λ = f,      λ ∈ Λ,      (μ − λ)ᵀ G u ≤ 0  for all μ ∈ Λ
//! ```
//!
//! leaves `min ½ λᵀ C λ − λᵀ d` over `Λ` with `C = G K⁻¹ Gᵀ` and
//! `d = G K⁻¹ f`. The displacement follows from `u = K⁻¹ (f − Gᵀ λ)`.
//! Because `K` is block diagonal by layer, every solve with `K` splits into
//! independent layer solves.

use std::ops::Range;
use std::sync::{Arc, Once};
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatMut, Par, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{dot, norm, DisplacementField, DofMap, SparseSymmetric};
use crate::contact::{ContactSpaceKind, CouplingOperators, FrictionField, MultiplierVector};
use crate::error::{ContactError, Result};
use crate::mesh::ContactPairing;
use crate::problem::ContactProblem;
use crate::qp::{estimate_lipschitz, solve_qp, ConeProduct, DenseSymmetric, LinearOperator, QpOutcome, QpStatus, SolverConfig};
use crate::sparse::CsrMatrix;

static SEQUENTIAL_KERNELS: Once = Once::new();

/// Dense kernels run sequentially; parallelism comes from independent layers.
fn sequential_kernels() {
    SEQUENTIAL_KERNELS.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Sparse Cholesky factor of one symmetric positive definite block.
#[derive(Debug)]
pub struct LayerFactor {
    llt: Option<Llt<usize, f64>>,
    dim: usize,
}

impl LayerFactor {
    pub fn new(block: &CsrMatrix) -> Result<Self> {
        sequential_kernels();
        let n = block.nrows;
        if n == 0 {
            return Ok(Self { llt: None, dim: 0 });
        }
        let mut entries = Vec::with_capacity(block.nnz() / 2 + n);
        for r in 0..n {
            entries.extend(block.row(r).filter(|&(c, _)| c >= r).map(|(c, v)| Triplet::new(c, r, v)));
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| ContactError::NotPositiveDefinite(format!("{e:?}")))?;
        let llt = mat.sp_cholesky(Side::Lower).map_err(|e| ContactError::NotPositiveDefinite(format!("{e:?}")))?;
        let factor = Self { llt: Some(llt), dim: n };

        // Nearly singular blocks factor without error in floating point; a
        // probe solve exposes them.
        let b: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (7.31 * i as f64).sin()).collect();
        let mut x = b.clone();
        factor.solve_in_place(&mut x);
        let r: Vec<f64> = block.apply(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        let rel = norm(&r) / norm(&b);
        if !(rel <= 1e-8) {
            return Err(ContactError::NotPositiveDefinite(format!("probe residual {rel:.3e}")));
        }
        Ok(factor)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.dim);
        if let Some(llt) = &self.llt {
            llt.solve_in_place(MatMut::from_column_major_slice_mut(rhs, self.dim, 1));
        }
    }

    /// Solves for `ncols` right-hand sides stored column-major.
    pub fn solve_columns(&self, rhs: &mut [f64], ncols: usize) {
        assert_eq!(rhs.len(), self.dim * ncols);
        if let (Some(llt), true) = (&self.llt, ncols > 0) {
            llt.solve_in_place(MatMut::from_column_major_slice_mut(rhs, self.dim, ncols));
        }
    }
}

/// Block diagonal Cholesky factor, one block per layer.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    layers: Vec<Arc<LayerFactor>>,
    offsets: Vec<usize>,
    dim: usize,
}

/// Factorizes every layer block of `K`.
pub fn factorize(k: &SparseSymmetric) -> Result<CholeskyFactor> {
    let layers = k
        .blocks
        .par_iter()
        .map(|b| LayerFactor::new(b).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    Ok(CholeskyFactor { layers, offsets: k.offsets.clone(), dim: k.dim })
}

impl CholeskyFactor {
    /// A factor made of a single block.
    pub fn single(block: Arc<LayerFactor>) -> Self {
        let dim = block.dim();
        Self { layers: vec![block], offsets: vec![0], dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layer(&self, l: usize) -> &Arc<LayerFactor> {
        &self.layers[l]
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_range(&self, l: usize) -> Range<usize> {
        self.offsets[l]..self.offsets[l] + self.layers[l].dim()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.dim);
        let mut parts = Vec::with_capacity(self.layers.len());
        let mut rest = rhs;
        for l in 0..self.layers.len() {
            let (head, tail) = rest.split_at_mut(self.layers[l].dim());
            parts.push((l, head));
            rest = tail;
        }
        parts.into_par_iter().for_each(|(l, part)| self.layers[l].solve_in_place(part));
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// `C = B K⁻¹ Bᵀ` for a coupling matrix `B` whose columns follow the factor layout.
pub struct SchurOperator {
    coupling: CsrMatrix,
    coupling_t: CsrMatrix,
    factor: Arc<CholeskyFactor>,
    dense: Option<DenseSymmetric>,
}

const COLUMN_BATCH: usize = 128;

impl SchurOperator {
    /// Forms `C` densely when it has at most `explicit_limit` rows.
    pub fn new(factor: Arc<CholeskyFactor>, coupling: CsrMatrix, explicit_limit: usize) -> Result<Self> {
        if coupling.ncols != factor.dim() {
            return Err(ContactError::DimensionMismatch { expected: factor.dim(), actual: coupling.ncols });
        }
        let coupling_t = coupling.transpose();
        let mut op = Self { coupling, coupling_t, factor, dense: None };
        if op.coupling.nrows <= explicit_limit {
            op.dense = Some(op.assemble_dense());
        }
        Ok(op)
    }

    pub fn is_explicit(&self) -> bool {
        self.dense.is_some()
    }

    pub fn coupling(&self) -> &CsrMatrix {
        &self.coupling
    }

    pub fn factor(&self) -> &Arc<CholeskyFactor> {
        &self.factor
    }

    fn assemble_dense(&self) -> DenseSymmetric {
        let m = self.coupling.nrows;
        let mut c = DenseSymmetric::zeros(m);
        for l in 0..self.factor.layer_count() {
            let range = self.factor.layer_range(l);
            let local = self.coupling.column_slice(range.clone());
            let rows: Vec<usize> = (0..m).filter(|&r| local.row_ptr[r + 1] > local.row_ptr[r]).collect();
            if rows.is_empty() {
                continue;
            }
            let n = range.len();
            let solver = self.factor.layer(l);
            let batches: Vec<&[usize]> = rows.chunks(COLUMN_BATCH).collect();
            let blocks: Vec<Vec<f64>> = batches
                .par_iter()
                .map(|batch| {
                    let mut x = vec![0.0; n * batch.len()];
                    for (j, &r) in batch.iter().enumerate() {
                        for (col, v) in local.row(r) {
                            x[j * n + col] = v;
                        }
                    }
                    solver.solve_columns(&mut x, batch.len());
                    let mut out = vec![0.0; rows.len() * batch.len()];
                    for (i, &r) in rows.iter().enumerate() {
                        for (j, xj) in x.chunks_exact(n).enumerate() {
                            out[i * batch.len() + j] = local.row(r).map(|(col, v)| v * xj[col]).sum::<f64>();
                        }
                    }
                    out
                })
                .collect();
            for (batch, block) in batches.iter().zip(&blocks) {
                for (i, &r) in rows.iter().enumerate() {
                    for (j, &s) in batch.iter().enumerate() {
                        c.data[r * m + s] += block[i * batch.len() + j];
                    }
                }
            }
        }
        c.symmetrize();
        c
    }

    /// `C x` through two sparse products and the layer solves.
    pub fn apply_implicit(&self, x: &[f64], y: &mut [f64]) {
        let mut t: Vec<f64> = (0..self.coupling_t.nrows)
            .into_par_iter()
            .with_min_len(256)
            .map(|r| self.coupling_t.row(r).map(|(c, v)| v * x[c]).sum())
            .collect();
        self.factor.solve_in_place(&mut t);
        y.par_iter_mut()
            .enumerate()
            .with_min_len(64)
            .for_each(|(r, out)| *out = self.coupling.row(r).map(|(c, v)| v * t[c]).sum());
    }

    /// `C` as a dense matrix, formed on demand when not stored.
    pub fn to_dense(&self) -> DenseSymmetric {
        self.dense.clone().unwrap_or_else(|| self.assemble_dense())
    }
}

impl LinearOperator for SchurOperator {
    fn dim(&self) -> usize {
        self.coupling.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.dense {
            Some(c) => c.apply(x, y),
            None => self.apply_implicit(x, y),
        }
    }
}

/// Dual problem `min ½ λᵀCλ − λᵀd` over the feasible multiplier set.
pub struct DualQp {
    pub schur: SchurOperator,
    pub linear: Vec<f64>,
    pub set: ConeProduct,
    pub lipschitz: f64,
}

/// Forms the dual data for contact coupling `coupling` and load `f`.
pub fn build_dual(
    factor: Arc<CholeskyFactor>,
    coupling: &CouplingOperators,
    friction: &FrictionField,
    f: &[f64],
    config: &SolverConfig,
) -> Result<DualQp> {
    if f.len() != factor.dim() {
        return Err(ContactError::DimensionMismatch { expected: factor.dim(), actual: f.len() });
    }
    if friction.bounds.len() != coupling.point_count() {
        return Err(ContactError::DimensionMismatch { expected: coupling.point_count(), actual: friction.bounds.len() });
    }
    let g = coupling.stacked();
    let kf = factor.solve(f);
    let linear = g.apply(&kf);
    let schur = SchurOperator::new(factor, g, config.explicit_limit)?;
    let lipschitz = estimate_lipschitz(&schur, config.power_steps);
    Ok(DualQp { schur, linear, set: friction.feasible_set(), lipschitz })
}

/// Measured violations of the discrete contact conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `max(0, max_p (G_N u)_p / ∫ψ_p)`.
    pub penetration: f64,
    /// Largest positive nodal normal jump.
    pub nodal_penetration: f64,
    /// `|λ_Nᵀ G_N u|`.
    pub complementarity: f64,
    /// `Σ_p |g_p |(G_T u)_p| − λ_T(p)·(G_T u)_p|`.
    pub friction_consistency: f64,
    /// `max(0, max_p |λ_T(p)| − g_p)`.
    pub bound_excess: f64,
    /// `max(0, −min λ_N)`.
    pub sign_violation: f64,
}

/// Iteration and residual summary of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: QpStatus,
    pub iterations: usize,
    pub projected_gradient: f64,
    pub dual_objective: f64,
    pub lipschitz: f64,
    pub restarts: usize,
    pub multipliers: usize,
    pub explicit_schur: bool,
    pub kkt: Option<KktResiduals>,
    /// `‖K u + Gᵀλ − f‖ / ‖f‖`.
    pub equilibrium: Option<f64>,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub objective_history: Vec<f64>,
    #[serde(skip)]
    pub restart_points: Vec<usize>,
}

/// Solves the dual problem, optionally from a warm start.
pub fn solve_dual(
    qp: &DualQp,
    coupling: &CouplingOperators,
    config: &SolverConfig,
    start: Option<&MultiplierVector>,
) -> Result<(MultiplierVector, SolveReport)> {
    let clock = Instant::now();
    let start = start.map(MultiplierVector::to_flat);
    let out: QpOutcome = solve_qp(&qp.schur, &qp.linear, &qp.set, config, start.as_deref(), Some(qp.lipschitz));
    let lambda = MultiplierVector::from_flat(coupling, &out.x)?;
    let report = SolveReport {
        status: out.status,
        iterations: out.iterations,
        projected_gradient: out.residual,
        dual_objective: out.objective,
        lipschitz: out.lipschitz,
        restarts: out.restarts,
        multipliers: coupling.point_count(),
        explicit_schur: qp.schur.is_explicit(),
        kkt: None,
        equilibrium: None,
        wall_time_s: clock.elapsed().as_secs_f64(),
        objective_history: out.history,
        restart_points: out.restart_points,
    };
    Ok((lambda, report))
}

/// `u = K⁻¹ (f − Gᵀλ)` with `G` the stacked coupling matrix.
pub fn recover_displacement(factor: &CholeskyFactor, f: &[f64], coupling: &CsrMatrix, lambda: &[f64]) -> Result<Vec<f64>> {
    if f.len() != factor.dim() || coupling.ncols != factor.dim() {
        return Err(ContactError::DimensionMismatch { expected: factor.dim(), actual: f.len() });
    }
    if lambda.len() != coupling.nrows {
        return Err(ContactError::DimensionMismatch { expected: coupling.nrows, actual: lambda.len() });
    }
    let mut rhs = f.to_vec();
    let gl = coupling.apply_transpose(lambda);
    rhs.iter_mut().zip(&gl).for_each(|(r, g)| *r -= g);
    factor.solve_in_place(&mut rhs);
    Ok(rhs)
}

/// `‖K u + Gᵀλ − f‖ / ‖f‖` (absolute when `f = 0`).
pub fn equilibrium_residual(k: &SparseSymmetric, f: &[f64], coupling: &CsrMatrix, u: &[f64], lambda: &[f64]) -> f64 {
    let mut r = k.apply(u);
    coupling.mul_transpose_add(lambda, &mut r);
    r.iter_mut().zip(f).for_each(|(r, f)| *r -= f);
    let nf = norm(f);
    if nf > 0.0 {
        norm(&r) / nf
    } else {
        norm(&r)
    }
}

/// Residuals of the contact conditions at `(u, λ)`.
pub fn kkt_report(
    dofs: &DofMap,
    u: &[f64],
    lambda: &MultiplierVector,
    coupling: &CouplingOperators,
    friction: &FrictionField,
    pairings: &[ContactPairing],
) -> KktResiduals {
    let gn = coupling.normal.apply(u);
    let gt = coupling.tangential.apply(u);
    let mut out = KktResiduals::default();
    for (p, point) in coupling.points.iter().enumerate() {
        if point.support > 0.0 {
            out.penetration = out.penetration.max(gn[p] / point.support);
        }
        let s = [gt[2 * p], gt[2 * p + 1]];
        let l = lambda.tangential[p];
        let g = friction.bounds[p];
        out.friction_consistency += (g * s[0].hypot(s[1]) - (l[0] * s[0] + l[1] * s[1])).abs();
        out.bound_excess = out.bound_excess.max(l[0].hypot(l[1]) - g);
        out.sign_violation = out.sign_violation.max(-lambda.normal[p]);
    }
    out.complementarity = dot(&lambda.normal, &gn).abs();
    for pairing in pairings {
        for j in crate::contact::jump_values(dofs, u, pairing) {
            out.nodal_penetration = out.nodal_penetration.max(j.normal);
        }
    }
    out
}

/// Smallest generalised eigenvalue of `C` against the multiplier Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfSupEstimate {
    /// `sqrt(λ_min)`, or zero when `C` is numerically singular.
    pub value: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub singular: bool,
    pub dense: bool,
}

const DENSE_INFSUP_LIMIT: usize = 1500;

/// Inf-sup proxy `sqrt(λ_min(C, M))` for the stacked coupling.
pub fn estimate_infsup(factor: Arc<CholeskyFactor>, coupling: &CsrMatrix, mass: &CsrMatrix) -> Result<InfSupEstimate> {
    let m = coupling.nrows;
    if mass.nrows != m {
        return Err(ContactError::DimensionMismatch { expected: m, actual: mass.nrows });
    }
    if m == 0 || coupling.nnz() == 0 {
        return Ok(InfSupEstimate { value: 0.0, lambda_min: 0.0, lambda_max: 0.0, singular: true, dense: true });
    }
    let schur = SchurOperator::new(factor, coupling.clone(), DENSE_INFSUP_LIMIT)?;
    let (lambda_min, lambda_max, dense) = if m <= DENSE_INFSUP_LIMIT {
        let c = schur.to_dense();
        let md = mass.to_dense();
        let mm = Mat::<f64>::from_fn(m, m, |i, j| md[i * m + j]);
        let l = mm
            .llt(Side::Lower)
            .map_err(|e| ContactError::NotPositiveDefinite(format!("contact Gram matrix: {e:?}")))?;
        let mut y = Mat::<f64>::from_fn(m, m, |i, j| c.get(i, j));
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.L(), y.as_mut(), Par::Seq);
        let mut a = y.transpose().to_owned();
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.L(), a.as_mut(), Par::Seq);
        let eig = a
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| ContactError::NotPositiveDefinite(format!("eigensolver: {e:?}")))?;
        (eig[0], eig[m - 1], true)
    } else {
        let (lo, hi) = inverse_iteration(&schur, mass);
        (lo, hi, false)
    };
    let singular = lambda_min <= 1e-10 * lambda_max;
    let value = if singular { 0.0 } else { lambda_min.sqrt() };
    Ok(InfSupEstimate { value, lambda_min: lambda_min.max(0.0), lambda_max, singular, dense })
}

/// Extreme generalised eigenvalues by power and inverse iteration.
fn inverse_iteration(c: &SchurOperator, mass: &CsrMatrix) -> (f64, f64) {
    let m = c.dim();
    let mut diag = vec![0.0; m];
    for (r, d) in diag.iter_mut().enumerate() {
        *d = mass.get(r, r);
    }
    // Largest eigenvalue of M⁻¹C with a diagonal approximation of M.
    let scaled = |x: &[f64], y: &mut [f64]| {
        c.apply(x, y);
        y.iter_mut().zip(&diag).for_each(|(v, d)| *v /= d);
    };
    let mut x: Vec<f64> = (0..m).map(|i| 1.0 + 0.5 * (3.7 * i as f64).sin()).collect();
    let mut y = vec![0.0; m];
    for _ in 0..50 {
        scaled(&x, &mut y);
        let n = norm(&y);
        x.iter_mut().zip(&y).for_each(|(a, b)| *a = b / n);
    }
    c.apply(&x, &mut y);
    let lambda_max = dot(&x, &y) / dot(&x, &mass.apply(&x));

    let mut v: Vec<f64> = (0..m).map(|i| 1.0 + 0.5 * (5.3 * i as f64).cos()).collect();
    let mut lambda_min = lambda_max;
    for _ in 0..30 {
        let rhs = mass.apply(&v);
        let w = conjugate_gradient(c, &rhs, 2000, 1e-10);
        let mw = mass.apply(&w);
        let wmw = dot(&w, &mw);
        if !(wmw > 0.0) {
            break;
        }
        let mut cw = vec![0.0; m];
        c.apply(&w, &mut cw);
        lambda_min = lambda_min.min(dot(&w, &cw) / wmw);
        let s = wmw.sqrt();
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / s);
    }
    (lambda_min, lambda_max)
}

fn conjugate_gradient(op: &dyn LinearOperator, b: &[f64], max_iter: usize, tol: f64) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let stop = tol * tol * rr;
    for _ in 0..max_iter {
        if rr <= stop {
            break;
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
    }
    x
}

/// Displacement, multipliers and report of a complete solve.
pub struct MfemSolution {
    pub displacement: DisplacementField,
    pub multipliers: MultiplierVector,
    pub coupling: CouplingOperators,
    pub friction: FrictionField,
    pub report: SolveReport,
}

/// Builds and solves the dual problem, then recovers and checks `u`.
pub fn solve_mfem(problem: &ContactProblem, kind: ContactSpaceKind, config: &SolverConfig) -> Result<MfemSolution> {
    let clock = Instant::now();
    let (coupling, friction) = problem.coupling(kind)?;
    let qp = build_dual(problem.factor.clone(), &coupling, &friction, &problem.load, config)?;
    let (multipliers, mut report) = solve_dual(&qp, &coupling, config, None)?;
    let lambda = multipliers.to_flat();
    let u = recover_displacement(&problem.factor, &problem.load, qp.schur.coupling(), &lambda)?;
    report.equilibrium = Some(equilibrium_residual(&problem.stiffness, &problem.load, qp.schur.coupling(), &u, &lambda));
    report.kkt = Some(kkt_report(&problem.dofs, &u, &multipliers, &coupling, &friction, &problem.pairings));
    report.wall_time_s = clock.elapsed().as_secs_f64();
    let displacement = DisplacementField::new(u, problem.dofs.clone())?;
    Ok(MfemSolution { displacement, multipliers, coupling, friction, report })
}

/// Whether a solve met its tolerance.
pub fn converged(report: &SolveReport) -> bool {
    report.status == QpStatus::Converged
}
