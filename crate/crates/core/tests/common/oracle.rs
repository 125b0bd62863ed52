//! Dense reference solver for small contact problems.
//!
//! Forms `C = G K⁻¹ Gᵀ` with nalgebra and runs a damped semismooth Newton
//! iteration on the natural residual `F(x) = x − P(x − γ(Cx − d))`. Each
//! Newton system fixes the active set of the projection, so the method is a
//! primal-dual active-set scheme. The result is accepted only with a natural
//! residual at roundoff level.

use nalgebra::{DMatrix, DVector};

use layered_contact::problem::ContactProblem;
use layered_contact::sparse::CsrMatrix;

pub struct OracleSolution {
    pub multipliers: Vec<f64>,
    pub displacement: Vec<f64>,
    pub dual_objective: f64,
    pub natural_residual: f64,
    pub newton_steps: usize,
}

fn dense(m: &CsrMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows, m.ncols, &m.to_dense())
}

/// Friction balls of the stacked layout `[λ_N | λ_T interleaved]`.
struct Set {
    normal: usize,
    radii: Vec<f64>,
}

impl Set {
    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        for i in 0..self.normal {
            y[i] = y[i].max(0.0);
        }
        for (p, &r) in self.radii.iter().enumerate() {
            let (i, j) = (self.normal + 2 * p, self.normal + 2 * p + 1);
            let n = y[i].hypot(y[j]);
            if n > r {
                let s = if n > 0.0 { r / n } else { 0.0 };
                y[i] *= s;
                y[j] *= s;
            }
        }
        y
    }

    /// An element of the generalized Jacobian of the projection at `v`.
    fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let m = v.len();
        let mut d = DMatrix::zeros(m, m);
        for i in 0..self.normal {
            d[(i, i)] = if v[i] > 0.0 { 1.0 } else { 0.0 };
        }
        for (p, &r) in self.radii.iter().enumerate() {
            let (i, j) = (self.normal + 2 * p, self.normal + 2 * p + 1);
            let n = v[i].hypot(v[j]);
            if n <= r {
                d[(i, i)] = 1.0;
                d[(j, j)] = 1.0;
            } else if n > 0.0 {
                let (a, b) = (v[i] / n, v[j] / n);
                let s = r / n;
                d[(i, i)] = s * (1.0 - a * a);
                d[(i, j)] = -s * a * b;
                d[(j, i)] = -s * a * b;
                d[(j, j)] = s * (1.0 - b * b);
            }
        }
        d
    }
}

pub fn solve(problem: &ContactProblem, coupling: &CsrMatrix, radii: &[f64]) -> OracleSolution {
    let k = dense(&problem.stiffness.to_csr());
    let chol = k.clone().cholesky().expect("stiffness must be positive definite");
    let g = dense(coupling);
    let f = DVector::from_column_slice(&problem.load);
    let kinv_gt = chol.solve(&g.transpose());
    let c = &g * &kinv_gt;
    let c = (&c + c.transpose()) * 0.5;
    let d = &g * chol.solve(&f);
    let set = Set { normal: radii.len(), radii: radii.to_vec() };
    let m = d.len();

    let gamma = 1.0 / c.symmetric_eigenvalues().max();
    let residual = |x: &DVector<f64>| -> DVector<f64> { x - set.project(&(x - (&c * x - &d) * gamma)) };
    let merit = |x: &DVector<f64>| residual(x).norm();
    let objective = |x: &DVector<f64>| 0.5 * x.dot(&(&c * x)) - x.dot(&d);

    let mut x = DVector::zeros(m);
    let mut steps = 0;
    let identity = DMatrix::<f64>::identity(m, m);
    for _ in 0..500 {
        let r = residual(&x);
        let rn = r.norm();
        if rn <= 1e-14 * d.norm() {
            break;
        }
        steps += 1;
        let v = &x - (&c * &x - &d) * gamma;
        let dp = set.jacobian(&v);
        let jac = &identity - &dp * (&identity - &c * gamma);
        let newton = jac.lu().solve(&(-&r));
        let mut accepted = false;
        if let Some(dx) = newton {
            let mut t = 1.0;
            for _ in 0..40 {
                let trial = &x + &dx * t;
                if merit(&trial) < (1.0 - 1e-4 * t) * rn {
                    x = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            x = set.project(&(&x - (&c * &x - &d) * gamma));
        }
    }
    x = set.project(&x);
    let natural_residual = merit(&x);
    let u = chol.solve(&(&f - g.transpose() * &x));
    OracleSolution {
        dual_objective: objective(&x),
        multipliers: x.iter().copied().collect(),
        displacement: u.iter().copied().collect(),
        natural_residual,
        newton_steps: steps,
    }
}
