//! Interface coupling operators and multiplier spaces.
//!
//! At interface `k` the normal jump is `[v_N] = v_z(lower) - v_z(upper)`, so
//! positive values mean interpenetration, and the tangential jump is
//! `[v_T] = v_xy(upper) - v_xy(lower)`. Rows of `G_N` and `G_T` hold the
//! moments of these jumps against the multiplier basis. Multipliers satisfy
//! `λ_N ≥ 0` and `|λ_T| ≤ g` per point, and the tangential contact stress is
//! `-λ_T`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::assembly::{DofMap, FrictionWork};
use crate::error::{ContactError, Result};
use crate::mesh::ContactPairing;
use crate::qp::{project_ball, ConeProduct};
use crate::sparse::CsrMatrix;

/// Discrete multiplier space on the contact triangulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContactSpaceKind {
    /// One constant per contact triangle.
    #[serde(rename = "p0")]
    ElementwiseConstant,
    /// One value per contact node, linear on triangles.
    #[serde(rename = "p1")]
    NodalLinear,
}

impl ContactSpaceKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::ElementwiseConstant => "p0",
            Self::NodalLinear => "p1",
        }
    }
}

/// Location of one multiplier degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierPoint {
    pub interface: usize,
    /// Pair index (P1) or triangle index (P0) within the interface pairing.
    pub entity: usize,
    pub xy: [f64; 2],
    /// `∫ ψ_p ds`.
    pub support: f64,
}

/// Jump moment matrices for all interfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingOperators {
    pub kind: ContactSpaceKind,
    /// One row per multiplier point.
    pub normal: CsrMatrix,
    /// Rows `2p` and `2p + 1` hold the x and y moments of point `p`.
    pub tangential: CsrMatrix,
    /// Gram matrix of the multiplier basis.
    pub contact_mass: CsrMatrix,
    pub points: Vec<MultiplierPoint>,
    pub interface_points: Vec<Range<usize>>,
}

impl CouplingOperators {
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// `[G_N; G_T]`, matching the layout of [`MultiplierVector::to_flat`].
    pub fn stacked(&self) -> CsrMatrix {
        self.normal.vstack(&self.tangential)
    }

    /// Block diagonal Gram matrix of the stacked multiplier space.
    pub fn stacked_mass(&self) -> CsrMatrix {
        let n = self.point_count();
        let mut t = Vec::new();
        for r in 0..n {
            for (c, v) in self.contact_mass.row(r) {
                t.push((r, c, v));
                t.push((n + 2 * r, n + 2 * c, v));
                t.push((n + 2 * r + 1, n + 2 * c + 1, v));
            }
        }
        CsrMatrix::from_triplets(3 * n, 3 * n, t)
    }
}

/// Assembles `G_N`, `G_T` and the contact Gram matrix for every interface.
pub fn assemble_coupling(dofs: &DofMap, pairings: &[ContactPairing], kind: ContactSpaceKind) -> Result<CouplingOperators> {
    let ndof = dofs.dof_count();
    let mut points = Vec::new();
    let mut interface_points = Vec::with_capacity(pairings.len());
    let mut gn = Vec::new();
    let mut gt = Vec::new();
    let mut mass = Vec::new();
    for (k, pairing) in pairings.iter().enumerate() {
        if pairing.interface != k {
            return Err(ContactError::ContactMismatch { interface: k, detail: "pairings out of order".into() });
        }
        if pairing.pairs.is_empty() {
            return Err(ContactError::ContactMismatch { interface: k, detail: "interface is unpaired".into() });
        }
        let (up, lo) = (pairing.upper_layer, pairing.lower_layer);
        let base = points.len();
        let mut push_moment = |row: usize, pair: usize, w: f64| {
            let p = &pairing.pairs[pair];
            if let Some(d) = dofs.dof(lo, p.lower, 2) {
                gn.push((row, d, w));
            }
            if let Some(d) = dofs.dof(up, p.upper, 2) {
                gn.push((row, d, -w));
            }
            for c in 0..2 {
                if let Some(d) = dofs.dof(up, p.upper, c) {
                    gt.push((2 * row + c, d, w));
                }
                if let Some(d) = dofs.dof(lo, p.lower, c) {
                    gt.push((2 * row + c, d, -w));
                }
            }
        };
        match kind {
            ContactSpaceKind::NodalLinear => {
                let mut support = vec![0.0; pairing.pairs.len()];
                for tri in &pairing.triangles {
                    for &a in &tri.vertices {
                        support[a] += tri.area / 3.0;
                        for &b in &tri.vertices {
                            let w = tri.area / 12.0 * if a == b { 2.0 } else { 1.0 };
                            push_moment(base + a, b, w);
                            mass.push((base + a, base + b, w));
                        }
                    }
                }
                points.extend(pairing.pairs.iter().enumerate().map(|(e, p)| MultiplierPoint {
                    interface: k,
                    entity: e,
                    xy: p.xy,
                    support: support[e],
                }));
            }
            ContactSpaceKind::ElementwiseConstant => {
                for (t, tri) in pairing.triangles.iter().enumerate() {
                    for &b in &tri.vertices {
                        push_moment(base + t, b, tri.area / 3.0);
                    }
                    mass.push((base + t, base + t, tri.area));
                    let xy = [0, 1].map(|d| tri.vertices.iter().map(|&v| pairing.pairs[v].xy[d]).sum::<f64>() / 3.0);
                    points.push(MultiplierPoint { interface: k, entity: t, xy, support: tri.area });
                }
            }
        }
        interface_points.push(base..points.len());
    }
    let n = points.len();
    Ok(CouplingOperators {
        kind,
        normal: CsrMatrix::from_triplets(n, ndof, gn),
        tangential: CsrMatrix::from_triplets(2 * n, ndof, gt),
        contact_mass: CsrMatrix::from_triplets(n, n, mass),
        points,
        interface_points,
    })
}

/// Friction bound per multiplier point.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionField {
    pub bounds: Vec<f64>,
}

impl FrictionField {
    /// Constant bound on each interface.
    pub fn per_interface(coupling: &CouplingOperators, values: &[f64]) -> Result<Self> {
        if values.len() != coupling.interface_points.len() {
            return Err(ContactError::DimensionMismatch { expected: coupling.interface_points.len(), actual: values.len() });
        }
        if let Some(g) = values.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(ContactError::Config(format!("friction bound must be non-negative, got {g}")));
        }
        Ok(Self { bounds: coupling.points.iter().map(|p| values[p.interface]).collect() })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { bounds: self.bounds.iter().map(|g| s * g).collect() }
    }

    /// Feasible set `{λ_N ≥ 0} × Π_p {|λ_T(p)| ≤ g_p}`.
    pub fn feasible_set(&self) -> ConeProduct {
        ConeProduct { nonnegative: self.bounds.len(), radii: self.bounds.clone(), free: 0 }
    }
}

/// Contact multipliers in normal and tangential parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierVector {
    pub kind: ContactSpaceKind,
    pub normal: Vec<f64>,
    pub tangential: Vec<[f64; 2]>,
    pub interface_points: Vec<Range<usize>>,
}

impl MultiplierVector {
    pub fn zeros(coupling: &CouplingOperators) -> Self {
        let n = coupling.point_count();
        Self {
            kind: coupling.kind,
            normal: vec![0.0; n],
            tangential: vec![[0.0; 2]; n],
            interface_points: coupling.interface_points.clone(),
        }
    }

    /// Splits `[λ_N | λ_T interleaved]`.
    pub fn from_flat(coupling: &CouplingOperators, flat: &[f64]) -> Result<Self> {
        let n = coupling.point_count();
        if flat.len() != 3 * n {
            return Err(ContactError::DimensionMismatch { expected: 3 * n, actual: flat.len() });
        }
        Ok(Self {
            kind: coupling.kind,
            normal: flat[..n].to_vec(),
            tangential: flat[n..].chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            interface_points: coupling.interface_points.clone(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.normal.clone();
        out.extend(self.tangential.iter().flatten());
        out
    }

    pub fn len(&self) -> usize {
        self.normal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normal.is_empty()
    }

    pub fn is_feasible(&self, friction: &FrictionField) -> bool {
        self.normal.iter().all(|&v| v >= 0.0)
            && self.tangential.iter().zip(&friction.bounds).all(|(t, &g)| t[0].hypot(t[1]) <= g)
    }
}

/// Projection onto the feasible multiplier set.
pub fn project_feasible(mu: &MultiplierVector, friction: &FrictionField) -> MultiplierVector {
    let mut out = mu.clone();
    for v in &mut out.normal {
        *v = v.max(0.0);
    }
    for (t, &g) in out.tangential.iter_mut().zip(&friction.bounds) {
        project_ball(t, g);
    }
    out
}

/// Nodal jump at one node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSample {
    pub normal: f64,
    pub tangential: [f64; 2],
}

/// Pointwise nodal jumps of a field across an interface.
pub fn jump_values(dofs: &DofMap, u: &[f64], pairing: &ContactPairing) -> Vec<JumpSample> {
    let upper = dofs.layer_nodal(pairing.upper_layer, u);
    let lower = dofs.layer_nodal(pairing.lower_layer, u);
    pairing
        .pairs
        .iter()
        .map(|p| {
            let (a, b) = (upper[p.upper], lower[p.lower]);
            JumpSample { normal: b[2] - a[2], tangential: [a[0] - b[0], a[1] - b[1]] }
        })
        .collect()
}

/// `Σ_k ∫ g |[u_T]| ds`, integrated with the edge-midpoint rule on the
/// piecewise-linear slip. The bound `g` is taken from the multiplier space.
pub struct FrictionFunctional<'a> {
    pub dofs: &'a DofMap,
    pub pairings: &'a [ContactPairing],
    pub coupling: &'a CouplingOperators,
    pub friction: &'a FrictionField,
}

impl FrictionFunctional<'_> {
    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dofs.dof_count() {
            return Err(ContactError::DimensionMismatch { expected: self.dofs.dof_count(), actual: u.len() });
        }
        let mut total = 0.0;
        for (k, pairing) in self.pairings.iter().enumerate() {
            let jumps = jump_values(self.dofs, u, pairing);
            let base = self.coupling.interface_points[k].start;
            for (t, tri) in pairing.triangles.iter().enumerate() {
                let v = tri.vertices;
                let mut sum = 0.0;
                for e in 0..3 {
                    let (a, b) = (v[e], v[(e + 1) % 3]);
                    let (ja, jb) = (jumps[a].tangential, jumps[b].tangential);
                    let slip = (0.5 * (ja[0] + jb[0])).hypot(0.5 * (ja[1] + jb[1]));
                    let g = match self.coupling.kind {
                        ContactSpaceKind::NodalLinear => 0.5 * (self.friction.bounds[base + a] + self.friction.bounds[base + b]),
                        ContactSpaceKind::ElementwiseConstant => self.friction.bounds[base + t],
                    };
                    sum += g * slip;
                }
                total += tri.area / 3.0 * sum;
            }
        }
        Ok(total)
    }
}

impl FrictionWork for FrictionFunctional<'_> {
    fn work(&self, u: &[f64]) -> Result<f64> {
        self.evaluate(u)
    }
}

/// Discrete friction work `Σ_p g_p |(G_T u)_p|` induced by the coupling moments.
pub struct MomentDissipation<'a> {
    pub coupling: &'a CouplingOperators,
    pub friction: &'a FrictionField,
}

impl FrictionWork for MomentDissipation<'_> {
    fn work(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.coupling.tangential.ncols {
            return Err(ContactError::DimensionMismatch { expected: self.coupling.tangential.ncols, actual: u.len() });
        }
        let s = self.coupling.tangential.apply(u);
        Ok(s.chunks_exact(2).zip(&self.friction.bounds).map(|(m, g)| g * m[0].hypot(m[1])).sum())
    }
}
