//! Linear elasticity on P1 tetrahedra.
//!
//! Unknowns are the displacement components of free nodes, numbered layer
//! by layer, so the stiffness matrix is block diagonal with one block per
//! layer. Dirichlet nodes are removed from the system rather than penalised.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{ContactError, Result};
use crate::mesh::{FacetTag, LayerMesh, Rect, TetMesh};
use crate::sparse::CsrMatrix;

/// Symmetric 3x3 tensor stored as a full array.
pub type Tensor3 = [[f64; 3]; 3];

/// Lamé parameters `(lambda, mu)` of an isotropic solid.
pub fn lame_parameters(youngs_modulus: f64, poisson_ratio: f64) -> Result<(f64, f64)> {
    if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
        return Err(ContactError::InvalidMaterial(format!("modulus must be positive, got {youngs_modulus}")));
    }
    if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
        return Err(ContactError::InvalidMaterial(format!(
            "Poisson ratio must lie in (-1, 0.5), got {poisson_ratio}"
        )));
    }
    let (e, nu) = (youngs_modulus, poisson_ratio);
    Ok((e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu))))
}

/// Isotropic linear-elastic material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicMaterial {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl IsotropicMaterial {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        let (lambda, mu) = lame_parameters(youngs_modulus, poisson_ratio)?;
        Ok(Self { youngs_modulus, poisson_ratio, lambda, mu })
    }

    /// `σ = λ tr(ε) I + 2μ ε`.
    pub fn stress(&self, strain: &Tensor3) -> Tensor3 {
        let tr = strain[0][0] + strain[1][1] + strain[2][2];
        let mut s = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = 2.0 * self.mu * strain[i][j];
            }
            s[i][i] += self.lambda * tr;
        }
        s
    }

    /// Smallest and largest eigenvalue of the elasticity tensor acting on
    /// symmetric tensors: `(2μ, 3λ + 2μ)` for `ν ≥ 0`, swapped when `ν < 0`.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let (shear, bulk) = (2.0 * self.mu, 3.0 * self.lambda + 2.0 * self.mu);
        (shear.min(bulk), shear.max(bulk))
    }
}

pub fn contract(a: &Tensor3, b: &Tensor3) -> f64 {
    (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| a[i][j] * b[i][j]).sum()
}

/// Gradients of the four barycentric basis functions and the signed volume.
pub fn tet_gradients(p: &[[f64; 3]; 4]) -> ([[f64; 3]; 4], f64) {
    let e = |k: usize| [p[k][0] - p[0][0], p[k][1] - p[0][1], p[k][2] - p[0][2]];
    let (a, b, c) = (e(1), e(2), e(3));
    // Rows of the inverse Jacobian are the gradients of the last three basis functions.
    let cof = [
        [b[1] * c[2] - b[2] * c[1], b[2] * c[0] - b[0] * c[2], b[0] * c[1] - b[1] * c[0]],
        [c[1] * a[2] - c[2] * a[1], c[2] * a[0] - c[0] * a[2], c[0] * a[1] - c[1] * a[0]],
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]],
    ];
    let det = a[0] * cof[0][0] + a[1] * cof[0][1] + a[2] * cof[0][2];
    let mut g = [[0.0; 3]; 4];
    for k in 0..3 {
        for d in 0..3 {
            g[k + 1][d] = cof[k][d] / det;
            g[0][d] -= g[k + 1][d];
        }
    }
    (g, det / 6.0)
}

/// 12x12 element stiffness, ordered node-major `(node, component)`.
pub fn element_stiffness(p: &[[f64; 3]; 4], material: &IsotropicMaterial) -> [[f64; 12]; 12] {
    let (g, vol) = tet_gradients(p);
    let (lam, mu) = (material.lambda, material.mu);
    let mut ke = [[0.0; 12]; 12];
    for a in 0..4 {
        for b in 0..4 {
            let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2];
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = lam * g[a][i] * g[b][j] + mu * g[a][j] * g[b][i];
                    if i == j {
                        v += mu * gg;
                    }
                    ke[3 * a + i][3 * b + j] = vol * v;
                }
            }
        }
    }
    ke
}

/// Numbering of free displacement unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    free: Vec<Vec<Option<usize>>>,
    layer_nodes: Vec<Range<usize>>,
}

impl DofMap {
    pub fn new(mesh: &TetMesh) -> Self {
        let mut free = Vec::with_capacity(mesh.layers.len());
        let mut layer_nodes = Vec::with_capacity(mesh.layers.len());
        let mut next = 0;
        for layer in &mesh.layers {
            let mut fixed = vec![false; layer.nodes.len()];
            for n in layer.dirichlet_nodes() {
                fixed[n] = true;
            }
            let start = next;
            let map = fixed
                .iter()
                .map(|&f| {
                    (!f).then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect();
            free.push(map);
            layer_nodes.push(start..next);
        }
        Self { free, layer_nodes }
    }

    pub fn layer_count(&self) -> usize {
        self.free.len()
    }

    pub fn dof_count(&self) -> usize {
        3 * self.layer_nodes.last().map_or(0, |r| r.end)
    }

    pub fn free_node_count(&self) -> usize {
        self.dof_count() / 3
    }

    pub fn layer_dofs(&self, layer: usize) -> Range<usize> {
        let r = &self.layer_nodes[layer];
        3 * r.start..3 * r.end
    }

    pub fn free_node(&self, layer: usize, node: usize) -> Option<usize> {
        self.free[layer][node]
    }

    pub fn dof(&self, layer: usize, node: usize, component: usize) -> Option<usize> {
        self.free[layer][node].map(|k| 3 * k + component)
    }

    /// Nodal vectors of one layer, zero on Dirichlet nodes.
    pub fn layer_nodal(&self, layer: usize, values: &[f64]) -> Vec<[f64; 3]> {
        self.free[layer]
            .iter()
            .map(|k| k.map_or([0.0; 3], |k| [values[3 * k], values[3 * k + 1], values[3 * k + 2]]))
            .collect()
    }

    /// Restricts nodal vectors of every layer to the free unknowns.
    pub fn restrict(&self, nodal: &[Vec<[f64; 3]>]) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_count()];
        for (layer, vals) in nodal.iter().enumerate() {
            for (n, v) in vals.iter().enumerate() {
                if let Some(k) = self.free[layer][n] {
                    out[3 * k..3 * k + 3].copy_from_slice(v);
                }
            }
        }
        out
    }
}

/// Symmetric matrix stored as one CSR block per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    pub dim: usize,
    pub blocks: Vec<CsrMatrix>,
    pub offsets: Vec<usize>,
}

impl SparseSymmetric {
    pub fn block_range(&self, layer: usize) -> Range<usize> {
        self.offsets[layer]..self.offsets[layer] + self.blocks[layer].nrows
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (l, b) in self.blocks.iter().enumerate() {
            let r = self.block_range(l);
            b.mul_vec(&x[r.clone()], &mut y[r]);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec(x, &mut y);
        y
    }

    /// Whole matrix as a single CSR.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut t = Vec::new();
        for (l, b) in self.blocks.iter().enumerate() {
            let o = self.offsets[l];
            for r in 0..b.nrows {
                t.extend(b.row(r).map(|(c, v)| (o + r, o + c, v)));
            }
        }
        CsrMatrix::from_triplets(self.dim, self.dim, t)
    }

    /// `max |K - Kᵀ| / max |K|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for b in &self.blocks {
            for r in 0..b.nrows {
                for (c, v) in b.row(r) {
                    worst = worst.max((v - b.get(c, r)).abs());
                    scale = scale.max(v.abs());
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

fn layer_stiffness(layer: &LayerMesh, layer_index: usize, dofs: &DofMap, material: &IsotropicMaterial) -> CsrMatrix {
    let range = dofs.layer_dofs(layer_index);
    let base = range.start;
    let mut triplets = Vec::with_capacity(layer.tets.len() * 144);
    for e in 0..layer.tets.len() {
        let ke = element_stiffness(&layer.tet_coords(e), material);
        let idx: Vec<Option<usize>> = layer.tets[e]
            .iter()
            .flat_map(|&n| (0..3).map(move |c| (n, c)))
            .map(|(n, c)| dofs.dof(layer_index, n, c).map(|d| d - base))
            .collect();
        for (a, ra) in idx.iter().enumerate() {
            let Some(ra) = *ra else { continue };
            for (b, rb) in idx.iter().enumerate() {
                if let Some(rb) = *rb {
                    triplets.push((ra, rb, ke[a][b]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(range.len(), range.len(), triplets)
}

fn layer_material<'a>(materials: &'a [IsotropicMaterial], layer: &LayerMesh) -> Result<&'a IsotropicMaterial> {
    materials.get(layer.material).ok_or_else(|| {
        ContactError::InvalidMaterial(format!("material index {} out of range ({} given)", layer.material, materials.len()))
    })
}

/// Assembles the Dirichlet-reduced stiffness matrix.
pub fn assemble_stiffness(mesh: &TetMesh, dofs: &DofMap, materials: &[IsotropicMaterial]) -> Result<SparseSymmetric> {
    let mats = mesh.layers.iter().map(|l| layer_material(materials, l)).collect::<Result<Vec<_>>>()?;
    let blocks: Vec<CsrMatrix> = mesh
        .layers
        .par_iter()
        .enumerate()
        .map(|(l, layer)| layer_stiffness(layer, l, dofs, mats[l]))
        .collect();
    let offsets = (0..mesh.layers.len()).map(|l| dofs.layer_dofs(l).start).collect();
    Ok(SparseSymmetric { dim: dofs.dof_count(), blocks, offsets })
}

/// Uniform traction on a rectangular patch of the loaded top face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchTraction {
    pub vector: [f64; 3],
    pub patch: Rect,
}

/// Body forces per layer and an optional surface traction.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSpec {
    pub body_force: Vec<[f64; 3]>,
    pub traction: Option<PatchTraction>,
}

impl LoadSpec {
    pub fn zero(layers: usize) -> Self {
        Self { body_force: vec![[0.0; 3]; layers], traction: None }
    }

    /// Scales every load by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            body_force: self.body_force.iter().map(|f| f.map(|v| s * v)).collect(),
            traction: self.traction.map(|t| PatchTraction { vector: t.vector.map(|v| s * v), ..t }),
        }
    }
}

const PATCH_DEPTH: u32 = 4;

/// `∫_{T ∩ patch} φ_a` for the three vertex basis functions of a horizontal triangle.
pub fn patch_basis_integrals(tri: [[f64; 2]; 3], patch: &Rect) -> [f64; 3] {
    let area = 0.5 * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1])).abs();
    let mut out = [0.0; 3];
    // Sub-triangles are tracked in barycentric coordinates of the parent.
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    accumulate_patch(tri, patch, corners, area, PATCH_DEPTH, &mut out);
    out
}

fn accumulate_patch(tri: [[f64; 2]; 3], patch: &Rect, bary: [[f64; 3]; 3], area: f64, depth: u32, out: &mut [f64; 3]) {
    let xy = bary.map(|b| {
        [b[0] * tri[0][0] + b[1] * tri[1][0] + b[2] * tri[2][0], b[0] * tri[0][1] + b[1] * tri[1][1] + b[2] * tri[2][1]]
    });
    if separated(&xy, patch) {
        return;
    }
    if xy.iter().all(|&p| patch.contains(p)) {
        for a in 0..3 {
            out[a] += area * (bary[0][a] + bary[1][a] + bary[2][a]) / 3.0;
        }
        return;
    }
    if depth == 0 {
        let c = [0, 1].map(|d| (xy[0][d] + xy[1][d] + xy[2][d]) / 3.0);
        if patch.contains(c) {
            for a in 0..3 {
                out[a] += area * (bary[0][a] + bary[1][a] + bary[2][a]) / 3.0;
            }
        }
        return;
    }
    let mid = |i: usize, j: usize| [0, 1, 2].map(|a| 0.5 * (bary[i][a] + bary[j][a]));
    let (m01, m12, m20) = (mid(0, 1), mid(1, 2), mid(2, 0));
    for sub in [[bary[0], m01, m20], [m01, bary[1], m12], [m20, m12, bary[2]], [m01, m12, m20]] {
        accumulate_patch(tri, patch, sub, area / 4.0, depth - 1, out);
    }
}

/// True when a triangle and the rectangle share no interior point.
fn separated(xy: &[[f64; 2]; 3], r: &Rect) -> bool {
    let (xmin, xmax) = (xy.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), xy.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max));
    let (ymin, ymax) = (xy.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min), xy.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max));
    if xmax <= r.x[0] || xmin >= r.x[1] || ymax <= r.y[0] || ymin >= r.y[1] {
        return true;
    }
    let corners = [[r.x[0], r.y[0]], [r.x[1], r.y[0]], [r.x[1], r.y[1]], [r.x[0], r.y[1]]];
    for k in 0..3 {
        let (a, b, c) = (xy[k], xy[(k + 1) % 3], xy[(k + 2) % 3]);
        let n = [b[1] - a[1], a[0] - b[0]];
        let side = |p: [f64; 2]| n[0] * (p[0] - a[0]) + n[1] * (p[1] - a[1]);
        let s = side(c).signum();
        if corners.iter().all(|&p| s * side(p) <= 0.0) {
            return true;
        }
    }
    false
}

/// Consistent nodal loads on every node, before Dirichlet elimination.
pub fn nodal_loads(mesh: &TetMesh, loads: &LoadSpec) -> Result<Vec<Vec<[f64; 3]>>> {
    if loads.body_force.len() != mesh.layers.len() {
        return Err(ContactError::DimensionMismatch { expected: mesh.layers.len(), actual: loads.body_force.len() });
    }
    let mut out: Vec<Vec<[f64; 3]>> = mesh.layers.iter().map(|l| vec![[0.0; 3]; l.nodes.len()]).collect();
    for (l, layer) in mesh.layers.iter().enumerate() {
        let f = loads.body_force[l];
        if f == [0.0; 3] {
            continue;
        }
        for e in 0..layer.tets.len() {
            let share = layer.tet_volume(e) / 4.0;
            for &n in &layer.tets[e] {
                for c in 0..3 {
                    out[l][n][c] += f[c] * share;
                }
            }
        }
    }
    if let Some(t) = &loads.traction {
        if !mesh.footprint.contains_rect(&t.patch) {
            return Err(ContactError::InvalidGeometry("traction patch leaves the footprint".into()));
        }
        let top = &mesh.layers[0];
        for tri in top.tagged(FacetTag::TractionTop) {
            let xy = tri.nodes.map(|n| [top.nodes[n][0], top.nodes[n][1]]);
            let w = patch_basis_integrals(xy, &t.patch);
            for (a, &n) in tri.nodes.iter().enumerate() {
                for c in 0..3 {
                    out[0][n][c] += t.vector[c] * w[a];
                }
            }
        }
    }
    Ok(out)
}

/// Dirichlet-reduced load vector.
pub fn assemble_loads(mesh: &TetMesh, dofs: &DofMap, loads: &LoadSpec) -> Result<Vec<f64>> {
    Ok(dofs.restrict(&nodal_loads(mesh, loads)?))
}

/// Displacement of free nodes together with their numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub values: Vec<f64>,
    pub dofs: Arc<DofMap>,
}

impl DisplacementField {
    pub fn new(values: Vec<f64>, dofs: Arc<DofMap>) -> Result<Self> {
        if values.len() != dofs.dof_count() {
            return Err(ContactError::DimensionMismatch { expected: dofs.dof_count(), actual: values.len() });
        }
        Ok(Self { values, dofs })
    }

    pub fn zeros(dofs: Arc<DofMap>) -> Self {
        Self { values: vec![0.0; dofs.dof_count()], dofs }
    }

    /// Nodal vectors of a layer including zero Dirichlet nodes.
    pub fn layer_nodal(&self, layer: usize) -> Vec<[f64; 3]> {
        self.dofs.layer_nodal(layer, &self.values)
    }

    pub fn layer_values(&self, layer: usize) -> &[f64] {
        &self.values[self.dofs.layer_dofs(layer)]
    }
}

/// Displacement gradient `∂u_i/∂x_j` of a P1 field on one element.
pub fn element_gradient(layer: &LayerMesh, elem: usize, nodal: &[[f64; 3]]) -> Tensor3 {
    let (g, _) = tet_gradients(&layer.tet_coords(elem));
    let mut du = [[0.0; 3]; 3];
    for (a, &n) in layer.tets[elem].iter().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                du[i][j] += nodal[n][i] * g[a][j];
            }
        }
    }
    du
}

/// Constant stress of one element.
pub fn compute_element_stress(
    mesh: &TetMesh,
    layer: usize,
    elem: usize,
    material: &IsotropicMaterial,
    u: &DisplacementField,
) -> Tensor3 {
    let du = element_gradient(&mesh.layers[layer], elem, &u.layer_nodal(layer));
    let mut eps = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            eps[i][j] = 0.5 * (du[i][j] + du[j][i]);
        }
    }
    material.stress(&eps)
}

/// `sqrt(uᵀKu / 2)`.
pub fn energy_norm(k: &SparseSymmetric, u: &[f64]) -> Result<f64> {
    if u.len() != k.dim {
        return Err(ContactError::DimensionMismatch { expected: k.dim, actual: u.len() });
    }
    let ku = k.apply(u);
    Ok((0.5 * dot(u, &ku)).max(0.0).sqrt())
}

/// Energy norm of the restriction of `u` to one layer.
pub fn layer_energy_norm(k: &SparseSymmetric, u: &[f64], layer: usize) -> Result<f64> {
    if u.len() != k.dim {
        return Err(ContactError::DimensionMismatch { expected: k.dim, actual: u.len() });
    }
    let r = k.block_range(layer);
    let x = &u[r];
    let kx = k.blocks[layer].apply(x);
    Ok((0.5 * dot(x, &kx)).max(0.0).sqrt())
}

/// Nonsmooth friction work `j(u)` appearing in the primal energy.
pub trait FrictionWork {
    fn work(&self, u: &[f64]) -> Result<f64>;
}

/// `½uᵀKu + j(u) − fᵀu`.
pub fn primal_objective(k: &SparseSymmetric, f: &[f64], u: &[f64], friction: &dyn FrictionWork) -> Result<f64> {
    if f.len() != k.dim {
        return Err(ContactError::DimensionMismatch { expected: k.dim, actual: f.len() });
    }
    let e = energy_norm(k, u)?;
    Ok(e * e + friction.work(u)? - dot(f, u))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
