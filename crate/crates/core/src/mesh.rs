//! Structured tetrahedral meshes of stacked rectangular layers.
//!
//! Layers are numbered from the top (index 0) downward, so the z coordinate
//! decreases with the layer index. Interface `k` separates layer `k` (above)
//! from layer `k + 1` (below). Each layer is an independent conforming mesh;
//! all layers share the same in-plane grid, so nodes on an interface plane
//! coincide pairwise.
//!
//! Every hexahedral cell is split into six tetrahedra along its main
//! diagonal (the Kuhn subdivision). Boundary quads are split along the
//! diagonal running from their minimum to their maximum corner, which is
//! the trace of that subdivision.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{ContactError, Result};

/// Axis-aligned rectangle in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x: [x0, x1], y: [y0, y1] }
    }

    pub fn width(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn depth(&self) -> f64 {
        self.y[1] - self.y[0]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.depth()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.depth())
    }

    /// Closed containment test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x[0] >= self.x[0] && other.x[1] <= self.x[1] && other.y[0] >= self.y[0] && other.y[1] <= self.y[1]
    }
}

/// One layer of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub thickness: f64,
    pub material: usize,
}

/// Which boundary faces carry homogeneous Dirichlet conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletPolicy {
    /// Side faces of every layer and the bottom face of the lowest layer.
    #[default]
    SidesAndBottom,
    /// Top face of the first layer and bottom face of the last layer; side
    /// faces are traction free.
    EndFaces,
}

/// Geometry of a stack of rectangular layers, listed top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStackSpec {
    pub footprint: Rect,
    pub layers: Vec<LayerSpec>,
    pub z_top: f64,
    pub dirichlet: DirichletPolicy,
}

/// Cell counts of one layer grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridDims {
    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }

    /// Local node index of grid point `(i, j, k)`, with `k = 0` at the layer bottom.
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (k * (self.ny + 1) + j) * (self.nx + 1) + i
    }

    /// Inverse of [`GridDims::node`].
    pub fn ijk(&self, node: usize) -> (usize, usize, usize) {
        let i = node % (self.nx + 1);
        let rest = node / (self.nx + 1);
        (i, rest % (self.ny + 1), rest / (self.ny + 1))
    }
}

/// Element and node totals of a mesh, computed without building it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshCounts {
    pub hexes: usize,
    pub tets: usize,
    pub nodes: usize,
}

impl LayerStackSpec {
    pub fn validate(&self) -> Result<()> {
        let fp = &self.footprint;
        if !(fp.width() > 0.0 && fp.depth() > 0.0) || !fp.area().is_finite() {
            return Err(ContactError::InvalidGeometry("footprint extents must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(ContactError::InvalidGeometry("at least one layer is required".into()));
        }
        if let Some(l) = self.layers.iter().position(|l| !(l.thickness > 0.0 && l.thickness.is_finite())) {
            return Err(ContactError::InvalidGeometry(format!("layer {l} has non-positive thickness")));
        }
        if !self.z_top.is_finite() {
            return Err(ContactError::InvalidGeometry("z_top must be finite".into()));
        }
        Ok(())
    }

    /// Vertical extent `(z_bottom, z_top)` of a layer.
    pub fn layer_extent(&self, layer: usize) -> (f64, f64) {
        let above: f64 = self.layers[..layer].iter().map(|l| l.thickness).sum();
        let top = self.z_top - above;
        (top - self.layers[layer].thickness, top)
    }

    pub fn grid_dims(&self, h: f64) -> Result<Vec<GridDims>> {
        self.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(ContactError::InvalidGeometry(format!("mesh size must be positive, got {h}")));
        }
        let cells = |len: f64| ((len / h).round() as usize).max(1);
        let nx = cells(self.footprint.width());
        let ny = cells(self.footprint.depth());
        Ok(self.layers.iter().map(|l| GridDims { nx, ny, nz: cells(l.thickness) }).collect())
    }

    pub fn counts(&self, h: f64) -> Result<MeshCounts> {
        let dims = self.grid_dims(h)?;
        let hexes = dims.iter().map(GridDims::cells).sum::<usize>();
        Ok(MeshCounts { hexes, tets: 6 * hexes, nodes: dims.iter().map(GridDims::nodes).sum() })
    }
}

/// Boundary condition class of a boundary triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FacetTag {
    /// Homogeneous displacement condition.
    Dirichlet,
    /// Loaded top face of the first layer.
    TractionTop,
    /// Top face of a layer resting against the layer above.
    ContactTop,
    /// Bottom face of a layer resting on the layer below.
    ContactBottom,
    /// Unloaded, unconstrained face.
    TractionFree,
}

/// Boundary face of a box, used to group boundary triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoxFace {
    XMin,
    XMax,
    YMin,
    YMax,
    Bottom,
    Top,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTriangle {
    pub nodes: [usize; 3],
    pub face: BoxFace,
    pub tag: Option<FacetTag>,
}

/// Conforming tetrahedral mesh of a single layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMesh {
    pub nodes: Vec<[f64; 3]>,
    pub tets: Vec<[usize; 4]>,
    pub boundary: Vec<BoundaryTriangle>,
    pub grid: GridDims,
    pub z_bottom: f64,
    pub z_top: f64,
    /// Effective cell size along x, y, z.
    pub spacing: [f64; 3],
    pub material: usize,
}

impl LayerMesh {
    pub fn tet_coords(&self, e: usize) -> [[f64; 3]; 4] {
        self.tets[e].map(|n| self.nodes[n])
    }

    pub fn tet_volume(&self, e: usize) -> f64 {
        signed_volume(&self.tet_coords(e))
    }

    pub fn triangle_area(&self, t: &BoundaryTriangle) -> f64 {
        triangle_area(&t.nodes.map(|n| self.nodes[n]))
    }

    pub fn tagged(&self, tag: FacetTag) -> impl Iterator<Item = &BoundaryTriangle> {
        self.boundary.iter().filter(move |t| t.tag == Some(tag))
    }

    /// Nodes lying on at least one Dirichlet triangle, sorted.
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        let mut fixed = vec![false; self.nodes.len()];
        for t in self.tagged(FacetTag::Dirichlet) {
            for &n in &t.nodes {
                fixed[n] = true;
            }
        }
        (0..self.nodes.len()).filter(|&n| fixed[n]).collect()
    }

    /// Horizontal nodes of the top (`k = nz`) or bottom (`k = 0`) plane, in
    /// lexicographic `(y, x)` grid order.
    pub fn plane_nodes(&self, top: bool) -> Vec<usize> {
        let g = self.grid;
        let k = if top { g.nz } else { 0 };
        (0..=g.ny).flat_map(|j| (0..=g.nx).map(move |i| g.node(i, j, k))).collect()
    }
}

/// Tetrahedral mesh of the whole stack.
#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    pub layers: Vec<LayerMesh>,
    pub footprint: Rect,
    pub h: f64,
    pub dirichlet: DirichletPolicy,
    node_offsets: Vec<usize>,
}

impl TetMesh {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn interface_count(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    /// Global index of a layer-local node; interface nodes appear once per layer.
    pub fn global_node(&self, layer: usize, local: usize) -> usize {
        self.node_offsets[layer] + local
    }

    pub fn node_count(&self) -> usize {
        self.node_offsets.last().copied().unwrap_or(0)
    }

    pub fn tet_count(&self) -> usize {
        self.layers.iter().map(|l| l.tets.len()).sum()
    }

    /// Rebuilds global node offsets after layers were edited in place.
    pub fn refresh_offsets(&mut self) {
        self.node_offsets = offsets(&self.layers);
    }
}

fn offsets(layers: &[LayerMesh]) -> Vec<usize> {
    let mut out = Vec::with_capacity(layers.len() + 1);
    out.push(0);
    for l in layers {
        out.push(out.last().unwrap() + l.nodes.len());
    }
    out
}

pub fn signed_volume(p: &[[f64; 3]; 4]) -> f64 {
    let a = sub(p[1], p[0]);
    let b = sub(p[2], p[0]);
    let c = sub(p[3], p[0]);
    dot(a, cross(b, c)) / 6.0
}

pub fn triangle_area(p: &[[f64; 3]; 3]) -> f64 {
    let n = cross(sub(p[1], p[0]), sub(p[2], p[0]));
    0.5 * dot(n, n).sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

const AXIS_PERMUTATIONS: [([usize; 3], bool); 6] = [
    ([0, 1, 2], true),
    ([1, 2, 0], true),
    ([2, 0, 1], true),
    ([0, 2, 1], false),
    ([2, 1, 0], false),
    ([1, 0, 2], false),
];

/// Builds the stacked mesh with target size `h`.
pub fn build_layer_stack(spec: &LayerStackSpec, h: f64) -> Result<TetMesh> {
    let dims = spec.grid_dims(h)?;
    let n = spec.layers.len();
    let mut layers = Vec::with_capacity(n);
    for (l, (layer, &g)) in spec.layers.iter().zip(&dims).enumerate() {
        let (z_bottom, z_top) = spec.layer_extent(l);
        let fp = &spec.footprint;
        let spacing = [fp.width() / g.nx as f64, fp.depth() / g.ny as f64, layer.thickness / g.nz as f64];
        let coord = |count: usize, idx: usize, lo: f64, hi: f64| {
            if idx == count {
                hi
            } else {
                lo + (hi - lo) * idx as f64 / count as f64
            }
        };
        let mut nodes = Vec::with_capacity(g.nodes());
        for k in 0..=g.nz {
            for j in 0..=g.ny {
                for i in 0..=g.nx {
                    nodes.push([
                        coord(g.nx, i, fp.x[0], fp.x[1]),
                        coord(g.ny, j, fp.y[0], fp.y[1]),
                        coord(g.nz, k, z_bottom, z_top),
                    ]);
                }
            }
        }

        let mut tets = Vec::with_capacity(6 * g.cells());
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let corner = |o: [usize; 3]| g.node(i + o[0], j + o[1], k + o[2]);
                    for (perm, even) in AXIS_PERMUTATIONS {
                        let mut o1 = [0; 3];
                        o1[perm[0]] = 1;
                        let mut o2 = o1;
                        o2[perm[1]] = 1;
                        let t = [corner([0, 0, 0]), corner(o1), corner(o2), corner([1, 1, 1])];
                        tets.push(if even { t } else { [t[0], t[2], t[1], t[3]] });
                    }
                }
            }
        }

        let top_tag = match (l, spec.dirichlet) {
            (0, DirichletPolicy::SidesAndBottom) => FacetTag::TractionTop,
            (0, DirichletPolicy::EndFaces) => FacetTag::Dirichlet,
            _ => FacetTag::ContactTop,
        };
        let bottom_tag = if l + 1 == n { FacetTag::Dirichlet } else { FacetTag::ContactBottom };
        let side_tag = match spec.dirichlet {
            DirichletPolicy::SidesAndBottom => FacetTag::Dirichlet,
            DirichletPolicy::EndFaces => FacetTag::TractionFree,
        };

        let mut boundary = Vec::new();
        let mut quad = |face: BoxFace, tag: FacetTag, p: [usize; 4]| {
            // p = (p00, p10, p11, p01) in face-local axis order.
            for nodes in [[p[0], p[1], p[2]], [p[0], p[2], p[3]]] {
                boundary.push(BoundaryTriangle { nodes, face, tag: Some(tag) });
            }
        };
        for (k, face, tag) in [(0, BoxFace::Bottom, bottom_tag), (g.nz, BoxFace::Top, top_tag)] {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    quad(face, tag, [g.node(i, j, k), g.node(i + 1, j, k), g.node(i + 1, j + 1, k), g.node(i, j + 1, k)]);
                }
            }
        }
        for (i, face) in [(0, BoxFace::XMin), (g.nx, BoxFace::XMax)] {
            for k in 0..g.nz {
                for j in 0..g.ny {
                    quad(face, side_tag, [g.node(i, j, k), g.node(i, j + 1, k), g.node(i, j + 1, k + 1), g.node(i, j, k + 1)]);
                }
            }
        }
        for (j, face) in [(0, BoxFace::YMin), (g.ny, BoxFace::YMax)] {
            for k in 0..g.nz {
                for i in 0..g.nx {
                    quad(face, side_tag, [g.node(i, j, k), g.node(i + 1, j, k), g.node(i + 1, j, k + 1), g.node(i, j, k + 1)]);
                }
            }
        }

        layers.push(LayerMesh {
            nodes,
            tets,
            boundary,
            grid: g,
            z_bottom,
            z_top,
            spacing,
            material: layer.material,
        });
    }
    let node_offsets = offsets(&layers);
    Ok(TetMesh { layers, footprint: spec.footprint, h, dirichlet: spec.dirichlet, node_offsets })
}

/// Pair of coincident nodes across an interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePair {
    /// Node on the bottom face of the upper layer.
    pub upper: usize,
    /// Node on the top face of the lower layer.
    pub lower: usize,
    pub xy: [f64; 2],
}

/// Contact triangle given by three indices into [`ContactPairing::pairs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactTriangle {
    pub vertices: [usize; 3],
    pub upper_facet: usize,
    pub lower_facet: usize,
    pub area: f64,
}

/// Matched node and triangle sets of one interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPairing {
    pub interface: usize,
    pub upper_layer: usize,
    pub lower_layer: usize,
    pub z: f64,
    pub pairs: Vec<NodePair>,
    pub triangles: Vec<ContactTriangle>,
    /// Outward normal of the upper layer on the interface.
    pub upper_normal: [f64; 3],
    /// Outward normal of the lower layer on the interface.
    pub lower_normal: [f64; 3],
}

impl ContactPairing {
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }
}

/// Matches the bottom face of layer `interface` with the top face of layer
/// `interface + 1`.
pub fn extract_contact_pairing(mesh: &TetMesh, interface: usize) -> Result<ContactPairing> {
    if interface + 1 >= mesh.layers.len() {
        return Err(ContactError::NoSuchInterface { interface, layers: mesh.layers.len() });
    }
    let upper = &mesh.layers[interface];
    let lower = &mesh.layers[interface + 1];
    let tol = 1e-12 * mesh.footprint.diameter();
    let mismatch = |detail: String| ContactError::ContactMismatch { interface, detail };

    let face_nodes = |m: &LayerMesh, tag: FacetTag| {
        let mut seen = vec![false; m.nodes.len()];
        for t in m.tagged(tag) {
            for &n in &t.nodes {
                seen[n] = true;
            }
        }
        let mut list: Vec<usize> = (0..m.nodes.len()).filter(|&n| seen[n]).collect();
        list.sort_by(|&a, &b| {
            let (pa, pb) = (m.nodes[a], m.nodes[b]);
            pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
        });
        list
    };
    let up = face_nodes(upper, FacetTag::ContactBottom);
    let lo = face_nodes(lower, FacetTag::ContactTop);
    if up.len() != lo.len() {
        return Err(mismatch(format!("{} upper nodes vs {} lower nodes", up.len(), lo.len())));
    }
    if up.is_empty() {
        return Err(mismatch("no contact facets".into()));
    }

    let mut pairs = Vec::with_capacity(up.len());
    let mut upper_to_pair = HashMap::with_capacity(up.len());
    let mut lower_to_pair = HashMap::with_capacity(up.len());
    for (&a, &b) in up.iter().zip(&lo) {
        let (pa, pb) = (upper.nodes[a], lower.nodes[b]);
        if (pa[0] - pb[0]).abs() > tol || (pa[1] - pb[1]).abs() > tol || (pa[2] - pb[2]).abs() > tol {
            return Err(mismatch(format!("upper node at {pa:?} has no partner (nearest {pb:?})")));
        }
        upper_to_pair.insert(a, pairs.len());
        lower_to_pair.insert(b, pairs.len());
        pairs.push(NodePair { upper: a, lower: b, xy: [pa[0], pa[1]] });
    }

    let sorted = |v: [usize; 3]| {
        let mut s = v;
        s.sort_unstable();
        s
    };
    let mut lower_faces = HashMap::new();
    for (f, t) in lower.boundary.iter().enumerate() {
        if t.tag == Some(FacetTag::ContactTop) {
            let key = sorted(t.nodes.map(|n| lower_to_pair[&n]));
            lower_faces.insert(key, f);
        }
    }
    let mut triangles = Vec::new();
    for (f, t) in upper.boundary.iter().enumerate() {
        if t.tag != Some(FacetTag::ContactBottom) {
            continue;
        }
        let vertices = t.nodes.map(|n| upper_to_pair[&n]);
        let lower_facet = *lower_faces
            .get(&sorted(vertices))
            .ok_or_else(|| mismatch(format!("upper facet {f} has no partner facet")))?;
        triangles.push(ContactTriangle { vertices, upper_facet: f, lower_facet, area: upper.triangle_area(t) });
    }
    if triangles.len() != lower_faces.len() {
        return Err(mismatch("facet counts differ".into()));
    }

    Ok(ContactPairing {
        interface,
        upper_layer: interface,
        lower_layer: interface + 1,
        z: upper.z_bottom,
        pairs,
        triangles,
        upper_normal: [0.0, 0.0, -1.0],
        lower_normal: [0.0, 0.0, 1.0],
    })
}

/// Pairings of every interface, top to bottom.
pub fn all_pairings(mesh: &TetMesh) -> Result<Vec<ContactPairing>> {
    (0..mesh.interface_count()).map(|i| extract_contact_pairing(mesh, i)).collect()
}

/// A violated mesh invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshIssue {
    NonPositiveVolume { layer: usize, tet: usize, volume: f64 },
    VolumeMismatch { layer: usize, total: f64, expected: f64 },
    UntaggedFacet { layer: usize, facet: usize },
    UncoveredFacet { layer: usize, nodes: [usize; 3] },
    SpuriousFacet { layer: usize, facet: usize },
    DuplicateNode { layer: usize, first: usize, second: usize },
}

/// Per-layer facet area by tag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagAreas {
    pub areas: Vec<(FacetTag, f64)>,
}

impl TagAreas {
    pub fn get(&self, tag: FacetTag) -> f64 {
        self.areas.iter().find(|(t, _)| *t == tag).map_or(0.0, |(_, a)| *a)
    }
}

/// Result of [`validate_mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeshDiagnostics {
    pub min_volume: f64,
    pub max_volume: f64,
    pub tag_areas: Vec<TagAreas>,
    pub issues: Vec<MeshIssue>,
}

impl MeshDiagnostics {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks orientation, volume, facet coverage and node uniqueness.
pub fn validate_mesh(mesh: &TetMesh) -> MeshDiagnostics {
    let mut issues = Vec::new();
    let mut min_volume = f64::INFINITY;
    let mut max_volume = f64::NEG_INFINITY;
    let mut tag_areas = Vec::with_capacity(mesh.layers.len());
    let fp_area = mesh.footprint.area();

    for (l, layer) in mesh.layers.iter().enumerate() {
        let mut total = 0.0;
        for e in 0..layer.tets.len() {
            let v = layer.tet_volume(e);
            min_volume = min_volume.min(v);
            max_volume = max_volume.max(v);
            total += v;
            if v <= 0.0 {
                issues.push(MeshIssue::NonPositiveVolume { layer: l, tet: e, volume: v });
            }
        }
        let expected = fp_area * (layer.z_top - layer.z_bottom);
        if (total - expected).abs() > 1e-10 * expected {
            issues.push(MeshIssue::VolumeMismatch { layer: l, total, expected });
        }

        let mut face_count: HashMap<[usize; 3], u32> = HashMap::new();
        for t in &layer.tets {
            for skip in 0..4 {
                let mut f = [0; 3];
                let mut c = 0;
                for (a, &n) in t.iter().enumerate() {
                    if a != skip {
                        f[c] = n;
                        c += 1;
                    }
                }
                f.sort_unstable();
                *face_count.entry(f).or_default() += 1;
            }
        }
        let mut exterior: HashMap<[usize; 3], bool> =
            face_count.into_iter().filter(|&(_, c)| c == 1).map(|(f, _)| (f, false)).collect();
        let mut areas = TagAreas::default();
        for (f, t) in layer.boundary.iter().enumerate() {
            let mut key = t.nodes;
            key.sort_unstable();
            match exterior.get_mut(&key) {
                Some(seen) if !*seen => *seen = true,
                _ => issues.push(MeshIssue::SpuriousFacet { layer: l, facet: f }),
            }
            match t.tag {
                None => issues.push(MeshIssue::UntaggedFacet { layer: l, facet: f }),
                Some(tag) => {
                    let a = layer.triangle_area(t);
                    match areas.areas.iter_mut().find(|(g, _)| *g == tag) {
                        Some(entry) => entry.1 += a,
                        None => areas.areas.push((tag, a)),
                    }
                }
            }
        }
        let mut uncovered: Vec<[usize; 3]> = exterior.into_iter().filter(|(_, s)| !s).map(|(f, _)| f).collect();
        uncovered.sort_unstable();
        issues.extend(uncovered.into_iter().map(|nodes| MeshIssue::UncoveredFacet { layer: l, nodes }));
        tag_areas.push(areas);

        let mut order: Vec<usize> = (0..layer.nodes.len()).collect();
        let key = |n: usize| layer.nodes[n];
        order.sort_by(|&a, &b| {
            let (pa, pb) = (key(a), key(b));
            pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1])).then(pa[2].total_cmp(&pb[2]))
        });
        let tol = 1e-12 * mesh.footprint.diameter();
        for w in order.windows(2) {
            let (pa, pb) = (key(w[0]), key(w[1]));
            if (0..3).all(|c| (pa[c] - pb[c]).abs() <= tol) {
                issues.push(MeshIssue::DuplicateNode { layer: l, first: w[0], second: w[1] });
            }
        }
    }
    MeshDiagnostics { min_volume, max_volume, tag_areas, issues }
}
