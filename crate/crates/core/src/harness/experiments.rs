//! Experiment drivers behind the command-line subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::assembly::{energy_norm, layer_energy_norm, DisplacementField};
use crate::contact::{jump_values, ContactSpaceKind};
use crate::error::{ContactError, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::export::{export_csv, export_json, export_vtk, Cell, Table};
use crate::ldm::{solve_ldm, LdmReport, LdmSolution, LdmStatus};
use crate::mesh::{build_layer_stack, TetMesh};
use crate::mfem::{solve_mfem, MfemSolution, SolveReport};
use crate::problem::ContactProblem;
use crate::qp::QpStatus;

/// Tangential jumps at or below this length count as stick.
pub const SLIP_THRESHOLD: f64 = 1e-8;

/// How per-layer vector differences are measured in [`ErrorTable`].
pub const VECTOR_NORM: &str = "euclidean norm over all nodal displacement components of the layer";

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Meshes and assembles the configured problem at size `h`.
pub fn build_problem(cfg: &ExperimentConfig, h: f64) -> Result<ContactProblem> {
    let mesh = build_layer_stack(&cfg.stack_spec(), h).map_err(|e| e.in_stage("mesh"))?;
    let materials = cfg.material_models().map_err(|e| e.in_stage("materials"))?;
    ContactProblem::from_mesh(mesh, &materials, &cfg.load_spec(), &cfg.friction).map_err(|e| e.in_stage("assembly"))
}

/// A problem with whichever solutions the configuration asked for.
pub struct CaseSolution {
    pub h: f64,
    pub problem: ContactProblem,
    pub setup_time_s: f64,
    pub mfem: Option<MfemSolution>,
    pub ldm: Option<LdmSolution>,
}

pub fn solve_case(cfg: &ExperimentConfig, h: f64) -> Result<CaseSolution> {
    let clock = Instant::now();
    let problem = build_problem(cfg, h)?;
    let setup_time_s = clock.elapsed().as_secs_f64();
    let mfem = if cfg.solver.runs_mfem() {
        Some(solve_mfem(&problem, cfg.contact_space, &cfg.mfem).map_err(|e| e.in_stage("mfem solve"))?)
    } else {
        None
    };
    let ldm = if cfg.solver.runs_ldm() {
        Some(solve_ldm(&problem, &cfg.ldm).map_err(|e| e.in_stage("ldm solve"))?)
    } else {
        None
    };
    Ok(CaseSolution { h, problem, setup_time_s, mfem, ldm })
}

/// JSON summary of one benchmark run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub h: f64,
    pub contact_space: ContactSpaceKind,
    pub dof: usize,
    pub nodes: usize,
    pub tets: usize,
    pub setup_time_s: f64,
    pub max_displacement: f64,
    pub mfem: Option<SolveReport>,
    pub ldm: Option<LdmReport>,
    pub files: Vec<PathBuf>,
}

fn max_abs(u: &DisplacementField) -> f64 {
    u.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Writes one VTK file per layer and returns their paths.
pub fn write_layer_fields(mesh: &TetMesh, u: &DisplacementField, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::with_capacity(mesh.layer_count());
    for (l, layer) in mesh.layers.iter().enumerate() {
        let path = dir.join(format!("{stem}_layer{}.vtk", l + 1));
        export_vtk(layer, &u.layer_nodal(l), &format!("{stem} layer {}", l + 1), &path).map_err(|e| e.in_stage("export"))?;
        files.push(path);
    }
    Ok(files)
}

/// Solves every configured mesh size and, given an output directory, writes
/// per-layer VTK fields and a JSON report per size.
pub fn run_benchmark(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let mut reports = Vec::with_capacity(cfg.mesh.h_list.len());
    for &h in &cfg.mesh.h_list {
        let case = solve_case(cfg, h)?;
        let mut files = Vec::new();
        if let Some(dir) = out {
            if let Some(s) = &case.mfem {
                files.extend(write_layer_fields(&case.problem.mesh, &s.displacement, dir, &format!("mfem_h{h}"))?);
            }
            if let Some(s) = &case.ldm {
                files.extend(write_layer_fields(&case.problem.mesh, &s.displacement, dir, &format!("ldm_h{h}"))?);
            }
        }
        let shown = case.mfem.as_ref().map(|s| &s.displacement).or(case.ldm.as_ref().map(|s| &s.displacement));
        let mut report = RunReport {
            h,
            contact_space: cfg.contact_space,
            dof: case.problem.dof_count(),
            nodes: case.problem.mesh.node_count(),
            tets: case.problem.mesh.tet_count(),
            setup_time_s: case.setup_time_s,
            max_displacement: shown.map_or(0.0, max_abs),
            mfem: case.mfem.as_ref().map(|s| s.report.clone()),
            ldm: case.ldm.as_ref().map(|s| s.report.clone()),
            files,
        };
        if let Some(dir) = out {
            let path = dir.join(format!("report_h{h}.json"));
            report.files.push(path.clone());
            export_json(&report, &path).map_err(|e| e.in_stage("export"))?;
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Per-layer differences between the two multiplier spaces at one size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub h: f64,
    pub absolute: Vec<f64>,
    /// Absolute difference over the norm of the elementwise-constant field.
    pub relative: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTable {
    pub norm: &'static str,
    pub layers: usize,
    pub rows: Vec<ErrorRow>,
}

impl Table for ErrorTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["H".to_string()];
        h.extend((1..=self.layers).map(|l| format!("abs_l{l}")));
        h.extend((1..=self.layers).map(|l| format!("rel_l{l}")));
        h
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![Cell::Float(r.h)];
                row.extend(r.absolute.iter().chain(&r.relative).copied().map(Cell::Float));
                row
            })
            .collect()
    }
}

/// Per-layer vector differences `‖a − b‖` and `‖a − b‖ / ‖a‖`.
pub fn layer_differences(a: &DisplacementField, b: &DisplacementField) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.values.len() != b.values.len() {
        return Err(ContactError::DimensionMismatch { expected: a.values.len(), actual: b.values.len() });
    }
    let mut abs = Vec::new();
    let mut rel = Vec::new();
    for l in 0..a.dofs.layer_count() {
        let (ua, ub) = (a.layer_values(l), b.layer_values(l));
        let diff: Vec<f64> = ua.iter().zip(ub).map(|(x, y)| x - y).collect();
        let d = euclid(&diff);
        let n = euclid(ua);
        abs.push(d);
        rel.push(if n > 0.0 { d / n } else { 0.0 });
    }
    Ok((abs, rel))
}

/// Solves with both multiplier spaces on every configured size and tabulates
/// the per-layer displacement differences.
pub fn compare_contact_spaces(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.mesh.h_list.len());
    for &h in &cfg.mesh.h_list {
        let problem = build_problem(cfg, h)?;
        let p0 = solve_mfem(&problem, ContactSpaceKind::ElementwiseConstant, &cfg.mfem).map_err(|e| e.in_stage("mfem solve"))?;
        let p1 = solve_mfem(&problem, ContactSpaceKind::NodalLinear, &cfg.mfem).map_err(|e| e.in_stage("mfem solve"))?;
        let (absolute, relative) = layer_differences(&p0.displacement, &p1.displacement)?;
        let converged = p0.report.status == QpStatus::Converged && p1.report.status == QpStatus::Converged;
        rows.push(ErrorRow { h, absolute, relative, converged });
    }
    Ok(ErrorTable { norm: VECTOR_NORM, layers: cfg.geometry.layers.len(), rows })
}

/// Tangential jump of both solvers at one contact node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlipSample {
    pub interface: usize,
    pub x: f64,
    pub y: f64,
    pub slip_mfem: f64,
    pub slip_ldm: f64,
    /// Neither side of the pair is held by a Dirichlet condition.
    pub interior: bool,
}

/// Slip magnitudes on every contact node, suitable for CSV grids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlipMap {
    pub samples: Vec<SlipSample>,
}

impl SlipMap {
    /// Fraction of interior nodes of `interface` classified alike.
    pub fn overlap(&self, interface: usize) -> f64 {
        let (mut same, mut total) = (0usize, 0usize);
        for s in self.samples.iter().filter(|s| s.interface == interface && s.interior) {
            total += 1;
            same += usize::from((s.slip_mfem > SLIP_THRESHOLD) == (s.slip_ldm > SLIP_THRESHOLD));
        }
        if total == 0 { 1.0 } else { same as f64 / total as f64 }
    }
}

impl Table for SlipMap {
    fn header(&self) -> Vec<String> {
        ["interface", "x", "y", "slip_mfem", "slip_ldm", "interior"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.samples
            .iter()
            .map(|s| {
                vec![
                    Cell::Int(s.interface + 1),
                    Cell::Float(s.x),
                    Cell::Float(s.y),
                    Cell::Float(s.slip_mfem),
                    Cell::Float(s.slip_ldm),
                    Cell::Int(usize::from(s.interior)),
                ]
            })
            .collect()
    }
}

/// Tangential jump magnitudes of two fields on every contact node.
pub fn slip_map(problem: &ContactProblem, a: &DisplacementField, b: &DisplacementField) -> SlipMap {
    let mut samples = Vec::new();
    for pairing in &problem.pairings {
        let ja = jump_values(&problem.dofs, &a.values, pairing);
        let jb = jump_values(&problem.dofs, &b.values, pairing);
        for ((p, sa), sb) in pairing.pairs.iter().zip(&ja).zip(&jb) {
            let interior = problem.dofs.free_node(pairing.upper_layer, p.upper).is_some()
                && problem.dofs.free_node(pairing.lower_layer, p.lower).is_some();
            samples.push(SlipSample {
                interface: pairing.interface,
                x: p.xy[0],
                y: p.xy[1],
                slip_mfem: sa.tangential[0].hypot(sa.tangential[1]),
                slip_ldm: sb.tangential[0].hypot(sb.tangential[1]),
                interior,
            });
        }
    }
    SlipMap { samples }
}

/// Agreement between the monolithic and layer-decomposition solvers.
#[derive(Debug, Clone, Serialize)]
pub struct SolverComparison {
    pub h: f64,
    /// `‖u_mfem − u_ldm‖_E / ‖u_mfem‖_E` over the whole stack.
    pub relative_energy: f64,
    pub relative_energy_layers: Vec<f64>,
    /// Stick/slip agreement on interior nodes, one entry per interface.
    pub overlap: Vec<f64>,
    pub mfem: SolveReport,
    pub ldm: LdmReport,
    #[serde(skip)]
    pub slip: SlipMap,
}

impl SolverComparison {
    pub fn ldm_converged(&self) -> bool {
        self.ldm.status == LdmStatus::Converged
    }
}

/// Relative energy-norm difference of two fields, total and per layer.
pub fn relative_energy_differences(problem: &ContactProblem, reference: &[f64], other: &[f64]) -> Result<(f64, Vec<f64>)> {
    let diff: Vec<f64> = reference.iter().zip(other).map(|(a, b)| a - b).collect();
    let k = &problem.stiffness;
    let total_ref = energy_norm(k, reference)?;
    let total = if total_ref > 0.0 { energy_norm(k, &diff)? / total_ref } else { energy_norm(k, &diff)? };
    let mut layers = Vec::with_capacity(problem.mesh.layer_count());
    for l in 0..problem.mesh.layer_count() {
        let r = layer_energy_norm(k, reference, l)?;
        let d = layer_energy_norm(k, &diff, l)?;
        layers.push(if r > 0.0 { d / r } else { d });
    }
    Ok((total, layers))
}

/// Solves with both methods at the first configured size. An unconverged
/// outer iteration is reported through the LDM status, not as an error.
pub fn compare_solvers(cfg: &ExperimentConfig) -> Result<SolverComparison> {
    cfg.validate()?;
    let h = cfg.mesh.h_list[0];
    let problem = build_problem(cfg, h)?;
    let mfem = solve_mfem(&problem, cfg.contact_space, &cfg.mfem).map_err(|e| e.in_stage("mfem solve"))?;
    let ldm = solve_ldm(&problem, &cfg.ldm).map_err(|e| e.in_stage("ldm solve"))?;
    let (relative_energy, relative_energy_layers) =
        relative_energy_differences(&problem, &mfem.displacement.values, &ldm.displacement.values)?;
    let slip = slip_map(&problem, &mfem.displacement, &ldm.displacement);
    let overlap = (0..problem.mesh.interface_count()).map(|k| slip.overlap(k)).collect();
    Ok(SolverComparison {
        h,
        relative_energy,
        relative_energy_layers,
        overlap,
        mfem: mfem.report,
        ldm: ldm.report,
        slip,
    })
}

/// Error of one coarse solution against the reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dof: usize,
    pub rel_err_total: f64,
    pub rel_err_layers: Vec<f64>,
    pub runtime_s: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub reference_h: f64,
    /// Coarse rows first, the reference row (zero error) last.
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln error` against `ln H` over coarse rows.
    pub fitted_order: Option<f64>,
}

impl ConvergenceReport {
    /// Whether the total error falls strictly along the coarse rows.
    pub fn strictly_decreasing(&self) -> bool {
        let coarse = &self.rows[..self.rows.len().saturating_sub(1)];
        coarse.windows(2).all(|w| w[1].rel_err_total < w[0].rel_err_total)
    }
}

impl Table for ConvergenceReport {
    fn header(&self) -> Vec<String> {
        let layers = self.rows.first().map_or(0, |r| r.rel_err_layers.len());
        let mut h = vec!["H".to_string(), "dof".into(), "rel_err_total".into()];
        h.extend((1..=layers).map(|l| format!("rel_err_l{l}")));
        h
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![Cell::Float(r.h), Cell::Int(r.dof), Cell::Float(r.rel_err_total)];
                row.extend(r.rel_err_layers.iter().copied().map(Cell::Float));
                row
            })
            .collect()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fitted_order(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Checks that every layer grid of `fine` refines the matching grid of
/// `coarse` by a whole factor per axis.
pub fn check_nested(coarse: &TetMesh, fine: &TetMesh) -> Result<()> {
    if coarse.layer_count() != fine.layer_count() || coarse.footprint != fine.footprint {
        return Err(ContactError::NotNested("meshes describe different stacks".into()));
    }
    for (l, (c, f)) in coarse.layers.iter().zip(&fine.layers).enumerate() {
        let (gc, gf) = (c.grid, f.grid);
        for (axis, nc, nf) in [("x", gc.nx, gf.nx), ("y", gc.ny, gf.ny), ("z", gc.nz, gf.nz)] {
            if nf % nc != 0 {
                return Err(ContactError::NotNested(format!(
                    "layer {} has {nc} cells along {axis} on the coarse mesh and {nf} on the fine mesh",
                    l + 1
                )));
            }
        }
        if c.z_bottom != f.z_bottom || c.z_top != f.z_top {
            return Err(ContactError::NotNested(format!("layer {} occupies different heights", l + 1)));
        }
    }
    Ok(())
}

/// Evaluates the piecewise-linear coarse field at every fine node.
///
/// Inside a grid cell with local coordinates `s` the six-tetrahedron split
/// makes the interpolant linear on each ordering of `s`, so the value is a
/// telescoping sum along the sorted axes.
pub fn interpolate_nested(coarse: &TetMesh, u: &DisplacementField, fine: &TetMesh) -> Result<Vec<Vec<[f64; 3]>>> {
    check_nested(coarse, fine)?;
    let mut out = Vec::with_capacity(fine.layer_count());
    for (l, (c, f)) in coarse.layers.iter().zip(&fine.layers).enumerate() {
        let g = c.grid;
        let nodal = u.layer_nodal(l);
        let origin = [coarse.footprint.x[0], coarse.footprint.y[0], c.z_bottom];
        let counts = [g.nx, g.ny, g.nz];
        let values = f
            .nodes
            .iter()
            .map(|p| {
                let mut cell = [0usize; 3];
                let mut s = [0.0; 3];
                for a in 0..3 {
                    let t = (p[a] - origin[a]) / c.spacing[a];
                    let i = (t.floor().max(0.0) as usize).min(counts[a] - 1);
                    cell[a] = i;
                    s[a] = (t - i as f64).clamp(0.0, 1.0);
                }
                let mut order = [0usize, 1, 2];
                order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
                let mut offset = [0usize; 3];
                let at = |o: [usize; 3]| nodal[g.node(cell[0] + o[0], cell[1] + o[1], cell[2] + o[2])];
                let mut value = at(offset);
                let mut prev = at(offset);
                for &a in &order {
                    offset[a] = 1;
                    let next = at(offset);
                    for d in 0..3 {
                        value[d] += s[a] * (next[d] - prev[d]);
                    }
                    prev = next;
                }
                value
            })
            .collect();
        out.push(values);
    }
    Ok(out)
}

/// Solves every size of a strictly decreasing list and measures the energy
/// error of each coarse solution against the finest one.
pub fn convergence_study(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let hs = &cfg.mesh.h_list;
    if hs.len() < 2 || hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ContactError::Config("convergence study needs at least two strictly decreasing mesh sizes".into()));
    }
    let spec = cfg.stack_spec();
    let meshes = hs.iter().map(|&h| build_layer_stack(&spec, h)).collect::<Result<Vec<_>>>().map_err(|e| e.in_stage("mesh"))?;
    let finest = meshes.last().unwrap();
    for m in &meshes[..meshes.len() - 1] {
        check_nested(m, finest)?;
    }
    let materials = cfg.material_models()?;
    let solve = |mesh: TetMesh| -> Result<(ContactProblem, MfemSolution, f64)> {
        let clock = Instant::now();
        let problem = ContactProblem::from_mesh(mesh, &materials, &cfg.load_spec(), &cfg.friction).map_err(|e| e.in_stage("assembly"))?;
        let sol = solve_mfem(&problem, cfg.contact_space, &cfg.mfem).map_err(|e| e.in_stage("mfem solve"))?;
        Ok((problem, sol, clock.elapsed().as_secs_f64()))
    };

    let mut meshes = meshes;
    let reference_mesh = meshes.pop().unwrap();
    let (reference, reference_sol, reference_time) = solve(reference_mesh)?;
    let u_ref = &reference_sol.displacement.values;
    let mut rows = Vec::with_capacity(hs.len());
    for (mesh, &h) in meshes.into_iter().zip(hs) {
        let (problem, sol, runtime_s) = solve(mesh)?;
        let nodal = interpolate_nested(&problem.mesh, &sol.displacement, &reference.mesh)?;
        let lifted = reference.dofs.restrict(&nodal);
        let (rel_err_total, rel_err_layers) = relative_energy_differences(&reference, u_ref, &lifted)?;
        rows.push(ConvergenceRow {
            h,
            dof: problem.dof_count(),
            rel_err_total,
            rel_err_layers,
            runtime_s,
            converged: sol.report.status == QpStatus::Converged,
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.rel_err_total)).collect();
    let fitted_order = fitted_order(&points);
    rows.push(ConvergenceRow {
        h: *hs.last().unwrap(),
        dof: reference.dof_count(),
        rel_err_total: 0.0,
        rel_err_layers: vec![0.0; reference.mesh.layer_count()],
        runtime_s: reference_time,
        converged: reference_sol.report.status == QpStatus::Converged,
    });
    Ok(ConvergenceReport { reference_h: *hs.last().unwrap(), rows, fitted_order })
}

/// Writes a table as CSV and the full value as JSON next to it.
pub fn export_table<T: Table + Serialize>(table: &T, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    export_csv(table, &csv)?;
    export_json(table, &json)?;
    Ok(vec![csv, json])
}
