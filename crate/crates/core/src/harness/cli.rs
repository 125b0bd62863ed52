//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::contact::ContactSpaceKind;
use crate::error::{ContactError, Result};
use crate::harness::config::{convergence_model, paper_benchmark, ExperimentConfig, SolverChoice};
use crate::harness::experiments::{
    compare_contact_spaces, compare_solvers, convergence_study, export_table, run_benchmark,
};
use crate::harness::export::{export_csv, export_json};

#[derive(Debug, Parser)]
#[command(name = "layered-contact", version, about = "Frictional contact in layered elastic stacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and export fields and reports.
    Solve(Overrides),
    /// Tabulate differences between the two multiplier spaces.
    CompareSpaces(Overrides),
    /// Compare the monolithic and layer-decomposition solvers.
    CompareSolvers(Overrides),
    /// Energy-norm errors against the finest mesh size.
    Convergence(Overrides),
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// Experiment file; the built-in benchmark (or convergence model) otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mesh sizes, replacing the configured list.
    #[arg(long = "mesh-h", value_delimiter = ',')]
    pub mesh_h: Vec<f64>,
    #[arg(long, value_parser = parse_space)]
    pub contact_space: Option<ContactSpaceKind>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverChoice>,
    /// Dual solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Dual solver iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Layer decomposition relaxation.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
}

fn parse_space(s: &str) -> std::result::Result<ContactSpaceKind, String> {
    match s {
        "p0" => Ok(ContactSpaceKind::ElementwiseConstant),
        "p1" => Ok(ContactSpaceKind::NodalLinear),
        _ => Err(format!("expected p0 or p1, got {s:?}")),
    }
}

impl Overrides {
    /// Loads the base configuration and applies every override.
    pub fn resolve(&self, fallback: fn() -> ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => fallback(),
        };
        if !self.mesh_h.is_empty() {
            cfg.mesh.h_list = self.mesh_h.clone();
        }
        if let Some(k) = self.contact_space {
            cfg.contact_space = k;
        }
        if let Some(s) = self.solver {
            cfg.solver = s;
        }
        if let Some(t) = self.tol {
            cfg.mfem.tol = t;
        }
        if let Some(n) = self.max_iters {
            cfg.mfem.max_iter = n;
        }
        if let Some(t) = self.theta {
            cfg.ldm.theta = t;
        }
        if let Some(dir) = &self.out {
            cfg.output_dir = Some(dir.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ContactError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    Ok(())
}

fn out_dir(cfg: &ExperimentConfig) -> Option<&Path> {
    cfg.output_dir.as_deref()
}

/// Executes one subcommand, printing a summary to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(o) => {
            configure_threads(o.threads)?;
            let cfg = o.resolve(paper_benchmark)?;
            for r in run_benchmark(&cfg, out_dir(&cfg))? {
                println!("h = {}: {} dof, max |u| = {:.6e}", r.h, r.dof, r.max_displacement);
                if let Some(m) = &r.mfem {
                    println!(
                        "  mfem {:?} after {} iterations, residual {:.3e}, {:.2} s",
                        m.status, m.iterations, m.projected_gradient, m.wall_time_s
                    );
                }
                if let Some(l) = &r.ldm {
                    println!("  ldm {:?} after {} outer iterations, {:.2} s", l.status, l.outer_iterations, l.wall_time_s);
                }
                for f in &r.files {
                    println!("  wrote {}", f.display());
                }
            }
        }
        Command::CompareSpaces(o) => {
            configure_threads(o.threads)?;
            let cfg = o.resolve(paper_benchmark)?;
            let table = compare_contact_spaces(&cfg)?;
            print!("{}", crate::harness::export::render_csv(&table));
            if let Some(dir) = out_dir(&cfg) {
                for f in export_table(&table, dir, "contact_spaces")? {
                    println!("wrote {}", f.display());
                }
            }
        }
        Command::CompareSolvers(o) => {
            configure_threads(o.threads)?;
            let mut cfg = o.resolve(paper_benchmark)?;
            cfg.solver = SolverChoice::Both;
            let cmp = compare_solvers(&cfg)?;
            println!("h = {}: relative energy difference {:.3e}", cmp.h, cmp.relative_energy);
            for (l, e) in cmp.relative_energy_layers.iter().enumerate() {
                println!("  layer {}: {e:.3e}", l + 1);
            }
            for (k, o) in cmp.overlap.iter().enumerate() {
                println!("  interface {}: stick/slip overlap {:.1}%", k + 1, 100.0 * o);
            }
            println!("  ldm {:?} after {} outer iterations", cmp.ldm.status, cmp.ldm.outer_iterations);
            if let Some(dir) = out_dir(&cfg) {
                let csv = dir.join("slip_map.csv");
                let json = dir.join("solver_comparison.json");
                export_csv(&cmp.slip, &csv)?;
                export_json(&cmp, &json)?;
                println!("wrote {}\nwrote {}", csv.display(), json.display());
            }
        }
        Command::Convergence(o) => {
            configure_threads(o.threads)?;
            let cfg = o.resolve(convergence_model)?;
            let report = convergence_study(&cfg)?;
            print!("{}", crate::harness::export::render_csv(&report));
            match report.fitted_order {
                Some(p) => println!("fitted order {p:.3}"),
                None => println!("fitted order unavailable"),
            }
            if let Some(dir) = out_dir(&cfg) {
                for f in export_table(&report, dir, "convergence")? {
                    println!("wrote {}", f.display());
                }
            }
        }
    }
    Ok(())
}
