//! Writes the benchmark displacement as one legacy VTK file per layer and
//! reads the files back.
//!
//! ```text
//! cargo run --release --example export_fields -- out/
//! ```

use std::path::PathBuf;

use layered_contact::contact::ContactSpaceKind;
use layered_contact::harness::config::paper_benchmark;
use layered_contact::harness::experiments::write_layer_fields;
use layered_contact::harness::export::read_vtk;
use layered_contact::mfem::solve_mfem;
use layered_contact::problem::ContactProblem;

fn main() -> layered_contact::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "vtk".into()));
    let cfg = paper_benchmark();
    let problem = ContactProblem::new(&cfg.stack_spec(), 0.4, &cfg.material_models()?, &cfg.load_spec(), &cfg.friction)?;
    let sol = solve_mfem(&problem, ContactSpaceKind::NodalLinear, &cfg.mfem)?;
    for path in write_layer_fields(&problem.mesh, &sol.displacement, &dir, "benchmark")? {
        let grid = read_vtk(&path)?;
        println!("{}: {} points, {} cells", path.display(), grid.points.len(), grid.cells.len());
    }
    Ok(())
}
