//! Mesh refinement study on the reduced convergence model.

use layered_contact::harness::config::convergence_model;
use layered_contact::harness::experiments::convergence_study;

fn main() -> layered_contact::Result<()> {
    let mut cfg = convergence_model();
    cfg.mesh.h_list = vec![0.5, 0.25, 0.125];
    let report = convergence_study(&cfg)?;
    println!("reference h = {}", report.reference_h);
    for r in &report.rows {
        println!("h = {:<6} {:>7} unknowns  error {:.3e}  {:.2} s", r.h, r.dof, r.rel_err_total, r.runtime_s);
    }
    match report.fitted_order {
        Some(p) => println!("fitted order {p:.3}"),
        None => println!("too few sizes for a fit"),
    }
    Ok(())
}
