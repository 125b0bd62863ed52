//! Assembles the jump operators for both multiplier spaces and evaluates
//! them on a uniform slide of the top layer.

use layered_contact::contact::{jump_values, ContactSpaceKind, FrictionFunctional};
use layered_contact::harness::config::paper_benchmark;
use layered_contact::problem::ContactProblem;

fn main() -> layered_contact::Result<()> {
    let cfg = paper_benchmark();
    let problem = ContactProblem::new(&cfg.stack_spec(), 0.8, &cfg.material_models()?, &cfg.load_spec(), &cfg.friction)?;

    let mut slide = vec![0.0; problem.dof_count()];
    for node in 0..problem.mesh.layers[0].nodes.len() {
        if let Some(d) = problem.dofs.dof(0, node, 0) {
            slide[d] = 1e-3;
        }
    }
    let jumps = jump_values(&problem.dofs, &slide, &problem.pairings[0]);
    let sliding = jumps.iter().filter(|j| j.tangential[0] != 0.0).count();
    println!("interface 1: {sliding} of {} node pairs slide", jumps.len());

    for kind in [ContactSpaceKind::ElementwiseConstant, ContactSpaceKind::NodalLinear] {
        let (coupling, friction) = problem.coupling(kind)?;
        let moments = coupling.tangential.apply(&slide);
        let total: f64 = moments.iter().step_by(2).sum();
        let functional =
            FrictionFunctional { dofs: &problem.dofs, pairings: &problem.pairings, coupling: &coupling, friction: &friction };
        println!(
            "{}: {} points, {} normal entries, slip moment {total:.4e}, friction work {:.4e}",
            kind.label(),
            coupling.point_count(),
            coupling.normal.nnz(),
            functional.evaluate(&slide)?
        );
    }
    Ok(())
}
