//! Assembles stiffness and loads of the benchmark, solves the problem with
//! every interface glued and reports energy and stresses.

use layered_contact::assembly::{compute_element_stress, energy_norm};
use layered_contact::contact::ContactSpaceKind;
use layered_contact::harness::config::paper_benchmark;
use layered_contact::problem::ContactProblem;

fn main() -> layered_contact::Result<()> {
    let cfg = paper_benchmark();
    let problem = ContactProblem::new(&cfg.stack_spec(), 0.4, &cfg.material_models()?, &cfg.load_spec(), &cfg.friction)?;
    let k = &problem.stiffness;
    let nnz: usize = k.blocks.iter().map(|b| b.nnz()).sum();
    println!("{} unknowns, {nnz} stored stiffness entries in {} layer blocks", k.dim, k.blocks.len());
    let resultant: [f64; 3] = std::array::from_fn(|c| problem.load.iter().skip(c).step_by(3).sum());
    println!("load resultant on free nodes: {resultant:?}");

    // Layers solved independently, i.e. without any contact coupling.
    let free = problem.factor.solve(&problem.load);
    println!("uncoupled energy norm {:.6e}", energy_norm(k, &free)?);

    let (coupling, _) = problem.coupling(ContactSpaceKind::NodalLinear)?;
    let gap = coupling.normal.apply(&free);
    let worst = gap.iter().zip(&coupling.points).map(|(g, p)| g / p.support).fold(f64::MIN, f64::max);
    println!("largest mean penetration without contact forces: {worst:.3e}");

    let u = layered_contact::assembly::DisplacementField::new(free, problem.dofs.clone())?;
    for (l, material) in problem.materials.iter().enumerate() {
        let s = compute_element_stress(&problem.mesh, l, 0, material, &u);
        println!("layer {} first element stress diagonal: [{:.3e}, {:.3e}, {:.3e}]", l + 1, s[0][0], s[1][1], s[2][2]);
    }
    Ok(())
}
