//! Estimates the discrete inf-sup constant of both multiplier spaces on a
//! small clamped stack.

use layered_contact::assembly::{IsotropicMaterial, LoadSpec};
use layered_contact::contact::ContactSpaceKind;
use layered_contact::mesh::{DirichletPolicy, LayerSpec, LayerStackSpec, Rect};
use layered_contact::mfem::estimate_infsup;
use layered_contact::problem::ContactProblem;

fn main() -> layered_contact::Result<()> {
    let spec = LayerStackSpec {
        footprint: Rect::new(0.0, 2.0, 0.0, 1.0),
        layers: vec![LayerSpec { thickness: 1.0, material: 0 }, LayerSpec { thickness: 1.0, material: 1 }],
        z_top: 2.0,
        dirichlet: DirichletPolicy::EndFaces,
    };
    let materials = [IsotropicMaterial::new(2e3, 0.25)?, IsotropicMaterial::new(2e2, 0.4)?];
    let loads = LoadSpec { body_force: vec![[0.0, 0.0, -1.0]; 2], traction: None };
    for h in [0.5, 0.25] {
        let problem = ContactProblem::new(&spec, h, &materials, &loads, &[0.1])?;
        for kind in [ContactSpaceKind::ElementwiseConstant, ContactSpaceKind::NodalLinear] {
            let (coupling, _) = problem.coupling(kind)?;
            let est = estimate_infsup(problem.factor.clone(), &coupling.stacked(), &coupling.stacked_mass())?;
            println!(
                "h = {h}, {}: beta = {:.4e} (eigenvalues {:.3e} .. {:.3e}){}",
                kind.label(),
                est.value,
                est.lambda_min,
                est.lambda_max,
                if est.singular { ", singular" } else { "" }
            );
        }
    }
    Ok(())
}
