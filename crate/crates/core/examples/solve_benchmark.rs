//! Solves the pavement benchmark with the monolithic dual method and prints
//! the solver report and contact-law residuals.
//!
//! ```text
//! cargo run --release --example solve_benchmark -- 0.4 p1
//! ```

use layered_contact::contact::ContactSpaceKind;
use layered_contact::harness::config::paper_benchmark;
use layered_contact::mfem::solve_mfem;
use layered_contact::problem::ContactProblem;

fn main() -> layered_contact::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.4);
    let kind = match args.next().as_deref() {
        Some("p0") => ContactSpaceKind::ElementwiseConstant,
        _ => ContactSpaceKind::NodalLinear,
    };
    let cfg = paper_benchmark();
    let problem = ContactProblem::new(&cfg.stack_spec(), h, &cfg.material_models()?, &cfg.load_spec(), &cfg.friction)?;
    let sol = solve_mfem(&problem, kind, &cfg.mfem)?;
    let r = &sol.report;
    println!("{} unknowns, {} multipliers ({})", problem.dof_count(), r.multipliers, kind.label());
    println!(
        "{:?} after {} iterations ({} restarts), residual {:.2e}, {:.2} s",
        r.status, r.iterations, r.restarts, r.projected_gradient, r.wall_time_s
    );
    if let Some(eq) = r.equilibrium {
        println!("equilibrium residual {eq:.2e}");
    }
    if let Some(k) = &r.kkt {
        println!(
            "penetration {:.2e}, complementarity {:.2e}, friction consistency {:.2e}, bound excess {:.2e}",
            k.penetration, k.complementarity, k.friction_consistency, k.bound_excess
        );
    }
    let lambda = &sol.multipliers;
    for (k, range) in lambda.interface_points.iter().enumerate() {
        let pressure = lambda.normal[range.clone()].iter().fold(0.0_f64, |m, v| m.max(*v));
        let at_bound = range
            .clone()
            .filter(|&p| {
                let t = lambda.tangential[p];
                t[0].hypot(t[1]) >= sol.friction.bounds[p] * (1.0 - 1e-6)
            })
            .count();
        println!("interface {}: peak normal multiplier {pressure:.3e}, {at_bound} of {} points at the friction bound", k + 1, range.len());
    }
    let uz = sol.displacement.values.iter().skip(2).step_by(3).fold(0.0_f64, |m, v| m.min(*v));
    println!("largest settlement {uz:.4e}");
    Ok(())
}
