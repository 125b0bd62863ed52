//! Runs the layer decomposition solver on the benchmark and compares it with
//! the monolithic solution.

use layered_contact::contact::ContactSpaceKind;
use layered_contact::harness::config::paper_benchmark;
use layered_contact::harness::experiments::{relative_energy_differences, slip_map};
use layered_contact::ldm::{bracket_theta, ldm_energy_trace, solve_ldm, LdmConfig};
use layered_contact::mfem::solve_mfem;
use layered_contact::problem::ContactProblem;

fn main() -> layered_contact::Result<()> {
    let cfg = paper_benchmark();
    let problem = ContactProblem::new(&cfg.stack_spec(), 0.8, &cfg.material_models()?, &cfg.load_spec(), &cfg.friction)?;

    let short = LdmConfig { max_outer: 300, ..cfg.ldm };
    let (trials, best) = bracket_theta(&problem, &short, &[0.2, 0.1, 0.05, 0.025])?;
    for t in &trials {
        println!("theta {:>6}: {:?} after {} sweeps, last change {:.2e}", t.theta, t.status, t.outer_iterations, t.final_epsilon);
    }
    let theta = trials[best].theta;

    let ldm = solve_ldm(&problem, &LdmConfig { theta, ..cfg.ldm })?;
    let eps = ldm_energy_trace(&ldm.report);
    println!(
        "theta {theta}: {:?} after {} sweeps and {} inner iterations, final change {:.2e}",
        ldm.report.status,
        ldm.report.outer_iterations,
        ldm.report.inner_iterations,
        eps.last().copied().unwrap_or(0.0)
    );

    let mfem = solve_mfem(&problem, ContactSpaceKind::NodalLinear, &cfg.mfem)?;
    let (total, layers) = relative_energy_differences(&problem, &mfem.displacement.values, &ldm.displacement.values)?;
    let per_layer: Vec<String> = layers.iter().map(|e| format!("{e:.3e}")).collect();
    println!("relative energy difference {total:.3e}, per layer [{}]", per_layer.join(", "));
    let map = slip_map(&problem, &mfem.displacement, &ldm.displacement);
    for k in 0..problem.mesh.interface_count() {
        println!("interface {}: stick/slip agreement {:.1}%", k + 1, 100.0 * map.overlap(k));
    }
    Ok(())
}
