//! Solves the benchmark with elementwise-constant and nodal-linear
//! multipliers and tabulates the per-layer displacement differences.

use layered_contact::harness::config::paper_benchmark;
use layered_contact::harness::experiments::compare_contact_spaces;
use layered_contact::harness::export::render_csv;

fn main() -> layered_contact::Result<()> {
    let mut cfg = paper_benchmark();
    cfg.mesh.h_list = vec![0.8, 0.4];
    let table = compare_contact_spaces(&cfg)?;
    print!("{}", render_csv(&table));
    for row in &table.rows {
        let rel: Vec<String> = row.relative.iter().map(|e| format!("{e:.3e}")).collect();
        println!("h = {}: relative differences [{}]", row.h, rel.join(", "));
    }
    Ok(())
}
