//! Builds the three-layer benchmark stack and prints its size, interface
//! pairings and mesh diagnostics.
//!
//! ```text
//! cargo run --release --example build_mesh -- 0.4
//! ```

use layered_contact::harness::config::paper_benchmark;
use layered_contact::mesh::{all_pairings, build_layer_stack, validate_mesh, FacetTag};

fn main() -> layered_contact::Result<()> {
    let h: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.4);
    let spec = paper_benchmark().stack_spec();
    let mesh = build_layer_stack(&spec, h)?;
    println!("h = {h}: {} nodes, {} tetrahedra", mesh.node_count(), mesh.tet_count());
    for (l, layer) in mesh.layers.iter().enumerate() {
        let g = layer.grid;
        println!(
            "  layer {}: z in [{:.3}, {:.3}], grid {}x{}x{}, {} nodes",
            l + 1,
            layer.z_bottom,
            layer.z_top,
            g.nx,
            g.ny,
            g.nz,
            layer.nodes.len()
        );
    }
    for p in all_pairings(&mesh)? {
        let area: f64 = p.triangles.iter().map(|t| t.area).sum();
        println!("  interface {} at z = {:.3}: {} node pairs, {} triangles, area {area:.3}", p.interface + 1, p.z, p.pairs.len(), p.triangles.len());
    }
    let diag = validate_mesh(&mesh);
    println!("volumes in [{:.3e}, {:.3e}], {} issues", diag.min_volume, diag.max_volume, diag.issues.len());
    for (l, areas) in diag.tag_areas.iter().enumerate() {
        println!(
            "  layer {} tagged areas: dirichlet {:.2}, loaded {:.2}, contact {:.2} / {:.2}, free {:.2}",
            l + 1,
            areas.get(FacetTag::Dirichlet),
            areas.get(FacetTag::TractionTop),
            areas.get(FacetTag::ContactTop),
            areas.get(FacetTag::ContactBottom),
            areas.get(FacetTag::TractionFree)
        );
    }
    Ok(())
}
