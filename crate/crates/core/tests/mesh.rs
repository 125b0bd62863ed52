use layered_contact::harness::config::{convergence_model, paper_benchmark};
use layered_contact::mesh::{
    all_pairings, build_layer_stack, extract_contact_pairing, validate_mesh, DirichletPolicy, FacetTag, LayerSpec,
    LayerStackSpec, MeshIssue, Rect,
};
use layered_contact::ContactError;
use proptest::prelude::*;

fn benchmark_stack() -> LayerStackSpec {
    paper_benchmark().stack_spec()
}

#[test]
fn benchmark_counts_at_h_04() {
    let mesh = build_layer_stack(&benchmark_stack(), 0.4).unwrap();
    assert_eq!(mesh.tet_count(), 8400);
    let per_layer: Vec<usize> = mesh.layers.iter().map(|l| l.nodes.len()).collect();
    assert_eq!(per_layer, vec![462, 693, 1155]);
    assert_eq!(mesh.node_count(), 2310);
    assert_eq!(benchmark_stack().counts(0.4).unwrap().hexes, 1400);
}

#[test]
fn reference_mesh_count_at_h_1_32() {
    let spec = convergence_model().stack_spec();
    let counts = spec.counts(1.0 / 32.0).unwrap();
    assert_eq!(counts.tets, 2_359_296);
    assert_eq!(3 * counts.nodes, 1_282_905);
}

#[test]
fn benchmark_interface_pairs_full_grid() {
    let mesh = build_layer_stack(&benchmark_stack(), 0.4).unwrap();
    let first = extract_contact_pairing(&mesh, 0).unwrap();
    assert_eq!(first.pairs.len(), 21 * 11);
    assert_eq!(first.triangles.len(), 2 * 20 * 10);
    assert!((first.z - 2.4).abs() < 1e-12);
    assert_eq!(first.upper_normal, [0.0, 0.0, -1.0]);
    assert_eq!(first.lower_normal, [0.0, 0.0, 1.0]);
    assert!((first.area() - 32.0).abs() < 1e-10);
    let second = extract_contact_pairing(&mesh, 1).unwrap();
    assert!((second.z - 1.6).abs() < 1e-12);
}

#[test]
fn pairing_is_lexicographic_and_coincident() {
    let mesh = build_layer_stack(&benchmark_stack(), 0.4).unwrap();
    let diameter = mesh.footprint.diameter();
    for p in all_pairings(&mesh).unwrap() {
        for w in p.pairs.windows(2) {
            let (a, b) = (w[0].xy, w[1].xy);
            assert!(a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]), "{a:?} before {b:?}");
        }
        let upper = &mesh.layers[p.upper_layer];
        let lower = &mesh.layers[p.lower_layer];
        for pair in &p.pairs {
            let (u, l) = (upper.nodes[pair.upper], lower.nodes[pair.lower]);
            for c in 0..3 {
                assert!((u[c] - l[c]).abs() <= 1e-12 * diameter);
            }
        }
        let mut seen_upper: Vec<usize> = p.pairs.iter().map(|q| q.upper).collect();
        seen_upper.sort_unstable();
        seen_upper.dedup();
        assert_eq!(seen_upper.len(), p.pairs.len());
    }
}

#[test]
fn single_layer_has_no_interface() {
    let mut spec = benchmark_stack();
    spec.layers.truncate(1);
    let mesh = build_layer_stack(&spec, 0.4).unwrap();
    assert!(matches!(extract_contact_pairing(&mesh, 0), Err(ContactError::NoSuchInterface { .. })));
}

#[test]
fn benchmark_mesh_validates_with_expected_tag_areas() {
    let mesh = build_layer_stack(&benchmark_stack(), 0.4).unwrap();
    let diag = validate_mesh(&mesh);
    assert!(diag.passed(), "{:?}", diag.issues);
    assert!(diag.min_volume > 0.0);
    let area = 32.0;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * b;
    assert!(close(diag.tag_areas[0].get(FacetTag::TractionTop), area));
    assert!(close(diag.tag_areas[0].get(FacetTag::ContactBottom), area));
    assert!(close(diag.tag_areas[1].get(FacetTag::ContactTop), area));
    assert!(close(diag.tag_areas[1].get(FacetTag::ContactBottom), area));
    assert!(close(diag.tag_areas[2].get(FacetTag::ContactTop), area));
    let sides = |t: f64| 2.0 * (8.0 + 4.0) * t;
    assert!(close(diag.tag_areas[0].get(FacetTag::Dirichlet), sides(0.4)));
    assert!(close(diag.tag_areas[2].get(FacetTag::Dirichlet), sides(1.6) + area));
}

#[test]
fn end_face_policy_frees_the_sides() {
    let mut spec = benchmark_stack();
    spec.dirichlet = DirichletPolicy::EndFaces;
    let mesh = build_layer_stack(&spec, 0.8).unwrap();
    let diag = validate_mesh(&mesh);
    assert!(diag.passed());
    assert!((diag.tag_areas[0].get(FacetTag::Dirichlet) - 32.0).abs() < 1e-10);
    assert!(diag.tag_areas[1].get(FacetTag::TractionFree) > 0.0);
    assert_eq!(diag.tag_areas[0].get(FacetTag::TractionTop), 0.0);
}

#[test]
fn inverted_tet_fails_validation() {
    let mut mesh = build_layer_stack(&benchmark_stack(), 0.8).unwrap();
    mesh.layers[1].tets[5].swap(0, 1);
    let diag = validate_mesh(&mesh);
    assert!(!diag.passed());
    assert!(diag.issues.iter().any(|i| matches!(i, MeshIssue::NonPositiveVolume { layer: 1, tet: 5, .. })));
}

#[test]
fn untagged_triangle_fails_validation() {
    let mut mesh = build_layer_stack(&benchmark_stack(), 0.8).unwrap();
    mesh.layers[0].boundary[3].tag = None;
    let diag = validate_mesh(&mesh);
    assert!(diag.issues.iter().any(|i| matches!(i, MeshIssue::UntaggedFacet { layer: 0, facet: 3 })));
}

#[test]
fn dropped_triangle_is_reported_uncovered() {
    let mut mesh = build_layer_stack(&benchmark_stack(), 0.8).unwrap();
    mesh.layers[2].boundary.pop();
    let diag = validate_mesh(&mesh);
    assert!(diag.issues.iter().any(|i| matches!(i, MeshIssue::UncoveredFacet { layer: 2, .. })));
}

#[test]
fn thickness_rounding_at_h_016() {
    let mesh = build_layer_stack(&benchmark_stack(), 0.16).unwrap();
    let nz: Vec<usize> = mesh.layers.iter().map(|l| l.grid.nz).collect();
    assert_eq!(nz, vec![3, 5, 10]);
    assert!((mesh.layers[0].spacing[2] - 0.4 / 3.0).abs() < 1e-15);
    assert!(validate_mesh(&mesh).passed());
}

#[test]
fn building_is_deterministic() {
    let a = build_layer_stack(&benchmark_stack(), 0.4).unwrap();
    let b = build_layer_stack(&benchmark_stack(), 0.4).unwrap();
    assert_eq!(a, b);
}

fn arbitrary_stack() -> impl Strategy<Value = (LayerStackSpec, f64)> {
    (
        1usize..=4,
        1usize..=4,
        prop::collection::vec(1usize..=3, 1..=3),
        prop::sample::select(vec![0.25, 0.5, 1.0]),
        -2.0f64..2.0,
    )
        .prop_map(|(nx, ny, nzs, h, x0)| {
            let layers = nzs.iter().map(|&k| LayerSpec { thickness: k as f64 * h, material: 0 }).collect();
            let spec = LayerStackSpec {
                footprint: Rect::new(x0, x0 + nx as f64 * h, 0.0, ny as f64 * h),
                layers,
                z_top: 1.0,
                dirichlet: DirichletPolicy::SidesAndBottom,
            };
            (spec, h)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_meshes_are_valid_and_fully_paired((spec, h) in arbitrary_stack()) {
        let mesh = build_layer_stack(&spec, h).unwrap();
        let diag = validate_mesh(&mesh);
        prop_assert!(diag.passed(), "{:?}", diag.issues);
        let area = spec.footprint.area();
        prop_assert!((diag.tag_areas[0].get(FacetTag::TractionTop) - area).abs() <= 1e-10 * area);
        let pairings = all_pairings(&mesh).unwrap();
        prop_assert_eq!(pairings.len(), spec.layers.len() - 1);
        for p in &pairings {
            let g = mesh.layers[p.upper_layer].grid;
            prop_assert_eq!(p.pairs.len(), (g.nx + 1) * (g.ny + 1));
            prop_assert!((p.area() - area).abs() <= 1e-10 * area);
        }
    }
}
