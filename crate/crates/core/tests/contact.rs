mod common;

use common::{benchmark_mesh, release_dirichlet};
use layered_contact::assembly::DofMap;
use layered_contact::contact::{
    assemble_coupling, jump_values, project_feasible, ContactSpaceKind, CouplingOperators, FrictionField,
    FrictionFunctional, MultiplierVector,
};
use layered_contact::mesh::{all_pairings, ContactPairing, TetMesh};
use layered_contact::ContactError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SPACES: [ContactSpaceKind; 2] = [ContactSpaceKind::ElementwiseConstant, ContactSpaceKind::NodalLinear];

struct Fixture {
    mesh: TetMesh,
    dofs: DofMap,
    pairings: Vec<ContactPairing>,
}

impl Fixture {
    fn new(mesh: TetMesh) -> Self {
        let dofs = DofMap::new(&mesh);
        let pairings = all_pairings(&mesh).unwrap();
        Self { mesh, dofs, pairings }
    }

    fn free() -> Self {
        Self::new(release_dirichlet(benchmark_mesh(0.8)))
    }

    fn clamped() -> Self {
        Self::new(benchmark_mesh(0.8))
    }

    /// Field equal to `per_layer[l]` on every node of layer `l`.
    fn rigid(&self, per_layer: &[[f64; 3]]) -> Vec<f64> {
        let nodal: Vec<Vec<[f64; 3]>> =
            self.mesh.layers.iter().zip(per_layer).map(|(l, v)| vec![*v; l.nodes.len()]).collect();
        self.dofs.restrict(&nodal)
    }

    fn random_field(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dofs.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn coupling(&self, kind: ContactSpaceKind) -> CouplingOperators {
        assemble_coupling(&self.dofs, &self.pairings, kind).unwrap()
    }
}

#[test]
fn point_counts_follow_the_space() {
    let fx = Fixture::clamped();
    let p0 = fx.coupling(ContactSpaceKind::ElementwiseConstant);
    let p1 = fx.coupling(ContactSpaceKind::NodalLinear);
    let tris: usize = fx.pairings.iter().map(|p| p.triangles.len()).sum();
    let nodes: usize = fx.pairings.iter().map(|p| p.pairs.len()).sum();
    assert_eq!(p0.point_count(), tris);
    assert_eq!(p1.point_count(), nodes);
    assert_eq!(p1.normal.nrows, nodes);
    assert_eq!(p1.tangential.nrows, 2 * nodes);
    assert_eq!(p1.normal.ncols, fx.dofs.dof_count());
}

#[test]
fn equal_fields_have_no_jump() {
    let fx = Fixture::free();
    let u = fx.rigid(&[[0.3, -0.2, 0.9]; 3]);
    for kind in SPACES {
        let g = fx.coupling(kind);
        assert!(g.normal.apply(&u).iter().all(|v| v.abs() < 1e-14));
        assert!(g.tangential.apply(&u).iter().all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn lifting_the_upper_layer_opens_the_gap() {
    let fx = Fixture::free();
    let u = fx.rigid(&[[0.0, 0.0, 1.0], [0.0; 3], [0.0; 3]]);
    let g = fx.coupling(ContactSpaceKind::ElementwiseConstant);
    let moments = g.normal.apply(&u);
    let first = g.interface_points[0].clone();
    for p in first.clone() {
        let area = fx.pairings[0].triangles[g.points[p].entity].area;
        assert!((moments[p] + area).abs() <= 1e-14);
    }
    assert!(moments[first.end..].iter().all(|&v| v == 0.0));
}

#[test]
fn sliding_the_upper_layer_gives_mass_row_sums() {
    let fx = Fixture::free();
    let u = fx.rigid(&[[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]]);
    let g = fx.coupling(ContactSpaceKind::NodalLinear);
    let moments = g.tangential.apply(&u);
    for p in g.interface_points[0].clone() {
        let row_sum: f64 = g.contact_mass.row(p).map(|(_, v)| v).sum();
        assert!((moments[2 * p] - row_sum).abs() <= 1e-14);
        assert!((moments[2 * p] - g.points[p].support).abs() <= 1e-14);
        assert_eq!(moments[2 * p + 1], 0.0);
    }
}

#[test]
fn rows_touch_only_adjacent_layers() {
    let fx = Fixture::clamped();
    for kind in SPACES {
        let g = fx.coupling(kind);
        for (k, range) in g.interface_points.iter().enumerate() {
            let allowed = fx.dofs.layer_dofs(k).start..fx.dofs.layer_dofs(k + 1).end;
            for p in range.clone() {
                assert!(g.normal.row(p).all(|(c, _)| allowed.contains(&c)));
                for r in [2 * p, 2 * p + 1] {
                    assert!(g.tangential.row(r).all(|(c, _)| allowed.contains(&c)));
                }
            }
        }
    }
}

/// `∫ ψ_p [v_N]` integrated triangle by triangle from the nodal jumps.
fn quadrature_moments(fx: &Fixture, g: &CouplingOperators, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.point_count()];
    for (k, pairing) in fx.pairings.iter().enumerate() {
        let jumps = jump_values(&fx.dofs, u, pairing);
        let base = g.interface_points[k].start;
        for (t, tri) in pairing.triangles.iter().enumerate() {
            let j = tri.vertices.map(|v| jumps[v].normal);
            match g.kind {
                ContactSpaceKind::ElementwiseConstant => out[base + t] += tri.area * (j[0] + j[1] + j[2]) / 3.0,
                ContactSpaceKind::NodalLinear => {
                    for a in 0..3 {
                        let integral: f64 = (0..3).map(|b| tri.area / 12.0 * if a == b { 2.0 } else { 1.0 } * j[b]).sum();
                        out[base + tri.vertices[a]] += integral;
                    }
                }
            }
        }
    }
    out
}

#[test]
fn normal_moments_match_direct_quadrature() {
    let fx = Fixture::clamped();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for kind in SPACES {
        let g = fx.coupling(kind);
        for _ in 0..5 {
            let u = fx.random_field(&mut rng);
            let mu: Vec<f64> = (0..g.point_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let assembled: f64 = common::dot(&mu, &g.normal.apply(&u));
            let direct: f64 = common::dot(&mu, &quadrature_moments(&fx, &g, &u));
            assert!((assembled - direct).abs() <= 1e-12 * direct.abs().max(1.0), "{assembled} vs {direct}");
        }
    }
}

#[test]
fn empty_pairing_is_rejected() {
    let fx = Fixture::clamped();
    let mut pairings = fx.pairings.clone();
    pairings[1].pairs.clear();
    let err = assemble_coupling(&fx.dofs, &pairings, ContactSpaceKind::NodalLinear).unwrap_err();
    assert!(matches!(err, ContactError::ContactMismatch { interface: 1, .. }));
}

#[test]
fn jump_examples() {
    let fx = Fixture::free();
    let zero = vec![0.0; fx.dofs.dof_count()];
    assert!(jump_values(&fx.dofs, &zero, &fx.pairings[0]).iter().all(|j| j.normal == 0.0 && j.tangential == [0.0; 2]));

    let lowered = fx.rigid(&[[0.0, 0.0, -0.01], [0.0; 3], [0.0; 3]]);
    assert!(jump_values(&fx.dofs, &lowered, &fx.pairings[0]).iter().all(|j| (j.normal - 0.01).abs() < 1e-16));

    let slid = fx.rigid(&[[0.5, 0.0, 0.0], [0.0; 3], [0.0; 3]]);
    assert!(jump_values(&fx.dofs, &slid, &fx.pairings[0]).iter().all(|j| j.tangential == [0.5, 0.0] && j.normal == 0.0));
    assert!(jump_values(&fx.dofs, &slid, &fx.pairings[1]).iter().all(|j| j.tangential == [0.0, 0.0]));
}

#[test]
fn unit_slip_friction_work() {
    let fx = Fixture::free();
    let u = fx.rigid(&[[0.6, 0.8, 0.0], [0.0; 3], [0.0; 3]]);
    for kind in SPACES {
        let g = fx.coupling(kind);
        let friction = FrictionField::per_interface(&g, &[0.2, 0.05]).unwrap();
        let j = FrictionFunctional { dofs: &fx.dofs, pairings: &fx.pairings, coupling: &g, friction: &friction };
        assert!((j.evaluate(&u).unwrap() - 6.4).abs() <= 1e-12);
        let tied = fx.rigid(&[[0.2, 0.1, 0.3]; 3]);
        assert_eq!(j.evaluate(&tied).unwrap(), 0.0);
    }
}

#[test]
fn friction_work_is_positively_homogeneous() {
    let fx = Fixture::clamped();
    let g = fx.coupling(ContactSpaceKind::NodalLinear);
    let friction = FrictionField::per_interface(&g, &[0.2, 0.05]).unwrap();
    let j = FrictionFunctional { dofs: &fx.dofs, pairings: &fx.pairings, coupling: &g, friction: &friction };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let u = fx.random_field(&mut rng);
        let doubled: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let (a, b) = (j.evaluate(&u).unwrap(), j.evaluate(&doubled).unwrap());
        assert!((b - 2.0 * a).abs() <= 1e-12 * b.max(1.0));
    }
}

#[test]
fn negative_friction_is_rejected() {
    let fx = Fixture::clamped();
    let g = fx.coupling(ContactSpaceKind::ElementwiseConstant);
    assert!(FrictionField::per_interface(&g, &[0.2, -0.1]).is_err());
    assert!(FrictionField::per_interface(&g, &[0.2]).is_err());
}

fn single_point() -> CouplingOperators {
    let fx = Fixture::clamped();
    let mut g = fx.coupling(ContactSpaceKind::NodalLinear);
    g.points.truncate(1);
    g.interface_points = vec![0..1];
    g
}

#[test]
fn projection_examples() {
    let g = single_point();
    let friction = FrictionField { bounds: vec![1.0] };
    let clamped = project_feasible(&MultiplierVector::from_flat(&g, &[-1.0, 0.1, 0.2]).unwrap(), &friction);
    assert_eq!(clamped.normal, vec![0.0]);
    assert_eq!(clamped.tangential, vec![[0.1, 0.2]]);
    let ball = project_feasible(&MultiplierVector::from_flat(&g, &[2.0, 3.0, 4.0]).unwrap(), &friction);
    assert_eq!(ball.normal, vec![2.0]);
    assert!((ball.tangential[0][0] - 0.6).abs() < 1e-15 && (ball.tangential[0][1] - 0.8).abs() < 1e-15);
}

fn multipliers(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-5.0f64..5.0, 3 * n),
        prop::collection::vec(-5.0f64..5.0, 3 * n),
        prop::collection::vec(0.0f64..2.0, n),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn projection_is_idempotent_and_nonexpansive((a, b, bounds) in multipliers(4)) {
        let mut g = single_point();
        let template = g.points[0];
        g.points = vec![template; 4];
        g.interface_points = vec![0..4];
        let friction = FrictionField { bounds };
        let pa = project_feasible(&MultiplierVector::from_flat(&g, &a).unwrap(), &friction);
        let pb = project_feasible(&MultiplierVector::from_flat(&g, &b).unwrap(), &friction);
        prop_assert!(pa.is_feasible(&friction));
        prop_assert_eq!(&project_feasible(&pa, &friction), &pa);
        let diff = |x: &[f64], y: &[f64]| common::norm(&x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>());
        prop_assert!(diff(&pa.to_flat(), &pb.to_flat()) <= diff(&a, &b) + 1e-12);
    }
}

#[test]
fn nodal_feasibility_holds_inside_triangles() {
    let fx = Fixture::clamped();
    let g = fx.coupling(ContactSpaceKind::NodalLinear);
    let friction = FrictionField::per_interface(&g, &[0.2, 0.05]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let flat: Vec<f64> = (0..3 * g.point_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mu = project_feasible(&MultiplierVector::from_flat(&g, &flat).unwrap(), &friction);
        for (k, pairing) in fx.pairings.iter().enumerate() {
            let base = g.interface_points[k].start;
            for tri in &pairing.triangles {
                for _ in 0..16 {
                    let (r, s): (f64, f64) = (rng.gen(), rng.gen());
                    let (r, s) = if r + s > 1.0 { (1.0 - r, 1.0 - s) } else { (r, s) };
                    let w = [1.0 - r - s, r, s];
                    let mut t = [0.0; 2];
                    for a in 0..3 {
                        let v = mu.tangential[base + tri.vertices[a]];
                        t[0] += w[a] * v[0];
                        t[1] += w[a] * v[1];
                    }
                    assert!(t[0].hypot(t[1]) <= friction.bounds[base] * (1.0 + 1e-12));
                }
            }
        }
    }
}
