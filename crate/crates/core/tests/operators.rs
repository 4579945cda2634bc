use std::f64::consts::PI;

use specgeom_core::eigen::{solve_generalized, EigenOptions};
use specgeom_core::experiments::hersch::spectrum;
use specgeom_core::fem::{assemble_background_mass, assemble_mass, assemble_stiffness, dirichlet_energy};
use specgeom_core::geom;
use specgeom_core::harmonic::tension_residual;
use specgeom_core::maps::{identity_map, torus_eigenmap};
use specgeom_core::measure::{cap_indicator_measure, MeasureOnMesh};
use specgeom_core::mesh::{build_flat_torus, build_icosphere, mesh_from_spec, LatticeSpec, SurfaceMesh, Topology};
use specgeom_core::moebius::{apply_moebius, cap_reflection_map, hersch_balance, MoebiusParam, SphericalCap};
use specgeom_core::sobolev::{SignedMeasureFunctional, SobolevContext};
use specgeom_core::Error;

#[test]
fn meshes_have_expected_topology() {
    let s = build_icosphere(3).unwrap();
    assert_eq!(s.topology, Topology::Sphere);
    assert_eq!(s.euler_characteristic(), 2);
    s.validate().unwrap();
    let t = build_flat_torus(LatticeSpec::equilateral(), 12).unwrap();
    assert_eq!(t.euler_characteristic(), 0);
    assert_eq!(t.n_vertices(), 144);
    assert!((t.total_area() - 1.0).abs() < 1e-12);
    t.validate().unwrap();
}

#[test]
fn polyhedral_sphere_area_converges_quadratically() {
    // inscribed polyhedron: 4π − A_h = O(h²), so the gap drops ~4× per level
    let gaps: Vec<f64> = (2..6).map(|s| 4.0 * PI - build_icosphere(s).unwrap().total_area()).collect();
    for w in gaps.windows(2) {
        let r = w[0] / w[1];
        assert!((3.6..4.4).contains(&r), "ratio {r}");
    }
}

#[test]
fn mesh_file_round_trip() {
    let m = build_flat_torus(LatticeSpec { c: 0.3, d: 0.9 }, 8).unwrap();
    let path = std::env::temp_dir().join(format!("specgeom-mesh-{}.json", std::process::id()));
    m.save(&path).unwrap();
    let back = SurfaceMesh::load(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(back.triangles, m.triangles);
    assert!((back.total_area() - m.total_area()).abs() < 1e-14);
}

#[test]
fn bad_mesh_specs_are_input_errors() {
    let e = mesh_from_spec("icosphere:x").unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let e = mesh_from_spec("/nonexistent/mesh.json").unwrap_err();
    assert!(matches!(e, Error::Io { .. }));
    assert!(e.to_string().contains("/nonexistent/mesh.json"));
}

#[test]
fn stiffness_annihilates_constants_and_mass_integrates_area() {
    for mesh in [build_icosphere(3).unwrap(), build_flat_torus(LatticeSpec::square(), 10).unwrap()] {
        let k = assemble_stiffness(&mesh).unwrap();
        assert!(k.asymmetry() < 1e-14);
        assert!(k.row_sums().iter().all(|r| r.abs() < 1e-12));
        let m = assemble_background_mass(&mesh).unwrap();
        let one = vec![1.0; mesh.n_vertices()];
        assert!((m.quad_form(&one) - mesh.total_area()).abs() < 1e-12);
    }
}

#[test]
fn linear_functions_have_exact_energy_on_the_torus() {
    // f = cos(2πx) on the unit square torus: ∫|∇f|² = 2π² exactly; P1 approximates with O(h²)
    let mesh = build_flat_torus(LatticeSpec::square(), 64).unwrap();
    let k = assemble_stiffness(&mesh).unwrap();
    let f: Vec<f64> = mesh.vertices.iter().map(|v| (2.0 * PI * v[0]).cos()).collect();
    let e = dirichlet_energy(&k, &[f]).unwrap();
    assert!((2.0 * e - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 2e-3, "{}", 2.0 * e);
}

#[test]
fn sphere_spectrum_has_harmonic_multiplicities() {
    // λ_l = l(l+1) on the unit sphere with multiplicity 2l + 1
    let mesh = build_icosphere(4).unwrap();
    let r = spectrum(&mesh, &MeasureOnMesh::uniform(&mesh), 8, &EigenOptions::default()).unwrap();
    let clusters = r.multiplicities(1e-2);
    assert!(clusters[0].0.abs() < 1e-8 && clusters[0].1 == 1);
    assert_eq!(clusters[1].1, 3);
    assert_eq!(clusters[2].1, 5);
    assert!((clusters[1].0 - 2.0).abs() < 0.01 * 2.0, "{}", clusters[1].0);
    assert!((clusters[2].0 - 6.0).abs() < 0.02 * 6.0, "{}", clusters[2].0);
    assert!(r.residuals.iter().all(|x| *x < 1e-6));
}

#[test]
fn flat_torus_first_eigenvalues() {
    // square: 4π² with multiplicity 4; equilateral unit area: 8π²/√3 with multiplicity 6
    for (lattice, expect, mult) in [(LatticeSpec::square(), 4.0 * PI * PI, 4), (LatticeSpec::equilateral(), 8.0 * PI * PI / 3f64.sqrt(), 6)] {
        let mesh = build_flat_torus(lattice, 32).unwrap();
        let r = spectrum(&mesh, &MeasureOnMesh::uniform(&mesh), mult, &EigenOptions::default()).unwrap();
        let l1 = r.normalized_eigenvalue(1).unwrap();
        let lm = r.normalized_eigenvalue(mult).unwrap();
        assert!((l1 - expect).abs() < 0.02 * expect, "{l1} vs {expect}");
        assert!((lm - l1).abs() < 0.02 * expect, "cluster spread {l1}..{lm}");
    }
}

#[test]
fn atoms_cap_the_computable_spectrum() {
    let mesh = build_icosphere(1).unwrap();
    let mut mu = MeasureOnMesh::from_density(vec![0.0; mesh.n_vertices()]);
    for v in 0..3 {
        mu = mu.with_atom(v, 1.0);
    }
    let k = assemble_stiffness(&mesh).unwrap();
    let m = assemble_mass(&mesh, &mu).unwrap();
    let err = solve_generalized(&k, &m, 3, &EigenOptions::default()).unwrap_err();
    assert!(matches!(err, Error::RankDeficient { rank: 3, k: 3 }), "{err}");
}

#[test]
fn moebius_maps_compose_with_their_inverse() {
    let a = MoebiusParam::new(vec![0.3, -0.2, 0.5]).unwrap();
    for x in [[0.0, 0.0, 1.0], geom::normalize([1.0, 2.0, -0.5]), [0.0, -1.0, 0.0]] {
        let y = apply_moebius(&a, x).unwrap();
        assert!((geom::norm(y) - 1.0).abs() < 1e-14);
        let back = apply_moebius(&a.inverse(), y).unwrap();
        assert!(geom::norm(geom::sub(back, x)) < 1e-12);
    }
    assert!(MoebiusParam::new(vec![0.6, 0.8, 0.0]).is_err());
}

#[test]
fn balancing_recenters_a_lopsided_density() {
    let mesh = build_icosphere(3).unwrap();
    let mu = MeasureOnMesh::from_density(mesh.vertices.iter().map(|v| (2.0 * v[2]).exp()).collect());
    let b = hersch_balance(&mesh, &mu).unwrap();
    assert!(b.residual <= 1e-10);
    assert!(b.a[2] < -0.1, "balancing point should oppose the heavy pole: {:?}", b.a);
    let single = MeasureOnMesh::from_density(vec![0.0; mesh.n_vertices()]).with_atom(5, 1.0);
    assert!(matches!(hersch_balance(&mesh, &single), Err(Error::DegenerateMeasure(_))));
}

#[test]
fn cap_reflection_energy_identity() {
    // 2E(R_Z) = 16π − 4 Area(Z): the reflected cap is covered twice, its image once more
    let mesh = build_icosphere(5).unwrap();
    let k = assemble_stiffness(&mesh).unwrap();
    for r in [PI / 6.0, PI / 3.0, PI / 2.0] {
        let cap = SphericalCap::new([0.0, 0.0, 1.0], r).unwrap();
        let u = cap_reflection_map(&cap, &mesh).unwrap();
        let two_e = 2.0 * dirichlet_energy(&k, &u.components).unwrap();
        let expect = 16.0 * PI - 4.0 * 2.0 * PI * (1.0 - r.cos());
        assert!((two_e - expect).abs() < 0.02 * expect, "r={r}: {two_e} vs {expect}");
    }
}

#[test]
fn identity_and_torus_maps_are_discretely_harmonic() {
    let s = build_icosphere(4).unwrap();
    let rep = tension_residual(&s, &identity_map(&s).unwrap(), &MeasureOnMesh::uniform(&s), 2.0).unwrap();
    let t = build_flat_torus(LatticeSpec::square(), 48).unwrap();
    let f = torus_eigenmap(0.0, 1.0, &t).unwrap();
    let rep_t = tension_residual(&t, &f, &MeasureOnMesh::uniform(&t), 4.0 * PI * PI).unwrap();
    assert!(rep.w12_dual.is_finite() && rep_t.w12_dual.is_finite());
    let coarse = build_icosphere(3).unwrap();
    let rep_c = tension_residual(&coarse, &identity_map(&coarse).unwrap(), &MeasureOnMesh::uniform(&coarse), 2.0).unwrap();
    assert!(rep.w12_dual < rep_c.w12_dual, "{} !< {}", rep.w12_dual, rep_c.w12_dual);
}

#[test]
fn w_minus12_norm_of_a_constant_density() {
    // m = c·dv: the Riesz representative is the constant c, so ‖m‖² = c²·Area
    let mesh = build_icosphere(3).unwrap();
    let ctx = SobolevContext::new(&mesh).unwrap();
    let c = 0.37;
    let m = SignedMeasureFunctional::against_area(&mesh, &MeasureOnMesh::uniform(&mesh).scaled(1.0 + c)).unwrap();
    let n = ctx.w_minus12_norm(&m).unwrap();
    assert!((n - c * mesh.total_area().sqrt()).abs() < 1e-10, "{n}");
}

#[test]
fn cap_indicator_carries_the_smooth_cap_mass() {
    let mesh = build_icosphere(5).unwrap();
    for eps in [0.2, 0.4] {
        let mu = cap_indicator_measure(&mesh, eps).unwrap();
        let mass = mu.total_mass(&mesh).unwrap();
        // two polar caps of geodesic radius ε, weighted by 1/(ε² log(1/ε))
        let expect = 2.0 * 2.0 * PI * (1.0 - f64::cos(eps)) / (eps * eps * (1.0 / eps).ln());
        assert!((mass - expect).abs() < 1e-10 * expect, "{mass} vs {expect}");
    }
}
