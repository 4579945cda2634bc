use std::sync::OnceLock;

use proptest::prelude::*;
use specgeom_core::eigen::EigenOptions;
use specgeom_core::experiments::hersch::{density_measure, lemma21_audit, spectrum};
use specgeom_core::geom::{self, Vec3};
use specgeom_core::maps::identity_map;
use specgeom_core::measure::MeasureOnMesh;
use specgeom_core::mesh::{build_icosphere, SurfaceMesh};
use specgeom_core::moebius::{compose_moebius, hersch_balance};
use specgeom_core::sobolev::{wasserstein2_exact_small, SignedMeasureFunctional, SobolevContext};

fn sphere3() -> &'static SurfaceMesh {
    static M: OnceLock<SurfaceMesh> = OnceLock::new();
    M.get_or_init(|| build_icosphere(3).unwrap())
}

fn unit_sphere2() -> &'static SurfaceMesh {
    static M: OnceLock<SurfaceMesh> = OnceLock::new();
    M.get_or_init(|| build_icosphere(2).unwrap().unit_area_sphere().unwrap())
}

/// Positive density exp(Σ aᵢ⟨x, cᵢ⟩) built from a few random directions.
fn bump_density(mesh: &SurfaceMesh, coeffs: &[(f64, Vec3)]) -> MeasureOnMesh {
    let r = mesh.radius();
    let coeffs: Vec<(f64, Vec3)> = coeffs.iter().map(|(a, c)| (*a, geom::normalize(*c))).collect();
    density_measure(mesh, move |x| {
        let x = geom::scale(x, 1.0 / r);
        coeffs.iter().map(|(a, c)| a * geom::dot(x, *c)).sum::<f64>().exp()
    })
}

fn direction() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(a, b, c)| a * a + b * b + c * c > 1e-2)
        .prop_map(|(a, b, c)| [a, b, c])
}

fn coeffs(n: usize, amp: f64) -> impl Strategy<Value = Vec<(f64, Vec3)>> {
    prop::collection::vec((-amp..amp, direction()), 1..=n)
}

fn functional() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, unit_sphere2().n_vertices())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn normalized_eigenvalue_is_scale_invariant(c in 0.01..100.0f64, cs in coeffs(3, 1.5)) {
        let mesh = sphere3();
        let mu = bump_density(mesh, &cs);
        let opts = EigenOptions::default();
        let a = spectrum(mesh, &mu, 2, &opts).unwrap();
        let b = spectrum(mesh, &mu.scaled(c), 2, &opts).unwrap();
        for k in 1..=2 {
            let (la, lb) = (a.normalized_eigenvalue(k).unwrap(), b.normalized_eigenvalue(k).unwrap());
            prop_assert!((la - lb).abs() <= 1e-10 * la, "k={k}: {la} vs {lb}");
        }
        let r = a.rescaled_measure(c);
        prop_assert!((r.normalized_eigenvalue(1).unwrap() - a.normalized_eigenvalue(1).unwrap()).abs() <= 1e-12 * r.eigenvalues[1] * r.mass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w_minus12_norm_axioms(a in functional(), b in functional(), s in -10.0..10.0f64) {
        let mesh = unit_sphere2();
        let ctx = SobolevContext::new(mesh).unwrap();
        let (ma, mb) = (SignedMeasureFunctional::new(a), SignedMeasureFunctional::new(b));
        let na = ctx.w_minus12_norm(&ma).unwrap();
        let nb = ctx.w_minus12_norm(&mb).unwrap();
        prop_assert!(na >= 0.0);
        prop_assert!(na > 0.0 || ma.m.iter().all(|x| *x == 0.0));
        let ns = ctx.w_minus12_norm(&ma.scaled(s)).unwrap();
        prop_assert!((ns - s.abs() * na).abs() <= 1e-8 * (1.0 + s.abs() * na));
        let nab = ctx.w_minus12_norm(&ma.plus(&mb)).unwrap();
        prop_assert!(nab <= na + nb + 1e-8);
        prop_assert!(ctx.duality_residual(&ma).unwrap() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn w_minus12_bounds_wasserstein(ca in coeffs(3, 2.0), cb in coeffs(3, 2.0)) {
        let mesh = unit_sphere2();
        let mu = bump_density(mesh, &ca).normalized_unit_mass(mesh).unwrap();
        let nu = bump_density(mesh, &cb).normalized_unit_mass(mesh).unwrap();
        let ctx = SobolevContext::new(mesh).unwrap();
        let dist = ctx.w_minus12_norm(&SignedMeasureFunctional::difference(mesh, &mu, &nu).unwrap()).unwrap();
        // each measure lumped onto the vertices with its hat-function masses
        let (wa, wb) = (mu.hat_pairings(mesh), nu.hat_pairings(mesh));
        let w2 = wasserstein2_exact_small(&mesh.vertices, &wa, &mesh.vertices, &wb, mesh.radius()).unwrap();
        prop_assert!(2.0 * dist >= w2, "2‖μ−ν‖ = {} < W₂ = {}", 2.0 * dist, w2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn lemma21_holds_for_balanced_pairs(cs in coeffs(4, 1.2)) {
        let mesh = sphere3();
        let mu = bump_density(mesh, &cs);
        let balance = hersch_balance(mesh, &mu).unwrap();
        prop_assert!(balance.residual <= 1e-10);
        let u = compose_moebius(&balance.param(), &identity_map(mesh).unwrap()).unwrap();
        let report = lemma21_audit(mesh, &u, &mu, 1, &EigenOptions::default()).unwrap();
        prop_assert!(report.passed(), "{}", report.summary());
    }
}

#[test]
fn wasserstein_of_identical_measures_vanishes() {
    let mesh = unit_sphere2();
    let w = MeasureOnMesh::uniform(mesh).normalized_unit_mass(mesh).unwrap().hat_pairings(mesh);
    let d = wasserstein2_exact_small(&mesh.vertices, &w, &mesh.vertices, &w, mesh.radius()).unwrap();
    assert!(d.abs() < 1e-12);
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    // with equal weights the optimal plan is a permutation (Birkhoff)
    #[test]
    fn transport_matches_brute_force_assignment(xs in prop::collection::vec(direction(), 6), ys in prop::collection::vec(direction(), 6)) {
        let w = vec![1.0 / 6.0; 6];
        let cost = |p: Vec3, q: Vec3| geom::angle(geom::normalize(p), geom::normalize(q)).powi(2);
        let brute = permutations(6)
            .into_iter()
            .map(|s| s.iter().enumerate().map(|(i, &j)| cost(xs[i], ys[j])).sum::<f64>() / 6.0)
            .fold(f64::INFINITY, f64::min);
        let w2 = wasserstein2_exact_small(&xs, &w, &ys, &w, 1.0).unwrap();
        prop_assert!((w2 * w2 - brute).abs() <= 1e-12, "{} vs {}", w2 * w2, brute);
    }
}
