//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to the
//! process stdout (bypassing the harness capture) before asserting.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specgeom_core::eigen::EigenOptions;
use specgeom_core::experiments::bubbling::{bubbling_family, conformal_bubble_family};
use specgeom_core::experiments::concentration::DEFAULT_EPS;
use specgeom_core::experiments::geometry::{symmetric_hessian_value, DensitySetup, CANONICAL_RADII};
use specgeom_core::experiments::hersch::{default_amplitudes, density_measure, hersch_regression_family, spectrum};
use specgeom_core::experiments::*;
use specgeom_core::fem::{assemble_stiffness, dirichlet_energy};
use specgeom_core::geom::{self, Vec3};
use specgeom_core::harmonic::AnalyticSurface;
use specgeom_core::maps::{equilateral_s5_map, identity_map, torus_eigenmap, SphereValuedMap};
use specgeom_core::measure::MeasureOnMesh;
use specgeom_core::mesh::{build_flat_torus, build_icosphere, LatticeSpec, SurfaceMesh};
use specgeom_core::moebius::{cap_reflection_map, compose_moebius, hersch_balance, SphericalCap};
use specgeom_core::sparse::SparseOperator;
use specgeom_core::sobolev::{wasserstein2_exact_small, SignedMeasureFunctional, SobolevContext};

fn report_line(id: &str, pass: bool, detail: impl AsRef<str>) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance {id:<12} {} {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    let _ = out.flush();
}

fn failing(r: &StabilityReport) -> String {
    let rows = r.rows.iter().filter(|x| !x.pass && !x.informational).map(|x| x.param.clone());
    let checks = r.checks.iter().filter(|c| !c.pass && !c.informational).map(|c| c.name.clone());
    rows.chain(checks).collect::<Vec<_>>().join("; ")
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn two_e(k: &SparseOperator, u: &SphereValuedMap) -> f64 {
    2.0 * dirichlet_energy(k, &u.components).unwrap()
}

fn opts() -> EigenOptions {
    EigenOptions::default()
}

#[test]
fn criterion_01_round_sphere_maximum() {
    let t = Instant::now();
    let mesh = build_icosphere(6).unwrap();
    let lb = spectrum(&mesh, &MeasureOnMesh::uniform(&mesh), 3, &opts()).unwrap().normalized_eigenvalue(1).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let ratio = lb / (8.0 * PI);
    let pass = (0.99..=1.005).contains(&ratio) && secs < 60.0;
    report_line("01", pass, format!("λ̄₁/8π = {ratio:.6} in {secs:.1}s"));
    assert!(pass);
}

#[test]
fn criterion_02_torus_constants() {
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, lattice, expect, k) in [
        ("square", LatticeSpec::square(), 4.0 * PI * PI, 4),
        ("equilateral", LatticeSpec::equilateral(), 8.0 * PI * PI / 3f64.sqrt(), 6),
    ] {
        let mesh = build_flat_torus(lattice, 96).unwrap();
        let lb = spectrum(&mesh, &MeasureOnMesh::uniform(&mesh), k, &opts()).unwrap().normalized_eigenvalue(1).unwrap();
        pass &= rel(lb, expect) <= 0.01;
        detail.push(format!("{name}: {:.3e}", rel(lb, expect)));
    }
    report_line("02", pass, detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_03_energy_identities() {
    let mut worst: Vec<(String, f64, f64)> = Vec::new();
    let sphere = build_icosphere(5).unwrap();
    let ks = assemble_stiffness(&sphere).unwrap();
    worst.push(("identity".into(), rel(two_e(&ks, &identity_map(&sphere).unwrap()), 8.0 * PI), 0.01));
    let sq = build_flat_torus(LatticeSpec::square(), 96).unwrap();
    let e = two_e(&assemble_stiffness(&sq).unwrap(), &torus_eigenmap(0.0, 1.0, &sq).unwrap());
    worst.push(("Φ_{0,1}".into(), rel(e, 4.0 * PI * PI), 0.01));
    let eq = build_flat_torus(LatticeSpec::equilateral(), 96).unwrap();
    let e = two_e(&assemble_stiffness(&eq).unwrap(), &equilateral_s5_map(&eq).unwrap());
    worst.push(("S⁵ map".into(), rel(e, 8.0 * PI * PI / 3f64.sqrt()), 0.01));
    for r in [PI / 6.0, PI / 3.0, PI / 2.0] {
        let cap = SphericalCap::new([0.0, 0.0, 1.0], r).unwrap();
        let e = two_e(&ks, &cap_reflection_map(&cap, &sphere).unwrap());
        worst.push((format!("R_Z r={r:.3}"), rel(e, 16.0 * PI - 4.0 * cap.area()), 0.02));
    }
    let pass = worst.iter().all(|(_, err, tol)| err <= tol);
    let detail: Vec<String> = worst.iter().map(|(n, e, _)| format!("{n}: {e:.2e}")).collect();
    report_line("03", pass, detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_04_hersch_stability() {
    let mesh = build_icosphere(5).unwrap();
    let coarse = build_icosphere(4).unwrap();
    let mut bad = Vec::new();
    let family = hersch_regression_family();
    assert_eq!(family.len(), 10);
    for (label, f) in family {
        let (r, _) = hersch_stability_audit(label, &mesh, &density_measure(&mesh, f), Some((&coarse, &density_measure(&coarse, f))), &opts()).unwrap();
        if !r.passed() {
            bad.push(format!("{label}: {}", failing(&r)));
        }
    }
    let (_, p) = hersch_stability_audit("uniform", &mesh, &MeasureOnMesh::uniform(&mesh), None, &opts()).unwrap();
    let uniform_ok = p.lhs().abs() < 1e-3 && p.rhs().abs() < 1e-3;
    let pass = bad.is_empty() && uniform_ok;
    report_line("04", pass, format!("10 densities, {} failing; uniform lhs {:.1e} rhs {:.1e} {}", bad.len(), p.lhs(), p.rhs(), bad.join(" | ")));
    assert!(pass);
}

#[test]
fn criterion_05_exponent_sharpness() {
    let mesh = build_icosphere(5).unwrap().unit_area_sphere().unwrap();
    let coarse = build_icosphere(4).unwrap().unit_area_sphere().unwrap();
    let amps = default_amplitudes();
    assert!((amps[amps.len() - 1] / amps[0] - 10.0).abs() < 1e-9);
    let r = sharpness_sweep(&mesh, Some(&coarse), SharpnessKind::Prop72Restricted, &amps, &opts()).unwrap();
    let slope = r.provenance["slope"];
    let pass = (1.8..=2.2).contains(&slope) && r.passed();
    report_line("05", pass, format!("log-log slope {slope:.4} {}", failing(&r)));
    assert!(pass);
}

#[test]
fn criterion_06_robin_asymptotics() {
    let t = Instant::now();
    let r = robin_asymptotics(&[1e-3, 1e-4], None).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let ratio_err = r.rows.iter().find(|x| x.param.starts_with("eps=1e-4")).map(|x| x.rhs).unwrap();
    let cap_mesh = build_icosphere(6).unwrap();
    let cap = robin_asymptotics(&[1e-4], Some((&cap_mesh, 0.05))).unwrap();
    let pass = r.passed() && cap.passed() && ratio_err <= 0.1 && secs < 5.0;
    report_line("06", pass, format!("|ratio − 1| at ε=1e−4: {ratio_err:.4}, 1-D part {secs:.2}s {}", failing(&r)));
    assert!(pass);
}

/// ‖μ_ε^M − dv‖_{W^{-1,2}} on the unit-area sphere from the zonal Legendre
/// series of the two-cap indicator: only even degrees survive, and
/// ∫_{t₀}^1 P_l = (P_{l−1}(t₀) − P_{l+1}(t₀))/(2l + 1).
fn concentration_series(eps: f64, m: f64) -> f64 {
    let r2 = 1.0 / (4.0 * PI);
    let t0 = (eps / r2.sqrt()).cos();
    let s = 1.0 / (eps * eps * (1.0 / eps).ln());
    let nu_total = 2.0 * 2.0 * PI * r2 * (1.0 - t0) * s;
    let lmax = 6000;
    let mut p = vec![1.0, t0];
    for l in 1..=lmax {
        let next = ((2 * l + 1) as f64 * t0 * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
        p.push(next);
    }
    let mut total = 0.0;
    for l in (2..lmax).step_by(2) {
        let lf = l as f64;
        let integral = (p[l - 1] - p[l + 1]) / (2.0 * lf + 1.0);
        let c = s * 2.0 * PI * r2 * integral * 2.0 * ((2.0 * lf + 1.0) / (4.0 * PI * r2)).sqrt();
        total += c * c / (lf * (lf + 1.0) / r2 + 1.0);
    }
    m * total.sqrt() / (1.0 + m * nu_total)
}

#[test]
fn criterion_07_concentration_dichotomy() {
    let mesh = build_icosphere(6).unwrap().unit_area_sphere().unwrap();
    let r = concentration_experiment(&mesh, &DEFAULT_EPS, &[0.01], &[100.0], &opts()).unwrap();
    let mut worst: f64 = 0.0;
    for m in [0.01, 100.0] {
        for e in DEFAULT_EPS {
            let discrete = r.provenance[&format!("w_minus12[M={m},eps={e}]")];
            worst = worst.max(rel(discrete, concentration_series(e, m)));
        }
    }
    let smallest = DEFAULT_EPS[DEFAULT_EPS.len() - 1];
    let lb = r.provenance[&format!("lambda_bar[M=0.01,eps={smallest}]")];
    let pass = r.passed() && worst <= 0.03;
    report_line(
        "07",
        pass,
        format!("λ̄₁/8π = {:.4} at ε={smallest}; fitted C = {:.1}; discrete vs series W⁻¹² ≤ {worst:.2e} {}", lb / (8.0 * PI), r.provenance["fitted_C[M=100]"], failing(&r)),
    );
    assert!(pass);
}

#[test]
fn criterion_08_canonical_family() {
    let mut detail = Vec::new();
    let mut pass = true;
    for sm in [ShippedMap::Clifford, ShippedMap::EquilateralS3, ShippedMap::EquilateralS5] {
        let (mesh, u) = sm.build(48).unwrap();
        let two_e = 2.0 * dirichlet_energy(&assemble_stiffness(&mesh).unwrap(), &u.components).unwrap();
        let expect = if sm == ShippedMap::Clifford { -4.0 * PI * PI } else { symmetric_hessian_value(two_e, u.ambient_dim()) };
        let r = canonical_audit(sm.name(), &mesh, &u, &CANONICAL_RADII, Some(expect)).unwrap();
        pass &= r.passed();
        detail.push(format!("{}: {}", sm.name(), if r.passed() { "ok".to_string() } else { failing(&r) }));
    }
    report_line("08", pass, detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_09_jacobi_and_conservation() {
    let j = jacobi_audit(96).unwrap();
    let c = conservation_audit(&ShippedMap::ALL, 3.0, 1e-10).unwrap();
    let pass = j.passed() && c.passed();
    report_line("09", pass, format!("Jacobi field form norm {:.2e}; {} {}", j.provenance["form_norm"], failing(&j), failing(&c)));
    assert!(pass);
}

#[test]
fn criterion_10_density_limit() {
    let mesh = build_flat_torus(LatticeSpec::square(), 256).unwrap();
    let f = torus_eigenmap(0.0, 1.0, &mesh).unwrap();
    let r = density_audit(&DensitySetup::new(AnalyticSurface::clifford(), &mesh, &f)).unwrap();
    let pass = r.passed() && r.rows.iter().all(|x| x.pass);
    report_line("10", pass, format!("limit/4π = {:.5} {}", r.provenance["extrapolated"] / (4.0 * PI), failing(&r)));
    assert!(pass);
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if geom::norm(v) > 0.1 {
            return geom::normalize(v);
        }
    }
}

fn random_density(mesh: &SurfaceMesh, rng: &mut ChaCha8Rng, amp: f64) -> MeasureOnMesh {
    let terms: Vec<(f64, Vec3)> = (0..3).map(|_| (rng.gen_range(-amp..amp), random_direction(rng))).collect();
    let r = mesh.radius();
    density_measure(mesh, move |x| terms.iter().map(|(a, c)| a * geom::dot(x, *c) / r).sum::<f64>().exp())
}

#[test]
fn criterion_11_property_suites() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = [0usize; 4];
    let s3 = build_icosphere(3).unwrap();
    for _ in 0..10 {
        let mu = random_density(&s3, &mut rng, 1.5);
        let c = 10f64.powf(rng.gen_range(-2.0..2.0));
        let a = spectrum(&s3, &mu, 1, &opts()).unwrap().normalized_eigenvalue(1).unwrap();
        let b = spectrum(&s3, &mu.scaled(c), 1, &opts()).unwrap().normalized_eigenvalue(1).unwrap();
        violations[0] += ((a - b).abs() > 1e-10 * a) as usize;
    }
    let s2 = build_icosphere(2).unwrap().unit_area_sphere().unwrap();
    let ctx = SobolevContext::new(&s2).unwrap();
    for _ in 0..50 {
        let f = |rng: &mut ChaCha8Rng| SignedMeasureFunctional::new((0..s2.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let (a, b) = (f(&mut rng), f(&mut rng));
        let s = rng.gen_range(-10.0..10.0);
        let (na, nb) = (ctx.w_minus12_norm(&a).unwrap(), ctx.w_minus12_norm(&b).unwrap());
        let homogeneous = (ctx.w_minus12_norm(&a.scaled(s)).unwrap() - s.abs() * na).abs() <= 1e-8 * (1.0 + s.abs() * na);
        let triangle = ctx.w_minus12_norm(&a.plus(&b)).unwrap() <= na + nb + 1e-8;
        violations[1] += (!(homogeneous && triangle && na > 0.0)) as usize;
    }
    for _ in 0..50 {
        let mu = random_density(&s2, &mut rng, 2.0).normalized_unit_mass(&s2).unwrap();
        let nu = random_density(&s2, &mut rng, 2.0).normalized_unit_mass(&s2).unwrap();
        let d = ctx.w_minus12_norm(&SignedMeasureFunctional::difference(&s2, &mu, &nu).unwrap()).unwrap();
        let w2 = wasserstein2_exact_small(&s2.vertices, &mu.hat_pairings(&s2), &s2.vertices, &nu.hat_pairings(&s2), s2.radius()).unwrap();
        violations[2] += (2.0 * d < w2) as usize;
    }
    let id = identity_map(&s3).unwrap();
    for _ in 0..20 {
        let mu = random_density(&s3, &mut rng, 1.2);
        let b = hersch_balance(&s3, &mu).unwrap();
        let u = compose_moebius(&b.param(), &id).unwrap();
        violations[3] += (!lemma21_audit(&s3, &u, &mu, 1, &opts()).unwrap().passed()) as usize;
    }
    let pass = violations.iter().all(|v| *v == 0);
    report_line("11", pass, format!("violations: scale {}, norm axioms {}, Wasserstein {}, balanced-pair inequality {}", violations[0], violations[1], violations[2], violations[3]));
    assert!(pass);
}

#[test]
fn criterion_12_determinism() {
    specgeom_core::set_threads(Some(1));
    let mesh = build_icosphere(4).unwrap();
    let (_, f) = hersch_regression_family().into_iter().nth(3).unwrap();
    let run = || {
        let (r, _) = hersch_stability_audit("det", &mesh, &density_measure(&mesh, f), None, &opts()).unwrap();
        let s = sharpness_sweep(&mesh.unit_area_sphere().unwrap(), None, SharpnessKind::Prop72Restricted, &default_amplitudes(), &opts()).unwrap();
        (r.to_json().unwrap(), r.to_csv(), s.to_json().unwrap())
    };
    let (a, b) = (run(), run());
    let pass = a == b;
    report_line("12", pass, format!("{} bytes of report output compared", a.0.len() + a.1.len() + a.2.len()));
    specgeom_core::set_threads(None);
    assert!(pass);
}

#[test]
fn bubbling_weak_direction() {
    let mesh = build_icosphere(4).unwrap();
    let family = conformal_bubble_family(&mesh, [0.0, 0.0, 1.0], &[0.3, 0.5, 0.7, 0.8]);
    let r = lambda2_bubbling_audit(&mesh, &family, &opts()).unwrap();
    let balanced = r.checks.iter().all(|c| !c.name.ends_with("UNBALANCED"));
    let pass = r.passed() && balanced;
    report_line("bubbling", pass, format!("fitted C₁ = {:.4}, all members balanced: {balanced} {}", r.provenance["fitted_C1"], failing(&r)));
    assert!(pass);
}

#[test]
fn bubbling_atom_family_is_reported() {
    let mesh = build_icosphere(3).unwrap();
    let family = bubbling_family(&mesh, 0, &[0.2, 0.4]);
    let r = lambda2_bubbling_audit(&mesh, &family, &opts()).unwrap();
    let unbalanced = r.checks.iter().filter(|c| c.name.ends_with("UNBALANCED")).count();
    // an unbalanced outcome is reported, not failed
    report_line("bubbling-atoms", r.is_finite(), format!("{unbalanced} of {} members UNBALANCED (informational)", family.len()));
    assert!(r.passed() && r.is_finite());
}
