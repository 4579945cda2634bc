//! Audits of the shipped harmonic maps: the canonical family G_a ∘ Φ, Jacobi
//! fields, conservation laws and the area-density limit of G_a ∘ F.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, dirichlet_energy};
use crate::geom::normn;
use crate::harmonic::{
    area_density, mean_curvature_sup, moebius_area_limit, relative_conservation_residual, AnalyticSurface, JacobiForm,
    AREA_LIMIT_TS, JACOBI_THRESHOLD,
};
use crate::maps::{equatorial_circle_map, equilateral_s5_map, identity_map, torus_eigenmap, SphereValuedMap};
use crate::mesh::{build_flat_torus, build_icosphere, LatticeSpec, SurfaceMesh};
use crate::moebius::{canonical_family_energy, hessian_h0, MoebiusParam};

use super::report::{Check, ReportRow, StabilityReport};

/// Minimal immersions and harmonic maps by first eigenfunctions that ship with
/// closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShippedMap {
    /// Identity of the round sphere.
    Identity,
    /// Φ_{0,1}: the Clifford torus in S³.
    Clifford,
    /// Φ_{1/2,√3/2}: the equilateral torus in S³.
    EquilateralS3,
    /// The equilateral torus in S⁵.
    EquilateralS5,
    /// Square torus onto the equator of S².
    EquatorialCircle,
}

impl ShippedMap {
    pub const ALL: [ShippedMap; 5] =
        [ShippedMap::Identity, ShippedMap::Clifford, ShippedMap::EquilateralS3, ShippedMap::EquilateralS5, ShippedMap::EquatorialCircle];

    pub fn name(&self) -> &'static str {
        match self {
            ShippedMap::Identity => "identity",
            ShippedMap::Clifford => "clifford",
            ShippedMap::EquilateralS3 => "equilateral_s3",
            ShippedMap::EquilateralS5 => "equilateral_s5",
            ShippedMap::EquatorialCircle => "equatorial_circle",
        }
    }

    /// Mesh sizes for three refinement levels: subdivisions for the sphere,
    /// cells per side for tori.
    pub fn default_levels(&self) -> [usize; 3] {
        match self {
            ShippedMap::Identity => [3, 4, 5],
            _ => [24, 48, 96],
        }
    }

    pub fn build(&self, level: usize) -> Result<(SurfaceMesh, SphereValuedMap)> {
        let eq = LatticeSpec::equilateral();
        let mesh = match self {
            ShippedMap::Identity => build_icosphere(level)?,
            ShippedMap::Clifford | ShippedMap::EquatorialCircle => build_flat_torus(LatticeSpec::square(), level)?,
            ShippedMap::EquilateralS3 | ShippedMap::EquilateralS5 => build_flat_torus(eq, level)?,
        };
        let map = match self {
            ShippedMap::Identity => identity_map(&mesh)?,
            ShippedMap::Clifford => torus_eigenmap(0.0, 1.0, &mesh)?,
            ShippedMap::EquilateralS3 => torus_eigenmap(eq.c, eq.d, &mesh)?,
            ShippedMap::EquilateralS5 => equilateral_s5_map(&mesh)?,
            ShippedMap::EquatorialCircle => equatorial_circle_map(&mesh)?,
        };
        Ok((mesh, map))
    }
}

impl FromStr for ShippedMap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ShippedMap::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown map '{s}' (expected one of identity, clifford, equilateral_s3, equilateral_s5, equatorial_circle)")))
    }
}

// ---------------------------------------------------------------------------
// Canonical family

pub const CANONICAL_RADII: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Coordinate axes plus two fixed oblique unit vectors in R^d.
pub fn probe_directions(d: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for k in 1..=2 {
        let v: Vec<f64> = (0..d).map(|j| ((j + 1) as f64 * 0.7 * k as f64).sin() + 0.3).collect();
        let n = normn(&v);
        out.push(v.iter().map(|x| x / n).collect());
    }
    out
}

/// H₀(v) = 4·2E·(3/(n+1) − 1) for maps with ∫F_iF_j = δ_ij·Area/(n+1) and
/// constant energy density, the closed form for the shipped tori.
pub fn symmetric_hessian_value(two_energy: f64, ambient_dim: usize) -> f64 {
    4.0 * two_energy * (3.0 / ambient_dim as f64 - 1.0)
}

/// E(G_{ra}∘u) strictly decreasing in r along each probe direction, H₀
/// negative with both forms agreeing within 2%, and optionally H₀ equal to
/// `expected_hessian` within 2% for every unit direction.
pub fn canonical_audit(
    label: &str,
    mesh: &SurfaceMesh,
    u: &SphereValuedMap,
    radii: &[f64],
    expected_hessian: Option<f64>,
) -> Result<StabilityReport> {
    let mut rep = StabilityReport::new("canonical");
    rep.param("map", label).param("vertices", mesh.n_vertices());
    let d = u.ambient_dim();
    let e0 = dirichlet_energy(&assemble_stiffness(mesh)?, &u.components)?;
    rep.record("energy", e0);
    for (k, v) in probe_directions(d).iter().enumerate() {
        let mut prev = e0;
        let mut prev_r = 0.0;
        for &r in radii {
            let a = MoebiusParam::new(v.iter().map(|x| r * x).collect())?;
            let e = canonical_family_energy(mesh, u, &a)?;
            rep.rows.push(ReportRow::new(format!("dir{k} |a|={prev_r}→{r}: E decreases"), prev, e, 0.0));
            // strictness on top of margin ≥ 0
            if !(e < prev) {
                rep.checks.push(Check::new(format!("dir{k} |a|={r}: strict decrease"), prev - e, 0.0, false));
            }
            prev = e;
            prev_r = r;
        }
        let h = hessian_h0(mesh, u, v)?;
        rep.record(&format!("hessian_moments[dir{k}]"), h.form_moments).record(&format!("hessian_normal[dir{k}]"), h.form_normal);
        rep.checks.push(Check::at_most(format!("dir{k}: H₀ < 0"), h.form_moments, 0.0).note(if h.not_harmonic { "map not harmonic" } else { "" }));
        rep.checks.push(Check::at_most(format!("dir{k}: relative gap between the two H₀ forms"), h.discrepancy, 0.02));
        if let Some(x) = expected_hessian {
            rep.checks.push(Check::at_most(format!("dir{k}: |H₀/({x:.6}) − 1|"), (h.form_moments / x - 1.0).abs(), 0.02));
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Jacobi fields

/// The square-torus circle map u = (sin 2πx, cos 2πx, 0) with the field
/// v = (0, 0, sin 2πy): a null direction of I_u not generated by rotations.
/// A non-null control field (0, 0, sin 4πy) and the rotation fields are
/// reported alongside.
pub fn jacobi_audit(n: usize) -> Result<StabilityReport> {
    let (mesh, u) = ShippedMap::EquatorialCircle.build(n)?;
    let form = JacobiForm::new(&mesh, &u)?;
    let field = |freq: f64| -> Vec<Vec<f64>> {
        let z: Vec<f64> = mesh.vertices.iter().map(|p| (2.0 * PI * freq * p[1]).sin()).collect();
        vec![vec![0.0; z.len()], vec![0.0; z.len()], z]
    };
    let mut rep = StabilityReport::new("jacobi");
    rep.param("n", n).param("threshold", JACOBI_THRESHOLD);
    let j = form.analyze_field(&mesh, &field(1.0), JACOBI_THRESHOLD)?;
    rep.record("form_norm", j.form_norm).record("self_value", j.self_value).record("rotation_free_fraction", j.rotation_free_fraction);
    rep.rows.push(ReportRow::new("I_u(v,·) form norm below threshold", JACOBI_THRESHOLD, j.form_norm, 0.0));
    rep.checks.push(Check::new("v is a nontrivial Jacobi field", j.rotation_free_fraction, 1e-3, j.nontrivial));
    let ctrl = form.analyze_field(&mesh, &field(2.0), JACOBI_THRESHOLD)?;
    rep.record("control_form_norm", ctrl.form_norm);
    rep.checks.push(Check::new("control field (0,0,sin 4πy) is not Jacobi", ctrl.form_norm, JACOBI_THRESHOLD, !ctrl.nontrivial));
    for (k, f) in form.rotation_fields().iter().enumerate() {
        let r = form.analyze_field(&mesh, f, JACOBI_THRESHOLD)?;
        rep.checks.push(Check::at_most(format!("rotation field {k}: form norm"), r.form_norm, JACOBI_THRESHOLD).informational());
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Conservation laws

/// Relative residual of d*(u^a du^b − u^b du^a) = 0 on three refinement
/// levels; each level must improve by `min_ratio` unless the residual is
/// already below `floor`.
pub fn conservation_audit(maps: &[ShippedMap], min_ratio: f64, floor: f64) -> Result<StabilityReport> {
    let mut rep = StabilityReport::new("conservation");
    rep.param("min_ratio", min_ratio).param("floor", floor);
    for m in maps {
        let levels = m.default_levels();
        let mut res = Vec::new();
        for &l in &levels {
            let (mesh, u) = m.build(l)?;
            let r = relative_conservation_residual(&mesh, &u)?;
            rep.record(&format!("residual[{}:{l}]", m.name()), r);
            res.push(r);
        }
        for (w, l) in res.windows(2).zip(levels.windows(2)) {
            let ratio = if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY };
            let ok = ratio >= min_ratio || w[1] <= floor;
            let shown = if ratio.is_finite() { ratio } else { f64::MAX };
            let c = Check::new(format!("{} level {}→{}: residual ratio", m.name(), l[0], l[1]), shown, min_ratio, ok);
            rep.checks.push(if ratio < min_ratio && ok { c.note("residual at round-off floor") } else { c });
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Area density and the Möbius area limit

/// Θ_F(y, 0) by Richardson extrapolation of the mesh density at r and r/2
/// (the error is O(r²) for a smooth surface).
pub fn theta_at_zero(mesh: &SurfaceMesh, f: &SphereValuedMap, y: &[f64], r: f64, depth: usize) -> Result<f64> {
    let a = area_density(mesh, f, y, r, depth)?;
    let b = area_density(mesh, f, y, 0.5 * r, depth)?;
    Ok((4.0 * b - a) / 3.0)
}

pub struct DensitySetup<'a> {
    pub surface: AnalyticSurface,
    pub mesh: &'a SurfaceMesh,
    pub map: &'a SphereValuedMap,
    /// Parameter point p₀ with α = −F(p₀).
    pub p0: (f64, f64),
    pub ts: Vec<f64>,
}

impl<'a> DensitySetup<'a> {
    pub fn new(surface: AnalyticSurface, mesh: &'a SurfaceMesh, map: &'a SphereValuedMap) -> Self {
        let p0 = match surface {
            AnalyticSurface::RoundSphere => (1.1, 0.4),
            _ => (0.3, 0.17),
        };
        DensitySetup { surface, mesh, map, p0, ts: AREA_LIMIT_TS.to_vec() }
    }
}

/// Area(G_{tα}∘F) as t → 1 against 4Θ_F(−α, 0) = 4π (a regular point of an
/// embedded surface), with every sample inside the two-sided bracket.
pub fn density_audit(setup: &DensitySetup) -> Result<StabilityReport> {
    let y = setup.surface.eval(setup.p0.0, setup.p0.1);
    let alpha: Vec<f64> = y.iter().map(|x| -x).collect();
    let f = setup.map;
    let theta0 = theta_at_zero(setup.mesh, f, &y, 0.04, 3)?;
    let h = mean_curvature_sup(setup.mesh, f)?;
    let lim = moebius_area_limit(&setup.surface, &alpha, &setup.ts, theta0, |c, r| area_density(setup.mesh, f, c, r, 3).unwrap_or(f64::NAN), h)?;
    let mut rep = StabilityReport::new("density");
    rep.param("surface", format!("{:?}", setup.surface))
        .param("p0", format!("{},{}", setup.p0.0, setup.p0.1))
        .param("vertices", setup.mesh.n_vertices());
    rep.record("theta0", theta0).record("mean_curvature_sup", h).record("extrapolated", lim.extrapolated);
    for s in &lim.samples {
        rep.record(&format!("area[t={}]", s.t), s.area);
        rep.rows.push(ReportRow::new(format!("t={}: area ≥ lower", s.t), s.area, s.lower, 0.0));
        rep.rows.push(ReportRow::new(format!("t={}: upper ≥ area", s.t), s.upper, s.area, 0.0));
    }
    let target = 4.0 * PI;
    rep.checks.push(Check::at_most("|limit/4π − 1|", (lim.extrapolated / target - 1.0).abs(), 0.03));
    rep.checks.push(Check::at_most("|4Θ(−α,0)/4π − 1|", (lim.four_theta / target - 1.0).abs(), 0.03));
    rep.checks.push(Check::new("extrapolation stable", lim.extrapolated, target, lim.conclusive).informational());
    // e^{rH}Θ(y, r) is nondecreasing in r (monotonicity formula)
    let rs = [0.02, 0.05, 0.1, 0.2, 0.4];
    let mono: Vec<f64> = rs.iter().map(|&r| Ok((h * r).exp() * area_density(setup.mesh, f, &y, r, 3)?)).collect::<Result<_>>()?;
    let worst = mono.windows(2).map(|w| (w[0] - w[1]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
    rep.checks.push(Check::at_most("largest relative drop of e^{rH}Θ(y,r)", worst, 1e-3).informational());
    Ok(rep)
}
