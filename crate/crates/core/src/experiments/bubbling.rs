//! λ₂ near the bubbling regime: Nadirashvili balancing, the (C¹)* distance of
//! Φ_*μ to a round sphere plus a bubble, and the cap-area bound.

use std::f64::consts::PI;

use crate::eigen::EigenOptions;
use crate::error::{Error, Result};
use crate::locate::SphereLocator;
use crate::measure::{pushforward_hat_pairings, MeasureOnMesh};
use crate::mesh::{SurfaceMesh, Topology};
use crate::moebius::{nadirashvili_balance, MoebiusParam};
use crate::sobolev::{dual_c1_norm_lb, SignedMeasureFunctional};

use super::hersch::spectrum;
use super::report::{Check, ReportRow, StabilityReport};

#[derive(Debug, Clone)]
pub struct BubblingPoint {
    pub lambda_bar2: f64,
    pub deficit: f64,
    pub c1_lb: f64,
    pub image_cap_area: f64,
    pub balanced: bool,
    pub balance_residual: f64,
    pub two_energy: f64,
}

pub const BUBBLING_DEGREE: usize = 8;

pub fn bubbling_point(mesh: &SurfaceMesh, mu: &MeasureOnMesh, opts: &EigenOptions) -> Result<BubblingPoint> {
    if mesh.topology != Topology::Sphere || (mesh.radius() - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition("bubbling audit needs the curvature-one sphere".into()));
    }
    let spec = spectrum(mesh, mu, 2, opts)?;
    let lam2 = spec.eigenvalues[2];
    let lambda_bar2 = lam2 * spec.mass;
    let nb = nadirashvili_balance(mesh, mu, &spec.eigenvectors[1])?;
    // λ₂ = 2 normalization, then dv + 4πδ_p − Φ_*μ with p the center of Z
    let c = lam2 / 2.0;
    let pf = pushforward_hat_pairings(mu, mesh, &MoebiusParam::new(nb.a.to_vec())?)?;
    let mut m: Vec<f64> = MeasureOnMesh::uniform(mesh).hat_pairings(mesh).iter().zip(&pf).map(|(a, p)| a - c * p).collect();
    let p = nb.image_cap.center;
    let (t, b) = SphereLocator::new(mesh).locate(p);
    for k in 0..3 {
        m[mesh.triangles[t][k]] += 4.0 * PI * b[k];
    }
    let fun = SignedMeasureFunctional::new(m);
    let mut centers = crate::sobolev::default_centers(mesh, &fun, 2);
    centers.push(p);
    let c1_lb = dual_c1_norm_lb(mesh, &fun, BUBBLING_DEGREE, &centers)?.value;
    Ok(BubblingPoint {
        lambda_bar2,
        deficit: 16.0 * PI - lambda_bar2,
        c1_lb,
        image_cap_area: nb.image_cap.area(),
        balanced: nb.balanced,
        balance_residual: nb.residual,
        two_energy: nb.two_energy,
    })
}

/// Weak-direction audit over a family of measures ordered toward bubbling:
/// the (C¹)* lower bound is at most C₁√(16π − λ̄₂) with C₁ fitted on the first
/// member (checked with factor 2 on the rest), and Area(Z) ≤ (16π − λ̄₂)/4.
/// Unbalanced members are reported as informational.
pub fn lambda2_bubbling_audit(mesh: &SurfaceMesh, family: &[(String, MeasureOnMesh)], opts: &EigenOptions) -> Result<StabilityReport> {
    if family.is_empty() {
        return Err(Error::InvalidInput("empty measure family".into()));
    }
    let mut rep = StabilityReport::new("bubbling");
    rep.param("members", family.len()).param("vertices", mesh.n_vertices()).param("degree", BUBBLING_DEGREE);
    let pts: Vec<(String, BubblingPoint)> =
        family.iter().map(|(l, mu)| bubbling_point(mesh, mu, opts).map(|p| (l.clone(), p))).collect::<Result<_>>()?;
    let mut c1: Option<f64> = None;
    for (label, p) in &pts {
        rep.record(&format!("lambda_bar2[{label}]"), p.lambda_bar2)
            .record(&format!("c1_lb[{label}]"), p.c1_lb)
            .record(&format!("balance_residual[{label}]"), p.balance_residual);
        if !p.balanced {
            rep.checks.push(Check::new(format!("{label}: UNBALANCED"), p.balance_residual, crate::moebius::NADIRASHVILI_TOL, false).informational());
        }
        if p.deficit <= 0.0 {
            rep.checks.push(Check::at_least(format!("{label}: 16π − λ̄₂ > 0"), p.deficit, 0.0).informational());
            continue;
        }
        let ratio = p.c1_lb / p.deficit.sqrt();
        let c = *c1.get_or_insert(ratio);
        let row = ReportRow::new(format!("{label}: 2C₁√(16π − λ̄₂) ≥ (C¹)* lb"), 2.0 * c * p.deficit.sqrt(), p.c1_lb, 0.0);
        rep.rows.push(if p.balanced { row } else { row.informational() });
        let area_tol = 0.02 * p.deficit.max(1.0) / 4.0;
        let row = ReportRow::new(format!("{label}: (16π − λ̄₂)/4 ≥ Area(Z)"), p.deficit / 4.0, p.image_cap_area, area_tol);
        rep.rows.push(if p.balanced { row } else { row.informational() });
    }
    if let Some(c) = c1 {
        rep.record("fitted_C1", c);
    }
    Ok(rep)
}

/// Uniform density plus an atom of mass A at a fixed vertex, for A/4π in `fractions`.
pub fn bubbling_family(mesh: &SurfaceMesh, vertex: usize, fractions: &[f64]) -> Vec<(String, MeasureOnMesh)> {
    fractions
        .iter()
        .map(|f| (format!("A={f}·4π"), MeasureOnMesh::uniform(mesh).with_atom(vertex, 4.0 * PI * f)))
        .collect()
}

/// dv plus a conformal bubble of mass 4π concentrating at p:
/// density 1 + ((1 − t²)/(1 + t² − 2t⟨x, p⟩))² for each t in `ts`.
pub fn conformal_bubble_family(mesh: &SurfaceMesh, p: crate::geom::Vec3, ts: &[f64]) -> Vec<(String, MeasureOnMesh)> {
    let r = mesh.radius();
    ts.iter()
        .map(|&t| {
            let d = mesh
                .vertices
                .iter()
                .map(|v| {
                    let c = crate::geom::dot(*v, p) / r;
                    1.0 + ((1.0 - t * t) / (1.0 + t * t - 2.0 * t * c)).powi(2)
                })
                .collect();
            (format!("t={t}"), MeasureOnMesh::from_density(d))
        })
        .collect()
}
