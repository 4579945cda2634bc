//! Cap-concentrated measures μ_ε^M on the unit-area sphere: eigenvalue
//! dichotomy in M and the contrast between the W^{-1,2} and Orlicz-dual
//! distances to the area measure.

use std::f64::consts::PI;

use crate::eigen::EigenOptions;
use crate::error::{Error, Result};
use crate::measure::{cap_concentration_measure, MeasureOnMesh};
use crate::mesh::{SurfaceMesh, Topology};
use crate::sobolev::{OrliczProfiles, SignedMeasureFunctional, SobolevContext};

use super::hersch::spectrum;
use super::report::{Check, ReportRow, StabilityReport};

/// On the unit-area sphere the smooth distance ‖μ_ε^M − dv‖_{W^{-1,2}} is
/// non-monotone for large caps (it peaks near ε ≈ 0.07) and decays only like
/// log(1/ε)^{-1/2} below; monotonicity is asserted for ε ≤ this value.
pub const MONOTONE_EPS: f64 = 0.05;

pub const DEFAULT_EPS: [f64; 4] = [0.1, 0.05, 0.03, 0.02];

#[derive(Debug, Clone)]
pub struct ConcentrationPoint {
    pub coupling: f64,
    pub eps: f64,
    pub lambda_bar: f64,
    pub w_minus12: f64,
    pub orlicz_dual_lb: f64,
}

/// Profiles about the poles with inner radii ε/2, ε, 2ε and outer radii
/// 0.25, 0.45 (a fraction of the unit-area sphere's diameter).
pub fn concentration_profiles(mesh: &SurfaceMesh, eps: f64) -> Result<OrliczProfiles> {
    let poles = [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    OrliczProfiles::new(mesh, &poles, &[0.5 * eps, eps, 2.0 * eps], &[0.25, 0.45])
}

pub fn concentration_point(
    mesh: &SurfaceMesh,
    ctx: &SobolevContext,
    profiles: &OrliczProfiles,
    eps: f64,
    coupling: f64,
    opts: &EigenOptions,
) -> Result<ConcentrationPoint> {
    let mu = cap_concentration_measure(mesh, eps, coupling)?;
    let lambda_bar = spectrum(mesh, &mu, 1, opts)?.normalized_eigenvalue(1)?;
    let m = SignedMeasureFunctional::difference(mesh, &mu, &MeasureOnMesh::uniform(mesh))?;
    let w_minus12 = ctx.w_minus12_norm(&m)?;
    let orlicz = profiles.dual_lb(&m)?.value;
    Ok(ConcentrationPoint { coupling, eps, lambda_bar, w_minus12, orlicz_dual_lb: orlicz })
}

/// Tabulate λ̄₁, the W^{-1,2} distance and the Orlicz-dual lower bound over
/// ε (decreasing) for small and large couplings M, and assert:
/// (a) small M: λ̄₁ within 5% of 8π at the smallest ε;
/// (b) large M: λ̄₁·M below the constant fitted at the largest ε (+10%);
/// (c) small M: W^{-1,2} distance decreasing as ε decreases (for ε ≤ [`MONOTONE_EPS`]);
/// (d) large M: Orlicz-dual bound at least half its largest value.
pub fn concentration_experiment(
    mesh: &SurfaceMesh,
    eps_grid: &[f64],
    small: &[f64],
    large: &[f64],
    opts: &EigenOptions,
) -> Result<StabilityReport> {
    if mesh.topology != Topology::Sphere || (mesh.radius() * (4.0 * PI).sqrt() - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition("concentration experiment runs on the unit-area sphere".into()));
    }
    let mut eps: Vec<f64> = eps_grid.to_vec();
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let ctx = SobolevContext::new(mesh)?;
    let mut rep = StabilityReport::new("concentration");
    rep.param("eps", eps.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";"))
        .param("small_m", small.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";"))
        .param("large_m", large.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";"))
        .param("vertices", mesh.n_vertices());
    let base = spectrum(mesh, &MeasureOnMesh::uniform(mesh), 1, opts)?.normalized_eigenvalue(1)?;
    rep.checks.push(Check::new("M = 0: λ̄₁ / 8π", base / (8.0 * PI), 1.0, true).informational());

    let profiles: Vec<OrliczProfiles> = eps.iter().map(|&e| concentration_profiles(mesh, e)).collect::<Result<_>>()?;
    let mut table: Vec<ConcentrationPoint> = Vec::new();
    for &m in small.iter().chain(large) {
        for (&e, prof) in eps.iter().zip(&profiles) {
            let p = concentration_point(mesh, &ctx, prof, e, m, opts)?;
            rep.record(&format!("lambda_bar[M={m},eps={e}]"), p.lambda_bar)
                .record(&format!("w_minus12[M={m},eps={e}]"), p.w_minus12)
                .record(&format!("orlicz_lb[M={m},eps={e}]"), p.orlicz_dual_lb);
            table.push(p);
        }
    }
    let branch = |m: f64| -> Vec<&ConcentrationPoint> { table.iter().filter(|p| p.coupling == m).collect() };
    for &m in small {
        let b = branch(m);
        let last = b.last().unwrap();
        // (a) λ̄₁ ≥ 0.95·8π
        rep.rows.push(ReportRow::new(format!("M={m} eps={}: λ̄₁ ≥ 0.95·8π", last.eps), last.lambda_bar, 0.95 * 8.0 * PI, 0.0));
        // (c), asserted where the smooth distance is itself monotone
        for w in b.windows(2) {
            let row = ReportRow::new(
                format!("M={m}: W^-1,2 distance decreases eps {}→{}", w[0].eps, w[1].eps),
                w[0].w_minus12,
                w[1].w_minus12,
                0.0,
            );
            rep.rows.push(if w[0].eps <= MONOTONE_EPS { row } else { row.informational() });
        }
        let increasing = b.windows(2).all(|w| w[1].lambda_bar >= w[0].lambda_bar);
        rep.checks.push(Check::new(format!("M={m}: λ̄₁ increases as ε decreases"), last.lambda_bar, 8.0 * PI, increasing).informational());
    }
    for &m in large {
        let b = branch(m);
        let c = 1.1 * b[0].lambda_bar * m;
        rep.record(&format!("fitted_C[M={m}]"), c);
        for p in &b[1..] {
            rep.rows.push(ReportRow::new(format!("M={m} eps={}: C ≥ λ̄₁·M", p.eps), c, p.lambda_bar * m, 0.0));
        }
        rep.checks.push(Check::at_most(format!("M={m}: branch separated (C/M < 8π/2)"), c / m, 4.0 * PI));
        // W^{-1,2} distance on this branch is reported, not asserted
        for w in b.windows(2) {
            rep.rows.push(
                ReportRow::new(format!("M={m}: W^-1,2 distance decreases eps {}→{}", w[0].eps, w[1].eps), w[0].w_minus12, w[1].w_minus12, 0.0)
                    .informational(),
            );
        }
        let mx = b.iter().map(|p| p.orlicz_dual_lb).fold(0.0, f64::max);
        for p in &b {
            rep.rows.push(ReportRow::new(format!("M={m} eps={}: Orlicz-dual lb ≥ ½ max", p.eps), p.orlicz_dual_lb, 0.5 * mx, 0.0));
        }
        rep.checks.push(Check::at_least(format!("M={m}: Orlicz-dual lb positive"), mx, 1e-12));
    }
    Ok(rep)
}
