//! Radial model problems on the unit disk: the Robin eigenvalue behind the
//! concentration of u² and the explicit extremal profile for ∫u.

use std::f64::consts::PI;

use crate::eigen::{smallest_generalized, EigenOptions};
use crate::error::{Error, Result};
use crate::fem::{assemble_background_mass, assemble_mass, assemble_stiffness};
use crate::measure::MeasureOnMesh;
use crate::mesh::SurfaceMesh;
use crate::quadrature::integrate_interval;
use crate::sparse::SparseOperator;

use super::report::{Check, ReportRow, StabilityReport};

/// j₀,₁, first zero of J₀.
pub const J01: f64 = 2.404_825_557_695_773;

/// Integrate ψ'' + ψ'/r + λψ = 0 from r = 0 (ψ = 1, ψ' = 0) to r = 1 with RK4;
/// returns (ψ(1), ψ'(1)).
pub fn radial_shoot(lambda: f64, steps: usize) -> (f64, f64) {
    // series start away from the regular singular point
    let r0 = 1e-4;
    let mut y = [1.0 - lambda * r0 * r0 / 4.0, -lambda * r0 / 2.0];
    let f = |r: f64, y: [f64; 2]| [y[1], -y[1] / r - lambda * y[0]];
    let h = (1.0 - r0) / steps as f64;
    let mut r = r0;
    for _ in 0..steps {
        let k1 = f(r, y);
        let k2 = f(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        r += h;
    }
    (y[0], y[1])
}

/// First Robin eigenvalue of the unit disk, ∂_r ψ + βψ = 0 on the boundary, by shooting.
pub fn robin_unit_disk(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("Robin parameter β = {beta} must be positive")));
    }
    let g = |l: f64| {
        let (p, dp) = radial_shoot(l, 4000);
        dp + beta * p
    };
    let (mut lo, mut hi) = (0.0, J01 * J01);
    if !(g(hi) < 0.0) {
        return Err(Error::Numeric("shooting bracket does not change sign".into()));
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// λ_ε = ε⁻² λ₁(B₁; 1/log(1/ε)), the inverse of sup ∫_{B_ε} u² over ‖du‖ = 1.
pub fn robin_concentration_eigenvalue(eps: f64) -> Result<f64> {
    if !(eps > 1e-6 && eps < 0.3) {
        return Err(Error::InvalidParameter(format!("ε = {eps} outside (1e-6, 0.3)")));
    }
    Ok(robin_unit_disk(1.0 / (1.0 / eps).ln())? / (eps * eps))
}

/// ∫_{B_ε} u_ε and ‖du_ε‖² for the explicit extremal profile, in closed form.
pub fn profile_closed_form(eps: f64) -> (f64, f64) {
    let l = (1.0 / eps).ln();
    (PI * eps * eps * l + PI * eps * eps / 4.0, 2.0 * PI * l + PI / 2.0)
}

/// The same two quantities by Gauss–Legendre quadrature of the profile
/// (outer annulus in the variable s = log r).
pub fn profile_quadrature(eps: f64) -> (f64, f64) {
    let l = (1.0 / eps).ln();
    let inner = |r: f64| 2.0 * PI * r * (l + (eps * eps - r * r) / (2.0 * eps * eps));
    let int_u = integrate_interval(inner, 0.0, eps, 4, 10);
    let grad_in = integrate_interval(|r: f64| 2.0 * PI * r * (r / (eps * eps)).powi(2), 0.0, eps, 4, 10);
    // |u'|² r dr = (1/r²) r dr = ds for r = e^s
    let grad_out = integrate_interval(|_s: f64| 2.0 * PI, eps.ln(), 0.0, 8, 10);
    (int_u, grad_in + grad_out)
}

/// sup_{‖u‖_{W^{1,2}} = 1} ∫_{caps} u² on a sphere mesh: the largest θ with
/// M_cap x = θ (K + M) x, where M_cap is the mass of the indicator of the two
/// polar caps of radius ε.
pub fn discrete_cap_functional(mesh: &SurfaceMesh, eps: f64) -> Result<f64> {
    let nu = crate::measure::cap_indicator_measure(mesh, eps)?;
    let indicator: Vec<f64> = nu.density.iter().map(|d| if *d > 0.0 { 1.0 } else { 0.0 }).collect();
    let m_cap = assemble_mass(mesh, &MeasureOnMesh::from_density(indicator))?;
    let k = assemble_stiffness(mesh)?;
    let m = assemble_background_mass(mesh)?;
    let a = SparseOperator::linear_combination(1.0, &k, 1.0, &m);
    let (vals, _, _) = smallest_generalized(&a, &m_cap, 1, &EigenOptions { tol: 1e-8, ..Default::default() })?;
    Ok(1.0 / vals[0])
}

/// Shooting versus 2/(ε² log(1/ε)) on the ε grid, the closed-form profile
/// integrals, and optionally the two-sided cap bound on a sphere mesh.
pub fn robin_asymptotics(eps_grid: &[f64], cap_check: Option<(&SurfaceMesh, f64)>) -> Result<StabilityReport> {
    let mut rep = StabilityReport::new("robin");
    rep.param("eps", eps_grid.iter().map(|e| format!("{e:e}")).collect::<Vec<_>>().join(";"));
    for &eps in eps_grid {
        let lam = robin_concentration_eigenvalue(eps)?;
        let asym = 2.0 / (eps * eps * (1.0 / eps).ln());
        let ratio = lam / asym;
        // |ratio − 1| ≤ 0.1 written as 0.1 ≥ |ratio − 1|
        rep.rows.push(ReportRow::new(format!("eps={eps:e}:robin_ratio"), 0.1, (ratio - 1.0).abs(), 0.0));
        rep.record(&format!("robin_eigenvalue[{eps:e}]"), lam);
        let (cu, cg) = profile_closed_form(eps);
        let (qu, qg) = profile_quadrature(eps);
        let err = ((cu - qu) / cu).abs().max(((cg - qg) / cg).abs());
        rep.checks.push(Check::at_most(format!("eps={eps:e}: closed-form profile integrals vs quadrature"), err, 1e-6));
        let sup_ratio = cu / cg.sqrt() / (eps * eps * (0.5 * PI * (1.0 / eps).ln()).sqrt());
        rep.checks.push(Check::new(format!("eps={eps:e}:sup_u_ratio"), sup_ratio, 1.0, true).informational());
    }
    if let Some((mesh, eps)) = cap_check {
        let theta = discrete_cap_functional(mesh, eps)?;
        let scale = eps * eps * (1.0 / eps).ln();
        let c = theta / scale;
        let c0 = 10.0;
        rep.checks.push(Check::at_least(format!("cap eps={eps}: θ/(ε²log(1/ε)) ≥ 1/C0"), c, 1.0 / c0));
        rep.checks.push(Check::at_most(format!("cap eps={eps}: θ/(ε²log(1/ε)) ≤ C0"), c, c0));
        rep.record("cap_ratio", c);
        rep.record("cap_vertices", mesh.n_vertices() as f64);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shooting_recovers_dirichlet_limit() {
        let (p, _) = radial_shoot(J01 * J01, 4000);
        assert!(p.abs() < 1e-9, "{p}");
    }
}
