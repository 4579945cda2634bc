//! Conformal automorphisms of spheres: the dilations G_a, Hersch balancing,
//! cap reflections and Nadirashvili's two-constraint balancing, plus the
//! energy and second variation of the canonical family G_a ∘ u.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, triangle_energies};
use crate::geom::{self, dotn, Vec3};
use crate::maps::SphereValuedMap;
use crate::measure::MeasureOnMesh;
use crate::mesh::{SurfaceMesh, Topology};
use crate::optim::{levenberg_marquardt, nelder_mead};
use crate::quadrature::TRI_MID;

/// Point a of the open unit ball parametrizing G_a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoebiusParam {
    pub a: Vec<f64>,
}

impl MoebiusParam {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        let n = geom::normn(&a);
        if !(n < 1.0) {
            return Err(Error::InvalidParameter(format!("Möbius parameter |a| = {n} must be < 1")));
        }
        Ok(MoebiusParam { a })
    }

    pub fn identity(dim: usize) -> Self {
        MoebiusParam { a: vec![0.0; dim] }
    }

    pub fn inverse(&self) -> Self {
        MoebiusParam { a: self.a.iter().map(|x| -x).collect() }
    }

    pub fn norm(&self) -> f64 {
        geom::normn(&self.a)
    }
}

/// G_a(x) = (1 − |a|²)(x + a)/|x + a|² + a in any dimension.
pub fn moebius_n(a: &[f64], x: &[f64]) -> Vec<f64> {
    let a2 = dotn(a, a);
    let xa: Vec<f64> = x.iter().zip(a).map(|(p, q)| p + q).collect();
    let d = dotn(&xa, &xa);
    let s = (1.0 - a2) / d;
    xa.iter().zip(a).map(|(p, q)| s * p + q).collect()
}

pub fn apply_moebius(a: &MoebiusParam, x: Vec3) -> Result<Vec3> {
    if a.a.len() != 3 {
        return Err(Error::InvalidParameter("apply_moebius on S² needs a ∈ ℝ³".into()));
    }
    if !(a.norm() < 1.0) {
        return Err(Error::InvalidParameter(format!("Möbius parameter |a| = {} must be < 1", a.norm())));
    }
    let y = moebius_n(&a.a, &x);
    Ok([y[0], y[1], y[2]])
}

/// G_a ∘ u applied vertexwise.
pub fn compose_moebius(a: &MoebiusParam, u: &SphereValuedMap) -> Result<SphereValuedMap> {
    if a.a.len() != u.ambient_dim() {
        return Err(Error::InvalidParameter("dimension of a differs from the target".into()));
    }
    if !(a.norm() < 1.0) {
        return Err(Error::InvalidParameter(format!("Möbius parameter |a| = {} must be < 1", a.norm())));
    }
    let vals: Vec<Vec<f64>> = (0..u.n_vertices()).map(|i| moebius_n(&a.a, &u.value(i))).collect();
    let mut comps = vec![Vec::with_capacity(vals.len()); u.ambient_dim()];
    for v in &vals {
        for (c, x) in comps.iter_mut().zip(v) {
            c.push(*x);
        }
    }
    Ok(SphereValuedMap { target_dim: u.target_dim, components: comps, analytic_tag: None })
}

// ---------------------------------------------------------------------------
// Hersch balancing

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HerschBalance {
    pub a: [f64; 3],
    /// |∫ G_a dμ| / μ(M) with the finite-element pairing.
    pub residual: f64,
    pub iterations: usize,
}

impl HerschBalance {
    pub fn param(&self) -> MoebiusParam {
        MoebiusParam { a: self.a.to_vec() }
    }
}

pub const HERSCH_TOL: f64 = 1e-10;

/// Center of mass of (G_a)_*μ with finite-element weights w_i = (M_μ 1)_i,
/// i.e. ∫ I_h(G_a) dμ / μ(M). These are exactly the moments that enter the
/// discrete Rayleigh quotients, so a balanced `a` makes the coordinates of
/// G_a admissible test functions for λ₁ of the discrete problem.
fn balance_moment(points: &[Vec3], w: &[f64], mass: f64, a: Vec3) -> Vec3 {
    let mut s = [0.0; 3];
    let a2 = geom::dot(a, a);
    for (x, &wi) in points.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        let xa = geom::add(*x, a);
        let f = (1.0 - a2) / geom::dot(xa, xa);
        for k in 0..3 {
            s[k] += wi * (f * xa[k] + a[k]);
        }
    }
    geom::scale(s, 1.0 / mass)
}

/// Finite-element hat weights (M_μ 1)_i of a measure.
pub fn fe_weights(mesh: &SurfaceMesh, mu: &MeasureOnMesh) -> Result<Vec<f64>> {
    let m = assemble_mass(mesh, mu)?;
    Ok(m.matvec(&vec![1.0; mesh.n_vertices()]))
}

pub fn hersch_balance(mesh: &SurfaceMesh, mu: &MeasureOnMesh) -> Result<HerschBalance> {
    if mesh.topology != Topology::Sphere {
        return Err(Error::UnsupportedTopology("Hersch balancing needs a sphere mesh".into()));
    }
    mu.validate(mesh)?;
    if mu.is_single_atom() {
        return Err(Error::DegenerateMeasure("a single atom cannot be balanced (the balancing point escapes to the boundary)".into()));
    }
    let w = fe_weights(mesh, mu)?;
    hersch_balance_weights(&mesh.vertices, &w)
}

/// Balance a weighted point set on S².
pub fn hersch_balance_weights(points: &[Vec3], w: &[f64]) -> Result<HerschBalance> {
    let mass: f64 = w.iter().sum();
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    if support.len() < 2 {
        return Err(Error::DegenerateMeasure("measure is supported on a single point".into()));
    }
    let f = |a: Vec3| balance_moment(points, w, mass, a);
    let f0 = f([0.0; 3]);
    let mut total_iters = 0;
    let mut best = ([0.0; 3], geom::norm(f0));
    // first attempt from the origin, then restarts along the ray −F(0)/|F(0)|
    let mut starts = vec![[0.0; 3]];
    if geom::norm(f0) > 0.0 {
        let dir = geom::scale(f0, -1.0 / geom::norm(f0));
        let mut ray: Vec<(f64, Vec3)> = [0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99]
            .iter()
            .map(|&t| {
                let a = geom::scale(dir, t);
                (geom::norm(f(a)), a)
            })
            .collect();
        ray.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        starts.extend(ray.into_iter().map(|(_, a)| a));
    }
    for start in starts {
        let (a, r, it) = newton_balance(&f, start, 200);
        total_iters += it;
        if r < best.1 {
            best = (a, r);
        }
        if r <= HERSCH_TOL {
            return Ok(HerschBalance { a, residual: r, iterations: total_iters });
        }
    }
    Err(Error::BalanceFailure { iterations: total_iters, residual: best.1 })
}

fn newton_balance<F: Fn(Vec3) -> Vec3>(f: &F, start: Vec3, max_iter: usize) -> (Vec3, f64, usize) {
    let mut a = start;
    let mut fa = f(a);
    let mut r = geom::norm(fa);
    for it in 0..max_iter {
        if r <= HERSCH_TOL {
            return (a, r, it);
        }
        let room = 1.0 - geom::norm(a);
        let h = (1e-7f64).min(0.25 * room);
        let mut jac = nalgebra::Matrix3::<f64>::zeros();
        for j in 0..3 {
            let mut ap = a;
            let mut am = a;
            ap[j] += h;
            am[j] -= h;
            let (fp, fm) = (f(ap), f(am));
            for i in 0..3 {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let Some(step) = jac.lu().solve(&nalgebra::Vector3::new(-fa[0], -fa[1], -fa[2])) else {
            return (a, r, it);
        };
        let mut d = [step[0], step[1], step[2]];
        let dn = geom::norm(d);
        if dn > 0.2 {
            d = geom::scale(d, 0.2 / dn);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = geom::add(a, geom::scale(d, t));
            if geom::norm(cand) < 1.0 - 1e-12 {
                let fc = f(cand);
                let rc = geom::norm(fc);
                if rc < r {
                    a = cand;
                    fa = fc;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return (a, r, it);
        }
    }
    (a, r, max_iter)
}

// ---------------------------------------------------------------------------
// Spherical caps and reflections

/// Open geodesic ball {x : d(x, center) < radius} on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCap {
    pub center: Vec3,
    pub radius: f64,
}

impl SphericalCap {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!("cap radius {radius} outside (0, π)")));
        }
        let n = geom::norm(center);
        if !(n > 0.0) {
            return Err(Error::InvalidParameter("cap center must be nonzero".into()));
        }
        Ok(SphericalCap { center: geom::scale(center, 1.0 / n), radius })
    }

    /// Area on the unit sphere.
    pub fn area(&self) -> f64 {
        2.0 * std::f64::consts::PI * (1.0 - self.radius.cos())
    }

    /// Strict membership; boundary ties are outside.
    pub fn contains(&self, x: Vec3) -> bool {
        geom::angle(x, self.center) < self.radius
    }

    /// Conformal reflection across ∂Z: a point at angle θ from the center
    /// moves to angle 2·atan(tan²(r/2)/tan(θ/2)) along the same meridian
    /// (circle inversion in the stereographic chart centered at the cap).
    pub fn reflect(&self, x: Vec3) -> Vec3 {
        let rot = geom::rotation_to_north(self.center);
        let y = geom::mat_vec(&rot, x);
        let theta = geom::angle(y, [0.0, 0.0, 1.0]);
        let k = (0.5 * self.radius).tan().powi(2);
        let t = (0.5 * theta).tan();
        let theta2 = if t == 0.0 { std::f64::consts::PI } else { 2.0 * (k / t).atan() };
        let rho = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let (c, s) = if rho > 0.0 { (y[0] / rho, y[1] / rho) } else { (1.0, 0.0) };
        let y2 = [theta2.sin() * c, theta2.sin() * s, theta2.cos()];
        geom::mat_t_vec(&rot, y2)
    }

    /// R_Z: identity outside Z, reflection inside.
    pub fn r_map(&self, x: Vec3) -> Vec3 {
        if self.contains(x) {
            self.reflect(x)
        } else {
            x
        }
    }
}

pub fn cap_reflection_map(cap: &SphericalCap, mesh: &SurfaceMesh) -> Result<SphereValuedMap> {
    if mesh.topology != Topology::Sphere {
        return Err(Error::UnsupportedTopology("cap reflections need a sphere mesh".into()));
    }
    let vals: Vec<Vec3> = mesh.vertices.iter().map(|&x| cap.r_map(x)).collect();
    Ok(SphereValuedMap {
        target_dim: 2,
        components: (0..3).map(|k| vals.iter().map(|v| v[k]).collect()).collect(),
        analytic_tag: Some(format!("cap_reflection:{:?}:{}", cap.center, cap.radius)),
    })
}

/// Image of a cap under G_a (Möbius maps send caps to caps).
pub fn moebius_image_cap(a: &MoebiusParam, cap: &SphericalCap) -> Result<SphericalCap> {
    let rot = geom::rotation_to_north(cap.center);
    let (s, c) = cap.radius.sin_cos();
    let pts: Vec<Vec3> = (0..3)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            apply_moebius(a, geom::mat_t_vec(&rot, [s * phi.cos(), s * phi.sin(), c]))
        })
        .collect::<Result<_>>()?;
    // plane through the three image points: ⟨x, n⟩ = h
    let mut n = geom::normalize(geom::cross(geom::sub(pts[1], pts[0]), geom::sub(pts[2], pts[0])));
    let mut h = geom::dot(n, pts[0]);
    let inside = apply_moebius(a, cap.center)?;
    if geom::dot(inside, n) < h {
        n = geom::scale(n, -1.0);
        h = -h;
    }
    SphericalCap::new(n, h.clamp(-1.0, 1.0).acos())
}

// ---------------------------------------------------------------------------
// Nadirashvili balancing

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NadirashviliResult {
    pub a: [f64; 3],
    /// Cap Z' in the original coordinates.
    pub cap: SphericalCap,
    /// Z = G_a(Z'), the cap of the reflection R_Z = G_a ∘ R_{Z'} ∘ G_a⁻¹.
    pub image_cap: SphericalCap,
    /// Norm of the six balancing moments divided by μ(M).
    pub residual: f64,
    pub balanced: bool,
    /// 2E of the test map u = G_a ∘ R_{Z'}.
    pub two_energy: f64,
    pub evaluations: usize,
    #[serde(skip)]
    pub map: Option<SphereValuedMap>,
}

pub const NADIRASHVILI_TOL: f64 = 1e-8;

fn decode(y: &[f64]) -> (Vec3, SphericalCap) {
    let ya = [y[0], y[1], y[2]];
    let n = geom::norm(ya);
    let a = if n < 1e-14 { ya } else { geom::scale(ya, n.tanh() / n) };
    let (th, ph) = (y[3], y[4]);
    let p = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
    let r = std::f64::consts::PI / (1.0 + (-y[5]).exp());
    (a, SphericalCap { center: p, radius: r.clamp(1e-9, std::f64::consts::PI - 1e-9) })
}

fn nadirashvili_moments(points: &[Vec3], w0: &[f64], w1: &[f64], mass: f64, a: Vec3, cap: &SphericalCap) -> Vec<f64> {
    let mut r = vec![0.0; 6];
    let a2 = geom::dot(a, a);
    for (i, x) in points.iter().enumerate() {
        if w0[i] == 0.0 && w1[i] == 0.0 {
            continue;
        }
        let y = cap.r_map(*x);
        let ya = geom::add(y, a);
        let f = (1.0 - a2) / geom::dot(ya, ya);
        for k in 0..3 {
            let u = f * ya[k] + a[k];
            r[k] += w0[i] * u;
            r[3 + k] += w1[i] * u;
        }
    }
    r.iter().map(|v| v / mass).collect()
}

/// Search (a, Z') with ∫ G_a∘R_{Z'} dμ = ∫ φ₁ (G_a∘R_{Z'}) dμ = 0 (finite-element moments).
/// `phi1` is rescaled internally to ⟨φ₁, φ₁⟩_μ = μ(M) so both moment blocks are O(1).
pub fn nadirashvili_balance(mesh: &SurfaceMesh, mu: &MeasureOnMesh, phi1: &[f64]) -> Result<NadirashviliResult> {
    if mesh.topology != Topology::Sphere {
        return Err(Error::UnsupportedTopology("Nadirashvili balancing needs a sphere mesh".into()));
    }
    let m = assemble_mass(mesh, mu)?;
    let w0 = m.matvec(&vec![1.0; mesh.n_vertices()]);
    let mass: f64 = w0.iter().sum();
    let nrm = m.quad_form(phi1);
    if !(nrm > 0.0) {
        return Err(Error::InvalidInput("φ₁ vanishes in L²(μ)".into()));
    }
    let s = (mass / nrm).sqrt();
    let w1: Vec<f64> = m.matvec(phi1).iter().map(|v| v * s).collect();
    let pts = &mesh.vertices;
    let resid = |y: &[f64]| {
        let (a, cap) = decode(y);
        nadirashvili_moments(pts, &w0, &w1, mass, a, &cap)
    };
    let objective = |y: &[f64]| resid(y).iter().map(|v| v * v).sum::<f64>();

    let mut evaluations = 0;
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    for p in geom::fibonacci_sphere(8) {
        for &r in &[0.5 * std::f64::consts::PI, 0.25 * std::f64::consts::PI] {
            let th = p[2].clamp(-1.0, 1.0).acos();
            let ph = p[1].atan2(p[0]);
            let yr = (r / (std::f64::consts::PI - r)).ln();
            let y0 = vec![0.0, 0.0, 0.0, th, ph, yr];
            let res = nelder_mead(objective, &y0, 0.3, 1e-12, 400);
            evaluations += res.evals;
            candidates.push((res.f, res.x));
        }
    }
    candidates.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, y0) in candidates.into_iter().take(4) {
        let nm = nelder_mead(objective, &y0, 0.05, 1e-20, 3000);
        evaluations += nm.evals;
        let (y, r) = levenberg_marquardt(resid, &nm.x, 60, 1e-7);
        evaluations += 60 * 7;
        if best.as_ref().is_none_or(|b| r < b.0) {
            best = Some((r, y));
        }
        if r <= NADIRASHVILI_TOL {
            break;
        }
    }
    let (residual, y) = best.unwrap();
    let (a, cap) = decode(&y);
    let param = MoebiusParam { a: a.to_vec() };
    let image_cap = moebius_image_cap(&param, &cap)?;
    let map = compose_moebius(&param, &cap_reflection_map(&cap, mesh)?)?;
    let k = crate::fem::assemble_stiffness(mesh)?;
    let two_energy = 2.0 * crate::fem::dirichlet_energy(&k, &map.components)?;
    Ok(NadirashviliResult {
        a,
        cap,
        image_cap,
        residual,
        balanced: residual <= NADIRASHVILI_TOL,
        two_energy,
        evaluations,
        map: Some(map),
    })
}

// ---------------------------------------------------------------------------
// Canonical family G_a ∘ u

/// Conformal weight (1 − |a|²)²/(|a|² + 2⟨F, a⟩ + 1)², equal to |d(G_a∘F)|²/|dF|².
pub fn canonical_weight(a: &[f64], f: &[f64]) -> f64 {
    let a2 = dotn(a, a);
    let den = a2 + 2.0 * dotn(f, a) + 1.0;
    (1.0 - a2).powi(2) / (den * den)
}

fn midpoint_values(u: &SphereValuedMap, t: &[usize; 3]) -> [Vec<f64>; 3] {
    let mut out: [Vec<f64>; 3] = Default::default();
    for (q, (bary, _)) in TRI_MID.iter().enumerate() {
        let mut v: Vec<f64> = (0..u.ambient_dim())
            .map(|c| bary[0] * u.components[c][t[0]] + bary[1] * u.components[c][t[1]] + bary[2] * u.components[c][t[2]])
            .collect();
        let n = geom::normn(&v);
        v.iter_mut().for_each(|x| *x /= n);
        out[q] = v;
    }
    out
}

/// E(G_a ∘ u) through the closed-form conformal weight: ½ Σ_T e_T · avg_q w_a(F_q),
/// with e_T the triangle Dirichlet energy density of u and F_q the normalized edge
/// midpoints. Exactly E(u) at a = 0.
pub fn canonical_family_energy(mesh: &SurfaceMesh, u: &SphereValuedMap, a: &MoebiusParam) -> Result<f64> {
    if a.a.len() != u.ambient_dim() {
        return Err(Error::InvalidParameter("dimension of a differs from the target".into()));
    }
    if !(a.norm() < 1.0) {
        return Err(Error::InvalidParameter(format!("Möbius parameter |a| = {} must be < 1", a.norm())));
    }
    let et = triangle_energies(mesh, &u.components)?;
    let mut e = 0.0;
    for (t, e_t) in mesh.triangles.iter().zip(&et) {
        let fq = midpoint_values(u, t);
        let w: f64 = fq.iter().map(|f| canonical_weight(&a.a, f)).sum::<f64>() / 3.0;
        e += 0.5 * e_t * w;
    }
    Ok(e)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HessianReport {
    /// 4 ∫ (3⟨v, F⟩² − |v|²) |dF|².
    pub form_moments: f64,
    /// −4 ∫ |v^⊥|² |dF|² with v^⊥ the part of v normal to the image surface.
    pub form_normal: f64,
    pub discrepancy: f64,
    /// Set when u fails the harmonicity check; both forms are still returned.
    pub not_harmonic: bool,
}

/// Second variation at a = 0 of a ↦ E(G_a ∘ u) in direction v (|v| = 1).
pub fn hessian_h0(mesh: &SurfaceMesh, u: &SphereValuedMap, v: &[f64]) -> Result<HessianReport> {
    if v.len() != u.ambient_dim() {
        return Err(Error::InvalidParameter("direction has the wrong dimension".into()));
    }
    let vn = geom::normn(v);
    if (vn - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("direction must be a unit vector, |v| = {vn}")));
    }
    let et = triangle_energies(mesh, &u.components)?;
    let d = u.ambient_dim();
    let (mut f1, mut f2) = (0.0, 0.0);
    for (t, e_t) in mesh.triangles.iter().zip(&et) {
        let fq = midpoint_values(u, t);
        // image triangle edge vectors span the tangent plane of the image
        let edge = |k: usize| -> Vec<f64> { (0..d).map(|c| u.components[c][t[k]] - u.components[c][t[0]]).collect() };
        let (e1, e2) = (edge(1), edge(2));
        let (mut s1, mut s2) = (0.0, 0.0);
        for f in &fq {
            let vf = dotn(v, f);
            s1 += 3.0 * vf * vf - 1.0;
            // orthonormal tangent frame at F, orthogonal to F
            let proj = |x: &[f64]| -> Vec<f64> {
                let c = dotn(x, f);
                x.iter().zip(f).map(|(a, b)| a - c * b).collect()
            };
            let t1 = proj(&e1);
            let n1 = geom::normn(&t1);
            let t1: Vec<f64> = t1.iter().map(|x| x / n1).collect();
            let t2 = proj(&e2);
            let c12 = dotn(&t2, &t1);
            let t2: Vec<f64> = t2.iter().zip(&t1).map(|(a, b)| a - c12 * b).collect();
            let n2 = geom::normn(&t2);
            let t2: Vec<f64> = t2.iter().map(|x| x / n2).collect();
            let (p1, p2) = (dotn(v, &t1), dotn(v, &t2));
            s2 += (1.0 - vf * vf - p1 * p1 - p2 * p2).max(0.0);
        }
        f1 += 4.0 * e_t * s1 / 3.0;
        f2 -= 4.0 * e_t * s2 / 3.0;
    }
    let not_harmonic = !crate::harmonic::is_approximately_harmonic(mesh, u)?;
    Ok(HessianReport {
        form_moments: f1,
        form_normal: f2,
        discrepancy: (f1 - f2).abs() / f1.abs().max(f2.abs()).max(1e-300),
        not_harmonic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_icosphere;

    #[test]
    fn moebius_basic_identities() {
        let a = MoebiusParam::new(vec![0.0, 0.0, 0.6]).unwrap();
        assert_eq!(apply_moebius(&MoebiusParam::identity(3), [0.6, 0.0, 0.8]).unwrap(), [0.6, 0.0, 0.8]);
        for pole in [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]] {
            let y = apply_moebius(&a, pole).unwrap();
            assert!(geom::norm(geom::sub(y, pole)) < 1e-14);
        }
        assert!(MoebiusParam::new(vec![1.0, 0.0, 0.0]).is_err());
        let near = MoebiusParam::new(vec![0.0, 0.0, 0.999]).unwrap();
        let y = apply_moebius(&near, [1.0, 0.0, 0.0]).unwrap();
        assert!(y[2] > 0.99);
    }

    #[test]
    fn hemisphere_reflection_mirrors_upper_half() {
        let cap = SphericalCap::new([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2).unwrap();
        for x in geom::fibonacci_sphere(50) {
            let y = cap.r_map(x);
            let want = [x[0], x[1], -x[2].abs()];
            assert!(geom::norm(geom::sub(y, want)) < 1e-12, "{x:?} {y:?}");
        }
    }

    #[test]
    fn uniform_measure_balances_at_origin() {
        let mesh = build_icosphere(3).unwrap();
        let b = hersch_balance(&mesh, &MeasureOnMesh::uniform(&mesh)).unwrap();
        assert!(geom::norm(b.a) < 1e-10 && b.residual <= HERSCH_TOL);
    }

    #[test]
    fn single_atom_is_degenerate() {
        let mesh = build_icosphere(2).unwrap();
        let mu = MeasureOnMesh::from_density(vec![0.0; mesh.n_vertices()]).with_atom(4, 1.0);
        assert!(matches!(hersch_balance(&mesh, &mu), Err(Error::DegenerateMeasure(_))));
    }
}
