//! Functionals of sphere-valued maps: tension residual, the conservation law
//! of harmonic maps into spheres, the Jacobi form, area densities and the
//! boundary behaviour of the canonical family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_background_mass, assemble_mass, assemble_stiffness, corner_cotangents, vertex_energy_density};
use crate::geom::{dotn, normn};
use crate::maps::{equilateral_s5_eval, torus_eigenmap_eval, SphereValuedMap};
use crate::measure::MeasureOnMesh;
use crate::mesh::SurfaceMesh;
use crate::moebius::moebius_n;
use crate::quadrature::integrate_rect_adaptive;
use crate::sparse::{Cholesky, PinnedSolver, SparseOperator};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensionReport {
    /// sup_v (∫⟨du,dv⟩ − λ∫⟨u,v⟩dμ)/‖dv‖ over finite-element v; present when the
    /// functional annihilates constants (u balanced against constants).
    pub dirichlet_dual: Option<f64>,
    /// Same supremum normalized by the full W^{1,2} norm of v.
    pub w12_dual: f64,
    /// |Σ_i r_i| / ‖r‖₁: how far the residual is from annihilating constants.
    pub constant_defect: f64,
}

/// Residual functional r_c = K u_c − λ M_μ u_c of the eigenmap equation.
pub fn tension_vectors(k: &SparseOperator, m_mu: &SparseOperator, u: &SphereValuedMap, lambda: f64) -> Vec<Vec<f64>> {
    u.components
        .iter()
        .map(|c| {
            let kc = k.matvec(c);
            let mc = m_mu.matvec(c);
            kc.iter().zip(&mc).map(|(a, b)| a - lambda * b).collect()
        })
        .collect()
}

pub fn tension_residual(mesh: &SurfaceMesh, u: &SphereValuedMap, mu: &MeasureOnMesh, lambda: f64) -> Result<TensionReport> {
    if u.n_vertices() != mesh.n_vertices() {
        return Err(Error::InvalidInput("map and mesh sizes differ".into()));
    }
    let k = assemble_stiffness(mesh)?;
    let m_mu = assemble_mass(mesh, mu)?;
    let m_g = assemble_background_mass(mesh)?;
    let r = tension_vectors(&k, &m_mu, u, lambda);
    let chol = Cholesky::new(&SparseOperator::linear_combination(1.0, &k, 1.0, &m_g))?;
    let w12: f64 = r.iter().map(|rc| dotn(rc, &chol.solve(rc))).sum::<f64>().max(0.0).sqrt();
    let (sum, l1) = r.iter().fold((0.0f64, 0.0f64), |(s, l), rc| {
        (s.max(rc.iter().sum::<f64>().abs()), l + rc.iter().map(|x| x.abs()).sum::<f64>())
    });
    let constant_defect = if l1 > 0.0 { sum / l1 } else { 0.0 };
    let dirichlet_dual = if constant_defect < 1e-8 {
        let pinned = PinnedSolver::new(&k)?;
        Some(r.iter().map(|rc| pinned.dual_seminorm_sq(rc)).sum::<f64>().sqrt())
    } else {
        None
    };
    Ok(TensionReport { dirichlet_dual, w12_dual: w12, constant_defect })
}

/// Discrete codifferential of α^{ab} = u^a du^b − u^b du^a:
/// r_i = u^a_i (K u^b)_i − u^b_i (K u^a)_i, which sums to zero exactly.
pub fn conservation_vectors(k: &SparseOperator, u: &SphereValuedMap) -> Vec<((usize, usize), Vec<f64>)> {
    let ku: Vec<Vec<f64>> = u.components.iter().map(|c| k.matvec(c)).collect();
    let d = u.ambient_dim();
    let mut out = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            let r = (0..k.dim)
                .map(|i| u.components[a][i] * ku[b][i] - u.components[b][i] * ku[a][i])
                .collect();
            out.push(((a, b), r));
        }
    }
    out
}

/// For each pair a < b, sup_φ ∫⟨α^{ab}(u), dφ⟩/‖dφ‖ over finite-element φ.
/// Returned as a dense antisymmetric-free matrix with entries for a < b.
pub fn conservation_residual(mesh: &SurfaceMesh, u: &SphereValuedMap) -> Result<Vec<Vec<f64>>> {
    let k = assemble_stiffness(mesh)?;
    let pinned = PinnedSolver::new(&k)?;
    let d = u.ambient_dim();
    let mut mat = vec![vec![0.0; d]; d];
    for ((a, b), r) in conservation_vectors(&k, u) {
        mat[a][b] = pinned.dual_seminorm_sq(&r).sqrt();
    }
    Ok(mat)
}

/// Largest conservation residual relative to √(2E(u)).
pub fn relative_conservation_residual(mesh: &SurfaceMesh, u: &SphereValuedMap) -> Result<f64> {
    let k = assemble_stiffness(mesh)?;
    let two_e = 2.0 * crate::fem::dirichlet_energy(&k, &u.components)?;
    if two_e == 0.0 {
        return Ok(0.0);
    }
    let m = conservation_residual(mesh, u)?;
    Ok(m.iter().flatten().cloned().fold(0.0, f64::max) / two_e.sqrt())
}

/// Relative conservation residual below which a map counts as harmonic.
pub const HARMONIC_THRESHOLD: f64 = 5e-2;

pub fn is_approximately_harmonic(mesh: &SurfaceMesh, u: &SphereValuedMap) -> Result<bool> {
    Ok(relative_conservation_residual(mesh, u)? <= HARMONIC_THRESHOLD)
}

// ---------------------------------------------------------------------------
// Jacobi form

/// Precomputed data for I_u(v, w) = ∫⟨dv, dw⟩ − |du|²⟨v, w⟩.
///
/// The zeroth-order term uses the vertex energy density λ_i = Σ_c u_{c,i}(Ku_c)_i
/// (the hat-function pairing of |du|² dv_g), which keeps the form symmetric
/// and makes the discrete Jacobi operator annihilate discrete eigenmap modes.
pub struct JacobiForm<'a> {
    pub u: &'a SphereValuedMap,
    k: SparseOperator,
    lam: Vec<f64>,
    w12: Cholesky,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobiFieldReport {
    /// Upper bound on sup_w |I_u(v, w)| / ‖w‖_{W^{1,2}} over tangent w.
    pub form_norm: f64,
    /// I_u(v, v).
    pub self_value: f64,
    /// Largest pointwise |⟨v, u⟩| before projection.
    pub tangency_defect: f64,
    pub projected: bool,
    /// Relative L² size of v after removing its {Bu : B skew} component.
    pub rotation_free_fraction: f64,
    /// Null direction of I_u that is not generated by a rotation.
    pub nontrivial: bool,
}

pub const JACOBI_THRESHOLD: f64 = 1e-4;

impl<'a> JacobiForm<'a> {
    pub fn new(mesh: &SurfaceMesh, u: &'a SphereValuedMap) -> Result<Self> {
        let k = assemble_stiffness(mesh)?;
        let lam = vertex_energy_density(&k, &u.components);
        let m = assemble_background_mass(mesh)?;
        let w12 = Cholesky::new(&SparseOperator::linear_combination(1.0, &k, 1.0, &m))?;
        Ok(JacobiForm { u, k, lam, w12 })
    }

    /// Project v pointwise onto the tangent spaces of the sphere along u.
    pub fn tangential(&self, v: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
        let n = self.u.n_vertices();
        let mut out = v.to_vec();
        let mut defect: f64 = 0.0;
        for i in 0..n {
            let ui = self.u.value(i);
            let vi: Vec<f64> = v.iter().map(|c| c[i]).collect();
            let s = dotn(&ui, &vi);
            defect = defect.max(s.abs());
            for (c, comp) in out.iter_mut().enumerate() {
                comp[i] -= s * ui[c];
            }
        }
        (out, defect)
    }

    pub fn value(&self, v: &[Vec<f64>], w: &[Vec<f64>]) -> f64 {
        let mut s = 0.0;
        for (vc, wc) in v.iter().zip(w) {
            s += self.k.bilinear(vc, wc);
            for i in 0..vc.len() {
                s -= self.lam[i] * vc[i] * wc[i];
            }
        }
        s
    }

    /// Riesz-type bound on the form norm of I_u(v, ·) over tangent test fields.
    pub fn form_norm(&self, v: &[Vec<f64>]) -> f64 {
        let r: Vec<Vec<f64>> = v
            .iter()
            .map(|vc| {
                let kv = self.k.matvec(vc);
                kv.iter().zip(vc).zip(&self.lam).map(|((a, b), l)| a - l * b).collect()
            })
            .collect();
        let (rt, _) = self.tangential(&r);
        rt.iter().map(|rc| dotn(rc, &self.w12.solve(rc))).sum::<f64>().max(0.0).sqrt()
    }

    /// Rotation fields B u for a basis of skew-symmetric B.
    pub fn rotation_fields(&self) -> Vec<Vec<Vec<f64>>> {
        let d = self.u.ambient_dim();
        let n = self.u.n_vertices();
        let mut out = Vec::new();
        for a in 0..d {
            for b in a + 1..d {
                // B = e_a e_bᵀ − e_b e_aᵀ
                let mut f = vec![vec![0.0; n]; d];
                f[a] = self.u.components[b].clone();
                f[b] = self.u.components[a].iter().map(|x| -x).collect();
                out.push(f);
            }
        }
        out
    }

    /// Decide whether v is a nontrivial Jacobi field.
    pub fn analyze_field(&self, mesh: &SurfaceMesh, v: &[Vec<f64>], threshold: f64) -> Result<JacobiFieldReport> {
        let (vt, defect) = self.tangential(v);
        let projected = defect > 1e-8;
        let form_norm = self.form_norm(&vt);
        let self_value = self.value(&vt, &vt);
        let m = assemble_background_mass(mesh)?;
        let l2 = |f: &[Vec<f64>], g: &[Vec<f64>]| -> f64 { f.iter().zip(g).map(|(a, b)| m.bilinear(a, b)).sum() };
        // Gram–Schmidt of the rotation fields, then remove their span from v
        let mut basis: Vec<Vec<Vec<f64>>> = Vec::new();
        for mut f in self.rotation_fields() {
            for _ in 0..2 {
                for b in &basis {
                    let s = l2(&f, b);
                    for (fc, bc) in f.iter_mut().zip(b) {
                        fc.iter_mut().zip(bc).for_each(|(x, y)| *x -= s * y);
                    }
                }
            }
            let n2 = l2(&f, &f);
            if n2 > 1e-20 {
                let s = 1.0 / n2.sqrt();
                basis.push(f.iter().map(|c| c.iter().map(|x| x * s).collect()).collect());
            }
        }
        let mut rest = vt.clone();
        for b in &basis {
            let s = l2(&rest, b);
            for (rc, bc) in rest.iter_mut().zip(b) {
                rc.iter_mut().zip(bc).for_each(|(x, y)| *x -= s * y);
            }
        }
        let vn = l2(&vt, &vt).sqrt();
        let frac = if vn > 0.0 { l2(&rest, &rest).sqrt() / vn } else { 0.0 };
        Ok(JacobiFieldReport {
            form_norm,
            self_value,
            tangency_defect: defect,
            projected,
            rotation_free_fraction: frac,
            nontrivial: form_norm < threshold && frac > 1e-3,
        })
    }
}

pub fn jacobi_form(mesh: &SurfaceMesh, u: &SphereValuedMap, v: &[Vec<f64>], w: &[Vec<f64>]) -> Result<f64> {
    let j = JacobiForm::new(mesh, u)?;
    let (vt, _) = j.tangential(v);
    let (wt, _) = j.tangential(w);
    Ok(j.value(&vt, &wt))
}

// ---------------------------------------------------------------------------
// Area density and mean curvature of immersions F: M → Sⁿ ⊂ ℝⁿ⁺¹

fn tri_area_n(p: &[Vec<f64>; 3]) -> f64 {
    let e1: Vec<f64> = p[1].iter().zip(&p[0]).map(|(a, b)| a - b).collect();
    let e2: Vec<f64> = p[2].iter().zip(&p[0]).map(|(a, b)| a - b).collect();
    let (a, b, c) = (dotn(&e1, &e1), dotn(&e2, &e2), dotn(&e1, &e2));
    0.5 * (a * b - c * c).max(0.0).sqrt()
}

fn image_triangle(f: &SphereValuedMap, t: &[usize; 3]) -> [Vec<f64>; 3] {
    [f.value(t[0]), f.value(t[1]), f.value(t[2])]
}

/// Θ_F(y, r) = Area({|F − y| < r}) / r² for the piecewise-linear image of F.
/// Triangles straddling the sphere {|x − y| = r} are split 4^depth times and
/// the pieces classified by their centroids.
pub fn area_density(mesh: &SurfaceMesh, f: &SphereValuedMap, y: &[f64], r: f64, depth: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("radius r = {r} must be positive")));
    }
    if y.len() != f.ambient_dim() {
        return Err(Error::InvalidInput("center has the wrong dimension".into()));
    }
    let dist = |x: &[f64]| -> f64 { x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() };
    let mut area = 0.0;
    for (ti, t) in mesh.triangles.iter().enumerate() {
        let p = image_triangle(f, t);
        let a = tri_area_n(&p);
        if !(a > 0.0) {
            return Err(Error::DegenerateTriangle { triangle: ti, area: a });
        }
        let d: Vec<f64> = p.iter().map(|x| dist(x)).collect();
        let diam = (0..3)
            .map(|k| normn(&p[k].iter().zip(&p[(k + 1) % 3]).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let dmax = d.iter().cloned().fold(0.0, f64::max);
        if dmin - diam >= r {
            continue;
        }
        if dmax < r {
            area += a;
            continue;
        }
        let m = 1usize << depth;
        let mut inside = 0usize;
        // uniform split into m² sub-triangles, classified at centroids
        for i in 0..m {
            for j in 0..m - i {
                let mut cents = vec![[(3 * i + 1) as f64, (3 * j + 1) as f64]];
                if i + j + 1 < m {
                    cents.push([(3 * i + 2) as f64, (3 * j + 2) as f64]);
                }
                for c in cents {
                    let (s, t2) = (c[0] / (3.0 * m as f64), c[1] / (3.0 * m as f64));
                    let x: Vec<f64> = (0..y.len()).map(|k| p[0][k] + s * (p[1][k] - p[0][k]) + t2 * (p[2][k] - p[0][k])).collect();
                    if dist(&x) < r {
                        inside += 1;
                    }
                }
            }
        }
        area += a * inside as f64 / (m * m) as f64;
    }
    Ok(area / (r * r))
}

/// Mean curvature vector H_F = Δ_{g_F} F from the cotangent Laplacian of the
/// induced metric; returns the largest vertex norm.
pub fn mean_curvature_sup(mesh: &SurfaceMesh, f: &SphereValuedMap) -> Result<f64> {
    let n = mesh.n_vertices();
    let d = f.ambient_dim();
    let mut lap = vec![vec![0.0; d]; n];
    let mut area = vec![0.0; n];
    for (ti, t) in mesh.triangles.iter().enumerate() {
        let p = image_triangle(f, t);
        let a = tri_area_n(&p);
        // cotangents in the induced metric from the image edge vectors
        let mut cot = [0.0; 3];
        for c in 0..3 {
            let e1: Vec<f64> = p[(c + 1) % 3].iter().zip(&p[c]).map(|(x, y)| x - y).collect();
            let e2: Vec<f64> = p[(c + 2) % 3].iter().zip(&p[c]).map(|(x, y)| x - y).collect();
            if !(a > 0.0) {
                return Err(Error::DegenerateTriangle { triangle: ti, area: a });
            }
            cot[c] = dotn(&e1, &e2) / (2.0 * a);
        }
        for c in 0..3 {
            let (i, j) = (t[(c + 1) % 3], t[(c + 2) % 3]);
            for k in 0..d {
                let diff = f.components[k][j] - f.components[k][i];
                lap[i][k] += 0.5 * cot[c] * diff;
                lap[j][k] -= 0.5 * cot[c] * diff;
            }
        }
        for &v in t {
            area[v] += a / 3.0;
        }
    }
    Ok((0..n).map(|i| normn(&lap[i]) / area[i]).fold(0.0, f64::max))
}

// keep the flat cotangent helper referenced for callers needing background geometry
#[allow(dead_code)]
fn _background_cotangents(mesh: &SurfaceMesh) -> Vec<Option<[f64; 3]>> {
    mesh.tri_pos.iter().map(corner_cotangents).collect()
}

// ---------------------------------------------------------------------------
// Closed-form surfaces and the Möbius area limit

/// Immersions given in closed form on a parameter rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnalyticSurface {
    /// Φ_{c,d} on the lattice cell, parametrized by (s, t) ↦ (s + ct, dt).
    TorusEigenmap { c: f64, d: f64 },
    /// The equilateral torus in S⁵.
    EquilateralS5,
    /// Identity of S² in spherical coordinates.
    RoundSphere,
}

impl AnalyticSurface {
    pub fn clifford() -> Self {
        AnalyticSurface::TorusEigenmap { c: 0.0, d: 1.0 }
    }

    pub fn domain(&self) -> [f64; 4] {
        match self {
            AnalyticSurface::RoundSphere => [0.0, std::f64::consts::PI, 0.0, 2.0 * std::f64::consts::PI],
            _ => [0.0, 1.0, 0.0, 1.0],
        }
    }

    pub fn eval(&self, s: f64, t: f64) -> Vec<f64> {
        match *self {
            AnalyticSurface::TorusEigenmap { c, d } => torus_eigenmap_eval(c, d, s + c * t, d * t).to_vec(),
            AnalyticSurface::EquilateralS5 => {
                let l = crate::mesh::LatticeSpec::equilateral();
                equilateral_s5_eval(s + l.c * t, l.d * t).to_vec()
            }
            AnalyticSurface::RoundSphere => vec![s.sin() * t.cos(), s.sin() * t.sin(), s.cos()],
        }
    }

    /// Area element |F_s ∧ F_t| in closed form: the torus maps have constant
    /// area element (2π² for every Φ_{c,d}, 4π²/√3 for the S⁵ torus).
    pub fn area_element(&self, s: f64, _t: f64) -> f64 {
        match self {
            AnalyticSurface::TorusEigenmap { .. } => 2.0 * std::f64::consts::PI.powi(2),
            AnalyticSurface::EquilateralS5 => 4.0 * std::f64::consts::PI.powi(2) / 3f64.sqrt(),
            AnalyticSurface::RoundSphere => s.sin(),
        }
    }

    /// |F_s ∧ F_t| by central differences, for checking [`Self::area_element`].
    pub fn area_element_fd(&self, s: f64, t: f64) -> f64 {
        let h = 1e-6;
        let fs: Vec<f64> = self.eval(s + h, t).iter().zip(self.eval(s - h, t)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let ft: Vec<f64> = self.eval(s, t + h).iter().zip(self.eval(s, t - h)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let (a, b, c) = (dotn(&fs, &fs), dotn(&ft, &ft), dotn(&fs, &ft));
        (a * b - c * c).max(0.0).sqrt()
    }

    /// Area(G_a ∘ F) = ∫ (1 − |a|²)²/|F + a|⁴ dA_F by adaptive quadrature.
    pub fn moebius_area(&self, a: &[f64], tol: f64) -> f64 {
        let a2 = dotn(a, a);
        let g = |s: f64, t: f64| {
            let f = self.eval(s, t);
            let fa: f64 = f.iter().zip(a).map(|(x, y)| (x + y) * (x + y)).sum();
            (1.0 - a2).powi(2) / (fa * fa) * self.area_element(s, t)
        };
        let [x0, x1, y0, y1] = self.domain();
        integrate_rect_adaptive(&g, x0, x1, y0, y1, tol, 16)
    }

    pub fn area(&self) -> f64 {
        let g = |s: f64, t: f64| self.area_element(s, t);
        let [x0, x1, y0, y1] = self.domain();
        integrate_rect_adaptive(&g, x0, x1, y0, y1, 1e-10, 8)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaLimitSample {
    pub t: f64,
    pub area: f64,
    pub delta: f64,
    pub lower: f64,
    pub upper: f64,
    pub inside: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaLimitReport {
    pub samples: Vec<AreaLimitSample>,
    pub extrapolated: f64,
    /// 4Θ_F(−α, 0).
    pub four_theta: f64,
    pub mean_curvature_sup: f64,
    pub conclusive: bool,
}

pub const AREA_LIMIT_TS: [f64; 4] = [0.9, 0.95, 0.99, 0.995];

/// Polynomial (Neville) extrapolation of samples (x_i, y_i) to x = 0.
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    // returns the diagonal of the tableau: extrapolants using 1, 2, … points
    let n = xs.len();
    let mut p = ys.to_vec();
    let mut diag = vec![p[n - 1]];
    for k in 1..n {
        for i in (k..n).rev() {
            p[i] = (xs[i] * p[i - 1] - xs[i - k] * p[i]) / (xs[i] - xs[i - k]);
        }
        diag.push(p[n - 1]);
    }
    diag
}

/// Sample Area(G_{tα} ∘ F) as t → 1, extrapolate, and check every sample
/// against the two-sided bounds for the canonical family near the boundary.
///
/// `theta0` is Θ_F(−α, 0), `theta` evaluates Θ_F(−α, r) (typically
/// [`area_density`] on a fine mesh) and `h_sup` is ‖H_F‖_∞.
pub fn moebius_area_limit<T: Fn(&[f64], f64) -> f64>(
    surface: &AnalyticSurface,
    alpha: &[f64],
    ts: &[f64],
    theta0: f64,
    theta: T,
    h_sup: f64,
) -> Result<AreaLimitReport> {
    let an = normn(alpha);
    if (an - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("direction α must be a unit vector".into()));
    }
    let area_f = surface.area();
    // the bounds are centered at −a/|a| = −α
    let y: Vec<f64> = alpha.iter().map(|x| -x).collect();
    let mut samples = Vec::new();
    for &t in ts {
        let a: Vec<f64> = alpha.iter().map(|x| t * x).collect();
        let area = surface.moebius_area(&a, 1e-9 * area_f);
        let delta = (1.0 - t).cbrt() * (1.0 + 1e-9);
        let e = (h_sup * delta).exp();
        let e2 = (2.0 * h_sup).exp();
        let am = t;
        let k = (1.0 + am).powi(2) / am;
        let lower = k * theta0 / e
            - 2.0 * (1.0 - am * am).powi(2) * theta0 / (e * am * am * delta * delta)
            - (4.0 + delta * delta * e2) * delta * delta / (am * am) * area_f;
        let upper = k * e * theta(&y, delta) + 4.0 * (1.0 + delta * delta * e2) * delta * delta / (am * am) * area_f;
        samples.push(AreaLimitSample { t, area, delta, lower, upper, inside: lower <= area && area <= upper });
    }
    let xs: Vec<f64> = samples.iter().map(|s| 1.0 - s.t).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.area).collect();
    let diag = neville_at_zero(&xs, &ys);
    let extrapolated = *diag.last().unwrap();
    let prev = diag[diag.len() - 2];
    let conclusive = extrapolated.is_finite() && ((extrapolated - prev) / extrapolated).abs() < 0.03;
    let _ = moebius_n; // G_a enters through the closed-form area weight
    Ok(AreaLimitReport { samples, extrapolated, four_theta: 4.0 * theta0, mean_curvature_sup: h_sup, conclusive })
}
