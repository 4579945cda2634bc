//! Weak norms of signed measures: the discrete W^{-1,2} norm, dictionary lower
//! bounds for (C⁰∩W^{1,2})* and (C¹)*, the L²(LogL)^{-1/2} Luxemburg norm with
//! its dual bound, and exact quadratic Wasserstein distances for small atomic
//! measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_background_mass, assemble_stiffness, local_stiffness};
use crate::geom::{self, dotn, Vec3};
use crate::measure::MeasureOnMesh;
use crate::mesh::{SurfaceMesh, Topology};
use crate::quadrature::TRI7;
use crate::sparse::{Cholesky, SparseOperator};

/// A signed measure seen through the hat basis: m_i = ∫ φ_i d(μ − ν).
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasureFunctional {
    pub m: Vec<f64>,
}

impl SignedMeasureFunctional {
    pub fn new(m: Vec<f64>) -> Self {
        SignedMeasureFunctional { m }
    }

    pub fn difference(mesh: &SurfaceMesh, mu: &MeasureOnMesh, nu: &MeasureOnMesh) -> Result<Self> {
        mu.validate(mesh)?;
        nu.validate(mesh)?;
        let a = mu.hat_pairings(mesh);
        let b = nu.hat_pairings(mesh);
        Ok(SignedMeasureFunctional { m: a.iter().zip(&b).map(|(x, y)| x - y).collect() })
    }

    /// μ − dv_g for the background area measure.
    pub fn against_area(mesh: &SurfaceMesh, mu: &MeasureOnMesh) -> Result<Self> {
        Self::difference(mesh, mu, &MeasureOnMesh::uniform(mesh))
    }

    /// Pairing with the constant function 1, i.e. μ(M) − ν(M).
    pub fn total(&self) -> f64 {
        self.m.iter().sum()
    }

    pub fn pair(&self, f: &[f64]) -> f64 {
        dotn(&self.m, f)
    }

    pub fn scaled(&self, s: f64) -> Self {
        SignedMeasureFunctional { m: self.m.iter().map(|x| s * x).collect() }
    }

    pub fn plus(&self, other: &Self) -> Self {
        SignedMeasureFunctional { m: self.m.iter().zip(&other.m).map(|(a, b)| a + b).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundType {
    Exact,
    Lower,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub norm_name: String,
    pub value: f64,
    pub bound_type: BoundType,
    pub dictionary_spec: String,
}

/// Background operators and the factorization of K + M_g, shared by all norms.
pub struct SobolevContext<'a> {
    pub mesh: &'a SurfaceMesh,
    pub k: SparseOperator,
    pub m_g: SparseOperator,
    chol: Cholesky,
}

impl<'a> SobolevContext<'a> {
    pub fn new(mesh: &'a SurfaceMesh) -> Result<Self> {
        let k = assemble_stiffness(mesh)?;
        let m_g = assemble_background_mass(mesh)?;
        let chol = Cholesky::new(&SparseOperator::linear_combination(1.0, &k, 1.0, &m_g))?;
        Ok(SobolevContext { mesh, k, m_g, chol })
    }

    fn check(&self, m: &SignedMeasureFunctional) -> Result<()> {
        if m.m.len() != self.mesh.n_vertices() {
            return Err(Error::InvalidInput(format!(
                "functional has {} entries, mesh has {} vertices",
                m.m.len(),
                self.mesh.n_vertices()
            )));
        }
        Ok(())
    }

    /// The maximizer f* = (K + M_g)⁻¹ m.
    pub fn riesz(&self, m: &SignedMeasureFunctional) -> Result<Vec<f64>> {
        self.check(m)?;
        let f = self.chol.solve(&m.m);
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("W^{1,2} Riesz solve produced non-finite values".into()));
        }
        Ok(f)
    }

    /// √(mᵀ(K + M_g)⁻¹m).
    pub fn w_minus12_norm(&self, m: &SignedMeasureFunctional) -> Result<f64> {
        let f = self.riesz(m)?;
        Ok(dotn(&m.m, &f).max(0.0).sqrt())
    }

    /// |⟨m, f*⟩ − ‖f*‖²_{W^{1,2}}| / ⟨m, f*⟩ for the Riesz representative.
    pub fn duality_residual(&self, m: &SignedMeasureFunctional) -> Result<f64> {
        let f = self.riesz(m)?;
        let pair = dotn(&m.m, &f);
        let norm2 = self.k.quad_form(&f) + self.m_g.quad_form(&f);
        if pair == 0.0 {
            return Ok(norm2.abs());
        }
        Ok((pair - norm2).abs() / pair.abs())
    }

    pub fn w_minus12_report(&self, m: &SignedMeasureFunctional) -> Result<NormReport> {
        Ok(NormReport {
            norm_name: "W^{-1,2}".into(),
            value: self.w_minus12_norm(m)?,
            bound_type: BoundType::Exact,
            dictionary_spec: "finite-element dual of ‖f‖² = fᵀ(K+M)f".into(),
        })
    }

    /// ‖ψ‖_{C⁰∩W^{1,2}} = √(‖ψ‖²_∞ + ‖dψ‖²_{L²}) of a piecewise-linear ψ.
    pub fn c0w12_norm(&self, psi: &[f64]) -> f64 {
        let sup = psi.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        (sup * sup + self.k.quad_form(psi).max(0.0)).sqrt()
    }

    /// max over ψ in the dictionary of |⟨m, ψ⟩| / ‖ψ‖_{C⁰∩W^{1,2}}.
    pub fn dual_c0w12_norm_lb(&self, m: &SignedMeasureFunctional, dict: &Dictionary) -> Result<NormReport> {
        self.check(m)?;
        if dict.functions.is_empty() {
            return Err(Error::InvalidInput("empty dictionary".into()));
        }
        let value = dict
            .functions
            .iter()
            .map(|psi| {
                let n = self.c0w12_norm(psi);
                if n > 0.0 {
                    m.pair(psi).abs() / n
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        Ok(NormReport {
            norm_name: "(C^0 ∩ W^{1,2})*".into(),
            value,
            bound_type: BoundType::Lower,
            dictionary_spec: dict.spec.clone(),
        })
    }

    /// Constant c with dual_c0w12_norm_lb ≤ c·w_minus12_norm for every m:
    /// ‖ψ‖²_{W^{1,2}} ≤ Area‖ψ‖²_∞ + ‖dψ‖² ≤ max(1, Area)‖ψ‖²_{C⁰∩W^{1,2}}.
    pub fn c0w12_consistency_constant(&self) -> f64 {
        self.mesh.total_area().max(1.0).sqrt()
    }
}

/// A named family of test functions given by vertex values.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub spec: String,
    pub functions: Vec<Vec<f64>>,
}

impl Dictionary {
    pub fn extend(mut self, other: Dictionary) -> Dictionary {
        self.spec = format!("{} + {}", self.spec, other.spec);
        self.functions.extend(other.functions);
        self
    }
}

/// Legendre polynomials P_0..P_L and their derivatives at t.
pub fn legendre_with_derivative(l_max: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; l_max + 1];
    let mut dp = vec![0.0; l_max + 1];
    p[0] = 1.0;
    if l_max >= 1 {
        p[1] = t;
        dp[1] = 1.0;
    }
    for l in 2..=l_max {
        let lf = l as f64;
        p[l] = ((2.0 * lf - 1.0) * t * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
        dp[l] = dp[l - 2] + (2.0 * lf - 1.0) * p[l - 1];
    }
    (p, dp)
}

/// Geodesic distance between vertex i and a point (unit direction on the
/// sphere, lattice coordinates on the torus).
fn geodesic_to(mesh: &SurfaceMesh, i: usize, c: Vec3) -> f64 {
    let v = mesh.vertices[i];
    match mesh.topology {
        Topology::Sphere => mesh.radius() * geom::angle(v, c),
        Topology::Torus => {
            let l = mesh.lattice.expect("torus mesh carries its lattice");
            let (dx0, dy0) = (v[0] - c[0], v[1] - c[1]);
            let mut best = f64::INFINITY;
            // reduce along e₂ = (c, d) then e₁ = (1, 0)
            let k2 = (dy0 / l.d).round();
            for a in -1..=1 {
                let q = k2 + a as f64;
                let (x, y) = (dx0 - q * l.c, dy0 - q * l.d);
                let k1 = x.round();
                for b in -1..=1 {
                    let xx = x - (k1 + b as f64);
                    best = best.min((xx * xx + y * y).sqrt());
                }
            }
            best * mesh.scale
        }
    }
}

/// Centers for dictionaries: ± coordinate axes on the sphere (the cell
/// origin on the torus) plus the vertices where |m_i|/A_i is largest.
pub fn default_centers(mesh: &SurfaceMesh, m: &SignedMeasureFunctional, extra: usize) -> Vec<Vec3> {
    let mut centers: Vec<Vec3> = match mesh.topology {
        Topology::Sphere => vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ],
        Topology::Torus => vec![[0.0, 0.0, 0.0]],
    };
    let mut idx: Vec<usize> = (0..mesh.n_vertices()).collect();
    let score = |i: usize| (m.m[i] / mesh.vertex_areas[i]).abs();
    idx.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap_or(std::cmp::Ordering::Equal));
    for &i in idx.iter().take(extra) {
        centers.push(mesh.vertices[i]);
    }
    centers
}

/// Zonal harmonics P_l(⟨x, c⟩), 0 ≤ l ≤ L, about each center (sphere), or
/// lattice Fourier modes with |p|, |q| ≤ L/2 (torus).
pub fn harmonic_dictionary(mesh: &SurfaceMesh, centers: &[Vec3], l_max: usize) -> Dictionary {
    let mut functions = Vec::new();
    match mesh.topology {
        Topology::Sphere => {
            for c in centers {
                let vals: Vec<Vec<f64>> =
                    mesh.vertices.iter().map(|v| legendre_with_derivative(l_max, geom::dot(*v, *c)).0).collect();
                for l in 0..=l_max {
                    functions.push(vals.iter().map(|p| p[l]).collect());
                }
            }
            Dictionary { spec: format!("zonal harmonics l ≤ {l_max} about {} centers", centers.len()), functions }
        }
        Topology::Torus => {
            let l = mesh.lattice.expect("torus mesh carries its lattice");
            let r = (l_max / 2) as i64;
            for p in -r..=r {
                for q in -r..=r {
                    if (p, q) < (0, 0) {
                        continue;
                    }
                    let xi = [p as f64, (q as f64 - p as f64 * l.c) / l.d];
                    let phase: Vec<f64> =
                        mesh.vertices.iter().map(|v| 2.0 * std::f64::consts::PI * (xi[0] * v[0] + xi[1] * v[1])).collect();
                    functions.push(phase.iter().map(|t| t.cos()).collect());
                    if (p, q) != (0, 0) {
                        functions.push(phase.iter().map(|t| t.sin()).collect());
                    }
                }
            }
            Dictionary { spec: format!("lattice Fourier modes |p|,|q| ≤ {r}"), functions }
        }
    }
}

/// Smooth bumps (1 − (d/r)²)²₊ of geodesic radius r about each center.
pub fn bump_dictionary(mesh: &SurfaceMesh, centers: &[Vec3], radii: &[f64]) -> Dictionary {
    let mut functions = Vec::new();
    for c in centers {
        let d: Vec<f64> = (0..mesh.n_vertices()).map(|i| geodesic_to(mesh, i, *c)).collect();
        for &r in radii {
            functions.push(d.iter().map(|x| (1.0 - (x / r).powi(2)).max(0.0).powi(2)).collect());
        }
    }
    Dictionary { spec: format!("bumps radii {radii:?} about {} centers", centers.len()), functions }
}

/// Default dictionary: harmonics to degree L plus bumps at a ladder of radii.
pub fn default_dictionary(mesh: &SurfaceMesh, m: &SignedMeasureFunctional, l_max: usize) -> Dictionary {
    let centers = default_centers(mesh, m, 3);
    let size = mesh.total_area().sqrt();
    let h = (mesh.total_area() / mesh.n_triangles() as f64).sqrt();
    let mut radii = Vec::new();
    let mut r = 2.0 * h;
    while r < 0.6 * size {
        radii.push(r);
        r *= 2.0;
    }
    harmonic_dictionary(mesh, &centers, l_max).extend(bump_dictionary(mesh, &centers, &radii))
}

/// sup_θ |P_l'(cos θ)| sin θ on a fine grid, inflated slightly to stay an upper bound.
fn legendre_gradient_sup(l: usize) -> f64 {
    if l == 0 {
        return 0.0;
    }
    let n = 20_000;
    let mut best: f64 = 0.0;
    for k in 0..=n {
        let th = std::f64::consts::PI * k as f64 / n as f64;
        let (_, dp) = legendre_with_derivative(l, th.cos());
        best = best.max((dp[l] * th.sin()).abs());
    }
    best * (1.0 + 1e-5)
}

/// Lower bound on ‖m‖_{(C¹)*} from zonal harmonics of degree ≤ L about the
/// given centers; ‖ψ‖_{C¹} = sup|ψ| + sup|∇ψ| with sup|P_l| = 1.
pub fn dual_c1_norm_lb(mesh: &SurfaceMesh, m: &SignedMeasureFunctional, l_max: usize, centers: &[Vec3]) -> Result<NormReport> {
    if mesh.topology != Topology::Sphere {
        return Err(Error::UnsupportedTopology("(C¹)* bound uses spherical harmonics".into()));
    }
    if m.m.len() != mesh.n_vertices() {
        return Err(Error::InvalidInput("functional and mesh sizes differ".into()));
    }
    let r = mesh.radius();
    let c1: Vec<f64> = (0..=l_max).map(|l| 1.0 + legendre_gradient_sup(l) / r).collect();
    let mut value: f64 = 0.0;
    for c in centers {
        let vals: Vec<Vec<f64>> = mesh.vertices.iter().map(|v| legendre_with_derivative(l_max, geom::dot(*v, *c)).0).collect();
        for l in 0..=l_max {
            let psi: Vec<f64> = vals.iter().map(|p| p[l]).collect();
            value = value.max(m.pair(&psi).abs() / c1[l]);
        }
    }
    Ok(NormReport {
        norm_name: "(C^1)*".into(),
        value,
        bound_type: BoundType::Lower,
        dictionary_spec: format!("zonal harmonics l ≤ {l_max} about {} centers", centers.len()),
    })
}

// ---------------------------------------------------------------------------
// L²(LogL)^{-1/2}

fn young(s: f64) -> f64 {
    s * s / (2.0 + s).ln()
}

/// Quadrature samples (|value|, weight) of a function on the mesh.
pub struct OrliczSamples {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl OrliczSamples {
    /// Piecewise-linear f sampled with the 7-point triangle rule.
    pub fn of_function(mesh: &SurfaceMesh, f: &[f64]) -> Self {
        let mut values = Vec::with_capacity(7 * mesh.n_triangles());
        let mut weights = Vec::with_capacity(values.capacity());
        for (t, a) in mesh.triangles.iter().zip(&mesh.tri_areas) {
            for (b, w) in TRI7.iter() {
                values.push((b[0] * f[t[0]] + b[1] * f[t[1]] + b[2] * f[t[2]]).abs());
                weights.push(w * a);
            }
        }
        OrliczSamples { values, weights }.compact()
    }

    /// |df| of a piecewise-linear f, exact per triangle.
    pub fn of_gradient(mesh: &SurfaceMesh, f: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(mesh.n_triangles());
        for (ti, (t, a)) in mesh.triangles.iter().zip(&mesh.tri_areas).enumerate() {
            let ks = local_stiffness(&mesh.tri_pos[ti]).ok_or(Error::DegenerateTriangle { triangle: ti, area: *a })?;
            let mut e = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    e += f[t[i]] * ks[i][j] * f[t[j]];
                }
            }
            values.push((e.max(0.0) / a).sqrt());
        }
        Ok(OrliczSamples { values, weights: mesh.tri_areas.clone() }.compact())
    }

    /// Zero samples do not contribute to the modular; dropping them keeps the
    /// bisection cheap for localized functions.
    fn compact(mut self) -> Self {
        let keep: Vec<bool> = self.values.iter().map(|v| *v != 0.0).collect();
        let mut k = keep.iter();
        self.values.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.weights.retain(|_| *k.next().unwrap());
        self
    }

    fn functional(&self, eta: f64) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| w * young(v / eta)).sum()
    }

    fn l2(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }

    /// Luxemburg norm inf{η : ∫ Φ(|f|/η) ≤ 1}, Φ(s) = s²/log(2 + s).
    pub fn luxemburg(&self) -> f64 {
        let l2 = self.l2();
        if l2 == 0.0 {
            return 0.0;
        }
        let mut lo = l2 / (2f64.ln() + 10.0).sqrt();
        let mut hi = 10.0 * l2;
        while self.functional(lo) <= 1.0 {
            lo *= 0.5;
        }
        while self.functional(hi) > 1.0 {
            hi *= 2.0;
        }
        while (hi - lo) > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if self.functional(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// ‖f‖_{L²(LogL)^{-1/2}}.
pub fn orlicz_norm(mesh: &SurfaceMesh, f: &[f64]) -> f64 {
    OrliczSamples::of_function(mesh, f).luxemburg()
}

/// ‖f‖_{W^{1,2,-1/2}} = ‖f‖_{L²(LogL)^{-1/2}} + ‖df‖_{L²(LogL)^{-1/2}}.
pub fn orlicz_sobolev_norm(mesh: &SurfaceMesh, f: &[f64]) -> Result<f64> {
    Ok(orlicz_norm(mesh, f) + OrliczSamples::of_gradient(mesh, f)?.luxemburg())
}

/// Concentrated logarithmic profiles about a center: 1 + (δ² − d²)/(2δ² log(R/δ))
/// inside d < δ, log(R/d)/log(R/δ) for δ ≤ d ≤ R, 0 beyond.
pub fn log_profile(mesh: &SurfaceMesh, center: Vec3, delta: f64, outer: f64) -> Vec<f64> {
    let ln = (outer / delta).ln();
    (0..mesh.n_vertices())
        .map(|i| {
            let d = geodesic_to(mesh, i, center);
            if d < delta {
                1.0 + (delta * delta - d * d) / (2.0 * delta * delta * ln)
            } else if d < outer {
                (outer / d).ln() / ln
            } else {
                0.0
            }
        })
        .collect()
}

/// Lower bound sup_φ ∫φ² dm / ‖φ²‖_{W^{1,2,-1/2}} over logarithmic profiles
/// about the default centers at dyadic inner radii.
pub fn orlicz_dual_lb(mesh: &SurfaceMesh, m: &SignedMeasureFunctional) -> Result<NormReport> {
    let centers = default_centers(mesh, m, 2);
    let size = mesh.total_area().sqrt();
    let h = (mesh.total_area() / mesh.n_triangles() as f64).sqrt();
    let outers = [0.25 * size, 0.45 * size];
    let mut deltas = Vec::new();
    let mut d = 0.5 * h;
    while d < 0.225 * size {
        deltas.push(d);
        d *= 2.0;
    }
    orlicz_dual_lb_with(mesh, m, &centers, &deltas, &outers)
}

/// Squared logarithmic profiles φ² with their W^{1,2,-1/2} norms, reusable
/// across functionals on the same mesh.
pub struct OrliczProfiles {
    profiles: Vec<(Vec<f64>, f64)>,
}

impl OrliczProfiles {
    /// Profiles about each center for every inner radius δ and outer radius R with δ < R.
    pub fn new(mesh: &SurfaceMesh, centers: &[Vec3], deltas: &[f64], outers: &[f64]) -> Result<Self> {
        let mut profiles = Vec::new();
        for c in centers {
            for &outer in outers {
                for &delta in deltas.iter().filter(|&&d| d > 0.0 && d < outer) {
                    let phi2: Vec<f64> = log_profile(mesh, *c, delta, outer).iter().map(|x| x * x).collect();
                    let n = orlicz_sobolev_norm(mesh, &phi2)?;
                    profiles.push((phi2, n));
                }
            }
        }
        Ok(OrliczProfiles { profiles })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn dual_lb(&self, m: &SignedMeasureFunctional) -> Result<NormReport> {
        let mut value: f64 = 0.0;
        for (phi2, n) in &self.profiles {
            if phi2.len() != m.m.len() {
                return Err(Error::InvalidInput("functional and mesh sizes differ".into()));
            }
            if *n > 0.0 {
                value = value.max(m.pair(phi2) / n);
            }
        }
        Ok(NormReport {
            norm_name: "(W^{1,2,-1/2})*".into(),
            value,
            bound_type: BoundType::Lower,
            dictionary_spec: format!("{} squared logarithmic profiles", self.profiles.len()),
        })
    }
}

/// Same bound over an explicit candidate family, see [`OrliczProfiles::new`].
pub fn orlicz_dual_lb_with(
    mesh: &SurfaceMesh,
    m: &SignedMeasureFunctional,
    centers: &[Vec3],
    deltas: &[f64],
    outers: &[f64],
) -> Result<NormReport> {
    if m.m.len() != mesh.n_vertices() {
        return Err(Error::InvalidInput("functional and mesh sizes differ".into()));
    }
    OrliczProfiles::new(mesh, centers, deltas, outers)?.dual_lb(m)
}

// ---------------------------------------------------------------------------
// Quadratic Wasserstein distance for small atomic measures

pub const MAX_TRANSPORT_POINTS: usize = 400;

/// Minimal transport cost Σ c_ij π_ij between weights a and b of equal mass,
/// by successive shortest paths with Dijkstra on reduced costs.
pub fn optimal_transport_cost(cost: &[Vec<f64>], a: &[f64], b: &[f64]) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("empty measure".into()));
    }
    if n > MAX_TRANSPORT_POINTS || m > MAX_TRANSPORT_POINTS {
        return Err(Error::Capacity(format!("transport supports at most {MAX_TRANSPORT_POINTS} points per side, got {n} and {m}")));
    }
    if cost.len() != n || cost.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidInput("cost matrix shape".into()));
    }
    if a.iter().chain(b).any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidInput("weights must be nonnegative".into()));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(sb) {
        return Err(Error::InvalidInput(format!("masses differ: {sa} vs {sb}")));
    }
    // nodes: 0 = source, 1..=n supplies, n+1..=n+m demands, n+m+1 = sink
    let v = n + m + 2;
    let sink = v - 1;
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![vec![0.0; m]; n];
    let mut pot = vec![0.0; v];
    let eps = 1e-15 * sa.max(1e-300);
    let mut sent = 0.0;
    let mut guard = 0usize;
    while sent < sa - 1e-13 * sa {
        guard += 1;
        if guard > 100 * (n + m) + 1000 {
            return Err(Error::Numeric("transport did not terminate".into()));
        }
        let mut dist = vec![f64::INFINITY; v];
        let mut prev = vec![usize::MAX; v];
        let mut done = vec![false; v];
        dist[0] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for x in 0..v {
                if !done[x] && dist[x] < best {
                    best = dist[x];
                    u = x;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            // reduced costs can round slightly negative; never reopen a settled node
            let relax = |to: usize, c: f64, dist: &mut Vec<f64>, prev: &mut Vec<usize>| {
                if done[to] {
                    return;
                }
                let nd = dist[u] + c + pot[u] - pot[to];
                if nd < dist[to] {
                    dist[to] = nd;
                    prev[to] = u;
                }
            };
            if u == 0 {
                for i in 0..n {
                    if supply[i] > eps {
                        relax(1 + i, 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u <= n {
                let i = u - 1;
                for j in 0..m {
                    relax(n + 1 + j, cost[i][j], &mut dist, &mut prev);
                }
            } else if u < sink {
                let j = u - n - 1;
                if demand[j] > eps {
                    relax(sink, 0.0, &mut dist, &mut prev);
                }
                for i in 0..n {
                    if flow[i][j] > eps {
                        relax(1 + i, -cost[i][j], &mut dist, &mut prev);
                    }
                }
            }
        }
        if !dist[sink].is_finite() {
            return Err(Error::Numeric("no augmenting path while mass remains".into()));
        }
        for x in 0..v {
            if dist[x].is_finite() {
                pot[x] += dist[x];
            }
        }
        // bottleneck
        let mut path = vec![sink];
        let mut x = sink;
        while x != 0 {
            x = prev[x];
            path.push(x);
            if path.len() > v {
                return Err(Error::Numeric("cycle in transport shortest-path tree".into()));
            }
        }
        path.reverse();
        let mut amt = f64::INFINITY;
        for w in path.windows(2) {
            let (p, q) = (w[0], w[1]);
            let cap = if p == 0 {
                supply[q - 1]
            } else if q == sink {
                demand[p - n - 1]
            } else if p <= n {
                f64::INFINITY
            } else {
                flow[q - 1][p - n - 1]
            };
            amt = amt.min(cap);
        }
        for w in path.windows(2) {
            let (p, q) = (w[0], w[1]);
            if p == 0 {
                supply[q - 1] -= amt;
            } else if q == sink {
                demand[p - n - 1] -= amt;
            } else if p <= n {
                flow[p - 1][q - n - 1] += amt;
            } else {
                flow[q - 1][p - n - 1] -= amt;
            }
        }
        sent += amt;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            total += flow[i][j].max(0.0) * cost[i][j];
        }
    }
    Ok(total)
}

/// W₂ between atomic measures on the round sphere of the given radius, with
/// squared geodesic cost; points are given as directions.
pub fn wasserstein2_exact_small(x: &[Vec3], a: &[f64], y: &[Vec3], b: &[f64], radius: f64) -> Result<f64> {
    if x.len() != a.len() || y.len() != b.len() {
        return Err(Error::InvalidInput("points and weights differ in length".into()));
    }
    let cost: Vec<Vec<f64>> = x
        .iter()
        .map(|p| y.iter().map(|q| (radius * geom::angle(geom::normalize(*p), geom::normalize(*q))).powi(2)).collect())
        .collect();
    Ok(optimal_transport_cost(&cost, a, b)?.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_icosphere;

    #[test]
    fn legendre_derivatives_match_finite_differences() {
        for t in [-0.7, 0.1, 0.93] {
            let (p, dp) = legendre_with_derivative(8, t);
            let (pp, _) = legendre_with_derivative(8, t + 1e-6);
            let (pm, _) = legendre_with_derivative(8, t - 1e-6);
            for l in 0..=8 {
                assert!((dp[l] - (pp[l] - pm[l]) / 2e-6).abs() < 1e-6);
            }
            assert!((p[2] - 0.5 * (3.0 * t * t - 1.0)).abs() < 1e-14);
        }
        // sup sinθ|P₁'| = 1
        assert!((legendre_gradient_sup(1) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn transport_of_single_atoms_is_distance() {
        let w = wasserstein2_exact_small(&[[0.0, 0.0, 1.0]], &[1.0], &[[1.0, 0.0, 0.0]], &[1.0], 1.0).unwrap();
        assert!((w - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn zero_functional_has_zero_norms() {
        let mesh = build_icosphere(2).unwrap();
        let ctx = SobolevContext::new(&mesh).unwrap();
        let m = SignedMeasureFunctional::new(vec![0.0; mesh.n_vertices()]);
        assert_eq!(ctx.w_minus12_norm(&m).unwrap(), 0.0);
        assert_eq!(ctx.dual_c0w12_norm_lb(&m, &default_dictionary(&mesh, &m, 4)).unwrap().value, 0.0);
        assert_eq!(orlicz_norm(&mesh, &vec![0.0; mesh.n_vertices()]), 0.0);
    }
}
