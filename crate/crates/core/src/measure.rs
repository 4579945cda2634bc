//! Measures on meshes: a piecewise-linear density with respect to the
//! background area plus point masses pinned to vertices.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::locate::SphereLocator;
use crate::mesh::{SurfaceMesh, Topology};
use crate::moebius::{apply_moebius, MoebiusParam};
use crate::quadrature::TRI7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    UnitMass,
    FirstEigenvalueTwo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub vertex: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureOnMesh {
    pub density: Vec<f64>,
    pub atoms: Vec<Atom>,
    pub normalization: Normalization,
}

impl MeasureOnMesh {
    pub fn uniform(mesh: &SurfaceMesh) -> Self {
        Self::from_density(vec![1.0; mesh.n_vertices()])
    }

    pub fn from_density(density: Vec<f64>) -> Self {
        MeasureOnMesh { density, atoms: Vec::new(), normalization: Normalization::None }
    }

    pub fn with_atom(mut self, vertex: usize, weight: f64) -> Self {
        self.atoms.push(Atom { vertex, weight });
        self
    }

    pub fn validate(&self, mesh: &SurfaceMesh) -> Result<()> {
        if self.density.len() != mesh.n_vertices() {
            return Err(Error::InvalidInput(format!(
                "density has {} values for a mesh with {} vertices",
                self.density.len(),
                mesh.n_vertices()
            )));
        }
        if let Some(i) = self.density.iter().position(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidInput(format!("density at vertex {i} is negative or not finite")));
        }
        for a in &self.atoms {
            if a.vertex >= mesh.n_vertices() {
                return Err(Error::InvalidInput(format!("atom at missing vertex {}", a.vertex)));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidInput(format!("atom weight {} must be positive", a.weight)));
            }
        }
        if !(self.total_mass(mesh)? > 0.0) {
            return Err(Error::InvalidInput("measure has zero total mass".into()));
        }
        Ok(())
    }

    /// μ(M): exact integral of the piecewise-linear density plus the atoms.
    pub fn total_mass(&self, mesh: &SurfaceMesh) -> Result<f64> {
        if self.density.len() != mesh.n_vertices() {
            return Err(Error::InvalidInput(format!(
                "density has {} values for a mesh with {} vertices",
                self.density.len(),
                mesh.n_vertices()
            )));
        }
        let dens: f64 = mesh
            .triangles
            .iter()
            .zip(&mesh.tri_areas)
            .map(|(t, a)| a * (self.density[t[0]] + self.density[t[1]] + self.density[t[2]]) / 3.0)
            .sum();
        Ok(dens + self.atoms.iter().map(|a| a.weight).sum::<f64>())
    }

    pub fn scaled(&self, c: f64) -> Self {
        MeasureOnMesh {
            density: self.density.iter().map(|d| d * c).collect(),
            atoms: self.atoms.iter().map(|a| Atom { vertex: a.vertex, weight: a.weight * c }).collect(),
            normalization: Normalization::None,
        }
    }

    pub fn normalized_unit_mass(&self, mesh: &SurfaceMesh) -> Result<Self> {
        let m = self.total_mass(mesh)?;
        let mut out = self.scaled(1.0 / m);
        out.normalization = Normalization::UnitMass;
        Ok(out)
    }

    /// Pairing vector m_i = ∫ φ_i dμ against the hat basis.
    pub fn hat_pairings(&self, mesh: &SurfaceMesh) -> Vec<f64> {
        let mut m = vec![0.0; mesh.n_vertices()];
        for (t, a) in mesh.triangles.iter().zip(&mesh.tri_areas) {
            let r = [self.density[t[0]], self.density[t[1]], self.density[t[2]]];
            let s = r[0] + r[1] + r[2];
            for k in 0..3 {
                m[t[k]] += a * (s + r[k]) / 12.0;
            }
        }
        for at in &self.atoms {
            m[at.vertex] += at.weight;
        }
        m
    }

    /// ∫ f dμ for a piecewise-linear f given by vertex values.
    pub fn pair(&self, mesh: &SurfaceMesh, f: &[f64]) -> f64 {
        geom::dotn(&self.hat_pairings(mesh), f)
    }

    pub fn is_single_atom(&self) -> bool {
        self.density.iter().all(|&d| d == 0.0) && {
            let mut vs: Vec<usize> = self.atoms.iter().map(|a| a.vertex).collect();
            vs.dedup();
            vs.len() == 1
        }
    }

    pub fn load(path: &Path, mesh: &SurfaceMesh) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        let file: MeasureFile =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        file.into_measure(mesh)
    }
}

/// On-disk form; atoms may be given by vertex index or by a point that is
/// snapped to the nearest vertex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureFile {
    #[serde(default)]
    pub mesh_ref: Option<String>,
    pub density: Vec<f64>,
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    pub weight: f64,
}

impl MeasureFile {
    pub fn from_measure(mu: &MeasureOnMesh, mesh_ref: Option<String>) -> Self {
        MeasureFile {
            mesh_ref,
            density: mu.density.clone(),
            atoms: mu.atoms.iter().map(|a| AtomSpec { vertex: Some(a.vertex), point: None, weight: a.weight }).collect(),
            normalization: mu.normalization,
        }
    }

    pub fn into_measure(self, mesh: &SurfaceMesh) -> Result<MeasureOnMesh> {
        let mut atoms = Vec::new();
        for a in self.atoms {
            let vertex = match (a.vertex, a.point) {
                (Some(v), _) => v,
                (None, Some(p)) => snap_to_vertex(mesh, &p)?,
                (None, None) => return Err(Error::InvalidInput("atom needs a vertex or a point".into())),
            };
            atoms.push(Atom { vertex, weight: a.weight });
        }
        let mut mu = MeasureOnMesh { density: self.density, atoms, normalization: self.normalization };
        mu.validate(mesh)?;
        if mu.normalization == Normalization::UnitMass {
            mu = mu.normalized_unit_mass(mesh)?;
        }
        Ok(mu)
    }
}

fn snap_to_vertex(mesh: &SurfaceMesh, p: &[f64]) -> Result<usize> {
    let q: Vec3 = match p.len() {
        2 => [p[0], p[1], 0.0],
        3 => [p[0], p[1], p[2]],
        _ => return Err(Error::InvalidInput("atom point must have 2 or 3 coordinates".into())),
    };
    let q = if mesh.topology == Topology::Sphere { geom::normalize(q) } else { q };
    let mut best = (f64::INFINITY, 0);
    for (i, v) in mesh.vertices.iter().enumerate() {
        let d = geom::norm(geom::sub(*v, q));
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(best.1)
}

/// Minimum number of mesh vertices required inside each concentration cap.
pub const MIN_CAP_VERTICES: usize = 16;

/// Indicator of the two polar caps of geodesic radius ε, scaled by 1/(ε² log(1/ε)).
/// Each discrete cap carries the mass of the smooth one.
pub fn cap_indicator_measure(mesh: &SurfaceMesh, eps: f64) -> Result<MeasureOnMesh> {
    if mesh.topology != Topology::Sphere {
        return Err(Error::UnsupportedTopology("cap measures live on the sphere".into()));
    }
    let radius = mesh.radius();
    if !(eps > 0.0 && eps < 1.0 && eps < 0.5 * std::f64::consts::PI * radius) {
        return Err(Error::InvalidParameter(format!("cap radius ε = {eps} out of range")));
    }
    let poles = [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    let mut counts = [0usize; 2];
    let scale = 1.0 / (eps * eps * (1.0 / eps).ln());
    let cap_of: Vec<Option<usize>> = mesh
        .vertices
        .iter()
        .map(|v| poles.iter().position(|p| radius * geom::angle(*v, *p) < eps))
        .collect();
    // the nodal indicator smears each cap over a band of width ~h; rescale
    // so that each discrete cap has the exact area 2πR²(1 − cos(ε/R))
    let hat = MeasureOnMesh::uniform(mesh).hat_pairings(mesh);
    let mut discrete = [0.0f64; 2];
    for (i, c) in cap_of.iter().enumerate() {
        if let Some(k) = *c {
            counts[k] += 1;
            discrete[k] += hat[i];
        }
    }
    let exact = 2.0 * std::f64::consts::PI * radius * radius * (1.0 - (eps / radius).cos());
    let density: Vec<f64> = cap_of
        .iter()
        .map(|c| match *c {
            Some(k) if discrete[k] > 0.0 => scale * exact / discrete[k],
            _ => 0.0,
        })
        .collect();
    if counts.iter().any(|&c| c < MIN_CAP_VERTICES) {
        let per_vertex = mesh.total_area() / mesh.n_vertices() as f64;
        let eps_min = (MIN_CAP_VERTICES as f64 * per_vertex / std::f64::consts::PI).sqrt();
        return Err(Error::Resolution(format!(
            "caps of radius {eps} contain {} and {} vertices (need {MIN_CAP_VERTICES}); smallest resolvable ε ≈ {eps_min:.4}",
            counts[0], counts[1]
        )));
    }
    Ok(MeasureOnMesh::from_density(density))
}

/// μ_ε^M = (dv + M ν_ε)/(total mass), normalized to unit mass.
pub fn cap_concentration_measure(mesh: &SurfaceMesh, eps: f64, coupling: f64) -> Result<MeasureOnMesh> {
    if !(coupling >= 0.0) {
        return Err(Error::InvalidParameter(format!("coupling M = {coupling} must be nonnegative")));
    }
    let nu = cap_indicator_measure(mesh, eps)?;
    let raw = MeasureOnMesh::from_density(nu.density.iter().map(|d| 1.0 + coupling * d).collect());
    raw.normalized_unit_mass(mesh)
}

/// ∫ (f∘Φ) dμ with Φ = G_a, evaluated by degree-5 quadrature on each triangle
/// (density interpolated linearly) plus the atoms. f is piecewise linear and
/// is evaluated at Φ(x) by point location, so no pushed-forward density is formed.
pub fn pair_with_pushforward(
    mu: &MeasureOnMesh,
    mesh: &SurfaceMesh,
    a: &MoebiusParam,
    f: &[f64],
) -> Result<f64> {
    Ok(pushforward_pairings(mu, mesh, a, &[f])?[0])
}

/// Same as [`pair_with_pushforward`] for several functions at once.
pub fn pushforward_pairings(
    mu: &MeasureOnMesh,
    mesh: &SurfaceMesh,
    a: &MoebiusParam,
    fs: &[&[f64]],
) -> Result<Vec<f64>> {
    if mesh.topology != Topology::Sphere {
        return Err(Error::UnsupportedTopology("pushforward pairing needs a sphere mesh".into()));
    }
    let loc = SphereLocator::new(mesh);
    let mut out = vec![0.0; fs.len()];
    let eval = |x: Vec3, w: f64, out: &mut Vec<f64>| -> Result<()> {
        let y = apply_moebius(a, x)?;
        let (t, b) = loc.locate(y);
        let tri = mesh.triangles[t];
        for (o, f) in out.iter_mut().zip(fs) {
            *o += w * (b[0] * f[tri[0]] + b[1] * f[tri[1]] + b[2] * f[tri[2]]);
        }
        Ok(())
    };
    for (t, area) in mesh.triangles.iter().zip(&mesh.tri_areas) {
        let rho = [mu.density[t[0]], mu.density[t[1]], mu.density[t[2]]];
        if rho.iter().all(|&r| r == 0.0) {
            continue;
        }
        let p = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
        for (bary, w) in TRI7.iter() {
            let x = geom::normalize(geom::add(
                geom::add(geom::scale(p[0], bary[0]), geom::scale(p[1], bary[1])),
                geom::scale(p[2], bary[2]),
            ));
            let r = bary[0] * rho[0] + bary[1] * rho[1] + bary[2] * rho[2];
            eval(x, area * w * r, &mut out)?;
        }
    }
    for at in &mu.atoms {
        eval(mesh.vertices[at.vertex], at.weight, &mut out)?;
    }
    Ok(out)
}

/// Pairing vector of the pushed-forward measure against the hat basis,
/// m_i = ∫ φ_i ∘ Φ dμ.
pub fn pushforward_hat_pairings(mu: &MeasureOnMesh, mesh: &SurfaceMesh, a: &MoebiusParam) -> Result<Vec<f64>> {
    if mesh.topology != Topology::Sphere {
        return Err(Error::UnsupportedTopology("pushforward pairing needs a sphere mesh".into()));
    }
    let loc = SphereLocator::new(mesh);
    let mut m = vec![0.0; mesh.n_vertices()];
    let deposit = |x: Vec3, w: f64, m: &mut Vec<f64>| -> Result<()> {
        let y = apply_moebius(a, x)?;
        let (t, b) = loc.locate(y);
        let tri = mesh.triangles[t];
        for k in 0..3 {
            m[tri[k]] += w * b[k];
        }
        Ok(())
    };
    for (t, area) in mesh.triangles.iter().zip(&mesh.tri_areas) {
        let rho = [mu.density[t[0]], mu.density[t[1]], mu.density[t[2]]];
        if rho.iter().all(|&r| r == 0.0) {
            continue;
        }
        let p = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
        for (bary, w) in TRI7.iter() {
            let x = geom::normalize(geom::add(
                geom::add(geom::scale(p[0], bary[0]), geom::scale(p[1], bary[1])),
                geom::scale(p[2], bary[2]),
            ));
            let r = bary[0] * rho[0] + bary[1] * rho[1] + bary[2] * rho[2];
            deposit(x, area * w * r, &mut m)?;
        }
    }
    for at in &mu.atoms {
        deposit(mesh.vertices[at.vertex], at.weight, &mut m)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_flat_torus, build_icosphere, LatticeSpec};

    #[test]
    fn masses() {
        let s = build_icosphere(5).unwrap();
        let m = MeasureOnMesh::uniform(&s).total_mass(&s).unwrap();
        assert!((m / (4.0 * std::f64::consts::PI) - 1.0).abs() < 1e-3);
        let atom = MeasureOnMesh::from_density(vec![0.0; s.n_vertices()]).with_atom(3, 4.0 * std::f64::consts::PI);
        assert_eq!(atom.total_mass(&s).unwrap(), 4.0 * std::f64::consts::PI);
        let t = build_flat_torus(LatticeSpec::square(), 10).unwrap();
        assert!((MeasureOnMesh::uniform(&t).total_mass(&t).unwrap() - 1.0).abs() < 1e-12);
        assert!(MeasureOnMesh::from_density(vec![1.0; 3]).total_mass(&t).is_err());
    }

    #[test]
    fn hat_pairings_sum_to_mass() {
        let s = build_icosphere(2).unwrap();
        let dens: Vec<f64> = s.vertices.iter().map(|v| 1.0 + v[2] * v[2]).collect();
        let mu = MeasureOnMesh::from_density(dens).with_atom(0, 0.5);
        let total: f64 = mu.hat_pairings(&s).iter().sum();
        assert!((total - mu.total_mass(&s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn cap_measure_is_unit_mass_and_checks_resolution() {
        let s = build_icosphere(5).unwrap().unit_area_sphere().unwrap();
        let mu = cap_concentration_measure(&s, 0.05, 10.0).unwrap();
        assert!((mu.total_mass(&s).unwrap() - 1.0).abs() < 1e-12);
        let zero = cap_concentration_measure(&s, 0.05, 0.0).unwrap();
        let first = zero.density[0];
        assert!(zero.density.iter().all(|d| (d - first).abs() < 1e-15));
        match cap_concentration_measure(&s, 0.01, 1.0) {
            Err(Error::Resolution(msg)) => assert!(msg.contains("smallest resolvable")),
            other => panic!("expected resolution error, got {other:?}"),
        }
    }
}
