//! Triangulated round spheres and flat tori.
//!
//! Sphere vertices are unit vectors; torus vertices are stored in
//! fundamental-domain coordinates of the lattice cell spanned by (1,0) and
//! (c,d). A metric `scale` multiplies every edge length, so the same
//! combinatorics can carry the curvature-one sphere, the unit-area sphere, or
//! the unit-area torus without touching the shape parameters.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

pub const MAX_SUBDIVISIONS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Sphere,
    Torus,
}

/// Lattice Γ = ℤ(1,0) ⊕ ℤ(c,d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub c: f64,
    pub d: f64,
}

impl LatticeSpec {
    pub fn square() -> Self {
        LatticeSpec { c: 0.0, d: 1.0 }
    }

    pub fn equilateral() -> Self {
        LatticeSpec { c: 0.5, d: 3f64.sqrt() / 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::InvalidInput(format!("degenerate lattice: d = {}", self.d)));
        }
        if !(0.0..=0.5).contains(&self.c) {
            return Err(Error::InvalidInput(format!("lattice c = {} outside [0, 1/2]", self.c)));
        }
        Ok(())
    }

    /// Lattice with c² + d² = 1.
    pub fn is_rhombic_unit(&self) -> bool {
        (self.c * self.c + self.d * self.d - 1.0).abs() < 1e-12
    }

    pub fn cell_area(&self) -> f64 {
        self.d
    }

    /// Translate `q` by a lattice vector so that it is as close as possible to `p`.
    fn nearest_image(&self, p: Vec3, q: Vec3) -> Vec3 {
        let dx = q[0] - p[0];
        let dy = q[1] - p[1];
        let beta = dy / self.d;
        let alpha = dx - self.c * beta;
        let (a0, b0) = (alpha.round(), beta.round());
        let mut best = q;
        let mut best_d = f64::INFINITY;
        for da in -1..=1 {
            for db in -1..=1 {
                let m = a0 + da as f64;
                let n = b0 + db as f64;
                let cand = [q[0] - m - n * self.c, q[1] - n * self.d, 0.0];
                let d = (cand[0] - p[0]).powi(2) + (cand[1] - p[1]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = cand;
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub topology: Topology,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub lattice: Option<LatticeSpec>,
    /// Metric scale applied to every edge length.
    pub scale: f64,
    pub vertex_areas: Vec<f64>,
    /// Corner positions per triangle in metric units (unwrapped across the torus seam).
    pub tri_pos: Vec<[Vec3; 3]>,
    pub tri_areas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshFile {
    pub topology: Topology,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub vertices: Vec<Vec<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl SurfaceMesh {
    fn from_parts(
        topology: Topology,
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        lattice: Option<LatticeSpec>,
        scale: f64,
    ) -> Result<Self> {
        let mut tri_pos = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let mut p = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
            if let Some(l) = lattice {
                p[1] = l.nearest_image(p[0], p[1]);
                p[2] = l.nearest_image(p[0], p[2]);
            }
            tri_pos.push([geom::scale(p[0], scale), geom::scale(p[1], scale), geom::scale(p[2], scale)]);
        }
        let tri_areas: Vec<f64> = tri_pos
            .iter()
            .map(|p| 0.5 * geom::norm(geom::cross(geom::sub(p[1], p[0]), geom::sub(p[2], p[0]))))
            .collect();
        let mut vertex_areas = vec![0.0; vertices.len()];
        for (t, a) in triangles.iter().zip(&tri_areas) {
            for &v in t {
                vertex_areas[v] += a / 3.0;
            }
        }
        Ok(SurfaceMesh { topology, vertices, triangles, lattice, scale, vertex_areas, tri_pos, tri_areas })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn total_area(&self) -> f64 {
        self.tri_areas.iter().sum()
    }

    /// Sphere radius in metric units (1 for the curvature-one sphere).
    pub fn radius(&self) -> f64 {
        self.scale
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        let mut e: Vec<_> = set.into_iter().collect();
        e.sort_unstable();
        e
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.edges().len() as i64 + self.n_triangles() as i64
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.n_vertices()];
        for (ti, t) in self.triangles.iter().enumerate() {
            for &v in t {
                vt[v].push(ti);
            }
        }
        vt
    }

    /// Same mesh with a different metric scale.
    pub fn rescaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!("metric scale must be positive, got {scale}")));
        }
        Self::from_parts(self.topology, self.vertices.clone(), self.triangles.clone(), self.lattice, scale)
    }

    /// Sphere rescaled to total (smooth) area 1, radius 1/√(4π).
    pub fn unit_area_sphere(&self) -> Result<Self> {
        if self.topology != Topology::Sphere {
            return Err(Error::UnsupportedTopology("unit_area_sphere needs a sphere".into()));
        }
        self.rescaled(1.0 / (4.0 * std::f64::consts::PI).sqrt())
    }

    /// Check the structural invariants; used by the file loader and in tests.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vertices();
        if n == 0 || self.triangles.is_empty() {
            return Err(Error::InvalidInput("empty mesh".into()));
        }
        for (ti, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidInput(format!("triangle {ti} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidInput(format!("triangle {ti} repeats a vertex")));
            }
        }
        // every directed edge appears once and its reverse once: closed + consistently oriented
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count != 1 {
                return Err(Error::InvalidInput(format!("edge ({a},{b}) has inconsistent orientation")));
            }
            if !directed.contains_key(&(b, a)) {
                return Err(Error::InvalidInput(format!("edge ({a},{b}) is a boundary edge")));
            }
        }
        let chi = self.euler_characteristic();
        match self.topology {
            Topology::Sphere => {
                if chi != 2 {
                    return Err(Error::InvalidInput(format!("sphere mesh has Euler characteristic {chi}")));
                }
                for (i, v) in self.vertices.iter().enumerate() {
                    if (geom::norm(*v) - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidInput(format!("sphere vertex {i} is not a unit vector")));
                    }
                }
                // outward orientation
                for (ti, p) in self.tri_pos.iter().enumerate() {
                    let nrm = geom::cross(geom::sub(p[1], p[0]), geom::sub(p[2], p[0]));
                    if geom::dot(nrm, p[0]) <= 0.0 {
                        return Err(Error::InvalidInput(format!("triangle {ti} is inward oriented")));
                    }
                }
            }
            Topology::Torus => {
                let l = self.lattice.ok_or_else(|| Error::InvalidInput("torus mesh without lattice".into()))?;
                l.validate()?;
                if chi != 0 {
                    return Err(Error::InvalidInput(format!("torus mesh has Euler characteristic {chi}")));
                }
                for (ti, p) in self.tri_pos.iter().enumerate() {
                    let z = geom::cross(geom::sub(p[1], p[0]), geom::sub(p[2], p[0]))[2];
                    if z <= 0.0 {
                        return Err(Error::InvalidInput(format!("triangle {ti} is negatively oriented")));
                    }
                }
                let total = self.total_area();
                let expect = l.cell_area() * self.scale * self.scale;
                if ((total - expect) / expect).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "torus triangles cover area {total}, lattice cell has {expect}"
                    )));
                }
            }
        }
        for (ti, &a) in self.tri_areas.iter().enumerate() {
            if !(a > 0.0) {
                return Err(Error::DegenerateTriangle { triangle: ti, area: a });
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> MeshFile {
        let vertices = self
            .vertices
            .iter()
            .map(|v| match self.topology {
                Topology::Sphere => v.to_vec(),
                Topology::Torus => vec![v[0], v[1]],
            })
            .collect();
        MeshFile {
            topology: self.topology,
            lattice: self.lattice,
            scale: if self.scale == 1.0 { None } else { Some(self.scale) },
            vertices,
            triangles: self.triangles.clone(),
        }
    }

    pub fn from_file(file: MeshFile) -> Result<Self> {
        let dim = match file.topology {
            Topology::Sphere => 3,
            Topology::Torus => 2,
        };
        let mut vertices = Vec::with_capacity(file.vertices.len());
        for (i, v) in file.vertices.iter().enumerate() {
            if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("vertex {i} must have {dim} finite coordinates")));
            }
            vertices.push([v[0], v[1], if dim == 3 { v[2] } else { 0.0 }]);
        }
        if file.topology == Topology::Torus {
            let l = file.lattice.ok_or_else(|| Error::InvalidInput("torus mesh without lattice".into()))?;
            l.validate()?;
        }
        let n = vertices.len();
        if let Some(t) = file.triangles.iter().find(|t| t.iter().any(|&v| v >= n)) {
            return Err(Error::InvalidInput(format!("triangle {t:?} references a missing vertex")));
        }
        let mesh = Self::from_parts(file.topology, vertices, file.triangles, file.lattice, file.scale.unwrap_or(1.0))?;
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        let file: MeshFile =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_file(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file()).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }
}

/// Icosahedron refined `subdivisions` times by edge midpoints projected to S².
pub fn build_icosphere(subdivisions: usize) -> Result<SurfaceMesh> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(Error::Capacity(format!(
            "icosphere subdivision {subdivisions} exceeds the limit {MAX_SUBDIVISIONS}"
        )));
    }
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw: [Vec3; 12] = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut vertices: Vec<Vec3> = raw.iter().map(|v| geom::normalize(*v)).collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3 / 2);
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                vertices.push(geom::normalize(geom::add(vertices[a], vertices[b])));
                vertices.len() - 1
            })
        };
        for t in &triangles {
            let ab = midpoint(t[0], t[1], &mut vertices);
            let bc = midpoint(t[1], t[2], &mut vertices);
            let ca = midpoint(t[2], t[0], &mut vertices);
            next.push([t[0], ab, ca]);
            next.push([t[1], bc, ab]);
            next.push([t[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
    }
    SurfaceMesh::from_parts(Topology::Sphere, vertices, triangles, None, 1.0)
}

/// Structured n×n triangulation of the flat torus ℝ²/Γ, rescaled to unit area.
///
/// Each lattice parallelogram is split along its (e₁ − e₂) diagonal, which
/// makes the equilateral lattice triangulate into equilateral triangles.
pub fn build_flat_torus(lattice: LatticeSpec, n: usize) -> Result<SurfaceMesh> {
    lattice.validate()?;
    if n < 3 {
        return Err(Error::InvalidInput(format!("torus resolution n = {n} must be at least 3")));
    }
    let idx = |i: usize, j: usize| (i % n) + n * (j % n);
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (s, t) = (i as f64 * h, j as f64 * h);
            vertices.push([s + t * lattice.c, t * lattice.d, 0.0]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
            triangles.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    SurfaceMesh::from_parts(Topology::Torus, vertices, triangles, Some(lattice), 1.0 / lattice.d.sqrt())
}

/// Parse compact mesh descriptions: `icosphere:5`, `icosphere-unit:5`,
/// `torus:0,1:64`, `torus:0.5,0.8660254037844386:96`, `equilateral:96`, or a path to a mesh file.
pub fn mesh_from_spec(spec: &str) -> Result<SurfaceMesh> {
    let parts: Vec<&str> = spec.split(':').collect();
    let parse_usize = |s: &str| {
        s.trim().parse::<usize>().map_err(|_| Error::InvalidInput(format!("bad integer '{s}' in mesh spec '{spec}'")))
    };
    let parse_f64 = |s: &str| {
        s.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number '{s}' in mesh spec '{spec}'")))
    };
    match parts.as_slice() {
        ["icosphere", s] => build_icosphere(parse_usize(s)?),
        ["icosphere-unit", s] => build_icosphere(parse_usize(s)?)?.unit_area_sphere(),
        ["torus", cd, n] => {
            let v: Vec<&str> = cd.split(',').collect();
            if v.len() != 2 {
                return Err(Error::InvalidInput(format!("torus spec needs c,d in '{spec}'")));
            }
            build_flat_torus(LatticeSpec { c: parse_f64(v[0])?, d: parse_f64(v[1])? }, parse_usize(n)?)
        }
        ["square", n] => build_flat_torus(LatticeSpec::square(), parse_usize(n)?),
        ["equilateral", n] => build_flat_torus(LatticeSpec::equilateral(), parse_usize(n)?),
        _ => SurfaceMesh::load(Path::new(spec)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for s in 0..4 {
            let m = build_icosphere(s).unwrap();
            assert_eq!(m.n_vertices(), 10 * 4usize.pow(s as u32) + 2);
            assert_eq!(m.n_triangles(), 20 * 4usize.pow(s as u32));
            m.validate().unwrap();
        }
        assert!(matches!(build_icosphere(10), Err(Error::Capacity(_))));
    }

    #[test]
    fn torus_counts_and_area() {
        let m = build_flat_torus(LatticeSpec::square(), 4).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles()), (16, 32));
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        m.validate().unwrap();
        let e = build_flat_torus(LatticeSpec::equilateral(), 32).unwrap();
        assert!((e.total_area() - 1.0).abs() < 1e-12);
        assert!(build_flat_torus(LatticeSpec { c: 0.0, d: 0.0 }, 8).is_err());
        assert!(build_flat_torus(LatticeSpec::square(), 2).is_err());
    }

    #[test]
    fn equilateral_torus_triangles_are_equilateral() {
        let m = build_flat_torus(LatticeSpec::equilateral(), 6).unwrap();
        for p in &m.tri_pos {
            let l: Vec<f64> = (0..3).map(|k| geom::norm(geom::sub(p[(k + 1) % 3], p[k]))).collect();
            assert!((l[0] - l[1]).abs() < 1e-12 && (l[1] - l[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_file_roundtrip_and_rejection() {
        let m = build_flat_torus(LatticeSpec::equilateral(), 5).unwrap();
        let back = SurfaceMesh::from_file(m.to_file()).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert!((back.total_area() - 1.0).abs() < 1e-12);

        let mut bad = build_icosphere(1).unwrap().to_file();
        bad.triangles.pop();
        assert!(SurfaceMesh::from_file(bad).is_err());
        let mut flipped = build_icosphere(1).unwrap().to_file();
        flipped.triangles[0].swap(0, 1);
        assert!(SurfaceMesh::from_file(flipped).is_err());
    }
}
