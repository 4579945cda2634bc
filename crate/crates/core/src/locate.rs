//! Point location on sphere meshes: which triangle does the ray from the
//! origin through a point cross, and with which barycentric coordinates.

use std::collections::HashMap;

use crate::geom::{self, Vec3};
use crate::mesh::{SurfaceMesh, Topology};

pub struct SphereLocator<'a> {
    mesh: &'a SurfaceMesh,
    cell: f64,
    grid: HashMap<(i64, i64, i64), Vec<usize>>,
    vertex_tris: Vec<Vec<usize>>,
}

impl<'a> SphereLocator<'a> {
    pub fn new(mesh: &'a SurfaceMesh) -> Self {
        assert_eq!(mesh.topology, Topology::Sphere);
        // typical edge length on the unit sphere
        let cell = (4.0 * std::f64::consts::PI / mesh.n_triangles() as f64).sqrt() * 1.5;
        let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, v) in mesh.vertices.iter().enumerate() {
            grid.entry(Self::key(cell, *v)).or_default().push(i);
        }
        SphereLocator { mesh, cell, grid, vertex_tris: mesh.vertex_triangles() }
    }

    fn key(cell: f64, x: Vec3) -> (i64, i64, i64) {
        ((x[0] / cell).floor() as i64, (x[1] / cell).floor() as i64, (x[2] / cell).floor() as i64)
    }

    pub fn nearest_vertex(&self, x: Vec3) -> usize {
        let k = Self::key(self.cell, x);
        let mut best = (f64::INFINITY, usize::MAX);
        for r in 0..64i64 {
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        if let Some(vs) = self.grid.get(&(k.0 + dx, k.1 + dy, k.2 + dz)) {
                            for &v in vs {
                                let d = geom::norm(geom::sub(self.mesh.vertices[v], x));
                                if d < best.0 {
                                    best = (d, v);
                                }
                            }
                        }
                    }
                }
            }
            // every vertex outside the searched shells is farther than r·cell
            if best.0 <= r as f64 * self.cell {
                break;
            }
        }
        best.1
    }

    /// Barycentric coordinates of the ray through `x` in triangle `t`.
    pub fn ray_barycentric(&self, t: usize, x: Vec3) -> [f64; 3] {
        let tri = self.mesh.triangles[t];
        let p = [self.mesh.vertices[tri[0]], self.mesh.vertices[tri[1]], self.mesh.vertices[tri[2]]];
        // signed volumes of (x, p_j, p_k) are proportional to the barycentric coordinates of the ray hit
        let b0 = geom::dot(x, geom::cross(p[1], p[2]));
        let b1 = geom::dot(x, geom::cross(p[2], p[0]));
        let b2 = geom::dot(x, geom::cross(p[0], p[1]));
        let s = b0 + b1 + b2;
        if s <= 0.0 {
            // the ray crosses the plane behind the origin (antipodal triangle)
            return [-1.0; 3];
        }
        [b0 / s, b1 / s, b2 / s]
    }

    /// Triangle containing the ray through `x` and barycentric coordinates.
    pub fn locate(&self, x: Vec3) -> (usize, [f64; 3]) {
        let v = self.nearest_vertex(x);
        let mut best = (f64::NEG_INFINITY, 0usize, [0.0; 3]);
        let check = |t: usize, best: &mut (f64, usize, [f64; 3])| {
            let b = self.ray_barycentric(t, x);
            let m = b[0].min(b[1]).min(b[2]);
            if m > best.0 {
                *best = (m, t, b);
            }
        };
        for &t in &self.vertex_tris[v] {
            check(t, &mut best);
        }
        if best.0 >= -1e-12 {
            return (best.1, best.2);
        }
        // walk a second ring
        for &t in &self.vertex_tris[v].clone() {
            for &w in &self.mesh.triangles[t] {
                for &t2 in &self.vertex_tris[w] {
                    check(t2, &mut best);
                }
            }
        }
        if best.0 >= -1e-12 {
            return (best.1, best.2);
        }
        for t in 0..self.mesh.n_triangles() {
            check(t, &mut best);
        }
        (best.1, best.2)
    }

    /// Interpolate a piecewise-linear function at the radial projection of `x`.
    pub fn interpolate(&self, f: &[f64], x: Vec3) -> f64 {
        let (t, b) = self.locate(x);
        let tri = self.mesh.triangles[t];
        b[0] * f[tri[0]] + b[1] * f[tri[1]] + b[2] * f[tri[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_icosphere;

    #[test]
    fn locate_reproduces_linear_functions() {
        let m = build_icosphere(3).unwrap();
        let loc = SphereLocator::new(&m);
        let f: Vec<f64> = m.vertices.iter().map(|v| v[0] + 2.0 * v[1] - v[2]).collect();
        for x in geom::fibonacci_sphere(200) {
            let (t, b) = loc.locate(x);
            assert!(b.iter().all(|&c| c >= -1e-12), "{t} {b:?}");
            // the flat interpolant equals the linear function at the ray hit point
            let tri = m.triangles[t];
            let hit = geom::add(
                geom::add(geom::scale(m.vertices[tri[0]], b[0]), geom::scale(m.vertices[tri[1]], b[1])),
                geom::scale(m.vertices[tri[2]], b[2]),
            );
            let want = hit[0] + 2.0 * hit[1] - hit[2];
            assert!((loc.interpolate(&f, x) - want).abs() < 1e-12);
        }
    }
}
