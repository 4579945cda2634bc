//! Sphere-valued maps sampled at mesh vertices, and the closed-form maps used
//! as references (identity of S², flat-torus eigenmaps into S³, the
//! equilateral torus into S⁵).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{LatticeSpec, SurfaceMesh, Topology};

/// Per-vertex values in Sⁿ ⊂ ℝⁿ⁺¹, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereValuedMap {
    /// n, so values live in ℝⁿ⁺¹.
    pub target_dim: usize,
    pub components: Vec<Vec<f64>>,
    pub analytic_tag: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapFile {
    pub target_dim: usize,
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_tag: Option<String>,
}

pub const UNIT_TOL: f64 = 1e-10;

impl SphereValuedMap {
    /// Build from per-vertex vectors; every value must be a unit vector.
    pub fn from_values(values: &[Vec<f64>], tag: Option<String>) -> Result<Self> {
        let dim = values.first().map(|v| v.len()).ok_or_else(|| Error::InvalidInput("empty map".into()))?;
        if dim < 2 {
            return Err(Error::InvalidInput("target must be Sⁿ with n ≥ 1".into()));
        }
        let mut components = vec![Vec::with_capacity(values.len()); dim];
        for (i, v) in values.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::InvalidInput(format!("value at vertex {i} has wrong dimension")));
            }
            let n2: f64 = v.iter().map(|x| x * x).sum();
            if (n2.sqrt() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidInput(format!("value at vertex {i} has norm {}", n2.sqrt())));
            }
            for (c, x) in components.iter_mut().zip(v) {
                c.push(*x);
            }
        }
        Ok(SphereValuedMap { target_dim: dim - 1, components, analytic_tag: tag })
    }

    /// Components without the unit-norm check (for ambient-space maps such as perturbed fields).
    pub fn from_components_unchecked(components: Vec<Vec<f64>>, tag: Option<String>) -> Self {
        SphereValuedMap { target_dim: components.len() - 1, components, analytic_tag: tag }
    }

    pub fn n_vertices(&self) -> usize {
        self.components[0].len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.components.len()
    }

    pub fn value(&self, i: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[i]).collect()
    }

    pub fn value3(&self, i: usize) -> Vec3 {
        [self.components[0][i], self.components[1][i], self.components[2][i]]
    }

    pub fn max_norm_defect(&self) -> f64 {
        (0..self.n_vertices())
            .map(|i| (self.value(i).iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> MapFile {
        MapFile {
            target_dim: self.target_dim,
            values: (0..self.n_vertices()).map(|i| self.value(i)).collect(),
            analytic_tag: self.analytic_tag.clone(),
        }
    }

    pub fn from_file(f: MapFile) -> Result<Self> {
        let m = Self::from_values(&f.values, f.analytic_tag)?;
        if m.target_dim != f.target_dim {
            return Err(Error::InvalidInput("target_dim does not match value length".into()));
        }
        Ok(m)
    }

    /// Second-moment matrix Σ_i u_i u_iᵀ / N, used to test whether the image spans ℝⁿ⁺¹.
    pub fn moment_matrix(&self) -> Vec<Vec<f64>> {
        let d = self.ambient_dim();
        let n = self.n_vertices() as f64;
        (0..d)
            .map(|a| (0..d).map(|b| crate::geom::dotn(&self.components[a], &self.components[b]) / n).collect())
            .collect()
    }
}

/// Identity map S² → S² on a sphere mesh.
pub fn identity_map(mesh: &SurfaceMesh) -> Result<SphereValuedMap> {
    if mesh.topology != Topology::Sphere {
        return Err(Error::UnsupportedTopology("identity map needs a sphere mesh".into()));
    }
    Ok(SphereValuedMap {
        target_dim: 2,
        components: (0..3).map(|c| mesh.vertices.iter().map(|v| v[c]).collect()).collect(),
        analytic_tag: Some("identity".into()),
    })
}

fn require_lattice(mesh: &SurfaceMesh, want: Option<LatticeSpec>) -> Result<LatticeSpec> {
    let l = mesh
        .lattice
        .filter(|_| mesh.topology == Topology::Torus)
        .ok_or_else(|| Error::InvalidInput("map needs a flat torus mesh".into()))?;
    if let Some(w) = want {
        if (w.c - l.c).abs() > 1e-12 || (w.d - l.d).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("mesh lattice ({}, {}) differs from ({}, {})", l.c, l.d, w.c, w.d)));
        }
    }
    Ok(l)
}

/// Φ_{c,d}(x,y) = 2^{-1/2}(sin 2πy/d, cos 2πy/d, sin 2π(cy/d − x), cos 2π(cy/d − x)).
pub fn torus_eigenmap_eval(c: f64, d: f64, x: f64, y: f64) -> [f64; 4] {
    let s = 1.0 / 2f64.sqrt();
    let a = 2.0 * PI * y / d;
    let b = 2.0 * PI * (c / d * y - x);
    [s * a.sin(), s * a.cos(), s * b.sin(), s * b.cos()]
}

pub fn torus_eigenmap(c: f64, d: f64, mesh: &SurfaceMesh) -> Result<SphereValuedMap> {
    require_lattice(mesh, Some(LatticeSpec { c, d }))?;
    let vals: Vec<[f64; 4]> = mesh.vertices.iter().map(|v| torus_eigenmap_eval(c, d, v[0], v[1])).collect();
    Ok(SphereValuedMap {
        target_dim: 3,
        components: (0..4).map(|k| vals.iter().map(|v| v[k]).collect()).collect(),
        analytic_tag: Some(format!("torus_eigenmap:{c},{d}")),
    })
}

/// The equilateral-torus map 3^{-1/2}(φ₁, φ₂, φ₃) into S⁵ ⊂ ℂ³.
pub fn equilateral_s5_eval(x1: f64, x2: f64) -> [f64; 6] {
    let s = 1.0 / 3f64.sqrt();
    let r3 = 3f64.sqrt();
    let p = [2.0 * PI * (x1 - x2 / r3), 4.0 * PI * x2 / r3, 2.0 * PI * (x1 + x2 / r3)];
    [s * p[0].cos(), s * p[0].sin(), s * p[1].cos(), s * p[1].sin(), s * p[2].cos(), s * p[2].sin()]
}

pub fn equilateral_s5_map(mesh: &SurfaceMesh) -> Result<SphereValuedMap> {
    require_lattice(mesh, Some(LatticeSpec::equilateral()))?;
    let vals: Vec<[f64; 6]> = mesh.vertices.iter().map(|v| equilateral_s5_eval(v[0], v[1])).collect();
    Ok(SphereValuedMap {
        target_dim: 5,
        components: (0..6).map(|k| vals.iter().map(|v| v[k]).collect()).collect(),
        analytic_tag: Some("equilateral_s5".into()),
    })
}

/// Geodesic circle map (sin 2πx, cos 2πx, 0) of the square torus into the equator of S².
pub fn equatorial_circle_map(mesh: &SurfaceMesh) -> Result<SphereValuedMap> {
    require_lattice(mesh, Some(LatticeSpec::square()))?;
    let x: Vec<f64> = mesh.vertices.iter().map(|v| 2.0 * PI * v[0]).collect();
    Ok(SphereValuedMap {
        target_dim: 2,
        components: vec![x.iter().map(|t| t.sin()).collect(), x.iter().map(|t| t.cos()).collect(), vec![0.0; x.len()]],
        analytic_tag: Some("equatorial_circle".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_flat_torus;

    #[test]
    fn closed_forms_are_unit_and_periodic() {
        for (c, d) in [(0.0, 1.0), (0.5, 3f64.sqrt() / 2.0), (0.2, 0.7)] {
            for (x, y) in [(0.1, 0.2), (0.7, 0.33)] {
                let a = torus_eigenmap_eval(c, d, x, y);
                let b = torus_eigenmap_eval(c, d, x + 1.0, y);
                let e = torus_eigenmap_eval(c, d, x + c, y + d);
                assert!((a.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-15);
                for k in 0..4 {
                    assert!((a[k] - b[k]).abs() < 1e-12 && (a[k] - e[k]).abs() < 1e-12);
                }
            }
        }
        let a = equilateral_s5_eval(0.3, 0.1);
        let e = equilateral_s5_eval(0.8, 0.1 + 3f64.sqrt() / 2.0);
        for k in 0..6 {
            assert!((a[k] - e[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_mismatch_is_rejected() {
        let m = build_flat_torus(LatticeSpec::square(), 6).unwrap();
        assert!(equilateral_s5_map(&m).is_err());
        assert!(torus_eigenmap(0.5, 3f64.sqrt() / 2.0, &m).is_err());
    }
}
