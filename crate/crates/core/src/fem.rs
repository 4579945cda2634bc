//! Linear finite elements: cotangent stiffness, consistent mass matrices with
//! piecewise-linear densities, and Dirichlet energies of vector-valued maps.

use crate::error::{Error, Result};
use crate::geom;
use crate::measure::MeasureOnMesh;
use crate::mesh::SurfaceMesh;
use crate::sparse::SparseOperator;

/// Relative area below which a triangle counts as degenerate.
const DEGENERATE_REL: f64 = 1e-14;

/// Cotangents of the three corner angles of a triangle given by its corner positions.
pub fn corner_cotangents(p: &[geom::Vec3; 3]) -> Option<[f64; 3]> {
    let mut c = [0.0; 3];
    let e = |i: usize, j: usize| geom::sub(p[j], p[i]);
    let area2 = geom::norm(geom::cross(e(0, 1), e(0, 2)));
    let scale = geom::dot(e(0, 1), e(0, 1)).max(geom::dot(e(0, 2), e(0, 2)));
    if !(area2 > DEGENERATE_REL * scale) {
        return None;
    }
    for k in 0..3 {
        let a = e(k, (k + 1) % 3);
        let b = e(k, (k + 2) % 3);
        c[k] = geom::dot(a, b) / area2;
    }
    Some(c)
}

/// Local 3×3 stiffness of one triangle.
pub fn local_stiffness(p: &[geom::Vec3; 3]) -> Option<[[f64; 3]; 3]> {
    let cot = corner_cotangents(p)?;
    let mut k = [[0.0; 3]; 3];
    for c in 0..3 {
        // the edge opposite corner c joins the other two corners
        let (i, j) = ((c + 1) % 3, (c + 2) % 3);
        let w = 0.5 * cot[c];
        k[i][j] -= w;
        k[j][i] -= w;
        k[i][i] += w;
        k[j][j] += w;
    }
    Some(k)
}

/// K_ij = −(cot α_ij + cot β_ij)/2, no clamping of negative weights.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> Result<SparseOperator> {
    let mut trip = Vec::with_capacity(mesh.n_triangles() * 9);
    for (ti, (t, p)) in mesh.triangles.iter().zip(&mesh.tri_pos).enumerate() {
        let k = local_stiffness(p).ok_or(Error::DegenerateTriangle { triangle: ti, area: mesh.tri_areas[ti] })?;
        for a in 0..3 {
            for b in 0..3 {
                trip.push((t[a], t[b], k[a][b]));
            }
        }
    }
    Ok(SparseOperator::from_triplets(mesh.n_vertices(), trip))
}

/// Consistent mass matrix of μ: ∫ φ_i φ_j ρ exactly for piecewise-linear ρ, plus atoms on the diagonal.
pub fn assemble_mass(mesh: &SurfaceMesh, mu: &MeasureOnMesh) -> Result<SparseOperator> {
    mu.validate(mesh)?;
    let mut trip = Vec::with_capacity(mesh.n_triangles() * 9 + mu.atoms.len());
    for (t, &area) in mesh.triangles.iter().zip(&mesh.tri_areas) {
        let r = [mu.density[t[0]], mu.density[t[1]], mu.density[t[2]]];
        let s = r[0] + r[1] + r[2];
        for i in 0..3 {
            for j in 0..3 {
                // ∫ λ_i λ_j λ_k over T: A/10 (i=j=k), A/30 (two equal), A/60 (distinct)
                let v = if i == j {
                    area * (r[i] / 10.0 + (s - r[i]) / 30.0)
                } else {
                    let k = 3 - i - j;
                    area * ((r[i] + r[j]) / 30.0 + r[k] / 60.0)
                };
                if v != 0.0 {
                    trip.push((t[i], t[j], v));
                }
            }
        }
    }
    for a in &mu.atoms {
        trip.push((a.vertex, a.vertex, a.weight));
    }
    Ok(SparseOperator::from_triplets(mesh.n_vertices(), trip))
}

/// Mass matrix of the background area measure.
pub fn assemble_background_mass(mesh: &SurfaceMesh) -> Result<SparseOperator> {
    assemble_mass(mesh, &MeasureOnMesh::uniform(mesh))
}

/// E(u) = ½ Σ_c u_cᵀ K u_c over the components of u.
pub fn dirichlet_energy(k: &SparseOperator, components: &[Vec<f64>]) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::InvalidInput("map has no components".into()));
    }
    let mut e = 0.0;
    for c in components {
        if c.len() != k.dim {
            return Err(Error::InvalidInput(format!("component of length {} for dimension {}", c.len(), k.dim)));
        }
        e += 0.5 * k.quad_form(c);
    }
    Ok(e)
}

/// Per-triangle energy density e_T = Σ_c u_cᵀ K_T u_c = ∫_T |du|².
pub fn triangle_energies(mesh: &SurfaceMesh, components: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(mesh.n_triangles());
    for (ti, (t, p)) in mesh.triangles.iter().zip(&mesh.tri_pos).enumerate() {
        let k = local_stiffness(p).ok_or(Error::DegenerateTriangle { triangle: ti, area: mesh.tri_areas[ti] })?;
        let mut e = 0.0;
        for c in components {
            let u = [c[t[0]], c[t[1]], c[t[2]]];
            for a in 0..3 {
                for b in 0..3 {
                    e += u[a] * k[a][b] * u[b];
                }
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// Vertex energy density λ_i = Σ_c u_{c,i} (K u_c)_i; sums to 2E(u).
///
/// For sphere-valued u this is the discrete counterpart of |du|² paired
/// with the hat function φ_i, consistent with the weak form of Δu = |du|²u.
pub fn vertex_energy_density(k: &SparseOperator, components: &[Vec<f64>]) -> Vec<f64> {
    let mut lam = vec![0.0; k.dim];
    for c in components {
        let kc = k.matvec(c);
        for i in 0..k.dim {
            lam[i] += c[i] * kc[i];
        }
    }
    lam
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_flat_torus, build_icosphere, LatticeSpec};

    #[test]
    fn stiffness_kills_constants_and_is_symmetric() {
        let m = build_icosphere(3).unwrap();
        let k = assemble_stiffness(&m).unwrap();
        assert!(k.row_sums().iter().all(|s| s.abs() < 1e-12));
        assert!(k.asymmetry() < 1e-14);
    }

    #[test]
    fn mass_of_constant_is_area() {
        let m = build_icosphere(3).unwrap();
        let mass = assemble_background_mass(&m).unwrap();
        let one = vec![1.0; m.n_vertices()];
        assert!((mass.quad_form(&one) - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn pure_atom_mass() {
        let m = build_icosphere(1).unwrap();
        let mu = MeasureOnMesh::from_density(vec![0.0; m.n_vertices()]).with_atom(5, 2.5);
        let mass = assemble_mass(&m, &mu).unwrap();
        let f: Vec<f64> = (0..m.n_vertices()).map(|i| i as f64).collect();
        assert!((mass.quad_form(&f) - 2.5 * 25.0).abs() < 1e-12);
    }

    #[test]
    fn torus_edge_weights_are_translation_invariant() {
        let m = build_flat_torus(LatticeSpec { c: 0.3, d: 0.9 }, 7).unwrap();
        let k = assemble_stiffness(&m).unwrap();
        let mut weights: Vec<f64> = k.triplets().filter(|(r, c, _)| r != c).map(|(_, _, v)| v).collect();
        weights.sort_by(|a, b| a.partial_cmp(b).unwrap());
        weights.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert!(weights.len() <= 3, "{weights:?}");
    }
}
