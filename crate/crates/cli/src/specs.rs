//! Measure descriptions accepted on the command line.
//!
//! `uniform`, `hersch:<index|label>` (regression density), `cap:<eps>:<M>`
//! (two-cap concentration), `bubble:<t>` (conformal bubble toward the north
//! pole), `atom:<vertex>:<weight>` (uniform plus an atom), or a measure file.

use std::path::Path;

use specgeom_core::experiments::bubbling::conformal_bubble_family;
use specgeom_core::experiments::hersch::{density_measure, hersch_regression_family};
use specgeom_core::geom;
use specgeom_core::measure::{cap_concentration_measure, MeasureOnMesh};
use specgeom_core::mesh::SurfaceMesh;

use crate::error::{CliError, CliResult};

pub fn is_file_spec(spec: &str) -> bool {
    !["uniform", "hersch", "cap", "bubble", "atom"].contains(&spec.split(':').next().unwrap_or(""))
}

fn num<T: std::str::FromStr>(s: &str, spec: &str) -> CliResult<T> {
    s.parse().map_err(|_| CliError::Usage(format!("bad number `{s}` in measure spec `{spec}`")))
}

pub fn measure_from_spec(spec: &str, mesh: &SurfaceMesh) -> CliResult<MeasureOnMesh> {
    let parts: Vec<&str> = spec.splitn(3, ':').collect();
    let mu = match parts.as_slice() {
        ["uniform"] => MeasureOnMesh::uniform(mesh),
        ["hersch", which] => {
            let family = hersch_regression_family();
            let f = match which.parse::<usize>() {
                Ok(i) => family.get(i).map(|x| x.1),
                Err(_) => family.iter().find(|x| x.0 == *which).map(|x| x.1),
            }
            .ok_or_else(|| {
                let labels: Vec<&str> = family.iter().map(|x| x.0).collect();
                CliError::Usage(format!("unknown regression density `{which}` (0..9 or one of {})", labels.join(", ")))
            })?;
            density_measure(mesh, |x| f(geom::normalize(x)))
        }
        ["cap", eps, m] => cap_concentration_measure(mesh, num(eps, spec)?, num(m, spec)?)?,
        ["bubble", t] => {
            let t: f64 = num(t, spec)?;
            if !(0.0..1.0).contains(&t) {
                return Err(CliError::Usage(format!("bubble parameter t = {t} must lie in [0, 1)")));
            }
            conformal_bubble_family(mesh, [0.0, 0.0, 1.0], &[t]).remove(0).1
        }
        ["atom", v, w] => MeasureOnMesh::uniform(mesh).with_atom(num(v, spec)?, num(w, spec)?),
        _ if is_file_spec(spec) => MeasureOnMesh::load(Path::new(spec), mesh)?,
        _ => return Err(CliError::Usage(format!("malformed measure spec `{spec}`"))),
    };
    mu.validate(mesh)?;
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use specgeom_core::mesh::build_icosphere;

    #[test]
    fn builtin_specs_produce_valid_measures() {
        let mesh = build_icosphere(3).unwrap();
        for spec in ["uniform", "hersch:0", "hersch:exp(0.5z)", "bubble:0.5", "atom:3:0.5", "cap:0.5:0.01"] {
            let mu = measure_from_spec(spec, &mesh).unwrap();
            assert!(mu.total_mass(&mesh).unwrap() > 0.0, "{spec}");
        }
    }

    #[test]
    fn malformed_specs_are_usage_errors() {
        let mesh = build_icosphere(2).unwrap();
        for spec in ["hersch:99", "cap:x:1", "bubble:1.5", "atom:1"] {
            assert!(measure_from_spec(spec, &mesh).is_err(), "{spec}");
        }
    }
}
