//! Registered experiments: defaults and dispatch into the core audits.

use std::f64::consts::PI;

use clap::ValueEnum;
use specgeom_core::eigen::EigenOptions;
use specgeom_core::experiments::bubbling::{bubbling_family, conformal_bubble_family};
use specgeom_core::experiments::concentration::DEFAULT_EPS;
use specgeom_core::experiments::geometry::{symmetric_hessian_value, DensitySetup, CANONICAL_RADII};
use specgeom_core::experiments::hersch::{default_amplitudes, hersch_unit_mass_constant, spectrum};
use specgeom_core::experiments::*;
use specgeom_core::fem::{assemble_stiffness, dirichlet_energy};
use specgeom_core::harmonic::AnalyticSurface;
use specgeom_core::maps::identity_map;
use specgeom_core::mesh::{mesh_from_spec, LatticeSpec, Topology};
use specgeom_core::moebius::{compose_moebius, hersch_balance, nadirashvili_balance};
use specgeom_core::Error;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::specs::{is_file_spec, measure_from_spec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Experiment {
    Lemma21,
    Hersch,
    Sharpness,
    Concentration,
    Robin,
    Bubbling,
    Canonical,
    Jacobi,
    Density,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Lemma21 => "lemma21",
            Experiment::Hersch => "hersch",
            Experiment::Sharpness => "sharpness",
            Experiment::Concentration => "concentration",
            Experiment::Robin => "robin",
            Experiment::Bubbling => "bubbling",
            Experiment::Canonical => "canonical",
            Experiment::Jacobi => "jacobi",
            Experiment::Density => "density",
        }
    }

    pub fn defaults(&self) -> &'static [(&'static str, &'static str)] {
        match self {
            Experiment::Lemma21 => &[("mesh", "icosphere:4"), ("measure", "uniform"), ("k", "1"), ("map", "identity")],
            Experiment::Hersch => &[("mesh", "icosphere:5"), ("measure", "uniform"), ("normalization", "none")],
            Experiment::Sharpness => &[("mesh", "icosphere-unit:5"), ("kind", "prop72_restricted")],
            Experiment::Concentration => &[("mesh", "icosphere-unit:6"), ("eps", "0.1,0.05,0.03,0.02"), ("small", "0.01"), ("large", "100")],
            Experiment::Robin => &[("eps", "1e-3,1e-4"), ("cap-eps", "0.05")],
            Experiment::Bubbling => &[("mesh", "icosphere:4"), ("family", "conformal"), ("ts", "0.3,0.5,0.7,0.8"), ("fractions", "0.2,0.4"), ("vertex", "0")],
            Experiment::Canonical => &[("map", "clifford"), ("level", "48")],
            Experiment::Jacobi => &[("level", "96")],
            Experiment::Density => &[("map", "clifford")],
        }
    }
}

pub fn run(exp: Experiment, cfg: &RunConfig, opts: &EigenOptions) -> CliResult<Vec<StabilityReport>> {
    let report = match exp {
        Experiment::Lemma21 => lemma21(cfg, opts)?,
        Experiment::Hersch => hersch(cfg, opts)?,
        Experiment::Sharpness => {
            let mesh = mesh_from_spec(&cfg.require::<String>("mesh")?)?;
            let coarse = cfg.raw("coarse-mesh").map(mesh_from_spec).transpose()?;
            let kind: SharpnessKind = cfg.require::<String>("kind")?.parse()?;
            let amps = cfg.list("amplitudes")?.unwrap_or_else(default_amplitudes);
            sharpness_sweep(&mesh, coarse.as_ref(), kind, &amps, opts)?
        }
        Experiment::Concentration => {
            let mesh = mesh_from_spec(&cfg.require::<String>("mesh")?)?;
            let eps = cfg.list("eps")?.unwrap_or_else(|| DEFAULT_EPS.to_vec());
            let small = cfg.list("small")?.unwrap_or_default();
            let large = cfg.list("large")?.unwrap_or_default();
            concentration_experiment(&mesh, &eps, &small, &large, opts)?
        }
        Experiment::Robin => {
            let eps = cfg.list("eps")?.unwrap_or_default();
            match cfg.raw("cap-mesh") {
                Some(spec) => robin_asymptotics(&eps, Some((&mesh_from_spec(spec)?, cfg.require("cap-eps")?)))?,
                None => robin_asymptotics(&eps, None)?,
            }
        }
        Experiment::Bubbling => {
            let mesh = mesh_from_spec(&cfg.require::<String>("mesh")?)?;
            let family = match cfg.require::<String>("family")?.as_str() {
                "conformal" => conformal_bubble_family(&mesh, [0.0, 0.0, 1.0], &cfg.list("ts")?.unwrap_or_default()),
                "atoms" => bubbling_family(&mesh, cfg.require("vertex")?, &cfg.list("fractions")?.unwrap_or_default()),
                other => return Err(CliError::Usage(format!("unknown bubbling family `{other}` (conformal, atoms)"))),
            };
            lambda2_bubbling_audit(&mesh, &family, opts)?
        }
        Experiment::Canonical => {
            let map: ShippedMap = cfg.require::<String>("map")?.parse()?;
            match map {
                ShippedMap::Identity => return Err(CliError::Usage("the identity is Möbius invariant; the canonical family needs a torus map".into())),
                ShippedMap::EquatorialCircle => return Err(CliError::Usage("the equatorial circle map is not an immersion; the canonical family needs a minimal torus".into())),
                _ => {}
            }
            let (mesh, u) = map.build(cfg.require("level")?)?;
            let two_e = 2.0 * dirichlet_energy(&assemble_stiffness(&mesh)?, &u.components)?;
            let expected = if map == ShippedMap::Clifford { -4.0 * PI * PI } else { symmetric_hessian_value(two_e, u.ambient_dim()) };
            canonical_audit(map.name(), &mesh, &u, &CANONICAL_RADII, Some(expected))?
        }
        Experiment::Jacobi => {
            let jacobi = jacobi_audit(cfg.require("level")?)?;
            let conservation = conservation_audit(&ShippedMap::ALL, 3.0, 1e-10)?;
            return Ok(vec![jacobi, conservation]);
        }
        Experiment::Density => density(cfg)?,
    };
    Ok(vec![report])
}

fn lemma21(cfg: &RunConfig, opts: &EigenOptions) -> CliResult<StabilityReport> {
    let k: usize = cfg.require("k")?;
    let map: ShippedMap = cfg.require::<String>("map")?.parse()?;
    let measure = cfg.require::<String>("measure")?;
    if map != ShippedMap::Identity {
        if k != 1 {
            return Err(CliError::Usage("torus eigenmaps are first eigenmaps: use k = 1".into()));
        }
        let (mesh, u) = map.build(cfg.get("level")?.unwrap_or(48))?;
        let mu = measure_from_spec(&measure, &mesh)?;
        return Ok(lemma21_audit(&mesh, &u, &mu, 1, opts)?);
    }
    let mesh = mesh_from_spec(&cfg.require::<String>("mesh")?)?;
    if mesh.topology != Topology::Sphere {
        return Err(CliError::Core(Error::UnsupportedTopology("the identity map needs a sphere mesh".into())));
    }
    let mu = measure_from_spec(&measure, &mesh)?;
    let id = identity_map(&mesh)?;
    let u = match k {
        1 => compose_moebius(&hersch_balance(&mesh, &mu)?.param(), &id)?,
        2 => {
            let spec = spectrum(&mesh, &mu, 2, opts)?;
            let nb = nadirashvili_balance(&mesh, &mu, &spec.eigenvectors[1])?;
            match nb.map {
                Some(u) if nb.balanced => u,
                _ => {
                    return Err(CliError::Core(Error::Precondition(format!(
                        "two-moment balancing did not converge (residual {:.3e}); the k = 2 audit needs a balanced cap reflection",
                        nb.residual
                    ))))
                }
            }
        }
        _ => return Err(CliError::Usage(format!("k = {k}: only 1 and 2 are supported"))),
    };
    Ok(lemma21_audit(&mesh, &u, &mu, k, opts)?)
}

fn hersch(cfg: &RunConfig, opts: &EigenOptions) -> CliResult<StabilityReport> {
    let mesh = mesh_from_spec(&cfg.require::<String>("mesh")?)?;
    let spec = cfg.require::<String>("measure")?;
    let mu = measure_from_spec(&spec, &mesh)?;
    let coarse = match cfg.raw("coarse-mesh") {
        Some(c) if is_file_spec(&spec) => {
            return Err(CliError::Usage(format!("coarse-mesh = {c}: a measure file cannot be re-evaluated on another mesh")));
        }
        Some(c) => {
            let cm = mesh_from_spec(c)?;
            let cmu = measure_from_spec(&spec, &cm)?;
            Some((cm, cmu))
        }
        None => None,
    };
    let (mut rep, _) = hersch_stability_audit(&spec, &mesh, &mu, coarse.as_ref().map(|(m, u)| (m, u)), opts)?;
    match cfg.require::<String>("normalization")?.as_str() {
        "none" => {}
        "unit-mass" => {
            rep.record("unit_mass_c2", hersch_unit_mass_constant(&mesh, &mu, opts)?);
        }
        other => return Err(CliError::Usage(format!("unknown normalization `{other}` (none, unit-mass)"))),
    }
    Ok(rep)
}

fn density(cfg: &RunConfig) -> CliResult<StabilityReport> {
    let map: ShippedMap = cfg.require::<String>("map")?.parse()?;
    let eq = LatticeSpec::equilateral();
    let (surface, default_level) = match map {
        ShippedMap::Clifford => (AnalyticSurface::clifford(), 256),
        ShippedMap::EquilateralS3 => (AnalyticSurface::TorusEigenmap { c: eq.c, d: eq.d }, 256),
        ShippedMap::EquilateralS5 => (AnalyticSurface::EquilateralS5, 256),
        ShippedMap::Identity => (AnalyticSurface::RoundSphere, 5),
        ShippedMap::EquatorialCircle => {
            return Err(CliError::Usage("the equatorial circle map is not an immersion; no area density".into()))
        }
    };
    let (mesh, u) = map.build(cfg.get("level")?.unwrap_or(default_level))?;
    Ok(density_audit(&DensitySetup::new(surface, &mesh, &u))?)
}
