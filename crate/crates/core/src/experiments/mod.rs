//! Reproducible audits; each returns a [`StabilityReport`].

pub mod bubbling;
pub mod concentration;
pub mod geometry;
pub mod hersch;
pub mod report;
pub mod robin;

pub use bubbling::{bubbling_family, lambda2_bubbling_audit};
pub use concentration::concentration_experiment;
pub use geometry::{canonical_audit, conservation_audit, density_audit, jacobi_audit, ShippedMap};
pub use hersch::{hersch_stability_audit, lemma21_audit, sharpness_sweep, SharpnessKind};
pub use report::{Check, ReportRow, StabilityReport};
pub use robin::robin_asymptotics;
