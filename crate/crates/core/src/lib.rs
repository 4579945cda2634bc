//! Discrete spectral geometry on triangulated spheres and flat tori:
//! finite-element eigenproblems for measures, Möbius balancing, harmonic-map
//! diagnostics, weak-norm estimates and the stability experiments built on them.

pub mod eigen;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geom;
pub mod harmonic;
pub mod locate;
pub mod maps;
pub mod measure;
pub mod mesh;
pub mod moebius;
pub mod optim;
pub mod quadrature;
pub mod sobolev;
pub mod sparse;

pub use error::{Error, Result};

/// Set the thread count used by the dense and sparse factorizations.
/// `Some(1)` runs single-threaded, which makes every result bit-reproducible;
/// `None` or `Some(0)` uses all available cores.
pub fn set_threads(threads: Option<usize>) {
    let par = match threads {
        Some(1) => faer::Par::Seq,
        Some(n) if n > 1 => faer::Par::rayon(n),
        _ => faer::Par::rayon(0),
    };
    faer::set_global_parallelism(par);
}
