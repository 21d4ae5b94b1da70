//! Numerical companion library for a family of size-m hypergeometric residue
//! problems: explicit residue matrices with one-dimensional flag structure,
//! their Calogero-Moser conjugation flows, rational / trigonometric / elliptic
//! Cauchy matrix identities, Frobenius series solutions, monodromy data, and a
//! free-fermion vacuum-expectation engine whose lattice sums reproduce the
//! elliptic kernel 1/sn.
//!
//! Everything is double precision and small (m <= 6 throughout); the point is
//! cross-checking closed formulas against independently computed routes, not
//! scale. The `hgforge` binary drives the same checks from the command line.

pub mod cauchy;
pub mod cli;
pub mod cm;
pub mod elliptic;
pub mod flows;
pub mod fock;
pub mod linalg;
pub mod monodromy;
pub mod oracle;
pub mod params;
pub mod report;
pub mod residue;
pub mod series;

use num_complex::Complex64;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is singular to working precision ({context})")]
    Singular { context: String },

    #[error("near-resonant denominator {family}[{i},{j}] = {value:e}; parameters too close to an integer configuration")]
    Resonance {
        family: &'static str,
        i: usize,
        j: usize,
        value: f64,
    },

    #[error("genericity violated: {0}")]
    Genericity(String),

    #[error("matrix not hermitian (max deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("eigenvalues not distinct at working precision (min gap {gap:e})")]
    EigenvalueCollision { gap: f64 },

    #[error("sampling gave up after {attempts} attempts ({context})")]
    SamplingExhausted { attempts: usize, context: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Near-zero guard used before dividing by structured denominators.
/// `scale` should be a typical magnitude of the parameter set.
pub(crate) fn guard_denominator(
    value: Complex64,
    scale: f64,
    family: &'static str,
    i: usize,
    j: usize,
) -> Result<Complex64> {
    if value.norm() < 1e-8 * scale.max(1.0) {
        Err(Error::Resonance {
            family,
            i,
            j,
            value: value.norm(),
        })
    } else {
        Ok(value)
    }
}
