use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inadmissible word {0:?} (letter followed by its inverse)")]
    Inadmissible(Vec<usize>),

    #[error("derivative {derivative} on the branch cut (-inf, 0] at z = {z}")]
    BranchCut { z: Complex64, derivative: Complex64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("pressure has no sign change on [0, 1]: P(0) = {p0}, P(1) = {p1}")]
    NoSignChange { p0: f64, p1: f64 },

    #[error("contour too close to zero: |det| = {modulus:e} at s = {at}")]
    ContourTooClose { at: Complex64, modulus: f64 },

    #[error("Newton refinement from {start} did not converge: last iterate {last}, |det| = {residual:e}")]
    NoConvergence { start: Complex64, last: Complex64, residual: f64 },

    #[error("unresolved cluster of {count} zeros in [{re0}, {re1}] x [{im0}, {im1}]")]
    UnresolvedCluster { count: i64, re0: f64, re1: f64, im0: f64, im1: f64 },

    #[error("Euler product refused: Re(s) = {re} <= delta + margin = {bound}")]
    EulerDivergent { re: f64, bound: f64 },

    #[error("geodesic table complete only to length {have}, need {need}; raise the word depth cap above {depth}")]
    IncompleteTable { have: f64, need: f64, depth: usize },

    #[error("generator entries are not integers")]
    NonInteger,

    #[error("implicit curve continuation failed at theta = {theta:?} after {shrinks} shrinks of epsilon")]
    Continuation { theta: Vec<f64>, shrinks: usize },

    #[error("Cheeger sandwich violated for {graph}: {detail}")]
    Sandwich { graph: String, detail: String },
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::Eigen(_)
                | Error::NoConvergence { .. }
                | Error::UnresolvedCluster { .. }
                | Error::ContourTooClose { .. }
                | Error::Continuation { .. }
        )
    }
}
