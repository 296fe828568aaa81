//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex count {n} outside supported range {min}..={max}")]
    SizeOutOfRange { n: usize, min: usize, max: usize },
    #[error("3-regular graphs need an even vertex count, got {n}")]
    OddVertexCount { n: usize },
    #[error("ring lattice with {k} neighbours needs more than {k} vertices, got {n}")]
    RingTooSmall { n: usize, k: usize },
    #[error("edge ({u}, {v}) invalid for {n} vertices (need u < v < n)")]
    InvalidEdge { u: usize, v: usize, n: usize },
    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize },
    #[error("assignment {assignment} out of range for {n} vertices")]
    AssignmentOutOfRange { assignment: u64, n: usize },
    #[error("expected {expected} amplitudes, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("state is not normalized: |psi|^2 = {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },
    #[error("qubit {q} out of range for {n} qubits")]
    QubitOutOfRange { q: usize, n: usize },
    #[error("rotation needs two distinct qubits, got {q} twice")]
    DegenerateQubitPair { q: usize },
    #[error("qubit subset must be a proper nonempty subset without repeats")]
    BadSubset,
    #[error("cost spectrum collapsed: standard deviation {sigma:e} below floor")]
    ConvergedSpectrum { sigma: f64 },
    #[error("degenerate instance: optimal cost is zero")]
    DegenerateOptimum,
    #[error("parameter vector has length {actual}, ansatz has {expected}")]
    ParameterCountMismatch { expected: usize, actual: usize },
    #[error("generator failed after {attempts} attempts")]
    GeneratorExhausted { attempts: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
