use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backend mismatch: {0}")]
    BackendMismatch(String),
    #[error("invalid backend: {0}")]
    InvalidBackend(String),
    #[error("scalar product is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("morphism is not invertible: {0}")]
    NotInvertible(String),
    #[error("morphism is not injective: {0}")]
    NotInjective(String),
    #[error("operator is not self-adjoint: {0}")]
    NotSelfAdjoint(String),
    #[error("sequence is not exact: {0}")]
    NotExact(String),
    #[error("morphism does not induce an isomorphism in the extended category: {0}")]
    NotAnIsomorphism(String),
    #[error("no canonical element: the torsion part is not tau-trivial ({0})")]
    NoCanonicalElement(String),
    #[error("determinant class verdict is inconclusive: {0}")]
    Inconclusive(String),
    #[error("differentials do not square to zero: {0}")]
    NotAComplex(String),
    #[error("complex is not acyclic: {0}")]
    NotAcyclic(String),
    #[error("not a chain map: {0}")]
    NotAChainMap(String),
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),
    #[error("invalid epsilon: {0}")]
    InvalidEpsilon(String),
    #[error("group mismatch: {0}")]
    GroupMismatch(String),
    #[error("representation is not unimodular: {0}")]
    NotUnimodular(String),
    #[error("unsupported cell: {0}")]
    UnsupportedCell(String),
    #[error("invalid cell complex: {0}")]
    InvalidComplex(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
