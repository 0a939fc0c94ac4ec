use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty data: {0}")]
    EmptyData(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not enough degrees of freedom: n = {n}, d = {d}")]
    DegreesOfFreedom { n: usize, d: usize },
    #[error("rank-deficient design in {0}")]
    RankDeficient(&'static str),
    #[error("row {row} has leverage one")]
    LeverageDegenerate { row: usize },
    #[error("column {column} has zero norm")]
    ZeroNormColumn { column: usize },
    #[error("lasso solver did not converge (KKT residual {kkt_residual:e})")]
    SolverDiverged { kkt_residual: f64 },
    #[error("inequality violated at the expansion point: value {value:e} exceeds tolerance {tolerance:e}")]
    InfeasibleAtPoint { value: f64, tolerance: f64 },
    #[error("empty selection mid-pipeline at node {node}")]
    EmptySelection { node: usize },
    #[error("pipeline contains a cycle through edge {from} -> {to}")]
    Cycle { from: usize, to: usize },
    #[error("invalid node placement: {0}")]
    Placement(String),
    #[error("invalid pipeline: {0}")]
    Graph(String),
    #[error("branches entering combine node {node} disagree on the response line or on the non-combined set")]
    BranchConsistency { node: usize },
    #[error("feature {feature} is not among the selected features")]
    NotSelected { feature: usize },
    #[error("truncation set has negligible mass (log mass {log_mass})")]
    DegenerateTruncation { log_mass: f64 },
    #[error("line search stalled at z = {z} after {segments} segments")]
    SearchStall { z: f64, segments: usize },
    #[error("selection at the observed statistic {z} differs from the observed selection")]
    TargetMismatch { z: f64 },
    #[error("no feasible candidate pipeline")]
    NoFeasibleCandidate,
    #[error("feature {feature}: {source}")]
    Feature {
        feature: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    /// Errors that depend only on the design and on the current `(M, O)`,
    /// never on the response itself. They persist over a whole constancy
    /// segment, so the line search can record the segment as non-matching.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Error::DegreesOfFreedom { .. }
                | Error::RankDeficient(_)
                | Error::LeverageDegenerate { .. }
                | Error::ZeroNormColumn { .. }
                | Error::EmptySelection { .. }
        )
    }

    /// True for failures that stem from the input data or configuration
    /// rather than from the numerical machinery.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Feature { source, .. } => source.is_data_error(),
            Error::EmptyData(_)
            | Error::Dimension(_)
            | Error::InvalidParameter(_)
            | Error::DegreesOfFreedom { .. }
            | Error::RankDeficient(_)
            | Error::LeverageDegenerate { .. }
            | Error::ZeroNormColumn { .. }
            | Error::EmptySelection { .. }
            | Error::Cycle { .. }
            | Error::Placement(_)
            | Error::Graph(_)
            | Error::NotSelected { .. }
            | Error::NoFeasibleCandidate => true,
            _ => false,
        }
    }

    pub(crate) fn for_feature(self, feature: usize) -> Error {
        Error::Feature { feature, source: alloc::boxed::Box::new(self) }
    }
}
