//! Rank-one lattice rules, their tensor-grid improvement, and multilevel
//! dimension iteration over a symbolic expression store.

pub mod corpus;
pub mod expr;
pub mod fit;
pub mod lattice;
pub mod mdi;
mod par;
pub mod quad;
pub mod suite;
pub mod transform;

pub use corpus::{lookup, CorpusEntry, CorpusError, CORPUS};
pub use expr::{parse, BudgetExceeded, EvalError, Expr, ExprStore, ParseError, Tape, VarAssignment};
pub use fit::{fit_power_law, FitError, FitPoint, FitResult, Model};
pub use lattice::{Criterion, LatticeError, LatticeRule, WeightModel};
pub use mdi::{IterationOrder, MdiConfig, MdiError, MdiReport};
pub use quad::{Method, QuadratureResult};
pub use suite::{SuiteError, SuiteOptions, SuiteRow};
pub use transform::{AxisGridSet, ImprovedRule, NodeMap, TransformError};

/// Any error the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Mdi(#[from] MdiError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
}
