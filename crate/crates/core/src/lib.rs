//! Functional differential graph estimation: direct estimation of the
//! blockwise difference between two functional graphical models.

pub mod diffgraph;
pub mod error;
pub mod evalkit;
pub mod fpca;
pub mod funcdata;
pub mod io;
pub mod pipeline;
pub mod simgen;
pub mod solver;
pub mod theory;

pub use diffgraph::{EdgeSet, VoteConfig, VoteTally};
pub use error::{Error, Result};
pub use evalkit::{ExperimentConfig, ExperimentResult, Method, RocCurve};
pub use fpca::{BasisMode, ScoreCovariance, ScoreMatrix};
pub use funcdata::{BasisSpec, CurvePanel, SmoothedPanel, TimeGrid};
pub use pipeline::{EstimateConfig, EstimateOutput, LambdaGrid, SmoothingChoice, TruncationChoice};
pub use simgen::{PrecisionPair, SimModel, SimModelSpec};
pub use solver::{DeltaEstimate, SolveReport, SolverConfig, StepSize};
pub use theory::{TheoryConstants, TheoryInputs};
