//! Correlation boxes with two binary inputs and two binary outputs per party.
//!
//! The crate is organised in four layers:
//!
//! * [`boxes`] — the 16-entry probability table, the 24 polytope vertices,
//!   convex mixing, local relabelings and sampling.
//! * [`criteria`] — correlator-level tests: CHSH, Tsirelson, the Landau
//!   quantumness condition, the three quadratic (Uffink-type) inequalities,
//!   the vector-geometry identity and the AM-GM dominance gap.
//! * [`slices`] — two-parameter mixture families anchored at white noise,
//!   grid classification and ray bisection of criterion boundaries.
//! * [`game`] — the information-causality game played with the nested
//!   random-access-code protocol, exactly and by Monte Carlo.
//!
//! [`suites`] bundles the randomized property checks used by the CLI
//! `verify` command, and [`fmt`] holds the shared numeric output format.

pub mod boxes;
pub mod criteria;
pub mod error;
pub mod fmt;
pub mod game;
pub mod slices;
pub mod suites;

pub use boxes::{
    CorrelatorVector, JointBox, LocalLabel, Marginals, NonlocalLabel, SymmetryElement,
    ValidationReport, Vertex,
};
pub use criteria::{
    amgm_gap, chsh, full_report, geometry, merge_condition, quadratics, tlm, ChshReport,
    CriteriaReport, GapReport, GeometryReport, QuadraticReport, TlmReport,
};
pub use error::{BoxError, CriteriaError, GameError, SliceError};
pub use game::{
    exact_total_information, ic_threshold_scan, monte_carlo_game, BiasPair, GameConfig, GameMode,
    GameResult, Transcript,
};
pub use slices::{Criterion, MixtureFamily, MixtureSpec, SecondTerm, SliceGrid};
