//! Simulation and verification toolkit for the quantum-optical Mean King's
//! Problem.
//!
//! * [`linalg`]: labeled complex vectors and operators
//! * [`protocol`]: preparation, Bob's projections and unitaries, the VAA
//!   measurement and Alice's inference
//! * [`strategies`]: single-qubit benchmark strategies and their optima
//! * [`optics`]: Jones-calculus model of the three-stage apparatus
//! * [`experiment`]: Monte Carlo runs and count tables
//! * [`golden`], [`verify`]: reference files and invariant checks

pub mod error;
pub mod experiment;
pub mod format;
pub mod golden;
pub mod linalg;
pub mod optics;
pub mod protocol;
pub mod strategies;
pub mod verify;

pub use error::{Error, Result};
pub use experiment::{
    run_plan, simulate_run, tally, threshold_report, BobPolicy, CountTable, RunRecord, Session,
    Simulator,
    ThresholdReport, TrialPlan,
};
pub use linalg::{Amplitude, ModeBasis, ModeLabel, Operator, Pol, StateVector};
pub use optics::{DetectionDistribution, ImperfectionConfig, Pipeline};
pub use protocol::{
    BobChoice, ChallengePair, Game, Observable, ProjectionLabel, UnitaryLabel, VaaOutcome,
    VaaVariant,
};
pub use strategies::{
    BlochDirection, SearchReport, SingleQubitStrategy, CHALLENGE_THRESHOLD, PROJECTION_THRESHOLD,
};
