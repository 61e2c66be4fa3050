//! Jones-calculus model of the three-stage apparatus.
//!
//! Modes are `(path, time bin, polarization)`. Elements act as unitary maps
//! on the modes of their input paths; loss is modelled only by routing
//! amplitude into paths without a detector.

pub mod element;
pub mod imperfection;
pub mod network;
pub mod stages;

pub use element::{deg, jones, retarder, Element, ElementKind, Retarder};
pub use imperfection::{ImperfectionConfig, Perturbation};
pub use network::{Click, DetectionDistribution, Detector, OpticalMode, OpticalNetwork, OpticalState};
pub use stages::{
    analyze, build_bob, build_stage1, build_stage2, build_stage2_unitary, build_stage3,
    dephased_distribution, detector_outcomes, source_state, Pipeline, GATE_BIN,
};
