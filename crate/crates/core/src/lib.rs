//! Safety assessment toolkit for statistical machine learning components.
//!
//! Each module covers one technical safety concept or a shared building block:
//! quantitative acceptance evaluation, output monitoring, redundant voting,
//! Monte Carlo simulation of architectures, development process assessment,
//! proven-in-use qualification and cost comparison of the concepts.

pub mod compare;
pub mod monitor;
pub mod process;
pub mod proven_in_use;
pub mod quant_eval;
pub mod redundancy;
pub mod safety;
pub mod simulator;
pub mod stats;

pub use safety::{
    class_for_sil, DemandProfile, Emission, Outcome, PerformanceClass, SafeStateCommand, SafetyError, SilLevel,
    SilMapping, Verdict,
};

/// Crate version embedded into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
