//! Nonparametric bounds on the causal risk difference of a binary exposure on a
//! binary outcome when study inclusion may depend on the outcome.
//!
//! The crate is organised around four layers:
//!
//! * [`probmodel`]: cell tables, sampling design information and conversions.
//! * [`bounds`]: closed-form intervals for the eight sampling designs `A`..`H`.
//! * [`lp`]: a response-function linear program used as an independent oracle.
//! * [`simulation`] and [`inference`]: generating models, Monte Carlo studies and
//!   bootstrap intervals.

pub mod bounds;
pub mod error;
pub mod lp;
pub mod probmodel;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod simulation;
pub mod inference;

pub use bounds::{
    bounds_for_setting, BoundsInput, BoundsInterval, BoundsOptions, CaseLabel, SettingTag,
    TermPolicy,
};
pub use error::{Error, Result};
pub use probmodel::{
    ConditionalCellTable, ConditionalCellTableIv, DesignInfo, ExternalDesign, IvObservation,
    JointCellTable, JointCellTableIv, RSource, SampleCounts,
};
