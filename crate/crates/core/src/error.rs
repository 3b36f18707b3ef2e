use thiserror::Error;

use crate::bounds::SettingTag;
use crate::probmodel::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid probability table: {0}")]
    InvalidTable(ValidationReport),

    #[error("empty instrument stratum z={0}")]
    EmptyInstrumentStratum(usize),

    #[error("empty outcome stratum y={0}")]
    EmptyOutcomeStratum(usize),

    #[error("empty sample")]
    EmptySample,

    #[error("selection probability unavailable")]
    SelectionUnavailable,

    #[error("selection probability {0} outside (0, 1]")]
    SelectionOutOfRange(f64),

    #[error("instrument prevalence p(Z=1) missing")]
    MissingInstrumentPrevalence,

    #[error("instrument prevalence {0} outside (0, 1)")]
    InstrumentPrevalenceOutOfRange(f64),

    #[error("inconsistent selection/instrument inputs: p(S=1|Z={z}) = {value}")]
    InconsistentSelection { z: usize, value: f64 },

    #[error("inconsistent design: {0}")]
    InconsistentDesign(String),

    #[error("inconsistent instance: lower {lower} exceeds upper {upper}")]
    InconsistentInstance { lower: f64, upper: f64 },

    #[error("setting {tag} expects {expected} data")]
    ShapeMismatch { tag: SettingTag, expected: &'static str },

    #[error("setting {0} requires design information")]
    MissingDesign(SettingTag),

    #[error("setting {0} is not supported here")]
    UnsupportedSetting(SettingTag),

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bootstrap: {0}")]
    Bootstrap(String),
}

impl Error {
    /// Whether the error signals data incompatible with the assumed diagram
    /// rather than malformed input.
    pub fn is_inconsistent_instance(&self) -> bool {
        matches!(self, Error::InconsistentInstance { .. })
    }
}
