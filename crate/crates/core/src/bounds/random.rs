use super::confounded::{finish_linear, linear_bounds};
use super::{BoundsInterval, SettingTag};
use crate::error::Result;
use crate::probmodel::{ConditionalCellTable, ConditionalCellTableIv};

/// `-(p01 + p10) <= θ <= 1 - (p01 + p10)` for a full-population table.
pub fn robins_bounds(t: &ConditionalCellTable) -> BoundsInterval {
    let b = linear_bounds(SettingTag::A, &[t.cells()]).expect("shape is fixed");
    finish_linear(SettingTag::A, b).expect("width is one")
}

/// Instrument bounds from population tables `P(X, Y | Z=z)`.
///
/// Errors with an inconsistent instance when the tables violate the
/// instrument inequalities.
pub fn balke_pearl_iv_bounds(t: &ConditionalCellTableIv) -> Result<BoundsInterval> {
    let cells = [t.per_z[0].cells(), t.per_z[1].cells()];
    finish_linear(SettingTag::B, linear_bounds(SettingTag::B, &cells)?)
}
