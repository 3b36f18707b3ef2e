use super::linear::{self, LinearTerm};
use super::{pick_max, pick_min, ActiveTerms, BoundsInterval, CaseLabel, SettingTag, TermFamily};
use crate::error::{Error, Result};
use crate::probmodel::{JointCellTable, JointCellTableIv};
use crate::scalar::Scalar;

/// Endpoints of a design whose bound terms are affine in the cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBounds<T> {
    pub lower: T,
    pub upper: T,
    pub family: TermFamily,
    pub lower_terms: Vec<usize>,
    pub upper_terms: Vec<usize>,
}

impl<T> LinearBounds<T> {
    pub fn active_terms(&self) -> ActiveTerms {
        ActiveTerms::from_indices(self.family, &self.lower_terms, &self.upper_terms)
    }
}

fn terms_for(tag: SettingTag) -> Result<(&'static [LinearTerm], &'static [LinearTerm], TermFamily, usize)> {
    Ok(match tag {
        SettingTag::A => (&linear::ROBINS_LOWER, &linear::ROBINS_UPPER, TermFamily::Robins, 1),
        SettingTag::B => (&linear::BALKE_PEARL_LOWER, &linear::BALKE_PEARL_UPPER, TermFamily::BalkePearl, 2),
        SettingTag::E | SettingTag::G => {
            (&linear::CONFOUNDED_LOWER, &linear::CONFOUNDED_UPPER, TermFamily::Confounded, 1)
        }
        SettingTag::F => (&linear::CONFOUNDED_IV_LOWER, &linear::CONFOUNDED_IV_UPPER, TermFamily::ConfoundedIv, 2),
        SettingTag::H => (&linear::EXPOSURE_IV_LOWER, &linear::EXPOSURE_IV_UPPER, TermFamily::ExposureIv, 2),
        SettingTag::C | SettingTag::D => return Err(Error::UnsupportedSetting(tag)),
    })
}

/// Raw (unclamped) endpoints for `A`, `B`, `E`, `F`, `G`, `H`.
///
/// `cells` holds one `[x][y]` block per instrument value: population cells for
/// `A`/`B`, joint selected cells `P(X, Y, S=1 | Z)` otherwise.
pub fn linear_bounds<T: Scalar>(tag: SettingTag, cells: &[[[T; 2]; 2]]) -> Result<LinearBounds<T>> {
    let (lo, up, family, strata) = terms_for(tag)?;
    if cells.len() != strata {
        return Err(Error::ShapeMismatch {
            tag,
            expected: if strata == 2 { "instrument-stratified" } else { "unstratified" },
        });
    }
    let lower_vals: Vec<_> = lo.iter().map(|t| Some(t.eval(cells))).collect();
    let upper_vals: Vec<_> = up.iter().map(|t| Some(t.eval(cells))).collect();
    let (lower, lower_terms) = pick_max(&lower_vals).expect("nonempty term list");
    let (upper, upper_terms) = pick_min(&upper_vals).expect("nonempty term list");
    Ok(LinearBounds { lower, upper, family, lower_terms, upper_terms })
}

pub(super) fn finish_linear(tag: SettingTag, b: LinearBounds<f64>) -> Result<BoundsInterval> {
    let active = b.active_terms();
    BoundsInterval::finish(b.lower, b.upper, tag, CaseLabel::NotApplicable, active)
}

/// `p111 + p001 - 1 <= θ <= 1 - p011 - p101` from the selected joint cells.
pub fn confounded_ods_bounds(j: &JointCellTable) -> BoundsInterval {
    let b = linear_bounds(SettingTag::E, &[j.selected_cells()]).expect("shape is fixed");
    finish_linear(SettingTag::E, b).expect("lower never exceeds upper for a valid joint table")
}

pub fn confounded_ods_iv_bounds(j: &JointCellTableIv) -> Result<BoundsInterval> {
    let cells = [j.per_z[0].selected_cells(), j.per_z[1].selected_cells()];
    finish_linear(SettingTag::F, linear_bounds(SettingTag::F, &cells)?)
}

pub fn confounded_exposure_ods_iv_bounds(j: &JointCellTableIv) -> Result<BoundsInterval> {
    let cells = [j.per_z[0].selected_cells(), j.per_z[1].selected_cells()];
    finish_linear(SettingTag::H, linear_bounds(SettingTag::H, &cells)?)
}
