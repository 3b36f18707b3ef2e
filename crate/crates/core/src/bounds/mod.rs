//! Closed-form bounds on the causal risk difference `θ = P(Y(1)=1) - P(Y(0)=1)`.
//!
//! Designs are tagged `A`..`H`:
//!
//! | tag | sampling | instrument |
//! |-----|----------|------------|
//! | A, B | random | no, yes |
//! | C, D | outcome-dependent, unconfounded | no, yes |
//! | E, F | outcome-dependent, confounded | no, yes |
//! | G, H | exposure- and outcome-dependent, confounded | no, yes |

mod confounded;
pub mod linear;
mod random;
mod unconfounded;
mod unconfounded_iv;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::probmodel::{
    joint_from_conditional, joint_from_conditional_iv, selection_given_z, ConditionalCellTable,
    ConditionalCellTableIv, DesignInfo, IvObservation, ObservedTables, PROB_TOL,
};
use crate::scalar::Scalar;

pub use confounded::{
    confounded_exposure_ods_iv_bounds, confounded_ods_bounds, confounded_ods_iv_bounds,
    linear_bounds, LinearBounds,
};
pub use random::{balke_pearl_iv_bounds, robins_bounds};
pub use unconfounded::{outcome_conditional_bounds, unconfounded_ods_bounds};
pub use unconfounded_iv::{
    envelope_bounds, unconfounded_ods_iv_bounds, unconfounded_ods_iv_unrefined, RowState,
    UnrefinedIv,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SettingTag {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl SettingTag {
    pub const ALL: [SettingTag; 8] = [
        SettingTag::A,
        SettingTag::B,
        SettingTag::C,
        SettingTag::D,
        SettingTag::E,
        SettingTag::F,
        SettingTag::G,
        SettingTag::H,
    ];

    pub fn has_instrument(self) -> bool {
        matches!(self, SettingTag::B | SettingTag::D | SettingTag::F | SettingTag::H)
    }

    /// Whether the design needs `P(S=1)`.
    pub fn needs_design(self) -> bool {
        !matches!(self, SettingTag::A | SettingTag::B)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SettingTag::A => "A",
            SettingTag::B => "B",
            SettingTag::C => "C",
            SettingTag::D => "D",
            SettingTag::E => "E",
            SettingTag::F => "F",
            SettingTag::G => "G",
            SettingTag::H => "H",
        }
    }
}

impl fmt::Display for SettingTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SettingTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SettingTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown setting {s:?}"))
    }
}

/// Which branch of the zero-cell case analysis produced an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseLabel {
    /// All exposure odds ratios defined; zero numerators allowed.
    Primary,
    /// Some ratio undefined but computable after recoding the exposure.
    InvertedExposure,
    /// An outcome stratum is empty and selection is known to be nondeterministic.
    Case2Alternative,
    /// An outcome stratum is empty in some instrument strata only; selection is
    /// inferred to be nondeterministic from the strata where it is observed.
    InferredNondeterministic,
    /// An outcome stratum is empty throughout and selection is unknown.
    ConfoundedFallback,
    /// No case analysis applies to the design.
    NotApplicable,
}

/// Formula families whose terms are reported in [`ActiveTerms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermFamily {
    Robins,
    BalkePearl,
    Unconfounded,
    UnconfoundedIv,
    Confounded,
    ConfoundedIv,
    ExposureIv,
    OutcomeConditional,
}

impl TermFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            TermFamily::Robins => "robins",
            TermFamily::BalkePearl => "balke_pearl",
            TermFamily::Unconfounded => "unconfounded",
            TermFamily::UnconfoundedIv => "unconfounded_iv",
            TermFamily::Confounded => "confounded",
            TermFamily::ConfoundedIv => "confounded_iv",
            TermFamily::ExposureIv => "exposure_iv",
            TermFamily::OutcomeConditional => "outcome_conditional",
        }
    }
}

/// A 1-based term index within a family; serialized as `family:index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TermId {
    pub family: TermFamily,
    pub index: usize,
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family.as_str(), self.index)
    }
}

impl Serialize for TermId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ActiveTerms {
    pub lower: Vec<TermId>,
    pub upper: Vec<TermId>,
}

impl ActiveTerms {
    pub(crate) fn from_indices(family: TermFamily, lower: &[usize], upper: &[usize]) -> Self {
        let ids = |v: &[usize]| v.iter().map(|&index| TermId { family, index }).collect();
        Self { lower: ids(lower), upper: ids(upper) }
    }

    pub(crate) fn swapped(self) -> Self {
        Self { lower: self.upper, upper: self.lower }
    }
}

/// Raw endpoint values replaced by clamping to `[-1, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Clamping {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Clamping {
    pub fn any(&self) -> bool {
        self.lower.is_some() || self.upper.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsInterval {
    pub lower: f64,
    pub upper: f64,
    pub setting: SettingTag,
    pub case: CaseLabel,
    pub active_terms: ActiveTerms,
    pub clamped: Clamping,
}

impl BoundsInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `θ` inside the interval up to `slack`.
    pub fn contains(&self, theta: f64, slack: f64) -> bool {
        theta >= self.lower - slack && theta <= self.upper + slack
    }

    pub fn excludes_null(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }

    /// Builds an interval from raw endpoints: rejects crossings beyond the
    /// probability tolerance, collapses smaller ones and clamps to `[-1, 1]`.
    pub(crate) fn finish(
        lower: f64,
        upper: f64,
        setting: SettingTag,
        case: CaseLabel,
        active_terms: ActiveTerms,
    ) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper + PROB_TOL {
            return Err(Error::InconsistentInstance { lower, upper });
        }
        let (mut lower, mut upper) = (lower, upper);
        if lower > upper {
            let mid = 0.5 * (lower + upper);
            lower = mid;
            upper = mid;
        }
        let mut clamped = Clamping::default();
        if lower < -1.0 || lower > 1.0 {
            clamped.lower = Some(lower);
            lower = lower.clamp(-1.0, 1.0);
        }
        if upper < -1.0 || upper > 1.0 {
            clamped.upper = Some(upper);
            upper = upper.clamp(-1.0, 1.0);
        }
        Ok(Self { lower, upper, setting, case, active_terms, clamped })
    }

    /// Bounds for the recoded exposure mapped back: `[-u*, -l*]`.
    pub(crate) fn negate_swap(self, case: CaseLabel) -> Self {
        Self {
            lower: -self.upper,
            upper: -self.lower,
            setting: self.setting,
            case,
            active_terms: self.active_terms.swapped(),
            clamped: Clamping { lower: self.clamped.upper.map(|v| -v), upper: self.clamped.lower.map(|v| -v) },
        }
    }
}

/// How to read the ambiguous subterms of the unconfounded instrument bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermPolicy {
    /// Valid terms keeping the wider reading of the ambiguous subterms.
    #[default]
    Conservative,
    /// Terms exactly as published, including readings that can exclude `θ`.
    Literal,
    /// Valid terms with the parallel-structure reading of the ambiguous subterms.
    Tight,
}

impl TermPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            TermPolicy::Conservative => "conservative",
            TermPolicy::Literal => "literal",
            TermPolicy::Tight => "tight",
        }
    }
}

impl FromStr for TermPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "conservative" => Ok(TermPolicy::Conservative),
            "literal" => Ok(TermPolicy::Literal),
            "tight" => Ok(TermPolicy::Tight),
            _ => Err(format!("unknown term policy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsOptions {
    pub term_policy: TermPolicy,
}

/// An exposure odds ratio `P(X=1, Y=y | ·) / P(X=0, Y=y | ·)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ratio {
    Defined(f64),
    Undefined,
}

impl Ratio {
    pub fn new(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Ratio::Undefined
        } else {
            Ratio::Defined(num / den)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Defined(v) => Some(v),
            Ratio::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Ratio::Defined(_))
    }
}

/// `A(y) = p_{1y.1} / p_{0y.1}` for `y = 0, 1`.
pub fn compute_ratios(t: &ConditionalCellTable) -> [Ratio; 2] {
    [0, 1].map(|y| Ratio::new(t.p(1, y), t.p(0, y)))
}

/// `B(y, z) = p_{1y.z1} / p_{0y.z1}`, indexed `[y][z]`.
pub fn compute_ratios_iv(t: &ConditionalCellTableIv) -> [[Ratio; 2]; 2] {
    [0, 1].map(|y| [0, 1].map(|z| Ratio::new(t.p(z, 1, y), t.p(z, 0, y))))
}

/// Largest value among the present terms and the 1-based indices attaining it.
pub(crate) fn pick_max<T: Scalar>(terms: &[Option<T>]) -> Option<(T, Vec<usize>)> {
    pick(terms, |a, b| a > b)
}

pub(crate) fn pick_min<T: Scalar>(terms: &[Option<T>]) -> Option<(T, Vec<usize>)> {
    pick(terms, |a, b| a < b)
}

fn pick<T: Scalar>(terms: &[Option<T>], better: impl Fn(&T, &T) -> bool) -> Option<(T, Vec<usize>)> {
    let mut best: Option<T> = None;
    for v in terms.iter().flatten() {
        if best.as_ref().is_none_or(|b| better(v, b)) {
            best = Some(v.clone());
        }
    }
    let best = best?;
    let idx = terms
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.as_ref().filter(|v| v.ties(&best)).map(|_| i + 1))
        .collect();
    Some((best, idx))
}

/// Observed data in the shape a design consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundsInput {
    Plain(ConditionalCellTable),
    Instrument(IvObservation),
}

impl From<ObservedTables> for BoundsInput {
    fn from(t: ObservedTables) -> Self {
        match t {
            ObservedTables::Plain(t) => BoundsInput::Plain(t),
            ObservedTables::Instrument(o) => BoundsInput::Instrument(o),
        }
    }
}

impl BoundsInput {
    fn pooled(&self) -> ConditionalCellTable {
        match self {
            BoundsInput::Plain(t) => *t,
            BoundsInput::Instrument(o) => o.pooled(),
        }
    }
}

/// Dispatches to the bound matching `tag`.
///
/// For `A` and `B` the tables are read as full-population tables and no design
/// is needed. Instrument data are pooled for designs without an instrument.
pub fn bounds_for_setting(
    tag: SettingTag,
    input: &BoundsInput,
    design: Option<&DesignInfo>,
    opts: &BoundsOptions,
) -> Result<BoundsInterval> {
    let design = || design.ok_or(Error::MissingDesign(tag));
    let instrument = || match input {
        BoundsInput::Instrument(o) => Ok(o),
        BoundsInput::Plain(_) => Err(Error::ShapeMismatch { tag, expected: "instrument-stratified" }),
    };
    match tag {
        SettingTag::A => Ok(robins_bounds(&input.pooled())),
        SettingTag::B => balke_pearl_iv_bounds(&instrument()?.tables),
        SettingTag::C => unconfounded_ods_bounds(&input.pooled(), design()?),
        SettingTag::D => unconfounded_ods_iv_bounds(instrument()?, design()?, opts),
        SettingTag::E | SettingTag::G => {
            let j = joint_from_conditional(&input.pooled(), design()?);
            let mut b = confounded_ods_bounds(&j);
            b.setting = tag;
            Ok(b)
        }
        SettingTag::F | SettingTag::H => {
            let obs = instrument()?;
            let r_z = selection_given_z(obs, design()?)?;
            let j = joint_from_conditional_iv(&obs.tables, r_z);
            if tag == SettingTag::F {
                confounded_ods_iv_bounds(&j)
            } else {
                confounded_exposure_ods_iv_bounds(&j)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_examples() {
        let t = ConditionalCellTable::from_cells(0.25, 0.25, 0.25, 0.25).unwrap();
        assert_eq!(compute_ratios(&t)[0], Ratio::Defined(1.0));
        let t = ConditionalCellTable::from_cells(0.0, 0.3, 0.3, 0.4).unwrap();
        assert_eq!(compute_ratios(&t)[0], Ratio::Undefined);
        let t = ConditionalCellTable::from_cells(0.2, 0.2, 0.1, 0.5).unwrap();
        let a = compute_ratios(&t);
        assert!((a[0].value().unwrap() - 0.5).abs() < 1e-15);
        assert!((a[1].value().unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn pick_reports_ties() {
        let (v, idx) = pick_max(&[Some(0.1), None, Some(0.3), Some(0.3)]).unwrap();
        assert_eq!((v, idx), (0.3, vec![3, 4]));
        let (v, idx) = pick_min(&[Some(0.1), Some(0.1 + 1e-14)]).unwrap();
        assert_eq!((v, idx), (0.1, vec![1, 2]));
        assert!(pick_min::<f64>(&[None, None]).is_none());
    }

    #[test]
    fn finish_clamps_and_rejects() {
        let b = BoundsInterval::finish(-1.2, 0.5, SettingTag::C, CaseLabel::Primary, ActiveTerms::default())
            .unwrap();
        assert_eq!(b.lower, -1.0);
        assert_eq!(b.clamped.lower, Some(-1.2));
        assert!(BoundsInterval::finish(0.5, 0.4, SettingTag::C, CaseLabel::Primary, ActiveTerms::default())
            .unwrap_err()
            .is_inconsistent_instance());
        let b = BoundsInterval::finish(0.5 + 1e-10, 0.5, SettingTag::C, CaseLabel::Primary, ActiveTerms::default())
            .unwrap();
        assert!(b.lower <= b.upper);
    }

    #[test]
    fn tags_parse() {
        assert_eq!("f".parse::<SettingTag>().unwrap(), SettingTag::F);
        assert!("Z".parse::<SettingTag>().is_err());
        assert_eq!("tight".parse::<TermPolicy>().unwrap(), TermPolicy::Tight);
    }

    #[test]
    fn dispatch_shape_errors() {
        let t = ConditionalCellTable::uniform();
        let d = DesignInfo::fixed(0.5).unwrap();
        let input = BoundsInput::Plain(t);
        let e = bounds_for_setting(SettingTag::B, &input, None, &BoundsOptions::default()).unwrap_err();
        assert!(matches!(e, Error::ShapeMismatch { .. }));
        let e = bounds_for_setting(SettingTag::C, &input, None, &BoundsOptions::default()).unwrap_err();
        assert!(matches!(e, Error::MissingDesign(SettingTag::C)));
        let g = bounds_for_setting(SettingTag::G, &input, Some(&d), &BoundsOptions::default()).unwrap();
        let e = bounds_for_setting(SettingTag::E, &input, Some(&d), &BoundsOptions::default()).unwrap();
        assert_eq!(g.setting, SettingTag::G);
        assert_eq!((g.lower, g.upper), (e.lower, e.upper));
    }
}
