use super::confounded::confounded_ods_bounds;
use super::{
    compute_ratios, pick_max, pick_min, ActiveTerms, BoundsInterval, CaseLabel, SettingTag, TermFamily,
};
use crate::error::{Error, Result};
use crate::probmodel::{joint_from_conditional, ConditionalCellTable, DesignInfo};

/// Selection on the outcome only, no instrument.
///
/// The bound is `-(p01 + p10) r - max{s1, s2} (1 - r)` below and
/// `1 - (p01 + p10) r - min{s1, s2} (1 - r)` above, with
/// `s1 = 1 / (1 + A(1))` and `s2 = A(0) / (1 + A(0))`. Zero cells that leave a
/// ratio undefined are handled by recoding the exposure, by known
/// nondeterministic selection, or by falling back to the confounded bounds.
pub fn unconfounded_ods_bounds(t: &ConditionalCellTable, d: &DesignInfo) -> Result<BoundsInterval> {
    if !(d.r > 0.0 && d.r <= 1.0) {
        return Err(Error::SelectionOutOfRange(d.r));
    }
    let r = d.r;
    let a = compute_ratios(t);
    if let [Some(a0), Some(a1)] = a.map(|v| v.value()) {
        return primary(t, r, [1.0 / (1.0 + a1), a0 / (1.0 + a0)], CaseLabel::Primary);
    }
    let recoded = t.recode_exposure();
    let inv = compute_ratios(&recoded);
    if let [Some(a0), Some(a1)] = inv.map(|v| v.value()) {
        let b = primary(&recoded, r, [1.0 / (1.0 + a1), a0 / (1.0 + a0)], CaseLabel::Primary)?;
        return Ok(b.negate_swap(CaseLabel::InvertedExposure));
    }
    match [t.exposure_given_outcome(1, 0), t.exposure_given_outcome(1, 1)] {
        // each outcome stratum observed but the two need different codings
        [Some(pi0), Some(pi1)] => primary(t, r, [1.0 - pi1, pi0], CaseLabel::InvertedExposure),
        [pi0, pi1] if d.selection_nondeterministic() => {
            // the empty stratum is absent from the population
            let (discordant, s) = match (pi0, pi1) {
                (None, Some(pi1)) => (t.p(0, 1), 1.0 - pi1),
                (Some(pi0), None) => (t.p(1, 0), pi0),
                _ => unreachable!("table has positive mass"),
            };
            let base = -discordant * r - s * (1.0 - r);
            let active = ActiveTerms::from_indices(TermFamily::Unconfounded, &[1], &[1]);
            BoundsInterval::finish(base, 1.0 + base, SettingTag::C, CaseLabel::Case2Alternative, active)
        }
        _ => {
            let mut b = confounded_ods_bounds(&joint_from_conditional(t, d));
            b.setting = SettingTag::C;
            b.case = CaseLabel::ConfoundedFallback;
            Ok(b)
        }
    }
}

fn primary(t: &ConditionalCellTable, r: f64, s: [f64; 2], case: CaseLabel) -> Result<BoundsInterval> {
    let discordant = t.p(0, 1) + t.p(1, 0);
    let s = s.map(Some);
    let (hi, lo_idx) = pick_max(&s).expect("two terms");
    let (lo, up_idx) = pick_min(&s).expect("two terms");
    let lower = -discordant * r - hi * (1.0 - r);
    let upper = 1.0 - discordant * r - lo * (1.0 - r);
    let active = ActiveTerms::from_indices(TermFamily::Unconfounded, &lo_idx, &up_idx);
    BoundsInterval::finish(lower, upper, SettingTag::C, case, active)
}

/// Limit of the unconfounded bounds as `P(S=1) -> 0`:
/// `-max{P(X=0|Y=1), P(X=1|Y=0)} <= θ <= max{P(X=1|Y=1), P(X=0|Y=0)}`.
pub fn outcome_conditional_bounds(t: &ConditionalCellTable) -> Result<BoundsInterval> {
    let cond = |x, y| t.exposure_given_outcome(x, y).ok_or(Error::EmptyOutcomeStratum(y));
    let lo_terms = [Some(cond(0, 1)?), Some(cond(1, 0)?)];
    let up_terms = [Some(cond(1, 1)?), Some(cond(0, 0)?)];
    let (l, li) = pick_max(&lo_terms).expect("two terms");
    let (u, ui) = pick_max(&up_terms).expect("two terms");
    let active = ActiveTerms::from_indices(TermFamily::OutcomeConditional, &li, &ui);
    BoundsInterval::finish(-l, u, SettingTag::C, CaseLabel::NotApplicable, active)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(p00: f64, p01: f64, p10: f64, p11: f64) -> ConditionalCellTable {
        ConditionalCellTable::from_cells(p00, p01, p10, p11).unwrap()
    }

    fn fixed(r: f64) -> DesignInfo {
        DesignInfo::fixed(r).unwrap()
    }

    #[test]
    fn random_sampling_limit() {
        let b = unconfounded_ods_bounds(&ConditionalCellTable::uniform(), &fixed(1.0)).unwrap();
        assert_eq!((b.lower, b.upper), (-0.5, 0.5));
        assert_eq!(b.case, CaseLabel::Primary);
    }

    #[test]
    fn small_selection_limit() {
        let t = table(0.2, 0.15, 0.25, 0.4);
        let b = unconfounded_ods_bounds(&t, &fixed(1e-9)).unwrap();
        let k = outcome_conditional_bounds(&t).unwrap();
        assert!((b.lower - k.lower).abs() < 1e-6 && (b.upper - k.upper).abs() < 1e-6);
    }

    #[test]
    fn outcome_conditional_examples() {
        let b = outcome_conditional_bounds(&ConditionalCellTable::uniform()).unwrap();
        assert_eq!((b.lower, b.upper), (-0.5, 0.5));
        let b = outcome_conditional_bounds(&table(0.4, 0.1, 0.1, 0.4)).unwrap();
        assert!((b.lower + 0.2).abs() < 1e-15 && (b.upper - 0.8).abs() < 1e-15);
        assert_eq!(
            outcome_conditional_bounds(&table(0.5, 0.0, 0.5, 0.0)).unwrap_err(),
            Error::EmptyOutcomeStratum(1)
        );
    }

    #[test]
    fn inverted_exposure_matches_recoded_problem() {
        let t = table(0.0, 0.3, 0.3, 0.4);
        let d = fixed(0.5);
        let b = unconfounded_ods_bounds(&t, &d).unwrap();
        assert_eq!(b.case, CaseLabel::InvertedExposure);
        let star = unconfounded_ods_bounds(&t.recode_exposure(), &d).unwrap();
        assert_eq!(star.case, CaseLabel::Primary);
        assert!((b.lower + star.upper).abs() < 1e-15 && (b.upper + star.lower).abs() < 1e-15);
    }

    #[test]
    fn mixed_zero_cells() {
        // A(0) undefined, inverse of A(1) undefined
        let t = table(0.0, 0.4, 0.6, 0.0);
        let b = unconfounded_ods_bounds(&t, &fixed(0.3)).unwrap();
        assert_eq!(b.case, CaseLabel::InvertedExposure);
        // P(X=1|Y=0)=1, P(X=1|Y=1)=0
        assert!((b.lower - (-0.3 - 0.7)).abs() < 1e-15);
        assert!((b.upper - (1.0 - 0.3 - 0.7)).abs() < 1e-15);
    }

    #[test]
    fn empty_outcome_stratum() {
        let t = table(0.0, 0.3, 0.0, 0.7);
        let b = unconfounded_ods_bounds(&t, &fixed(0.4)).unwrap();
        assert_eq!(b.case, CaseLabel::ConfoundedFallback);
        let e = confounded_ods_bounds(&joint_from_conditional(&t, &fixed(0.4)));
        assert_eq!((b.lower, b.upper), (e.lower, e.upper));

        let d = fixed(0.4).with_sel_given_y([0.2, 0.6]).unwrap();
        let b = unconfounded_ods_bounds(&t, &d).unwrap();
        assert_eq!(b.case, CaseLabel::Case2Alternative);
        let base = -0.3 * 0.4 - 0.6 * 0.3;
        assert!((b.lower - base).abs() < 1e-15 && (b.upper - 1.0 - base).abs() < 1e-15);
    }
}
