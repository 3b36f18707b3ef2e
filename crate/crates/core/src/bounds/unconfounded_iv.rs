//! Selection on the outcome only, with an instrument.
//!
//! Each population cell splits as `P(X,Y|Z=z) = r_z P(X,Y|Z=z,S=1) + (1-r_z)
//! P(X,Y|Z=z,S=0)`. Because selection depends on `Y` alone, the unselected
//! table keeps the selected exposure split within every outcome row, so it
//! ranges over `t * row0 + (1-t) * row1` with `t` free. Each term of the
//! random-sampling instrument bounds is bounded by its extreme over that set.

use super::confounded::linear_bounds;
use super::linear::{BALKE_PEARL_LOWER, BALKE_PEARL_UPPER};
use super::{
    compute_ratios_iv, pick_max, pick_min, ActiveTerms, BoundsInterval, BoundsOptions, CaseLabel,
    SettingTag, TermFamily, TermId, TermPolicy,
};
use crate::error::Result;
use crate::probmodel::{selection_given_z, Cells, ConditionalCellTableIv, DesignInfo, IvObservation};

/// What is known about one outcome row of the unselected table in one stratum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowState {
    /// Row observed among the selected; its exposure split is `P(X=1 | y, z, S=1)`.
    Fixed(f64),
    /// Row unobserved and possibly present among the unselected, with any split.
    Free,
    /// Row known to be absent from the population stratum.
    Absent,
}

/// Pre-refinement endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct UnrefinedIv {
    pub lower: f64,
    pub upper: f64,
    pub case: CaseLabel,
    pub active_terms: ActiveTerms,
}

/// Extreme points of the feasible unselected tables of one stratum.
fn vertices(rows: &[RowState; 2]) -> Vec<Cells> {
    let mut out = Vec::with_capacity(4);
    for (y, row) in rows.iter().enumerate() {
        let splits: &[f64] = match row {
            RowState::Fixed(pi) => &[*pi][..],
            RowState::Free => &[0.0, 1.0][..],
            RowState::Absent => &[][..],
        };
        for &pi in splits {
            let mut v = [[0.0; 2]; 2];
            v[0][y] = 1.0 - pi;
            v[1][y] = pi;
            out.push(v);
        }
    }
    out
}

/// Every instrument-bound term minimized (lower) and maximized (upper) over
/// the unselected tables allowed by `rows[z][y]`.
pub fn envelope_bounds(
    t: &ConditionalCellTableIv,
    r: [f64; 2],
    rows: [[RowState; 2]; 2],
) -> ([f64; 8], [f64; 8]) {
    let verts = [vertices(&rows[0]), vertices(&rows[1])];
    let eval = |terms: &[super::linear::LinearTerm; 8], minimize: bool| {
        let mut out = [0.0; 8];
        for (k, term) in terms.iter().enumerate() {
            let mut acc = term.constant as f64;
            let mut part = [vec![0.0; verts[0].len()], vec![0.0; verts[1].len()]];
            for &(c, z, x, y) in term.cells {
                let (c, z, x, y) = (c as f64, z as usize, x as usize, y as usize);
                acc += c * r[z] * t.p(z, x, y);
                for (i, v) in verts[z].iter().enumerate() {
                    part[z][i] += c * v[x][y];
                }
            }
            for z in 0..2 {
                if r[z] >= 1.0 || part[z].is_empty() {
                    continue;
                }
                let ext = part[z].iter().copied().fold(
                    if minimize { f64::INFINITY } else { f64::NEG_INFINITY },
                    |a, b| if minimize { a.min(b) } else { a.max(b) },
                );
                acc += (1.0 - r[z]) * ext;
            }
            out[k] = acc;
        }
        out
    };
    (eval(&BALKE_PEARL_LOWER, true), eval(&BALKE_PEARL_UPPER, false))
}

/// The published closed-form terms; requires every `B(y, z)` defined.
fn explicit_terms(
    t: &ConditionalCellTableIv,
    r: [f64; 2],
    policy: TermPolicy,
) -> ([Option<f64>; 8], [Option<f64>; 8]) {
    // `p(xy, z)` reads the cell with two-digit code `xy`, so `p(1, z)` is x=0, y=1
    let p = |xy: u8, z: usize| t.p(z, (xy / 10) as usize, (xy % 10) as usize);
    let b = |y: usize, z: usize| t.p(z, 1, y) / t.p(z, 0, y);
    let (r0, r1) = (r[0], r[1]);
    let (q0, q1) = (1.0 - r0, 1.0 - r1);
    let odd = |v: f64| v / (1.0 + v);
    let inv1 = |v: f64| 1.0 / (1.0 + v);
    let diff = |v: f64| (1.0 - v) / (1.0 + v);
    let fixed = policy != TermPolicy::Literal;

    let m = |z: usize| {
        let base = -odd(b(0, z));
        if fixed { base.min(-diff(b(1, z))) } else { base }
    };
    let lower = [
        p(11, 1) * r1 + p(0, 0) * r0 - 1.0,
        p(11, 0) * r0 + p(0, 1) * r1 - 1.0,
        (p(11, 0) - p(10, 0) - p(1, 0)) * r0 - (p(11, 1) + p(1, 1)) * r1 + m(0) * q0 - q1,
        (p(11, 1) - p(10, 1) - p(1, 1)) * r1 - (p(11, 0) + p(1, 0)) * r0 + m(1) * q1 - q0,
        -(p(10, 1) + p(1, 1)) * r1 - inv1(b(1, 1)).max(odd(b(0, 1))) * q1,
        -(p(10, 0) + p(1, 0)) * r0 - inv1(b(1, 0)).max(odd(b(0, 0))) * q0,
        (p(0, 1) - p(10, 1) - p(1, 1)) * r1 - (p(10, 0) + p(0, 0)) * r0
            - inv1(b(1, 1)).max(-diff(b(0, 1))) * q1
            - q0,
        (p(0, 0) - p(10, 0) - p(1, 0)) * r0 - (p(10, 1) + p(0, 1)) * r1
            - inv1(b(1, 0)).max(-diff(b(0, 0))) * q0
            - q1,
    ];

    let factor3 = if fixed { q0 } else { r0 };
    let cap4 = if policy == TermPolicy::Tight { odd(b(1, 1)) } else { 1.0 };
    // reciprocal subterm, or `None` when it is unbounded
    let recip = |z: usize| -> Option<f64> {
        if policy == TermPolicy::Tight {
            Some(inv1(b(0, z)))
        } else {
            let v = b(0, z);
            (v > 0.0).then(|| 1.0 / v)
        }
    };
    let upper = [
        Some(1.0 - p(10, 1) * r1 - p(1, 0) * r0),
        Some(1.0 - p(10, 0) * r0 - p(1, 1) * r1),
        Some(
            (p(10, 1) + p(0, 1)) * r1 + (p(11, 0) + p(0, 0) - p(10, 0)) * r0 + q1
                + diff(b(0, 0)).max(odd(b(1, 0))) * factor3,
        ),
        Some(
            (p(11, 1) + p(0, 1) - p(10, 1)) * r1 + (p(10, 0) + p(0, 0)) * r0
                + diff(b(0, 1)).max(cap4) * q1
                + q0,
        ),
        Some((p(11, 1) + p(0, 1)) * r1 + inv1(b(0, 1)).max(odd(b(1, 1))) * q1),
        Some((p(11, 0) + p(0, 0)) * r0 + inv1(b(0, 0)).max(odd(b(1, 0))) * q0),
        recip(1).map(|v| {
            (p(11, 1) + p(0, 1) - p(1, 1)) * r1 + (p(11, 0) + p(1, 0)) * r0
                + v.max(-diff(b(1, 1))) * q1
                + q0
        }),
        recip(0).map(|v| {
            (p(11, 0) + p(0, 0) - p(1, 0)) * r0 + (p(11, 1) + p(1, 1)) * r1
                + v.max(-diff(b(1, 0))) * q0
                + q1
        }),
    ];
    (lower.map(Some), upper)
}

fn all_defined(t: &ConditionalCellTableIv) -> bool {
    compute_ratios_iv(t).iter().flatten().all(|b| b.is_defined())
}

fn pick_terms(lower: &[Option<f64>], upper: &[Option<f64>], case: CaseLabel) -> UnrefinedIv {
    let (l, li) = pick_max(lower).expect("lower terms present");
    let (u, ui) = pick_min(upper).expect("upper terms present");
    UnrefinedIv {
        lower: l,
        upper: u,
        case,
        active_terms: ActiveTerms::from_indices(TermFamily::UnconfoundedIv, &li, &ui),
    }
}

/// Row knowledge for the envelope evaluation.
pub(crate) fn row_states(t: &ConditionalCellTableIv, d: &DesignInfo) -> [[RowState; 2]; 2] {
    let observed = |z: usize, y: usize| t.p(z, 0, y) + t.p(z, 1, y) > 0.0;
    let known = d.selection_nondeterministic();
    [0, 1].map(|z| {
        [0, 1].map(|y| {
            if observed(z, y) {
                RowState::Fixed(t.p(z, 1, y) / (t.p(z, 0, y) + t.p(z, 1, y)))
            } else if known || observed(1 - z, y) {
                RowState::Absent
            } else {
                RowState::Free
            }
        })
    })
}

fn unrefined_parts(
    t: &ConditionalCellTableIv,
    r: [f64; 2],
    d: &DesignInfo,
    policy: TermPolicy,
) -> UnrefinedIv {
    if all_defined(t) {
        let (l, u) = explicit_terms(t, r, policy);
        return pick_terms(&l, &u, CaseLabel::Primary);
    }
    let recoded = t.recode_exposure();
    if all_defined(&recoded) {
        let (l, u) = explicit_terms(&recoded, r, policy);
        let star = pick_terms(&l, &u, CaseLabel::Primary);
        return UnrefinedIv {
            lower: -star.upper,
            upper: -star.lower,
            case: CaseLabel::InvertedExposure,
            active_terms: star.active_terms.swapped(),
        };
    }
    let rows = row_states(t, d);
    let flat = rows.iter().flatten();
    let case = if flat.clone().all(|s| matches!(s, RowState::Fixed(_))) {
        CaseLabel::InvertedExposure
    } else if d.selection_nondeterministic() {
        CaseLabel::Case2Alternative
    } else if flat.clone().any(|s| *s == RowState::Free) {
        CaseLabel::ConfoundedFallback
    } else {
        CaseLabel::InferredNondeterministic
    };
    let (l, u) = envelope_bounds(t, r, rows);
    pick_terms(&l.map(Some), &u.map(Some), case)
}

/// The unconfounded instrument bounds before intersecting with the confounded
/// instrument bounds. Endpoints are raw: not clamped and possibly crossing.
pub fn unconfounded_ods_iv_unrefined(
    obs: &IvObservation,
    d: &DesignInfo,
    opts: &BoundsOptions,
) -> Result<UnrefinedIv> {
    let r = selection_given_z(obs, d)?;
    Ok(unrefined_parts(&obs.tables, r, d, opts.term_policy))
}

/// Unconfounded instrument bounds intersected with the confounded instrument
/// bounds of the same data.
pub fn unconfounded_ods_iv_bounds(
    obs: &IvObservation,
    d: &DesignInfo,
    opts: &BoundsOptions,
) -> Result<BoundsInterval> {
    let r = selection_given_z(obs, d)?;
    let own = unrefined_parts(&obs.tables, r, d, opts.term_policy);
    let cells = [0, 1].map(|z| obs.tables.per_z[z].cells().map(|row| row.map(|v| v * r[z])));
    let f = linear_bounds(SettingTag::F, &cells)?;
    let f_terms = f.active_terms();

    let pick = |a: f64, a_ids: &[TermId], b: f64, b_ids: &[TermId], max: bool| {
        let best = if max { a.max(b) } else { a.min(b) };
        let mut ids = Vec::new();
        if (a - best).abs() <= crate::scalar::TIE_TOL {
            ids.extend_from_slice(a_ids);
        }
        if (b - best).abs() <= crate::scalar::TIE_TOL {
            ids.extend_from_slice(b_ids);
        }
        (best, ids)
    };
    let (lower, lo_ids) = pick(own.lower, &own.active_terms.lower, f.lower, &f_terms.lower, true);
    let (upper, up_ids) = pick(own.upper, &own.active_terms.upper, f.upper, &f_terms.upper, false);
    BoundsInterval::finish(
        lower,
        upper,
        SettingTag::D,
        own.case,
        ActiveTerms { lower: lo_ids, upper: up_ids },
    )
}
