//! Probability tables, sampling design information and the conversions between
//! conditional, joint and per-instrument-stratum representations.
//!
//! Cells are indexed `[x][y]` (exposure, outcome) and, for instrument data,
//! `[z][x][y]`. A table "given S=1" describes the selected sample; the same
//! type also holds full-population tables for the random-sampling designs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for normalization and range checks on probabilities.
pub const PROB_TOL: f64 = 1e-9;

pub type Cells = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonFinite { x: usize, y: usize },
    Negative { x: usize, y: usize, value: f64 },
    AboveOne { x: usize, y: usize, value: f64 },
    Sum { sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { x, y } => write!(f, "non-finite entry p[{x}][{y}]"),
            Violation::Negative { x, y, value } => {
                write!(f, "negative entry p[{x}][{y}]={value}")
            }
            Violation::AboveOne { x, y, value } => {
                write!(f, "entry above one p[{x}][{y}]={value}")
            }
            Violation::Sum { sum } => write!(f, "sum={sum}"),
        }
    }
}

/// Outcome of [`validate_table`]; empty `violations` means the table passed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return f.write_str("pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks raw cells against the table invariants without modifying them.
pub fn validate_table(p: &Cells) -> ValidationReport {
    let mut violations = Vec::new();
    let mut sum = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let value = p[x][y];
            if !value.is_finite() {
                violations.push(Violation::NonFinite { x, y });
                continue;
            }
            if value < -PROB_TOL {
                violations.push(Violation::Negative { x, y, value });
            } else if value > 1.0 + PROB_TOL {
                violations.push(Violation::AboveOne { x, y, value });
            }
            sum += value;
        }
    }
    if violations.iter().all(|v| !matches!(v, Violation::NonFinite { .. }))
        && (sum - 1.0).abs() > PROB_TOL
    {
        violations.push(Violation::Sum { sum });
    }
    ValidationReport { violations }
}

/// Cell probabilities `p[x][y]`, either given selection or for the whole population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Cells", into = "Cells")]
pub struct ConditionalCellTable {
    p: Cells,
}

impl ConditionalCellTable {
    /// Validates and, when the sum is off by less than the tolerance, renormalizes.
    pub fn new(p: Cells) -> Result<Self> {
        let report = validate_table(&p);
        if !report.passed() {
            return Err(Error::InvalidTable(report));
        }
        let mut p = p.map(|row| row.map(|v| v.clamp(0.0, 1.0)));
        let sum: f64 = p.iter().flatten().sum();
        if sum != 1.0 {
            p = p.map(|row| row.map(|v| v / sum));
        }
        Ok(Self { p })
    }

    /// Cells in the order `(p00, p01, p10, p11)`.
    pub fn from_cells(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        Self::new([[p00, p01], [p10, p11]])
    }

    pub fn uniform() -> Self {
        Self { p: [[0.25; 2]; 2] }
    }

    #[inline]
    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.p[x][y]
    }

    pub fn cells(&self) -> Cells {
        self.p
    }

    /// Table of the recoded exposure `x* = 1 - x`.
    pub fn recode_exposure(&self) -> Self {
        Self { p: [self.p[1], self.p[0]] }
    }

    /// `P(Y = y)` within the table.
    pub fn outcome_mass(&self, y: usize) -> f64 {
        self.p[0][y] + self.p[1][y]
    }

    /// `P(X = x | Y = y)`, `None` when the outcome stratum is empty.
    pub fn exposure_given_outcome(&self, x: usize, y: usize) -> Option<f64> {
        let m = self.outcome_mass(y);
        (m > 0.0).then(|| self.p[x][y] / m)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_table(&self.p)
    }
}

impl TryFrom<Cells> for ConditionalCellTable {
    type Error = Error;

    fn try_from(p: Cells) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ConditionalCellTable> for Cells {
    fn from(t: ConditionalCellTable) -> Self {
        t.p
    }
}

/// One table per instrument value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCellTableIv {
    pub per_z: [ConditionalCellTable; 2],
}

impl ConditionalCellTableIv {
    pub fn new(z0: ConditionalCellTable, z1: ConditionalCellTable) -> Self {
        Self { per_z: [z0, z1] }
    }

    #[inline]
    pub fn p(&self, z: usize, x: usize, y: usize) -> f64 {
        self.per_z[z].p(x, y)
    }

    pub fn recode_exposure(&self) -> Self {
        Self::new(self.per_z[0].recode_exposure(), self.per_z[1].recode_exposure())
    }
}

/// Per-stratum tables of the selected sample together with the observed
/// instrument share `P(Z=1 | S=1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvObservation {
    pub tables: ConditionalCellTableIv,
    pub z1_share: f64,
}

impl IvObservation {
    pub fn new(tables: ConditionalCellTableIv, z1_share: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&z1_share) {
            return Err(Error::InconsistentDesign(format!(
                "observed instrument share {z1_share} outside [0, 1]"
            )));
        }
        Ok(Self { tables, z1_share })
    }

    /// Pools the strata into a single table weighted by the observed shares.
    pub fn pooled(&self) -> ConditionalCellTable {
        let w = [1.0 - self.z1_share, self.z1_share];
        let mut p = [[0.0; 2]; 2];
        for (z, wz) in w.iter().enumerate() {
            for x in 0..2 {
                for y in 0..2 {
                    p[x][y] += wz * self.tables.p(z, x, y);
                }
            }
        }
        ConditionalCellTable::new(p).expect("mixture of valid tables is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RSource {
    FixedByDesign,
    Estimated,
}

/// What is known about the sampling design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignInfo {
    /// `P(S = 1)`.
    pub r: f64,
    pub r_source: RSource,
    /// `P(Z = 1)` in the source population.
    pub p_z1: Option<f64>,
    /// `(P(S=1 | Y=0), P(S=1 | Y=1))` when known externally.
    pub sel_given_y: Option<[f64; 2]>,
}

impl DesignInfo {
    pub fn new(r: f64, r_source: RSource) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0 + PROB_TOL) {
            return Err(Error::SelectionOutOfRange(r));
        }
        Ok(Self { r: r.min(1.0), r_source, p_z1: None, sel_given_y: None })
    }

    pub fn fixed(r: f64) -> Result<Self> {
        Self::new(r, RSource::FixedByDesign)
    }

    pub fn with_p_z1(mut self, p_z1: f64) -> Result<Self> {
        if !(p_z1 > 0.0 && p_z1 < 1.0) {
            return Err(Error::InstrumentPrevalenceOutOfRange(p_z1));
        }
        self.p_z1 = Some(p_z1);
        Ok(self)
    }

    pub fn with_sel_given_y(mut self, sel: [f64; 2]) -> Result<Self> {
        if sel.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InconsistentDesign(format!(
                "conditional selection probabilities {sel:?} outside [0, 1]"
            )));
        }
        self.sel_given_y = Some(sel);
        Ok(self)
    }

    /// Both `P(S=1 | Y=y)` known and strictly between 0 and 1.
    pub fn selection_nondeterministic(&self) -> bool {
        self.sel_given_y
            .is_some_and(|s| s.iter().all(|v| *v > 0.0 && *v < 1.0))
    }

    /// Law of total probability check against a population outcome prevalence.
    pub fn check_outcome_prevalence(&self, p_y1: f64) -> Result<()> {
        if let Some([s0, s1]) = self.sel_given_y {
            let implied = s0 * (1.0 - p_y1) + s1 * p_y1;
            if (implied - self.r).abs() > PROB_TOL {
                return Err(Error::InconsistentDesign(format!(
                    "P(S=1)={} but conditional selection implies {implied}",
                    self.r
                )));
            }
        }
        Ok(())
    }
}

/// Joint cells `p[x][y][S=1]` plus the aggregate unselected mass.
///
/// The unselected block is never split into cells since its decomposition
/// is not identified from selected data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCellTable {
    selected: Cells,
    unselected: f64,
}

impl JointCellTable {
    pub fn new(selected: Cells, unselected: f64) -> Result<Self> {
        let mut violations = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                let value = selected[x][y];
                if !value.is_finite() {
                    violations.push(Violation::NonFinite { x, y });
                } else if value < -PROB_TOL {
                    violations.push(Violation::Negative { x, y, value });
                }
            }
        }
        if !(unselected.is_finite() && unselected >= -PROB_TOL) {
            violations.push(Violation::Sum { sum: unselected });
        }
        let sum: f64 = selected.iter().flatten().sum::<f64>() + unselected;
        if violations.is_empty() && (sum - 1.0).abs() > PROB_TOL {
            violations.push(Violation::Sum { sum });
        }
        if !violations.is_empty() {
            return Err(Error::InvalidTable(ValidationReport { violations }));
        }
        Ok(Self {
            selected: selected.map(|row| row.map(|v| v.max(0.0))),
            unselected: unselected.max(0.0),
        })
    }

    pub fn from_conditional(t: &ConditionalCellTable, r: f64) -> Self {
        Self { selected: t.cells().map(|row| row.map(|v| v * r)), unselected: 1.0 - r }
    }

    /// `p_{xy1}`.
    #[inline]
    pub fn selected(&self, x: usize, y: usize) -> f64 {
        self.selected[x][y]
    }

    pub fn selected_cells(&self) -> Cells {
        self.selected
    }

    pub fn unselected_mass(&self) -> f64 {
        self.unselected
    }

    pub fn selection_mass(&self) -> f64 {
        self.selected.iter().flatten().sum()
    }

    /// Renormalized selected block.
    pub fn conditional(&self) -> Result<ConditionalCellTable> {
        let m = self.selection_mass();
        if m <= 0.0 {
            return Err(Error::SelectionOutOfRange(m));
        }
        ConditionalCellTable::new(self.selected.map(|row| row.map(|v| v / m)))
    }
}

/// One [`JointCellTable`] per instrument value, each normalized within `Z = z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCellTableIv {
    pub per_z: [JointCellTable; 2],
}

impl JointCellTableIv {
    pub fn new(z0: JointCellTable, z1: JointCellTable) -> Self {
        Self { per_z: [z0, z1] }
    }

    /// `p_{xy1.z}`.
    #[inline]
    pub fn selected(&self, z: usize, x: usize, y: usize) -> f64 {
        self.per_z[z].selected(x, y)
    }

    /// Both strata share the same selected block.
    pub fn symmetric(j: JointCellTable) -> Self {
        Self::new(j, j)
    }
}

pub fn joint_from_conditional(t: &ConditionalCellTable, d: &DesignInfo) -> JointCellTable {
    JointCellTable::from_conditional(t, d.r)
}

pub fn joint_from_conditional_iv(t: &ConditionalCellTableIv, r_z: [f64; 2]) -> JointCellTableIv {
    JointCellTableIv::new(
        JointCellTable::from_conditional(&t.per_z[0], r_z[0]),
        JointCellTable::from_conditional(&t.per_z[1], r_z[1]),
    )
}

/// Counts of selected subjects, indexed `[x][y]` or `[z][x][y]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Counts {
    Plain([[u64; 2]; 2]),
    Instrument([[[u64; 2]; 2]; 2]),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub counts: Counts,
    /// Cohort size `N`, when the sampling frame is known.
    pub cohort_size: Option<u64>,
}

impl SampleCounts {
    pub fn new(counts: Counts, cohort_size: Option<u64>) -> Result<Self> {
        let c = Self { counts, cohort_size };
        if let Some(big_n) = cohort_size {
            if c.n() > big_n {
                return Err(Error::InvalidCounts(format!(
                    "selected count {} exceeds cohort size {big_n}",
                    c.n()
                )));
            }
        }
        Ok(c)
    }

    pub fn plain(counts: [[u64; 2]; 2], cohort_size: Option<u64>) -> Result<Self> {
        Self::new(Counts::Plain(counts), cohort_size)
    }

    pub fn instrument(counts: [[[u64; 2]; 2]; 2], cohort_size: Option<u64>) -> Result<Self> {
        Self::new(Counts::Instrument(counts), cohort_size)
    }

    /// Total selected count.
    pub fn n(&self) -> u64 {
        match &self.counts {
            Counts::Plain(c) => c.iter().flatten().sum(),
            Counts::Instrument(c) => c.iter().flatten().flatten().sum(),
        }
    }

    pub fn has_instrument(&self) -> bool {
        matches!(self.counts, Counts::Instrument(_))
    }

    /// Counts summed over the instrument.
    pub fn collapsed(&self) -> [[u64; 2]; 2] {
        match &self.counts {
            Counts::Plain(c) => *c,
            Counts::Instrument(c) => {
                let mut out = [[0; 2]; 2];
                for zc in c {
                    for x in 0..2 {
                        for y in 0..2 {
                            out[x][y] += zc[x][y];
                        }
                    }
                }
                out
            }
        }
    }

    /// Cell counts flattened in `z, x, y` order (length 4 or 8).
    pub fn flat(&self) -> Vec<u64> {
        match &self.counts {
            Counts::Plain(c) => c.iter().flatten().copied().collect(),
            Counts::Instrument(c) => c.iter().flatten().flatten().copied().collect(),
        }
    }

    /// Inverse of [`SampleCounts::flat`] using this sample's shape.
    pub fn with_flat(&self, flat: &[u64], cohort_size: Option<u64>) -> Self {
        let counts = match &self.counts {
            Counts::Plain(_) => Counts::Plain([[flat[0], flat[1]], [flat[2], flat[3]]]),
            Counts::Instrument(_) => Counts::Instrument([
                [[flat[0], flat[1]], [flat[2], flat[3]]],
                [[flat[4], flat[5]], [flat[6], flat[7]]],
            ]),
        };
        Self { counts, cohort_size }
    }
}

/// Observed tables in the shape of the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservedTables {
    Plain(ConditionalCellTable),
    Instrument(IvObservation),
}

impl ObservedTables {
    /// The table pooled over the instrument, if any.
    pub fn pooled(&self) -> ConditionalCellTable {
        match self {
            ObservedTables::Plain(t) => *t,
            ObservedTables::Instrument(o) => o.pooled(),
        }
    }
}

/// Design facts supplied alongside counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalDesign {
    pub r: Option<f64>,
    pub r_source: Option<RSource>,
    pub p_z1: Option<f64>,
    pub sel_given_y: Option<[f64; 2]>,
}

/// Plug-in cell frequencies, without design information.
pub fn counts_to_frequencies(c: &SampleCounts) -> Result<ObservedTables> {
    let n = c.n();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let freq = |cells: &[[u64; 2]; 2], total: u64| {
        let t = total as f64;
        ConditionalCellTable::new(cells.map(|row| row.map(|v| v as f64 / t)))
    };
    match &c.counts {
        Counts::Plain(cells) => Ok(ObservedTables::Plain(freq(cells, n)?)),
        Counts::Instrument(cells) => {
            let totals = cells.map(|zc| zc.iter().flatten().sum::<u64>());
            for (z, t) in totals.iter().enumerate() {
                if *t == 0 {
                    return Err(Error::EmptyInstrumentStratum(z));
                }
            }
            let tables = ConditionalCellTableIv::new(
                freq(&cells[0], totals[0])?,
                freq(&cells[1], totals[1])?,
            );
            Ok(ObservedTables::Instrument(IvObservation::new(
                tables,
                totals[1] as f64 / n as f64,
            )?))
        }
    }
}

/// Plug-in tables and the design information implied by counts and externals.
pub fn counts_to_tables(
    c: &SampleCounts,
    external: &ExternalDesign,
) -> Result<(ObservedTables, DesignInfo)> {
    let tables = counts_to_frequencies(c)?;
    let (r, source) = match (external.r, c.cohort_size) {
        (Some(r), _) => (r, external.r_source.unwrap_or(RSource::FixedByDesign)),
        (None, Some(big_n)) => (
            c.n() as f64 / big_n as f64,
            external.r_source.unwrap_or(RSource::Estimated),
        ),
        (None, None) => return Err(Error::SelectionUnavailable),
    };
    let mut design = DesignInfo::new(r, source)?;
    let p_z1 = match (&tables, external.p_z1) {
        (_, Some(p)) => Some(p),
        (ObservedTables::Instrument(o), None) => Some(o.z1_share),
        (ObservedTables::Plain(_), None) => None,
    };
    if let Some(p) = p_z1 {
        design = design.with_p_z1(p)?;
    }
    if let Some(sel) = external.sel_given_y {
        design = design.with_sel_given_y(sel)?;
    }
    Ok((tables, design))
}

/// `(P(S=1 | Z=0), P(S=1 | Z=1))` from the observed instrument share.
pub fn selection_given_z(obs: &IvObservation, d: &DesignInfo) -> Result<[f64; 2]> {
    let p_z1 = d.p_z1.ok_or(Error::MissingInstrumentPrevalence)?;
    let shares = [1.0 - obs.z1_share, obs.z1_share];
    let prevalence = [1.0 - p_z1, p_z1];
    let mut out = [0.0; 2];
    for z in 0..2 {
        let value = shares[z] * d.r / prevalence[z];
        if !(value > 0.0 && value <= 1.0 + PROB_TOL) {
            return Err(Error::InconsistentSelection { z, value });
        }
        out[z] = value.min(1.0);
    }
    Ok(out)
}
