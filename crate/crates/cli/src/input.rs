//! Input documents: cell counts or cell probabilities plus design facts.

use std::path::{Path, PathBuf};

use odsbounds::bounds::SettingTag;
use odsbounds::probmodel::{
    ConditionalCellTable, ConditionalCellTableIv, DesignInfo, ExternalDesign, IvObservation,
    ObservedTables, RSource, SampleCounts,
};
use odsbounds::simulation::{ObservableJoint, ObservedViews};
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub settings: Option<Vec<SettingTag>>,
    #[serde(default)]
    pub counts: Option<CountsBlock>,
    #[serde(default)]
    pub probabilities: Option<ProbabilityBlock>,
    #[serde(default)]
    pub design: DesignBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsBlock {
    #[serde(default)]
    pub rows: Option<Vec<CountRow>>,
    /// Inline CSV with header `z,x,y,count` (`z` optional).
    #[serde(default)]
    pub csv: Option<String>,
    /// CSV file, relative to the document.
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRow {
    #[serde(default)]
    pub z: Option<u8>,
    pub x: u8,
    pub y: u8,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityKind {
    /// `P(Z, X, Y | S=1)`, or `P(X, Y | S=1)` without an instrument.
    Selected,
    /// `P(Z, X, Y, S)` over all subjects.
    FullJoint,
    /// `P(Z, X, Y)` in the full population.
    Population,
    /// Raw `P(X, Y, S=1 | Z)` cells for the oracle; not validated.
    SelectedCells,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilityBlock {
    pub kind: ProbabilityKind,
    pub rows: Vec<ProbabilityRow>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilityRow {
    #[serde(default)]
    pub z: Option<u8>,
    pub x: u8,
    pub y: u8,
    #[serde(default)]
    pub s: Option<u8>,
    pub p: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(rename = "N", default)]
    pub cohort_size: Option<u64>,
    #[serde(default)]
    pub p_z1: Option<f64>,
    #[serde(default)]
    pub sel_given_y: Option<[f64; 2]>,
    #[serde(default)]
    pub r_source: Option<RSource>,
}

impl DesignBlock {
    pub fn external(&self) -> ExternalDesign {
        ExternalDesign { r: self.r, r_source: self.r_source, p_z1: self.p_z1, sel_given_y: self.sel_given_y }
    }
}

/// Observed data after parsing and validation.
#[derive(Debug, Clone)]
pub enum Data {
    Counts { counts: SampleCounts, external: ExternalDesign },
    Tables {
        /// Selected-sample tables.
        observed: ObservedTables,
        /// Full-population tables, when the input describes them.
        population: Option<ObservedTables>,
        design: Option<DesignInfo>,
    },
    /// Unvalidated `P(X, Y, S=1 | Z)` blocks.
    Cells(Vec<[[f64; 2]; 2]>),
}

#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub settings: Option<Vec<SettingTag>>,
    pub data: Data,
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

pub fn load(path: &Path) -> Result<LoadedInput, CliError> {
    let text = read_file(path)?;
    let doc: InputDocument =
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    resolve(doc, path.parent().unwrap_or(Path::new(".")))
}

pub fn resolve(doc: InputDocument, base: &Path) -> Result<LoadedInput, CliError> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(CliError::Schema(format!("unsupported schema_version {}", doc.schema_version)));
    }
    let data = match (&doc.counts, &doc.probabilities) {
        (Some(c), None) => {
            let counts = counts_from_block(c, base, doc.design.cohort_size)?;
            Data::Counts { counts, external: doc.design.external() }
        }
        (None, Some(p)) => tables_from_probabilities(p, &doc.design)?,
        _ => return Err(CliError::Schema("exactly one of counts and probabilities is required".into())),
    };
    Ok(LoadedInput { settings: doc.settings, data })
}

fn bit(v: u8, what: &str) -> Result<usize, CliError> {
    match v {
        0 | 1 => Ok(v as usize),
        _ => Err(CliError::Schema(format!("{what} must be 0 or 1, got {v}"))),
    }
}

/// Cells `[z][x][y]` and whether the rows carry an instrument.
fn place<T: Copy + Default + PartialEq>(
    rows: impl Iterator<Item = (Option<u8>, u8, u8, T)>,
) -> Result<([[[T; 2]; 2]; 2], bool), CliError> {
    let mut cells = [[[T::default(); 2]; 2]; 2];
    let mut seen = [[[false; 2]; 2]; 2];
    let mut with_z = None;
    for (z, x, y, v) in rows {
        if *with_z.get_or_insert(z.is_some()) != z.is_some() {
            return Err(CliError::Schema("either every row or no row has z".into()));
        }
        let (z, x, y) = (bit(z.unwrap_or(0), "z")?, bit(x, "x")?, bit(y, "y")?);
        if seen[z][x][y] {
            return Err(CliError::Schema(format!("duplicate cell z={z} x={x} y={y}")));
        }
        seen[z][x][y] = true;
        cells[z][x][y] = v;
    }
    Ok((cells, with_z.unwrap_or(false)))
}

fn parse_counts_csv(text: &str) -> Result<Vec<CountRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    reader
        .deserialize::<CountRow>()
        .map(|r| r.map_err(|e| CliError::Schema(format!("counts csv: {e}"))))
        .collect()
}

fn counts_from_block(c: &CountsBlock, base: &Path, cohort: Option<u64>) -> Result<SampleCounts, CliError> {
    let rows = match (&c.rows, &c.csv, &c.csv_path) {
        (Some(rows), None, None) => rows.clone(),
        (None, Some(text), None) => parse_counts_csv(text)?,
        (None, None, Some(p)) => parse_counts_csv(&read_file(&base.join(p))?)?,
        _ => return Err(CliError::Schema("counts need exactly one of rows, csv, csv_path".into())),
    };
    let (cells, with_z) = place(rows.iter().map(|r| (r.z, r.x, r.y, r.count)))?;
    let counts = if with_z {
        SampleCounts::instrument(cells, cohort)?
    } else {
        SampleCounts::plain(cells[0], cohort)?
    };
    Ok(counts)
}

fn normalized(block: &[[f64; 2]; 2]) -> Result<(ConditionalCellTable, f64), CliError> {
    let mass: f64 = block.iter().flatten().sum();
    if !(mass > 0.0) {
        return Err(odsbounds::Error::EmptySample.into());
    }
    Ok((ConditionalCellTable::new(block.map(|r| r.map(|v| v / mass)))?, mass))
}

/// Tables from `[z][x][y]` probabilities that sum to one overall.
fn observed_from(cells: &[[[f64; 2]; 2]; 2], with_z: bool) -> Result<ObservedTables, CliError> {
    let total: f64 = cells.iter().flatten().flatten().sum();
    if (total - 1.0).abs() > odsbounds::probmodel::PROB_TOL {
        return Err(CliError::Validation(format!("probabilities sum to {total}, expected 1")));
    }
    if !with_z {
        return Ok(ObservedTables::Plain(ConditionalCellTable::new(cells[0])?));
    }
    let mut tables = Vec::new();
    for (z, block) in cells.iter().enumerate() {
        let mass: f64 = block.iter().flatten().sum();
        if mass <= 0.0 {
            return Err(odsbounds::Error::EmptyInstrumentStratum(z).into());
        }
        tables.push(normalized(block)?);
    }
    let iv = ConditionalCellTableIv::new(tables[0].0, tables[1].0);
    Ok(ObservedTables::Instrument(IvObservation::new(iv, tables[1].1 / total)?))
}

fn design_from_block(d: &DesignBlock, observed: &ObservedTables) -> Result<Option<DesignInfo>, CliError> {
    let Some(r) = d.r else { return Ok(None) };
    let mut design = DesignInfo::new(r, d.r_source.unwrap_or(RSource::FixedByDesign))?;
    let p_z1 = match (d.p_z1, observed) {
        (Some(p), _) => Some(p),
        (None, ObservedTables::Instrument(o)) => Some(o.z1_share),
        (None, ObservedTables::Plain(_)) => None,
    };
    if let Some(p) = p_z1 {
        design = design.with_p_z1(p)?;
    }
    if let Some(sel) = d.sel_given_y {
        design = design.with_sel_given_y(sel)?;
    }
    Ok(Some(design))
}

fn tables_from_probabilities(p: &ProbabilityBlock, d: &DesignBlock) -> Result<Data, CliError> {
    for row in &p.rows {
        if !row.p.is_finite() || (row.p < 0.0 && p.kind != ProbabilityKind::SelectedCells) {
            return Err(CliError::Validation(format!("invalid probability {}", row.p)));
        }
        if row.s.is_some() != (p.kind == ProbabilityKind::FullJoint) {
            return Err(CliError::Schema("s is required for full_joint rows and only there".into()));
        }
    }
    match p.kind {
        ProbabilityKind::SelectedCells => {
            let (cells, with_z) = place(p.rows.iter().map(|r| (r.z, r.x, r.y, r.p)))?;
            Ok(Data::Cells(if with_z { cells.to_vec() } else { vec![cells[0]] }))
        }
        ProbabilityKind::Selected | ProbabilityKind::Population => {
            let (cells, with_z) = place(p.rows.iter().map(|r| (r.z, r.x, r.y, r.p)))?;
            let observed = observed_from(&cells, with_z)?;
            let design = design_from_block(d, &observed)?;
            let population = (p.kind == ProbabilityKind::Population).then_some(observed);
            Ok(Data::Tables { observed, population, design })
        }
        ProbabilityKind::FullJoint => {
            let mut joint: ObservableJoint = [[[[0.0; 2]; 2]; 2]; 2];
            let mut seen = [[[[false; 2]; 2]; 2]; 2];
            let with_z = p.rows.first().is_some_and(|r| r.z.is_some());
            for r in &p.rows {
                if r.z.is_some() != with_z {
                    return Err(CliError::Schema("either every row or no row has z".into()));
                }
                let (z, x, y, s) = (bit(r.z.unwrap_or(0), "z")?, bit(r.x, "x")?, bit(r.y, "y")?, bit(r.s.unwrap_or(0), "s")?);
                if seen[z][x][y][s] {
                    return Err(CliError::Schema(format!("duplicate cell z={z} x={x} y={y} s={s}")));
                }
                seen[z][x][y][s] = true;
                joint[z][x][y][s] = r.p;
            }
            let total: f64 = joint.iter().flatten().flatten().flatten().sum();
            if (total - 1.0).abs() > odsbounds::probmodel::PROB_TOL {
                return Err(CliError::Validation(format!("probabilities sum to {total}, expected 1")));
            }
            if !with_z {
                // an uninformative instrument with two equal halves
                joint[1] = joint[0].map(|xr| xr.map(|yr| yr.map(|v| v / 2.0)));
                joint[0] = joint[1];
            }
            let views = ObservedViews::from_observable(&joint)?;
            let mut design = DesignInfo::new(d.r.unwrap_or(views.r), d.r_source.unwrap_or(RSource::FixedByDesign))?;
            if with_z {
                design = design.with_p_z1(d.p_z1.unwrap_or(views.p_z1))?;
            }
            if let Some(sel) = d.sel_given_y {
                design = design.with_sel_given_y(sel)?;
            }
            let (observed, population) = if with_z {
                (
                    ObservedTables::Instrument(views.selected_iv),
                    ObservedTables::Instrument(IvObservation::new(views.population_iv, views.p_z1)?),
                )
            } else {
                (ObservedTables::Plain(views.selected), ObservedTables::Plain(views.population))
            };
            Ok(Data::Tables { observed, population: Some(population), design: Some(design) })
        }
    }
}
