use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use odsbounds::bounds::{bounds_for_setting, BoundsInput, BoundsInterval, BoundsOptions, SettingTag, TermPolicy};
use odsbounds::inference::{
    bootstrap, coverage_study, design_from_counts, input_for_setting, sensitivity_grid, BootstrapOptions,
    BootstrapResult, BootstrapScheme, CoverageConfig,
};
use odsbounds::lp::{cells_to_f64, oracle_check, oracle_check_exact, random_instance};
use odsbounds::probmodel::{
    counts_to_tables, joint_from_conditional, joint_from_conditional_iv, selection_given_z, DesignInfo,
    ObservedTables, SampleCounts,
};
use odsbounds::report::{self, canonical_json, fmt_f64, label, SCHEMA_VERSION};
use odsbounds::rng::stream_rng;
use odsbounds::simulation::{run_width_study, WidthStudyConfig};
use odsbounds::Error;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{exit, CliError};
use crate::input::{self, Data, InputDocument, LoadedInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub format: Format,
    pub term_policy: Option<TermPolicy>,
}

impl Globals {
    fn bounds_options(&self) -> BoundsOptions {
        BoundsOptions { term_policy: self.term_policy.unwrap_or_default() }
    }
}

/// Text for standard output and the process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: Vec<String>,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, stderr: Vec::new(), code: exit::OK }
    }
}

fn to_json(v: &Value) -> Result<String, CliError> {
    Ok(canonical_json(v)?)
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Schema(format!("csv output: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Schema(format!("csv output: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn default_settings(data: &Data) -> Vec<SettingTag> {
    let instrument = match data {
        Data::Counts { counts, .. } => counts.has_instrument(),
        Data::Tables { observed, .. } => matches!(observed, ObservedTables::Instrument(_)),
        Data::Cells(blocks) => blocks.len() == 2,
    };
    if instrument {
        SettingTag::ALL.to_vec()
    } else {
        vec![SettingTag::A, SettingTag::C, SettingTag::E, SettingTag::G]
    }
}

fn chosen_settings(cli: Option<Vec<SettingTag>>, loaded: &LoadedInput) -> Vec<SettingTag> {
    cli.or_else(|| loaded.settings.clone()).unwrap_or_else(|| default_settings(&loaded.data))
}

/// Design for count data; absent when no selection probability is available.
fn optional_design(counts: &SampleCounts, ext: &odsbounds::ExternalDesign) -> Result<Option<DesignInfo>, CliError> {
    match design_from_counts(counts, ext) {
        Ok(d) => Ok(Some(d)),
        Err(Error::SelectionUnavailable) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn point_bounds(tag: SettingTag, data: &Data, opts: &BoundsOptions) -> Result<BoundsInterval, CliError> {
    match data {
        Data::Counts { counts, external } => {
            let design = optional_design(counts, external)?;
            if tag.needs_design() && design.is_none() {
                return Err(Error::SelectionUnavailable.into());
            }
            Ok(bounds_for_setting(tag, &input_for_setting(tag, counts)?, design.as_ref(), opts)?)
        }
        Data::Tables { observed, population, design } => {
            let tables = match (tag, population) {
                (SettingTag::A | SettingTag::B, Some(p)) => p,
                _ => observed,
            };
            Ok(bounds_for_setting(tag, &BoundsInput::from(*tables), design.as_ref(), opts)?)
        }
        Data::Cells(_) => Err(CliError::Schema("selected_cells input is only accepted by verify".into())),
    }
}

fn ci_value(b: &BootstrapResult) -> Value {
    json!({
        "scheme": b.scheme,
        "B": b.b,
        "level": b.level,
        "lower_ci": b.lower_ci,
        "upper_ci": b.upper_ci,
        "union_ci": b.union_ci,
        "skipped": b.skipped,
        "flagged": b.flagged,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BootstrapRequest {
    pub scheme: BootstrapScheme,
    pub b: usize,
    pub level: f64,
}

pub fn cmd_bounds(
    g: &Globals,
    path: &Path,
    settings: Option<Vec<SettingTag>>,
    boot: Option<BootstrapRequest>,
) -> Result<Outcome, CliError> {
    let loaded = input::load(path)?;
    let tags = chosen_settings(settings, &loaded);
    let opts = g.bounds_options();
    let mut results: Vec<(SettingTag, Result<BoundsInterval, CliError>)> =
        tags.iter().map(|&t| (t, point_bounds(t, &loaded.data, &opts))).collect();

    let mut cis: BTreeMap<SettingTag, BootstrapResult> = BTreeMap::new();
    if let Some(req) = boot {
        let Data::Counts { counts, external } = &loaded.data else {
            return Err(CliError::Schema("bootstrap intervals need count data".into()));
        };
        let ok: Vec<SettingTag> = results.iter().filter(|(_, r)| r.is_ok()).map(|(t, _)| *t).collect();
        if !ok.is_empty() {
            let bopts = BootstrapOptions { b: req.b, seed: g.seed.unwrap_or(0), level: req.level, term_policy: opts.term_policy };
            for res in bootstrap(req.scheme, counts, &ok, external, &bopts)? {
                cis.insert(res.setting, res);
            }
        }
    }

    let mut stderr = Vec::new();
    let mut code = exit::OK;
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    let mut rows = Vec::new();
    for (tag, res) in results.drain(..) {
        let entry = match &res {
            Ok(b) => {
                let mut v = report::to_canonical_value(b)?;
                if let Some(ci) = cis.get(&tag) {
                    v["ci"] = ci_value(ci);
                }
                v
            }
            Err(e) => {
                stderr.push(format!("setting {tag}: {e}"));
                if code == exit::OK {
                    code = e.exit_code();
                }
                json!({ "error": e.to_string() })
            }
        };
        let ci = cis.get(&tag);
        let pick = |f: fn(&BootstrapResult) -> Option<[f64; 2]>, k: usize| {
            ci.and_then(f).map(|c| fmt_f64(c[k])).unwrap_or_default()
        };
        let terms = |v: &[odsbounds::bounds::TermId]| v.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ");
        rows.push(match &res {
            Ok(b) => vec![
                tag.to_string(),
                fmt_f64(b.lower),
                fmt_f64(b.upper),
                label(&b.case),
                terms(&b.active_terms.lower),
                terms(&b.active_terms.upper),
                pick(|r| r.lower_ci, 0),
                pick(|r| r.lower_ci, 1),
                pick(|r| r.upper_ci, 0),
                pick(|r| r.upper_ci, 1),
                String::new(),
            ],
            Err(e) => {
                let mut r = vec![tag.to_string()];
                r.extend(std::iter::repeat_n(String::new(), 9));
                r.push(e.to_string());
                r
            }
        });
        doc.insert(tag.to_string(), entry);
    }
    let stdout = match g.format {
        Format::Json => to_json(&Value::Object(doc))?,
        Format::Csv => csv_string(
            &[
                "setting",
                "lower",
                "upper",
                "case",
                "lower_terms",
                "upper_terms",
                "lower_ci_low",
                "lower_ci_high",
                "upper_ci_low",
                "upper_ci_high",
                "error",
            ],
            rows,
        )?,
    };
    Ok(Outcome { stdout, stderr, code })
}

const ORACLE_SETTINGS: [SettingTag; 4] = [SettingTag::E, SettingTag::F, SettingTag::G, SettingTag::H];

/// Joint selected cells `P(X, Y, S=1 | Z)` for the oracle.
fn oracle_cells(tag: SettingTag, data: &Data) -> Result<Vec<[[f64; 2]; 2]>, CliError> {
    let from_tables = |observed: &ObservedTables, design: &DesignInfo| -> Result<Vec<[[f64; 2]; 2]>, CliError> {
        if tag.has_instrument() {
            let ObservedTables::Instrument(obs) = observed else {
                return Err(Error::ShapeMismatch { tag, expected: "instrument-stratified" }.into());
            };
            let r_z = selection_given_z(obs, design)?;
            let j = joint_from_conditional_iv(&obs.tables, r_z);
            Ok((0..2).map(|z| j.per_z[z].selected_cells()).collect())
        } else {
            Ok(vec![joint_from_conditional(&observed.pooled(), design).selected_cells()])
        }
    };
    match data {
        Data::Cells(blocks) => {
            let want = if tag.has_instrument() { 2 } else { 1 };
            if blocks.len() != want {
                return Err(Error::ShapeMismatch {
                    tag,
                    expected: if want == 2 { "instrument-stratified" } else { "unstratified" },
                }
                .into());
            }
            Ok(blocks.clone())
        }
        Data::Tables { observed, design, .. } => {
            let design = design.as_ref().ok_or(Error::MissingDesign(tag))?;
            from_tables(observed, design)
        }
        Data::Counts { counts, external } => {
            let (observed, design) = counts_to_tables(counts, external)?;
            from_tables(&observed, &design)
        }
    }
}

fn pair(v: Option<(f64, f64)>) -> Value {
    match v {
        Some((a, b)) => json!([a, b]),
        None => Value::Null,
    }
}

#[derive(Default)]
struct VerifyTally {
    instances: usize,
    equal: usize,
    infeasible: usize,
    mismatched: usize,
}

pub fn cmd_verify(
    g: &Globals,
    path: Option<&Path>,
    random: Option<usize>,
    settings: Option<Vec<SettingTag>>,
    sparsity: f64,
) -> Result<Outcome, CliError> {
    let loaded = match (path, random) {
        (Some(p), None) => Some(input::load(p)?),
        (None, Some(_)) => None,
        _ => return Err(CliError::Schema("verify needs either an input file or --random".into())),
    };
    let tags = settings
        .or_else(|| loaded.as_ref().and_then(|l| l.settings.clone()))
        .unwrap_or_else(|| ORACLE_SETTINGS.to_vec());
    if tags.is_empty() {
        return Err(CliError::Schema("no settings to verify".into()));
    }
    if let Some(bad) = tags.iter().find(|t| !ORACLE_SETTINGS.contains(t)) {
        return Err(CliError::Schema(format!("the oracle covers settings E, F, G, H, not {bad}")));
    }
    if !(0.0..1.0).contains(&sparsity) {
        return Err(CliError::Schema(format!("sparsity {sparsity} outside [0, 1)")));
    }
    let seed = g.seed.unwrap_or(0);
    let mut tally: BTreeMap<SettingTag, VerifyTally> = BTreeMap::new();
    let mut instances = Vec::new();
    let mut rows = Vec::new();
    for (k, &tag) in tags.iter().enumerate() {
        let t = tally.entry(tag).or_default();
        let mut record = |index: usize, rep: odsbounds::lp::OracleReport, exact: Option<bool>| {
            t.instances += 1;
            let equal = rep.equal && exact.unwrap_or(true);
            if rep.infeasible() {
                t.infeasible += 1;
            } else if equal {
                t.equal += 1;
            } else {
                t.mismatched += 1;
            }
            rows.push(vec![
                index.to_string(),
                tag.to_string(),
                fmt_f64(rep.closed_form.0),
                fmt_f64(rep.closed_form.1),
                rep.lp.map(|l| fmt_f64(l.0)).unwrap_or_default(),
                rep.lp.map(|l| fmt_f64(l.1)).unwrap_or_default(),
                rep.infeasible().to_string(),
                equal.to_string(),
            ]);
            instances.push(json!({
                "index": index,
                "setting": tag,
                "closed_form": [rep.closed_form.0, rep.closed_form.1],
                "lp": pair(rep.lp),
                "deltas": pair(rep.deltas),
                "infeasible": rep.infeasible(),
                "equal": equal,
                "exact_equal": exact,
            }));
        };
        match (&loaded, random) {
            (Some(l), _) => {
                let cells = oracle_cells(tag, &l.data)?;
                record(0, oracle_check(tag, &cells)?, None);
            }
            (None, Some(n)) => {
                let mut rng = stream_rng(seed, k as u64);
                for i in 0..n {
                    let (cells, _) = random_instance(tag, &mut rng, sparsity)?;
                    let exact = oracle_check_exact(tag, &cells)?;
                    record(i, oracle_check(tag, &cells_to_f64(&cells))?, Some(exact.equal()));
                }
            }
            (None, None) => unreachable!("checked above"),
        }
    }
    let mismatched: usize = tally.values().map(|t| t.mismatched).sum();
    let warnings: usize = tally.values().map(|t| t.infeasible).sum();
    let summary: serde_json::Map<String, Value> = tally
        .iter()
        .map(|(tag, t)| {
            (
                tag.to_string(),
                json!({"instances": t.instances, "equal": t.equal, "infeasible": t.infeasible, "mismatched": t.mismatched}),
            )
        })
        .collect();
    let mut stderr: Vec<String> = Vec::new();
    if warnings > 0 {
        stderr.push(format!("warning: {warnings} infeasible instance(s)"));
    }
    if mismatched > 0 {
        stderr.push(format!("error: {mismatched} instance(s) where the closed form and the program disagree"));
    }
    let stdout = match g.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "mode": if random.is_some() { "random" } else { "input" },
            "seed": random.map(|_| seed),
            "sparsity": random.map(|_| sparsity),
            "summary": summary,
            "warnings": warnings,
            "instances": instances,
        }))?,
        Format::Csv => csv_string(
            &["index", "setting", "closed_lower", "closed_upper", "lp_lower", "lp_upper", "infeasible", "equal"],
            rows,
        )?,
    };
    Ok(Outcome { stdout, stderr, code: if mismatched > 0 { exit::MISMATCH } else { exit::OK } })
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = input::read_file(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn write_out(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Write { path: dir.to_path_buf(), source: e })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Write { path: path.clone(), source: e })?;
    Ok(path)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> odsbounds::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn cmd_simulate(g: &Globals, config: &Path) -> Result<Outcome, CliError> {
    let mut cfg: WidthStudyConfig = read_config(config)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(p) = g.term_policy {
        cfg.term_policy = p;
    }
    let study = run_width_study(&cfg)?;
    let json_text = report::study_summary_json(&study)?;
    write_out(&g.out_dir, "width_study.csv", &csv_bytes(|b| report::write_study_csv(b, &study))?)?;
    write_out(&g.out_dir, "width_study.json", json_text.as_bytes())?;
    let stdout = match g.format {
        Format::Json => json_text,
        Format::Csv => csv_string(
            &["setting", "n_valid", "n_errors", "violation_rate", "null_exclusion_rate", "median_width"],
            study
                .summary
                .iter()
                .map(|s| {
                    vec![
                        s.setting.to_string(),
                        s.n_valid.to_string(),
                        s.n_errors.to_string(),
                        s.violation_rate.map(fmt_f64).unwrap_or_default(),
                        s.null_exclusion_rate.map(fmt_f64).unwrap_or_default(),
                        s.median_width.map(fmt_f64).unwrap_or_default(),
                    ]
                })
                .collect(),
        )?,
    };
    Ok(Outcome::ok(stdout))
}

pub fn cmd_coverage(g: &Globals, config: &Path) -> Result<Outcome, CliError> {
    let mut cfg: CoverageConfig = read_config(config)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(p) = g.term_policy {
        cfg.term_policy = p;
    }
    let table = coverage_study(&cfg)?;
    let json_text = report::coverage_summary_json(&table)?;
    let csv = csv_bytes(|b| report::write_coverage_csv(b, &table))?;
    write_out(&g.out_dir, "coverage.csv", &csv)?;
    write_out(&g.out_dir, "coverage.json", json_text.as_bytes())?;
    let stdout = match g.format {
        Format::Json => json_text,
        Format::Csv => String::from_utf8(csv).expect("csv is utf-8"),
    };
    Ok(Outcome::ok(stdout))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InputRef {
    Path(PathBuf),
    Inline(Box<InputDocument>),
}

fn default_b() -> usize {
    200
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    pub input: InputRef,
    pub grid: Vec<f64>,
    #[serde(rename = "B", default = "default_b")]
    pub b: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub settings: Option<Vec<SettingTag>>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub term_policy: TermPolicy,
}

pub fn cmd_sensitivity(g: &Globals, config: &Path) -> Result<Outcome, CliError> {
    let cfg: SensitivityConfig = read_config(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let loaded = match &cfg.input {
        InputRef::Path(p) => input::load(&base.join(p))?,
        InputRef::Inline(doc) => input::resolve((**doc).clone(), base)?,
    };
    let Data::Counts { counts, external } = &loaded.data else {
        return Err(CliError::Schema("the sensitivity grid needs count data".into()));
    };
    let tags = cfg.settings.clone().or_else(|| loaded.settings.clone()).unwrap_or_else(|| vec![SettingTag::C]);
    let opts = BootstrapOptions {
        b: cfg.b,
        seed: g.seed.unwrap_or(cfg.seed),
        level: cfg.level,
        term_policy: g.term_policy.unwrap_or(cfg.term_policy),
    };
    let grid = sensitivity_grid(counts, &tags, &cfg.grid, external, &opts)?;
    let json_text = report::grid_summary_json(&grid)?;
    let csv = csv_bytes(|b| report::write_grid_csv(b, &grid))?;
    write_out(&g.out_dir, "sensitivity.csv", &csv)?;
    write_out(&g.out_dir, "sensitivity.json", json_text.as_bytes())?;
    let stdout = match g.format {
        Format::Json => json_text,
        Format::Csv => String::from_utf8(csv).expect("csv is utf-8"),
    };
    Ok(Outcome::ok(stdout))
}
