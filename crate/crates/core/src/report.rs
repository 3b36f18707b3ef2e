//! Reproducible serialization: floats rounded to ten significant digits,
//! JSON objects with sorted keys, fixed CSV column order.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::inference::{CoverageTable, GridResult};
use crate::simulation::StudyResult;

pub const SCHEMA_VERSION: u32 = 1;
pub const SIGNIFICANT_DIGITS: usize = 10;

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float")
}

/// Rounds every float in a JSON tree.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

pub fn to_canonical_value<T: Serialize>(v: &T) -> Result<Value> {
    let v = serde_json::to_value(v).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(round_value(v))
}

/// Pretty JSON with sorted keys and rounded floats, newline-terminated.
pub fn canonical_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&to_canonical_value(v)?).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn fmt_f64(x: f64) -> String {
    let v = round_sig(x);
    if v.is_finite() { format!("{v}") } else { String::new() }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_bool(b: Option<bool>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

/// The serde name of a unit enum variant.
pub fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("csv output: {e}"))
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidConfig(format!("csv output: {e}")))
}

pub const STUDY_COLUMNS: [&str; 11] =
    ["replicate", "seed", "setting", "theta", "lower", "upper", "width", "violated", "excludes_null", "case", "error"];

pub fn write_study_csv<W: Write>(out: W, s: &StudyResult) -> Result<()> {
    write_rows(
        out,
        &STUDY_COLUMNS,
        s.rows.iter().map(|r| {
            vec![
                r.replicate.to_string(),
                r.seed.to_string(),
                r.setting.to_string(),
                fmt_f64(r.theta),
                fmt_opt(r.lower),
                fmt_opt(r.upper),
                fmt_opt(r.width()),
                fmt_bool(r.violated()),
                fmt_bool(r.excludes_null()),
                r.case.as_ref().map(label).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn study_summary_json(s: &StudyResult) -> Result<String> {
    canonical_json(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "width_study",
        "config": s.config,
        "summary": s.summary,
    }))
}

pub const COVERAGE_COLUMNS: [&str; 12] = [
    "scheme",
    "size",
    "setting",
    "endpoint",
    "true_value",
    "mean_estimate",
    "mean_bias",
    "sd",
    "coverage",
    "n_valid",
    "n_datasets",
    "n_flagged",
];

pub fn write_coverage_csv<W: Write>(out: W, t: &CoverageTable) -> Result<()> {
    write_rows(
        out,
        &COVERAGE_COLUMNS,
        t.rows.iter().map(|r| {
            vec![
                r.scheme.as_str().to_string(),
                r.size.to_string(),
                r.setting.to_string(),
                label(&r.endpoint),
                fmt_f64(r.true_value),
                fmt_opt(r.mean_estimate),
                fmt_opt(r.mean_bias),
                fmt_opt(r.sd),
                fmt_opt(r.coverage),
                r.n_valid.to_string(),
                r.n_datasets.to_string(),
                r.n_flagged.to_string(),
            ]
        }),
    )
}

pub fn coverage_summary_json(t: &CoverageTable) -> Result<String> {
    let truth: Vec<Value> = t
        .true_bounds
        .iter()
        .map(|(s, l, u)| serde_json::json!({"setting": s, "lower": l, "upper": u}))
        .collect();
    canonical_json(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "coverage",
        "config": t.config,
        "true_bounds": truth,
        "rows": t.rows,
    }))
}

pub const GRID_COLUMNS: [&str; 13] = [
    "r",
    "setting",
    "lower",
    "upper",
    "case",
    "lower_ci_low",
    "lower_ci_high",
    "upper_ci_low",
    "upper_ci_high",
    "B",
    "skipped",
    "flagged",
    "error",
];

pub fn write_grid_csv<W: Write>(out: W, g: &GridResult) -> Result<()> {
    write_rows(
        out,
        &GRID_COLUMNS,
        g.points.iter().map(|p| {
            let b = p.bootstrap.as_ref();
            let ci = |f: fn(&crate::inference::BootstrapResult) -> Option<[f64; 2]>, k: usize| {
                fmt_opt(b.and_then(f).map(|c| c[k]))
            };
            vec![
                fmt_f64(p.r),
                p.setting.to_string(),
                fmt_opt(p.point.as_ref().map(|i| i.lower)),
                fmt_opt(p.point.as_ref().map(|i| i.upper)),
                p.point.as_ref().map(|i| label(&i.case)).unwrap_or_default(),
                ci(|r| r.lower_ci, 0),
                ci(|r| r.lower_ci, 1),
                ci(|r| r.upper_ci, 0),
                ci(|r| r.upper_ci, 1),
                b.map(|r| r.b.to_string()).unwrap_or_default(),
                b.map(|r| r.skipped.to_string()).unwrap_or_default(),
                fmt_bool(b.map(|r| r.flagged)),
                p.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

/// Grid summary without the per-replicate draws.
pub fn grid_summary_json(g: &GridResult) -> Result<String> {
    let points: Vec<Value> = g
        .points
        .iter()
        .map(|p| {
            serde_json::json!({
                "r": p.r,
                "setting": p.setting,
                "point": p.point,
                "lower_ci": p.bootstrap.as_ref().and_then(|b| b.lower_ci),
                "upper_ci": p.bootstrap.as_ref().and_then(|b| b.upper_ci),
                "union_ci": p.bootstrap.as_ref().and_then(|b| b.union_ci),
                "skipped": p.bootstrap.as_ref().map(|b| b.skipped),
                "flagged": p.bootstrap.as_ref().map(|b| b.flagged),
                "error": p.error,
            })
        })
        .collect();
    canonical_json(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "sensitivity_grid",
        "grid": g.grid,
        "points": points,
    }))
}
