//! Percentile bootstrap for bound endpoints, coverage studies, and the
//! sensitivity grid over the selection probability.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bounds_for_setting, BoundsInput, BoundsInterval, BoundsOptions, SettingTag, TermPolicy};
use crate::error::{Error, Result};
use crate::probmodel::{
    counts_to_frequencies, DesignInfo, ExternalDesign, RSource, SampleCounts,
};
use crate::rng::{derive_seed, stream_rng};
use crate::simulation::{draw_sample, multinomial, observed_views, quantile_sorted, scenario_to_joint, SampleDesign, ScenarioParams};

/// Share of skipped replicates above which a result is flagged.
pub const SKIP_FLAG_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapScheme {
    /// Resample `n` selected subjects; `P(S=1)` stays fixed.
    #[serde(rename = "type_a", alias = "A", alias = "TypeA")]
    TypeA,
    /// Resample the whole cohort of `N`; `P(S=1)` is re-estimated.
    #[serde(rename = "type_b", alias = "B", alias = "TypeB")]
    TypeB,
}

impl BootstrapScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            BootstrapScheme::TypeA => "type_a",
            BootstrapScheme::TypeB => "type_b",
        }
    }
}

impl std::str::FromStr for BootstrapScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "type_a" | "typea" => Ok(BootstrapScheme::TypeA),
            "b" | "type_b" | "typeb" => Ok(BootstrapScheme::TypeB),
            _ => Err(Error::InvalidConfig(format!("unknown bootstrap scheme {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub term_policy: TermPolicy,
}

fn default_level() -> f64 {
    0.95
}

impl BootstrapOptions {
    pub fn new(b: usize, seed: u64) -> Self {
        Self { b, seed, level: default_level(), term_policy: TermPolicy::default() }
    }

    fn check(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::InvalidConfig("B must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("confidence level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

/// Percentile interval `[q(α/2), q(1-α/2)]` with type-7 quantiles.
pub fn percentile_ci(draws: &[f64], level: f64) -> Option<[f64; 2]> {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    Some([quantile_sorted(&sorted, a)?, quantile_sorted(&sorted, 1.0 - a)?])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub scheme: BootstrapScheme,
    pub setting: SettingTag,
    #[serde(rename = "B")]
    pub b: usize,
    pub level: f64,
    pub lower_draws: Vec<f64>,
    pub upper_draws: Vec<f64>,
    pub lower_ci: Option<[f64; 2]>,
    pub upper_ci: Option<[f64; 2]>,
    /// Lower quantile of the lower draws to upper quantile of the upper draws.
    pub union_ci: Option<[f64; 2]>,
    pub skipped: usize,
    pub flagged: bool,
}

impl BootstrapResult {
    fn from_draws(scheme: BootstrapScheme, setting: SettingTag, opts: &BootstrapOptions, draws: Vec<Option<(f64, f64)>>) -> Self {
        let b = draws.len();
        let kept: Vec<(f64, f64)> = draws.into_iter().flatten().collect();
        let lower_draws: Vec<f64> = kept.iter().map(|d| d.0).collect();
        let upper_draws: Vec<f64> = kept.iter().map(|d| d.1).collect();
        let lower_ci = percentile_ci(&lower_draws, opts.level);
        let upper_ci = percentile_ci(&upper_draws, opts.level);
        let union_ci = lower_ci.zip(upper_ci).map(|(l, u)| [l[0], u[1]]);
        let skipped = b - kept.len();
        Self {
            scheme,
            setting,
            b,
            level: opts.level,
            lower_draws,
            upper_draws,
            lower_ci,
            upper_ci,
            union_ci,
            skipped,
            flagged: skipped as f64 > SKIP_FLAG_SHARE * b as f64,
        }
    }
}

/// Plug-in tables for one design: pooled over the instrument for designs
/// without one, so an empty instrument stratum only affects designs that use it.
pub fn input_for_setting(tag: SettingTag, c: &SampleCounts) -> Result<BoundsInput> {
    if tag.has_instrument() || !c.has_instrument() {
        return Ok(counts_to_frequencies(c)?.into());
    }
    let pooled = SampleCounts::plain(c.collapsed(), c.cohort_size)?;
    Ok(counts_to_frequencies(&pooled)?.into())
}

/// Point bounds of one design from counts and a design.
pub fn bounds_from_counts(tag: SettingTag, c: &SampleCounts, design: &DesignInfo, opts: &BoundsOptions) -> Result<BoundsInterval> {
    bounds_for_setting(tag, &input_for_setting(tag, c)?, Some(design), opts)
}

/// Runs `b` replicates; replicate `i` uses stream `i` of the seed and one
/// resample is shared by every setting.
fn run_bootstrap<F>(scheme: BootstrapScheme, tags: &[SettingTag], opts: &BootstrapOptions, resample: F) -> Vec<BootstrapResult>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(SampleCounts, DesignInfo)> + Sync,
{
    let bopts = BoundsOptions { term_policy: opts.term_policy };
    let per_rep: Vec<Vec<Option<(f64, f64)>>> = (0..opts.b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(opts.seed, i as u64);
            match resample(&mut rng) {
                Ok((counts, design)) => tags
                    .iter()
                    .map(|&t| bounds_from_counts(t, &counts, &design, &bopts).ok().map(|b| (b.lower, b.upper)))
                    .collect(),
                Err(_) => vec![None; tags.len()],
            }
        })
        .collect();
    tags.iter()
        .enumerate()
        .map(|(k, &t)| BootstrapResult::from_draws(scheme, t, opts, per_rep.iter().map(|r| r[k]).collect()))
        .collect()
}

fn cell_probs(c: &SampleCounts) -> Vec<f64> {
    let n = c.n() as f64;
    c.flat().iter().map(|&v| v as f64 / n).collect()
}

/// Type A bootstrap: resamples of size `n` from the observed cells, with the
/// design held fixed.
pub fn bootstrap_type_a(
    c: &SampleCounts,
    tags: &[SettingTag],
    design: &DesignInfo,
    opts: &BootstrapOptions,
) -> Result<Vec<BootstrapResult>> {
    opts.check()?;
    if design.r_source != RSource::FixedByDesign {
        return Err(Error::Bootstrap("type A requires a selection probability fixed by design".into()));
    }
    let n = c.n();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let probs = cell_probs(c);
    Ok(run_bootstrap(BootstrapScheme::TypeA, tags, opts, |rng| {
        Ok((c.with_flat(&multinomial(rng, n, &probs), c.cohort_size), *design))
    }))
}

/// `P(Z=1)` held across Type B resamples: external if given, else the
/// observed share.
fn held_p_z1(c: &SampleCounts, external: &ExternalDesign) -> Result<Option<f64>> {
    if external.p_z1.is_some() || !c.has_instrument() {
        return Ok(external.p_z1);
    }
    let flat = c.flat();
    let z1: u64 = flat[4..].iter().sum();
    Ok(Some(z1 as f64 / c.n() as f64))
}

fn estimated_design(r: f64, p_z1: Option<f64>, external: &ExternalDesign) -> Result<DesignInfo> {
    let mut d = DesignInfo::new(r, RSource::Estimated)?;
    if let Some(p) = p_z1 {
        d = d.with_p_z1(p)?;
    }
    if let Some(sel) = external.sel_given_y {
        d = d.with_sel_given_y(sel)?;
    }
    Ok(d)
}

/// Type B bootstrap: resamples of size `N` from the pseudo-cohort of observed
/// rows plus `N - n` missing rows; `r' = n'/N` per resample.
pub fn bootstrap_type_b(
    c: &SampleCounts,
    tags: &[SettingTag],
    external: &ExternalDesign,
    opts: &BootstrapOptions,
) -> Result<Vec<BootstrapResult>> {
    opts.check()?;
    let big_n = c.cohort_size.ok_or_else(|| Error::Bootstrap("type B requires the cohort size N".into()))?;
    if big_n == 0 || c.n() == 0 {
        return Err(Error::EmptySample);
    }
    let p_z1 = held_p_z1(c, external)?;
    let mut probs: Vec<f64> = c.flat().iter().map(|&v| v as f64 / big_n as f64).collect();
    probs.push((big_n - c.n()) as f64 / big_n as f64);
    let cells = probs.len() - 1;
    Ok(run_bootstrap(BootstrapScheme::TypeB, tags, opts, |rng| {
        let draw = multinomial(rng, big_n, &probs);
        let resampled = c.with_flat(&draw[..cells], Some(big_n));
        let n_sel = resampled.n();
        if n_sel == 0 {
            return Err(Error::EmptySample);
        }
        let design = estimated_design(n_sel as f64 / big_n as f64, p_z1, external)?;
        Ok((resampled, design))
    }))
}

/// The design implied by counts and external facts, as for point estimates.
pub fn design_from_counts(c: &SampleCounts, external: &ExternalDesign) -> Result<DesignInfo> {
    if c.n() == 0 {
        return Err(Error::EmptySample);
    }
    let (r, source) = match (external.r, c.cohort_size) {
        (Some(r), _) => (r, external.r_source.unwrap_or(RSource::FixedByDesign)),
        (None, Some(big_n)) => (c.n() as f64 / big_n as f64, external.r_source.unwrap_or(RSource::Estimated)),
        (None, None) => return Err(Error::SelectionUnavailable),
    };
    let mut d = DesignInfo::new(r, source)?;
    if let Some(p) = held_p_z1(c, external)? {
        d = d.with_p_z1(p)?;
    }
    if let Some(sel) = external.sel_given_y {
        d = d.with_sel_given_y(sel)?;
    }
    Ok(d)
}

/// Bootstrap results for one dataset under either scheme.
pub fn bootstrap(
    scheme: BootstrapScheme,
    c: &SampleCounts,
    tags: &[SettingTag],
    external: &ExternalDesign,
    opts: &BootstrapOptions,
) -> Result<Vec<BootstrapResult>> {
    match scheme {
        BootstrapScheme::TypeA => bootstrap_type_a(c, tags, &design_from_counts(c, external)?, opts),
        BootstrapScheme::TypeB => bootstrap_type_b(c, tags, external, opts),
    }
}

fn default_coverage_settings() -> Vec<SettingTag> {
    vec![SettingTag::C, SettingTag::D, SettingTag::E, SettingTag::F, SettingTag::G, SettingTag::H]
}

fn default_datasets() -> usize {
    200
}

fn default_b() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub scheme: BootstrapScheme,
    /// Selected sample sizes `n` for Type A, cohort sizes `N` for Type B.
    pub sizes: Vec<u64>,
    #[serde(default = "default_datasets")]
    pub n_datasets: usize,
    #[serde(rename = "B", default = "default_b")]
    pub b: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_coverage_settings")]
    pub settings: Vec<SettingTag>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub term_policy: TermPolicy,
    #[serde(default = "ScenarioParams::reference")]
    pub scenario: ScenarioParams,
}

impl CoverageConfig {
    pub fn new(scheme: BootstrapScheme, sizes: Vec<u64>, n_datasets: usize, b: usize, seed: u64) -> Self {
        Self {
            scheme,
            sizes,
            n_datasets,
            b,
            seed,
            settings: default_coverage_settings(),
            level: default_level(),
            term_policy: TermPolicy::default(),
            scenario: ScenarioParams::reference(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub scheme: BootstrapScheme,
    pub size: u64,
    pub setting: SettingTag,
    pub endpoint: Endpoint,
    pub true_value: f64,
    pub mean_estimate: Option<f64>,
    pub mean_bias: Option<f64>,
    pub sd: Option<f64>,
    pub coverage: Option<f64>,
    /// Datasets whose point bounds and interval were both available.
    pub n_valid: usize,
    pub n_datasets: usize,
    pub n_flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageTable {
    pub config: CoverageConfig,
    pub true_bounds: Vec<(SettingTag, f64, f64)>,
    pub rows: Vec<CoverageRow>,
}

impl CoverageTable {
    pub fn row(&self, size: u64, setting: SettingTag, endpoint: Endpoint) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.size == size && r.setting == setting && r.endpoint == endpoint)
    }
}

struct DatasetOutcome {
    point: Option<(f64, f64)>,
    ci: Option<([f64; 2], [f64; 2])>,
    flagged: bool,
}

fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.len() > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

/// Bias, spread and interval coverage of bootstrap endpoint intervals on
/// datasets drawn from a fixed scenario. Dataset `m` at size index `k` uses
/// the seed derived from `(seed, k, m)`.
pub fn coverage_study(config: &CoverageConfig) -> Result<CoverageTable> {
    if config.sizes.is_empty() || config.n_datasets == 0 {
        return Err(Error::InvalidConfig("coverage study needs sizes and at least one dataset".into()));
    }
    let joint = scenario_to_joint(&config.scenario);
    let views = observed_views(&joint)?;
    let observable = joint.observable();
    let bopts = BoundsOptions { term_policy: config.term_policy };
    let mut true_bounds = Vec::new();
    for &t in &config.settings {
        let b = views.bounds(t, &bopts)?;
        true_bounds.push((t, b.lower, b.upper));
    }

    let mut rows = Vec::new();
    for (k, &size) in config.sizes.iter().enumerate() {
        let outcomes: Vec<Vec<DatasetOutcome>> = (0..config.n_datasets)
            .into_par_iter()
            .map(|m| {
                let data_seed = derive_seed(config.seed, &[k as u64, m as u64, 0]);
                let boot = BootstrapOptions {
                    b: config.b,
                    seed: derive_seed(config.seed, &[k as u64, m as u64, 1]),
                    level: config.level,
                    term_policy: config.term_policy,
                };
                let mut rng = stream_rng(data_seed, 0);
                let (sample, external) = match config.scheme {
                    BootstrapScheme::TypeA => (
                        draw_sample(&observable, SampleDesign::FixedSelected(size), &mut rng),
                        ExternalDesign {
                            r: Some(views.r),
                            r_source: Some(RSource::FixedByDesign),
                            p_z1: Some(views.p_z1),
                            sel_given_y: None,
                        },
                    ),
                    BootstrapScheme::TypeB => (
                        draw_sample(&observable, SampleDesign::FixedCohort(size), &mut rng),
                        ExternalDesign { p_z1: Some(views.p_z1), ..Default::default() },
                    ),
                };
                dataset_outcomes(config, &sample, &external, &boot)
            })
            .collect();
        for (idx, &(t, lo, hi)) in true_bounds.iter().enumerate() {
            for (endpoint, truth) in [(Endpoint::Lower, lo), (Endpoint::Upper, hi)] {
                let pick = |p: (f64, f64)| if endpoint == Endpoint::Lower { p.0 } else { p.1 };
                let mut estimates = Vec::new();
                let mut covered = 0usize;
                let mut n_flagged = 0usize;
                for o in outcomes.iter().map(|v| &v[idx]) {
                    if o.flagged {
                        n_flagged += 1;
                    }
                    let (Some(point), Some((lci, uci))) = (o.point, o.ci) else { continue };
                    estimates.push(pick(point));
                    let ci = if endpoint == Endpoint::Lower { lci } else { uci };
                    if ci[0] <= truth && truth <= ci[1] {
                        covered += 1;
                    }
                }
                let (mean, sd) = mean_sd(&estimates);
                let n_valid = estimates.len();
                rows.push(CoverageRow {
                    scheme: config.scheme,
                    size,
                    setting: t,
                    endpoint,
                    true_value: truth,
                    mean_estimate: mean,
                    mean_bias: mean.map(|m| m - truth),
                    sd,
                    coverage: (n_valid > 0).then(|| covered as f64 / n_valid as f64),
                    n_valid,
                    n_datasets: config.n_datasets,
                    n_flagged,
                });
            }
        }
    }
    Ok(CoverageTable { config: config.clone(), true_bounds, rows })
}

fn dataset_outcomes(
    config: &CoverageConfig,
    sample: &SampleCounts,
    external: &ExternalDesign,
    boot: &BootstrapOptions,
) -> Vec<DatasetOutcome> {
    let failed = || config.settings.iter().map(|_| DatasetOutcome { point: None, ci: None, flagged: false }).collect();
    let Ok(design) = design_from_counts(sample, external) else { return failed() };
    let Ok(results) = bootstrap(config.scheme, sample, &config.settings, external, boot) else { return failed() };
    let bopts = BoundsOptions { term_policy: config.term_policy };
    config
        .settings
        .iter()
        .zip(results)
        .map(|(&t, res)| DatasetOutcome {
            point: bounds_from_counts(t, sample, &design, &bopts).ok().map(|b| (b.lower, b.upper)),
            ci: res.lower_ci.zip(res.upper_ci),
            flagged: res.flagged,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub r: f64,
    pub setting: SettingTag,
    pub point: Option<BoundsInterval>,
    pub bootstrap: Option<BootstrapResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub grid: Vec<f64>,
    pub points: Vec<GridPoint>,
}

/// Point bounds and Type A intervals with `P(S=1)` set to each grid value.
/// Every grid point reuses the same bootstrap seed. Points whose value is
/// incompatible with the data carry an error and the run continues.
pub fn sensitivity_grid(
    c: &SampleCounts,
    tags: &[SettingTag],
    grid: &[f64],
    external: &ExternalDesign,
    opts: &BootstrapOptions,
) -> Result<GridResult> {
    opts.check()?;
    if let Some(bad) = grid.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(Error::InvalidConfig(format!("grid value {bad} outside (0, 1]")));
    }
    if c.n() == 0 {
        return Err(Error::EmptySample);
    }
    let p_z1 = held_p_z1(c, external)?;
    let bopts = BoundsOptions { term_policy: opts.term_policy };
    let mut points = Vec::new();
    for &r in grid {
        let design = (|| {
            let mut d = DesignInfo::fixed(r)?;
            if let Some(p) = p_z1 {
                d = d.with_p_z1(p)?;
            }
            if let Some(sel) = external.sel_given_y {
                d = d.with_sel_given_y(sel)?;
            }
            Ok::<_, Error>(d)
        })();
        let boots = design.as_ref().ok().map(|d| bootstrap_type_a(c, tags, d, opts));
        for (k, &t) in tags.iter().enumerate() {
            let point = design
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|d| bounds_from_counts(t, c, d, &bopts));
            let bootstrap = match &boots {
                Some(Ok(v)) => Some(v[k].clone()),
                _ => None,
            };
            let (point, error) = match point {
                Ok(b) => (Some(b), None),
                Err(e) => (None, Some(e.to_string())),
            };
            points.push(GridPoint { r, setting: t, point, bootstrap: if error.is_none() { bootstrap } else { None }, error });
        }
    }
    Ok(GridResult { grid: grid.to_vec(), points })
}
