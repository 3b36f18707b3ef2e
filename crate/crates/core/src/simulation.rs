//! Logistic generating models over `(U, Z, X, Y, S)`, their exact joint
//! distributions, and Monte Carlo studies of bound width and validity.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bounds_for_setting, BoundsInput, BoundsInterval, BoundsOptions, CaseLabel, SettingTag, TermPolicy};
use crate::error::{Error, Result};
use crate::probmodel::{ConditionalCellTable, ConditionalCellTableIv, DesignInfo, IvObservation, SampleCounts};
use crate::rng::stream_rng;

/// Slack for deciding that `θ` falls outside an interval.
pub const VIOLATION_SLACK: f64 = 1e-12;
/// Number of equal-width `|θ|` bins for null-exclusion curves.
pub const EXCLUSION_BINS: usize = 20;

pub fn expit(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// A binary structural model given by its conditional probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralModel {
    pub p_u: f64,
    pub p_z: f64,
    /// `P(X=1 | U=u, Z=z)` as `[u][z]`.
    pub p_x: [[f64; 2]; 2],
    /// `P(Y=1 | U=u, X=x)` as `[u][x]`.
    pub p_y: [[f64; 2]; 2],
    /// `P(S=1 | U=u, X=x, Y=y)` as `[u][x][y]`.
    pub p_s: [[[f64; 2]; 2]; 2],
}

fn bern(p: f64, v: usize) -> f64 {
    if v == 1 { p } else { 1.0 - p }
}

impl StructuralModel {
    pub fn joint(&self) -> FullJoint {
        let mut p = [[[[[0.0; 2]; 2]; 2]; 2]; 2];
        for u in 0..2 {
            for z in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        for s in 0..2 {
                            p[u][z][x][y][s] = bern(self.p_u, u)
                                * bern(self.p_z, z)
                                * bern(self.p_x[u][z], x)
                                * bern(self.p_y[u][x], y)
                                * bern(self.p_s[u][x][y], s);
                        }
                    }
                }
            }
        }
        FullJoint { p }
    }

    /// `Σ_u [P(Y=1 | u, X=1) - P(Y=1 | u, X=0)] P(U=u)`.
    pub fn true_ate(&self) -> f64 {
        (0..2).map(|u| (self.p_y[u][1] - self.p_y[u][0]) * bern(self.p_u, u)).sum()
    }
}

/// Coefficients of the logistic generating model
///
/// * `P(X=1|U,Z) = expit(α1 + α2 U + α3 Z + α4 U Z)`
/// * `P(Y=1|U,X) = expit(β1 + β2 U + β3 X + β4 U X)`
/// * `P(S=1|U,X,Y) = expit(γ1 + γ2 Y + γ3 U + γ4 X)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub p_u: f64,
    pub p_z: f64,
    pub alpha: [f64; 4],
    pub beta: [f64; 4],
    pub gamma: [f64; 4],
    pub sigma_u: f64,
    pub sigma_x: f64,
}

impl ScenarioParams {
    /// The fixed scenario used for the bootstrap studies.
    pub fn reference() -> Self {
        Self {
            p_u: 0.5,
            p_z: 0.5,
            alpha: [-1.0, 0.5, 0.5, 0.0],
            beta: [-1.0, 0.5, 0.5, 0.0],
            gamma: [-1.0, 0.5, 0.0, 0.0],
            sigma_u: 0.0,
            sigma_x: 0.0,
        }
    }

    pub fn model(&self) -> StructuralModel {
        let (a, b, g) = (self.alpha, self.beta, self.gamma);
        let mut m = StructuralModel {
            p_u: self.p_u,
            p_z: self.p_z,
            p_x: [[0.0; 2]; 2],
            p_y: [[0.0; 2]; 2],
            p_s: [[[0.0; 2]; 2]; 2],
        };
        for u in 0..2 {
            let uf = u as f64;
            for z in 0..2 {
                let zf = z as f64;
                m.p_x[u][z] = expit(a[0] + a[1] * uf + a[2] * zf + a[3] * uf * zf);
            }
            for x in 0..2 {
                let xf = x as f64;
                m.p_y[u][x] = expit(b[0] + b[1] * uf + b[2] * xf + b[3] * uf * xf);
                for y in 0..2 {
                    m.p_s[u][x][y] = expit(g[0] + g[1] * y as f64 + g[2] * uf + g[3] * xf);
                }
            }
        }
        m
    }
}

/// Draws `pU, pZ ~ U(0,1)`, ten coefficients `~ N(0, 5²)`, `γ3 ~ N(0, σ_U²)`
/// and `γ4 ~ N(0, σ_X²)`. The same number of variates is consumed for every
/// pair of standard deviations.
pub fn draw_scenario<R: Rng + ?Sized>(rng: &mut R, sigma_u: f64, sigma_x: f64) -> ScenarioParams {
    let p_u = rng.random::<f64>();
    let p_z = rng.random::<f64>();
    let mut normal = |sd: f64| -> f64 {
        let v: f64 = StandardNormal.sample(rng);
        // `+ 0.0` turns a negative zero from `sd = 0` into zero
        sd * v + 0.0
    };
    let alpha = [normal(5.0), normal(5.0), normal(5.0), normal(5.0)];
    let beta = [normal(5.0), normal(5.0), normal(5.0), normal(5.0)];
    let g1 = normal(5.0);
    let g2 = normal(5.0);
    let g3 = normal(sigma_u);
    let g4 = normal(sigma_x);
    ScenarioParams { p_u, p_z, alpha, beta, gamma: [g1, g2, g3, g4], sigma_u, sigma_x }
}

pub fn draw_scenario_seeded(seed: u64, sigma_u: f64, sigma_x: f64) -> ScenarioParams {
    draw_scenario(&mut stream_rng(seed, 0), sigma_u, sigma_x)
}

pub fn scenario_to_joint(p: &ScenarioParams) -> FullJoint {
    p.model().joint()
}

pub fn true_ate(p: &ScenarioParams) -> f64 {
    p.model().true_ate()
}

/// Probabilities over the 32 cells `[u][z][x][y][s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullJoint {
    pub p: [[[[[f64; 2]; 2]; 2]; 2]; 2],
}

/// Cells of the observable joint `[z][x][y][s]`.
pub type ObservableJoint = [[[[f64; 2]; 2]; 2]; 2];

impl FullJoint {
    pub fn total(&self) -> f64 {
        self.p.iter().flatten().flatten().flatten().flatten().sum()
    }

    /// Marginal over the unmeasured confounder.
    pub fn observable(&self) -> ObservableJoint {
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        for pu in &self.p {
            for z in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        for s in 0..2 {
                            out[z][x][y][s] += pu[z][x][y][s];
                        }
                    }
                }
            }
        }
        out
    }
}

/// Everything each design observes, derived exactly from a joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservedViews {
    /// `p_{xy.1}`.
    pub selected: ConditionalCellTable,
    /// `p_{xy.z1}` with the observed share `P(Z=1 | S=1)`.
    pub selected_iv: IvObservation,
    /// `p_{xy}`.
    pub population: ConditionalCellTable,
    /// `p_{xy.Z=z}`.
    pub population_iv: ConditionalCellTableIv,
    pub r: f64,
    pub r_z: [f64; 2],
    pub p_z1: f64,
}

impl ObservedViews {
    pub fn from_observable(p: &ObservableJoint) -> Result<Self> {
        let mass = |f: &dyn Fn(usize, usize, usize, usize) -> bool| {
            let mut acc = 0.0;
            for z in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        for s in 0..2 {
                            if f(z, x, y, s) {
                                acc += p[z][x][y][s];
                            }
                        }
                    }
                }
            }
            acc
        };
        let r = mass(&|_, _, _, s| s == 1);
        if r <= 0.0 {
            return Err(Error::SelectionOutOfRange(r));
        }
        let pz = [0, 1].map(|zz| mass(&|z, _, _, _| z == zz));
        let sel_z = [0, 1].map(|zz| mass(&|z, _, _, s| z == zz && s == 1));
        for z in 0..2 {
            if sel_z[z] <= 0.0 {
                return Err(Error::EmptyInstrumentStratum(z));
            }
        }
        let table = |f: &dyn Fn(usize, usize) -> f64| ConditionalCellTable::new([[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]]);
        let selected_z = [0, 1].map(|z| table(&|x, y| p[z][x][y][1] / sel_z[z]));
        let population_z = [0, 1].map(|z| table(&|x, y| (p[z][x][y][0] + p[z][x][y][1]) / pz[z]));
        let [s0, s1] = selected_z;
        let [q0, q1] = population_z;
        let selected_iv = IvObservation::new(ConditionalCellTableIv::new(s0?, s1?), sel_z[1] / r)?;
        let population_iv = ConditionalCellTableIv::new(q0?, q1?);
        Ok(Self {
            selected: table(&|x, y| (p[0][x][y][1] + p[1][x][y][1]) / r)?,
            selected_iv,
            population: table(&|x, y| mass(&|_, xx, yy, _| xx == x && yy == y))?,
            population_iv,
            r,
            r_z: [sel_z[0] / pz[0], sel_z[1] / pz[1]],
            p_z1: pz[1],
        })
    }

    /// Design information with `P(S=1)` and `P(Z=1)` known.
    pub fn design(&self) -> Result<DesignInfo> {
        DesignInfo::fixed(self.r)?.with_p_z1(self.p_z1)
    }

    /// The true bounds of a design under this distribution.
    pub fn bounds(&self, tag: SettingTag, opts: &BoundsOptions) -> Result<BoundsInterval> {
        match tag {
            SettingTag::A => bounds_for_setting(tag, &BoundsInput::Plain(self.population), None, opts),
            SettingTag::B => {
                let obs = IvObservation::new(self.population_iv, self.p_z1)?;
                bounds_for_setting(tag, &BoundsInput::Instrument(obs), None, opts)
            }
            _ => bounds_for_setting(tag, &BoundsInput::Instrument(self.selected_iv), Some(&self.design()?), opts),
        }
    }
}

pub fn observed_views(j: &FullJoint) -> Result<ObservedViews> {
    ObservedViews::from_observable(&j.observable())
}

/// Multinomial draw by sequential conditional binomials. Categories after the
/// last one with positive probability never receive counts.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let Some(last) = probs.iter().rposition(|p| *p > 0.0) else { return out };
    let mut tail: Vec<f64> = vec![0.0; probs.len() + 1];
    for k in (0..probs.len()).rev() {
        tail[k] = tail[k + 1] + probs[k].max(0.0);
    }
    let mut left = n;
    for k in 0..last {
        if left == 0 {
            break;
        }
        let p = (probs[k].max(0.0) / tail[k]).clamp(0.0, 1.0);
        let draw = Binomial::new(left, p).expect("probability in [0, 1]").sample(rng);
        out[k] = draw;
        left -= draw;
    }
    out[last] += left;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleDesign {
    /// `n` draws from `P(Z, X, Y | S=1)`.
    FixedSelected(u64),
    /// `N` draws from `P(Z, X, Y, S)`; unselected subjects only count toward `N`.
    FixedCohort(u64),
}

pub fn draw_sample<R: Rng + ?Sized>(j: &ObservableJoint, design: SampleDesign, rng: &mut R) -> SampleCounts {
    let mut selected = [0.0; 8];
    for z in 0..2 {
        for x in 0..2 {
            for y in 0..2 {
                selected[4 * z + 2 * x + y] = j[z][x][y][1];
            }
        }
    }
    let shape = SampleCounts::instrument([[[0; 2]; 2]; 2], None).expect("empty counts");
    match design {
        SampleDesign::FixedSelected(n) => {
            let r: f64 = selected.iter().sum();
            let probs: Vec<f64> = selected.iter().map(|v| v / r).collect();
            shape.with_flat(&multinomial(rng, n, &probs), None)
        }
        SampleDesign::FixedCohort(big_n) => {
            let mut probs = selected.to_vec();
            let unselected: f64 = j.iter().flatten().flatten().map(|s| s[0]).sum();
            probs.push(unselected);
            let draw = multinomial(rng, big_n, &probs);
            shape.with_flat(&draw[..8], Some(big_n))
        }
    }
}

fn all_settings() -> Vec<SettingTag> {
    SettingTag::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthStudyConfig {
    pub n_reps: usize,
    #[serde(rename = "sigma_U", default)]
    pub sigma_u: f64,
    #[serde(rename = "sigma_X", default)]
    pub sigma_x: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_settings")]
    pub settings: Vec<SettingTag>,
    #[serde(default)]
    pub term_policy: TermPolicy,
}

impl WidthStudyConfig {
    pub fn new(n_reps: usize, sigma_u: f64, sigma_x: f64, seed: u64) -> Self {
        Self { n_reps, sigma_u, sigma_x, seed, settings: all_settings(), term_policy: TermPolicy::default() }
    }
}

/// One design evaluated on one generated distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub setting: SettingTag,
    pub theta: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub case: Option<CaseLabel>,
    /// Error message when the design produced no interval.
    pub error: Option<String>,
}

impl ReplicateRow {
    pub fn width(&self) -> Option<f64> {
        Some(self.upper? - self.lower?)
    }

    pub fn violated(&self) -> Option<bool> {
        Some(self.theta < self.lower? - VIOLATION_SLACK || self.theta > self.upper? + VIOLATION_SLACK)
    }

    pub fn excludes_null(&self) -> Option<bool> {
        Some(self.lower? > 0.0 || self.upper? < 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionBin {
    pub abs_theta_lower: f64,
    pub abs_theta_upper: f64,
    pub n: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingSummary {
    pub setting: SettingTag,
    pub n_valid: usize,
    pub n_errors: usize,
    pub n_violations: usize,
    pub violation_rate: Option<f64>,
    pub null_exclusion_rate: Option<f64>,
    pub mean_width: Option<f64>,
    pub q25_width: Option<f64>,
    pub median_width: Option<f64>,
    pub q75_width: Option<f64>,
    pub exclusion_curve: Vec<ExclusionBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub config: WidthStudyConfig,
    pub rows: Vec<ReplicateRow>,
    pub summary: Vec<SettingSummary>,
}

impl StudyResult {
    pub fn summary_for(&self, tag: SettingTag) -> Option<&SettingSummary> {
        self.summary.iter().find(|s| s.setting == tag)
    }
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn summarize(tag: SettingTag, rows: &[ReplicateRow]) -> SettingSummary {
    let mine: Vec<&ReplicateRow> = rows.iter().filter(|r| r.setting == tag).collect();
    let valid: Vec<&&ReplicateRow> = mine.iter().filter(|r| r.error.is_none()).collect();
    let mut widths: Vec<f64> = valid.iter().filter_map(|r| r.width()).collect();
    widths.sort_by(f64::total_cmp);
    let n = valid.len();
    let n_violations = valid.iter().filter(|r| r.violated() == Some(true)).count();
    let excluded = valid.iter().filter(|r| r.excludes_null() == Some(true)).count();
    let rate = |k: usize| (n > 0).then(|| k as f64 / n as f64);
    let mut exclusion_curve: Vec<ExclusionBin> = (0..EXCLUSION_BINS)
        .map(|b| ExclusionBin {
            abs_theta_lower: b as f64 / EXCLUSION_BINS as f64,
            abs_theta_upper: (b + 1) as f64 / EXCLUSION_BINS as f64,
            n: 0,
            excluded: 0,
        })
        .collect();
    for r in &valid {
        let b = ((r.theta.abs() * EXCLUSION_BINS as f64) as usize).min(EXCLUSION_BINS - 1);
        exclusion_curve[b].n += 1;
        if r.excludes_null() == Some(true) {
            exclusion_curve[b].excluded += 1;
        }
    }
    SettingSummary {
        setting: tag,
        n_valid: n,
        n_errors: mine.len() - n,
        n_violations,
        violation_rate: rate(n_violations),
        null_exclusion_rate: rate(excluded),
        mean_width: (n > 0).then(|| widths.iter().sum::<f64>() / n as f64),
        q25_width: quantile_sorted(&widths, 0.25),
        median_width: quantile_sorted(&widths, 0.5),
        q75_width: quantile_sorted(&widths, 0.75),
        exclusion_curve,
    }
}

/// Evaluates every configured design on `n_reps` random distributions.
/// Replicate `i` draws its scenario from stream `i` of the study seed.
pub fn run_width_study(config: &WidthStudyConfig) -> Result<StudyResult> {
    if config.n_reps == 0 {
        return Err(Error::InvalidConfig("n_reps must be at least 1".into()));
    }
    if !(config.sigma_u >= 0.0 && config.sigma_x >= 0.0) {
        return Err(Error::InvalidConfig("standard deviations must be nonnegative".into()));
    }
    let opts = BoundsOptions { term_policy: config.term_policy };
    let rows: Vec<Vec<ReplicateRow>> = (0..config.n_reps)
        .into_par_iter()
        .map(|i| {
            let params = draw_scenario(&mut stream_rng(config.seed, i as u64), config.sigma_u, config.sigma_x);
            let theta = true_ate(&params);
            let views = observed_views(&scenario_to_joint(&params));
            config
                .settings
                .iter()
                .map(|&tag| {
                    let res = views.as_ref().map_err(Clone::clone).and_then(|v| v.bounds(tag, &opts));
                    let mut row = ReplicateRow {
                        replicate: i,
                        seed: config.seed,
                        setting: tag,
                        theta,
                        lower: None,
                        upper: None,
                        case: None,
                        error: None,
                    };
                    match res {
                        Ok(b) => {
                            row.lower = Some(b.lower);
                            row.upper = Some(b.upper);
                            row.case = Some(b.case);
                        }
                        Err(e) => row.error = Some(e.to_string()),
                    }
                    row
                })
                .collect()
        })
        .collect();
    let rows: Vec<ReplicateRow> = rows.into_iter().flatten().collect();
    let summary = config.settings.iter().map(|&t| summarize(t, &rows)).collect();
    Ok(StudyResult { config: config.clone(), rows, summary })
}
