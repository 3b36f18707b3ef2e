mod common;

use odsbounds::bounds::{BoundsInput, BoundsOptions, SettingTag};
use odsbounds::inference::*;
use odsbounds::probmodel::*;
use odsbounds::report;
use odsbounds::rng::stream_rng;
use odsbounds::simulation::*;
use odsbounds::bounds_for_setting;

#[test]
fn joint_is_normalized_and_factorizes() {
    let p = draw_scenario_seeded(3, 5.0, 5.0);
    let j = scenario_to_joint(&p);
    assert!((j.total() - 1.0).abs() < 1e-12);
    let m = p.model();
    // P(U=1, Z=1, X=1) from the joint
    let mass: f64 = j.p[1][1][1].iter().flatten().sum();
    assert!((mass - m.p_u * m.p_z * m.p_x[1][1]).abs() < 1e-12);
}

#[test]
fn scenario_stream_is_fixed_per_seed() {
    let a = draw_scenario_seeded(99, 10.0, 0.0);
    let b = draw_scenario_seeded(99, 10.0, 0.0);
    assert_eq!(a, b);
    let c = draw_scenario_seeded(99, 0.0, 10.0);
    // the deviations only scale their own coefficient
    assert_eq!((a.alpha, a.beta), (c.alpha, c.beta));
    assert_eq!(a.gamma[..2], c.gamma[..2]);
    assert_eq!((a.gamma[3], c.gamma[2]), (0.0, 0.0));
}

#[test]
fn width_study_is_deterministic_and_valid_without_misspecification() {
    let cfg = WidthStudyConfig::new(300, 0.0, 0.0, 17);
    let a = run_width_study(&cfg).unwrap();
    let b = run_width_study(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 300 * 8);
    for tag in SettingTag::ALL {
        let s = a.summary_for(tag).unwrap();
        assert_eq!(s.n_violations, 0, "{tag}");
        assert_eq!(s.exclusion_curve.len(), EXCLUSION_BINS);
        assert_eq!(s.exclusion_curve.iter().map(|b| b.n).sum::<usize>(), s.n_valid);
    }
    let a_s = a.summary_for(SettingTag::A).unwrap();
    assert!((a_s.median_width.unwrap() - 1.0).abs() < 1e-12);
    let mut csv = Vec::new();
    report::write_study_csv(&mut csv, &a).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("replicate,seed,setting,theta,lower,upper,width,violated,excludes_null,case,error\n"));
    assert_eq!(text.lines().count(), 1 + 300 * 8);
}

#[test]
fn width_study_config_keys() {
    let cfg: WidthStudyConfig = serde_json::from_str(r#"{"n_reps": 5, "sigma_U": 2.5, "sigma_X": 0, "seed": 4}"#).unwrap();
    assert_eq!(cfg.sigma_u, 2.5);
    assert_eq!(cfg.settings.len(), 8);
    assert!(run_width_study(&WidthStudyConfig::new(0, 0.0, 0.0, 1)).is_err());
}

#[test]
fn samples_have_requested_sizes() {
    let j = common::worked_example_joint();
    let mut rng = stream_rng(5, 0);
    let s = draw_sample(&j, SampleDesign::FixedSelected(500), &mut rng);
    assert_eq!(s.n(), 500);
    assert_eq!(s.cohort_size, None);
    let c = draw_sample(&j, SampleDesign::FixedCohort(2000), &mut rng);
    assert_eq!(c.cohort_size, Some(2000));
    assert!(c.n() < 2000);
}

fn counts(c: [[[u64; 2]; 2]; 2], big_n: Option<u64>) -> SampleCounts {
    SampleCounts::instrument(c, big_n).unwrap()
}

#[test]
fn single_replicate_is_bounds_of_the_resample() {
    let c = counts([[[30, 10], [12, 20]], [[40, 8], [15, 25]]], None);
    let d = DesignInfo::fixed(0.3).unwrap().with_p_z1(0.55).unwrap();
    let opts = BootstrapOptions::new(1, 21);
    let res = bootstrap_type_a(&c, &[SettingTag::D], &d, &opts).unwrap();
    let probs: Vec<f64> = c.flat().iter().map(|v| *v as f64 / c.n() as f64).collect();
    let draw = c.with_flat(&multinomial(&mut stream_rng(21, 0), c.n(), &probs), None);
    let input = BoundsInput::from(counts_to_frequencies(&draw).unwrap());
    let b = bounds_for_setting(SettingTag::D, &input, Some(&d), &BoundsOptions::default()).unwrap();
    assert_eq!(res[0].lower_draws, vec![b.lower]);
    assert_eq!(res[0].upper_draws, vec![b.upper]);
    assert_eq!(res[0].lower_ci, Some([b.lower, b.lower]));
}

#[test]
fn degenerate_resamples_are_skipped_and_flagged() {
    // a stratum with a single subject empties in about a third of resamples
    let c = counts([[[0, 0], [0, 1]], [[1, 0], [0, 1]]], None);
    let d = DesignInfo::fixed(0.5).unwrap().with_p_z1(0.4).unwrap();
    let res = bootstrap_type_a(&c, &[SettingTag::D, SettingTag::C], &d, &BootstrapOptions::new(200, 2)).unwrap();
    assert!(res[0].skipped > 20 && res[0].flagged);
    assert_eq!(res[0].lower_draws.len(), 200 - res[0].skipped);
    assert_eq!(res[1].skipped, 0);
}

#[test]
fn cohort_resampling_varies_selection_like_a_binomial() {
    let c = SampleCounts::plain([[100, 60], [40, 100]], Some(1000)).unwrap();
    let b = 4000;
    let res = bootstrap_type_b(&c, &[SettingTag::E], &ExternalDesign::default(), &BootstrapOptions::new(b, 8)).unwrap();
    // E's lower endpoint is p001 + p111 - 1 with joint cells, linear in n'/N
    // so r' = upper - lower mapping is not needed; recover r' via the width 2 - r'
    let r: Vec<f64> = res[0].lower_draws.iter().zip(&res[0].upper_draws).map(|(l, u)| 2.0 - (u - l)).collect();
    let mean = r.iter().sum::<f64>() / b as f64;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    let expect = 0.3 * 0.7 / 1000.0;
    assert!((mean - 0.3).abs() < 0.003);
    assert!((var / expect - 1.0).abs() < 0.1, "{var} vs {expect}");
    assert!(bootstrap_type_b(&SampleCounts::plain([[1, 1], [1, 1]], None).unwrap(), &[SettingTag::E], &ExternalDesign::default(), &BootstrapOptions::new(5, 1)).is_err());
}

#[test]
fn full_cohort_type_b_matches_type_a_in_distribution() {
    let c = counts([[[50, 30], [20, 40]], [[45, 25], [35, 55]]], Some(300));
    let tags = [SettingTag::C, SettingTag::F];
    let ext = ExternalDesign { p_z1: Some(0.5), ..Default::default() };
    let d = DesignInfo::fixed(1.0).unwrap().with_p_z1(0.5).unwrap();
    let a = bootstrap_type_a(&c, &tags, &d, &BootstrapOptions::new(2000, 1)).unwrap();
    let b = bootstrap_type_b(&c, &tags, &ext, &BootstrapOptions::new(2000, 2)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        for (p, q) in [(x.lower_ci, y.lower_ci), (x.upper_ci, y.upper_ci)] {
            let (p, q) = (p.unwrap(), q.unwrap());
            // Monte Carlo error of a tail quantile at B = 2000
            assert!((p[0] - q[0]).abs() < 0.02 && (p[1] - q[1]).abs() < 0.02, "{p:?} {q:?}");
        }
    }
}

#[test]
fn sensitivity_grid_behaviour() {
    let c = SampleCounts::plain([[60, 30], [25, 85]], None).unwrap();
    let opts = BootstrapOptions::new(100, 4);
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
    let g = sensitivity_grid(&c, &[SettingTag::C], &grid, &ExternalDesign::default(), &opts).unwrap();
    assert_eq!(g.points.iter().map(|p| p.r).collect::<Vec<_>>(), grid);
    for w in g.points.windows(2) {
        let (a, b) = (w[0].point.as_ref().unwrap(), w[1].point.as_ref().unwrap());
        assert!(a.lower <= b.lower && a.upper >= b.upper);
    }
    let at_one = g.points.last().unwrap().point.as_ref().unwrap();
    let obs = counts_to_frequencies(&c).unwrap().pooled();
    let robins = odsbounds::bounds::robins_bounds(&obs);
    assert!((at_one.lower - robins.lower).abs() < 1e-12 && (at_one.upper - robins.upper).abs() < 1e-12);

    let single = sensitivity_grid(&c, &[SettingTag::C], &[0.5], &ExternalDesign::default(), &opts).unwrap();
    let direct = bootstrap_type_a(&c, &[SettingTag::C], &DesignInfo::fixed(0.5).unwrap(), &opts).unwrap();
    assert_eq!(single.points[0].bootstrap.as_ref().unwrap(), &direct[0]);
    assert!(sensitivity_grid(&c, &[SettingTag::C], &[0.0], &ExternalDesign::default(), &opts).is_err());
}

#[test]
fn incompatible_grid_point_is_recorded() {
    let c = counts([[[20, 10], [10, 20]], [[5, 5], [5, 5]]], None);
    // 60/80 selected subjects have Z = 0; with P(Z=1) = 0.9 the stratum rate exceeds one at r = 0.9
    let ext = ExternalDesign { p_z1: Some(0.9), ..Default::default() };
    let g = sensitivity_grid(&c, &[SettingTag::D], &[0.05, 0.9], &ext, &BootstrapOptions::new(20, 1)).unwrap();
    assert!(g.points[0].error.is_none() && g.points[0].bootstrap.is_some());
    assert!(g.points[1].error.as_ref().unwrap().contains("inconsistent selection"));
    assert!(g.points[1].bootstrap.is_none());
}

#[test]
fn coverage_study_small_scale() {
    let cfg = CoverageConfig::new(BootstrapScheme::TypeA, vec![400], 30, 50, 3);
    let t = coverage_study(&cfg).unwrap();
    assert_eq!(t, coverage_study(&cfg).unwrap());
    assert_eq!(t.rows.len(), 6 * 2);
    for r in &t.rows {
        assert_eq!(r.n_valid, 30);
        assert!(r.mean_bias.unwrap().abs() < 0.02);
    }
    let mut csv = Vec::new();
    report::write_coverage_csv(&mut csv, &t).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 13);
    let json = report::coverage_summary_json(&t).unwrap();
    assert!(json.contains("\"schema_version\": 1"));

    let parsed: CoverageConfig = serde_json::from_str(r#"{"scheme": "type_b", "sizes": [3223], "B": 10}"#).unwrap();
    assert_eq!(parsed.scheme, BootstrapScheme::TypeB);
    assert_eq!(parsed.n_datasets, 200);
    assert_eq!(parsed.scenario, ScenarioParams::reference());
}
