use std::path::Path;

use replicate_core::decline::{decline_band, rho_grid};
use replicate_core::fdp::{replication_fdp, storey_estimate};
use replicate_core::interval::IntervalSet;
use replicate_core::selective::{ci_shift, predictive_interval, shift_pvalue, shift_test, CiOptions};
use replicate_core::study::{filter_eligible, parse_studies, EligibilityCriteria, StudyStatus, SCHEMA_VERSION};
use replicate_core::{SelectiveProblemF32, SelectiveProblemF64, TruncatedNormalF32, TruncatedNormalF64};

fn fixture() -> replicate_core::study::EligibleSets {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fixture.csv");
    let parsed = parse_studies(&path, SCHEMA_VERSION).unwrap();
    assert!(parsed.row_errors.is_empty());
    filter_eligible(&parsed, &EligibilityCriteria::default())
}

#[test]
fn fixture_classification() {
    let sets = fixture();
    let r = &sets.report;
    assert_eq!(r.total, 50);
    assert_eq!(r.rows_parsed, 100);
    assert_eq!(sets.fdp.len(), r.significant_univariate);
    assert_eq!(sets.pairs.len(), r.z_approximable);
    assert!(sets.pairs.len() <= sets.fdp.len());
    let eligible = r.statuses.iter().filter(|(_, s)| *s == StudyStatus::Eligible).count();
    assert_eq!(eligible, sets.pairs.len());
    for pair in &sets.pairs {
        assert!(pair.selection.contains(pair.z_o));
        assert_eq!(i8::from(pair.z_o > 0.0) * 2 - 1, pair.sign);
    }
}

#[test]
fn fdp_counts_are_consistent() {
    let sets = fixture();
    let p: Vec<f64> = sets.fdp.iter().map(|s| s.p_original / 0.05).collect();
    let r = storey_estimate(&p, 0.5, 0.95).unwrap();
    assert_eq!(r.r as usize, sets.fdp.len());
    assert!(r.ucb >= r.estimate);
    let rep: Vec<f64> = sets.fdp.iter().map(|s| s.p_replication).collect();
    let rr = replication_fdp(&rep, 0.5, 0.95).unwrap();
    assert!(rr.ucb >= rr.estimate);
}

#[test]
fn shift_outputs_agree() {
    let opts = CiOptions::default();
    for pair in &fixture().pairs {
        let p = shift_pvalue(pair, 0.0, true).unwrap();
        let ci = ci_shift(pair, 0.95, true, &opts).unwrap();
        let pi = predictive_interval(pair, 0.95, true).unwrap();
        // test/interval duality at delta = 0, away from the boundary
        if (p - 0.05).abs() > 1e-6 {
            assert_eq!(p > 0.05, ci.contains(0.0), "{}", pair.study_id);
            if !pi.flags.not_connected {
                assert_eq!(p > 0.05, pi.contains(pair.z_r), "{}", pair.study_id);
            }
        }
    }
}

#[test]
fn decline_band_on_fixture() {
    let sets = fixture();
    let band = decline_band(&sets.pairs, &rho_grid(0.0, 1.0, 0.05).unwrap(), 0.5, 0.95).unwrap();
    assert_eq!(band.points.len(), 21);
    assert_eq!(band.m as usize, sets.pairs.len());
    for p in &band.points {
        assert!(p.ci_lo <= p.under + 1e-12 && p.over <= p.ci_hi + 1e-12);
    }
}

#[test]
fn f32_kernel_tracks_f64() {
    let t64 = TruncatedNormalF64::new(0.3, 1.2, IntervalSet::two_sided(1.96)).unwrap();
    let t32 = TruncatedNormalF32::new(0.3, 1.2, IntervalSet::two_sided(1.96f32)).unwrap();
    for x in [-3.0, -2.0, 2.5, 4.0] {
        assert!((t64.cdf(x) - f64::from(t32.cdf(x as f32))).abs() < 1e-5);
    }
    let p64 = SelectiveProblemF64::new(2.4, 0.7, 3.0, 4.0, IntervalSet::two_sided(1.96)).unwrap();
    let p32 = SelectiveProblemF32::new(2.4, 0.7, 3.0, 4.0, IntervalSet::two_sided(1.96f32)).unwrap();
    let a = shift_test(&p64, 0.0).unwrap().p;
    let b = shift_test(&p32, 0.0).unwrap().p;
    assert!((a - f64::from(b)).abs() < 1e-4, "{a} {b}");
}
