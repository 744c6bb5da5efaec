use serde::{Deserialize, Serialize};

use super::{Sidedness, StudyArm, TestFamily};
use crate::error::{invalid, Error, Result};
use crate::interval::IntervalSet;
use crate::special::norm_isf;

/// t and F statistics below this many degrees of freedom are not treated as z-scores.
pub const DEFAULT_MIN_DF: f64 = 30.0;

/// Unit-variance z-score `Z ~ N(k theta, 1)` and its design factor `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub z: f64,
    pub k: f64,
}

fn need<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| invalid(format!("missing field {field}")))
}

fn correlation_scale(arm: &StudyArm) -> Result<f64> {
    let n = f64::from(need(arm.n_total, "n_total")?);
    let p = f64::from(arm.n_covariates.unwrap_or(0));
    let m = n - 3.0 - p;
    if m <= 0.0 {
        return Err(invalid(format!("n - 3 - covariates = {m} must be positive")));
    }
    Ok(m.sqrt())
}

/// Design constant linking the effect size to the z-score mean.
pub fn k_factor(arm: &StudyArm) -> Result<f64> {
    if let Some(k) = arm.k_override {
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid(format!("k_override must be positive, got {k}")));
        }
        return Ok(k);
    }
    match &arm.test_family {
        TestFamily::Z | TestFamily::TOneSample => {
            Ok(f64::from(need(arm.n_total, "n_total")?).sqrt())
        }
        TestFamily::TTwoSample | TestFamily::F1 => {
            let n1 = f64::from(need(arm.n_group1, "n_group1")?);
            let n2 = f64::from(need(arm.n_group2, "n_group2")?);
            if n1 <= 0.0 || n2 <= 0.0 {
                return Err(invalid("group sizes must be positive"));
            }
            Ok((n1 * n2 / (n1 + n2)).sqrt())
        }
        TestFamily::Correlation | TestFamily::PartialCorrelation => correlation_scale(arm),
        TestFamily::Other(name) => Err(invalid(format!("no k factor for test family {name}"))),
    }
}

/// Converts an arm to its approximate z-score using the default df threshold.
pub fn to_zscore(arm: &StudyArm) -> Result<ZScore> {
    to_zscore_with(arm, DEFAULT_MIN_DF)
}

/// Converts an arm to its approximate z-score.
///
/// t statistics are taken as z directly, `F(1, .)` becomes `sign * sqrt(F)`,
/// and correlations go through the Fisher transformation
/// `sqrt(n - 3 - p) atanh(r)`.
pub fn to_zscore_with(arm: &StudyArm, min_df: f64) -> Result<ZScore> {
    let check_df = |df: Option<f64>| -> Result<()> {
        let df = df.ok_or_else(|| invalid("missing field df"))?;
        if df < min_df {
            return Err(Error::NotZApproximable(format!("df {df} < {min_df}")));
        }
        Ok(())
    };
    let z = match &arm.test_family {
        TestFamily::Other(name) => {
            return Err(Error::NotZApproximable(format!("test family {name} is not univariate")))
        }
        TestFamily::Z => arm.signed_statistic(),
        TestFamily::TOneSample | TestFamily::TTwoSample => {
            check_df(arm.df)?;
            arm.signed_statistic()
        }
        TestFamily::F1 => {
            check_df(arm.df)?;
            let d = arm
                .direction
                .ok_or_else(|| invalid("F1 statistic needs an explicit direction"))?;
            if arm.statistic < 0.0 {
                return Err(invalid("F statistic must be non-negative"));
            }
            f64::from(d) * arm.statistic.sqrt()
        }
        TestFamily::Correlation | TestFamily::PartialCorrelation => {
            let r = arm.signed_statistic();
            if !(r.abs() < 1.0) {
                return Err(invalid(format!("correlation {r} must lie in (-1, 1)")));
            }
            check_df(arm.effective_df())?;
            correlation_scale(arm)? * r.atanh()
        }
    };
    Ok(ZScore { z, k: k_factor(arm)? })
}

/// Selection-adjusted p-value `p / alpha0`.
pub fn adjust_pvalue(p: f64, alpha0: f64) -> Result<f64> {
    if !(alpha0 > 0.0 && alpha0 <= 1.0) {
        return Err(invalid(format!("alpha0 must lie in (0, 1], got {alpha0}")));
    }
    if !(p > 0.0) {
        return Err(invalid(format!("p-value must be positive, got {p}")));
    }
    if p >= alpha0 {
        return Err(Error::NotSelected { p, alpha0 });
    }
    Ok(p / alpha0)
}

/// Region of z-scores significant at level `alpha0` for this arm's test.
pub fn selection_event(arm: &StudyArm, alpha0: f64) -> Result<IntervalSet> {
    if !(alpha0 > 0.0) {
        return Err(invalid(format!("alpha0 must be positive, got {alpha0}")));
    }
    if alpha0 >= 1.0 {
        return Ok(IntervalSet::full());
    }
    match arm.sidedness {
        Sidedness::TwoSided => Ok(IntervalSet::two_sided(norm_isf(alpha0 / 2.0))),
        Sidedness::OneSided => {
            let c = norm_isf(alpha0);
            match arm.effect_sign() {
                Some(-1) => Ok(IntervalSet::below(-c)),
                Some(_) => Ok(IntervalSet::above(c)),
                None => Err(invalid("one-sided selection needs an effect direction")),
            }
        }
    }
}

/// True point-biserial correlation of a two-group design with standardized
/// mean difference `d` and the given group sizes.
pub fn pointbiserial_true_corr(d: f64, n_treat: u32, n_ctrl: u32) -> Result<f64> {
    if n_treat == 0 || n_ctrl == 0 {
        return Err(invalid("group sizes must be positive"));
    }
    let p = f64::from(n_treat) / (f64::from(n_treat) + f64::from(n_ctrl));
    let pq = p * (1.0 - p);
    Ok(d * pq.sqrt() / (1.0 + d * d * pq).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corr(r: f64, n: u32) -> StudyArm {
        let mut a = StudyArm::new(TestFamily::Correlation, r, 0.01);
        a.n_total = Some(n);
        a
    }

    #[test]
    fn fisher_examples() {
        assert_eq!(to_zscore(&corr(0.0, 50)).unwrap().z, 0.0);
        let z = to_zscore(&corr(0.5, 103)).unwrap();
        assert!((z.z - 5.493_061_443_340_548).abs() < 1e-12);
        assert_eq!(z.k, 10.0);
        assert!(to_zscore(&corr(1.0, 103)).is_err());
        let mut partial = corr(0.5, 105);
        partial.test_family = TestFamily::PartialCorrelation;
        partial.n_covariates = Some(2);
        assert_eq!(to_zscore(&partial).unwrap().k, 10.0);
    }

    #[test]
    fn low_df_t_is_rejected() {
        let mut a = StudyArm::new(TestFamily::TTwoSample, 2.5, 0.02);
        a.df = Some(20.0);
        a.n_group1 = Some(11);
        a.n_group2 = Some(11);
        assert!(matches!(to_zscore(&a), Err(Error::NotZApproximable(_))));
        assert!(to_zscore_with(&a, 20.0).is_ok());
    }

    #[test]
    fn f1_uses_direction() {
        let mut a = StudyArm::new(TestFamily::F1, 9.0, 0.004);
        a.df = Some(60.0);
        a.n_group1 = Some(31);
        a.n_group2 = Some(31);
        assert!(to_zscore(&a).is_err());
        a.direction = Some(-1);
        assert_eq!(to_zscore(&a).unwrap().z, -3.0);
    }

    #[test]
    fn k_examples() {
        let mut one = StudyArm::new(TestFamily::TOneSample, 3.0, 0.01);
        one.n_total = Some(25);
        assert_eq!(k_factor(&one).unwrap(), 5.0);
        let mut two = StudyArm::new(TestFamily::TTwoSample, 3.0, 0.01);
        two.n_group1 = Some(50);
        two.n_group2 = Some(50);
        assert_eq!(k_factor(&two).unwrap(), 5.0);
        two.k_override = Some(3.7);
        assert_eq!(k_factor(&two).unwrap(), 3.7);
        let bare = StudyArm::new(TestFamily::TTwoSample, 3.0, 0.01);
        assert!(k_factor(&bare).is_err());
    }

    #[test]
    fn adjust_examples() {
        assert!((adjust_pvalue(0.04, 0.05).unwrap() - 0.8).abs() < 1e-15);
        assert!((adjust_pvalue(0.025, 0.05).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(adjust_pvalue(0.05, 0.05), Err(Error::NotSelected { .. })));
    }

    #[test]
    fn selection_examples() {
        let two = StudyArm::new(TestFamily::Z, 2.5, 0.01);
        let s = selection_event(&two, 0.05).unwrap();
        assert_eq!(s.intervals().len(), 2);
        assert!((s.intervals()[1].0 - 1.959_963_984_540_054).abs() < 1e-14);
        let mut one = two.clone();
        one.sidedness = Sidedness::OneSided;
        let s = selection_event(&one, 0.05).unwrap();
        assert!((s.intervals()[0].0 - 1.644_853_626_951_472_7).abs() < 1e-14);
        one.statistic = -2.5;
        assert_eq!(selection_event(&one, 0.05).unwrap().intervals()[0].0, f64::NEG_INFINITY);
        assert!(selection_event(&two, 1.0).unwrap().is_full());
    }

    #[test]
    fn pointbiserial_examples() {
        let a = pointbiserial_true_corr(1.0, 40, 37).unwrap();
        assert!((a - 0.447).abs() < 1e-3, "{a}");
        let b = pointbiserial_true_corr(1.0, 1370, 120).unwrap();
        assert!((b - 0.263).abs() < 1e-3, "{b}");
        assert_eq!(pointbiserial_true_corr(0.0, 5, 9).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn two_sample_k_symmetric(n1 in 1u32..500, n2 in 1u32..500) {
            let mk = |a, b| {
                let mut arm = StudyArm::new(TestFamily::TTwoSample, 1.0, 0.5);
                arm.n_group1 = Some(a);
                arm.n_group2 = Some(b);
                k_factor(&arm).unwrap()
            };
            prop_assert!((mk(n1, n2) - mk(n2, n1)).abs() < 1e-12);
            prop_assert!(mk(n1, n2) > 0.0);
        }

        #[test]
        fn pointbiserial_odd_and_degenerate(d in -3.0..3.0f64, a in 1u32..1000, b in 1u32..1000) {
            let r = pointbiserial_true_corr(d, a, b).unwrap();
            prop_assert!((r + pointbiserial_true_corr(-d, a, b).unwrap()).abs() < 1e-15);
            prop_assert!(pointbiserial_true_corr(d, 1_000_000, 1).unwrap().abs() < 0.01 * (1.0 + d.abs()));
        }
    }
}
