//! Study records: ingestion, standardization to unit-variance z-scores, and
//! eligibility filtering.

mod eligibility;
mod ingest;
mod standardize;

pub use eligibility::{
    filter_eligible, EligibilityCriteria, EligibilityReport, EligibleSets, FdpStudy,
    StandardizationFlag, StudyStatus,
};
pub use ingest::{parse_studies, parse_studies_from_reader, ParseOutcome, ParsedStudy, SCHEMA_COLUMNS, SCHEMA_VERSION};
pub use standardize::{
    adjust_pvalue, k_factor, pointbiserial_true_corr, selection_event, to_zscore, to_zscore_with,
    ZScore, DEFAULT_MIN_DF,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::IntervalSet;

/// Test reported for one arm of a study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFamily {
    Z,
    TOneSample,
    TTwoSample,
    /// `F(1, df)`; directionless, so the effect direction must be supplied.
    F1,
    Correlation,
    PartialCorrelation,
    /// Anything else (chi-square, multi-df F, ...); not univariate.
    Other(String),
}

impl TestFamily {
    pub fn parse(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "z" => TestFamily::Z,
            "t_one_sample" => TestFamily::TOneSample,
            "t_two_sample" => TestFamily::TTwoSample,
            "f1" => TestFamily::F1,
            "correlation" => TestFamily::Correlation,
            "partial_correlation" => TestFamily::PartialCorrelation,
            other => TestFamily::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            TestFamily::Z => "z",
            TestFamily::TOneSample => "t_one_sample",
            TestFamily::TTwoSample => "t_two_sample",
            TestFamily::F1 => "F1",
            TestFamily::Correlation => "correlation",
            TestFamily::PartialCorrelation => "partial_correlation",
            TestFamily::Other(s) => s,
        }
    }

    pub fn is_univariate(&self) -> bool {
        !matches!(self, TestFamily::Other(_))
    }

    fn is_correlation(&self) -> bool {
        matches!(self, TestFamily::Correlation | TestFamily::PartialCorrelation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmRole {
    Original,
    Replication,
}

/// One reported test (original or replication) before standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyArm {
    pub test_family: TestFamily,
    /// Signed where the family carries a sign (z, t, r); `F` for `F1`.
    pub statistic: f64,
    pub df: Option<f64>,
    pub n_total: Option<u32>,
    pub n_group1: Option<u32>,
    pub n_group2: Option<u32>,
    pub n_covariates: Option<u32>,
    pub reported_p: f64,
    pub sidedness: Sidedness,
    /// Explicit effect direction, `+1` or `-1`.
    pub direction: Option<i8>,
    pub k_override: Option<f64>,
}

impl StudyArm {
    /// Minimal arm for a given family; remaining design fields default to `None`.
    pub fn new(test_family: TestFamily, statistic: f64, reported_p: f64) -> Self {
        Self {
            test_family,
            statistic,
            df: None,
            n_total: None,
            n_group1: None,
            n_group2: None,
            n_covariates: None,
            reported_p,
            sidedness: Sidedness::TwoSided,
            direction: None,
            k_override: None,
        }
    }

    /// Effect direction: the explicit direction when given, else the sign of
    /// the statistic. `None` for an `F1` arm without a direction or a zero statistic.
    pub fn effect_sign(&self) -> Option<i8> {
        if let Some(d) = self.direction {
            return Some(d);
        }
        if self.test_family == TestFamily::F1 {
            return None;
        }
        if self.statistic > 0.0 {
            Some(1)
        } else if self.statistic < 0.0 {
            Some(-1)
        } else {
            None
        }
    }

    /// Statistic with the explicit direction applied (magnitude for `F1`).
    fn signed_statistic(&self) -> f64 {
        match self.direction {
            Some(d) => f64::from(d) * self.statistic.abs(),
            None => self.statistic,
        }
    }

    /// Degrees of freedom: the reported value, or `n - 2 - covariates` for correlations.
    pub fn effective_df(&self) -> Option<f64> {
        if self.df.is_some() {
            return self.df;
        }
        if self.test_family.is_correlation() {
            let n = f64::from(self.n_total?);
            return Some(n - 2.0 - f64::from(self.n_covariates.unwrap_or(0)));
        }
        None
    }

    /// One-sided p-value for an effect in direction `sign`, derived from the
    /// reported p-value and this arm's own effect direction.
    pub fn one_sided_p(&self, sign: i8) -> f64 {
        let same = self.effect_sign() == Some(sign);
        match (self.sidedness, same) {
            (Sidedness::TwoSided, true) => self.reported_p / 2.0,
            (Sidedness::TwoSided, false) => 1.0 - self.reported_p / 2.0,
            (Sidedness::OneSided, true) => self.reported_p,
            (Sidedness::OneSided, false) => 1.0 - self.reported_p,
        }
    }
}

/// A standardized original/replication pair ready for selective inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPair {
    pub study_id: String,
    pub original: StudyArm,
    pub replication: StudyArm,
    pub z_o: f64,
    pub z_r: f64,
    pub k_o: f64,
    pub k_r: f64,
    /// Sign of the original z-score, `+1` or `-1`.
    pub sign: i8,
    /// Selection event the original z-score was drawn from.
    pub selection: IntervalSet,
    pub alpha0: f64,
}

impl StudyPair {
    /// Standardizes both arms and checks that the original lies in its selection event.
    pub fn from_arms(
        study_id: impl Into<String>,
        original: StudyArm,
        replication: StudyArm,
        alpha0: f64,
        min_df: f64,
    ) -> Result<Self> {
        let o = to_zscore_with(&original, min_df)?;
        let r = to_zscore_with(&replication, min_df)?;
        let selection = selection_event(&original, alpha0)?;
        Self::from_z(study_id, original, replication, o, r, selection, alpha0)
    }

    fn from_z(
        study_id: impl Into<String>,
        original: StudyArm,
        replication: StudyArm,
        o: ZScore,
        r: ZScore,
        selection: IntervalSet,
        alpha0: f64,
    ) -> Result<Self> {
        if o.z == 0.0 {
            return Err(Error::InvalidArgument("original z-score is zero".into()));
        }
        if !selection.contains(o.z) {
            return Err(Error::InvalidArgument(format!(
                "original z-score {} lies outside its selection event",
                o.z
            )));
        }
        Ok(Self {
            study_id: study_id.into(),
            original,
            replication,
            z_o: o.z,
            z_r: r.z,
            k_o: o.k,
            k_r: r.k,
            sign: if o.z > 0.0 { 1 } else { -1 },
            selection,
            alpha0,
        })
    }

    /// Pair built directly from z-scores (simulation and tests).
    pub fn from_zscores(
        study_id: impl Into<String>,
        z_o: f64,
        z_r: f64,
        k_o: f64,
        k_r: f64,
        selection: IntervalSet,
    ) -> Result<Self> {
        if !(k_o > 0.0 && k_r > 0.0 && k_o.is_finite() && k_r.is_finite()) {
            return Err(Error::InvalidArgument("k factors must be finite and positive".into()));
        }
        let arm = |z: f64| StudyArm::new(TestFamily::Z, z, crate::special::norm_sf(z.abs()) * 2.0);
        Self::from_z(
            study_id,
            arm(z_o),
            arm(z_r),
            ZScore { z: z_o, k: k_o },
            ZScore { z: z_r, k: k_r },
            selection,
            f64::NAN,
        )
    }
}
