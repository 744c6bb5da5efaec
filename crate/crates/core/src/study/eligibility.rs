use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ingest::ParseOutcome;
use super::{selection_event, to_zscore_with, ArmRole, Sidedness, StudyArm, StudyPair, TestFamily};
use super::standardize::DEFAULT_MIN_DF;
use crate::special::norm_sf;

/// Flag raised when the z-implied p-value differs from the reported one by more than this.
const CONSISTENCY_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EligibilityCriteria {
    /// Significance threshold the original must have met (strictly).
    pub alpha0: f64,
    /// Minimum df for treating t / F statistics as z-scores.
    pub min_df: f64,
}

impl Default for EligibilityCriteria {
    fn default() -> Self {
        Self {
            alpha0: 0.05,
            min_df: DEFAULT_MIN_DF,
        }
    }
}

/// Where a study ended up. Exactly one status per study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum StudyStatus {
    Malformed(String),
    NonUnivariate,
    MissingDirection,
    NotSignificant,
    /// Usable for FDP analysis but not for selective inference.
    NotZApproximable(String),
    /// Usable for FDP analysis, but the standardized original lies outside its
    /// selection event.
    OutsideSelection,
    Eligible,
}

impl StudyStatus {
    pub fn code(&self) -> &'static str {
        match self {
            StudyStatus::Malformed(_) => "malformed",
            StudyStatus::NonUnivariate => "non_univariate",
            StudyStatus::MissingDirection => "missing_direction",
            StudyStatus::NotSignificant => "not_significant",
            StudyStatus::NotZApproximable(_) => "not_z_approximable",
            StudyStatus::OutsideSelection => "outside_selection",
            StudyStatus::Eligible => "eligible",
        }
    }

    fn in_fdp_set(&self) -> bool {
        matches!(
            self,
            StudyStatus::NotZApproximable(_) | StudyStatus::OutsideSelection | StudyStatus::Eligible
        )
    }
}

/// Reported and z-implied p-values disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationFlag {
    pub study_id: String,
    pub arm: ArmRole,
    pub reported_p: f64,
    pub implied_p: f64,
}

/// Study significant with a univariate test, as used for FDP analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpStudy {
    pub study_id: String,
    /// Original p-value as reported.
    pub p_original: f64,
    /// Direction of the original effect.
    pub sign: i8,
    /// One-sided replication p-value in the original direction.
    pub p_replication: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EligibilityReport {
    pub total: usize,
    pub rows_parsed: usize,
    pub row_errors: Vec<String>,
    pub significant_univariate: usize,
    pub z_approximable: usize,
    pub statuses: Vec<(String, StudyStatus)>,
    pub flags: Vec<StandardizationFlag>,
}

impl EligibilityReport {
    /// Number of studies per status code.
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for (_, s) in &self.statuses {
            *m.entry(s.code()).or_insert(0) += 1;
        }
        m
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EligibleSets {
    /// Significant originals with univariate tests.
    pub fdp: Vec<FdpStudy>,
    /// The subset that also standardizes to z-scores.
    pub pairs: Vec<StudyPair>,
    pub report: EligibilityReport,
}

fn implied_p(arm: &StudyArm, z: f64) -> f64 {
    match arm.sidedness {
        Sidedness::TwoSided => 2.0 * norm_sf(z.abs()),
        Sidedness::OneSided => norm_sf(z.abs()),
    }
}

fn classify(
    original: &StudyArm,
    replication: &StudyArm,
    criteria: &EligibilityCriteria,
) -> StudyStatus {
    if !original.test_family.is_univariate() || !replication.test_family.is_univariate() {
        return StudyStatus::NonUnivariate;
    }
    let undirected = |a: &StudyArm| a.test_family == TestFamily::F1 && a.direction.is_none();
    if undirected(original) || undirected(replication) {
        return StudyStatus::MissingDirection;
    }
    if !(original.reported_p < criteria.alpha0) || original.effect_sign().is_none() {
        return StudyStatus::NotSignificant;
    }
    StudyStatus::Eligible
}

/// Splits parsed studies into the FDP set and the selective-inference set.
pub fn filter_eligible(parsed: &ParseOutcome, criteria: &EligibilityCriteria) -> EligibleSets {
    let mut out = EligibleSets::default();
    let report = &mut out.report;
    report.total = parsed.studies.len() + parsed.malformed_studies.len();
    report.rows_parsed = parsed.rows_parsed;
    report.row_errors = parsed.row_errors.iter().map(|e| e.to_string()).collect();
    for (id, why) in &parsed.malformed_studies {
        report.statuses.push((id.clone(), StudyStatus::Malformed(why.clone())));
    }

    for study in &parsed.studies {
        let (o, r) = (&study.original, &study.replication);
        let mut status = classify(o, r, criteria);
        if status == StudyStatus::Eligible {
            let zs = to_zscore_with(o, criteria.min_df).and_then(|zo| {
                let zr = to_zscore_with(r, criteria.min_df)?;
                Ok((zo, zr, selection_event(o, criteria.alpha0)?))
            });
            match zs {
                Err(e) => status = StudyStatus::NotZApproximable(e.to_string()),
                Ok((zo, zr, sel)) => {
                    for (role, arm, z) in [(ArmRole::Original, o, zo.z), (ArmRole::Replication, r, zr.z)] {
                        let implied = implied_p(arm, z);
                        if (implied - arm.reported_p).abs() > CONSISTENCY_TOLERANCE * arm.reported_p {
                            report.flags.push(StandardizationFlag {
                                study_id: study.study_id.clone(),
                                arm: role,
                                reported_p: arm.reported_p,
                                implied_p: implied,
                            });
                        }
                    }
                    match StudyPair::from_z(
                        study.study_id.clone(),
                        o.clone(),
                        r.clone(),
                        zo,
                        zr,
                        sel,
                        criteria.alpha0,
                    ) {
                        Ok(pair) => out.pairs.push(pair),
                        Err(_) => status = StudyStatus::OutsideSelection,
                    }
                }
            }
        }
        if status.in_fdp_set() {
            let sign = o.effect_sign().expect("significant original has a direction");
            out.fdp.push(FdpStudy {
                study_id: study.study_id.clone(),
                p_original: o.reported_p,
                sign,
                p_replication: r.one_sided_p(sign),
            });
        }
        report.statuses.push((study.study_id.clone(), status));
    }
    report.significant_univariate = out.fdp.len();
    report.z_approximable = out.pairs.len();
    out
}
