use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use super::{ArmRole, Sidedness, StudyArm, TestFamily};
use crate::error::{invalid, Error, Result};

/// Only schema version currently understood.
pub const SCHEMA_VERSION: &str = "1";

/// Columns of the study CSV, in canonical order.
pub const SCHEMA_COLUMNS: [&str; 13] = [
    "study_id",
    "arm",
    "test_family",
    "statistic",
    "df",
    "n_total",
    "n_group1",
    "n_group2",
    "n_covariates",
    "reported_p",
    "sidedness",
    "direction",
    "k_override",
];

const REQUIRED_COLUMNS: [&str; 5] = ["study_id", "arm", "test_family", "statistic", "reported_p"];

/// Reported p-values of exactly zero are clamped to this.
const P_FLOOR: f64 = 1e-15;

/// A study with both arms parsed (not yet standardized).
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedStudy {
    pub study_id: String,
    pub original: StudyArm,
    pub replication: StudyArm,
}

/// Row-level problems found while parsing; the studies they belong to are excluded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub studies: Vec<ParsedStudy>,
    pub rows_parsed: usize,
    pub row_errors: Vec<Error>,
    /// Study ids that had at least one malformed row or a missing/duplicate arm.
    pub malformed_studies: Vec<(String, String)>,
}

/// Parses a study CSV from `path`.
///
/// Header problems are fatal ([`Error::Schema`]); malformed rows are collected
/// in the outcome together with their line numbers.
pub fn parse_studies(path: &Path, schema_version: &str) -> Result<ParseOutcome> {
    let file = std::fs::File::open(path)?;
    parse_studies_from_reader(file, schema_version)
}

pub fn parse_studies_from_reader<R: Read>(reader: R, schema_version: &str) -> Result<ParseOutcome> {
    if schema_version != SCHEMA_VERSION {
        return Err(invalid(format!("unsupported schema version {schema_version}")));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header ({e})")))?
        .clone();
    let mut index: HashMap<&'static str, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        let col = SCHEMA_COLUMNS
            .iter()
            .find(|c| **c == h)
            .ok_or_else(|| Error::Schema(h.to_string()))?;
        if index.insert(col, i).is_some() {
            return Err(Error::Schema(format!("{h} (duplicated)")));
        }
    }
    if let Some(missing) = REQUIRED_COLUMNS.iter().find(|c| !index.contains_key(*c)) {
        return Err(Error::Schema((*missing).to_string()));
    }

    let mut out = ParseOutcome::default();
    // study id -> (original, replication), in first-appearance order
    let mut order: Vec<String> = Vec::new();
    let mut arms: HashMap<String, (Option<StudyArm>, Option<StudyArm>)> = HashMap::new();
    let mut bad: HashMap<String, String> = HashMap::new();

    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.row_errors.push(Error::Row {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != headers.len() {
            out.row_errors.push(Error::Row {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
            if let Some(id) = index.get("study_id").and_then(|&i| record.get(i)) {
                if !id.is_empty() {
                    note_bad(&mut order, &mut bad, id, "truncated row");
                }
            }
            continue;
        }
        let row = Row { record: &record, index: &index };
        let study_id = row.cell("study_id").to_string();
        if study_id.is_empty() {
            out.row_errors.push(Error::Row {
                line,
                message: "missing field study_id".into(),
            });
            continue;
        }
        match parse_row(&row) {
            Ok((role, arm)) => {
                out.rows_parsed += 1;
                if !arms.contains_key(&study_id) && !bad.contains_key(&study_id) {
                    order.push(study_id.clone());
                }
                let slot = arms.entry(study_id.clone()).or_default();
                let target = match role {
                    ArmRole::Original => &mut slot.0,
                    ArmRole::Replication => &mut slot.1,
                };
                if target.is_some() {
                    out.row_errors.push(Error::Row {
                        line,
                        message: format!("duplicate {role:?} arm for study {study_id}"),
                    });
                    note_bad(&mut order, &mut bad, &study_id, "duplicate arm");
                } else {
                    *target = Some(arm);
                }
            }
            Err(message) => {
                out.row_errors.push(Error::Row { line, message: message.clone() });
                note_bad(&mut order, &mut bad, &study_id, &message);
            }
        }
    }

    for id in order {
        if let Some(reason) = bad.get(&id) {
            out.malformed_studies.push((id, reason.clone()));
            continue;
        }
        match arms.remove(&id) {
            Some((Some(original), Some(replication))) => out.studies.push(ParsedStudy {
                study_id: id,
                original,
                replication,
            }),
            Some((o, _)) => {
                let which = if o.is_some() { "replication" } else { "original" };
                out.malformed_studies
                    .push((id, format!("missing {which} arm")));
            }
            None => {}
        }
    }
    Ok(out)
}

fn note_bad(order: &mut Vec<String>, bad: &mut HashMap<String, String>, id: &str, why: &str) {
    if !order.iter().any(|o| o == id) {
        order.push(id.to_string());
    }
    bad.entry(id.to_string()).or_insert_with(|| why.to_string());
}

fn parse_f64(cell: &str, col: &str) -> std::result::Result<Option<f64>, String> {
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("non-numeric value `{cell}` in column {col}")),
    }
}

fn parse_count(cell: &str, col: &str) -> std::result::Result<Option<u32>, String> {
    match parse_f64(cell, col)? {
        None => Ok(None),
        Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) => Ok(Some(v as u32)),
        Some(v) => Err(format!("column {col} must be a non-negative integer, got {v}")),
    }
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    index: &'a HashMap<&'static str, usize>,
}

impl<'a> Row<'a> {
    fn cell(&self, col: &str) -> &'a str {
        self.index.get(col).and_then(|&i| self.record.get(i)).unwrap_or("")
    }
}

fn parse_row(row: &Row<'_>) -> std::result::Result<(ArmRole, StudyArm), String> {
    let cell = |col: &str| row.cell(col);
    let role = match cell("arm").to_ascii_lowercase().as_str() {
        "original" => ArmRole::Original,
        "replication" => ArmRole::Replication,
        other => return Err(format!("arm must be original or replication, got `{other}`")),
    };
    let family_cell = cell("test_family");
    if family_cell.is_empty() {
        return Err("missing field test_family".into());
    }
    let test_family = TestFamily::parse(family_cell);
    let statistic = parse_f64(cell("statistic"), "statistic")?
        .ok_or_else(|| "missing field statistic".to_string())?;
    let mut reported_p = parse_f64(cell("reported_p"), "reported_p")?
        .ok_or_else(|| "missing field reported_p".to_string())?;
    if !(0.0..=1.0).contains(&reported_p) {
        return Err(format!("reported_p {reported_p} outside [0, 1]"));
    }
    if reported_p == 0.0 {
        log::warn!("reported_p = 0 clamped to {P_FLOOR}");
        reported_p = P_FLOOR;
    }
    let df = parse_f64(cell("df"), "df")?;
    if let Some(d) = df {
        if d < 1.0 {
            return Err(format!("df must be at least 1, got {d}"));
        }
    }
    let sidedness = match cell("sidedness").to_ascii_lowercase().as_str() {
        "" | "two_sided" => Sidedness::TwoSided,
        "one_sided" => Sidedness::OneSided,
        other => return Err(format!("sidedness must be one_sided or two_sided, got `{other}`")),
    };
    let direction = match cell("direction").to_ascii_lowercase().as_str() {
        "" => None,
        "+" | "+1" | "1" | "positive" => Some(1),
        "-" | "-1" | "negative" => Some(-1),
        other => return Err(format!("direction must be +1 or -1, got `{other}`")),
    };
    let k_override = parse_f64(cell("k_override"), "k_override")?;
    if let Some(k) = k_override {
        if k <= 0.0 {
            return Err(format!("k_override must be positive, got {k}"));
        }
    }
    let arm = StudyArm {
        test_family,
        statistic,
        df,
        n_total: parse_count(cell("n_total"), "n_total")?,
        n_group1: parse_count(cell("n_group1"), "n_group1")?,
        n_group2: parse_count(cell("n_group2"), "n_group2")?,
        n_covariates: parse_count(cell("n_covariates"), "n_covariates")?,
        reported_p,
        sidedness,
        direction,
        k_override,
    };
    check_required(&arm)?;
    Ok((role, arm))
}

/// Enforces the per-family required fields.
fn check_required(arm: &StudyArm) -> std::result::Result<(), String> {
    let has_k = arm.k_override.is_some();
    let mut missing: Vec<&str> = Vec::new();
    match arm.test_family {
        TestFamily::Z => {
            if arm.n_total.is_none() && !has_k {
                missing.push("n_total");
            }
        }
        TestFamily::TOneSample => {
            if arm.df.is_none() {
                missing.push("df");
            }
            if arm.n_total.is_none() && !has_k {
                missing.push("n_total");
            }
        }
        TestFamily::TTwoSample | TestFamily::F1 => {
            if arm.df.is_none() {
                missing.push("df");
            }
            if !has_k {
                if arm.n_group1.is_none() {
                    missing.push("n_group1");
                }
                if arm.n_group2.is_none() {
                    missing.push("n_group2");
                }
            }
        }
        TestFamily::Correlation => {
            if arm.n_total.is_none() {
                missing.push("n_total");
            }
        }
        TestFamily::PartialCorrelation => {
            if arm.n_total.is_none() {
                missing.push("n_total");
            }
            if arm.n_covariates.is_none() {
                missing.push("n_covariates");
            }
        }
        TestFamily::Other(_) => {}
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(format!("missing field {}", missing.join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "study_id,arm,test_family,statistic,df,n_total,n_group1,n_group2,n_covariates,reported_p,sidedness,direction,k_override\n";

    fn parse(body: &str) -> Result<ParseOutcome> {
        parse_studies_from_reader(format!("{HEADER}{body}").as_bytes(), "1")
    }

    #[test]
    fn pairs_rows_by_study() {
        let out = parse(
            "s1,original,t_two_sample,2.5,60,62,31,31,,0.015,two_sided,,\n\
             s1,replication,t_two_sample,1.1,100,102,51,51,,0.27,two_sided,,\n",
        )
        .unwrap();
        assert_eq!(out.rows_parsed, 2);
        assert_eq!(out.studies.len(), 1);
        assert!(out.row_errors.is_empty());
        assert_eq!(out.studies[0].original.n_group1, Some(31));
    }

    #[test]
    fn missing_group_size_is_a_row_error() {
        let out = parse(
            "s1,original,t_two_sample,2.5,60,62,31,,,0.015,two_sided,,\n\
             s1,replication,t_two_sample,1.1,100,102,51,51,,0.27,two_sided,,\n",
        )
        .unwrap();
        assert_eq!(out.studies.len(), 0);
        match &out.row_errors[0] {
            Error::Row { line, message } => {
                assert_eq!(*line, 2);
                assert!(message.contains("missing field n_group2"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
        assert_eq!(out.malformed_studies[0].0, "s1");
    }

    #[test]
    fn unknown_header_names_column() {
        let err = parse_studies_from_reader("study_id,arm,test_family,statistic,reported_p,bogus\n".as_bytes(), "1")
            .unwrap_err();
        assert_eq!(err, Error::Schema("bogus".into()));
        let err = parse_studies_from_reader("study_id,arm,test_family,statistic\n".as_bytes(), "1").unwrap_err();
        assert_eq!(err, Error::Schema("reported_p".into()));
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let out = parse("s1,original,z,abc,,50,,,,0.01,,,\n").unwrap();
        assert!(matches!(&out.row_errors[0], Error::Row { line: 2, message } if message.contains("non-numeric")));
    }

    #[test]
    fn truncated_row_reports_line() {
        let out = parse("s1,original,z,2.5,,50,,,,0.01,,,\ns1,replication,z\n").unwrap();
        assert!(matches!(&out.row_errors[0], Error::Row { line: 3, .. }));
        assert!(out.studies.is_empty());
    }

    #[test]
    fn zero_p_is_clamped_and_missing_arm_flagged() {
        let out = parse("s1,original,z,9.5,,50,,,,0,,,\n").unwrap();
        assert!(out.studies.is_empty());
        assert_eq!(out.malformed_studies, vec![("s1".to_string(), "missing replication arm".to_string())]);
        let out = parse("s1,original,z,9.5,,50,,,,0,,,\ns1,replication,z,1,,50,,,,0.3,,,\n").unwrap();
        assert_eq!(out.studies[0].original.reported_p, 1e-15);
    }

    #[test]
    fn schema_version_checked() {
        assert!(parse_studies_from_reader(HEADER.as_bytes(), "2").is_err());
    }
}
