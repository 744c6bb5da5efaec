use std::path::Path;

use serde::Serialize;

use replicate_core::decline::{decline_band, rho_grid, DeclineBand};
use replicate_core::fdp::{external_estimate, replication_fdp, storey_estimate, FdpResult};
use replicate_core::multiplicity::{bh, holm, MultiplicityDecision, Procedure};
use replicate_core::output::{csv_string, format_float, percent};
use replicate_core::selective::{
    ci_shift, predictive_interval, shift_test, CiOptions, IntervalEstimate, IntervalFlags,
    SelectiveProblem,
};
use replicate_core::sim::{
    example1_curves, harness_coverage, harness_decline_band, harness_fdp, harness_selective_level,
    CoverageConfig, CoveragePoint, Curve, DeclineBandCoverage, FdpHarnessConfig, FdpHarnessReport,
    LevelConfig, LevelPoint, SelectiveTest, SimConfig,
};
use replicate_core::study::{
    filter_eligible, parse_studies_from_reader, EligibilityCriteria, EligibilityReport, EligibleSets,
};

use crate::args::{
    Cli, Command, DeclineArgs, FdpArgs, Format, Method, ScenarioArg, Selection, ShiftArgs,
    SimulateArgs, Source,
};
use crate::error::CliError;
use crate::manifest::sha256_hex;

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Table or document in the requested format.
    pub body: String,
    /// Human-readable lines for stderr.
    pub summary: Vec<String>,
    pub input_digest: Option<String>,
    pub exit_code: i32,
}

impl Report {
    fn ok(body: String, summary: Vec<String>, input_digest: Option<String>) -> Self {
        Self { body, summary, input_digest, exit_code: 0 }
    }
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Validate(a) => validate(cli, a),
        Command::Fdp(a) => fdp(cli, a),
        Command::Shift(a) => shift(cli, a),
        Command::Decline(a) => decline(cli, a),
        Command::Simulate(a) => simulate(cli, a),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

struct Loaded {
    sets: EligibleSets,
    digest: String,
}

fn criteria(sel: &Selection) -> EligibilityCriteria {
    EligibilityCriteria { alpha0: sel.alpha0, min_df: sel.min_df }
}

fn read_input(cli: &Cli, sel: &Selection) -> Result<Loaded, CliError> {
    let path = cli
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let parsed = parse_studies_from_reader(&bytes[..], &sel.schema_version)?;
    let sets = filter_eligible(&parsed, &criteria(sel));
    Ok(Loaded { sets, digest: sha256_hex(&bytes) })
}

/// Input for the analysis commands: row errors are fatal.
fn load(cli: &Cli, sel: &Selection) -> Result<Loaded, CliError> {
    let loaded = read_input(cli, sel)?;
    let errs = &loaded.sets.report.row_errors;
    if let Some(first) = errs.first() {
        for e in errs {
            log::error!("{e}");
        }
        return Err(CliError::Input(format!("{} row error(s), first: {first}", errs.len())));
    }
    Ok(loaded)
}

fn validate(cli: &Cli, sel: &Selection) -> Result<Report, CliError> {
    let Loaded { sets, digest } = read_input(cli, sel)?;
    let rep = &sets.report;
    for e in &rep.row_errors {
        log::error!("{e}");
    }
    if !rep.flags.is_empty() {
        log::warn!(
            "{} arm(s) with reported p more than 10% away from the z-implied p (listed in the json report)",
            rep.flags.len()
        );
    }
    let body = match cli.format {
        Format::Json => to_json(rep)?,
        Format::Csv => csv_string(&["metric", "value"], validation_counts(rep)),
    };
    let exit_code = if !rep.row_errors.is_empty() {
        2
    } else if sets.fdp.is_empty() {
        3
    } else {
        0
    };
    let summary = vec![format!(
        "{} studies, {} rows parsed, {} row errors; {} significant univariate, {} z-approximable",
        rep.total,
        rep.rows_parsed,
        rep.row_errors.len(),
        rep.significant_univariate,
        rep.z_approximable
    )];
    Ok(Report { body, summary, input_digest: Some(digest), exit_code })
}

fn validation_counts(rep: &EligibilityReport) -> Vec<Vec<String>> {
    let mut rows = vec![
        vec!["total".into(), rep.total.to_string()],
        vec!["rows_parsed".into(), rep.rows_parsed.to_string()],
        vec!["row_errors".into(), rep.row_errors.len().to_string()],
        vec!["significant_univariate".into(), rep.significant_univariate.to_string()],
        vec!["z_approximable".into(), rep.z_approximable.to_string()],
        vec!["standardization_flags".into(), rep.flags.len().to_string()],
    ];
    for (code, n) in rep.counts() {
        rows.push(vec![format!("status:{code}"), n.to_string()]);
    }
    rows
}

#[derive(Debug, Clone, Serialize)]
struct FdpRow {
    source: Source,
    #[serde(flatten)]
    result: FdpResult,
}

fn fdp_one(a: &FdpArgs, sets: &EligibleSets, alpha: f64) -> Result<FdpResult, CliError> {
    let alpha0 = a.selection.alpha0;
    let studies = &sets.fdp;
    let mut res = match a.source {
        Source::Replication => {
            let p: Vec<f64> = studies.iter().filter(|s| s.p_original < alpha).map(|s| s.p_replication).collect();
            replication_fdp(&p, a.lambda, a.confidence)?
        }
        Source::Original => {
            let method = a.method.unwrap_or(if alpha >= alpha0 { Method::Internal } else { Method::External });
            match method {
                Method::Internal => {
                    let cut = alpha.min(alpha0);
                    let p: Vec<f64> = studies.iter().filter(|s| s.p_original < cut).map(|s| s.p_original / cut).collect();
                    storey_estimate(&p, a.lambda, a.confidence)?
                }
                Method::External => {
                    if alpha >= a.lambda * alpha0 {
                        return Err(CliError::Usage(format!(
                            "--method external needs alpha < lambda * alpha0 = {}",
                            a.lambda * alpha0
                        )));
                    }
                    let p: Vec<f64> = studies.iter().map(|s| s.p_original / alpha0).collect();
                    return Ok(external_estimate(&p, alpha, alpha0, a.lambda, a.confidence)?);
                }
            }
        }
    };
    res.alpha0 = alpha0;
    res.alpha = alpha;
    Ok(res)
}

fn fdp(cli: &Cli, a: &FdpArgs) -> Result<Report, CliError> {
    let Loaded { sets, digest } = load(cli, &a.selection)?;
    if sets.fdp.is_empty() {
        return Err(CliError::EmptyEligible);
    }
    let rows = a
        .alpha
        .iter()
        .map(|&alpha| Ok(FdpRow { source: a.source, result: fdp_one(a, &sets, alpha)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let summary = rows
        .iter()
        .map(|r| format!("{:?} {} alpha={}: {}", r.source, r.result.method.as_str(), r.result.alpha, r.result.summary()))
        .collect();
    let body = match cli.format {
        Format::Json => to_json(&rows)?,
        Format::Csv => {
            let mut header = vec!["source"];
            header.extend(FdpResult::CSV_HEADER);
            csv_string(
                &header,
                rows.iter().map(|r| {
                    let mut row = vec![source_str(r.source).to_string()];
                    row.extend(r.result.csv_row());
                    row
                }),
            )
        }
    };
    Ok(Report::ok(body, summary, Some(digest)))
}

fn source_str(s: Source) -> &'static str {
    match s {
        Source::Original => "original",
        Source::Replication => "replication",
    }
}

/// `bh:0.10` or `holm:0.05`.
pub fn parse_multiplicity(spec: &str) -> Result<(Procedure, f64), CliError> {
    let bad = || CliError::Usage(format!("multiplicity must look like bh:0.10 or holm:0.05, got `{spec}`"));
    let (name, level) = spec.trim().split_once(':').ok_or_else(bad)?;
    let proc = match name.to_ascii_lowercase().as_str() {
        "bh" => Procedure::Bh,
        "holm" => Procedure::Holm,
        _ => return Err(bad()),
    };
    let level: f64 = level.parse().map_err(|_| bad())?;
    Ok((proc, level))
}

#[derive(Debug, Clone, Serialize)]
struct ShiftRow {
    study_id: String,
    z_o: f64,
    z_r: f64,
    k_o: f64,
    k_r: f64,
    p_adjusted: f64,
    p_unadjusted: f64,
    saturated: bool,
    rejected: bool,
    ci: IntervalEstimate,
    predictive: IntervalEstimate,
    flagged_by: Vec<String>,
}

fn flag_string(f: &IntervalFlags) -> String {
    let names = [
        (f.saturated, "saturated"),
        (f.unbounded, "unbounded"),
        (f.not_connected, "not_connected"),
        (f.non_monotone, "non_monotone"),
    ];
    names.iter().filter(|(on, _)| *on).map(|(_, n)| *n).collect::<Vec<_>>().join("|")
}

fn shift(cli: &Cli, a: &ShiftArgs) -> Result<Report, CliError> {
    let specs = a
        .multiplicity
        .iter()
        .map(|s| Ok((s.trim().to_string(), parse_multiplicity(s)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let Loaded { sets, digest } = load(cli, &a.selection)?;
    if sets.pairs.is_empty() {
        return Err(CliError::EmptyEligible);
    }
    let adjusted = !a.unadjusted;
    let alpha = 1.0 - a.level;
    let opts = CiOptions { check_monotone: a.check_monotone, ..CiOptions::default() };
    let mut rows = Vec::with_capacity(sets.pairs.len());
    for pair in &sets.pairs {
        let adj = shift_test(&SelectiveProblem::from_pair(pair, true)?, 0.0)?;
        let unadj = shift_test(&SelectiveProblem::from_pair(pair, false)?, 0.0)?;
        let p = if adjusted { adj.p } else { unadj.p };
        rows.push(ShiftRow {
            study_id: pair.study_id.clone(),
            z_o: pair.z_o,
            z_r: pair.z_r,
            k_o: pair.k_o,
            k_r: pair.k_r,
            p_adjusted: adj.p,
            p_unadjusted: unadj.p,
            saturated: adj.saturated,
            rejected: p <= alpha,
            ci: ci_shift(pair, a.level, adjusted, &opts)?,
            predictive: predictive_interval(pair, a.level, adjusted)?,
            flagged_by: Vec::new(),
        });
    }
    let named: Vec<(String, f64)> = rows
        .iter()
        .map(|r| (r.study_id.clone(), if adjusted { r.p_adjusted } else { r.p_unadjusted }))
        .collect();
    let mut decisions: Vec<(String, MultiplicityDecision)> = Vec::new();
    for (label, (proc, level)) in &specs {
        let d = match proc {
            Procedure::Bh => bh(&named, *level)?,
            Procedure::Holm => holm(&named, *level)?,
        };
        for r in rows.iter_mut().filter(|r| d.is_rejected(&r.study_id)) {
            r.flagged_by.push(label.clone());
        }
        decisions.push((label.clone(), d));
    }

    let m = rows.len();
    let count = |f: &dyn Fn(&ShiftRow) -> bool| rows.iter().filter(|r| f(r)).count();
    let n_adj = count(&|r| r.p_adjusted <= alpha);
    let n_unadj = count(&|r| r.p_unadjusted <= alpha);
    let mut summary = vec![
        format!("adjusted rejections at {alpha:.3}: {n_adj} / {m} = {}%", percent(n_adj as f64 / m as f64)),
        format!("unadjusted rejections at {alpha:.3}: {n_unadj} / {m} = {}%", percent(n_unadj as f64 / m as f64)),
    ];
    for (label, d) in &decisions {
        summary.push(format!("{label}: {} flagged [{}]", d.rejected_ids.len(), d.rejected_ids.join(", ")));
    }

    let body = match cli.format {
        Format::Json => to_json(&rows)?,
        Format::Csv => {
            let mut header: Vec<&str> = vec![
                "study_id", "z_o", "z_r", "k_o", "k_r", "p_adjusted", "p_unadjusted", "saturated", "rejected",
                "ci_lo", "ci_hi", "ci_flags", "pi_lo", "pi_hi", "pi_flags",
            ];
            header.extend(specs.iter().map(|(l, _)| l.as_str()));
            csv_string(
                &header,
                rows.iter().map(|r| {
                    let mut row = vec![
                        r.study_id.clone(),
                        format_float(r.z_o),
                        format_float(r.z_r),
                        format_float(r.k_o),
                        format_float(r.k_r),
                        format_float(r.p_adjusted),
                        format_float(r.p_unadjusted),
                        r.saturated.to_string(),
                        r.rejected.to_string(),
                        format_float(r.ci.lo),
                        format_float(r.ci.hi),
                        flag_string(&r.ci.flags),
                        format_float(r.predictive.lo),
                        format_float(r.predictive.hi),
                        flag_string(&r.predictive.flags),
                    ];
                    row.extend(specs.iter().map(|(l, _)| r.flagged_by.contains(l).to_string()));
                    row
                }),
            )
        }
    };
    Ok(Report::ok(body, summary, Some(digest)))
}

/// `start:end:step`.
pub fn parse_range(s: &str) -> Result<(f64, f64, f64), CliError> {
    let bad = || CliError::Usage(format!("expected start:end:step, got `{s}`"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, step] if a.is_finite() && b.is_finite() && a <= b && step > 0.0 => Ok((a, b, step)),
        _ => Err(bad()),
    }
}

fn decline(cli: &Cli, a: &DeclineArgs) -> Result<Report, CliError> {
    let (start, end, step) = parse_range(&a.rho_grid)?;
    let grid = rho_grid(start, end, step).map_err(|e| CliError::Usage(e.to_string()))?;
    let Loaded { sets, digest } = load(cli, &a.selection)?;
    if sets.pairs.is_empty() {
        return Err(CliError::EmptyEligible);
    }
    let band: DeclineBand = decline_band(&sets.pairs, &grid, a.lambda, a.confidence)?;
    let summary: Vec<String> = band
        .points
        .iter()
        .map(|p| {
            format!(
                "rho {:.2}: under {}%, over {}%, band ({}%, {}%)",
                p.rho,
                percent(p.under),
                percent(p.over),
                percent(p.ci_lo),
                percent(p.ci_hi)
            )
        })
        .collect();
    let body = match cli.format {
        Format::Json => to_json(&band)?,
        Format::Csv => csv_string(&DeclineBand::CSV_HEADER, band.csv_rows()),
    };
    Ok(Report::ok(body, summary, Some(digest)))
}

/// Harness results of the validation scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub fdp: Vec<FdpHarnessReport>,
    pub level: Vec<LevelPoint>,
    pub coverage: Vec<CoveragePoint>,
    pub decline_band: Vec<DeclineBandCoverage>,
    pub checks: Vec<Check>,
}

/// One pass/fail line of the validation scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub harness: &'static str,
    pub setting: String,
    pub metric: &'static str,
    pub value: f64,
    pub target: f64,
    pub se: f64,
    pub pass: bool,
}

impl Check {
    const CSV_HEADER: [&'static str; 7] = ["harness", "setting", "metric", "value", "target", "se", "pass"];

    fn row(&self) -> Vec<String> {
        vec![
            self.harness.into(),
            self.setting.clone(),
            self.metric.into(),
            format_float(self.value),
            format_float(self.target),
            format_float(self.se),
            self.pass.to_string(),
        ]
    }
}

pub fn run_validation(trials: u64, seed: u64) -> Result<ValidationReport, CliError> {
    let mut checks = Vec::new();
    let mut fdp = Vec::new();
    for frac in [0.0, 0.3, 1.0] {
        let cfg = FdpHarnessConfig { null_fraction: frac, n_trials: trials, seed, ..Default::default() };
        let rep = harness_fdp(&cfg)?;
        for (name, s) in [("internal", &rep.internal), ("external", &rep.external)] {
            let setting = format!("{name} null_fraction={frac}");
            checks.push(Check {
                harness: "fdp",
                setting: setting.clone(),
                metric: "mean_estimate_minus_truth",
                value: s.mean_estimate - s.mean_truth,
                target: -2.0 * s.se_difference,
                se: s.se_difference,
                pass: s.conservative,
            });
            checks.push(Check {
                harness: "fdp",
                setting,
                metric: "ucb_coverage",
                value: s.coverage,
                target: cfg.confidence,
                se: s.coverage_se,
                pass: s.covers,
            });
        }
        fdp.push(rep);
    }

    let level_cfg = LevelConfig { n_trials: trials, seed, ..Default::default() };
    let level = harness_selective_level(&level_cfg)?;
    for p in &level {
        let name = match p.test {
            SelectiveTest::Shift => "shift",
            SelectiveTest::DeclineBoundary => "decline_boundary",
            SelectiveTest::DeclineInterior => "decline_interior",
        };
        checks.push(Check {
            harness: "level",
            setting: format!("{name} theta={} k={}", p.theta, p.k),
            metric: "rejection_rate",
            value: p.rate,
            target: level_cfg.nominal,
            se: p.se,
            pass: (p.rate - level_cfg.nominal).abs() <= 0.005,
        });
    }

    let cov_cfg = CoverageConfig { n_trials: trials, seed, ..Default::default() };
    let coverage = harness_coverage(&cov_cfg)?;
    let se = replicate_core::sim::binomial_se(cov_cfg.level, trials);
    for p in &coverage {
        let setting = format!("theta_o={} theta_r={} k_o={} k_r={}", p.theta_o, p.theta_r, p.k_o, p.k_r);
        let mut push = |metric, value: f64| {
            checks.push(Check {
                harness: "coverage",
                setting: setting.clone(),
                metric,
                value,
                target: cov_cfg.level,
                se,
                pass: (value - cov_cfg.level).abs() <= 0.01,
            })
        };
        push("ci_shift", p.ci_coverage);
        if let Some(pi) = p.pi_coverage {
            push("predictive", pi);
        }
    }

    let decline_band = harness_decline_band(46, 3.0, &[0.0, 0.25, 0.5, 0.75], 0.5, 0.95, (trials / 10).max(1), seed)?;
    for p in &decline_band {
        checks.push(Check {
            harness: "decline_band",
            setting: format!("rho={}", p.rho),
            metric: "band_coverage",
            value: p.coverage,
            target: 0.9,
            se: p.se,
            pass: p.coverage >= 0.9 - 2.0 * p.se,
        });
    }
    Ok(ValidationReport { fdp, level, coverage, decline_band, checks })
}

pub fn theta_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let (a, b, step) = parse_range(spec)?;
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| (a + i as f64 * step).min(b)).collect())
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<Report, CliError> {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    match a.scenario {
        ScenarioArg::Example1 => {
            let cfg = SimConfig { theta_grid: theta_grid(&a.theta_grid)?, ..SimConfig::example1(a.trials, cli.seed) };
            let curves = example1_curves(&cfg)?;
            let summary = curves
                .iter()
                .map(|c| {
                    let worst = c.points.iter().map(|p| p.z_gap()).fold(0.0, f64::max);
                    format!("{}: max {:.4}, largest MC gap {:.2} SE", c.kind.as_str(), c.max_analytic(), worst)
                })
                .collect();
            let body = match cli.format {
                Format::Json => to_json(&curves)?,
                Format::Csv => csv_string(&Curve::CSV_HEADER, curves.iter().flat_map(|c| c.csv_rows())),
            };
            Ok(Report::ok(body, summary, None))
        }
        ScenarioArg::Validation => {
            let rep = run_validation(a.trials, cli.seed)?;
            let failed: Vec<String> = rep
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| format!("FAIL {} {} {}: {}", c.harness, c.setting, c.metric, c.value))
                .collect();
            let mut summary = vec![format!("{} of {} checks pass", rep.checks.len() - failed.len(), rep.checks.len())];
            summary.extend(failed);
            let body = match cli.format {
                Format::Json => to_json(&rep)?,
                Format::Csv => csv_string(&Check::CSV_HEADER, rep.checks.iter().map(Check::row)),
            };
            Ok(Report::ok(body, summary, None))
        }
    }
}

/// Writes `body` to `out` (or stdout) and the manifest next to it.
pub fn write_outputs(cli: &Cli, report: &Report, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, &report.body)?;
            let manifest = crate::manifest::RunManifest::new(cli, report.input_digest.clone())?;
            std::fs::write(crate::manifest::manifest_path(path), to_json(&manifest)?)?;
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(report.body.as_bytes())?;
        }
    }
    Ok(())
}
