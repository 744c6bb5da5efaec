use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binomial_se, standard_normal, trial_rng};
use crate::decline::band_point;
use crate::error::{invalid, Result};
use crate::fdp::{external_estimate, storey_estimate};
use crate::interval::IntervalSet;
use crate::selective::{
    ci_shift_problem, decline_test, predictive_interval_problem, shift_test, CiOptions,
    SelectiveProblem,
};
use crate::special::{norm_isf, norm_sf};
use crate::truncnorm::TruncatedNormal;

/// Latent and observed counts of one FDP-harness trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Significant studies.
    pub r: u64,
    /// Directional nulls among them.
    pub v: u64,
    /// Studies with adjusted p-value at or above lambda.
    pub b: u64,
    /// Nulls among the `b`.
    pub u: u64,
    /// Non-nulls among the `b`.
    pub w: u64,
    /// Discoveries at the stricter threshold.
    pub r_alpha: u64,
    pub v_alpha: u64,
    pub t_alpha: u64,
    /// Nulls among the `r_alpha + b` studies used by the external method.
    pub n0: u64,
}

impl GroundTruth {
    /// Count identities that must hold on every trial.
    pub fn consistent(&self) -> bool {
        self.v <= self.r
            && self.u <= self.b
            && self.u + self.w == self.b
            && self.v_alpha + self.t_alpha == self.r_alpha
            && self.n0 == self.v_alpha + self.u
            && self.r_alpha + self.b <= self.r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpHarnessConfig {
    /// Significant studies per trial.
    pub m: usize,
    /// Fraction of studies with `theta = 0`.
    pub null_fraction: f64,
    /// Effect (z units) of the remaining studies.
    pub nonnull_theta: f64,
    pub alpha0: f64,
    /// Threshold for the external method.
    pub alpha: f64,
    pub lambda: f64,
    pub confidence: f64,
    pub n_trials: u64,
    pub seed: u64,
    /// Hold each study's reported sign fixed across trials and draw `z` from
    /// that half of the selection set.
    pub condition_on_signs: bool,
}

impl Default for FdpHarnessConfig {
    fn default() -> Self {
        Self {
            m: 68,
            null_fraction: 0.3,
            nonnull_theta: 2.0,
            alpha0: 0.05,
            alpha: 0.005,
            lambda: 0.5,
            confidence: 0.95,
            n_trials: 10_000,
            seed: 1,
            condition_on_signs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    /// Mean of the unclipped estimate.
    pub mean_estimate: f64,
    pub mean_estimate_clipped: f64,
    pub mean_truth: f64,
    /// Standard error of the mean paired difference estimate - truth.
    pub se_difference: f64,
    /// Fraction of trials with estimate >= truth.
    pub estimate_at_least_truth: f64,
    /// Fraction of trials with ucb >= truth.
    pub coverage: f64,
    /// Standard error of the coverage at the nominal confidence.
    pub coverage_se: f64,
    pub conservative: bool,
    pub covers: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpHarnessReport {
    pub config: FdpHarnessConfig,
    pub internal: MethodSummary,
    pub external: MethodSummary,
    /// Trials where every count identity held.
    pub identities_hold: bool,
}

struct FdpTrial {
    truth: GroundTruth,
    internal: (f64, f64, f64),
    external: (f64, f64, f64),
}

fn fdp_trial(cfg: &FdpHarnessConfig, c: f64, trial: u64) -> Result<FdpTrial> {
    let mut rng = trial_rng(cfg.seed, 0, trial);
    let n_null = (cfg.null_fraction * cfg.m as f64).round() as usize;
    let a = cfg.alpha / cfg.alpha0;
    let mut p_adj = Vec::with_capacity(cfg.m);
    let mut t = GroundTruth { r: cfg.m as u64, ..Default::default() };
    for i in 0..cfg.m {
        let theta = if i < n_null { 0.0 } else { cfg.nonnull_theta };
        let support = if cfg.condition_on_signs {
            // nulls alternate sign; every seventh non-null carries the wrong sign
            let negative = if i < n_null { i % 2 == 1 } else { (i - n_null) % 7 == 6 };
            if negative { IntervalSet::below(-c) } else { IntervalSet::above(c) }
        } else {
            IntervalSet::two_sided(c)
        };
        let z = TruncatedNormal::new(theta, 1.0, support)?.sample(&mut rng);
        let p = (2.0 * norm_sf(z.abs()) / cfg.alpha0).min(1.0);
        let null = theta * z.signum() <= 0.0;
        p_adj.push(p);
        let big = p >= cfg.lambda;
        let strict = p < a;
        t.v += u64::from(null);
        t.b += u64::from(big);
        t.u += u64::from(null && big);
        t.r_alpha += u64::from(strict);
        t.v_alpha += u64::from(null && strict);
    }
    t.w = t.b - t.u;
    t.t_alpha = t.r_alpha - t.v_alpha;
    t.n0 = t.v_alpha + t.u;

    let int = storey_estimate(&p_adj, cfg.lambda, cfg.confidence)?;
    let internal = (int.raw_estimate, int.ucb, t.v as f64 / t.r as f64);
    let external = if t.r_alpha == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let ext = external_estimate(&p_adj, cfg.alpha, cfg.alpha0, cfg.lambda, cfg.confidence)?;
        (ext.raw_estimate, ext.ucb, t.v_alpha as f64 / t.r_alpha as f64)
    };
    Ok(FdpTrial { truth: t, internal, external })
}

fn summarize(rows: &[(f64, f64, f64)], confidence: f64) -> MethodSummary {
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mean_estimate = mean(&|r| r.0);
    let mean_truth = mean(&|r| r.2);
    let diff_mean = mean_estimate - mean_truth;
    let var = rows.iter().map(|r| (r.0 - r.2 - diff_mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let se_difference = (var / n).sqrt();
    let coverage = mean(&|r| f64::from(u8::from(r.1 >= r.2 - 1e-12)));
    let coverage_se = binomial_se(confidence, rows.len() as u64);
    MethodSummary {
        mean_estimate,
        mean_estimate_clipped: mean(&|r| r.0.min(1.0)),
        mean_truth,
        se_difference,
        estimate_at_least_truth: mean(&|r| f64::from(u8::from(r.0 >= r.2 - 1e-12))),
        coverage,
        coverage_se,
        conservative: mean_estimate >= mean_truth - 2.0 * se_difference,
        covers: coverage >= confidence - 2.0 * coverage_se,
    }
}

/// Conservativeness and coverage of the internal and external FDP methods
/// against the simulated directional FDP.
pub fn harness_fdp(cfg: &FdpHarnessConfig) -> Result<FdpHarnessReport> {
    if cfg.m == 0 || cfg.n_trials == 0 || !(0.0..=1.0).contains(&cfg.null_fraction) {
        return Err(invalid("harness needs m >= 1, n_trials >= 1 and null_fraction in [0, 1]"));
    }
    let c = norm_isf(cfg.alpha0 / 2.0);
    let trials = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| fdp_trial(cfg, c, t))
        .collect::<Result<Vec<_>>>()?;
    let internal: Vec<_> = trials.iter().map(|t| t.internal).collect();
    let external: Vec<_> = trials.iter().map(|t| t.external).collect();
    Ok(FdpHarnessReport {
        config: cfg.clone(),
        internal: summarize(&internal, cfg.confidence),
        external: summarize(&external, cfg.confidence),
        identities_hold: trials.iter().all(|t| t.truth.consistent()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectiveTest {
    /// Shift test with `theta_O = theta_R`.
    Shift,
    /// Decline test with `theta_R = (1 - rho) theta_O`.
    DeclineBoundary,
    /// Decline test with `theta_R = theta_O` (inside the null when `rho > 0`).
    DeclineInterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelConfig {
    pub thetas: Vec<f64>,
    /// `k_O = k_R = k`.
    pub ks: Vec<f64>,
    pub rho: f64,
    pub alpha0: f64,
    pub nominal: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub tests: Vec<SelectiveTest>,
}

impl Default for LevelConfig {
    fn default() -> Self {
        Self {
            thetas: vec![0.0, 0.2, 0.5, 1.0, 2.0],
            ks: vec![1.0, 2.0, 4.0, 6.0, 10.0],
            rho: 0.25,
            alpha0: 0.05,
            nominal: 0.05,
            n_trials: 10_000,
            seed: 7,
            tests: vec![SelectiveTest::Shift, SelectiveTest::DeclineBoundary],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub test: SelectiveTest,
    pub theta: f64,
    pub k: f64,
    pub n: u64,
    pub rejections: u64,
    pub rate: f64,
    /// Standard error at the nominal rate.
    pub se: f64,
}

/// Empirical rejection rates at the nominal level over the `(theta, k)` grid.
pub fn harness_selective_level(cfg: &LevelConfig) -> Result<Vec<LevelPoint>> {
    if cfg.n_trials == 0 || !(0.0..=1.0).contains(&cfg.rho) {
        return Err(invalid("level harness needs n_trials >= 1 and rho in [0, 1]"));
    }
    let c = norm_isf(cfg.alpha0 / 2.0);
    let sel = IntervalSet::two_sided(c);
    let mut jobs = Vec::new();
    for &test in &cfg.tests {
        for &theta in &cfg.thetas {
            for &k in &cfg.ks {
                jobs.push((test, theta, k));
            }
        }
    }
    jobs.par_iter()
        .enumerate()
        .map(|(point, &(test, theta, k))| {
            let theta_r = match test {
                SelectiveTest::Shift | SelectiveTest::DeclineInterior => theta,
                SelectiveTest::DeclineBoundary => (1.0 - cfg.rho) * theta,
            };
            let original = TruncatedNormal::new(k * theta, 1.0, sel.clone())?;
            let mut rejections = 0u64;
            for trial in 0..cfg.n_trials {
                let mut rng = trial_rng(cfg.seed, point as u64, trial);
                let z_o = original.sample(&mut rng);
                let z_r = k * theta_r + standard_normal(&mut rng);
                let prob = SelectiveProblem::new(z_o, z_r, k, k, sel.clone())?;
                let p = match test {
                    SelectiveTest::Shift => shift_test(&prob, 0.0)?.p,
                    _ => decline_test(&prob, cfg.rho)?.p,
                };
                rejections += u64::from(p <= cfg.nominal);
            }
            let rate = rejections as f64 / cfg.n_trials as f64;
            Ok(LevelPoint {
                test,
                theta,
                k,
                n: cfg.n_trials,
                rejections,
                rate,
                se: binomial_se(cfg.nominal, cfg.n_trials),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    /// `(theta_O, theta_R, k_O, k_R)` settings.
    pub settings: Vec<(f64, f64, f64, f64)>,
    pub level: f64,
    pub alpha0: f64,
    pub n_trials: u64,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            settings: vec![(0.0, 0.0, 1.0, 1.0), (0.3, 0.3, 4.0, 5.0), (0.5, 0.2, 3.0, 6.0)],
            level: 0.95,
            alpha0: 0.05,
            n_trials: 10_000,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub theta_o: f64,
    pub theta_r: f64,
    pub k_o: f64,
    pub k_r: f64,
    pub n: u64,
    /// Frequency with which the shift interval contains `theta_O - theta_R`.
    pub ci_coverage: f64,
    /// Frequency with which the predictive interval contains a fresh `Z_R`;
    /// only computed when `theta_O = theta_R`.
    pub pi_coverage: Option<f64>,
    /// Trials with an infinite shift-interval endpoint.
    pub ci_unbounded: u64,
}

/// Coverage of the selective shift and predictive intervals.
pub fn harness_coverage(cfg: &CoverageConfig) -> Result<Vec<CoveragePoint>> {
    if cfg.n_trials == 0 {
        return Err(invalid("coverage harness needs n_trials >= 1"));
    }
    let sel = IntervalSet::two_sided(norm_isf(cfg.alpha0 / 2.0));
    let opts = CiOptions::default();
    cfg.settings
        .iter()
        .enumerate()
        .map(|(point, &(theta_o, theta_r, k_o, k_r))| {
            let original = TruncatedNormal::new(k_o * theta_o, 1.0, sel.clone())?;
            let predictive = theta_o == theta_r;
            let shift = theta_o - theta_r;
            let hits = (0..cfg.n_trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(cfg.seed, point as u64, trial);
                    let z_o = original.sample(&mut rng);
                    let z_r = k_r * theta_r + standard_normal(&mut rng);
                    let prob = SelectiveProblem::new(z_o, z_r, k_o, k_r, sel.clone())?;
                    let ci = ci_shift_problem(&prob, cfg.level, true, &opts)?;
                    let pi = if predictive {
                        Some(predictive_interval_problem(&prob, cfg.level, true)?.contains(z_r))
                    } else {
                        None
                    };
                    Ok((ci.contains(shift), ci.lo.is_infinite() || ci.hi.is_infinite(), pi))
                })
                .collect::<Result<Vec<_>>>()?;
            let n = cfg.n_trials as f64;
            Ok(CoveragePoint {
                theta_o,
                theta_r,
                k_o,
                k_r,
                n: cfg.n_trials,
                ci_coverage: hits.iter().filter(|h| h.0).count() as f64 / n,
                pi_coverage: predictive.then(|| hits.iter().filter(|h| h.2 == Some(true)).count() as f64 / n),
                ci_unbounded: hits.iter().filter(|h| h.1).count() as u64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeclineBandCoverage {
    pub rho: f64,
    pub n: u64,
    /// Frequency of `ci_lo <= F(rho) <= ci_hi`.
    pub coverage: f64,
    pub se: f64,
}

/// Coverage of the decline band when `m` studies share `theta_O` and study
/// `i` keeps a fraction `1 - i/(m-1)` of it in replication.
pub fn harness_decline_band(
    m: usize,
    theta_o: f64,
    rhos: &[f64],
    lambda: f64,
    confidence: f64,
    n_trials: u64,
    seed: u64,
) -> Result<Vec<DeclineBandCoverage>> {
    if m < 2 || n_trials == 0 {
        return Err(invalid("decline harness needs m >= 2 and n_trials >= 1"));
    }
    let sel = IntervalSet::two_sided(norm_isf(0.025));
    let original = TruncatedNormal::new(theta_o, 1.0, sel.clone())?;
    let keep: Vec<f64> = (0..m).map(|i| 1.0 - i as f64 / (m - 1) as f64).collect();
    let covered = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, 0, trial);
            let mut probs = Vec::with_capacity(m);
            for &f in &keep {
                let z_o = original.sample(&mut rng);
                let z_r = f * theta_o + standard_normal(&mut rng);
                probs.push((SelectiveProblem::new(z_o, z_r, 1.0, 1.0, sel.clone())?, f));
            }
            rhos.iter()
                .map(|&rho| {
                    let p = probs.iter().map(|(pr, _)| decline_test(pr, rho).map(|o| o.p)).collect::<Result<Vec<_>>>()?;
                    // declined by at least rho in the reported direction
                    let declined = probs
                        .iter()
                        .filter(|(pr, f)| {
                            let s = pr.z_o.signum();
                            s * f * theta_o < (1.0 - rho) * s * theta_o
                        })
                        .count() as f64
                        / m as f64;
                    let pt = band_point(rho, &p, lambda, confidence);
                    Ok(pt.ci_lo <= declined && declined <= pt.ci_hi)
                })
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rhos
        .iter()
        .enumerate()
        .map(|(j, &rho)| {
            let cov = covered.iter().filter(|c| c[j]).count() as f64 / n_trials as f64;
            DeclineBandCoverage {
                rho,
                n: n_trials,
                coverage: cov,
                se: binomial_se(2.0 * confidence - 1.0, n_trials),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fdp_identities_and_direction() {
        for (frac, signs) in [(0.0, false), (0.3, true), (1.0, false)] {
            let cfg = FdpHarnessConfig { null_fraction: frac, n_trials: 300, condition_on_signs: signs, ..Default::default() };
            let rep = harness_fdp(&cfg).unwrap();
            assert!(rep.identities_hold);
            assert!(rep.internal.conservative, "{rep:?}");
            if frac == 1.0 {
                assert!((rep.internal.mean_truth - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn level_small_grid() {
        let cfg = LevelConfig {
            thetas: vec![0.0, 1.0],
            ks: vec![2.0],
            n_trials: 4000,
            tests: vec![SelectiveTest::Shift, SelectiveTest::DeclineBoundary, SelectiveTest::DeclineInterior],
            ..Default::default()
        };
        for pt in harness_selective_level(&cfg).unwrap() {
            let slack = 4.0 * pt.se;
            match pt.test {
                SelectiveTest::DeclineInterior => assert!(pt.rate < 0.05 + slack, "{pt:?}"),
                _ => assert!((pt.rate - 0.05).abs() < slack, "{pt:?}"),
            }
        }
    }

    #[test]
    fn coverage_small() {
        let cfg = CoverageConfig { settings: vec![(0.2, 0.2, 3.0, 3.0)], n_trials: 600, ..Default::default() };
        let pt = harness_coverage(&cfg).unwrap()[0];
        let se = binomial_se(0.95, 600);
        assert!((pt.ci_coverage - 0.95).abs() < 4.0 * se, "{pt:?}");
        assert!((pt.pi_coverage.unwrap() - 0.95).abs() < 4.0 * se, "{pt:?}");
    }

    #[test]
    fn decline_band_covers() {
        let res = harness_decline_band(30, 3.0, &[0.0, 0.5], 0.5, 0.95, 150, 5).unwrap();
        for r in res {
            assert!(r.coverage >= 0.90 - 3.0 * r.se, "{r:?}");
        }
    }
}
