use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binomial_se, standard_normal, trial_rng, SimConfig};
use crate::error::Result;
use crate::interval::IntervalSet;
use crate::output::format_float;
use crate::quadrature::integrate;
use crate::special::{norm_cdf, norm_pdf, norm_sf};
use crate::truncnorm::TruncatedNormal;

/// Integration window half-width around theta, in original standard errors.
const WINDOW_SDS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// Replication not significant in the original direction.
    NonsigSameDir,
    /// Significant original with the wrong sign.
    TypeS,
    /// Replication estimate outside the original's confidence interval.
    CiMiss,
    /// Replication estimate closer to zero in the claimed direction.
    Decline,
}

impl CurveKind {
    pub const ALL: [CurveKind; 4] = [
        CurveKind::NonsigSameDir,
        CurveKind::TypeS,
        CurveKind::CiMiss,
        CurveKind::Decline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::NonsigSameDir => "nonsig_same_dir",
            CurveKind::TypeS => "type_s",
            CurveKind::CiMiss => "ci_miss",
            CurveKind::Decline => "decline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub theta: f64,
    pub analytic: f64,
    pub mc: f64,
    /// Standard error of the Monte Carlo proportion, from the analytic value.
    pub mc_se: f64,
}

impl CurvePoint {
    /// `|mc - analytic|` in standard errors (0 when both agree exactly).
    pub fn z_gap(&self) -> f64 {
        let gap = (self.mc - self.analytic).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.mc_se
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub const CSV_HEADER: [&'static str; 5] = ["curve", "theta", "analytic", "mc", "mc_se"];

    pub fn max_analytic(&self) -> f64 {
        self.points.iter().map(|p| p.analytic).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    self.kind.as_str().to_string(),
                    format_float(p.theta),
                    format_float(p.analytic),
                    format_float(p.mc),
                    format_float(p.mc_se),
                ]
            })
            .collect()
    }
}

/// Significance probabilities of the original, `(P(Z > c s), P(Z < -c s))`.
fn sig_probs(theta: f64, c: f64, sigma: f64) -> (f64, f64) {
    (norm_sf(c - theta / sigma), norm_cdf(-c - theta / sigma))
}

fn nonsig_same_dir(cfg: &SimConfig, theta: f64) -> f64 {
    let c = cfg.critical();
    let (up, down) = sig_probs(theta, c, cfg.sigma_o);
    let (up_r, down_r) = sig_probs(theta, c, cfg.sigma_r);
    1.0 - (up * up_r + down * down_r) / (up + down)
}

fn type_s(cfg: &SimConfig, theta: f64) -> f64 {
    let (up, down) = sig_probs(theta.abs(), cfg.critical(), cfg.sigma_o);
    down / (up + down)
}

/// `E[g(Z) | |Z| > c sigma_O]` for `Z ~ N(theta, sigma_O^2)`, by quadrature.
fn selected_expectation(cfg: &SimConfig, theta: f64, g: impl Fn(f64) -> f64 + Copy) -> Result<f64> {
    let c = cfg.critical() * cfg.sigma_o;
    let (up, down) = sig_probs(theta, cfg.critical(), cfg.sigma_o);
    let total = up + down;
    let tol = 1e-9 * total;
    let (wlo, whi) = (theta - WINDOW_SDS * cfg.sigma_o, theta + WINDOW_SDS * cfg.sigma_o);
    let density = move |z: f64| g(z) * norm_pdf((z - theta) / cfg.sigma_o) / cfg.sigma_o;
    let mut acc = 0.0;
    for (a, b) in [(wlo, -c), (c, whi)] {
        let (a, b) = (a.max(wlo), b.min(whi));
        if a < b {
            acc += integrate(density, a, b, tol / 2.0)?.value;
        }
    }
    Ok(acc / total)
}

fn ci_miss(cfg: &SimConfig, theta: f64) -> Result<f64> {
    let w = cfg.critical() * cfg.sigma_r;
    let s = cfg.sigma_r;
    selected_expectation(cfg, theta, move |z| {
        norm_cdf((z - w - theta) / s) + norm_sf((z + w - theta) / s)
    })
}

fn decline(cfg: &SimConfig, theta: f64) -> Result<f64> {
    let s = cfg.sigma_r;
    selected_expectation(cfg, theta, move |z| {
        let below = norm_cdf((z - theta) / s);
        if z > 0.0 {
            below
        } else {
            1.0 - below
        }
    })
}

/// Monte Carlo frequencies of all four events at one theta, in `CurveKind::ALL` order.
fn mc_frequencies(cfg: &SimConfig, point: u64, theta: f64) -> Result<[f64; 4]> {
    let c = cfg.critical();
    let selected = TruncatedNormal::new(theta, cfg.sigma_o, IntervalSet::two_sided(c * cfg.sigma_o))?;
    let w = c * cfg.sigma_r;
    let mut counts = [0u64; 4];
    for trial in 0..cfg.n_trials {
        let mut rng = trial_rng(cfg.seed, point, trial);
        let z = selected.sample(&mut rng);
        let zr = theta + cfg.sigma_r * standard_normal(&mut rng);
        let same_dir_sig = (z > 0.0 && zr > w) || (z < 0.0 && zr < -w);
        let wrong_sign = if theta >= 0.0 { z < 0.0 } else { z > 0.0 };
        let closer = (z > 0.0 && zr < z) || (z < 0.0 && zr > z);
        for (i, hit) in [!same_dir_sig, wrong_sign, (z - zr).abs() > w, closer].into_iter().enumerate() {
            counts[i] += u64::from(hit);
        }
    }
    let n = cfg.n_trials as f64;
    Ok(counts.map(|k| k as f64 / n))
}

fn analytic(cfg: &SimConfig, kind: CurveKind, theta: f64) -> Result<f64> {
    Ok(match kind {
        CurveKind::NonsigSameDir => nonsig_same_dir(cfg, theta),
        CurveKind::TypeS => type_s(cfg, theta),
        CurveKind::CiMiss => ci_miss(cfg, theta)?,
        CurveKind::Decline => decline(cfg, theta)?,
    })
}

/// All four curves on the config's grid, with Monte Carlo cross-checks.
pub fn example1_curves(cfg: &SimConfig) -> Result<Vec<Curve>> {
    cfg.validate()?;
    let rows = cfg
        .theta_grid
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| {
            let mc = mc_frequencies(cfg, i as u64, theta)?;
            let mut out = [CurvePoint { theta, analytic: 0.0, mc: 0.0, mc_se: 0.0 }; 4];
            for (j, kind) in CurveKind::ALL.into_iter().enumerate() {
                let a = analytic(cfg, kind, theta)?;
                out[j] = CurvePoint { theta, analytic: a, mc: mc[j], mc_se: binomial_se(a, cfg.n_trials) };
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveKind::ALL
        .into_iter()
        .enumerate()
        .map(|(j, kind)| Curve { kind, points: rows.iter().map(|r| r[j]).collect() })
        .collect())
}

fn single(cfg: &SimConfig, kind: CurveKind) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    cfg.theta_grid.iter().map(|&t| Ok((t, analytic(cfg, kind, t)?))).collect()
}

/// Expected fraction of selected originals whose replication is not
/// significant in the same direction.
pub fn curve_nonsig_same_dir(cfg: &SimConfig) -> Result<Vec<(f64, f64)>> {
    single(cfg, CurveKind::NonsigSameDir)
}

/// Proportion of selected originals with the wrong sign (theta taken as `|theta|`).
pub fn curve_type_s(cfg: &SimConfig) -> Result<Vec<(f64, f64)>> {
    single(cfg, CurveKind::TypeS)
}

/// Expected fraction of replication estimates outside the original's interval.
pub fn curve_ci_miss(cfg: &SimConfig) -> Result<Vec<(f64, f64)>> {
    single(cfg, CurveKind::CiMiss)
}

/// Expected fraction of replication estimates closer to zero than the original.
pub fn curve_decline(cfg: &SimConfig) -> Result<Vec<(f64, f64)>> {
    single(cfg, CurveKind::Decline)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(grid: Vec<f64>, n: u64) -> SimConfig {
        SimConfig { theta_grid: grid, ..SimConfig::example1(n, 99) }
    }

    #[test]
    fn analytic_examples() {
        let c = cfg(vec![0.0, 1.0, 5.0, 40.0], 1);
        let ns = curve_nonsig_same_dir(&c).unwrap();
        assert!((ns[0].1 - 0.975).abs() < 1e-12);
        assert!((ns[2].1 - 0.001_182_749_299_899_159_1).abs() < 1e-12);
        let ts = curve_type_s(&c).unwrap();
        assert!((ts[0].1 - 0.5).abs() < 1e-15);
        assert!((ts[1].1 - 0.009_045_271_962_580_565).abs() < 1e-12);
        assert!(ts[3].1 < 1e-300);
        let cm = curve_ci_miss(&c).unwrap();
        assert!((cm[3].1 - 0.165_776_272_895_703_9).abs() < 1e-8);
        let dc = curve_decline(&c).unwrap();
        assert!(dc[0].1 >= 0.975);
        assert!((dc[3].1 - 0.5).abs() < 1e-8);
    }

    #[test]
    fn quadrature_matches_closed_form_expectation() {
        // E[1 | selected] is 1
        let c = cfg(vec![0.7], 1);
        let one = selected_expectation(&c, 0.7, |_| 1.0).unwrap();
        assert!((one - 1.0).abs() < 1e-9);
        // E[1{Z > 0} | selected] is the upper share
        let (up, down) = sig_probs(0.7, c.critical(), 1.0);
        let share = selected_expectation(&c, 0.7, |z| f64::from(u8::from(z > 0.0))).unwrap();
        assert!((share - up / (up + down)).abs() < 1e-9);
    }

    #[test]
    fn mc_agrees_with_analytic() {
        let c = cfg(vec![0.0, 0.8, 2.5], 20_000);
        for curve in example1_curves(&c).unwrap() {
            for p in &curve.points {
                assert!(p.z_gap() < 4.0, "{:?} {p:?}", curve.kind);
            }
        }
    }

    #[test]
    fn reproducible() {
        let c = cfg(vec![0.0, 1.0], 500);
        assert_eq!(example1_curves(&c).unwrap(), example1_curves(&c).unwrap());
    }
}
