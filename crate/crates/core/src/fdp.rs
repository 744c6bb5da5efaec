//! Directional false discovery proportion: point estimates and exact binomial
//! upper confidence bounds.
//!
//! Inputs are selection-adjusted original p-values `p / alpha0` (superuniform
//! under the directional null given selection) or one-sided replication
//! p-values. Only counts of p-values above and below thresholds are used.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::log_add_exp;
use crate::output::{format_float, percent};

/// `P(Binomial(n, p) <= k)`, summed exactly term by term in log space.
pub fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let log_odds = p.ln() - (-p).ln_1p();
    let mut term = n as f64 * (-p).ln_1p();
    let mut total = term;
    for i in 0..k {
        term += ((n - i) as f64 / (i + 1) as f64).ln() + log_odds;
        total = log_add_exp(total, term);
    }
    total.exp().min(1.0)
}

/// Largest `n >= start` with `binom_cdf(k, n, p) >= 1 - confidence`.
///
/// The cdf is nonincreasing in `n`, so an ascending scan stops at the first
/// failure. `limit` bounds the scan.
fn scan_max_trials(k: u64, start: u64, p: f64, confidence: f64, limit: u64) -> u64 {
    let floor = 1.0 - confidence;
    let mut n = start;
    while n < limit && binom_cdf(k, n + 1, p) >= floor {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdpMethod {
    Internal,
    External,
    Replication,
}

impl FdpMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FdpMethod::Internal => "internal",
            FdpMethod::External => "external",
            FdpMethod::Replication => "replication",
        }
    }
}

/// Estimate and upper bound for one (method, threshold) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpResult {
    pub method: FdpMethod,
    pub alpha0: f64,
    pub alpha: f64,
    pub lambda: f64,
    /// Significant studies under consideration.
    #[serde(rename = "R")]
    pub r: u64,
    /// Studies with p-value at or above `lambda`.
    #[serde(rename = "B")]
    pub b: u64,
    /// `R_alpha + B` (external), otherwise `R`.
    #[serde(rename = "N")]
    pub n: u64,
    /// Discoveries at the threshold `alpha`.
    #[serde(rename = "R_alpha")]
    pub r_alpha: u64,
    pub beta: Option<f64>,
    /// Numerator of the estimate, e.g. `B / (1 - lambda)`; denominator is `R_alpha`.
    pub estimate_numerator: f64,
    /// Unclipped estimate.
    pub raw_estimate: f64,
    pub estimate: f64,
    /// `V*` (internal) or `Q - B` (external): bound on the false-discovery count.
    pub ucb_count: u64,
    pub ucb: f64,
    pub confidence: f64,
}

impl FdpResult {
    pub const CSV_HEADER: [&'static str; 16] = [
        "method",
        "alpha0",
        "alpha",
        "lambda",
        "R",
        "B",
        "N",
        "R_alpha",
        "beta",
        "estimate_numerator",
        "raw_estimate",
        "estimate",
        "ucb_count",
        "ucb",
        "confidence",
        "summary",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.method.as_str().into(),
            format_float(self.alpha0),
            format_float(self.alpha),
            format_float(self.lambda),
            self.r.to_string(),
            self.b.to_string(),
            self.n.to_string(),
            self.r_alpha.to_string(),
            self.beta.map(format_float).unwrap_or_default(),
            format_float(self.estimate_numerator),
            format_float(self.raw_estimate),
            format_float(self.estimate),
            self.ucb_count.to_string(),
            format_float(self.ucb),
            format_float(self.confidence),
            self.summary(),
        ]
    }

    /// Table-style summary such as `2.2 / 33 = 7%; 6 / 33 = 18%`.
    pub fn summary(&self) -> String {
        format!(
            "{:.1} / {} = {}%; {} / {} = {}%",
            self.estimate_numerator,
            self.r_alpha,
            percent(self.estimate),
            self.ucb_count,
            self.r_alpha,
            percent(self.ucb),
        )
    }
}

fn check_probability(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1), got {x}")));
    }
    Ok(())
}

fn count_big(p: &[f64], lambda: f64) -> Result<u64> {
    if let Some(bad) = p.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
        return Err(invalid(format!("p-values must lie in (0, 1], got {bad}")));
    }
    Ok(p.iter().filter(|&&x| x >= lambda).count() as u64)
}

/// Upper confidence bound `V*` on the number of directional nulls among `r`
/// discoveries, given `b` of them have p-values at or above `lambda`.
/// Returns the count and the fraction `V*/r`.
pub fn ucb_internal(b: u64, r: u64, lambda: f64, confidence: f64) -> (u64, f64) {
    assert!(b <= r, "B = {b} exceeds R = {r}");
    let v = scan_max_trials(b, b, 1.0 - lambda, confidence, r);
    let frac = if r == 0 { 0.0 } else { v as f64 / r as f64 };
    (v, frac)
}

/// Upper bound `Q` for the external comparison and the fraction `(Q - B)/R_alpha`.
///
/// The scan runs until the binomial tail fails, so it is not capped by the
/// number of studies; the fraction is clipped to 1.
pub fn ucb_external(b: u64, r_alpha: u64, beta: f64, confidence: f64) -> (u64, f64) {
    let q = scan_max_trials(b, b, beta, confidence, u64::MAX);
    let frac = match r_alpha {
        0 if q == b => 0.0,
        0 => 1.0,
        _ => ((q - b) as f64 / r_alpha as f64).min(1.0),
    };
    (q, frac)
}

fn internal_like(
    method: FdpMethod,
    p: &[f64],
    lambda: f64,
    confidence: f64,
) -> Result<FdpResult> {
    check_probability(lambda, "lambda")?;
    check_probability(confidence, "confidence")?;
    if p.is_empty() {
        return Err(invalid("no p-values"));
    }
    let b = count_big(p, lambda)?;
    let r = p.len() as u64;
    let numerator = b as f64 / (1.0 - lambda);
    let raw = numerator / r as f64;
    let (v, frac) = ucb_internal(b, r, lambda, confidence);
    Ok(FdpResult {
        method,
        alpha0: f64::NAN,
        alpha: f64::NAN,
        lambda,
        r,
        b,
        n: r,
        r_alpha: r,
        beta: None,
        estimate_numerator: numerator,
        raw_estimate: raw,
        estimate: raw.min(1.0),
        ucb_count: v,
        ucb: frac,
        confidence,
    })
}

/// Storey-style estimate `B / ((1 - lambda) R)` with its binomial upper bound,
/// from selection-adjusted original p-values.
pub fn storey_estimate(p_adjusted: &[f64], lambda: f64, confidence: f64) -> Result<FdpResult> {
    internal_like(FdpMethod::Internal, p_adjusted, lambda, confidence)
}

/// Same machinery on one-sided replication p-values for the original direction.
pub fn replication_fdp(p_replication: &[f64], lambda: f64, confidence: f64) -> Result<FdpResult> {
    internal_like(FdpMethod::Replication, p_replication, lambda, confidence)
}

/// External comparison: estimate and bound the directional FDP among originals
/// significant at a stricter threshold `alpha < lambda * alpha0`.
pub fn external_estimate(
    p_adjusted: &[f64],
    alpha: f64,
    alpha0: f64,
    lambda: f64,
    confidence: f64,
) -> Result<FdpResult> {
    check_probability(lambda, "lambda")?;
    check_probability(confidence, "confidence")?;
    if !(alpha0 > 0.0 && alpha0 <= 1.0) {
        return Err(invalid(format!("alpha0 must lie in (0, 1], got {alpha0}")));
    }
    if !(alpha > 0.0 && alpha < lambda * alpha0) {
        return Err(invalid(format!(
            "alpha must lie in (0, lambda * alpha0) = (0, {}), got {alpha}",
            lambda * alpha0
        )));
    }
    let b = count_big(p_adjusted, lambda)?;
    let a = alpha / alpha0;
    let r_alpha = p_adjusted.iter().filter(|&&x| x < a).count() as u64;
    let beta = (1.0 - lambda) / (1.0 - lambda + a);
    let numerator = (1.0 - beta) / beta * b as f64;
    let (q, frac) = ucb_external(b, r_alpha, beta, confidence);
    if r_alpha == 0 {
        return Err(Error::UndefinedEstimate(format!("no discoveries at alpha = {alpha}")));
    }
    let raw = numerator / r_alpha as f64;
    Ok(FdpResult {
        method: FdpMethod::External,
        alpha0,
        alpha,
        lambda,
        r: p_adjusted.len() as u64,
        b,
        n: r_alpha + b,
        r_alpha,
        beta: Some(beta),
        estimate_numerator: numerator,
        raw_estimate: raw,
        estimate: raw.min(1.0),
        ucb_count: q - b,
        ucb: frac,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `n` adjusted p-values with `big` of them at 0.75 and the rest spread below.
    fn synthetic(n: usize, big: usize, small_below: f64) -> Vec<f64> {
        (0..n)
            .map(|i| if i < big { 0.75 } else { small_below * (i + 1) as f64 / (n + 1) as f64 })
            .collect()
    }

    #[test]
    fn binom_examples() {
        assert!((binom_cdf(0, 5, 0.5) - 0.03125).abs() < 1e-15);
        assert!((binom_cdf(11, 17, 5.0 / 6.0) - 0.050_389_681_364_520_59).abs() < 1e-13);
        assert_eq!(binom_cdf(7, 7, 0.3), 1.0);
        // tail far beyond f64 range of (1-p)^n
        let tiny = binom_cdf(3, 5000, 0.9);
        assert!(tiny >= 0.0 && tiny < 1e-300);
    }

    #[test]
    fn internal_bounds() {
        assert_eq!(ucb_internal(11, 68, 0.5, 0.95).0, 32);
        assert_eq!(ucb_internal(16, 68, 0.5, 0.95).0, 43);
        assert_eq!(ucb_internal(0, 68, 0.5, 0.95).0, 4);
        assert_eq!(ucb_internal(3, 22, 0.5, 0.95).0, 12);
        assert_eq!(ucb_internal(6, 33, 0.5, 0.95).0, 20);
        assert_eq!(ucb_internal(8, 41, 0.5, 0.95).0, 25);
        // capped by R
        assert_eq!(ucb_internal(5, 5, 0.5, 0.95).0, 5);
    }

    #[test]
    fn external_bounds() {
        assert_eq!(ucb_external(11, 33, 5.0 / 6.0, 0.95).0, 17);
        assert_eq!(ucb_external(11, 22, 25.0 / 26.0, 0.95).0, 13);
        assert_eq!(ucb_external(11, 41, 5.0 / 7.0, 0.95).0, 20);
    }

    #[test]
    fn storey_examples() {
        let r = storey_estimate(&synthetic(68, 11, 0.5), 0.5, 0.95).unwrap();
        assert_eq!((r.b, r.r), (11, 68));
        assert!((r.estimate - 22.0 / 68.0).abs() < 1e-15);
        assert_eq!(r.ucb_count, 32);
        assert_eq!(r.summary(), "22.0 / 68 = 32%; 32 / 68 = 47%");
        let none = storey_estimate(&synthetic(10, 0, 0.5), 0.5, 0.95).unwrap();
        assert_eq!(none.estimate, 0.0);
        let all = storey_estimate(&[0.5, 0.9, 1.0], 0.5, 0.95).unwrap();
        assert_eq!(all.estimate, 1.0);
        assert!(all.raw_estimate > 1.0);
        assert!(storey_estimate(&[], 0.5, 0.95).is_err());
    }

    #[test]
    fn external_examples() {
        // 11 big, 33 below 0.1 (= 0.005 / 0.05), 41 below 0.2, 22 below 0.02
        let mut p = vec![0.75; 11];
        p.extend((0..22).map(|i| 0.0005 + 0.0008 * i as f64));
        p.extend((0..11).map(|i| 0.03 + 0.006 * i as f64));
        p.extend((0..8).map(|i| 0.11 + 0.01 * i as f64));
        p.extend((0..16).map(|i| 0.25 + 0.01 * i as f64));
        let cases = [(0.001, 22, 0.44, 2, "0.4 / 22 = 2%; 2 / 22 = 9%"),
            (0.005, 33, 2.2, 6, "2.2 / 33 = 7%; 6 / 33 = 18%"),
            (0.01, 41, 4.4, 9, "4.4 / 41 = 11%; 9 / 41 = 22%")];
        for (alpha, r_alpha, num, ucb, text) in cases {
            let r = external_estimate(&p, alpha, 0.05, 0.5, 0.95).unwrap();
            assert_eq!(r.r_alpha, r_alpha);
            assert!((r.estimate_numerator - num).abs() < 1e-12, "{}", r.estimate_numerator);
            assert_eq!(r.ucb_count, ucb);
            assert_eq!(r.summary(), text);
            assert!(r.estimate <= r.ucb);
        }
        assert!(matches!(
            external_estimate(&[0.9, 0.6], 0.005, 0.05, 0.5, 0.95),
            Err(Error::UndefinedEstimate(_))
        ));
        assert!(external_estimate(&p, 0.03, 0.05, 0.5, 0.95).is_err());
    }

    #[test]
    fn replication_examples() {
        let p = synthetic(68, 16, 0.5);
        let r = replication_fdp(&p, 0.5, 0.95).unwrap();
        assert_eq!((r.b, r.ucb_count), (16, 43));
        assert_eq!(r.summary(), "32.0 / 68 = 47%; 43 / 68 = 63%");
        assert_eq!(replication_fdp(&[0.1, 0.2], 0.5, 0.95).unwrap().estimate, 0.0);
    }

    #[test]
    fn ties_at_lambda_are_big() {
        let r = storey_estimate(&[0.5, 0.1], 0.5, 0.95).unwrap();
        assert_eq!(r.b, 1);
    }

    proptest! {
        #[test]
        fn cdf_nonincreasing_in_trials(k in 0u64..40, n in 0u64..200, p in 0.01..0.99f64) {
            let n = n.max(k);
            prop_assert!(binom_cdf(k, n + 1, p) <= binom_cdf(k, n, p) + 1e-14);
        }

        #[test]
        fn cdf_matches_direct_sum(k in 0u64..30, extra in 0u64..30, p in 0.01..0.99f64) {
            let n = k + extra;
            // direct product-form pmf
            let mut pmf = (1.0 - p).powi(n as i32);
            let mut direct = pmf;
            for i in 0..k {
                pmf *= (n - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
                direct += pmf;
            }
            prop_assert!((binom_cdf(k, n, p) - direct.min(1.0)).abs() < 1e-12);
        }

        #[test]
        fn scans_stop_at_first_failure(b in 0u64..30, extra in 0u64..60, lambda in 0.2..0.8f64) {
            let r = b + extra;
            let (v, _) = ucb_internal(b, r, lambda, 0.95);
            prop_assert!(v >= b && v <= r);
            prop_assert!(binom_cdf(b, v, 1.0 - lambda) >= 0.05);
            if v < r {
                prop_assert!(binom_cdf(b, v + 1, 1.0 - lambda) < 0.05);
            }
            // same kernel as the external scan when beta = 1 - lambda and the domain matches
            let (q, _) = ucb_external(b, r, 1.0 - lambda, 0.95);
            prop_assert_eq!(q.min(r), v);
        }

        #[test]
        fn estimate_below_bound(big in 0usize..40, small in 1usize..40) {
            let mut p = vec![0.8; big];
            p.extend(std::iter::repeat(0.01).take(small));
            let r = storey_estimate(&p, 0.5, 0.95).unwrap();
            prop_assert!(r.estimate <= r.ucb);
            prop_assert!(r.b <= r.r);
        }
    }
}
