//! Fraction of true effects that declined by at least `rho`: under- and
//! overestimates and a two-sided confidence band, over a grid of `rho`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fdp::ucb_internal;
use crate::output::format_float;
use crate::selective::decline_pvalue;
use crate::study::StudyPair;

/// `1 - p`: p-value of the complementary one-sided hypothesis.
pub fn complement_pvalue(p: f64) -> f64 {
    1.0 - p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeclinePoint {
    pub rho: f64,
    /// Studies with decline p-value at or above `lambda`.
    pub b: u64,
    /// Studies with complement p-value at or above `lambda`.
    pub b_complement: u64,
    pub under: f64,
    pub over: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclineBand {
    pub m: u64,
    pub lambda: f64,
    /// Confidence of each one-sided bound.
    pub confidence: f64,
    pub points: Vec<DeclinePoint>,
    /// `under` and `over` nonincreasing in `rho` on the grid.
    pub monotone: bool,
}

impl DeclineBand {
    pub const CSV_HEADER: [&'static str; 7] = ["rho", "under", "over", "ci_lo", "ci_hi", "B", "B_complement"];

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    format_float(p.rho),
                    format_float(p.under),
                    format_float(p.over),
                    format_float(p.ci_lo),
                    format_float(p.ci_hi),
                    p.b.to_string(),
                    p.b_complement.to_string(),
                ]
            })
            .collect()
    }

    pub fn at(&self, rho: f64) -> Option<&DeclinePoint> {
        self.points.iter().find(|p| (p.rho - rho).abs() < 1e-12)
    }
}

/// Band from per-study decline p-values at one `rho`.
pub fn band_point(rho: f64, p: &[f64], lambda: f64, confidence: f64) -> DeclinePoint {
    let m = p.len() as u64;
    let b = p.iter().filter(|&&x| x >= lambda).count() as u64;
    let b_c = p.iter().filter(|&&x| complement_pvalue(x) >= lambda).count() as u64;
    let scale = (1.0 - lambda) * m as f64;
    let (v, _) = ucb_internal(b, m, lambda, confidence);
    let (v_c, _) = ucb_internal(b_c, m, lambda, confidence);
    DeclinePoint {
        rho,
        b,
        b_complement: b_c,
        under: (1.0 - b as f64 / scale).max(0.0),
        over: (b_c as f64 / scale).min(1.0),
        ci_lo: (1.0 - v as f64 / m as f64).max(0.0),
        ci_hi: (v_c as f64 / m as f64).min(1.0),
    }
}

/// Decline estimates over `rho_grid`, grid points evaluated in parallel.
pub fn decline_band(
    pairs: &[StudyPair],
    rho_grid: &[f64],
    lambda: f64,
    confidence: f64,
) -> Result<DeclineBand> {
    if pairs.is_empty() {
        return Err(invalid("no study pairs"));
    }
    if !(lambda > 0.0 && lambda < 1.0) || !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("lambda and confidence must lie in (0, 1)"));
    }
    let points = rho_grid
        .par_iter()
        .map(|&rho| {
            let p = pairs.iter().map(|pair| decline_pvalue(pair, rho)).collect::<Result<Vec<_>>>()?;
            Ok(band_point(rho, &p, lambda, confidence))
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = points
        .windows(2)
        .all(|w| w[1].under <= w[0].under || w[1].rho < w[0].rho)
        && points.windows(2).all(|w| w[1].over <= w[0].over || w[1].rho < w[0].rho);
    if !monotone {
        log::warn!("decline estimates are not monotone in rho on this grid");
    }
    Ok(DeclineBand {
        m: pairs.len() as u64,
        lambda,
        confidence,
        points,
        monotone,
    })
}

/// Grid `start, start + step, ..., end` (inclusive, within rounding).
pub fn rho_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(start <= end) || start < 0.0 || end > 1.0 {
        return Err(invalid("rho grid needs 0 <= start <= end <= 1 and step > 0"));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| (start + i as f64 * step).min(end)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdp::replication_fdp;
    use crate::interval::IntervalSet;

    const C: f64 = 1.959_963_984_540_054;

    #[test]
    fn complement_examples() {
        assert!((complement_pvalue(0.3) - 0.7).abs() < 1e-15);
        assert_eq!(complement_pvalue(0.5), 0.5);
    }

    #[test]
    fn knife_edge() {
        let pt = band_point(0.0, &[0.5; 20], 0.5, 0.95);
        assert_eq!((pt.b, pt.b_complement), (20, 20));
        assert_eq!(pt.under, 0.0);
        assert_eq!(pt.over, 1.0);
    }

    #[test]
    fn counts_to_fractions() {
        // 15 of 46 with p >= 0.5 gives under = 1 - 30/46 = 16/46 and ci_lo = 5/46
        let mut p = vec![0.7; 15];
        p.extend(vec![0.01; 31]);
        let pt = band_point(0.0, &p, 0.5, 0.95);
        assert!((pt.under - 16.0 / 46.0).abs() < 1e-15);
        assert!((pt.ci_lo - 5.0 / 46.0).abs() < 1e-15);
        assert_eq!(pt.over, 1.0);
        assert_eq!(pt.ci_hi, 1.0);
        let mut p = vec![0.7; 18];
        p.extend(vec![0.01; 28]);
        assert!((band_point(0.25, &p, 0.5, 0.95).under - 10.0 / 46.0).abs() < 1e-15);
    }

    fn pairs() -> Vec<StudyPair> {
        let data = [(2.3, 1.9), (3.1, 0.4), (-2.5, -2.9), (4.0, 1.0), (2.1, -0.3), (-3.3, 0.2), (2.6, 2.6), (5.0, 4.2)];
        data.iter()
            .enumerate()
            .map(|(i, &(o, r))| StudyPair::from_zscores(format!("p{i}"), o, r, 1.5, 2.0, IntervalSet::two_sided(C)).unwrap())
            .collect()
    }

    #[test]
    fn band_invariants() {
        let grid = rho_grid(0.0, 1.0, 0.05).unwrap();
        assert_eq!(grid.len(), 21);
        let band = decline_band(&pairs(), &grid, 0.5, 0.95).unwrap();
        for p in &band.points {
            assert!(p.ci_lo <= p.ci_hi);
            assert!(p.under <= p.over);
            for v in [p.under, p.over, p.ci_lo, p.ci_hi] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert!(decline_band(&[], &grid, 0.5, 0.95).is_err());
    }

    #[test]
    fn rho_one_matches_replication_analysis() {
        let ps = pairs();
        let band = decline_band(&ps, &[1.0], 0.5, 0.95).unwrap();
        let p_rep: Vec<f64> = ps.iter().map(|p| crate::special::norm_sf(f64::from(p.sign) * p.z_r)).collect();
        let rep = replication_fdp(&p_rep, 0.5, 0.95).unwrap();
        let pt = band.points[0];
        assert_eq!(pt.b_complement, rep.b);
        assert_eq!(pt.over, rep.estimate);
        assert_eq!(pt.ci_hi, rep.ucb);
    }

    #[test]
    fn deterministic_under_parallelism() {
        let grid = rho_grid(0.0, 1.0, 0.05).unwrap();
        let a = decline_band(&pairs(), &grid, 0.5, 0.95).unwrap();
        let b = decline_band(&pairs(), &grid, 0.5, 0.95).unwrap();
        assert_eq!(a, b);
    }
}
