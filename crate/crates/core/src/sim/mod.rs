//! Simulation under the selected-publication model: selection-bias curves
//! and ground-truth harnesses for the estimators and tests.
//!
//! Every trial draws from its own ChaCha stream derived from the seed, the
//! grid point and the trial index, so results do not depend on scheduling.

mod curves;
mod harness;

pub use curves::{
    curve_ci_miss, curve_decline, curve_nonsig_same_dir, curve_type_s, example1_curves, Curve,
    CurveKind, CurvePoint,
};
pub use harness::{
    harness_coverage, harness_decline_band, harness_fdp, harness_selective_level, CoverageConfig,
    CoveragePoint, DeclineBandCoverage, FdpHarnessConfig, FdpHarnessReport, GroundTruth,
    LevelConfig, LevelPoint, MethodSummary, SelectiveTest,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::special::{norm_isf, norm_ppf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FixedTheta,
    MixedNulls,
    BoundaryDecline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub theta_grid: Vec<f64>,
    pub alpha0: f64,
    pub sigma_o: f64,
    pub sigma_r: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub scenario: Scenario,
}

impl SimConfig {
    /// Unit standard errors, `alpha0 = 0.05`, theta from 0 to 5 in steps of 0.05.
    pub fn example1(n_trials: u64, seed: u64) -> Self {
        Self {
            theta_grid: (0..=100).map(|i| i as f64 * 0.05).collect(),
            alpha0: 0.05,
            sigma_o: 1.0,
            sigma_r: 1.0,
            n_trials,
            seed,
            scenario: Scenario::FixedTheta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_grid.is_empty() {
            return Err(invalid("theta grid is empty"));
        }
        if self.theta_grid.iter().any(|t| !t.is_finite()) {
            return Err(invalid("theta grid must be finite"));
        }
        if self.n_trials == 0 {
            return Err(invalid("n_trials must be at least 1"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(invalid("alpha0 must lie in (0, 1)"));
        }
        if !(self.sigma_o > 0.0 && self.sigma_r > 0.0) {
            return Err(invalid("standard errors must be positive"));
        }
        Ok(())
    }

    /// Two-sided critical value `z_{1 - alpha0/2}`.
    pub fn critical(&self) -> f64 {
        norm_isf(self.alpha0 / 2.0)
    }
}

/// Generator for one trial: stream `(point << 32) | trial` of the seeded ChaCha8.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((point << 32) | trial);
    rng
}

/// Standard normal draw by inversion.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return norm_ppf(u);
        }
    }
}

/// Monte Carlo standard error of a proportion `p` over `n` trials.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
