//! Selective z-tests for linear contrasts of `(Z_O, Z_R)` when `Z_O` was only
//! observed because it fell in a selection set.
//!
//! With `D = eta1 Z_O + eta2 Z_R` and the orthogonal statistic
//! `M = eta2 Z_O - eta1 Z_R`, conditioning on `M` leaves `D` normal with mean
//! `delta` and variance `|eta|^2`, truncated to the image of the selection set
//! under `z -> (|eta|^2 z - eta2 M) / eta1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interval::IntervalSet;
use crate::num::{log_add_exp, share_of, Real};
use crate::special::{norm_cdf, norm_isf};
use crate::study::StudyPair;
use crate::truncnorm::log_split;

/// Conditional support masses below this are reported as saturated.
pub const SATURATION_MASS: f64 = 1e-12;

/// Bisection tolerance for interval endpoints.
pub const ENDPOINT_TOL: f64 = 1e-9;

const CI_BRACKET_SDS: f64 = 50.0;
const PREDICTIVE_SCAN_POINTS: usize = 2000;
const PREDICTIVE_SCAN_SDS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    TwoSidedEqualTail,
    Lower,
    Upper,
}

/// Contrast `eta = (eta1, eta2)` with hypothesized value `delta`; `eta1 > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contrast<F: Real = f64> {
    pub eta1: F,
    pub eta2: F,
    pub delta: F,
    pub side: Tail,
}

impl<F: Real> Contrast<F> {
    pub fn new(eta1: F, eta2: F, delta: F, side: Tail) -> Result<Self> {
        if !(eta1 > F::zero()) || !eta1.is_finite() || !eta2.is_finite() || !delta.is_finite() {
            return Err(invalid("contrast needs finite eta with eta1 > 0"));
        }
        Ok(Self { eta1, eta2, delta, side })
    }

    fn norm_sq(&self) -> F {
        self.eta1 * self.eta1 + self.eta2 * self.eta2
    }
}

/// Observed pair of z-scores and the selection set of the original.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveProblem<F: Real = f64> {
    pub z_o: F,
    pub z_r: F,
    pub k_o: F,
    pub k_r: F,
    pub selection: IntervalSet<F>,
}

impl<F: Real> SelectiveProblem<F> {
    pub fn new(z_o: F, z_r: F, k_o: F, k_r: F, selection: IntervalSet<F>) -> Result<Self> {
        if !(k_o > F::zero() && k_r > F::zero()) || !k_o.is_finite() || !k_r.is_finite() {
            return Err(invalid("k factors must be finite and positive"));
        }
        if !z_o.is_finite() || !z_r.is_finite() {
            return Err(invalid("z-scores must be finite"));
        }
        if !selection.contains(z_o) {
            return Err(invalid(format!("z_O = {z_o} is outside the selection set")));
        }
        Ok(Self { z_o, z_r, k_o, k_r, selection })
    }

    fn with_z_r(&self, z_r: F) -> Self {
        Self { z_r, ..self.clone() }
    }
}

impl SelectiveProblem<f64> {
    /// Problem for a standardized pair; `adjusted = false` drops the selection.
    pub fn from_pair(pair: &StudyPair, adjusted: bool) -> Result<Self> {
        let selection = if adjusted { pair.selection.clone() } else { IntervalSet::full() };
        Self::new(pair.z_o, pair.z_r, pair.k_o, pair.k_r, selection)
    }
}

/// P-value and whether the conditional support was nearly massless under the null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome<F = f64> {
    pub p: F,
    pub saturated: bool,
}

/// Null law of `D` given `M`: the truncation set in `D` space and the observed `D`.
fn conditional_law<F: Real>(prob: &SelectiveProblem<F>, c: &Contrast<F>) -> Result<(F, F, IntervalSet<F>)> {
    let d = c.eta1 * prob.z_o + c.eta2 * prob.z_r;
    let m = c.eta2 * prob.z_o - c.eta1 * prob.z_r;
    let nsq = c.norm_sq();
    let support = prob.selection.affine_map(nsq / c.eta1, -c.eta2 * m / c.eta1)?;
    Ok((d, nsq.sqrt(), support))
}

/// Log masses of the conditional null below and above the observed `D`.
fn split<F: Real>(prob: &SelectiveProblem<F>, c: &Contrast<F>) -> Result<(F, F)> {
    let (d, sd, support) = conditional_law(prob, c)?;
    let (lo, hi) = log_split(&support, c.delta, sd, d);
    if lo == F::neg_infinity() && hi == F::neg_infinity() {
        return Err(Error::DegenerateProblem("conditional support has no mass".into()));
    }
    Ok((lo, hi))
}

/// Selective p-value of `H: eta' mu = delta`, with a saturation diagnostic.
pub fn selective_test<F: Real>(prob: &SelectiveProblem<F>, c: &Contrast<F>) -> Result<TestOutcome<F>> {
    let (lo, hi) = split(prob, c)?;
    let saturated = log_add_exp(lo, hi) < F::lit(SATURATION_MASS.ln());
    let p = match c.side {
        Tail::Lower => share_of(lo, hi),
        Tail::Upper => share_of(hi, lo),
        Tail::TwoSidedEqualTail => {
            let small = if lo < hi { share_of(lo, hi) } else { share_of(hi, lo) };
            (F::lit(2.0) * small).min(F::one())
        }
    };
    Ok(TestOutcome { p, saturated })
}

pub fn selective_pvalue<F: Real>(prob: &SelectiveProblem<F>, c: &Contrast<F>) -> Result<F> {
    selective_test(prob, c).map(|o| o.p)
}

/// Conditional cdf of `D` at its observed value under mean `delta`.
fn conditional_cdf<F: Real>(prob: &SelectiveProblem<F>, c: &Contrast<F>) -> Result<F> {
    let (lo, hi) = split(prob, c)?;
    Ok(share_of(lo, hi))
}

fn shift_contrast<F: Real>(prob: &SelectiveProblem<F>, delta: F) -> Result<Contrast<F>> {
    Contrast::new(F::one() / prob.k_o, -F::one() / prob.k_r, delta, Tail::TwoSidedEqualTail)
}

/// Two-sided test of `theta_O - theta_R = delta`.
pub fn shift_test<F: Real>(prob: &SelectiveProblem<F>, delta: F) -> Result<TestOutcome<F>> {
    selective_test(prob, &shift_contrast(prob, delta)?)
}

/// Two-sided shift p-value for a pair; `adjusted = false` ignores selection.
pub fn shift_pvalue(pair: &StudyPair, delta: f64, adjusted: bool) -> Result<f64> {
    shift_test(&SelectiveProblem::from_pair(pair, adjusted)?, delta).map(|o| o.p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    ThetaShift,
    ZReplication,
    EffectReplication,
}

/// Problems found while computing an interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalFlags {
    /// Conditional support nearly massless at the observed data.
    pub saturated: bool,
    /// An endpoint was not bracketed and is reported as infinite.
    pub unbounded: bool,
    /// The acceptance region was not an interval; its hull is reported.
    pub not_connected: bool,
    /// The conditional cdf was found non-monotone in `delta`.
    pub non_monotone: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate<F = f64> {
    pub lo: F,
    pub hi: F,
    pub level: F,
    pub target: Target,
    pub adjusted: bool,
    pub flags: IntervalFlags,
}

impl<F: Real> IntervalEstimate<F> {
    pub fn contains(&self, x: F) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn length(&self) -> F {
        self.hi - self.lo
    }

    /// Replication interval on the effect scale (`z / k_R`).
    pub fn to_effect_scale(&self, k: F) -> Self {
        Self {
            lo: self.lo / k,
            hi: self.hi / k,
            target: Target::EffectReplication,
            ..*self
        }
    }
}

/// Root of a decreasing function on `[lo, hi]` given `g(lo) > 0 >= g(hi)`.
fn bisect_decreasing<F: Real>(mut lo: F, mut hi: F, tol: F, g: impl Fn(F) -> Result<F>) -> Result<F> {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + (hi - lo) / F::lit(2.0);
        if g(mid)? > F::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) / F::lit(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiOptions {
    /// Grid-check monotonicity of the conditional cdf in `delta` over the bracket.
    pub check_monotone: bool,
    /// Grid step for the monotonicity check.
    pub grid_step: f64,
}

impl Default for CiOptions {
    fn default() -> Self {
        Self { check_monotone: false, grid_step: 1e-3 }
    }
}

/// Equal-tailed confidence interval for `theta_O - theta_R` by test inversion.
pub fn ci_shift_problem<F: Real>(
    prob: &SelectiveProblem<F>,
    level: F,
    adjusted: bool,
    opts: &CiOptions,
) -> Result<IntervalEstimate<F>> {
    if !(level > F::zero() && level < F::one()) {
        return Err(invalid("level must lie in (0, 1)"));
    }
    let base = shift_contrast(prob, F::zero())?;
    let (d, sd, _) = conditional_law(prob, &base)?;
    let cdf = |delta: F| conditional_cdf(prob, &Contrast { delta, ..base });
    let span = F::lit(CI_BRACKET_SDS) * sd;
    let (left, right) = (d - span, d + span);
    let mut flags = IntervalFlags {
        saturated: selective_test(prob, &base)?.saturated,
        ..Default::default()
    };

    if opts.check_monotone {
        let step = F::lit(opts.grid_step);
        let mut x = left;
        let mut prev = cdf(x)?;
        while x < right {
            x = x + step;
            let cur = cdf(x)?;
            if cur > prev + F::lit(1e-12) {
                flags.non_monotone = true;
                log::warn!("conditional cdf increases in delta near {x}");
                break;
            }
            prev = cur;
        }
    }

    let tol = F::lit(ENDPOINT_TOL);
    let two = F::lit(2.0);
    let mut endpoint = |target: F| -> Result<F> {
        let g = |delta: F| cdf(delta).map(|v| v - target);
        if g(left)? <= F::zero() {
            flags.unbounded = true;
            return Ok(F::neg_infinity());
        }
        if g(right)? > F::zero() {
            flags.unbounded = true;
            return Ok(F::infinity());
        }
        bisect_decreasing(left, right, tol, g)
    };
    let lo = endpoint((F::one() + level) / two)?;
    let hi = endpoint((F::one() - level) / two)?;
    Ok(IntervalEstimate { lo, hi, level, target: Target::ThetaShift, adjusted, flags })
}

pub fn ci_shift(pair: &StudyPair, level: f64, adjusted: bool, opts: &CiOptions) -> Result<IntervalEstimate> {
    ci_shift_problem(&SelectiveProblem::from_pair(pair, adjusted)?, level, adjusted, opts)
}

/// Set of replication z-scores the shift test at `delta = 0` would accept.
pub fn predictive_interval_problem<F: Real>(
    prob: &SelectiveProblem<F>,
    level: F,
    adjusted: bool,
) -> Result<IntervalEstimate<F>> {
    if !(level > F::zero() && level < F::one()) {
        return Err(invalid("level must lie in (0, 1)"));
    }
    let cutoff = F::one() - level;
    let accepts = |z_r: F| -> Result<bool> {
        Ok(shift_test(&prob.with_z_r(z_r), F::zero())?.p >= cutoff)
    };
    let ratio = prob.k_r / prob.k_o;
    let center = ratio * prob.z_o;
    let mut half = F::lit(PREDICTIVE_SCAN_SDS) * (F::one() + ratio * ratio).sqrt();
    let mut flags = IntervalFlags::default();

    let n = PREDICTIVE_SCAN_POINTS;
    let (grid, acc) = loop {
        let step = F::lit(2.0) * half / F::from_usize(n - 1).expect("small count");
        let grid: Vec<F> = (0..n).map(|i| center - half + step * F::from_usize(i).expect("small count")).collect();
        let acc = grid.iter().map(|&z| accepts(z)).collect::<Result<Vec<_>>>()?;
        if !(acc[0] || acc[n - 1]) || half > F::lit(1e6) {
            break (grid, acc);
        }
        half = half * F::lit(4.0);
    };
    let first = acc.iter().position(|&a| a);
    let last = acc.iter().rposition(|&a| a);
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::DegenerateProblem("no replication z-score is accepted".into())),
    };
    if acc[first..=last].iter().any(|&a| !a) {
        flags.not_connected = true;
        log::warn!("predictive acceptance region is not an interval; reporting its hull");
    }
    let tol = F::lit(ENDPOINT_TOL);
    let refine = |inside: F, outside: F| -> Result<F> {
        let (mut a, mut b) = (inside, outside);
        while (b - a).abs() > tol {
            let mid = a + (b - a) / F::lit(2.0);
            if accepts(mid)? {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(a + (b - a) / F::lit(2.0))
    };
    let lo = if first == 0 {
        flags.unbounded = true;
        F::neg_infinity()
    } else {
        refine(grid[first], grid[first - 1])?
    };
    let hi = if last == n - 1 {
        flags.unbounded = true;
        F::infinity()
    } else {
        refine(grid[last], grid[last + 1])?
    };
    flags.saturated = shift_test(prob, F::zero())?.saturated;
    Ok(IntervalEstimate { lo, hi, level, target: Target::ZReplication, adjusted, flags })
}

pub fn predictive_interval(pair: &StudyPair, level: f64, adjusted: bool) -> Result<IntervalEstimate> {
    predictive_interval_problem(&SelectiveProblem::from_pair(pair, adjusted)?, level, adjusted)
}

/// One-sided test of `H: theta_R >= (1 - rho) theta_O` (in the claimed
/// direction); small p is evidence the effect declined by more than `rho`.
///
/// The problem is first oriented so the original is positive and the
/// selection set restricted to positive values. An unrestricted (full)
/// selection set stays unrestricted.
pub fn decline_test<F: Real>(prob: &SelectiveProblem<F>, rho: F) -> Result<TestOutcome<F>> {
    if !(rho >= F::zero() && rho <= F::one()) {
        return Err(invalid(format!("rho must lie in [0, 1], got {rho}")));
    }
    let flip = prob.z_o < F::zero();
    let (z_o, z_r) = if flip { (-prob.z_o, -prob.z_r) } else { (prob.z_o, prob.z_r) };
    if rho == F::one() {
        return Ok(TestOutcome { p: norm_cdf(z_r), saturated: false });
    }
    let selection = if prob.selection.is_full() {
        IntervalSet::full()
    } else if flip {
        prob.selection.negate().positive_part()
    } else {
        prob.selection.positive_part()
    };
    let oriented = SelectiveProblem::new(z_o, z_r, prob.k_o, prob.k_r, selection)?;
    let c = Contrast::new((F::one() - rho) / prob.k_o, -F::one() / prob.k_r, F::zero(), Tail::Upper)?;
    selective_test(&oriented, &c)
}

pub fn decline_pvalue(pair: &StudyPair, rho: f64) -> Result<f64> {
    decline_test(&SelectiveProblem::from_pair(pair, true)?, rho).map(|o| o.p)
}

/// Untruncated closed-form interval `center +- z_{(1+level)/2} * sd`.
pub fn normal_interval(center: f64, sd: f64, level: f64) -> (f64, f64) {
    let q = norm_isf((1.0 - level) / 2.0);
    (center - q * sd, center + q * sd)
}
