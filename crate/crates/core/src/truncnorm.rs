//! Normal law truncated to an [`IntervalSet`].
//!
//! All probabilities are carried as logarithms of interval masses. Masses of
//! intervals lying on one side of the mean are computed from log-survival
//! values built on the scaled complementary error function, so nothing
//! underflows even when the support sits dozens of standard deviations away
//! from the mean. Intervals straddling the mean use `erf` differences, which
//! have no cancellation there.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::interval::IntervalSet;
use crate::num::{log_add_exp, log_sub_exp, share_of, Real};
use crate::special::{erf, norm_log_pdf, norm_log_sf};

/// Supports whose mass falls below this are rejected as degenerate.
pub const MIN_SUPPORT_MASS: f64 = 1e-300;

/// `ln P(a < Z < b)` for a standard normal `Z`.
pub fn log_std_interval_mass<F: Real>(a: F, b: F) -> F {
    if !(a < b) {
        return F::neg_infinity();
    }
    if a >= F::zero() {
        log_sub_exp(norm_log_sf(a), norm_log_sf(b))
    } else if b <= F::zero() {
        log_sub_exp(norm_log_sf(-b), norm_log_sf(-a))
    } else {
        let s = F::SQRT_2();
        ((erf(b / s) - erf(a / s)) / F::lit(2.0)).ln()
    }
}

fn standardize<F: Real>(x: F, mu: F, sigma: F) -> F {
    // (+-inf - mu)/sigma stays infinite for finite mu
    (x - mu) / sigma
}

/// `ln P(X in s)` for `X ~ N(mu, sigma^2)`. Never underflows for finite inputs.
pub fn log_mass<F: Real>(s: &IntervalSet<F>, mu: F, sigma: F) -> F {
    s.intervals().iter().fold(F::neg_infinity(), |acc, &(lo, hi)| {
        log_add_exp(
            acc,
            log_std_interval_mass(standardize(lo, mu, sigma), standardize(hi, mu, sigma)),
        )
    })
}

/// `P(X in s)` for `X ~ N(mu, sigma^2)`.
pub fn mass<F: Real>(s: &IntervalSet<F>, mu: F, sigma: F) -> Result<F> {
    check_scale(mu, sigma)?;
    Ok(log_mass(s, mu, sigma).exp())
}

fn check_scale<F: Real>(mu: F, sigma: F) -> Result<()> {
    if !(sigma > F::zero()) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be finite and positive, got {sigma}")));
    }
    if !mu.is_finite() {
        return Err(invalid(format!("mu must be finite, got {mu}")));
    }
    Ok(())
}

/// Log masses of `s` below and above `x`: `(ln P(X <= x, X in s), ln P(X > x, X in s))`.
pub fn log_split<F: Real>(s: &IntervalSet<F>, mu: F, sigma: F, x: F) -> (F, F) {
    let z = standardize(x, mu, sigma);
    let mut lower = F::neg_infinity();
    let mut upper = F::neg_infinity();
    for &(lo, hi) in s.intervals() {
        let (a, b) = (standardize(lo, mu, sigma), standardize(hi, mu, sigma));
        if b <= z {
            lower = log_add_exp(lower, log_std_interval_mass(a, b));
        } else if a >= z {
            upper = log_add_exp(upper, log_std_interval_mass(a, b));
        } else {
            lower = log_add_exp(lower, log_std_interval_mass(a, z));
            upper = log_add_exp(upper, log_std_interval_mass(z, b));
        }
    }
    (lower, upper)
}

/// `N(mu, sigma^2)` conditioned on lying in `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedNormal<F: Real = f64> {
    mu: F,
    sigma: F,
    support: IntervalSet<F>,
    /// Standardized support intervals and their log masses.
    pieces: Vec<(F, F, F)>,
    log_total: F,
}

impl<F: Real> TruncatedNormal<F> {
    pub fn new(mu: F, sigma: F, support: IntervalSet<F>) -> Result<Self> {
        check_scale(mu, sigma)?;
        let pieces: Vec<(F, F, F)> = support
            .intervals()
            .iter()
            .map(|&(lo, hi)| {
                let (a, b) = (standardize(lo, mu, sigma), standardize(hi, mu, sigma));
                (a, b, log_std_interval_mass(a, b))
            })
            .collect();
        let log_total = pieces
            .iter()
            .fold(F::neg_infinity(), |acc, p| log_add_exp(acc, p.2));
        if !(log_total >= F::lit(MIN_SUPPORT_MASS.ln())) {
            return Err(Error::ZeroMass);
        }
        Ok(Self {
            mu,
            sigma,
            support,
            pieces,
            log_total,
        })
    }

    /// Untruncated `N(mu, sigma^2)`.
    pub fn untruncated(mu: F, sigma: F) -> Result<Self> {
        Self::new(mu, sigma, IntervalSet::full())
    }

    pub fn mu(&self) -> F {
        self.mu
    }

    pub fn sigma(&self) -> F {
        self.sigma
    }

    pub fn support(&self) -> &IntervalSet<F> {
        &self.support
    }

    /// Log of the untruncated probability of the support.
    pub fn log_support_mass(&self) -> F {
        self.log_total
    }

    pub fn cdf(&self, x: F) -> F {
        let (l, u) = log_split(&self.support, self.mu, self.sigma, x);
        share_of(l, u)
    }

    /// `1 - cdf(x)` without cancellation.
    pub fn sf(&self, x: F) -> F {
        let (l, u) = log_split(&self.support, self.mu, self.sigma, x);
        share_of(u, l)
    }

    pub fn log_pdf(&self, x: F) -> F {
        if !self.support.contains(x) {
            return F::neg_infinity();
        }
        let z = standardize(x, self.mu, self.sigma);
        norm_log_pdf(z) - self.sigma.ln() - self.log_total
    }

    pub fn pdf(&self, x: F) -> F {
        self.log_pdf(x).exp()
    }

    /// Inverse CDF; the result always lies in the closure of the support.
    pub fn quantile(&self, p: F) -> Result<F> {
        if !(p > F::zero() && p < F::one()) {
            return Err(invalid(format!("quantile level must lie in (0, 1), got {p}")));
        }
        let z = if p <= F::lit(0.5) {
            self.quantile_from_left(p)
        } else {
            self.quantile_from_right(F::one() - p)
        };
        Ok(self.mu + self.sigma * z)
    }

    /// Finds the standardized point with lower-tail share `p`.
    fn quantile_from_left(&self, p: F) -> F {
        let target = p.ln() + self.log_total;
        let mut before = F::neg_infinity();
        let last = self.pieces.len() - 1;
        for (j, &(a, b, lm)) in self.pieces.iter().enumerate() {
            let through = log_add_exp(before, lm);
            if through >= target || j == last {
                let local = log_sub_exp(target, before) - lm;
                return solve_in_piece(a, b, lm, local.min(F::zero()), Tail::Lower);
            }
            before = through;
        }
        unreachable!("support has at least one piece")
    }

    /// Finds the standardized point with upper-tail share `q`.
    fn quantile_from_right(&self, q: F) -> F {
        let target = q.ln() + self.log_total;
        let mut after = F::neg_infinity();
        for (j, &(a, b, lm)) in self.pieces.iter().enumerate().rev() {
            let through = log_add_exp(after, lm);
            if through >= target || j == 0 {
                let local = log_sub_exp(target, after) - lm;
                return solve_in_piece(a, b, lm, local.min(F::zero()), Tail::Upper);
            }
            after = through;
        }
        unreachable!("support has at least one piece")
    }

    /// Draws by inverting the CDF at a uniform variate from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> F {
        loop {
            let u: f64 = rng.gen();
            let u = F::lit(u);
            if u > F::zero() && u < F::one() {
                if let Ok(x) = self.quantile(u) {
                    return x;
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Tail {
    Lower,
    Upper,
}

/// Solves `ln P(a < Z < z) - lm = log_share` (lower) or
/// `ln P(z < Z < b) - lm = log_share` (upper) for `z` in `[a, b]` by
/// Newton's method safeguarded with bisection.
fn solve_in_piece<F: Real>(a: F, b: F, lm: F, log_share: F, tail: Tail) -> F {
    if log_share == F::neg_infinity() {
        return match tail {
            Tail::Lower => a,
            Tail::Upper => b,
        };
    }
    // g is increasing in z for both tails after the sign flip below.
    let g = |z: F| -> (F, F) {
        match tail {
            Tail::Lower => {
                let lmz = log_std_interval_mass(a, z);
                (lmz - lm - log_share, (norm_log_pdf(z) - lmz).exp())
            }
            Tail::Upper => {
                let lmz = log_std_interval_mass(z, b);
                (log_share - (lmz - lm), (norm_log_pdf(z) - lmz).exp())
            }
        }
    };
    let two = F::lit(2.0);
    let span = F::lit(8.0);
    let mut lo = a;
    let mut hi = b;
    if lo == F::neg_infinity() {
        lo = hi.min(F::zero()) - span;
        while g(lo).0 > F::zero() {
            lo = hi.min(F::zero()) - two * (hi.min(F::zero()) - lo);
        }
    }
    if hi == F::infinity() {
        hi = lo.max(F::zero()) + span;
        while g(hi).0 < F::zero() {
            hi = lo.max(F::zero()) + two * (hi - lo.max(F::zero()));
        }
    }
    let mut z = (lo + hi) / two;
    for _ in 0..200 {
        let (val, slope) = g(z);
        if val == F::zero() {
            return z;
        }
        if val < F::zero() {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z - val / slope;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / two
        };
        let tol = F::lit(4.0) * F::epsilon() * next.abs().max(F::one());
        if (next - z).abs() <= tol || hi - lo <= tol {
            return next;
        }
        z = next;
    }
    z
}
