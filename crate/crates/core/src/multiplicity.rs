//! Benjamini–Hochberg and Holm corrections over per-study p-values.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Bh,
    Holm,
}

impl Procedure {
    pub fn as_str(self) -> &'static str {
        match self {
            Procedure::Bh => "bh",
            Procedure::Holm => "holm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityDecision {
    pub procedure: Procedure,
    pub level: f64,
    /// Rejected ids in increasing p-value order (ties by id).
    pub rejected_ids: Vec<String>,
    /// Largest p-value cutoff that was met; 0 when nothing is rejected.
    pub threshold_used: f64,
}

impl MultiplicityDecision {
    pub fn is_rejected(&self, id: &str) -> bool {
        self.rejected_ids.iter().any(|r| r == id)
    }
}

fn sorted(pvals: &[(String, f64)]) -> Result<Vec<(&str, f64)>> {
    if let Some((id, p)) = pvals.iter().find(|(_, p)| !(*p > 0.0 && *p <= 1.0)) {
        return Err(invalid(format!("p-value for {id} must lie in (0, 1], got {p}")));
    }
    let mut v: Vec<(&str, f64)> = pvals.iter().map(|(id, p)| (id.as_str(), *p)).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    Ok(v)
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Step-up procedure: reject the `i*` smallest, `i* = max{i : p_(i) <= i q / m}`.
pub fn bh(pvals: &[(String, f64)], q: f64) -> Result<MultiplicityDecision> {
    check_level(q)?;
    let v = sorted(pvals)?;
    let m = v.len() as f64;
    let cut = v
        .iter()
        .enumerate()
        .filter(|(i, (_, p))| *p <= (*i + 1) as f64 * q / m)
        .map(|(i, _)| i + 1)
        .next_back()
        .unwrap_or(0);
    // tied p-values share fate
    let (count, threshold) = if cut == 0 {
        (0, 0.0)
    } else {
        let t = cut as f64 * q / m;
        (v.iter().take_while(|(_, p)| *p <= v[cut - 1].1).count(), t)
    };
    Ok(MultiplicityDecision {
        procedure: Procedure::Bh,
        level: q,
        rejected_ids: v[..count].iter().map(|(id, _)| id.to_string()).collect(),
        threshold_used: threshold,
    })
}

/// Step-down: reject `p_(i)` while `p_(i) <= alpha / (m - i + 1)`.
pub fn holm(pvals: &[(String, f64)], alpha: f64) -> Result<MultiplicityDecision> {
    check_level(alpha)?;
    let v = sorted(pvals)?;
    let m = v.len();
    let mut count = 0;
    let mut threshold = 0.0;
    while count < m {
        let t = alpha / (m - count) as f64;
        if v[count].1 > t {
            break;
        }
        threshold = t;
        count += 1;
    }
    // a tie straddling the stopping point is not rejected
    if count < m && count > 0 && v[count].1 == v[count - 1].1 {
        let p = v[count].1;
        count = v[..count].iter().take_while(|(_, q)| *q < p).count();
        threshold = if count == 0 { 0.0 } else { alpha / (m - count + 1) as f64 };
    }
    Ok(MultiplicityDecision {
        procedure: Procedure::Holm,
        level: alpha,
        rejected_ids: v[..count].iter().map(|(id, _)| id.to_string()).collect(),
        threshold_used: threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn named(ps: &[f64]) -> Vec<(String, f64)> {
        ps.iter().enumerate().map(|(i, &p)| (format!("s{i:03}"), p)).collect()
    }

    #[test]
    fn bh_examples() {
        let d = bh(&named(&[0.01, 0.02, 0.04]), 0.05).unwrap();
        assert_eq!(d.rejected_ids.len(), 3);
        assert!((d.threshold_used - 0.05).abs() < 1e-15);
        assert!(bh(&named(&[1.0, 1.0]), 0.1).unwrap().rejected_ids.is_empty());
        // step-up: a later pass rescues earlier failures
        let d = bh(&named(&[0.03, 0.035, 0.036]), 0.05).unwrap();
        assert_eq!(d.rejected_ids.len(), 3);
    }

    #[test]
    fn holm_examples() {
        let d = holm(&named(&[0.01, 0.2]), 0.05).unwrap();
        assert_eq!(d.rejected_ids, vec!["s000".to_string()]);
        assert_eq!(d.threshold_used, 0.025);
        let d = holm(&named(&[0.03, 0.035]), 0.05).unwrap();
        assert!(d.rejected_ids.is_empty());
    }

    #[test]
    fn ties_share_fate() {
        let d = holm(&named(&[0.02, 0.02, 0.5]), 0.05).unwrap();
        assert!(d.rejected_ids.is_empty());
        let d = bh(&named(&[0.01, 0.04, 0.04, 0.9]), 0.1).unwrap();
        assert_eq!(d.rejected_ids.len(), 3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(bh(&named(&[0.0]), 0.1).is_err());
        assert!(holm(&named(&[0.5]), 1.5).is_err());
    }

    proptest! {
        #[test]
        fn holm_subset_of_bh(ps in proptest::collection::vec(1e-6..1.0f64, 1..60), q in 0.01..0.3f64) {
            let p = named(&ps);
            let h = holm(&p, q).unwrap();
            let b = bh(&p, q).unwrap();
            for id in &h.rejected_ids {
                prop_assert!(b.is_rejected(id));
            }
        }

        #[test]
        fn down_set_and_monotone(ps in proptest::collection::vec(1e-6..1.0f64, 1..40), i in 0usize..40, f in 0.0..1.0f64) {
            let p = named(&ps);
            for proc in [bh, holm] {
                let d = proc(&p, 0.1).unwrap();
                let max_rej = p.iter().filter(|(id, _)| d.is_rejected(id)).map(|x| x.1).fold(0.0, f64::max);
                for (id, x) in &p {
                    if *x < max_rej {
                        prop_assert!(d.is_rejected(id));
                    }
                }
                // lowering one p-value keeps every rejection
                let mut lower = p.clone();
                let j = i % lower.len();
                lower[j].1 = (lower[j].1 * f).max(1e-9);
                let d2 = proc(&lower, 0.1).unwrap();
                for id in &d.rejected_ids {
                    prop_assert!(d2.is_rejected(id));
                }
            }
        }

        #[test]
        fn permutation_invariant(ps in proptest::collection::vec(1e-6..1.0f64, 1..40), seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let p = named(&ps);
            let mut shuffled = p.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            for proc in [bh, holm] {
                prop_assert_eq!(proc(&p, 0.1).unwrap(), proc(&shuffled, 0.1).unwrap());
            }
        }
    }
}
