//! Threshold selection on validation scores, blind application on test
//! scores, and rank-based AUC. A sample is predicted member iff `r <= tau`.

mod report;

pub use report::{budget_tag, full_eval, BudgetResult, EvalOptions, EvalReport, TestMetrics, ValMetrics};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 10_000;

/// Scores with membership labels (1 = member) for one method on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub entries: Vec<(f64, u8)>,
    pub method: String,
    pub split: String,
}

impl ScoreSet {
    pub fn new(entries: Vec<(f64, u8)>, method: impl Into<String>, split: impl Into<String>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Eval("empty score set".into()));
        }
        if let Some((r, y)) = entries.iter().find(|(r, y)| !r.is_finite() || *y > 1) {
            return Err(Error::Eval(format!("invalid score entry ({r}, {y})")));
        }
        Ok(Self {
            entries,
            method: method.into(),
            split: split.into(),
        })
    }

    /// Sorted member and non-member scores.
    fn by_class(&self) -> (Vec<f64>, Vec<f64>) {
        let mut members = Vec::new();
        let mut nonmembers = Vec::new();
        for &(r, y) in &self.entries {
            if y == 1 { members.push(r) } else { nonmembers.push(r) }
        }
        members.sort_by(f64::total_cmp);
        nonmembers.sort_by(f64::total_cmp);
        (members, nonmembers)
    }

    fn both_classes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (m, n) = self.by_class();
        if m.is_empty() || n.is_empty() {
            return Err(Error::Eval(format!(
                "{} {} needs members and non-members ({} / {})",
                self.method,
                self.split,
                m.len(),
                n.len()
            )));
        }
        Ok((m, n))
    }
}

/// False-positive budget in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FprBudget(f64);

impl FprBudget {
    pub const ONE_PERCENT: FprBudget = FprBudget(1.0);
    pub const TENTH_PERCENT: FprBudget = FprBudget(0.1);

    pub fn new(x_percent: f64) -> Result<Self> {
        if !(x_percent > 0.0 && x_percent < 100.0) {
            return Err(Error::config(format!("FPR budget must lie in (0, 100) percent, got {x_percent}")));
        }
        Ok(Self(x_percent))
    }

    pub fn percent(self) -> f64 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        self.0 / 100.0
    }

    /// Whether `fp` false positives out of `neg` stay within the budget.
    pub fn admits(self, fp: usize, neg: usize) -> bool {
        (fp as f64) * 100.0 <= self.0 * neg as f64 * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub tau: f64,
    /// No candidate met the budget; `tau` sits below every score.
    pub infeasible: bool,
}

impl ThresholdRule {
    pub fn fixed(tau: f64) -> Self {
        Self { tau, infeasible: false }
    }

    pub fn is_member(&self, r: f64) -> bool {
        r <= self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOutcome {
    pub tpr: f64,
    pub fpr: f64,
    pub rule: ThresholdRule,
}

fn count_le(sorted: &[f64], tau: f64) -> usize {
    sorted.partition_point(|&v| v <= tau)
}

/// Candidate thresholds: `grid_size + 1` evenly spaced values over the score
/// range, optionally joined by every distinct score.
pub fn threshold_candidates(scores: &ScoreSet, grid_size: usize, augment: bool) -> Vec<f64> {
    let (lo, hi) = scores
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (r, _)| (lo.min(*r), hi.max(*r)));
    let mut out: Vec<f64> = if grid_size == 0 || lo == hi {
        vec![lo]
    } else {
        (0..=grid_size)
            .map(|i| if i == grid_size { hi } else { lo + (hi - lo) * i as f64 / grid_size as f64 })
            .collect()
    };
    if augment {
        out.extend(scores.entries.iter().map(|(r, _)| *r));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Highest-TPR threshold whose validation FPR fits the budget; ties go to the
/// smallest threshold.
pub fn optimize_threshold(
    scores: &ScoreSet,
    budget: FprBudget,
    grid_size: usize,
    augment: bool,
) -> Result<ThresholdOutcome> {
    let (members, nonmembers) = scores.both_classes()?;
    let mut best: Option<(usize, usize, f64)> = None;
    for tau in threshold_candidates(scores, grid_size, augment) {
        let fp = count_le(&nonmembers, tau);
        if !budget.admits(fp, nonmembers.len()) {
            // counts only grow with tau
            break;
        }
        let tp = count_le(&members, tau);
        if best.is_none_or(|(best_tp, _, _)| tp > best_tp) {
            best = Some((tp, fp, tau));
        }
    }
    let lo = members[0].min(nonmembers[0]);
    let outcome = match best {
        Some((tp, fp, tau)) => ThresholdOutcome {
            tpr: tp as f64 / members.len() as f64,
            fpr: fp as f64 / nonmembers.len() as f64,
            rule: ThresholdRule { tau, infeasible: false },
        },
        None => ThresholdOutcome {
            tpr: 0.0,
            fpr: 0.0,
            rule: ThresholdRule {
                tau: lo - 1e-9 * lo.abs().max(1.0),
                infeasible: true,
            },
        },
    };
    assert!(
        budget.admits((outcome.fpr * nonmembers.len() as f64).round() as usize, nonmembers.len()),
        "selected threshold violates the FPR budget"
    );
    Ok(outcome)
}

/// `(TPR, FPR)` of a frozen rule.
pub fn blind_test(scores: &ScoreSet, rule: &ThresholdRule) -> Result<(f64, f64)> {
    let (mut tp, mut pos, mut fp, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for &(r, y) in &scores.entries {
        let hit = usize::from(rule.is_member(r));
        if y == 1 {
            pos += 1;
            tp += hit;
        } else {
            neg += 1;
            fp += hit;
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::Eval(format!(
            "rates undefined for {} {}: {pos} members, {neg} non-members",
            scores.method, scores.split
        )));
    }
    Ok((tp as f64 / pos as f64, fp as f64 / neg as f64))
}

/// Probability that a member scores below a non-member, ties counted half.
pub fn compute_auc(scores: &ScoreSet) -> Result<f64> {
    let (members, nonmembers) = scores.both_classes()?;
    let mut all: Vec<(f64, u8)> = scores.entries.clone();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // average 1-based ranks over tie groups
    let mut rank_sum_nonmembers = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_nonmembers += avg * all[i..=j].iter().filter(|e| e.1 == 0).count() as f64;
        i = j + 1;
    }
    let (m, n) = (members.len() as f64, nonmembers.len() as f64);
    let u = rank_sum_nonmembers - n * (n + 1.0) / 2.0;
    Ok(u / (m * n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(members: &[f64], nonmembers: &[f64]) -> ScoreSet {
        let mut e: Vec<(f64, u8)> = members.iter().map(|&r| (r, 1)).collect();
        e.extend(nonmembers.iter().map(|&r| (r, 0)));
        ScoreSet::new(e, "m", "val").unwrap()
    }

    #[test]
    fn separated_scores() {
        let s = set(&[0.1, 0.2], &[0.8, 0.9]);
        let o = optimize_threshold(&s, FprBudget::ONE_PERCENT, DEFAULT_GRID_SIZE, true).unwrap();
        assert_eq!(o.tpr, 1.0);
        assert!(o.rule.tau >= 0.2 && o.rule.tau < 0.8);
        assert_eq!(o.rule.tau, 0.2);
        assert_eq!(compute_auc(&s).unwrap(), 1.0);
    }

    #[test]
    fn anti_separated_scores() {
        let s = set(&[0.8, 0.9], &[0.1, 0.2]);
        let o = optimize_threshold(&s, FprBudget::ONE_PERCENT, DEFAULT_GRID_SIZE, true).unwrap();
        assert_eq!(o.tpr, 0.0);
        assert!(o.rule.infeasible && o.rule.tau < 0.1);
        assert_eq!(compute_auc(&s).unwrap(), 0.0);
    }

    #[test]
    fn constant_scores() {
        let s = set(&[1.0; 5], &[1.0; 5]);
        assert_eq!(compute_auc(&s).unwrap(), 0.5);
        let o = optimize_threshold(&s, FprBudget::ONE_PERCENT, DEFAULT_GRID_SIZE, true).unwrap();
        assert!(o.rule.infeasible && o.tpr == 0.0);
    }

    #[test]
    fn budget_bounds() {
        assert!(FprBudget::new(0.0).is_err() && FprBudget::new(100.0).is_err());
        assert!(FprBudget::TENTH_PERCENT.admits(1, 1000));
        assert!(!FprBudget::TENTH_PERCENT.admits(2, 1000));
    }

    #[test]
    fn blind_below_everything() {
        let s = set(&[0.3], &[0.5]);
        assert_eq!(blind_test(&s, &ThresholdRule::fixed(0.0)).unwrap(), (0.0, 0.0));
        assert!(blind_test(&set(&[0.3], &[]), &ThresholdRule::fixed(0.0)).is_err());
    }
}
