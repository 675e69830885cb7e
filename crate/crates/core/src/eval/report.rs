use serde::{Deserialize, Serialize};

use super::{blind_test, compute_auc, optimize_threshold, FprBudget, ScoreSet, ThresholdRule, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub grid_size: usize,
    /// Add every distinct score to the threshold grid.
    pub augment_grid: bool,
    /// Threshold on `r = 1 - p` for classifier-based methods.
    pub classifier_tau: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            augment_grid: true,
            classifier_tau: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValMetrics {
    pub tpr_at_1pct: f64,
    pub tpr_at_01pct: f64,
    pub auc: f64,
    pub tau_1pct: f64,
    pub tau_01pct: f64,
    pub fpr_at_1pct: f64,
    pub fpr_at_01pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub tpr_1pct: f64,
    pub fpr_1pct: f64,
    pub tpr_01pct: f64,
    pub fpr_01pct: f64,
}

/// Outcome at one FPR budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetResult {
    pub percent: f64,
    pub tau: f64,
    pub val_tpr: f64,
    pub val_fpr: f64,
    pub test_tpr: f64,
    pub test_fpr: f64,
    pub infeasible: bool,
    pub over_budget: bool,
}

/// `1pct`, `01pct`, `05pct`...
pub fn budget_tag(b: FprBudget) -> String {
    format!("{}pct", b.percent().to_string().replace('.', ""))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub setup: String,
    pub val: ValMetrics,
    pub test: TestMetrics,
    /// Every evaluated budget, the two standard ones first.
    pub budgets: Vec<BudgetResult>,
    /// `fixed_threshold`, `infeasible_1pct`, `infeasible_01pct`,
    /// `over_budget_1pct`, `over_budget_01pct`.
    pub flags: Vec<String>,
}

impl EvalReport {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Selects (or fixes) thresholds on `val`, scores AUC on `val`, and applies
/// the frozen rules to `test`. The 1% and 0.1% budgets are always evaluated.
pub fn full_eval(
    val: &ScoreSet,
    test: &ScoreSet,
    classifier: bool,
    setup: &str,
    extra_budgets: &[FprBudget],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if val.method != test.method {
        return Err(Error::Eval(format!(
            "validation method {} differs from test method {}",
            val.method, test.method
        )));
    }
    let auc = compute_auc(val)?;
    let mut flags = Vec::new();
    if classifier {
        flags.push("fixed_threshold".to_string());
    }
    let mut all = vec![FprBudget::ONE_PERCENT, FprBudget::TENTH_PERCENT];
    for b in extra_budgets {
        if !all.contains(b) {
            all.push(*b);
        }
    }
    let mut results = Vec::with_capacity(all.len());
    for budget in all {
        let tag = budget_tag(budget);
        let (rule, val_tpr, val_fpr) = if classifier {
            let rule = ThresholdRule::fixed(opts.classifier_tau);
            let (tpr, fpr) = blind_test(val, &rule)?;
            (rule, tpr, fpr)
        } else {
            let o = optimize_threshold(val, budget, opts.grid_size, opts.augment_grid)?;
            if o.rule.infeasible {
                flags.push(format!("infeasible_{tag}"));
            }
            (o.rule, o.tpr, o.fpr)
        };
        let (test_tpr, test_fpr) = blind_test(test, &rule)?;
        let over_budget = test_fpr > budget.fraction();
        if over_budget {
            flags.push(format!("over_budget_{tag}"));
        }
        results.push(BudgetResult {
            percent: budget.percent(),
            tau: rule.tau,
            val_tpr,
            val_fpr,
            test_tpr,
            test_fpr,
            infeasible: rule.infeasible,
            over_budget,
        });
    }
    let (a, b) = (results[0], results[1]);
    Ok(EvalReport {
        method: val.method.clone(),
        setup: setup.to_string(),
        val: ValMetrics {
            tpr_at_1pct: a.val_tpr,
            tpr_at_01pct: b.val_tpr,
            auc,
            tau_1pct: a.tau,
            tau_01pct: b.tau,
            fpr_at_1pct: a.val_fpr,
            fpr_at_01pct: b.val_fpr,
        },
        test: TestMetrics {
            tpr_1pct: a.test_tpr,
            fpr_1pct: a.test_fpr,
            tpr_01pct: b.test_tpr,
            fpr_01pct: b.test_fpr,
        },
        budgets: results,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_val_and_test() {
        let e: Vec<(f64, u8)> = (0..40).map(|i| ((i as f64 * 0.37).sin(), (i % 2) as u8)).collect();
        let s = ScoreSet::new(e, "pia", "val").unwrap();
        let r = full_eval(&s, &s, false, "x", &[], &EvalOptions::default()).unwrap();
        assert_eq!(r.val.tpr_at_1pct, r.test.tpr_1pct);
        assert_eq!(r.val.fpr_at_1pct, r.test.fpr_1pct);
        assert!(!r.has_flag("over_budget_1pct"));
    }

    #[test]
    fn json_keys() {
        let s = ScoreSet::new(vec![(0.1, 1), (0.9, 0)], "secmi", "val").unwrap();
        let r = full_eval(&s, &s, false, "analog-a", &[FprBudget::new(5.0).unwrap()], &EvalOptions::default()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["tpr_at_1pct", "tpr_at_01pct", "auc", "tau_1pct", "tau_01pct"] {
            assert!(v["val"].get(key).is_some(), "{key}");
        }
        for key in ["tpr_1pct", "fpr_1pct", "tpr_01pct", "fpr_01pct"] {
            assert!(v["test"].get(key).is_some(), "{key}");
        }
        assert!(v["flags"].is_array());
        assert_eq!(r.budgets.len(), 3);
        assert_eq!(budget_tag(FprBudget::new(5.0).unwrap()), "5pct");
        assert_eq!(budget_tag(FprBudget::TENTH_PERCENT), "01pct");
    }
}
