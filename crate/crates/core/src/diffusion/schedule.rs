use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance schedule of the forward process.
///
/// Index convention: `betas[t - 1]` is beta at step `t` for `t` in `1..=T`,
/// while `alpha_bar(0) == 1` and `alpha_bar(t)` is the cumulative product of
/// `1 - beta` through step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    params: ScheduleParams,
}

/// The parameters a schedule was built from; stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleParams {
    /// Linear DDPM endpoints rescaled from a 1000-step reference to `steps`.
    pub fn rescaled_linear(steps: usize) -> Self {
        let scale = 1000.0 / steps.max(1) as f64;
        Self {
            steps,
            beta_start: (1e-4 * scale).min(0.999),
            beta_end: (0.02 * scale).min(0.999),
        }
    }

    pub fn build(&self) -> Result<NoiseSchedule> {
        build_linear_schedule(self.steps, self.beta_start, self.beta_end)
    }
}

/// Linearly interpolated betas, endpoints inclusive.
pub fn build_linear_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::Schedule("step count must be at least 1".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::Schedule(format!(
            "need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )));
    }
    let betas: Vec<f64> = if steps == 1 {
        vec![beta_start]
    } else {
        (0..steps)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    NoiseSchedule::from_betas(
        betas,
        ScheduleParams {
            steps,
            beta_start,
            beta_end,
        },
    )
}

impl NoiseSchedule {
    fn from_betas(betas: Vec<f64>, params: ScheduleParams) -> Result<Self> {
        if betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(Error::Schedule("every beta must lie in (0, 1)".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(betas.len() + 1);
        alpha_bars.push(1.0);
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
            params,
        })
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn params(&self) -> ScheduleParams {
        self.params
    }

    /// Beta at step `t` in `1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// Alpha at step `t` in `1..=T`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// Cumulative product through step `t` in `0..=T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub(crate) fn check_t(&self, t: usize) -> Result<()> {
        if t > self.steps() {
            return Err(Error::contract(format!(
                "timestep {t} outside schedule range [0, {}]",
                self.steps()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_product() {
        let s = build_linear_schedule(2, 0.5, 0.5).unwrap();
        assert_eq!(s.alpha_bar(1), 0.5);
        assert_eq!(s.alpha_bar(2), 0.25);
    }

    #[test]
    fn single_step() {
        let s = build_linear_schedule(1, 0.1, 0.1).unwrap();
        assert!((s.alpha_bar(1) - 0.9).abs() < 1e-15);
        assert_eq!(s.alpha_bar(0), 1.0);
    }

    #[test]
    fn endpoints_inclusive() {
        let s = build_linear_schedule(100, 1e-4, 0.02).unwrap();
        assert_eq!(s.beta(1), 1e-4);
        assert!((s.beta(100) - 0.02).abs() < 1e-17);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(build_linear_schedule(0, 0.1, 0.2).is_err());
        assert!(build_linear_schedule(10, 0.0, 0.2).is_err());
        assert!(build_linear_schedule(10, 0.3, 0.2).is_err());
        assert!(build_linear_schedule(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn cumulative_product_matches_extended_precision() {
        // Oracle: accumulate log(1 - beta) with compensated summation.
        let s = build_linear_schedule(100, 1e-4, 0.02).unwrap();
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for i in 0..100 {
            let beta = 1e-4 + (0.02 - 1e-4) * i as f64 / 99.0;
            let y = (-beta).ln_1p() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        let oracle = sum.exp();
        assert!(((s.alpha_bar(100) - oracle) / oracle).abs() < 1e-12);
    }

    #[test]
    fn schedule_invariants() {
        for steps in [1, 2, 10, 100, 1000] {
            let p = ScheduleParams::rescaled_linear(steps);
            let s = p.build().unwrap();
            assert_eq!(s.alpha_bar(0), 1.0);
            for t in 1..=steps {
                assert!(s.beta(t) > 0.0 && s.beta(t) < 1.0);
                assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
                let rel = (s.alpha(t) * s.alpha_bar(t - 1) - s.alpha_bar(t)).abs() / s.alpha_bar(t);
                assert!(rel <= 1e-12);
            }
            assert!(s.alpha_bar(steps) > 0.0 && s.alpha_bar(steps) < 1.0);
        }
    }
}
