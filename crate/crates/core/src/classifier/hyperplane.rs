use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperplaneConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for HyperplaneConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 0.5,
        }
    }
}

/// Decision rule `w·z + b >= 0` means member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearHyperplane {
    pub weights: [f64; 3],
    pub bias: f64,
}

impl LinearHyperplane {
    pub fn margin(&self, z: &[f64; 3]) -> f64 {
        self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn is_member(&self, z: &[f64; 3]) -> bool {
        self.margin(z) >= 0.0
    }
}

/// Full-batch gradient descent on mean logistic loss from a zero start.
pub fn fit_hyperplane(points: &[[f64; 3]], labels: &[u8], cfg: &HyperplaneConfig) -> Result<LinearHyperplane> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::Fit("points and labels must be non-empty and equal in length".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Fit("both classes must be present".into()));
    }
    let n = points.len() as f64;
    let mut w = [0.0; 3];
    let mut b = 0.0;
    for _ in 0..cfg.epochs {
        let mut gw = [0.0; 3];
        let mut gb = 0.0;
        for (z, &y) in points.iter().zip(labels) {
            let m = w.iter().zip(z).map(|(a, x)| a * x).sum::<f64>() + b;
            let r = 1.0 / (1.0 + (-m).exp()) - f64::from(y);
            for k in 0..3 {
                gw[k] += r * z[k];
            }
            gb += r;
        }
        for k in 0..3 {
            w[k] -= cfg.learning_rate * gw[k] / n;
        }
        b -= cfg.learning_rate * gb / n;
    }
    if !(w.iter().all(|v| v.is_finite()) && b.is_finite()) {
        return Err(Error::Fit("hyperplane fit diverged".into()));
    }
    Ok(LinearHyperplane { weights: w, bias: b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_clusters() {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let j = i as f64 * 0.01;
            pts.push([1.0 + j, 0.0, j]);
            labels.push(1);
            pts.push([-1.0 - j, j, 0.0]);
            labels.push(0);
        }
        let h = fit_hyperplane(&pts, &labels, &HyperplaneConfig::default()).unwrap();
        assert!(pts.iter().zip(&labels).all(|(p, &y)| h.is_member(p) == (y == 1)));
    }
}
