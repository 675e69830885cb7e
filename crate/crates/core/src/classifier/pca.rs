use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-10;
const MAX_ITERS: usize = 1000;

/// Projection onto the top three principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjector {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 3],
    /// Variance captured by each component.
    pub variances: [f64; 3],
    /// Set when the data has rank below three and some components were
    /// filled in by orthonormal completion.
    pub degenerate: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // twice for numerical safety
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

#[allow(clippy::needless_range_loop)]
fn covariance(rows: &[Vec<f64>], mean: &[f64]) -> Vec<Vec<f64>> {
    let d = mean.len();
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        let c: Vec<f64> = r.iter().zip(mean).map(|(v, m)| v - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    let n = rows.len() as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= n;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Unit vector orthogonal to `basis`, tried along the coordinate axes.
fn completion(d: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    for axis in 0..d {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        orthogonalize(&mut v, basis);
        if normalize(&mut v) > 1e-6 {
            return v;
        }
    }
    vec![0.0; d]
}

#[allow(clippy::needless_range_loop)]
pub fn fit_pca3(features: &[Vec<f64>]) -> Result<PcaProjector> {
    if features.len() < 4 {
        return Err(Error::Fit(format!("PCA needs at least 4 samples, got {}", features.len())));
    }
    let d = features[0].len();
    if d < 3 || features.iter().any(|r| r.len() != d) {
        return Err(Error::Fit("PCA needs rows of equal length >= 3".into()));
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; d];
    for r in features {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = covariance(features, &mean);
    let total: f64 = (0..d).map(|i| cov[i][i]).sum();
    let floor = 1e-12 * total.max(1e-300);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(3);
    let mut variances = [0.0; 3];
    let mut degenerate = false;

    for k in 0..3 {
        // deterministic start with mass on every axis
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i as f64 + 1.0).sqrt().fract()).collect();
        orthogonalize(&mut v, &basis);
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..MAX_ITERS {
            let mut w = matvec(&cov, &v);
            orthogonalize(&mut w, &basis);
            let norm = normalize(&mut w);
            if norm <= floor {
                lambda = 0.0;
                break;
            }
            let delta = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = w;
            lambda = norm;
            if delta < TOLERANCE {
                break;
            }
        }
        if lambda <= floor {
            degenerate = true;
            v = completion(d, &basis);
            lambda = 0.0;
        } else {
            lambda = dot(&v, &matvec(&cov, &v));
        }
        // deflate
        for i in 0..d {
            for j in 0..d {
                cov[i][j] -= lambda * v[i] * v[j];
            }
        }
        variances[k] = lambda;
        basis.push(v);
    }
    let [a, b, c]: [Vec<f64>; 3] = basis.try_into().expect("three components");
    Ok(PcaProjector {
        mean,
        components: [a, b, c],
        variances,
        degenerate,
    })
}

impl PcaProjector {
    pub fn project(&self, row: &[f64]) -> [f64; 3] {
        let c: Vec<f64> = row.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        [
            dot(&c, &self.components[0]),
            dot(&c, &self.components[1]),
            dot(&c, &self.components[2]),
        ]
    }

    pub fn project_all(&self, rows: &[Vec<f64>]) -> Vec<[f64; 3]> {
        rows.iter().map(|r| self.project(r)).collect()
    }

    /// Mean squared reconstruction error using the first `k` components.
    pub fn reconstruction_error(&self, rows: &[Vec<f64>], k: usize) -> f64 {
        let k = k.min(3);
        let mut total = 0.0;
        for r in rows {
            let c: Vec<f64> = r.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
            let mut resid = c.clone();
            for comp in &self.components[..k] {
                let s = dot(&c, comp);
                resid.iter_mut().zip(comp).for_each(|(x, y)| *x -= s * y);
            }
            total += dot(&resid, &resid);
        }
        total / rows.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_variances() {
        let mut rows = Vec::new();
        for i in 0..8 {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            let t = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let u = if (i / 4) % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(vec![3.0 * s, 2.0 * t, u, 0.0]);
        }
        let p = fit_pca3(&rows).unwrap();
        assert!((p.variances[0] - 9.0).abs() < 1e-9);
        assert!((p.variances[1] - 4.0).abs() < 1e-9);
        assert!((p.variances[2] - 1.0).abs() < 1e-9);
        assert!((p.components[0][0].abs() - 1.0).abs() < 1e-9);
        assert!(!p.degenerate);
    }

    #[test]
    fn too_few_samples() {
        assert!(fit_pca3(&vec![vec![0.0; 3]; 3]).is_err());
    }
}
