use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::probe::QueryCount;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "secmi")]
    SecMi,
    #[serde(rename = "secmi++")]
    SecMiPlusPlus,
    #[serde(rename = "pia")]
    Pia,
    #[serde(rename = "pfami")]
    Pfami,
    #[serde(rename = "gsa1")]
    Gsa1,
    #[serde(rename = "gsa2")]
    Gsa2,
    #[serde(rename = "blind")]
    Blind,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::SecMi,
        Method::SecMiPlusPlus,
        Method::Pia,
        Method::Pfami,
        Method::Gsa1,
        Method::Gsa2,
        Method::Blind,
    ];

    /// The six methods of the standard benchmark table.
    pub const BENCHMARK: [Method; 6] = [
        Method::SecMi,
        Method::Pia,
        Method::Pfami,
        Method::Gsa1,
        Method::Gsa2,
        Method::Blind,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::SecMi => "secmi",
            Method::SecMiPlusPlus => "secmi++",
            Method::Pia => "pia",
            Method::Pfami => "pfami",
            Method::Gsa1 => "gsa1",
            Method::Gsa2 => "gsa2",
            Method::Blind => "blind",
        }
    }

    /// Methods that emit feature vectors for a downstream classifier rather
    /// than a thresholded score.
    pub fn is_classifier(self) -> bool {
        matches!(self, Method::Gsa1 | Method::Gsa2 | Method::Blind)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::config(format!("unknown attack method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfamiParams {
    /// Number of cropped neighbours per image.
    pub neighbors: usize,
    /// Range of crop area fractions, sampled uniformly.
    pub strength_interval: (f64, f64),
    /// Reuse one noise draw per timestep across the image and its neighbours.
    pub shared_noise: bool,
}

impl Default for PfamiParams {
    fn default() -> Self {
        Self {
            neighbors: 10,
            strength_interval: (0.75, 0.9),
            shared_noise: true,
        }
    }
}

/// Everything an attack needs besides the model and the image.
///
/// `grid` is interpreted per method: SecMI inversion nodes (an implicit start
/// at 0, ending at the scored timestep), PIA loss timesteps, PFAMI loss
/// timesteps, or GSA gradient timesteps. Blind ignores it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub method: Method,
    pub grid: Vec<usize>,
    #[serde(default)]
    pub pfami: PfamiParams,
    pub seed: u64,
}

fn frac(steps: usize, f: f64) -> usize {
    (f * steps as f64).round() as usize
}

impl AttackConfig {
    /// Default grids, written as fractions of the step count `steps`.
    pub fn default_for(method: Method, steps: usize, seed: u64) -> Self {
        let grid = match method {
            Method::SecMi | Method::SecMiPlusPlus => (1..=frac(steps, 0.05).max(1)).collect(),
            Method::Pia => {
                let mut g: Vec<usize> = (0..50).map(|k| frac(steps, 0.01 * k as f64)).collect();
                g.dedup();
                g
            }
            Method::Pfami => {
                let mut g: Vec<usize> = (1..=20).map(|k| frac(steps, 0.05 * k as f64).max(1)).collect();
                g.dedup();
                g
            }
            Method::Gsa1 | Method::Gsa2 => {
                let mut g: Vec<usize> = (0..=20).map(|k| frac(steps, k as f64 / 20.0)).collect();
                g.dedup();
                g
            }
            Method::Blind => Vec::new(),
        };
        Self {
            method,
            grid,
            pfami: PfamiParams::default(),
            seed,
        }
    }

    /// Checks the grid and parameters against a schedule with `steps` steps.
    pub fn validate(&self, steps: usize) -> Result<()> {
        let err = |msg: String| Err(Error::config(format!("{}: {msg}", self.method)));
        if let Some(t) = self.grid.iter().find(|&&t| t > steps) {
            return err(format!("timestep {t} outside [0, {steps}]"));
        }
        match self.method {
            Method::SecMi | Method::SecMiPlusPlus => {
                let nodes = self.secmi_nodes();
                if nodes.len() < 2 {
                    return err("inversion grid needs at least one step".into());
                }
                if nodes.windows(2).any(|w| w[0] >= w[1]) {
                    return err("inversion grid must be strictly ascending from 0".into());
                }
            }
            Method::Pia | Method::Gsa1 | Method::Gsa2 => {
                if self.grid.is_empty() {
                    return err("timestep grid is empty".into());
                }
            }
            Method::Pfami => {
                if self.grid.is_empty() {
                    return err("loss grid is empty".into());
                }
                if self.pfami.neighbors == 0 {
                    return err("neighbour count must be at least 1".into());
                }
                let (lo, hi) = self.pfami.strength_interval;
                if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                    return err(format!("strength interval ({lo}, {hi}) must lie in (0, 1]"));
                }
            }
            Method::Blind => {}
        }
        Ok(())
    }

    /// SecMI inversion nodes with the starting node 0 made explicit.
    pub(crate) fn secmi_nodes(&self) -> Vec<usize> {
        let mut nodes = vec![0];
        nodes.extend(self.grid.iter().copied().skip_while(|&t| t == 0));
        nodes
    }

    /// Number of inversion steps SecMI takes.
    pub fn secmi_steps(&self) -> usize {
        self.secmi_nodes().len() - 1
    }
}

/// Analytic per-image query cost of an attack configuration.
pub fn attack_query_count(cfg: &AttackConfig) -> QueryCount {
    let g = cfg.grid.len() as u64;
    match cfg.method {
        Method::SecMi | Method::SecMiPlusPlus => QueryCount::new(2 * cfg.secmi_steps() as u64, 0),
        Method::Pia => QueryCount::new(g + 1, 0),
        Method::Pfami => QueryCount::new((cfg.pfami.neighbors as u64 + 1) * g, 0),
        Method::Gsa1 => QueryCount::new(g, 1),
        Method::Gsa2 => QueryCount::new(g, g),
        Method::Blind => QueryCount::new(0, 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_ids_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
        }
        assert!("lira".parse::<Method>().is_err());
    }

    #[test]
    fn default_grids_at_reference_scale() {
        let secmi = AttackConfig::default_for(Method::SecMi, 1000, 1);
        assert_eq!(secmi.secmi_steps(), 50);
        assert_eq!(*secmi.grid.last().unwrap(), 50);
        let pia = AttackConfig::default_for(Method::Pia, 1000, 1);
        assert_eq!(pia.grid.first(), Some(&0));
        assert_eq!(pia.grid.last(), Some(&490));
        assert_eq!(pia.grid.len(), 50);
        let gsa = AttackConfig::default_for(Method::Gsa1, 1000, 1);
        assert_eq!(gsa.grid.len(), 21);
        assert_eq!((gsa.grid[0], gsa.grid[20]), (0, 1000));
    }

    #[test]
    fn default_grids_at_toy_scale() {
        let secmi = AttackConfig::default_for(Method::SecMi, 100, 1);
        assert_eq!(secmi.grid, vec![1, 2, 3, 4, 5]);
        let pia = AttackConfig::default_for(Method::Pia, 100, 1);
        assert_eq!(pia.grid, (0..50).collect::<Vec<_>>());
        for m in Method::ALL {
            AttackConfig::default_for(m, 100, 1).validate(100).unwrap();
        }
    }

    #[test]
    fn validation_errors() {
        let mut c = AttackConfig::default_for(Method::SecMi, 100, 1);
        c.grid = vec![3, 2];
        assert!(c.validate(100).is_err());
        c.grid = vec![0];
        assert!(c.validate(100).is_err());
        c.grid = vec![0, 5, 200];
        assert!(c.validate(100).is_err());
        let mut p = AttackConfig::default_for(Method::Pfami, 100, 1);
        p.pfami.neighbors = 0;
        assert!(matches!(p.validate(100), Err(Error::Config(_))));
        p.pfami.neighbors = 2;
        p.pfami.strength_interval = (0.0, 0.5);
        assert!(p.validate(100).is_err());
    }

    #[test]
    fn leading_zero_in_secmi_grid_is_the_start_node() {
        let mut c = AttackConfig::default_for(Method::SecMi, 100, 1);
        c.grid = vec![0, 2, 4];
        assert_eq!(c.secmi_nodes(), vec![0, 2, 4]);
        assert_eq!(attack_query_count(&c), QueryCount::new(4, 0));
    }

    #[test]
    fn query_formulas() {
        let mut c = AttackConfig::default_for(Method::SecMi, 1000, 1);
        assert_eq!(attack_query_count(&c).as_pair(), (100, 0));
        c.method = Method::Pia;
        c.grid = (0..50).map(|k| 10 * k).collect();
        assert_eq!(attack_query_count(&c).as_pair(), (51, 0));
        c.method = Method::Pfami;
        c.grid = (1..=100).map(|k| 10 * k).collect();
        assert_eq!(attack_query_count(&c).as_pair(), (1100, 0));
        c.method = Method::Gsa1;
        c.grid = (1..=20).map(|k| 50 * k).collect();
        assert_eq!(attack_query_count(&c).as_pair(), (20, 1));
        c.method = Method::Gsa2;
        assert_eq!(attack_query_count(&c).as_pair(), (20, 20));
    }
}
