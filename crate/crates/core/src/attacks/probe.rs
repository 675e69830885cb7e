use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::diffusion::{DenoiserNet, ForwardCache, ModelCheckpoint, NoiseSchedule, ParamGrads};

/// Network evaluations spent on one image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCount {
    pub forward_passes: u64,
    pub backward_passes: u64,
}

impl QueryCount {
    pub fn new(forward_passes: u64, backward_passes: u64) -> Self {
        Self {
            forward_passes,
            backward_passes,
        }
    }

    pub fn as_pair(&self) -> (u64, u64) {
        (self.forward_passes, self.backward_passes)
    }
}

/// Read-only view of a checkpoint that counts every network query.
pub(crate) struct Probe<'a> {
    pub net: &'a DenoiserNet,
    pub schedule: &'a NoiseSchedule,
    forward: Cell<u64>,
    backward: Cell<u64>,
}

impl<'a> Probe<'a> {
    pub fn new(model: &'a ModelCheckpoint) -> Self {
        Self {
            net: &model.net,
            schedule: &model.schedule,
            forward: Cell::new(0),
            backward: Cell::new(0),
        }
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.schedule.alpha_bar(t)
    }

    pub fn eps(&self, x: &[f64], t: usize) -> Vec<f64> {
        self.forward.set(self.forward.get() + 1);
        self.net.eps(x, t)
    }

    pub fn forward_cached(&self, x: &[f64], t: usize) -> ForwardCache {
        self.forward.set(self.forward.get() + 1);
        self.net.forward_cached(x, t)
    }

    /// One backward sweep through the graph formed by every cached forward
    /// pass in `parts`, i.e. the gradient of the summed objective.
    pub fn backward(&self, parts: &[(ForwardCache, Vec<f64>)]) -> ParamGrads {
        self.backward.set(self.backward.get() + 1);
        let mut grads = ParamGrads::zeros_like(self.net);
        for (cache, d_out) in parts {
            self.net.backward(cache, d_out, &mut grads);
        }
        grads
    }

    pub fn count(&self) -> QueryCount {
        QueryCount::new(self.forward.get(), self.backward.get())
    }
}
