//! Toy diffusion model: schedule, denoiser, forward process, DDIM and training.

mod checkpoint;
mod net;
mod process;
mod schedule;
mod train;

pub use checkpoint::{CheckpointManifest, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use net::{Activation, DenoiserNet, ForwardCache, Layer, LatentState, ParamGrads};
pub use process::{
    ddim_invert_step, ddim_step, forward_diffuse, param_gradients, training_loss,
};
pub(crate) use process::{ddim_move, noised, squared_distance};
pub use schedule::{build_linear_schedule, NoiseSchedule, ScheduleParams};
pub use train::{
    train, train_with_observer, EpochStats, LrSchedule, ModelCheckpoint, Optimizer, TrainConfig, TrainingMeta,
};
