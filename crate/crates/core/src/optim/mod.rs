//! Losses, the Adam optimizer, initialization and the fitting loop.

mod adam;
mod fit;
mod init;
mod loss;

pub use adam::{adam_step, clip_global_norm, OptimState, DEFAULT_LR};
pub use fit::{fit, fit_with_plugins, with_workers, write_trace_csv, FitConfig, FitResult, MaskSchedule, TraceRow};
pub use init::initialize_grid;
pub use loss::{
    composite_loss, cosine_align_loss, hidden_tv_loss, masked_recons_loss, ImageLoss, Inactive, LossParts,
    LossPlugins, LossTerm, LossWeights,
};
