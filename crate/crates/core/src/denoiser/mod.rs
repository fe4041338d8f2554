//! Toy encoder-decoder denoiser, its objectives, optimizer and training loop.
//!
//! The default distribution penalty is the exact minibatch W1 between the
//! network outputs and an unpaired clean batch, differentiated through the
//! optimal coupling held fixed. A neural critic with gradient penalty is
//! available as an alternative.

mod checkpoint;
mod critic;
mod gradcheck;
mod loss;
mod net;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC, VERSION};
pub use critic::{Critic, CriticLosses, CriticSpec};
pub use gradcheck::{check_gradient, GradCheck};
pub use loss::{loss_and_grad, minibatch_w1, w1_subgradient, LossParts, LossSpec, Objective, PenaltyMode};
pub use net::{backward, backward_batch, forward, forward_batch, forward_trace, DenoiserParams, Layer, NetSpec, ParamSlice, Shape, Trace};
pub use optim::{OptimizerSettings, RmsProp};
pub use train::{train, validate_model, EpochRecord, TrainOutcome, TrainSettings, Validation};
