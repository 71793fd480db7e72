//! The browsing agent: a Gaussian mixture over the joint space whose means
//! and weights depend on the recent dialog context.

mod model;
mod train;

pub use model::{
    backward_round, batch_loss, batch_loss_grad, context_mean, cosine_loss, forward_round,
    forward_with_noise, gmm_head, gumbel_softmax, sample_reparam, AgentHyper, AgentParams,
    RoundForward, RoundNoise, TrainingSample, PI_FLOOR,
};
pub use train::{
    build_training_set, decode_samples, evaluate, init_agent, is_train_session, session_samples,
    train_agent, AgentDataset, AgentTraining, QueryProjector, TRAIN_FRACTION,
};
