//! Correlational autoencoder that learns the joint text/image space.

mod model;
mod train;

pub use model::{corr_term, corrnet_loss, corrnet_loss_grad, CorrNetParams, CORR_FLOOR};
pub use train::{
    cross_modal_neighbors, nearest_by_cosine, train_corrnet, CorrNetModel, CorrNetTrainConfig,
    CorrNetTraining,
};
