//! Training, evaluation, splitting, preprocessing, and prediction.
//!
//! The inverse network trains unsupervised: its objective is how far each
//! estimated moisture field departs from steady-state diffusion, measured by
//! the squared 5-point Laplacian over interior pixels. Labels enter only in
//! the supervised regressor stage.

mod loss;
mod predict;
mod preprocess;
mod split;
mod train;

pub use loss::{
    physics_loss, physics_loss_and_grad, supervised_loss, supervised_loss_and_grad,
    PhysicsObjective,
};
pub use predict::{estimate_fields, predict_direct, predict_inverse};
pub use preprocess::{preprocess_real, rgb_to_tensor, PreprocessConfig, RoiRect};
pub use split::{stratified_split, Split};
pub use train::{
    clip01, gather_batch, images_to_tensor, mean_metrics, predict_in_batches, train_inverse,
    train_regressor, InverseTraining, RegressorTraining, TraceRow, TrainConfig,
};
