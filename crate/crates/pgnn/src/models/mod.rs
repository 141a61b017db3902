//! The three networks: the inverse transformation network (image to
//! moisture-field estimate) and the residual regressor serving both the
//! direct image-to-label path and the second stage of the inverse path.

mod bundle;
mod inverse;
mod regressor;

pub use bundle::{load_model, save_model, ModelBundle, ModelConfig, WEIGHT_MAGIC, WEIGHT_VERSION};
pub use inverse::{InverseNet, InverseNetConfig};
pub use regressor::{RegressorConfig, RegressorNet, RegressorVariant};
