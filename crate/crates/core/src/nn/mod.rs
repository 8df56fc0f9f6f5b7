//! Inference graph: encoder, time/frequency transformer blocks and the
//! parallel magnitude and phase decoders.

pub mod attention;
pub mod blocks;
pub mod config;
pub mod layers;
pub mod model;
pub mod recurrent;
pub mod tensor;
pub mod transformer;
pub mod weights;

pub use config::{ModelConfig, TaskHead};
pub use model::{enhance_batch_with, enhance_with, Enhanced, MpSeNet, NetworkOutput};
pub use tensor::FeatureMap;
pub use weights::{init_random, load_weights, param_specs, save_weights, WeightError, WeightStore};
