//! From-scratch convolutional network with a softmax head over the grid
//! classes (or two classes for existence prediction), trained by SGD with
//! momentum. All arithmetic runs in f64; model files store f32.

mod grad_check;
mod layers;
mod model_io;
mod network;
mod tensor;
mod train;

pub use grad_check::{grad_check, GradCheckReport};
pub use layers::{Layer, LayerSpec};
pub use model_io::{load_model, save_model};
pub use network::{
    reference_architecture, softmax, softmax_cross_entropy, Gradients, Network,
};
pub use tensor::Tensor;
pub use train::{
    predict_existence, predict_localization, prepare_augmented_samples, prepare_samples, train,
    train_samples, Task,
    TrainConfig, TrainSample,
};
