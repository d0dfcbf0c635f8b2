//! Small CNNs with batch norm, trained with Adam on softmax cross-entropy.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod model;
pub mod spec;
pub mod tensor;
pub mod train;
pub mod weights;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CNNM_MAGIC};
pub use model::{Gradients, Mode, Model};
pub use spec::{LayerSpec, ModelKind, ModelSpec, Shape};
pub use tensor::Tensor4;
pub use train::{evaluate, train, train_from, Dataset, EpochMetrics, TrainConfig, TrainHistory};
pub use weights::{dump_first_layer_weights, uniformity, KernelGrid};
