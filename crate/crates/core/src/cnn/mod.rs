//! Siamese convolutional matching cost.
//!
//! Both images go through the same four-layer network (shared weights). The
//! per-pixel outputs are scaled to unit length and the matching cost of a
//! pixel pair is the negated dot product of their features, so identical
//! patches cost `-1` and opposite features cost `+1`. Weights are learned
//! from patch triples with a margin hinge loss.

mod features;
mod layer;
mod loss;
mod network;
mod scalar;
mod train;
mod weights;

pub use features::{cnn_cost_volume, forward_features, FeatureGrid, CNN_BORDER_COST};
pub use layer::{ConvLayer, KERNEL_SIZE};
pub use loss::{hinge, hinge_loss, PatchTriple, TripleLoss};
pub use network::{
    FeatureNetwork, DEFAULT_WIDTHS, FEATURE_MARGIN, MIN_FEATURE_NORM, NUM_LAYERS, PATCH_LEN,
    RECEPTIVE_FIELD,
};
pub use scalar::Scalar;
pub use train::{mean_loss, train, train_with_progress, TrainConfig, TrainReport};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC};
