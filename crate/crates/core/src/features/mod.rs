//! Semantic feature extraction, normalization + projection, and mask fusion.

mod extractor;
mod fusion;
mod projector;

pub use extractor::{extract, FeatureExtractor, PrecomputedExtractor, ToyExtractor};
pub use fusion::fuse_features;
pub use projector::{
    l2_normalize, normalize_project, ChannelProjector, DEFAULT_PROJECTED_DIM, ZERO_NORM_GUARD,
};
