//! Concentric-ring binary descriptors at blob centroids and mutual
//! nearest-neighbour Hamming matching.

mod matching;
mod pattern;

pub use matching::{hamming, match_features, Match};
pub use pattern::{describe, BinaryDescriptor, Describer, Keypoint, SamplingPattern, DESCRIPTOR_BITS};
