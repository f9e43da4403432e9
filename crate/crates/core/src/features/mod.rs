//! Blob detection: MSER over a union-find component tree, moment-based
//! ellipse fitting, and the individual/grouping blob split.

mod classify;
mod ellipse;
mod mser;

pub use classify::{classify_blobs, BlobClasses};
pub use ellipse::{fit_ellipse, Ellipse};
pub use mser::{detect_mser, detect_mser_unchecked, MserParams, MserRegion, Polarity, RegionPolarity};
