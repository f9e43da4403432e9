//! Fabric texture tracking and fractional thread counting.
//!
//! The geometric types are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix them to `f64`, which is what the pipeline uses.

pub mod bench;
pub mod config;
pub mod descriptor;
pub mod error;
pub mod features;
pub mod geometry;
pub mod imagecore;
pub mod lattice;
pub mod records;
pub mod scalar;
pub mod synth;
pub mod tracker;

pub use config::Config;
pub use error::{Error, Result, Stage};
pub use imagecore::GrayImage;
pub use scalar::Scalar;
pub use tracker::{FrameResult, TrackStatus, Tracker};

pub type Point = geometry::Point2<f64>;
pub type RigidTransform = geometry::RigidTransform<f64>;
pub type LatticeBasis = lattice::LatticeBasis<f64>;
pub type ThreadDelta = lattice::ThreadDelta<f64>;

pub type Point32 = geometry::Point2<f32>;
pub type RigidTransform32 = geometry::RigidTransform<f32>;
pub type LatticeBasis32 = lattice::LatticeBasis<f32>;
pub type ThreadDelta32 = lattice::ThreadDelta<f32>;
