//! Rigid frame-to-frame motion: the transform type, its algebra, and the
//! MSAC estimator with a least-squares refit.

mod msac;
mod rigid;

pub use msac::{estimate_rigid, fit_rigid_least_squares, solve_two_point, MsacParams, RigidEstimate};
pub use rigid::{Point2, RigidTransform};
