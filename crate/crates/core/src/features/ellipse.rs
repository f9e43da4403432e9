use serde::{Deserialize, Serialize};

use super::MserRegion;
use crate::error::{Error, Result};

/// Ellipse from second central moments. Axis lengths are `2 * sqrt(eigenvalue)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub major: f64,
    pub minor: f64,
    /// Direction of the major axis in degrees, `[0, 180)`, image coordinates (y down).
    pub orientation_deg: f64,
    /// Set when the pixel set is (nearly) collinear and the minor axis was floored.
    pub degenerate: bool,
}

impl Ellipse {
    pub const MIN_AXIS: f64 = 0.5;

    pub fn mean_axis(&self) -> f64 {
        0.5 * (self.major + self.minor)
    }
}

/// Running first and second order pixel moments.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Moments {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    pub(crate) fn from_pixels(pixels: &[(usize, usize)]) -> Self {
        let mut m = Moments::default();
        for &(x, y) in pixels {
            let (x, y) = (x as f64, y as f64);
            m.n += 1.0;
            m.sx += x;
            m.sy += y;
            m.sxx += x * x;
            m.syy += y * y;
            m.sxy += x * y;
        }
        m
    }

    pub(crate) fn centroid(&self) -> (f64, f64) {
        (self.sx / self.n, self.sy / self.n)
    }

    pub(crate) fn ellipse(&self) -> Ellipse {
        let (cx, cy) = self.centroid();
        let a = (self.sxx / self.n - cx * cx).max(0.0);
        let c = (self.syy / self.n - cy * cy).max(0.0);
        let b = self.sxy / self.n - cx * cy;
        let mid = 0.5 * (a + c);
        let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let l1 = mid + radius;
        let l2 = (mid - radius).max(0.0);
        let major = (2.0 * l1.sqrt()).max(Ellipse::MIN_AXIS);
        let raw_minor = 2.0 * l2.sqrt();
        let degenerate = raw_minor < Ellipse::MIN_AXIS;
        let minor = raw_minor.max(Ellipse::MIN_AXIS).min(major);
        let mut orientation = 0.5 * (2.0 * b).atan2(a - c).to_degrees();
        if orientation < 0.0 {
            orientation += 180.0;
        }
        if orientation >= 180.0 {
            orientation -= 180.0;
        }
        Ellipse {
            center: (cx, cy),
            major,
            minor,
            orientation_deg: orientation,
            degenerate,
        }
    }
}

/// Fits the moment ellipse of a region. Needs at least 5 pixels.
pub fn fit_ellipse(region: &MserRegion) -> Result<Ellipse> {
    if region.pixels.len() < 5 {
        return Err(Error::invalid(format!(
            "ellipse fit needs at least 5 pixels, region has {}",
            region.pixels.len()
        )));
    }
    Ok(Moments::from_pixels(&region.pixels).ellipse())
}
