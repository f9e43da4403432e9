//! Pixel container, image I/O, interpolation, normalized cross-correlation
//! and the centered 2-D magnitude spectrum.
//!
//! Storage is 8-bit. Correlation and spectral work runs on the real-valued
//! view `intensity / 255`.

mod gray;
mod integral;
mod io;
mod ncc;
mod spectrum;

pub use gray::GrayImage;
pub use integral::IntegralImage;
pub use io::{load_image, luminance, save_pgm, save_png};
pub use ncc::{ncc, CorrelationMap};
pub use spectrum::{fft_magnitude, Spectrum};
pub(crate) use spectrum::magnitude_spectrum;
