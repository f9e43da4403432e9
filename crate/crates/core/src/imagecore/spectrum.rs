use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::GrayImage;
use crate::error::{Error, Result};

/// Centered magnitude spectrum: the DC bin sits at `(width/2, height/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
}

impl Spectrum {
    /// Magnitude at signed frequency offset `(kx, ky)` from DC.
    #[inline]
    pub fn at(&self, kx: i64, ky: i64) -> f64 {
        let x = (kx + (self.width / 2) as i64).rem_euclid(self.width as i64) as usize;
        let y = (ky + (self.height / 2) as i64).rem_euclid(self.height as i64) as usize;
        self.magnitude[y * self.width + x]
    }

    pub fn dc(&self) -> f64 {
        self.at(0, 0)
    }

    /// Renders `log(1 + |F|)` normalized to 8 bits, for diagnostics.
    pub fn to_image(&self) -> GrayImage {
        let logs: Vec<f64> = self.magnitude.iter().map(|m| m.ln_1p()).collect();
        let max = logs.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        GrayImage::from_real(self.width, self.height, &logs.iter().map(|v| v / max).collect::<Vec<_>>())
            .expect("spectrum dimensions are valid")
    }
}

/// Unnormalized 2-D DFT magnitude of the real-valued view, quadrant-shifted.
pub fn fft_magnitude(img: &GrayImage) -> Result<Spectrum> {
    let n = img.width();
    if n != img.height() || !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "spectrum needs a power-of-two square, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(magnitude_spectrum(&img.real_view(), n))
}

/// Centered magnitude spectrum of an `n x n` real buffer (n a power of two).
pub(crate) fn magnitude_spectrum(values: &[f64], n: usize) -> Spectrum {
    debug_assert_eq!(values.len(), n * n);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = buf[y * n + x];
        }
        fft.process(&mut col);
        for y in 0..n {
            buf[y * n + x] = col[y];
        }
    }
    let half = n / 2;
    let mut magnitude = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let sx = (x + half) % n;
            let sy = (y + half) % n;
            magnitude[sy * n + sx] = buf[y * n + x].norm();
        }
    }
    Spectrum {
        width: n,
        height: n,
        magnitude,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cosine_image(n: usize, terms: &[(f64, f64)]) -> GrayImage {
        GrayImage::from_fn(n, n, |x, y| {
            let mut v = 0.5;
            for &(kx, ky) in terms {
                v += 0.2 * (2.0 * PI * (kx * x as f64 + ky * y as f64) / n as f64).cos();
            }
            (v * 255.0).round() as u8
        })
        .unwrap()
    }

    #[test]
    fn constant_image_is_all_dc() {
        let img = GrayImage::filled(16, 16, 51).unwrap();
        let s = fft_magnitude(&img).unwrap();
        let expected_dc = 256.0 * 51.0 / 255.0;
        assert!((s.dc() - expected_dc).abs() < 1e-9);
        for ky in -8..8 {
            for kx in -8..8 {
                if (kx, ky) != (0, 0) {
                    assert!(s.at(kx, ky).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn dc_is_sum_of_real_view() {
        let img = GrayImage::from_fn(8, 8, |x, y| (x * 13 + y * 7) as u8).unwrap();
        let s = fft_magnitude(&img).unwrap();
        let sum: f64 = img.real_view().iter().sum();
        assert!((s.dc() - sum).abs() < 1e-9);
    }

    #[test]
    fn horizontal_cosine_peaks() {
        let n = 64;
        let k = 5;
        let img = cosine_image(n, &[(k as f64, 0.0)]);
        let s = fft_magnitude(&img).unwrap();
        let mut ranked: Vec<(i64, i64, f64)> = Vec::new();
        for ky in -32..32 {
            for kx in -32..32 {
                if (kx, ky) != (0, 0) {
                    ranked.push((kx, ky, s.at(kx, ky)));
                }
            }
        }
        ranked.sort_by(|a, b| b.2.total_cmp(&a.2));
        let top: Vec<(i64, i64)> = ranked[..2].iter().map(|r| (r.0, r.1)).collect();
        assert!(top.contains(&(k, 0)) && top.contains(&(-k, 0)));
        // analytic magnitude 0.2 * n^2 / 2 (before 8-bit rounding)
        assert!((s.at(k, 0) - 0.1 * (n * n) as f64).abs() / (0.1 * (n * n) as f64) < 0.01);
    }

    #[test]
    fn plaid_has_four_peaks() {
        let n = 64;
        let img = cosine_image(n, &[(4.0, 0.0), (0.0, 9.0)]);
        let s = fft_magnitude(&img).unwrap();
        let floor = s.at(4, 0) * 0.5;
        let mut peaks = Vec::new();
        for ky in -32..32 {
            for kx in -32..32 {
                if (kx, ky) != (0, 0) && s.at(kx, ky) > floor {
                    peaks.push((kx, ky));
                }
            }
        }
        peaks.sort();
        assert_eq!(peaks, vec![(-4, 0), (0, -9), (0, 9), (4, 0)]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(fft_magnitude(&GrayImage::filled(12, 12, 0).unwrap()).is_err());
        assert!(fft_magnitude(&GrayImage::filled(16, 8, 0).unwrap()).is_err());
    }
}
