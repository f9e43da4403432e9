use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::imagecore::{magnitude_spectrum, GrayImage, Spectrum};
use crate::scalar::{axis_difference_deg, wrap_axis_deg};

/// A spectral peak described by the spatial orientation it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    /// Spatial orientation in degrees, [0, 180).
    pub angle_deg: f64,
    pub magnitude: f64,
    /// Distance from DC in frequency bins (subpixel).
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantOrientations {
    pub theta_ref_1: f64,
    pub theta_ref_2: f64,
    pub peak_magnitudes: [f64; 2],
    /// Third well-separated orientation when the spectrum has one, usually
    /// the diagonal row direction of the other two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_ref_3: Option<f64>,
    pub all_peaks: Vec<SpectralPeak>,
}

const DIAGNOSTIC_PEAKS: usize = 12;
/// Peaks weaker than this fraction of the strongest one are treated as noise.
const MIN_RELATIVE_MAGNITUDE: f64 = 0.1;

/// The two strongest well-separated repeat orientations of a square
/// power-of-two image.
pub fn dominant_orientations(img: &GrayImage, mask_radius: f64, min_separation_deg: f64) -> Result<DominantOrientations> {
    let n = img.width();
    if n != img.height() || !n.is_power_of_two() || n < 8 {
        return Err(Error::invalid(format!(
            "orientation analysis needs a power-of-two square, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let spectrum = windowed_spectrum(img);
    let mut peaks = half_plane_peaks(&spectrum, mask_radius);
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));

    let strongest = peaks.first().map_or(0.0, |p| p.magnitude);
    let mut chosen: Vec<SpectralPeak> = Vec::with_capacity(3);
    for p in &peaks {
        if chosen.len() == 3 || p.magnitude < MIN_RELATIVE_MAGNITUDE * strongest {
            break;
        }
        if chosen.iter().all(|c| axis_difference_deg(c.angle_deg, p.angle_deg) >= min_separation_deg) {
            chosen.push(*p);
        }
    }
    if chosen.len() < 2 {
        return Err(Error::stage(
            Stage::DominantOrientations,
            format!("<2 peaks ({} admissible)", chosen.len()),
        ));
    }
    peaks.truncate(DIAGNOSTIC_PEAKS);
    Ok(DominantOrientations {
        theta_ref_1: chosen[0].angle_deg,
        theta_ref_2: chosen[1].angle_deg,
        peak_magnitudes: [chosen[0].magnitude, chosen[1].magnitude],
        theta_ref_3: chosen.get(2).map(|p| p.angle_deg),
        all_peaks: peaks,
    })
}

/// Mean-removed, Hann-windowed magnitude spectrum.
fn windowed_spectrum(img: &GrayImage) -> Spectrum {
    let n = img.width();
    let values = img.real_view();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let hann: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let windowed: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - mean) * hann[i % n] * hann[i / n])
        .collect();
    magnitude_spectrum(&windowed, n)
}

fn half_plane_peaks(spec: &Spectrum, mask_radius: f64) -> Vec<SpectralPeak> {
    let half = (spec.width / 2) as i64;
    // Rounding residue from mean removal is far below any real texture peak.
    let floor = 1e-9 * (spec.width * spec.height) as f64;
    let mut out = Vec::new();
    for ky in 0..half {
        for kx in -half + 1..half {
            if ky == 0 && kx <= 0 {
                continue;
            }
            if ((kx * kx + ky * ky) as f64).sqrt() <= mask_radius {
                continue;
            }
            let m = spec.at(kx, ky);
            if m <= floor {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let o = spec.at(kx + dx, ky + dy);
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if o > m || (earlier && o == m) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let fx = kx as f64 + log_parabola(spec.at(kx - 1, ky), m, spec.at(kx + 1, ky));
            let fy = ky as f64 + log_parabola(spec.at(kx, ky - 1), m, spec.at(kx, ky + 1));
            let frequency_angle = fy.atan2(fx).to_degrees();
            out.push(SpectralPeak {
                angle_deg: wrap_axis_deg(frequency_angle + 90.0),
                magnitude: m,
                radius: fx.hypot(fy),
            });
        }
    }
    out
}

/// Vertex offset of a parabola through log magnitudes.
fn log_parabola(left: f64, centre: f64, right: f64) -> f64 {
    let tiny = f64::MIN_POSITIVE;
    let (l, c, r) = (left.max(tiny).ln(), centre.max(tiny).ln(), right.max(tiny).ln());
    let den = l - 2.0 * c + r;
    if den < 0.0 {
        (0.5 * (l - r) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stripes(n: usize, period: f64, angle_deg: f64) -> impl Fn(f64, f64) -> f64 {
        // Intensity varies along the direction `angle_deg`; the stripes run
        // perpendicular to it.
        let (s, c) = angle_deg.to_radians().sin_cos();
        let _ = n;
        move |x, y| (2.0 * std::f64::consts::PI * (x * c + y * s) / period).cos()
    }

    fn render(n: usize, f: impl Fn(f64, f64) -> f64) -> GrayImage {
        GrayImage::from_fn(n, n, |x, y| (128.0 + 60.0 * f(x as f64, y as f64)).round().clamp(0.0, 255.0) as u8)
            .unwrap()
    }

    fn contains(o: &DominantOrientations, want: f64, tol: f64) -> bool {
        [o.theta_ref_1, o.theta_ref_2]
            .iter()
            .any(|&t| axis_difference_deg(t, want) <= tol)
    }

    #[test]
    fn vertical_stripes_need_a_second_axis() {
        let img = render(64, stripes(64, 8.0, 0.0));
        let err = dominant_orientations(&img, 3.0, 30.0).unwrap_err();
        assert_eq!(err.failed_stage(), Some(Stage::DominantOrientations));
    }

    #[test]
    fn vertical_stripes_peak_maps_to_ninety() {
        let img = render(64, stripes(64, 8.0, 0.0));
        let spec = windowed_spectrum(&img);
        let mut peaks = half_plane_peaks(&spec, 3.0);
        peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
        assert!(axis_difference_deg(peaks[0].angle_deg, 90.0) <= 1.0);
        assert!((peaks[0].radius - 8.0).abs() < 0.1);
    }

    #[test]
    fn plaid() {
        let a = stripes(64, 8.0, 0.0);
        let b = stripes(64, 8.0, 90.0);
        let img = render(64, |x, y| 0.5 * (a(x, y) + b(x, y)));
        let o = dominant_orientations(&img, 3.0, 30.0).unwrap();
        assert!(contains(&o, 0.0, 1.0) && contains(&o, 90.0, 1.0), "{o:?}");
    }

    #[test]
    fn rotated_plaid() {
        let a = stripes(128, 8.0, 10.0);
        let b = stripes(128, 8.0, 100.0);
        let img = render(128, |x, y| 0.5 * (a(x, y) + b(x, y)));
        let o = dominant_orientations(&img, 3.0, 30.0).unwrap();
        assert!(contains(&o, 10.0, 1.5) && contains(&o, 100.0, 1.5), "{o:?}");
    }

    #[test]
    fn third_axis_reported() {
        let (a, b, c) = (stripes(128, 8.0, 0.0), stripes(128, 8.0, 60.0), stripes(128, 8.0, 120.0));
        let img = render(128, |x, y| 0.6 * a(x, y) + 0.45 * b(x, y) + 0.3 * c(x, y));
        let o = dominant_orientations(&img, 3.0, 30.0).unwrap();
        assert!(axis_difference_deg(o.theta_ref_1, 90.0) <= 1.0 && axis_difference_deg(o.theta_ref_2, 150.0) <= 1.0, "{o:?}");
        assert!(axis_difference_deg(o.theta_ref_3.unwrap(), 30.0) <= 1.0, "{o:?}");
        let plaid = render(64, |x, y| stripes(64, 8.0, 0.0)(x, y) + stripes(64, 8.0, 90.0)(x, y));
        assert_eq!(dominant_orientations(&plaid, 3.0, 30.0).unwrap().theta_ref_3, None);
    }

    #[test]
    fn scaling_invariance() {
        let a = stripes(64, 7.0, 20.0);
        let b = stripes(64, 9.0, 95.0);
        let lo = render(64, |x, y| 0.4 * a(x, y) + 0.6 * b(x, y));
        let hi = GrayImage::from_fn(64, 64, |x, y| lo.get(x, y) / 2).unwrap();
        let ol = dominant_orientations(&lo, 3.0, 30.0).unwrap();
        let oh = dominant_orientations(&hi, 3.0, 30.0).unwrap();
        assert!(axis_difference_deg(ol.theta_ref_1, oh.theta_ref_1) < 0.5);
        assert!(axis_difference_deg(ol.theta_ref_2, oh.theta_ref_2) < 0.5);
    }

    #[test]
    fn blank_and_bad_sizes() {
        let blank = GrayImage::filled(64, 64, 77).unwrap();
        assert!(dominant_orientations(&blank, 3.0, 30.0).is_err());
        let rect = GrayImage::filled(64, 32, 0).unwrap();
        assert!(dominant_orientations(&rect, 3.0, 30.0).is_err());
        let odd = GrayImage::filled(48, 48, 0).unwrap();
        assert!(dominant_orientations(&odd, 3.0, 30.0).is_err());
    }
}
