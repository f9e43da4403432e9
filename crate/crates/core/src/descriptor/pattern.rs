use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::features::MserRegion;
use crate::imagecore::{GrayImage, IntegralImage};

pub const DESCRIPTOR_BITS: usize = 512;
const WORDS: usize = DESCRIPTOR_BITS / 64;

// Ring layout at the reference scale of 12.
const RING_RADII: [f64; 4] = [2.9, 4.9, 7.4, 10.8];
const RING_COUNTS: [usize; 4] = [10, 14, 15, 20];
const REFERENCE_SCALE: f64 = 12.0;
const LONG_PAIR_MIN: f64 = 13.67;
const TIE_EPS: f64 = 1e-7;

/// Where and at what size to describe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Pattern size; the outer ring radius is `10.8 * scale / 12`.
    pub scale: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, scale: f64) -> Self {
        Self { x, y, scale: scale.max(1.0) }
    }

    /// Keypoint at a region centroid, sized from the fitted ellipse.
    pub fn from_region(region: &MserRegion, scale_factor: f64) -> Self {
        Self::new(region.centroid.0, region.centroid.1, scale_factor * region.ellipse.mean_axis())
    }
}

/// 512 comparison bits plus the keypoint they describe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryDescriptor {
    pub bits: [u64; WORDS],
    pub keypoint: Keypoint,
}

impl BinaryDescriptor {
    pub fn zeroed(keypoint: Keypoint) -> Self {
        Self { bits: [0; WORDS], keypoint }
    }

    pub fn from_bits(bits: [u64; WORDS]) -> Self {
        Self {
            bits,
            keypoint: Keypoint::new(0.0, 0.0, 1.0),
        }
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, i: usize, on: bool) {
        if on {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn complement(&self) -> Self {
        let mut out = *self;
        for w in &mut out.bits {
            *w = !*w;
        }
        out
    }

    pub fn to_hex(&self) -> String {
        self.bits.iter().map(|w| format!("{w:016x}")).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct PatternPoint {
    x: f64,
    y: f64,
    /// Box half-size at the reference scale.
    half: f64,
}

/// The 60-point sampling pattern with its fixed pair ordering.
#[derive(Debug)]
pub struct SamplingPattern {
    points: Vec<PatternPoint>,
    short_pairs: Vec<(u8, u8)>,
    long_pairs: Vec<(u8, u8)>,
}

impl SamplingPattern {
    pub fn shared() -> &'static SamplingPattern {
        static PATTERN: OnceLock<SamplingPattern> = OnceLock::new();
        PATTERN.get_or_init(SamplingPattern::build)
    }

    fn build() -> Self {
        let mut points = vec![PatternPoint { x: 0.0, y: 0.0, half: 0.5 }];
        for (&r, &n) in RING_RADII.iter().zip(&RING_COUNTS) {
            let half = (0.85 * r * (std::f64::consts::PI / n as f64).sin()).max(0.5);
            for k in 0..n {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                points.push(PatternPoint {
                    x: r * a.cos(),
                    y: r * a.sin(),
                    half,
                });
            }
        }
        let mut pairs = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d = (points[i].x - points[j].x).hypot(points[i].y - points[j].y);
                pairs.push((d, i as u8, j as u8));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let short_pairs = pairs[..DESCRIPTOR_BITS].iter().map(|&(_, i, j)| (i, j)).collect();
        let long_pairs = pairs.iter().filter(|p| p.0 > LONG_PAIR_MIN).map(|&(_, i, j)| (i, j)).collect();
        Self {
            points,
            short_pairs,
            long_pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn short_pairs(&self) -> &[(u8, u8)] {
        &self.short_pairs
    }

    /// Distance from the keypoint beyond which no smoothing box reaches.
    pub fn reach(&self, scale: f64) -> f64 {
        let s = scale / REFERENCE_SCALE;
        self.points
            .iter()
            .map(|p| p.x.hypot(p.y) * s + (p.half * s).max(0.5))
            .fold(0.0, f64::max)
    }
}

/// Describes keypoints of one frame, sharing the frame's integral image.
pub struct Describer {
    integral: IntegralImage,
    pattern: &'static SamplingPattern,
}

impl Describer {
    pub fn new(img: &GrayImage) -> Self {
        Self {
            integral: IntegralImage::new(img),
            pattern: SamplingPattern::shared(),
        }
    }

    /// Whether the keypoint's pattern fits inside the frame.
    pub fn fits(&self, kp: &Keypoint) -> bool {
        let m = self.pattern.reach(kp.scale) + 1.0;
        kp.x - m >= 0.0
            && kp.y - m >= 0.0
            && kp.x + m <= (self.integral.width() - 1) as f64
            && kp.y + m <= (self.integral.height() - 1) as f64
    }

    pub fn describe(&self, kp: &Keypoint, oriented: bool) -> Result<BinaryDescriptor> {
        if !self.fits(kp) {
            return Err(Error::invalid(format!(
                "keypoint ({:.2}, {:.2}) scale {:.2} too close to the border",
                kp.x, kp.y, kp.scale
            )));
        }
        let angle = if oriented { self.orientation(kp) } else { 0.0 };
        let values = self.sample(kp, angle);
        let mut d = BinaryDescriptor::zeroed(*kp);
        for (k, &(i, j)) in self.pattern.short_pairs.iter().enumerate() {
            d.set_bit(k, values[i as usize] > values[j as usize] + TIE_EPS);
        }
        Ok(d)
    }

    fn sample(&self, kp: &Keypoint, angle: f64) -> Vec<f64> {
        let s = kp.scale / REFERENCE_SCALE;
        let (sin, cos) = angle.sin_cos();
        self.pattern
            .points
            .iter()
            .map(|p| {
                let (px, py) = (p.x * s, p.y * s);
                let x = kp.x + px * cos - py * sin;
                let y = kp.y + px * sin + py * cos;
                self.integral.box_mean(x, y, (p.half * s).max(0.5))
            })
            .collect()
    }

    /// Mean local gradient over long-distance pairs, in radians.
    fn orientation(&self, kp: &Keypoint) -> f64 {
        let values = self.sample(kp, 0.0);
        let s = kp.scale / REFERENCE_SCALE;
        let (mut gx, mut gy) = (0.0, 0.0);
        for &(i, j) in &self.pattern.long_pairs {
            let (pi, pj) = (&self.pattern.points[i as usize], &self.pattern.points[j as usize]);
            let (dx, dy) = ((pj.x - pi.x) * s, (pj.y - pi.y) * s);
            let w = (values[j as usize] - values[i as usize]) / (dx * dx + dy * dy);
            gx += w * dx;
            gy += w * dy;
        }
        gy.atan2(gx)
    }
}

/// Describes a single keypoint. Bits compare box-smoothed intensities of
/// the 512 shortest point pairs (strictly greater sets the bit).
pub fn describe(img: &GrayImage, kp: &Keypoint, oriented: bool) -> Result<BinaryDescriptor> {
    Describer::new(img).describe(kp, oriented)
}
