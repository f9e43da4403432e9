//! Static diagnostic overlays: region ellipses, matches and the lattice.

use image::{Rgb, RgbImage};
use weavetrack_core::features::MserRegion;
use weavetrack_core::geometry::Point2;
use weavetrack_core::lattice::{LatticeBasis, ThreadDelta};
use weavetrack_core::GrayImage;

const ELLIPSE: Rgb<u8> = Rgb([255, 200, 0]);
const INLIER: Rgb<u8> = Rgb([0, 230, 0]);
const OUTLIER: Rgb<u8> = Rgb([230, 0, 0]);
const AXIS_1: Rgb<u8> = Rgb([0, 160, 255]);
const AXIS_2: Rgb<u8> = Rgb([255, 0, 255]);
const NODE: Rgb<u8> = Rgb([255, 255, 255]);

pub struct Canvas(pub RgbImage);

impl Canvas {
    pub fn from_gray(img: &GrayImage) -> Self {
        let (w, h) = (img.width() as u32, img.height() as u32);
        Canvas(RgbImage::from_fn(w, h, |x, y| {
            let v = img.get(x as usize, y as usize);
            Rgb([v, v, v])
        }))
    }

    fn plot(&mut self, x: i64, y: i64, c: Rgb<u8>) {
        if x >= 0 && y >= 0 && (x as u32) < self.0.width() && (y as u32) < self.0.height() {
            self.0.put_pixel(x as u32, y as u32, c);
        }
    }

    pub fn line(&mut self, a: Point2<f64>, b: Point2<f64>, c: Rgb<u8>) {
        let (mut x0, mut y0) = (a.x.round() as i64, a.y.round() as i64);
        let (x1, y1) = (b.x.round() as i64, b.y.round() as i64);
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let mut err = dx + dy;
        loop {
            self.plot(x0, y0, c);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    pub fn cross(&mut self, p: Point2<f64>, r: f64, c: Rgb<u8>) {
        self.line(Point2::new(p.x - r, p.y), Point2::new(p.x + r, p.y), c);
        self.line(Point2::new(p.x, p.y - r), Point2::new(p.x, p.y + r), c);
    }

    pub fn ellipse(&mut self, r: &MserRegion, c: Rgb<u8>) {
        let e = &r.ellipse;
        let (s, co) = e.orientation_deg.to_radians().sin_cos();
        let at = |t: f64| {
            let (u, v) = (e.major * t.cos(), e.minor * t.sin());
            Point2::new(e.center.0 + u * co - v * s, e.center.1 + u * s + v * co)
        };
        let n = 24;
        for k in 0..n {
            let t0 = k as f64 / n as f64 * std::f64::consts::TAU;
            let t1 = (k + 1) as f64 / n as f64 * std::f64::consts::TAU;
            self.line(at(t0), at(t1), c);
        }
    }

    pub fn regions<'a>(&mut self, regions: impl IntoIterator<Item = &'a MserRegion>) {
        for r in regions {
            self.ellipse(r, ELLIPSE);
        }
    }

    /// Match vectors from the previous position to the current one.
    pub fn matches(&mut self, pairs: &[(Point2<f64>, Point2<f64>, bool)]) {
        for &(a, b, ok) in pairs {
            let c = if ok { INLIER } else { OUTLIER };
            self.line(a, b, c);
            self.plot(b.x.round() as i64, b.y.round() as i64, c);
        }
    }

    /// Lattice nodes within `reach` cells of the anchor, with both axes drawn.
    pub fn lattice(&mut self, b: &LatticeBasis<f64>, reach: i32) {
        for i in -reach..=reach {
            for j in -reach..=reach {
                self.cross(b.anchor.add(b.reconstruct(ThreadDelta::new(i as f64, j as f64))), 1.0, NODE);
            }
        }
        self.line(b.anchor, b.anchor.add(b.v1), AXIS_1);
        self.line(b.anchor, b.anchor.add(b.v2), AXIS_2);
    }

    pub fn save(&self, path: &std::path::Path) -> anyhow::Result<()> {
        self.0.save(path)?;
        Ok(())
    }
}
