use super::GrayImage;

/// Summed-area table with continuous-coordinate box means.
///
/// Pixels are treated as unit squares centered on integer coordinates, so
/// pixel `(x, y)` covers `[x-0.5, x+0.5) x [y-0.5, y+0.5)`.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    // (width + 1) x (height + 1), sums[y][x] = sum of pixels with px < x, py < y
    sums: Vec<u64>,
}

impl IntegralImage {
    pub fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut sums = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += u64::from(img.get(x, y));
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { width: w, height: h, sums }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Exact integer sum over the pixel rectangle `[x0, x1) x [y0, y1)`.
    pub fn rect_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u64 {
        let s = self.width + 1;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
    }

    // Integral over [-0.5, x) x [-0.5, y) of the piecewise-constant image,
    // bilinear between grid corners (exact for unit-square pixels).
    fn continuous(&self, x: f64, y: f64) -> f64 {
        let gx = (x + 0.5).clamp(0.0, self.width as f64);
        let gy = (y + 0.5).clamp(0.0, self.height as f64);
        let ix = (gx.floor() as usize).min(self.width.saturating_sub(1));
        let iy = (gy.floor() as usize).min(self.height.saturating_sub(1));
        let fx = gx - ix as f64;
        let fy = gy - iy as f64;
        let s = self.width + 1;
        let at = |xx: usize, yy: usize| self.sums[yy * s + xx] as f64;
        let a = at(ix, iy);
        let b = at(ix + 1, iy);
        let c = at(ix, iy + 1);
        let d = at(ix + 1, iy + 1);
        a * (1.0 - fx) * (1.0 - fy) + b * fx * (1.0 - fy) + c * (1.0 - fx) * fy + d * fx * fy
    }

    /// Mean intensity over the square of half-size `half` centered on `(x, y)`.
    pub fn box_mean(&self, x: f64, y: f64, half: f64) -> f64 {
        let area = 4.0 * half * half;
        let sum = self.continuous(x + half, y + half) - self.continuous(x - half, y + half)
            - self.continuous(x + half, y - half)
            + self.continuous(x - half, y - half);
        sum / area
    }
}
