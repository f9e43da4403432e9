use super::{GrayImage, IntegralImage};
use crate::error::{Error, Result};

/// Normalized cross-correlation scores, one per valid template placement.
///
/// Entry `(u, v)` scores the template with its top-left corner at image
/// pixel `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl CorrelationMap {
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    /// Placement with the highest score; earliest in raster order on ties.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for v in 0..self.height {
            for u in 0..self.width {
                let s = self.get(u, v);
                if s > best.2 {
                    best = (u, v, s);
                }
            }
        }
        best
    }
}

/// Zero-mean normalized cross-correlation of `template` over `img`.
///
/// Placements where the image window is flat score 0.
pub fn ncc(img: &GrayImage, template: &GrayImage) -> Result<CorrelationMap> {
    let (iw, ih) = (img.width(), img.height());
    let (tw, th) = (template.width(), template.height());
    if tw > iw || th > ih {
        return Err(Error::invalid(format!("template {tw}x{th} larger than image {iw}x{ih}")));
    }
    if template.is_constant() {
        return Err(Error::invalid("template has zero intensity variance"));
    }

    let n = (tw * th) as f64;
    let t_mean = template.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let t_zero: Vec<f64> = template.data().iter().map(|&v| f64::from(v) - t_mean).collect();
    let t_norm = t_zero.iter().map(|v| v * v).sum::<f64>().sqrt();

    let sums = IntegralImage::new(img);
    let squares = squared_sums(img);
    let (ow, oh) = (iw - tw + 1, ih - th + 1);
    let mut values = Vec::with_capacity(ow * oh);
    let count = (tw * th) as u128;
    let data = img.data();
    for v in 0..oh {
        for u in 0..ow {
            let s = u128::from(sums.rect_sum(u, v, u + tw, v + th));
            let sq = rect(&squares, iw + 1, u, v, u + tw, v + th) as u128;
            // n * sum(I^2) - sum(I)^2, exact in integers
            let var_num = count * sq - s * s;
            if var_num == 0 {
                values.push(0.0);
                continue;
            }
            let mut cross = 0.0;
            for ty in 0..th {
                let row = (v + ty) * iw + u;
                let trow = ty * tw;
                for tx in 0..tw {
                    cross += f64::from(data[row + tx]) * t_zero[trow + tx];
                }
            }
            let i_norm = (var_num as f64 / n).sqrt();
            values.push((cross / (i_norm * t_norm)).clamp(-1.0, 1.0));
        }
    }
    Ok(CorrelationMap {
        width: ow,
        height: oh,
        values,
    })
}

fn squared_sums(img: &GrayImage) -> Vec<u64> {
    let (w, h) = (img.width(), img.height());
    let stride = w + 1;
    let mut out = vec![0u64; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            let p = u64::from(img.get(x, y));
            row += p * p;
            out[(y + 1) * stride + x + 1] = out[y * stride + x + 1] + row;
        }
    }
    out
}

#[inline]
fn rect(table: &[u64], stride: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> u64 {
    table[y1 * stride + x1] + table[y0 * stride + x0] - table[y0 * stride + x1] - table[y1 * stride + x0]
}
