use super::BlobTemplate;
use crate::error::{Error, Result, Stage};
use crate::geometry::Point2;
use crate::imagecore::{ncc, CorrelationMap, GrayImage};

/// A correlation peak at a subpixel template-center position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position: Point2<f64>,
    pub score: f64,
}

/// Correlation peaks around an anchor, split into the anchor's own peak and
/// its neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPeaks {
    pub anchor_peak: Option<Peak>,
    pub neighbors: Vec<Peak>,
}

/// Subpixel centers of template matches around `anchor`, excluding the
/// anchor's own peak.
pub fn find_neighbors(
    img: &GrayImage,
    template: &BlobTemplate,
    anchor: Point2<f64>,
    search_radius: f64,
    ncc_min: f64,
) -> Result<Vec<Point2<f64>>> {
    let peaks = search_peaks(img, template, anchor, search_radius, ncc_min)?;
    if peaks.neighbors.is_empty() {
        return Err(Error::stage(Stage::FindNeighbors, "no correlation peaks above threshold"));
    }
    Ok(peaks.neighbors.iter().map(|p| p.position).collect())
}

/// Like [`find_neighbors`] but keeps scores and the anchor's own peak, and
/// returns an empty neighbour list instead of an error.
pub fn search_peaks(
    img: &GrayImage,
    template: &BlobTemplate,
    anchor: Point2<f64>,
    search_radius: f64,
    ncc_min: f64,
) -> Result<NeighborPeaks> {
    if !(search_radius > 0.0) {
        return Err(Error::invalid("search radius must be positive"));
    }
    let (tw, th) = template.size();
    let (hw, hh) = (tw / 2, th / 2);
    let (w, h) = (img.width() as f64, img.height() as f64);
    let valid = |lo: f64, hi: f64, half: usize, full: f64| -> Option<(usize, usize)> {
        let lo = lo.floor().max(half as f64);
        let hi = hi.ceil().min(full - 1.0 - half as f64);
        (lo <= hi).then_some((lo as usize, hi as usize))
    };
    let (cx0, cx1) = valid(anchor.x - search_radius, anchor.x + search_radius, hw, w)
        .ok_or_else(|| Error::stage(Stage::FindNeighbors, "search window outside the correlation domain"))?;
    let (cy0, cy1) = valid(anchor.y - search_radius, anchor.y + search_radius, hh, h)
        .ok_or_else(|| Error::stage(Stage::FindNeighbors, "search window outside the correlation domain"))?;

    let window = img.crop(cx0 - hw, cy0 - hh, cx1 - cx0 + tw, cy1 - cy0 + th)?;
    let map = ncc(&window, &template.patch).map_err(|e| Error::stage(Stage::FindNeighbors, e.to_string()))?;

    let mut maxima: Vec<Peak> = local_maxima(&map, ncc_min)
        .into_iter()
        .map(|(u, v, score)| {
            let (ox, oy) = subpixel_offset(&map, u, v);
            Peak {
                position: Point2::new((cx0 + u) as f64 + ox, (cy0 + v) as f64 + oy),
                score,
            }
        })
        .filter(|p| p.position.distance(anchor) <= search_radius)
        .collect();
    maxima.sort_by(|a, b| b.score.total_cmp(&a.score));

    let suppress = (tw as f64 / 2.0).max(1.0);
    let mut kept: Vec<Peak> = Vec::new();
    for p in maxima {
        if kept.iter().all(|k| k.position.distance(p.position) > suppress) {
            kept.push(p);
        }
    }
    let mut anchor_peak = None;
    let mut neighbors = Vec::with_capacity(kept.len());
    for p in kept {
        if p.position.distance(anchor) <= suppress {
            if anchor_peak.is_none() {
                anchor_peak = Some(p);
            }
        } else {
            neighbors.push(p);
        }
    }
    Ok(NeighborPeaks { anchor_peak, neighbors })
}

/// Interior local maxima at or above `min`; plateaus resolve to their first
/// raster position.
fn local_maxima(map: &CorrelationMap, min: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    if map.width < 3 || map.height < 3 {
        return out;
    }
    for v in 1..map.height - 1 {
        for u in 1..map.width - 1 {
            let s = map.get(u, v);
            if s < min {
                continue;
            }
            let mut is_max = true;
            'nb: for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    if du == 0 && dv == 0 {
                        continue;
                    }
                    let n = map.get((u as i64 + du) as usize, (v as i64 + dv) as usize);
                    let earlier = dv < 0 || (dv == 0 && du < 0);
                    if n > s || (earlier && n == s) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                out.push((u, v, s));
            }
        }
    }
    out
}

/// Peak offset from a least-squares quadratic over the 3x3 neighbourhood,
/// falling back to per-axis parabolas when the fit is not a maximum.
fn subpixel_offset(map: &CorrelationMap, u: usize, v: usize) -> (f64, f64) {
    let f = |du: i64, dv: i64| map.get((u as i64 + du) as usize, (v as i64 + dv) as usize);
    // f(x,y) = a + b x + c y + d x^2 + e x y + g y^2 on the 3x3 grid; the
    // normal equations decouple into closed forms.
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    let mut s = 0.0;
    for dv in -1..=1 {
        for du in -1..=1 {
            let z = f(du, dv);
            let (x, y) = (du as f64, dv as f64);
            s += z;
            sx += x * z;
            sy += y * z;
            sxx += x * x * z;
            syy += y * y * z;
            sxy += x * y * z;
        }
    }
    let b = sx / 6.0;
    let c = sy / 6.0;
    let e = sxy / 4.0;
    let d = (sxx - 2.0 * s / 3.0) / 2.0;
    let g = (syy - 2.0 * s / 3.0) / 2.0;
    let det = 4.0 * d * g - e * e;
    if d < 0.0 && det > 0.0 {
        let ox = (-2.0 * g * b + e * c) / det;
        let oy = (-2.0 * d * c + e * b) / det;
        if ox.abs() <= 1.0 && oy.abs() <= 1.0 {
            return (ox, oy);
        }
    }
    let parabola = |m: f64, z: f64, p: f64| {
        let den = m - 2.0 * z + p;
        if den < 0.0 {
            (0.5 * (m - p) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    (parabola(f(-1, 0), f(0, 0), f(1, 0)), parabola(f(0, -1), f(0, 0), f(0, 1)))
}
