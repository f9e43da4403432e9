use serde::{Deserialize, Serialize};

use super::ellipse::{Ellipse, Moments};
use crate::error::{Error, Result};
use crate::imagecore::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Bright,
    Dark,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionPolarity {
    BrightOnDark,
    DarkOnBright,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MserParams {
    pub delta: u8,
    pub min_area: usize,
    /// Upper area bound in pixels; `None` means 1% of the image area.
    pub max_area: Option<usize>,
    pub max_variation: f64,
    pub min_diversity: f64,
    pub polarity: Polarity,
}

impl Default for MserParams {
    fn default() -> Self {
        Self {
            delta: 10,
            min_area: 20,
            max_area: None,
            max_variation: 0.25,
            min_diversity: 0.2,
            polarity: Polarity::Bright,
        }
    }
}

impl MserParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta < 1 {
            return Err(Error::invalid("mser.delta must be >= 1"));
        }
        if self.min_area == 0 {
            return Err(Error::invalid("mser.min_area must be > 0"));
        }
        if let Some(max) = self.max_area {
            if max <= self.min_area {
                return Err(Error::invalid("mser.max_area must exceed min_area"));
            }
        }
        if !(self.max_variation > 0.0) {
            return Err(Error::invalid("mser.max_variation must be > 0"));
        }
        if !(0.0..1.0).contains(&self.min_diversity) {
            return Err(Error::invalid("mser.min_diversity must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn max_area_for(&self, width: usize, height: usize) -> usize {
        self.max_area.unwrap_or((width * height) / 100)
    }
}

/// A maximally stable extremal region.
#[derive(Debug, Clone, PartialEq)]
pub struct MserRegion {
    /// Member pixels in raster order.
    pub pixels: Vec<(usize, usize)>,
    pub area: usize,
    pub centroid: (f64, f64),
    pub ellipse: Ellipse,
    /// Relative area variation at the selected threshold; lower is more stable.
    pub variation: f64,
    pub mean_intensity: f64,
    pub polarity: RegionPolarity,
    /// Threshold in original intensities at which the region was selected.
    pub level: u8,
}

impl MserRegion {
    pub fn bounding_box(&self) -> (usize, usize, usize, usize) {
        let mut b = (usize::MAX, usize::MAX, 0, 0);
        for &(x, y) in &self.pixels {
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        b
    }
}

/// Detects MSERs of the requested polarity, most stable first.
///
/// An extremal region at level `g` is a 4-connected component of pixels
/// `<= g` (on the inverted image for bright blobs). Its variation is
/// `(|Q(g+delta)| - |Q(g-delta)|) / |Q(g)|`, where `Q(g+delta)` is the
/// enclosing component (level capped at 255) and `Q(g-delta)` follows the
/// largest-child branch downwards (0 once the branch vanishes). A region is
/// maximally stable where its variation is strictly below its parent's and
/// no greater than each child's.
pub fn detect_mser(img: &GrayImage, params: &MserParams) -> Result<Vec<MserRegion>> {
    params.validate()?;
    if img.width() < 16 || img.height() < 16 {
        return Err(Error::invalid(format!(
            "mser needs at least 16x16 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(detect_mser_unchecked(img, params))
}

/// [`detect_mser`] without the minimum image size, for tiny test images.
/// Parameters are assumed valid.
pub fn detect_mser_unchecked(img: &GrayImage, params: &MserParams) -> Vec<MserRegion> {
    let mut out = Vec::new();
    if matches!(params.polarity, Polarity::Dark | Polarity::Both) {
        out.extend(detect_one(img, img, params, RegionPolarity::DarkOnBright));
    }
    if matches!(params.polarity, Polarity::Bright | Polarity::Both) {
        out.extend(detect_one(&img.inverted(), img, params, RegionPolarity::BrightOnDark));
    }
    out.sort_by(|a, b| {
        a.variation
            .total_cmp(&b.variation)
            .then(a.area.cmp(&b.area))
            .then(raster_min(a, img.width()).cmp(&raster_min(b, img.width())))
    });
    out
}

fn raster_min(r: &MserRegion, width: usize) -> usize {
    r.pixels.first().map(|&(x, y)| y * width + x).unwrap_or(0)
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    level: u8,
    size: u32,
    min_index: u32,
    parent: u32,
}

/// Compressed component tree: one node per maximal interval of levels over
/// which a component's pixel set is unchanged.
struct ComponentTree {
    nodes: Vec<Node>,
    children: Vec<Vec<u32>>,
    /// Pixels first added to each node (not to its descendants).
    own_pixels: Vec<Vec<u32>>,
}

impl ComponentTree {
    fn build(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let n = w * h;
        let data = img.data();

        // counting sort by level, raster order within a level
        let mut hist = [0usize; 257];
        for &v in data {
            hist[v as usize + 1] += 1;
        }
        for i in 1..257 {
            hist[i] += hist[i - 1];
        }
        let starts = hist;
        let mut order = vec![0u32; n];
        let mut fill = starts;
        for (i, &v) in data.iter().enumerate() {
            order[fill[v as usize]] = i as u32;
            fill[v as usize] += 1;
        }

        let mut uf = UnionFind::new(n);
        let mut added = vec![false; n];
        let mut root_node = vec![NONE; n];
        let mut nodes: Vec<Node> = Vec::new();
        let mut birth = vec![NONE; n];
        let mut touched: Vec<u32> = Vec::new();
        let mut closed: Vec<(u32, u32)> = Vec::new();

        for level in 0..=255usize {
            let slice = &order[starts[level]..starts[level + 1]];
            if slice.is_empty() {
                continue;
            }
            touched.clear();
            closed.clear();
            for &p in slice {
                let pu = p as usize;
                added[pu] = true;
                touched.push(p);
                let (x, y) = (pu % w, pu / w);
                let mut neighbors = [NONE; 4];
                if x > 0 {
                    neighbors[0] = p - 1;
                }
                if x + 1 < w {
                    neighbors[1] = p + 1;
                }
                if y > 0 {
                    neighbors[2] = p - w as u32;
                }
                if y + 1 < h {
                    neighbors[3] = p + w as u32;
                }
                for q in neighbors {
                    if q == NONE || !added[q as usize] {
                        continue;
                    }
                    let rp = uf.find(p);
                    let rq = uf.find(q);
                    if rp == rq {
                        continue;
                    }
                    for r in [rp, rq] {
                        let node = root_node[r as usize];
                        if node != NONE {
                            closed.push((node, r));
                            root_node[r as usize] = NONE;
                        }
                    }
                    let r = uf.union(rp, rq);
                    root_node[r as usize] = NONE;
                    touched.push(r);
                }
            }
            for &t in &touched {
                let r = uf.find(t) as usize;
                if root_node[r] == NONE {
                    root_node[r] = nodes.len() as u32;
                    nodes.push(Node {
                        level: level as u8,
                        size: uf.size[r],
                        min_index: uf.min_index[r],
                        parent: NONE,
                    });
                }
            }
            for &(node, pix) in &closed {
                let r = uf.find(pix) as usize;
                nodes[node as usize].parent = root_node[r];
            }
            for &p in slice {
                birth[p as usize] = root_node[uf.find(p) as usize];
            }
        }

        let mut children = vec![Vec::new(); nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if node.parent != NONE {
                children[node.parent as usize].push(i as u32);
            }
        }
        // largest child first, smaller min pixel index on ties
        for list in &mut children {
            list.sort_by(|&a, &b| {
                let (na, nb) = (&nodes[a as usize], &nodes[b as usize]);
                nb.size.cmp(&na.size).then(na.min_index.cmp(&nb.min_index))
            });
        }
        let mut own_pixels = vec![Vec::new(); nodes.len()];
        for (p, &b) in birth.iter().enumerate() {
            own_pixels[b as usize].push(p as u32);
        }
        Self {
            nodes,
            children,
            own_pixels,
        }
    }

    /// Last level at which the node's pixel set is unchanged.
    fn end_level(&self, node: u32) -> usize {
        match self.nodes[node as usize].parent {
            NONE => 255,
            p => self.nodes[p as usize].level as usize - 1,
        }
    }

    fn size_at_or_above(&self, mut node: u32, level: usize) -> u32 {
        while self.end_level(node) < level {
            node = self.nodes[node as usize].parent;
        }
        self.nodes[node as usize].size
    }

    fn size_on_branch_below(&self, mut node: u32, level: isize) -> u32 {
        if level < 0 {
            return 0;
        }
        while self.nodes[node as usize].level as isize > level {
            match self.children[node as usize].first() {
                Some(&c) => node = c,
                None => return 0,
            }
        }
        self.nodes[node as usize].size
    }

    fn variation(&self, node: u32, level: usize, delta: usize) -> f64 {
        let size = self.nodes[node as usize].size as f64;
        let up = self.size_at_or_above(node, (level + delta).min(255)) as f64;
        let down = self.size_on_branch_below(node, level as isize - delta as isize) as f64;
        (up - down) / size
    }

    fn pixels_of(&self, node: u32) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.nodes[node as usize].size as usize);
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            out.extend_from_slice(&self.own_pixels[n as usize]);
            stack.extend_from_slice(&self.children[n as usize]);
        }
        out.sort_unstable();
        out
    }
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
    min_index: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            min_index: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (big, small) = if self.size[a as usize] > self.size[b as usize]
            || (self.size[a as usize] == self.size[b as usize] && a < b)
        {
            (a, b)
        } else {
            (b, a)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.min_index[big as usize] = self.min_index[big as usize].min(self.min_index[small as usize]);
        big
    }
}

struct Candidate {
    node: u32,
    level: usize,
    variation: f64,
}

fn detect_one(work: &GrayImage, original: &GrayImage, params: &MserParams, polarity: RegionPolarity) -> Vec<MserRegion> {
    let tree = ComponentTree::build(work);
    let delta = params.delta as usize;
    let max_area = params.max_area_for(work.width(), work.height());

    // variation for every (node, level) pair, stored per node
    let mut var_offset = Vec::with_capacity(tree.nodes.len() + 1);
    let mut vars: Vec<f64> = Vec::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        var_offset.push(vars.len());
        for level in node.level as usize..=tree.end_level(i as u32) {
            vars.push(tree.variation(i as u32, level, delta));
        }
    }
    var_offset.push(vars.len());
    let var_at = |node: u32, level: usize| vars[var_offset[node as usize] + level - tree.nodes[node as usize].level as usize];

    // best local minimum per node
    let mut candidate_of = vec![usize::MAX; tree.nodes.len()];
    let mut candidates: Vec<Candidate> = Vec::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        let id = i as u32;
        let size = node.size as usize;
        if size < params.min_area || size > max_area {
            continue;
        }
        let start = node.level as usize;
        let end = tree.end_level(id);
        let mut best: Option<(usize, f64)> = None;
        for level in start..=end {
            let v = var_at(id, level);
            let parent_v = if level < end {
                Some(var_at(id, level + 1))
            } else if node.parent != NONE {
                Some(var_at(node.parent, end + 1))
            } else {
                None
            };
            if parent_v.is_some_and(|pv| v >= pv) {
                continue;
            }
            let children_ok = if level > start {
                v <= var_at(id, level - 1)
            } else {
                tree.children[i].iter().all(|&c| v <= var_at(c, tree.end_level(c)))
            };
            if !children_ok {
                continue;
            }
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((level, v));
            }
        }
        if let Some((level, v)) = best {
            if v <= params.max_variation {
                candidate_of[i] = candidates.len();
                candidates.push(Candidate {
                    node: id,
                    level,
                    variation: v,
                });
            }
        }
    }

    // diversity: compare each candidate with its nearest candidate ancestor
    let mut removed = vec![false; candidates.len()];
    for (ci, c) in candidates.iter().enumerate() {
        let mut a = tree.nodes[c.node as usize].parent;
        while a != NONE && candidate_of[a as usize] == usize::MAX {
            a = tree.nodes[a as usize].parent;
        }
        if a == NONE {
            continue;
        }
        let ai = candidate_of[a as usize];
        let anc = &candidates[ai];
        let small = tree.nodes[c.node as usize].size as f64;
        let big = tree.nodes[anc.node as usize].size as f64;
        if (big - small) / big < params.min_diversity {
            // lower variation wins; the smaller region wins ties
            if anc.variation < c.variation {
                removed[ci] = true;
            } else {
                removed[ai] = true;
            }
        }
    }

    let w = work.width();
    candidates
        .iter()
        .zip(&removed)
        .filter(|(_, &r)| !r)
        .map(|(c, _)| {
            let pixels: Vec<(usize, usize)> = tree.pixels_of(c.node).into_iter().map(|p| (p as usize % w, p as usize / w)).collect();
            let moments = Moments::from_pixels(&pixels);
            let mean_intensity = pixels.iter().map(|&(x, y)| f64::from(original.get(x, y))).sum::<f64>() / pixels.len() as f64;
            let level = match polarity {
                RegionPolarity::DarkOnBright => c.level as u8,
                RegionPolarity::BrightOnDark => 255 - c.level as u8,
            };
            MserRegion {
                area: pixels.len(),
                centroid: moments.centroid(),
                ellipse: moments.ellipse(),
                pixels,
                variation: c.variation,
                mean_intensity,
                polarity,
                level,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(cx: f64, cy: f64, r: f64) -> GrayImage {
        GrayImage::from_fn(128, 128, |x, y| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                255
            } else {
                0
            }
        })
        .unwrap()
    }

    #[test]
    fn single_disc() {
        let img = disc(60.3, 65.6, 6.0);
        let regions = detect_mser(&img, &MserParams::default()).unwrap();
        assert_eq!(regions.len(), 1);
        let r = &regions[0];
        assert!((r.centroid.0 - 60.3).abs() < 0.5 && (r.centroid.1 - 65.6).abs() < 0.5);
        let expected = std::f64::consts::PI * 36.0;
        assert!((r.area as f64 - expected).abs() / expected < 0.1, "area {}", r.area);
        assert_eq!(r.polarity, RegionPolarity::BrightOnDark);
        assert_eq!(r.mean_intensity, 255.0);
    }

    #[test]
    fn constant_image_has_no_regions() {
        let img = GrayImage::filled(32, 32, 90).unwrap();
        let p = MserParams {
            polarity: Polarity::Both,
            ..MserParams::default()
        };
        assert!(detect_mser(&img, &p).unwrap().is_empty());
    }

    #[test]
    fn dark_polarity_finds_dark_disc() {
        let img = disc(64.0, 64.0, 6.0).inverted();
        let dark = MserParams {
            polarity: Polarity::Dark,
            ..MserParams::default()
        };
        assert_eq!(detect_mser(&img, &dark).unwrap().len(), 1);
        assert!(detect_mser(&img, &MserParams::default()).unwrap().is_empty());
    }

    #[test]
    fn too_small_image() {
        let img = GrayImage::filled(15, 40, 0).unwrap();
        assert!(detect_mser(&img, &MserParams::default()).is_err());
    }

    #[test]
    fn invalid_params() {
        let img = GrayImage::filled(16, 16, 0).unwrap();
        let bad = MserParams {
            min_diversity: 1.0,
            ..MserParams::default()
        };
        assert!(detect_mser(&img, &bad).is_err());
        let bad = MserParams {
            max_area: Some(10),
            ..MserParams::default()
        };
        assert!(detect_mser(&img, &bad).is_err());
    }

    #[test]
    fn regions_are_four_connected() {
        let img = GrayImage::from_fn(40, 40, |x, y| ((x as f64 * 0.7).sin() * (y as f64 * 0.5).cos() * 100.0 + 120.0) as u8).unwrap();
        let p = MserParams {
            min_area: 4,
            polarity: Polarity::Both,
            ..MserParams::default()
        };
        for r in detect_mser(&img, &p).unwrap() {
            let set: std::collections::HashSet<_> = r.pixels.iter().copied().collect();
            let mut seen = std::collections::HashSet::new();
            let mut stack = vec![r.pixels[0]];
            seen.insert(r.pixels[0]);
            while let Some((x, y)) = stack.pop() {
                let nb = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
                for q in nb {
                    if set.contains(&q) && seen.insert(q) {
                        stack.push(q);
                    }
                }
            }
            assert_eq!(seen.len(), r.area);
            let (x0, y0, x1, y1) = r.bounding_box();
            assert!(r.centroid.0 >= x0 as f64 && r.centroid.0 <= x1 as f64);
            assert!(r.centroid.1 >= y0 as f64 && r.centroid.1 <= y1 as f64);
        }
    }
}
