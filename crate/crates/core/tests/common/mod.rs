#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use weavetrack_core::descriptor::{hamming, BinaryDescriptor, Match};
use weavetrack_core::features::{MserParams, Polarity, RegionPolarity};
use weavetrack_core::geometry::{Point2, RigidTransform};
use weavetrack_core::GrayImage;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_descriptor(r: &mut ChaCha8Rng) -> BinaryDescriptor {
    BinaryDescriptor::from_bits(std::array::from_fn(|_| r.random()))
}

/// Random 8x8 image; a small level range makes plateaus and merges common.
pub fn random_small_image(r: &mut ChaCha8Rng) -> GrayImage {
    let levels: u8 = [4, 12, 40, 255][r.random_range(0..4)];
    let scale = 255 / levels.max(1);
    GrayImage::from_fn(8, 8, |_, _| r.random_range(0..=levels) * scale).unwrap()
}

// ---- MSER by threshold enumeration ----

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRegion {
    pub pixels: Vec<(usize, usize)>,
    pub variation: f64,
    pub polarity: RegionPolarity,
    pub level: u8,
}

/// Component labels of `{p : img[p] <= level}`, 4-connected, by BFS.
fn components(img: &[u8], w: usize, h: usize, level: u8) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut label = vec![usize::MAX; img.len()];
    let mut comps = Vec::new();
    for start in 0..img.len() {
        if img[start] > level || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        label[start] = id;
        while let Some(p) = queue.pop_front() {
            members.push(p);
            let (x, y) = (p % w, p / w);
            let mut nb = Vec::with_capacity(4);
            if x > 0 {
                nb.push(p - 1);
            }
            if x + 1 < w {
                nb.push(p + 1);
            }
            if y > 0 {
                nb.push(p - w);
            }
            if y + 1 < h {
                nb.push(p + w);
            }
            for q in nb {
                if img[q] <= level && label[q] == usize::MAX {
                    label[q] = id;
                    queue.push_back(q);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    (label, comps)
}

fn oracle_one(img: &[u8], w: usize, h: usize, params: &MserParams, polarity: RegionPolarity) -> Vec<OracleRegion> {
    let delta = params.delta as usize;
    let max_area = params.max_area.unwrap_or(w * h / 100);
    let levels: Vec<(Vec<usize>, Vec<Vec<usize>>)> = (0..=255u8).map(|g| components(img, w, h, g)).collect();
    let comp_of = |g: usize, p: usize| -> &Vec<usize> { &levels[g].1[levels[g].0[p]] };
    let inside = |g: usize, set: &[usize]| -> Vec<&Vec<usize>> {
        levels[g].1.iter().filter(|c| c.iter().all(|p| set.binary_search(p).is_ok())).collect()
    };
    let variation = |g: usize, set: &Vec<usize>| -> f64 {
        let up = comp_of((g + delta).min(255), set[0]).len() as f64;
        let down = if g < delta {
            0.0
        } else {
            let mut cur = set.clone();
            let mut alive = true;
            for l in (g - delta..g).rev() {
                let mut kids = inside(l, &cur);
                kids.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
                match kids.first() {
                    Some(k) => cur = (*k).clone(),
                    None => {
                        alive = false;
                        break;
                    }
                }
            }
            if alive { cur.len() as f64 } else { 0.0 }
        };
        (up - down) / set.len() as f64
    };

    // every distinct pixel set with its best locally stable level
    let mut best: Vec<(Vec<usize>, usize, f64)> = Vec::new();
    for g in 0..=255usize {
        for set in &levels[g].1 {
            let v = variation(g, set);
            if g < 255 && v >= variation(g + 1, comp_of(g + 1, set[0])) {
                continue;
            }
            if g > 0 && inside(g - 1, set).iter().any(|c| v > variation(g - 1, c)) {
                continue;
            }
            match best.iter_mut().find(|b| &b.0 == set) {
                Some(b) => {
                    if v < b.2 {
                        b.1 = g;
                        b.2 = v;
                    }
                }
                None => best.push((set.clone(), g, v)),
            }
        }
    }
    let cands: Vec<(Vec<usize>, usize, f64)> = best
        .into_iter()
        .filter(|(s, _, v)| s.len() >= params.min_area && s.len() <= max_area && *v <= params.max_variation)
        .collect();

    let mut removed = vec![false; cands.len()];
    for (ci, c) in cands.iter().enumerate() {
        let ancestor = cands
            .iter()
            .enumerate()
            .filter(|(_, a)| a.0.len() > c.0.len() && c.0.iter().all(|p| a.0.binary_search(p).is_ok()))
            .min_by_key(|(_, a)| a.0.len());
        if let Some((ai, a)) = ancestor {
            let (small, big) = (c.0.len() as f64, a.0.len() as f64);
            if (big - small) / big < params.min_diversity {
                if a.2 < c.2 {
                    removed[ci] = true;
                } else {
                    removed[ai] = true;
                }
            }
        }
    }
    cands
        .into_iter()
        .zip(removed)
        .filter(|(_, r)| !r)
        .map(|((set, g, v), _)| OracleRegion {
            pixels: set.iter().map(|&p| (p % w, p / w)).collect(),
            variation: v,
            polarity,
            level: match polarity {
                RegionPolarity::DarkOnBright => g as u8,
                RegionPolarity::BrightOnDark => 255 - g as u8,
            },
        })
        .collect()
}

/// MSERs by enumerating every threshold, sorted like the detector output.
pub fn mser_oracle(img: &GrayImage, params: &MserParams) -> Vec<OracleRegion> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::new();
    if matches!(params.polarity, Polarity::Dark | Polarity::Both) {
        out.extend(oracle_one(img.data(), w, h, params, RegionPolarity::DarkOnBright));
    }
    if matches!(params.polarity, Polarity::Bright | Polarity::Both) {
        let inv: Vec<u8> = img.data().iter().map(|v| 255 - v).collect();
        out.extend(oracle_one(&inv, w, h, params, RegionPolarity::BrightOnDark));
    }
    let first = |r: &OracleRegion| r.pixels.first().map(|&(x, y)| y * w + x).unwrap_or(0);
    out.sort_by(|a, b| {
        a.variation
            .total_cmp(&b.variation)
            .then(a.pixels.len().cmp(&b.pixels.len()))
            .then(first(a).cmp(&first(b)))
    });
    out
}

// ---- matching ----

/// Mutual nearest neighbours from the full distance matrix.
pub fn match_oracle(a: &[BinaryDescriptor], b: &[BinaryDescriptor], threshold: u32) -> Vec<Match> {
    let d: Vec<Vec<u32>> = a.iter().map(|x| b.iter().map(|y| hamming(x, y)).collect()).collect();
    let mut out = Vec::new();
    for i in 0..a.len() {
        for j in 0..b.len() {
            let row_best = (0..b.len()).all(|k| d[i][j] < d[i][k] || (d[i][j] == d[i][k] && j <= k));
            let col_best = (0..a.len()).all(|k| d[i][j] < d[k][j] || (d[i][j] == d[k][j] && i <= k));
            if row_best && col_best && d[i][j] <= threshold {
                out.push(Match { index_a: i, index_b: j, distance: d[i][j] });
            }
        }
    }
    out.sort_by_key(|m| (m.distance, m.index_a));
    out
}

// ---- lattice selection at w = 0 ----

fn fold(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

fn polar(v: Point2<f64>) -> f64 {
    v.y.atan2(v.x).to_degrees().rem_euclid(360.0)
}

/// Best (first, second) candidate pair over all ordered pairs, by length
/// then polar angle per axis, first axis dominant.
pub fn lattice_pair_oracle(anchor: Point2<f64>, cands: &[Point2<f64>], refs: [f64; 2], tol: f64) -> Option<(usize, usize)> {
    let v = |i: usize| Point2::new(cands[i].x - anchor.x, cands[i].y - anchor.y);
    let ok = |i: usize, axis: usize| {
        let u = v(i);
        u.x.hypot(u.y) > 0.0 && fold(u.y.atan2(u.x).to_degrees(), refs[axis]) <= tol
    };
    let key = |i: usize| (v(i).x.hypot(v(i).y), polar(v(i)), i);
    let mut best: Option<((f64, f64, usize), (f64, f64, usize))> = None;
    for i in 0..cands.len() {
        if !ok(i, 0) {
            continue;
        }
        for j in 0..cands.len() {
            if j == i || !ok(j, 1) || (v(i).x * v(j).y - v(i).y * v(j).x).abs() <= 1e-6 {
                continue;
            }
            let k = (key(i), key(j));
            let better = match &best {
                None => true,
                Some(b) => k.partial_cmp(b) == Some(std::cmp::Ordering::Less),
            };
            if better {
                best = Some(k);
            }
        }
    }
    best.map(|(a, b)| (a.2, b.2))
}

// ---- robust estimation trials ----

pub struct MsacTrial {
    pub points_a: Vec<Point2<f64>>,
    pub points_b: Vec<Point2<f64>>,
    pub matches: Vec<Match>,
    pub truth: RigidTransform<f64>,
}

/// 30 correspondences in a 256 px frame, 30% uniform outliers, Gaussian
/// noise on the inliers; truth is a 5 degree turn about the frame center
/// followed by a (3, -2) shift.
pub fn msac_trial(seed: u64, noise: f64) -> MsacTrial {
    let mut r = rng(seed);
    let center = Point2::new(127.5, 127.5);
    let truth = RigidTransform::rotation_about(center, 5.0).then(&RigidTransform::translation(3.0, -2.0));
    let normal = Normal::new(0.0, noise).unwrap();
    let (n, outliers) = (30, 9);
    let mut points_a = Vec::new();
    let mut points_b = Vec::new();
    for k in 0..n {
        let a = Point2::new(r.random_range(0.0..256.0), r.random_range(0.0..256.0));
        let b = if k < n - outliers {
            let t = truth.apply(a);
            Point2::new(t.x + normal.sample(&mut r), t.y + normal.sample(&mut r))
        } else {
            Point2::new(r.random_range(0.0..256.0), r.random_range(0.0..256.0))
        };
        points_a.push(a);
        points_b.push(b);
    }
    let matches = (0..n).map(|i| Match { index_a: i, index_b: i, distance: 0 }).collect();
    MsacTrial { points_a, points_b, matches, truth }
}
