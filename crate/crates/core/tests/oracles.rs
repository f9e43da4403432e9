mod common;

use common::*;
use rand::Rng;
use weavetrack_core::descriptor::match_features;
use weavetrack_core::features::{detect_mser_unchecked, MserParams, Polarity};
use weavetrack_core::geometry::Point2;
use weavetrack_core::lattice::detect_lattice;

fn small_params(r: &mut rand_chacha::ChaCha8Rng) -> MserParams {
    MserParams {
        delta: r.random_range(1..=20),
        min_area: r.random_range(1..=3),
        max_area: Some(r.random_range(20..=64)),
        max_variation: [0.25, 0.5, 1.0, 4.0][r.random_range(0..4)],
        min_diversity: [0.0, 0.2, 0.5][r.random_range(0..3)],
        polarity: Polarity::Both,
    }
}

#[test]
fn mser_matches_threshold_enumeration() {
    let mut r = rng(11);
    let mut nonempty = 0;
    for trial in 0..100 {
        let img = random_small_image(&mut r);
        let params = small_params(&mut r);
        let got = detect_mser_unchecked(&img, &params);
        let want = mser_oracle(&img, &params);
        assert_eq!(got.len(), want.len(), "trial {trial} {params:?}");
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.pixels, w.pixels, "trial {trial}");
            assert_eq!(g.variation, w.variation, "trial {trial}");
            assert_eq!(g.polarity, w.polarity, "trial {trial}");
            assert_eq!(g.level, w.level, "trial {trial}");
            assert_eq!(g.area, g.pixels.len());
        }
        nonempty += usize::from(!got.is_empty());
    }
    assert!(nonempty > 50, "too few informative trials: {nonempty}");
}

#[test]
fn mser_oracle_on_nested_squares() {
    // a bright 4x4 square holding a brighter 2x2 core
    let img = weavetrack_core::GrayImage::from_fn(8, 8, |x, y| match (x, y) {
        (3..=4, 3..=4) => 250,
        (2..=5, 2..=5) => 150,
        _ => 10,
    })
    .unwrap();
    let p = MserParams { delta: 20, min_area: 1, max_area: Some(40), max_variation: 1.0, min_diversity: 0.0, polarity: Polarity::Bright };
    let got = detect_mser_unchecked(&img, &p);
    let want = mser_oracle(&img, &p);
    let areas: Vec<usize> = want.iter().map(|r| r.pixels.len()).collect();
    assert!(areas.contains(&4) && areas.contains(&16), "{areas:?}");
    assert_eq!(got.iter().map(|r| r.pixels.clone()).collect::<Vec<_>>(), want.iter().map(|r| r.pixels.clone()).collect::<Vec<_>>());
}

#[test]
fn matching_equals_exhaustive_nn() {
    let mut r = rng(12);
    for trial in 0..100 {
        let na = r.random_range(0..30);
        let nb = r.random_range(0..30);
        let a: Vec<_> = (0..na).map(|_| random_descriptor(&mut r)).collect();
        // half the b set are noised copies of a so real matches exist
        let b: Vec<_> = (0..nb)
            .map(|k| {
                if k < na && r.random_bool(0.5) {
                    let mut d = a[k];
                    for _ in 0..r.random_range(0..100) {
                        let bit = r.random_range(0..512);
                        d.set_bit(bit, !d.bit(bit));
                    }
                    d
                } else {
                    random_descriptor(&mut r)
                }
            })
            .collect();
        let threshold = r.random_range(0..=300);
        assert_eq!(match_features(&a, &b, threshold), match_oracle(&a, &b, threshold), "trial {trial}");
    }
}

#[test]
fn noised_copies_recovered() {
    let mut r = rng(13);
    let a: Vec<_> = (0..20).map(|_| random_descriptor(&mut r)).collect();
    let b: Vec<_> = a
        .iter()
        .map(|d| {
            let mut d = *d;
            let mut flipped = std::collections::HashSet::new();
            while flipped.len() < 8 {
                flipped.insert(r.random_range(0..512));
            }
            for &bit in &flipped {
                d.set_bit(bit, !d.bit(bit));
            }
            d
        })
        .collect();
    let m = match_features(&a, &b, 120);
    assert_eq!(m, match_oracle(&a, &b, 120));
    assert_eq!(m.len(), 20);
    assert!(m.iter().all(|x| x.index_a == x.index_b && x.distance == 8));
}

#[test]
fn lattice_w0_equals_pair_oracle() {
    let mut r = rng(14);
    let mut solved = 0;
    for trial in 0..100 {
        let anchor = Point2::new(r.random_range(-50.0..50.0), r.random_range(-50.0..50.0));
        let n = r.random_range(2..=20);
        let cands: Vec<Point2<f64>> = (0..n)
            .map(|_| {
                let (len, ang) = (r.random_range(0.5..20.0_f64), r.random_range(0.0..360.0_f64).to_radians());
                Point2::new(anchor.x + len * ang.cos(), anchor.y + len * ang.sin())
            })
            .collect();
        let t1 = r.random_range(0.0..180.0);
        // separation above twice the tolerance keeps the axes' admissible sets apart
        let t2 = (t1 + r.random_range(40.0..140.0)) % 180.0;
        let tol = 15.0;
        let got = detect_lattice(anchor, &cands, [t1, t2], 0.0, tol);
        match lattice_pair_oracle(anchor, &cands, [t1, t2], tol) {
            Some((i, j)) => {
                let b = got.unwrap_or_else(|e| panic!("trial {trial}: {e}"));
                assert_eq!(b.v1, cands[i].sub(anchor), "trial {trial}");
                assert_eq!(b.v2, cands[j].sub(anchor), "trial {trial}");
                solved += 1;
            }
            None => assert!(got.is_err(), "trial {trial}"),
        }
    }
    assert!(solved > 30, "only {solved} solvable layouts");
}
