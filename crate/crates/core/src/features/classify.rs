use super::MserRegion;

/// Index split of a region list into individual and grouping (merged) blobs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlobClasses {
    pub individual: Vec<usize>,
    pub grouping: Vec<usize>,
    /// Fewer than four regions were supplied; everything is individual.
    pub low_confidence: bool,
}

const SEPARATION_RATIO: f64 = 1.5;
const MAX_ROUNDS: usize = 100;

/// 1-D two-means on region area, seeded at the minimum and maximum area.
///
/// The small-mean cluster is "individual". When the large cluster's mean is
/// below 1.5x the small one the split is rejected and all are individual.
pub fn classify_blobs(regions: &[MserRegion]) -> BlobClasses {
    let areas: Vec<f64> = regions.iter().map(|r| r.area as f64).collect();
    split_areas(&areas)
}

pub(crate) fn split_areas(areas: &[f64]) -> BlobClasses {
    let all = || (0..areas.len()).collect::<Vec<_>>();
    if areas.len() < 4 {
        return BlobClasses {
            individual: all(),
            grouping: Vec::new(),
            low_confidence: true,
        };
    }
    let mut lo = areas.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = areas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return BlobClasses {
            individual: all(),
            ..Default::default()
        };
    }
    let mut assign = vec![false; areas.len()]; // true = grouping
    for _ in 0..MAX_ROUNDS {
        let next: Vec<bool> = areas.iter().map(|&a| (a - hi).abs() < (a - lo).abs()).collect();
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for (&a, &g) in areas.iter().zip(&next) {
            if g {
                s1 += a;
                n1 += 1;
            } else {
                s0 += a;
                n0 += 1;
            }
        }
        let converged = next == assign;
        assign = next;
        if n0 == 0 || n1 == 0 {
            break;
        }
        lo = s0 / n0 as f64;
        hi = s1 / n1 as f64;
        if converged {
            break;
        }
    }
    let n1 = assign.iter().filter(|&&g| g).count();
    if n1 == 0 || n1 == areas.len() || hi < SEPARATION_RATIO * lo {
        return BlobClasses {
            individual: all(),
            ..Default::default()
        };
    }
    let (grouping, individual): (Vec<usize>, Vec<usize>) = (0..areas.len()).partition(|&i| assign[i]);
    BlobClasses {
        individual,
        grouping,
        low_confidence: false,
    }
}
