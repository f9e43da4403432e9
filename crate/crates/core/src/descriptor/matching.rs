use super::BinaryDescriptor;

/// A mutual nearest-neighbour correspondence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Match {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: u32,
}

#[inline]
pub fn hamming(a: &BinaryDescriptor, b: &BinaryDescriptor) -> u32 {
    a.bits.iter().zip(&b.bits).map(|(x, y)| (x ^ y).count_ones()).sum()
}

// Nearest neighbour of `q` in `set`; lowest index wins ties.
fn nearest(q: &BinaryDescriptor, set: &[BinaryDescriptor]) -> Option<(usize, u32)> {
    let mut best: Option<(usize, u32)> = None;
    for (i, d) in set.iter().enumerate() {
        let dist = hamming(q, d);
        if best.is_none_or(|(_, bd)| dist < bd) {
            best = Some((i, dist));
        }
    }
    best
}

/// Mutual nearest-neighbour matches with Hamming distance `<= threshold`,
/// sorted by ascending distance, then by `index_a`.
pub fn match_features(set_a: &[BinaryDescriptor], set_b: &[BinaryDescriptor], threshold: u32) -> Vec<Match> {
    if set_a.is_empty() || set_b.is_empty() {
        return Vec::new();
    }
    let back: Vec<Option<(usize, u32)>> = set_b.iter().map(|b| nearest(b, set_a)).collect();
    let mut matches: Vec<Match> = set_a
        .iter()
        .enumerate()
        .filter_map(|(ia, a)| {
            let (ib, distance) = nearest(a, set_b)?;
            (distance <= threshold && back[ib].map(|(j, _)| j) == Some(ia)).then_some(Match {
                index_a: ia,
                index_b: ib,
                distance,
            })
        })
        .collect();
    matches.sort_by_key(|m| (m.distance, m.index_a));
    matches
}
