use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::geometry::Point2;
use crate::scalar::{axis_difference_deg, Scalar};

/// Local lattice at the tracked anchor: two basis vectors along the
/// dominant orientations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeBasis<T> {
    pub anchor: Point2<T>,
    pub v1: Point2<T>,
    pub v2: Point2<T>,
    /// Orientations (degrees) that `v1` and `v2` were selected against.
    pub theta_refs: [T; 2],
}

/// Translation expressed in fractional thread units along `v1` and `v2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThreadDelta<T> {
    pub du: T,
    pub dv: T,
}

impl<T: Scalar> ThreadDelta<T> {
    pub fn new(du: T, dv: T) -> Self {
        Self { du, dv }
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.du + o.du, self.dv + o.dv)
    }
}

const SINGULAR: f64 = 1e-6;

impl<T: Scalar> LatticeBasis<T> {
    pub fn det(&self) -> T {
        self.v1.cross(self.v2)
    }

    pub fn is_singular(&self) -> bool {
        self.det().abs() <= T::lit(SINGULAR)
    }

    /// `du * v1 + dv * v2`.
    pub fn reconstruct(&self, delta: ThreadDelta<T>) -> Point2<T> {
        self.v1.scale(delta.du).add(self.v2.scale(delta.dv))
    }

    pub fn pitches(&self) -> (T, T) {
        (self.v1.norm(), self.v2.norm())
    }

    /// The same lattice with axes re-signed and, if needed, swapped so that
    /// they best match `previous`. Keeps thread axes stable across frames.
    pub fn aligned_to(&self, previous: &Self) -> Self {
        let mut best = *self;
        let mut best_cost = T::infinity();
        for swap in [false, true] {
            let (a, b, refs) = if swap {
                (self.v2, self.v1, [self.theta_refs[1], self.theta_refs[0]])
            } else {
                (self.v1, self.v2, self.theta_refs)
            };
            for s1 in [T::one(), -T::one()] {
                for s2 in [T::one(), -T::one()] {
                    let (c1, c2) = (a.scale(s1), b.scale(s2));
                    let cost = c1.sub(previous.v1).norm_sq() + c2.sub(previous.v2).norm_sq();
                    if cost < best_cost {
                        best_cost = cost;
                        best = Self {
                            anchor: self.anchor,
                            v1: c1,
                            v2: c2,
                            theta_refs: refs,
                        };
                    }
                }
            }
        }
        best
    }

    /// Sign and order fixed up to rotation: `v1` is the axis closer to
    /// horizontal, pointing right, and `v2` completes a positive determinant
    /// (y grows downward, so `v2` points down for an upright weave).
    pub fn canonical(&self) -> Self {
        let horizontal = |v: Point2<T>| v.y.abs() / v.norm().max(T::min_positive_value());
        let swap = horizontal(self.v2) < horizontal(self.v1);
        let (mut v1, mut v2, refs) = if swap {
            (self.v2, self.v1, [self.theta_refs[1], self.theta_refs[0]])
        } else {
            (self.v1, self.v2, self.theta_refs)
        };
        if v1.x < T::zero() || (v1.x == T::zero() && v1.y > T::zero()) {
            v1 = v1.scale(-T::one());
        }
        if v1.x * v2.y - v1.y * v2.x < T::zero() {
            v2 = v2.scale(-T::one());
        }
        Self { anchor: self.anchor, v1, v2, theta_refs: refs }
    }

    pub fn cast<U: Scalar>(&self) -> LatticeBasis<U> {
        LatticeBasis {
            anchor: self.anchor.cast(),
            v1: self.v1.cast(),
            v2: self.v2.cast(),
            theta_refs: [U::lit(self.theta_refs[0].as_f64()), U::lit(self.theta_refs[1].as_f64())],
        }
    }
}

/// Selection cost of `candidate` for the axis `theta_ref`:
/// `|x - y| + w * fold(angle(y - x) - theta_ref)`, with the angular term in
/// degrees folded into [0, 90].
pub fn lattice_distance<T: Scalar>(anchor: Point2<T>, candidate: Point2<T>, theta_ref: T, w: T) -> T {
    let v = candidate.sub(anchor);
    v.norm() + w * axis_difference_deg(v.angle_deg(), theta_ref)
}

fn polar_angle<T: Scalar>(v: Point2<T>) -> T {
    let a = v.angle_deg();
    if a < T::zero() {
        a + T::lit(360.0)
    } else {
        a
    }
}

/// Index of the cheapest admissible candidate for one axis, ties broken by
/// the smaller polar angle in [0, 360).
fn select_axis<T: Scalar>(
    anchor: Point2<T>,
    candidates: &[Point2<T>],
    theta_ref: T,
    w: T,
    tolerance: T,
    admissible: impl Fn(usize) -> bool,
) -> Option<usize> {
    let scored: Vec<(usize, T)> = candidates
        .iter()
        .enumerate()
        .filter(|&(i, c)| {
            let v = c.sub(anchor);
            admissible(i) && v.norm() > T::zero() && axis_difference_deg(v.angle_deg(), theta_ref) <= tolerance
        })
        .map(|(i, &c)| (i, lattice_distance(anchor, c, theta_ref, w)))
        .collect();
    let min = scored.iter().map(|s| s.1).fold(T::infinity(), T::min);
    if !min.is_finite() {
        return None;
    }
    let eps = T::epsilon() * T::lit(64.0) * min.max(T::one());
    scored
        .iter()
        .filter(|s| s.1 <= min + eps)
        .map(|s| s.0)
        .min_by(|&a, &b| {
            polar_angle(candidates[a].sub(anchor))
                .partial_cmp(&polar_angle(candidates[b].sub(anchor)))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        })
}

/// Picks one candidate per reference orientation minimizing the lattice
/// distance; the second axis skips the first axis' point and any choice that
/// would make the basis singular.
pub fn detect_lattice<T: Scalar>(
    anchor: Point2<T>,
    candidates: &[Point2<T>],
    theta_refs: [T; 2],
    w: T,
    angular_tolerance: T,
) -> Result<LatticeBasis<T>> {
    if candidates.len() < 2 {
        return Err(Error::stage(Stage::DetectLattice, format!("{} candidates, need 2", candidates.len())));
    }
    let first = select_axis(anchor, candidates, theta_refs[0], w, angular_tolerance, |_| true)
        .ok_or_else(|| Error::stage(Stage::DetectLattice, "no admissible candidate along the first axis"))?;
    let v1 = candidates[first].sub(anchor);
    let second = select_axis(anchor, candidates, theta_refs[1], w, angular_tolerance, |i| {
        i != first && v1.cross(candidates[i].sub(anchor)).abs() > T::lit(SINGULAR)
    })
    .ok_or_else(|| Error::stage(Stage::DetectLattice, "no admissible candidate along the second axis"))?;
    Ok(LatticeBasis {
        anchor,
        v1,
        v2: candidates[second].sub(anchor),
        theta_refs,
    })
}

/// Solves `[v1 v2] (du, dv)^T = translation` in closed form.
pub fn thread_decompose<T: Scalar>(translation: Point2<T>, basis: &LatticeBasis<T>) -> Result<ThreadDelta<T>> {
    let det = basis.det();
    if det.abs() <= T::lit(SINGULAR) {
        return Err(Error::invalid("singular lattice basis"));
    }
    let (v1, v2, t) = (basis.v1, basis.v2, translation);
    Ok(ThreadDelta {
        du: (t.x * v2.y - v2.x * t.y) / det,
        dv: (v1.x * t.y - t.x * v1.y) / det,
    })
}

/// Thread counts scaled to millimetres.
pub fn threads_to_physical<T: Scalar>(delta: ThreadDelta<T>, mm_per_thread: T) -> Result<(T, T)> {
    if !(mm_per_thread > T::zero()) {
        return Err(Error::invalid("mm_per_thread must be positive"));
    }
    Ok((delta.du * mm_per_thread, delta.dv * mm_per_thread))
}

/// Least-squares lattice fit: assigns integer lattice coordinates to the
/// correlation peaks (the anchor's own peak, if known, as well) and solves
/// for origin, `v1` and `v2` jointly. Returns the input basis when the peaks
/// do not constrain all three.
pub fn refine_basis<T: Scalar>(basis: &LatticeBasis<T>, anchor_peak: Option<Point2<T>>, peaks: &[Point2<T>]) -> LatticeBasis<T> {
    let origin = anchor_peak.unwrap_or(basis.anchor);
    let det = basis.det();
    if det.abs() <= T::lit(SINGULAR) {
        return *basis;
    }
    let tolerance = T::lit(0.25) * basis.v1.norm().min(basis.v2.norm());
    let mut rows: Vec<([T; 3], Point2<T>)> = Vec::with_capacity(peaks.len() + 1);
    if anchor_peak.is_some() {
        rows.push(([T::one(), T::zero(), T::zero()], origin));
    }
    for &p in peaks {
        let Ok(d) = thread_decompose(p.sub(origin), basis) else {
            return *basis;
        };
        let (i, j) = (d.du.round(), d.dv.round());
        if (i == T::zero() && j == T::zero()) || i.abs() > T::lit(3.0) || j.abs() > T::lit(3.0) {
            continue;
        }
        let predicted = origin.add(basis.v1.scale(i)).add(basis.v2.scale(j));
        if predicted.distance(p) <= tolerance {
            rows.push(([T::one(), i, j], p));
        }
    }
    let mut m = [[T::zero(); 3]; 3];
    let mut rx = [T::zero(); 3];
    let mut ry = [T::zero(); 3];
    for (a, p) in &rows {
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = m[r][c] + a[r] * a[c];
            }
            rx[r] = rx[r] + a[r] * p.x;
            ry[r] = ry[r] + a[r] * p.y;
        }
    }
    let (Some(sx), Some(sy)) = (solve3(m, rx), solve3(m, ry)) else {
        return *basis;
    };
    let refined = LatticeBasis {
        anchor: basis.anchor,
        v1: Point2::new(sx[1], sy[1]),
        v2: Point2::new(sx[2], sy[2]),
        theta_refs: basis.theta_refs,
    };
    if refined.is_singular() {
        *basis
    } else {
        refined
    }
}

/// Cramer's rule with a conditioning guard.
fn solve3<T: Scalar>(m: [[T; 3]; 3], r: [T; 3]) -> Option<[T; 3]> {
    let det3 = |m: &[[T; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&m);
    let scale = m.iter().flatten().fold(T::zero(), |a, &v| a.max(v.abs()));
    if !(d.abs() > T::lit(1e-9) * scale * scale * scale) {
        return None;
    }
    let mut out = [T::zero(); 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for row in 0..3 {
            mk[row][k] = r[row];
        }
        *o = det3(&mk) / d;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn basis(v1: Point2<f64>, v2: Point2<f64>) -> LatticeBasis<f64> {
        LatticeBasis { anchor: p(0.0, 0.0), v1, v2, theta_refs: [0.0, 90.0] }
    }

    #[test]
    fn canonical_orientation() {
        let b = basis(p(0.1, -7.5), p(-7.5, 0.2)).canonical();
        assert_eq!(b.v1, p(7.5, -0.2));
        assert_eq!(b.v2, p(0.1, -7.5).scale(-1.0));
        assert!(b.det() > 0.0);
        assert_eq!(b.theta_refs, [90.0, 0.0]);
        let again = b.canonical();
        assert_eq!(again.v1, b.v1);
        assert_eq!(again.v2, b.v2);
    }

    #[test]
    fn distance_formula_by_hand() {
        let o = p(0.0, 0.0);
        // (candidate, theta_ref, w, expected)
        let cases = [
            (p(10.0, 0.0), 0.0, 0.5, 10.0),
            (p(3.0, 4.0), 0.0, 0.5, 5.0 + 0.5 * 53.130_102_354_155_98),
            (p(-3.0, 4.0), 90.0, 1.0, 5.0 + 36.869_897_645_844_02),
            (p(0.0, -7.0), 90.0, 2.0, 7.0),
            (p(-5.0, -5.0), 170.0, 0.5, 50f64.sqrt() + 0.5 * 55.0),
        ];
        for (c, t, w, want) in cases {
            let got = lattice_distance(o, c, t, w);
            assert!((got - want).abs() < 1e-12, "{c:?}: {got} vs {want}");
        }
        // anchor offset changes nothing but the vector
        let a = p(2.0, -1.0);
        assert!((lattice_distance(a, p(5.0, 3.0), 0.0, 0.5) - (5.0 + 0.5 * 53.130_102_354_155_98)).abs() < 1e-12);
    }

    #[test]
    fn on_axis_points_win() {
        let cands = [p(9.0, 3.0), p(10.0, 0.0), p(2.0, 11.0), p(0.0, 12.0), p(-8.0, 9.0), p(7.0, 7.0)];
        let b = detect_lattice(p(0.0, 0.0), &cands, [0.0, 90.0], 0.5, 15.0).unwrap();
        assert_eq!(b.v1, p(10.0, 0.0));
        assert_eq!(b.v2, p(0.0, 12.0));
    }

    #[test]
    fn symmetric_tie_takes_smaller_polar_angle() {
        let a = p(50.0, 50.0);
        let cands = [p(42.5, 50.0), p(57.5, 50.0), p(50.0, 57.5), p(50.0, 42.5)];
        let b = detect_lattice(a, &cands, [0.0, 90.0], 0.5, 15.0).unwrap();
        assert_eq!(b.v1, p(7.5, 0.0));
        assert_eq!(b.v2, p(0.0, 7.5));
    }

    #[test]
    fn same_point_goes_to_next_best() {
        let cands = [p(10.0, 0.0), p(0.0, 15.0)];
        // both references near 0 and 30 degrees; (10,0) is admissible for both
        let b = detect_lattice(p(0.0, 0.0), &cands, [0.0, 12.0], 0.0, 15.0);
        assert!(b.is_err());
        let cands = [p(10.0, 0.0), p(11.0, 5.0)];
        let b = detect_lattice(p(0.0, 0.0), &cands, [0.0, 20.0], 0.0, 15.0).unwrap();
        assert_eq!(b.v1, p(10.0, 0.0));
        assert_eq!(b.v2, p(11.0, 5.0));
    }

    #[test]
    fn errors() {
        assert!(detect_lattice(p(0.0, 0.0), &[p(1.0, 0.0)], [0.0, 90.0], 0.5, 15.0).is_err());
        let far_off = [p(5.0, 5.0), p(-5.0, 5.0)];
        let e = detect_lattice(p(0.0, 0.0), &far_off, [0.0, 90.0], 0.5, 15.0).unwrap_err();
        assert_eq!(e.failed_stage(), Some(Stage::DetectLattice));
    }

    #[test]
    fn decomposition() {
        let b = basis(p(7.5, 0.0), p(0.0, 7.5));
        let d = thread_decompose(p(3.7, -1.2), &b).unwrap();
        assert!((d.du - 0.493_333_333_333_333_3).abs() < 1e-12 && (d.dv + 0.16).abs() < 1e-12);
        let skew = basis(p(7.0, 1.0), p(-2.0, 8.0));
        let d = thread_decompose(skew.v1, &skew).unwrap();
        assert!((d.du - 1.0).abs() < 1e-12 && d.dv.abs() < 1e-12);
        let t = skew.v1.scale(0.5).add(skew.v2.scale(2.0));
        let d = thread_decompose(t, &skew).unwrap();
        assert!((d.du - 0.5).abs() < 1e-12 && (d.dv - 2.0).abs() < 1e-12);
        assert!(thread_decompose(p(1.0, 1.0), &basis(p(1.0, 1.0), p(2.0, 2.0))).is_err());
    }

    #[test]
    fn physical_units() {
        let (x, y) = threads_to_physical(ThreadDelta::new(1.0, 0.0), 0.33).unwrap();
        assert_eq!((x, y), (0.33, 0.0));
        assert_eq!(threads_to_physical(ThreadDelta::new(0.0, 0.0), 0.33).unwrap(), (0.0, 0.0));
        let (x, y) = threads_to_physical(ThreadDelta::<f64>::new(2.5, -1.0), 0.4).unwrap();
        assert!((x - 1.0).abs() < 1e-15 && (y + 0.4).abs() < 1e-15);
        assert!(threads_to_physical(ThreadDelta::new(1.0, 1.0), 0.0).is_err());
        assert!(threads_to_physical(ThreadDelta::new(1.0, 1.0), -0.3).is_err());
    }

    #[test]
    fn f32_decomposition() {
        let b = LatticeBasis::<f32> {
            anchor: Point2::new(0.0, 0.0),
            v1: Point2::new(7.5, 0.0),
            v2: Point2::new(0.0, 7.5),
            theta_refs: [0.0, 90.0],
        };
        let d = thread_decompose(Point2::new(3.7f32, -1.2), &b).unwrap();
        assert!((d.du - 0.493_333).abs() < 1e-5 && (d.dv + 0.16).abs() < 1e-5);
    }

    #[test]
    fn alignment_restores_previous_axes() {
        let prev = basis(p(7.5, 0.2), p(-0.1, 7.4));
        let flipped = LatticeBasis { anchor: p(0.0, 0.0), v1: p(0.0, -7.5), v2: p(-7.5, 0.0), theta_refs: [90.0, 0.0] };
        let a = flipped.aligned_to(&prev);
        assert_eq!(a.v1, p(7.5, 0.0));
        assert_eq!(a.v2, p(0.0, 7.5));
        assert_eq!(a.theta_refs, [0.0, 90.0]);
    }

    #[test]
    fn refinement_recovers_exact_lattice() {
        let (v1, v2, o) = (p(7.3, 0.4), p(-0.6, 8.1), p(0.2, -0.1));
        let mut peaks = Vec::new();
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                if i != 0 || j != 0 {
                    peaks.push(o.add(v1.scale(i as f64)).add(v2.scale(j as f64)));
                }
            }
        }
        let rough = LatticeBasis { anchor: p(0.0, 0.0), v1: p(7.0, 0.0), v2: p(0.0, 8.0), theta_refs: [0.0, 90.0] };
        let r = refine_basis(&rough, Some(o), &peaks);
        assert!(r.v1.distance(v1) < 1e-9 && r.v2.distance(v2) < 1e-9, "{r:?}");
        assert_eq!(r.anchor, rough.anchor);
        // too few peaks: unchanged
        assert_eq!(refine_basis(&rough, None, &peaks[..1]), rough);
    }
}
