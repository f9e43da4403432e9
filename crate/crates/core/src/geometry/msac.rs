use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Point2, RigidTransform};
use crate::descriptor::Match;
use crate::error::{Error, Result, Stage};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MsacParams {
    /// Residual (pixels) at which the quadratic loss saturates.
    pub inlier_threshold: f64,
    pub confidence: f64,
    pub max_iterations: usize,
    pub min_inliers: usize,
}

impl Default for MsacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 1.5,
            confidence: 0.99,
            max_iterations: 2000,
            min_inliers: 6,
        }
    }
}

impl MsacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::invalid("msac.inlier_threshold must be > 0"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid("msac.confidence must lie in (0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("msac.max_iterations must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidEstimate<T> {
    pub transform: RigidTransform<T>,
    /// One flag per input match.
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
    pub iterations: usize,
}

const MIN_SAMPLE_SPREAD: f64 = 2.0;
const REFIT_ROUNDS: usize = 3;

/// Exact rigid motion taking `(a1, a2)` onto `(b1, b2)`, up to the spread mismatch.
pub fn solve_two_point<T: Scalar>(a1: Point2<T>, a2: Point2<T>, b1: Point2<T>, b2: Point2<T>) -> RigidTransform<T> {
    let theta = a2.sub(a1).angle_deg() - b2.sub(b1).angle_deg();
    let rot = RigidTransform::new(T::zero(), T::zero(), theta);
    let moved = rot.apply(a1);
    RigidTransform::new(b1.x - moved.x, b1.y - moved.y, theta)
}

/// Least-squares rigid motion (orthogonal Procrustes without scale).
pub fn fit_rigid_least_squares<T: Scalar>(pairs: &[(Point2<T>, Point2<T>)]) -> Option<RigidTransform<T>> {
    if pairs.len() < 2 {
        return None;
    }
    let n = T::from_usize(pairs.len())?;
    let (mut ca, mut cb) = (Point2::zero(), Point2::zero());
    for (a, b) in pairs {
        ca = ca.add(*a);
        cb = cb.add(*b);
    }
    ca = ca.scale(T::one() / n);
    cb = cb.scale(T::one() / n);
    let (mut dot, mut cross) = (T::zero(), T::zero());
    for (a, b) in pairs {
        let (a, b) = (a.sub(ca), b.sub(cb));
        dot = dot + a.dot(b);
        cross = cross + (b.x * a.y - b.y * a.x);
    }
    if dot == T::zero() && cross == T::zero() {
        return None;
    }
    let theta = cross.atan2(dot).to_degrees();
    let rot = RigidTransform::new(T::zero(), T::zero(), theta);
    let moved = rot.apply(ca);
    Some(RigidTransform::new(cb.x - moved.x, cb.y - moved.y, theta))
}

/// MSAC over two-point samples, followed by iterated least-squares refits on
/// the inlier set. Deterministic for a given `seed`.
pub fn estimate_rigid<T: Scalar>(
    points_a: &[Point2<T>],
    points_b: &[Point2<T>],
    matches: &[Match],
    params: &MsacParams,
    seed: u64,
) -> Result<RigidEstimate<T>> {
    params.validate()?;
    if matches.len() < 2 {
        return Err(Error::stage(Stage::Estimate, format!("need at least 2 matches, got {}", matches.len())));
    }
    let pairs: Vec<(Point2<T>, Point2<T>)> = matches
        .iter()
        .map(|m| {
            let a = points_a.get(m.index_a).copied();
            let b = points_b.get(m.index_b).copied();
            a.zip(b).ok_or_else(|| Error::invalid("match index out of range"))
        })
        .collect::<Result<_>>()?;

    let n = pairs.len();
    let th = T::lit(params.inlier_threshold);
    let th2 = th * th;
    let min_spread = T::lit(MIN_SAMPLE_SPREAD);
    let score = |t: &RigidTransform<T>| -> (T, usize) {
        let mut s = T::zero();
        let mut count = 0;
        for (a, b) in &pairs {
            let r2 = t.apply(*a).sub(*b).norm_sq();
            if r2 < th2 {
                count += 1;
                s = s + r2;
            } else {
                s = s + th2;
            }
        }
        (s, count)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(T, usize, RigidTransform<T>)> = None;
    let mut needed = params.max_iterations;
    let mut iterations = 0;
    let mut attempts = 0;
    while iterations < needed && attempts < params.max_iterations * 4 {
        attempts += 1;
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let (a1, b1) = pairs[i];
        let (a2, b2) = pairs[j];
        if a1.distance(a2) < min_spread || b1.distance(b2) < min_spread {
            continue;
        }
        iterations += 1;
        let model = solve_two_point(a1, a2, b1, b2);
        let (s, count) = score(&model);
        if best.as_ref().is_none_or(|(bs, _, _)| s < *bs) {
            best = Some((s, count, model));
            let w = count as f64 / n as f64;
            needed = adaptive_iterations(w, params.confidence, params.max_iterations);
        }
    }
    let Some((_, _, mut model)) = best else {
        return Err(Error::stage(Stage::Estimate, "all samples degenerate"));
    };

    let mut inliers = inlier_mask(&pairs, &model, th2);
    for _ in 0..REFIT_ROUNDS {
        let set: Vec<_> = pairs.iter().zip(&inliers).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
        let Some(refit) = fit_rigid_least_squares(&set) else { break };
        let next = inlier_mask(&pairs, &refit, th2);
        model = refit;
        if next == inliers {
            break;
        }
        inliers = next;
    }
    let inlier_count = inliers.iter().filter(|&&k| k).count();
    if inlier_count < params.min_inliers.max(2) {
        return Err(Error::stage(
            Stage::Estimate,
            format!("only {inlier_count} inliers, need {}", params.min_inliers),
        ));
    }
    Ok(RigidEstimate {
        transform: model,
        inliers,
        inlier_count,
        iterations,
    })
}

fn inlier_mask<T: Scalar>(pairs: &[(Point2<T>, Point2<T>)], t: &RigidTransform<T>, th2: T) -> Vec<bool> {
    pairs.iter().map(|(a, b)| t.apply(*a).sub(*b).norm_sq() < th2).collect()
}

fn adaptive_iterations(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    let good = inlier_ratio * inlier_ratio;
    if good >= 1.0 {
        return 1;
    }
    if good <= 0.0 {
        return cap;
    }
    let k = (1.0 - confidence).ln() / (1.0 - good).ln();
    if k.is_finite() {
        (k.ceil() as usize).clamp(1, cap)
    } else {
        cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid<T: Scalar>() -> Vec<Point2<T>> {
        (0..36).map(|i| Point2::new(T::lit(20.0 + (i % 6) as f64 * 37.0), T::lit(15.0 + (i / 6) as f64 * 41.0))).collect()
    }

    fn identity_matches(n: usize) -> Vec<Match> {
        (0..n).map(|i| Match { index_a: i, index_b: i, distance: 0 }).collect()
    }

    #[test]
    fn identity_recovered() {
        let a = grid::<f64>();
        let est = estimate_rigid(&a, &a, &identity_matches(a.len()), &MsacParams::default(), 7).unwrap();
        let (dx, dy, dt) = est.transform.decompose();
        assert!(dx.abs() < 1e-12 && dy.abs() < 1e-12 && dt.abs() < 1e-12);
        assert_eq!(est.inlier_count, a.len());
    }

    fn exact_recovery<T: Scalar>(tol: f64) {
        let a = grid::<T>();
        let truth = RigidTransform::rotation_about(Point2::new(T::lit(127.5), T::lit(127.5)), T::lit(5.0))
            .then(&RigidTransform::translation(T::lit(3.0), T::lit(-2.0)));
        let b: Vec<_> = a.iter().map(|&p| truth.apply(p)).collect();
        let est = estimate_rigid(&a, &b, &identity_matches(a.len()), &MsacParams::default(), 3).unwrap();
        let t = est.transform;
        assert!((t.dx - truth.dx).abs().as_f64() < tol, "{:?} vs {:?}", t, truth);
        assert!((t.dy - truth.dy).abs().as_f64() < tol);
        assert!((t.dtheta - truth.dtheta).abs().as_f64() < tol);
    }

    #[test]
    fn exact_recovery_f64() {
        exact_recovery::<f64>(1e-9);
    }

    #[test]
    fn exact_recovery_f32() {
        exact_recovery::<f32>(2e-3);
    }

    #[test]
    fn too_few_matches() {
        let a = grid::<f64>();
        let err = estimate_rigid(&a, &a, &identity_matches(1), &MsacParams::default(), 0).unwrap_err();
        assert_eq!(err.failed_stage(), Some(Stage::Estimate));
    }

    #[test]
    fn min_inliers_signals_loss() {
        let a = grid::<f64>();
        let m = identity_matches(4);
        let err = estimate_rigid(&a, &a, &m, &MsacParams::default(), 0).unwrap_err();
        assert_eq!(err.failed_stage(), Some(Stage::Estimate));
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let a = vec![Point2::new(5.0, 5.0); 10];
        assert!(estimate_rigid(&a, &a, &identity_matches(10), &MsacParams::default(), 0).is_err());
    }

    #[test]
    fn two_point_solver_is_exact() {
        let t = RigidTransform::<f64>::new(4.0, -7.0, -38.0);
        let (a1, a2) = (Point2::new(1.0, 2.0), Point2::new(30.0, -4.0));
        let s = solve_two_point(a1, a2, t.apply(a1), t.apply(a2));
        assert!((s.dx - t.dx).abs() < 1e-12 && (s.dy - t.dy).abs() < 1e-12 && (s.dtheta - t.dtheta).abs() < 1e-12);
    }

    #[test]
    fn adaptive_count() {
        assert_eq!(adaptive_iterations(1.0, 0.99, 2000), 1);
        assert_eq!(adaptive_iterations(0.0, 0.99, 2000), 2000);
        // 50% inliers: log(0.01)/log(0.75) = 16.008 -> 17
        assert_eq!(adaptive_iterations(0.5, 0.99, 2000), 17);
    }
}
