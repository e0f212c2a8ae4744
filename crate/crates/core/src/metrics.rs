//! Curve and flow evaluation: arc-length resampling, sliding alignment,
//! thresholded F-measure, Modified Hausdorff Distance and angular error.

use nalgebra::Vector2;

use crate::dynamics::Vec3;
use crate::error::{Error, Result};

/// Points on the longer curve after resampling for comparison.
pub const DEFAULT_RESAMPLE_POINTS: usize = 120;
/// Default F-measure threshold as a fraction of the ground-truth arc length.
pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.05;
/// Lower bound on the default threshold, for point-like ground truth.
pub const MIN_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Curve3D {
    points: Vec<Vec3>,
}

impl Curve3D {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Metric(format!(
                "a curve needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::Metric("curve has non-finite coordinates".into()));
        }
        Ok(Self { points })
    }

    /// Curve through `points`, repeating a lone point so it still has two.
    pub fn from_track(mut points: Vec<Vec3>) -> Result<Self> {
        if points.len() == 1 {
            points.push(points[0]);
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn translated(&self, by: &Vec3) -> Self {
        Self {
            points: self.points.iter().map(|p| p + by).collect(),
        }
    }
}

/// `n` points spaced uniformly by arc length; both endpoints are kept exactly.
pub fn resample(curve: &Curve3D, n: usize) -> Result<Curve3D> {
    if n < 2 {
        return Err(Error::Param(format!("resample count must be >= 2, got {n}")));
    }
    let pts = curve.points();
    let total = curve.arc_length();
    if !(total > 0.0) {
        return Err(Error::Metric("cannot resample a zero-length curve".into()));
    }
    let mut out = Vec::with_capacity(n);
    out.push(pts[0]);
    let mut seg = 0;
    let mut seg_start = 0.0;
    let mut seg_len = (pts[1] - pts[0]).norm();
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while seg_start + seg_len < target && seg + 2 < pts.len() {
            seg_start += seg_len;
            seg += 1;
            seg_len = (pts[seg + 1] - pts[seg]).norm();
        }
        let frac = if seg_len > 0.0 {
            ((target - seg_start) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(pts[seg] + (pts[seg + 1] - pts[seg]) * frac);
    }
    out.push(pts[pts.len() - 1]);
    Curve3D::new(out)
}

/// Resamples both curves to a common point spacing: the longer one (by arc
/// length) gets `n_long` points, the shorter proportionally fewer, at least 2.
/// A zero-length curve becomes two copies of its first point.
pub fn resample_common(a: &Curve3D, b: &Curve3D, n_long: usize) -> Result<(Curve3D, Curve3D)> {
    if n_long < 2 {
        return Err(Error::Param(format!("resample count must be >= 2, got {n_long}")));
    }
    let (la, lb) = (a.arc_length(), b.arc_length());
    let longest = la.max(lb);
    let count = |len: f64| -> usize {
        if longest > 0.0 {
            (((n_long - 1) as f64 * len / longest).round() as usize + 1).max(2)
        } else {
            2
        }
    };
    let take = |c: &Curve3D, len: f64| -> Result<Curve3D> {
        if len > 0.0 {
            resample(c, count(len))
        } else {
            Curve3D::new(vec![c.points()[0]; 2])
        }
    };
    Ok((take(a, la)?, take(b, lb)?))
}

fn mean_distance(short: &[Vec3], long: &[Vec3], offset: usize) -> f64 {
    short
        .iter()
        .zip(&long[offset..])
        .map(|(p, q)| (p - q).norm())
        .sum::<f64>()
        / short.len() as f64
}

/// Best offset of `short` along `long` by exhaustive scan; ties go to the smallest offset.
fn align_points(short: &[Vec3], long: &[Vec3]) -> (usize, f64) {
    debug_assert!(short.len() <= long.len());
    let mut best = (0, mean_distance(short, long, 0));
    for offset in 1..=long.len() - short.len() {
        let d = mean_distance(short, long, offset);
        if d < best.1 {
            best = (offset, d);
        }
    }
    best
}

/// Slides the curve with fewer points along the other and returns the offset
/// (into the longer curve) with the smallest mean pointwise distance.
pub fn slide_align(a: &Curve3D, b: &Curve3D) -> Result<(usize, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metric("cannot align empty curves".into()));
    }
    Ok(if a.len() <= b.len() {
        align_points(a.points(), b.points())
    } else {
        align_points(b.points(), a.points())
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FMeasureResult {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub best_offset: usize,
    pub threshold: f64,
}

/// F-measure in `[0, 100]` after sliding alignment.
///
/// Aligned pairs within `threshold` are true positives. Precision divides by
/// the predicted point count and recall by the ground-truth count, so the
/// unaligned overhang of the longer curve is charged to that side.
pub fn f_measure(pred: &Curve3D, gt: &Curve3D, threshold: f64) -> Result<FMeasureResult> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::Param(format!("threshold must be > 0, got {threshold}")));
    }
    let pred_short = pred.len() <= gt.len();
    let (short, long) = if pred_short {
        (pred.points(), gt.points())
    } else {
        (gt.points(), pred.points())
    };
    let (best_offset, _) = align_points(short, long);
    let hits = short
        .iter()
        .zip(&long[best_offset..])
        .filter(|(p, q)| (*p - *q).norm() <= threshold)
        .count() as f64;
    let precision = 100.0 * hits / pred.len() as f64;
    let recall = 100.0 * hits / gt.len() as f64;
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FMeasureResult {
        precision,
        recall,
        f,
        best_offset,
        threshold,
    })
}

/// Threshold used when none is given: 5% of the ground-truth arc length.
pub fn default_threshold(gt: &Curve3D) -> f64 {
    (DEFAULT_THRESHOLD_FRACTION * gt.arc_length()).max(MIN_THRESHOLD)
}

fn directed_mean(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / a.len() as f64
}

/// Modified Hausdorff Distance: the larger of the two directed mean nearest-point distances.
pub fn mhd(a: &Curve3D, b: &Curve3D) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metric("mhd of an empty curve".into()));
    }
    Ok(directed_mean(a.points(), b.points()).max(directed_mean(b.points(), a.points())))
}

/// Angle in `[0, pi]` between two unit (or zero) directions. Zero against
/// zero is 0; zero against a direction is `pi / 2`.
pub fn angular_error(pred: &Vector2<f64>, gt: &Vector2<f64>) -> f64 {
    let zp = pred.norm() == 0.0;
    let zg = gt.norm() == 0.0;
    match (zp, zg) {
        (true, true) => 0.0,
        (true, false) | (false, true) => std::f64::consts::FRAC_PI_2,
        // atan2 is exact for identical and opposite directions, unlike acos near +-1
        (false, false) => (pred.x * gt.y - pred.y * gt.x).abs().atan2(pred.dot(gt)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(n: usize, len: f64) -> Curve3D {
        Curve3D::new(
            (0..n)
                .map(|i| Vec3::new(len * i as f64 / (n - 1) as f64, 0.0, 0.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn resample_straight_segment() {
        let c = Curve3D::new(vec![Vec3::zeros(), Vec3::x()]).unwrap();
        let r = resample(&c, 5).unwrap();
        let xs: Vec<f64> = r.points().iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn resample_uniform_is_identity() {
        let c = line(11, 2.0);
        let r = resample(&c, 11).unwrap();
        for (p, q) in c.points().iter().zip(r.points()) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn resample_keeps_endpoints_and_rejects_degenerate() {
        let c = Curve3D::new(vec![
            Vec3::new(0.3, 0.1, 0.0),
            Vec3::new(1.0, 2.0, 0.5),
            Vec3::new(-1.0, 0.7, 3.0),
        ])
        .unwrap();
        let r = resample(&c, 17).unwrap();
        assert_eq!(r.points()[0], c.points()[0]);
        assert_eq!(r.points()[16], c.points()[2]);
        let flat = Curve3D::new(vec![Vec3::x(); 3]).unwrap();
        assert!(matches!(resample(&flat, 5), Err(Error::Metric(_))));
        assert!(resample(&c, 1).is_err());
        assert!(Curve3D::new(vec![Vec3::x()]).is_err());
    }

    #[test]
    fn corner_resampling_is_not_idempotent() {
        // chords cut the corner, so the second pass sees a shorter curve
        let c = Curve3D::new(vec![Vec3::zeros(), Vec3::x(), Vec3::new(1.0, 1.0, 0.0)]).unwrap();
        let once = resample(&c, 4).unwrap();
        let twice = resample(&once, 4).unwrap();
        assert!((once.points()[1] - twice.points()[1]).norm() > 1e-3);
    }

    #[test]
    fn slide_align_examples() {
        let b = line(90, 3.0);
        assert_eq!(slide_align(&b, &b).unwrap(), (0, 0.0));

        let a = Curve3D::new(b.points()[30..60].to_vec()).unwrap();
        let (offset, d) = slide_align(&a, &b).unwrap();
        assert_eq!(offset, 30);
        assert_eq!(d, 0.0);
        // argument order does not matter
        assert_eq!(slide_align(&b, &a).unwrap(), (30, 0.0));
    }

    #[test]
    fn perpendicular_translation_ties_to_offset_zero() {
        let b = line(40, 1.0);
        let a = Curve3D::new(b.points()[..20].to_vec()).unwrap();
        let shifted = a.translated(&Vec3::new(0.0, 0.25, 0.0));
        let (offset, d) = slide_align(&shifted, &b).unwrap();
        // offset 0 is exact; other offsets add an along-curve component
        assert_eq!(offset, 0);
        assert!((d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn translated_line_constant_distance_at_every_offset() {
        // a curve transverse offset from a constant line: every offset has mean distance d
        let b = Curve3D::new(vec![Vec3::new(0.0, 0.0, 0.0); 30]).unwrap();
        let a = Curve3D::new(vec![Vec3::new(0.0, 0.5, 0.0); 10]).unwrap();
        assert_eq!(slide_align(&a, &b).unwrap(), (0, 0.5));
    }

    #[test]
    fn f_measure_examples() {
        let gt = line(120, 1.0);
        let r = f_measure(&gt, &gt, 0.01).unwrap();
        assert_eq!((r.precision, r.recall, r.f), (100.0, 100.0, 100.0));

        let far = gt.translated(&Vec3::new(0.0, 0.1, 0.0));
        assert_eq!(f_measure(&far, &gt, 0.01).unwrap().f, 0.0);

        let mut half: Vec<Vec3> = gt.points().to_vec();
        for p in half.iter_mut().skip(60) {
            p.y += 0.1;
        }
        let half = Curve3D::new(half).unwrap();
        let r = f_measure(&half, &gt, 0.01).unwrap();
        assert_eq!((r.precision, r.recall, r.f), (50.0, 50.0, 50.0));

        assert!(matches!(f_measure(&gt, &gt, 0.0), Err(Error::Param(_))));
        assert!(f_measure(&gt, &gt, -1.0).is_err());
    }

    #[test]
    fn f_measure_overhang_accounting() {
        let gt = line(100, 1.0);
        let pred = Curve3D::new(gt.points()[..50].to_vec()).unwrap();
        let r = f_measure(&pred, &gt, 1e-3).unwrap();
        assert_eq!(r.precision, 100.0);
        assert_eq!(r.recall, 50.0);
        let r = f_measure(&gt, &pred, 1e-3).unwrap();
        assert_eq!(r.precision, 50.0);
        assert_eq!(r.recall, 100.0);
    }

    #[test]
    fn mhd_examples() {
        let a = line(50, 2.0);
        assert_eq!(mhd(&a, &a).unwrap(), 0.0);
        let b = a.translated(&Vec3::new(0.0, 0.0, 0.3));
        assert!((mhd(&a, &b).unwrap() - 0.3).abs() < 1e-12);
        let c = Curve3D::new(vec![Vec3::zeros(), Vec3::new(0.5, 1.0, 0.0), Vec3::new(1.0, 0.0, 2.0)]).unwrap();
        assert_eq!(mhd(&a, &c).unwrap(), mhd(&c, &a).unwrap());
    }

    #[test]
    fn common_resampling_shares_spacing() {
        let long = line(7, 2.0);
        let short = line(3, 1.0);
        let (a, b) = resample_common(&long, &short, 121).unwrap();
        assert_eq!(a.len(), 121);
        assert_eq!(b.len(), 61);
        let point = Curve3D::from_track(vec![Vec3::new(1.0, 2.0, 3.0)]).unwrap();
        let (p, q) = resample_common(&point, &point, 120).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(f_measure(&p, &q, MIN_THRESHOLD).unwrap().f, 100.0);
    }

    #[test]
    fn angular_error_cases() {
        let x = Vector2::new(1.0, 0.0);
        let y = Vector2::new(0.0, 1.0);
        assert_eq!(angular_error(&x, &x), 0.0);
        assert_eq!(angular_error(&x, &y), PI / 2.0);
        assert_eq!(angular_error(&x, &-x), PI);
        assert_eq!(angular_error(&Vector2::zeros(), &Vector2::zeros()), 0.0);
        assert_eq!(angular_error(&Vector2::zeros(), &x), PI / 2.0);
    }
}
