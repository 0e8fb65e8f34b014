//! Upper convex hull of (BV, FOM) data and the multiplier derived from it.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub bv: f64,
    pub fom: f64,
    pub source_index: usize,
}

impl FrontierPoint {
    pub fn new(bv: f64, fom: f64, source_index: usize) -> Self {
        Self { bv, fom, source_index }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error("cannot build a hull from zero points")]
    Empty,
    #[error("point {0} is not finite")]
    NotFinite(usize),
}

/// Vertices of the least concave majorant, by strictly increasing `bv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperHull {
    points: Vec<FrontierPoint>,
}

fn cross(o: &FrontierPoint, a: &FrontierPoint, b: &FrontierPoint) -> f64 {
    (a.bv - o.bv) * (b.fom - o.fom) - (a.fom - o.fom) * (b.bv - o.bv)
}

/// Monotone chain, upper half only. Points sharing a `bv` are collapsed to the
/// one with the largest `fom` (lowest `source_index` on a tie), and vertices
/// collinear with their neighbours are dropped.
pub fn upper_hull(points: &[FrontierPoint]) -> Result<UpperHull, HullError> {
    if points.is_empty() {
        return Err(HullError::Empty);
    }
    if let Some(i) = points.iter().position(|p| !(p.bv.is_finite() && p.fom.is_finite())) {
        return Err(HullError::NotFinite(i));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.bv.total_cmp(&b.bv)
            .then(b.fom.total_cmp(&a.fom))
            .then(a.source_index.cmp(&b.source_index))
    });
    sorted.dedup_by(|later, first| later.bv == first.bv);

    let mut hull: Vec<FrontierPoint> = Vec::with_capacity(sorted.len());
    for p in sorted {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    Ok(UpperHull { points: hull })
}

impl UpperHull {
    pub fn points(&self) -> &[FrontierPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(min bv, max bv)` of the vertices.
    pub fn span(&self) -> (f64, f64) {
        (self.points[0].bv, self.points[self.points.len() - 1].bv)
    }

    /// Piecewise-linear interpolant at `bv`, `None` outside the span.
    pub fn value_at(&self, bv: f64) -> Option<f64> {
        let (lo, hi) = self.span();
        if !(lo..=hi).contains(&bv) {
            return None;
        }
        if self.points.len() == 1 {
            return Some(self.points[0].fom);
        }
        let j = self
            .points
            .partition_point(|p| p.bv <= bv)
            .clamp(1, self.points.len() - 1)
            - 1;
        let (a, b) = (&self.points[j], &self.points[j + 1]);
        Some(a.fom + (b.fom - a.fom) * (bv - a.bv) / (b.bv - a.bv))
    }

    /// Writes the vertices as CSV with header `bv,fom,source_index`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bv", "fom", "source_index"])?;
        for p in &self.points {
            w.write_record([
                format!("{:.16e}", p.bv),
                format!("{:.16e}", p.fom),
                p.source_index.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeState {
    pub lambda: f64,
    pub bv_target: f64,
    /// Hull vertex indices `(j, j + 1)` the slope was taken from.
    pub segment: Option<(usize, usize)>,
    /// Set when the target fell outside the hull's BV span.
    pub clamped: bool,
    pub hull: Option<UpperHull>,
}

impl LagrangeState {
    /// λ = 0, as used before any hull is consulted.
    pub fn zero(bv_target: f64) -> Self {
        Self {
            lambda: 0.0,
            bv_target,
            segment: None,
            clamped: false,
            hull: None,
        }
    }
}

/// λ is the negated slope of the hull segment containing `bv_target`.
///
/// A target on a vertex takes the segment to its right; a target outside the
/// span takes the nearest end segment. Fewer than two vertices give λ = 0.
pub fn multiplier(hull: &UpperHull, bv_target: f64) -> LagrangeState {
    let pts = &hull.points;
    let (lo, hi) = hull.span();
    let clamped = bv_target < lo || bv_target > hi;
    if pts.len() < 2 {
        return LagrangeState {
            clamped,
            hull: Some(hull.clone()),
            ..LagrangeState::zero(bv_target)
        };
    }
    let j = pts.partition_point(|p| p.bv <= bv_target).clamp(1, pts.len() - 1) - 1;
    let (a, b) = (&pts[j], &pts[j + 1]);
    let lambda = -(b.fom - a.fom) / (b.bv - a.bv);
    LagrangeState {
        lambda,
        bv_target,
        segment: Some((j, j + 1)),
        clamped,
        hull: Some(hull.clone()),
    }
}

/// `fom + λ·(bv − bv_target)`, keeping the constant term.
pub fn lagrangian(fom: f64, bv: f64, state: &LagrangeState) -> f64 {
    fom + state.lambda * (bv - state.bv_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<FrontierPoint> {
        v.iter()
            .enumerate()
            .map(|(i, &(b, f))| FrontierPoint::new(b, f, i))
            .collect()
    }

    fn coords(h: &UpperHull) -> Vec<(f64, f64)> {
        h.points().iter().map(|p| (p.bv, p.fom)).collect()
    }

    /// O(n³): a collapsed point is a vertex unless some chord between two
    /// other points reaches it from above or touches it.
    fn brute_force(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
        let mut best: Vec<FrontierPoint> = Vec::new();
        for p in points {
            match best.iter_mut().find(|q| q.bv == p.bv) {
                Some(q) if p.fom > q.fom || (p.fom == q.fom && p.source_index < q.source_index) => *q = *p,
                Some(_) => {}
                None => best.push(*p),
            }
        }
        let mut out: Vec<FrontierPoint> = best
            .iter()
            .filter(|p| {
                !best.iter().any(|a| {
                    best.iter().any(|b| {
                        a.bv < p.bv && p.bv < b.bv && {
                            // chord value at p.bv ≥ p.fom, without division
                            (a.fom * (b.bv - p.bv) + b.fom * (p.bv - a.bv)) >= p.fom * (b.bv - a.bv)
                        }
                    })
                })
            })
            .copied()
            .collect();
        out.sort_by(|a, b| a.bv.total_cmp(&b.bv));
        out
    }

    #[test]
    fn concave_triple_is_kept() {
        let h = upper_hull(&pts(&[(30.0, 300.0), (40.0, 290.0), (50.0, 200.0)])).unwrap();
        assert_eq!(h.len(), 3);
    }

    #[test]
    fn point_below_chord_is_dropped() {
        let h = upper_hull(&pts(&[(30.0, 300.0), (40.0, 200.0), (50.0, 250.0)])).unwrap();
        assert_eq!(coords(&h), vec![(30.0, 300.0), (50.0, 250.0)]);
    }

    #[test]
    fn collinear_interior_point_is_dropped() {
        let h = upper_hull(&pts(&[(30.0, 300.0), (40.0, 250.0), (50.0, 200.0)])).unwrap();
        assert_eq!(coords(&h), vec![(30.0, 300.0), (50.0, 200.0)]);
    }

    #[test]
    fn duplicate_bv_keeps_max_fom() {
        let h = upper_hull(&pts(&[(40.0, 100.0), (40.0, 150.0), (40.0, 120.0)])).unwrap();
        assert_eq!(h.points(), &[FrontierPoint::new(40.0, 150.0, 1)]);
    }

    #[test]
    fn empty_and_nonfinite_inputs() {
        assert_eq!(upper_hull(&[]), Err(HullError::Empty));
        assert_eq!(
            upper_hull(&pts(&[(1.0, 1.0), (f64::NAN, 2.0)])),
            Err(HullError::NotFinite(1))
        );
    }

    #[test]
    fn two_point_slope() {
        let h = upper_hull(&pts(&[(30.0, 300.0), (50.0, 200.0)])).unwrap();
        let s = multiplier(&h, 40.0);
        assert_eq!(s.lambda, 5.0);
        assert_eq!(s.segment, Some((0, 1)));
        assert!(!s.clamped);
    }

    #[test]
    fn one_point_hull_gives_zero() {
        let h = upper_hull(&pts(&[(30.0, 300.0)])).unwrap();
        for t in [10.0, 30.0, 45.0] {
            let s = multiplier(&h, t);
            assert_eq!(s.lambda, 0.0);
            assert_eq!(s.segment, None);
        }
    }

    #[test]
    fn segment_arithmetic() {
        let h = upper_hull(&pts(&[(30.0, 250.0), (40.0, 300.0), (55.0, 200.0)])).unwrap();
        assert_eq!(h.len(), 3);
        let s = multiplier(&h, 50.0);
        assert_eq!(s.segment, Some((1, 2)));
        assert!((s.lambda - 100.0 / 15.0).abs() < 1e-12);
        assert!((s.lambda - 6.6667).abs() < 1e-4);
        // ascending first segment gives a negative multiplier
        assert_eq!(multiplier(&h, 35.0).lambda, -5.0);
    }

    #[test]
    fn vertex_target_takes_right_segment_and_ends_clamp() {
        let h = upper_hull(&pts(&[(30.0, 250.0), (40.0, 300.0), (55.0, 200.0)])).unwrap();
        assert_eq!(multiplier(&h, 40.0).segment, Some((1, 2)));
        assert_eq!(multiplier(&h, 30.0).segment, Some((0, 1)));
        let last = multiplier(&h, 55.0);
        assert_eq!((last.segment, last.clamped), (Some((1, 2)), false));
        let below = multiplier(&h, 10.0);
        assert_eq!((below.segment, below.clamped), (Some((0, 1)), true));
        let above = multiplier(&h, 70.0);
        assert_eq!((above.segment, above.clamped), (Some((1, 2)), true));
    }

    #[test]
    fn lagrangian_arithmetic() {
        let mut s = LagrangeState::zero(40.0);
        assert_eq!(lagrangian(123.0, 77.0, &s), 123.0);
        s.lambda = 5.0;
        assert_eq!(lagrangian(200.0, 50.0, &s), 250.0);
        assert_eq!(lagrangian(300.0, 40.0, &s), 300.0);
    }

    #[test]
    fn csv_export() {
        let h = upper_hull(&pts(&[(30.0, 300.0), (50.0, 200.0)])).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bv,fom,source_index");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",1"));
    }

    fn integer_points() -> impl Strategy<Value = Vec<FrontierPoint>> {
        prop::collection::vec((0i32..40, 0i32..400), 1..=12).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (b, f))| FrontierPoint::new(b as f64, f as f64, i))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(p in integer_points()) {
            let h = upper_hull(&p).unwrap();
            let expect = brute_force(&p);
            prop_assert_eq!(h.points(), expect.as_slice());
        }

        #[test]
        fn hull_invariants(p in integer_points()) {
            let h = upper_hull(&p).unwrap();
            let v = h.points();
            for w in v.windows(2) {
                prop_assert!(w[0].bv < w[1].bv);
            }
            for w in v.windows(3) {
                let s1 = (w[1].fom - w[0].fom) / (w[1].bv - w[0].bv);
                let s2 = (w[2].fom - w[1].fom) / (w[2].bv - w[1].bv);
                prop_assert!(s2 < s1);
            }
            for q in &p {
                prop_assert!(q.fom <= h.value_at(q.bv).unwrap() + 1e-9);
            }
            prop_assert_eq!(&upper_hull(v).unwrap(), &h);
        }

        #[test]
        fn points_below_hull_change_nothing(p in integer_points(), t in 0.0f64..1.0, drop in 0.5f64..50.0) {
            let h = upper_hull(&p).unwrap();
            let (lo, hi) = h.span();
            let bv = lo + t * (hi - lo);
            let mut more = p.clone();
            more.push(FrontierPoint::new(bv, h.value_at(bv).unwrap() - drop, p.len()));
            prop_assert_eq!(upper_hull(&more).unwrap(), h);
        }

        #[test]
        fn lambda_is_negated_segment_slope(p in integer_points(), target in -10.0f64..50.0) {
            let h = upper_hull(&p).unwrap();
            let s = multiplier(&h, target);
            let (lo, hi) = h.span();
            prop_assert_eq!(s.clamped, target < lo || target > hi);
            match s.segment {
                None => {
                    prop_assert_eq!(h.len(), 1);
                    prop_assert_eq!(s.lambda, 0.0);
                }
                Some((j, k)) => {
                    let (a, b) = (h.points()[j], h.points()[k]);
                    let slope = (b.fom - a.fom) / (b.bv - a.bv);
                    prop_assert_eq!(s.lambda.signum(), (-slope).signum());
                    prop_assert!((s.lambda + slope).abs() <= 1e-12 * slope.abs());
                    if !s.clamped {
                        prop_assert!(a.bv <= target && target < b.bv || target == b.bv && k == h.len() - 1);
                    }
                }
            }
        }

        #[test]
        fn lambda_scales_with_fom(p in integer_points(), target in 0.0f64..40.0, k in -4i32..8) {
            let c = 2f64.powi(k);
            let scaled: Vec<FrontierPoint> =
                p.iter().map(|q| FrontierPoint::new(q.bv, c * q.fom, q.source_index)).collect();
            let a = multiplier(&upper_hull(&p).unwrap(), target).lambda;
            let b = multiplier(&upper_hull(&scaled).unwrap(), target).lambda;
            prop_assert_eq!(b, c * a);
        }

        #[test]
        fn target_cancels_in_differences(
            fa in 0i32..400, ba in 20i32..60, fb in 0i32..400, bb in 20i32..60,
            quarter_lambda in -80i32..80, t1 in 20i32..60,
        ) {
            // integer data and a dyadic λ keep every operation exact
            let lambda = quarter_lambda as f64 / 4.0;
            let s = LagrangeState { lambda, ..LagrangeState::zero(t1 as f64) };
            let (fa, ba, fb, bb) = (fa as f64, ba as f64, fb as f64, bb as f64);
            let diff = lagrangian(fa, ba, &s) - lagrangian(fb, bb, &s);
            prop_assert_eq!(diff, (fa - fb) + lambda * (ba - bb));
        }
    }
}
