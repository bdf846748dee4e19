//! Two-objective (TPR, TNR) fronts and their hypervolume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-dominated, duplicate-free set of `(tpr, tnr)` points sorted by
/// ascending TPR (and therefore strictly descending TNR).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontSnapshot {
    points: Vec<(f64, f64)>,
}

impl FrontSnapshot {
    /// Filters dominated and duplicate points. Coordinates must lie in
    /// `[0, 1]`.
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.into_iter().collect();
        if let Some(bad) = pts
            .iter()
            .find(|(x, y)| !((0.0..=1.0).contains(x) && (0.0..=1.0).contains(y)))
        {
            return Err(Error::Usage(format!("front point {bad:?} outside the unit square")));
        }
        // Descending TPR, then descending TNR: a point survives iff its TNR
        // beats every point with a larger-or-equal TPR seen so far.
        pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        let mut kept: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        let mut best_tnr = f64::NEG_INFINITY;
        for p in pts {
            if p.1 > best_tnr {
                kept.push(p);
                best_tnr = p.1;
            }
        }
        kept.reverse();
        Ok(Self { points: kept })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Area under the piecewise-linear front with reference point (0, 0).
/// The first point is extended flat to the TNR axis; nothing is added to
/// the right of the last point.
pub fn hypervolume_trapezoid(front: &FrontSnapshot) -> f64 {
    let pts = front.points();
    let Some(&(_, y0)) = pts.first() else {
        log::debug!("hypervolume of an empty front");
        return 0.0;
    };
    let mut prev = (0.0, y0);
    let mut area = 0.0;
    for &(x, y) in pts {
        area += (x - prev.0) * (y + prev.1) / 2.0;
        prev = (x, y);
    }
    area
}

/// Classical dominated area: the union of rectangles `[0, x] x [0, y]`.
pub fn hypervolume_staircase(front: &FrontSnapshot) -> f64 {
    let mut prev_x = 0.0;
    let mut area = 0.0;
    for &(x, y) in front.points() {
        area += (x - prev_x) * y;
        prev_x = x;
    }
    area
}

/// Non-dominated union of several fronts.
pub fn accumulate_po_front<'a>(fronts: impl IntoIterator<Item = &'a FrontSnapshot>) -> FrontSnapshot {
    let all = fronts.into_iter().flat_map(|f| f.points().iter().copied());
    FrontSnapshot::new(all).expect("inputs already validated")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn front(p: &[(f64, f64)]) -> FrontSnapshot {
        FrontSnapshot::new(p.iter().copied()).unwrap()
    }

    #[test]
    fn unit_point() {
        assert_eq!(hypervolume_trapezoid(&front(&[(1.0, 1.0)])), 1.0);
        assert_eq!(hypervolume_staircase(&front(&[(1.0, 1.0)])), 1.0);
    }

    #[test]
    fn two_point_front() {
        let f = front(&[(1.0, 0.5), (0.5, 1.0)]);
        assert_eq!(hypervolume_trapezoid(&f), 0.875);
        assert_eq!(hypervolume_staircase(&f), 0.75);
    }

    #[test]
    fn empty_front_is_zero() {
        assert_eq!(hypervolume_trapezoid(&FrontSnapshot::default()), 0.0);
        assert_eq!(hypervolume_staircase(&FrontSnapshot::default()), 0.0);
    }

    #[test]
    fn snapshot_filters_and_sorts() {
        let f = front(&[(0.5, 0.5), (0.2, 0.9), (0.4, 0.4), (0.5, 0.5), (0.9, 0.1), (0.5, 0.3)]);
        assert_eq!(f.points(), &[(0.2, 0.9), (0.5, 0.5), (0.9, 0.1)]);
        assert!(FrontSnapshot::new([(1.2, 0.0)]).is_err());
        assert!(FrontSnapshot::new([(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn accumulation_examples() {
        let a = front(&[(0.3, 0.8), (0.7, 0.4)]);
        let copies = vec![a.clone(); 50];
        assert_eq!(accumulate_po_front(&copies), a);
        assert_eq!(
            accumulate_po_front(&[front(&[(1.0, 0.0)]), front(&[(0.0, 1.0)])]).points(),
            &[(0.0, 1.0), (1.0, 0.0)]
        );
        assert_eq!(
            accumulate_po_front(&[front(&[(0.5, 0.5)]), front(&[(0.6, 0.6)])]).points(),
            &[(0.6, 0.6)]
        );
    }

    fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec(
            (0u32..=100, 0u32..=100).prop_map(|(a, b)| (a as f64 / 100.0, b as f64 / 100.0)),
            1..30,
        )
    }

    proptest! {
        #[test]
        fn trapezoid_bounds_staircase(p in points()) {
            let f = front(&p);
            let (t, s) = (hypervolume_trapezoid(&f), hypervolume_staircase(&f));
            prop_assert!(t >= s - 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&t));
        }

        #[test]
        fn dominated_point_changes_nothing(p in points(), pick in any::<prop::sample::Index>(), shrink in 0.0f64..1.0) {
            let f = front(&p);
            let (x, y) = f.points()[pick.index(f.len())];
            let mut more = f.points().to_vec();
            more.push((x * shrink, y * shrink));
            let g = front(&more);
            prop_assert_eq!(hypervolume_trapezoid(&g), hypervolume_trapezoid(&f));
            prop_assert_eq!(hypervolume_staircase(&g), hypervolume_staircase(&f));
        }

        #[test]
        fn staircase_is_monotone(p in points(), extra in (0u32..=100, 0u32..=100)) {
            let f = front(&p);
            let mut more = f.points().to_vec();
            more.push((extra.0 as f64 / 100.0, extra.1 as f64 / 100.0));
            prop_assert!(hypervolume_staircase(&front(&more)) >= hypervolume_staircase(&f) - 1e-12);
        }

        #[test]
        fn accumulated_front_covers_inputs(a in points(), b in points()) {
            let (fa, fb) = (front(&a), front(&b));
            let acc = accumulate_po_front([&fa, &fb]);
            for &(x, y) in a.iter().chain(&b) {
                prop_assert!(acc.points().iter().any(|&(u, v)| u >= x && v >= y));
            }
        }
    }
}
