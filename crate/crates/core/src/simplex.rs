use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance applied to the component sum when a point is constructed
/// directly from values that are already normalized.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Tolerance absorbed by renormalization (accumulated floating-point error).
pub const ACCUMULATED_TOLERANCE: f64 = 1e-9;

/// A point of the standard simplex: non-negative weights summing to one.
///
/// Holds realized outcomes, allocations, market forecasts and oracles alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Builds a point from non-negative values whose sum is within `1e-9` of
    /// one. Values are renormalized unless they already sum to exactly one.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidEntry { index, value });
            }
        }
        let sum: f64 = values.iter().sum();
        if sum == 0.0 {
            return Err(Error::ZeroMass);
        }
        if (sum - 1.0).abs() > ACCUMULATED_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        if sum == 1.0 {
            return Ok(Self(values));
        }
        Ok(Self(values.into_iter().map(|v| v / sum).collect()))
    }

    /// The `n`-th vertex `e_n` of the simplex of dimension `dim`.
    pub fn vertex(dim: usize, n: usize) -> Self {
        assert!(n < dim, "vertex index {n} out of range for dimension {dim}");
        let mut values = vec![0.0; dim];
        values[n] = 1.0;
        Self(values)
    }

    /// The barycenter `(1/N, ..., 1/N)`.
    pub fn uniform(dim: usize) -> Self {
        assert!(dim > 0);
        Self(vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn min_component(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when every component is strictly positive.
    pub fn has_full_support(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }

    /// Convex combination `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &SimplexPoint, weight: f64) -> Result<SimplexPoint> {
        check_dims(self.dim(), other.dim())?;
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidArgument(format!("mixing weight {weight} outside [0, 1]")));
        }
        let values = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (1.0 - weight) * a + weight * b)
            .collect();
        SimplexPoint::new(values)
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(values)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(point: SimplexPoint) -> Self {
        point.0
    }
}

pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Euclidean projection of an arbitrary finite vector onto the simplex,
/// using the sorted-threshold method.
pub fn simplex_project(values: &[f64]) -> Result<SimplexPoint> {
    if values.is_empty() {
        return Err(Error::ZeroMass);
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidEntry { index, value });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));

    let mut prefix = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        prefix += u;
        let candidate = (prefix - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    let projected: Vec<f64> = values.iter().map(|v| (v - threshold).max(0.0)).collect();
    SimplexPoint::new(projected)
}

/// Squared Euclidean distance between two simplex points.
pub fn sq_distance(a: &SimplexPoint, b: &SimplexPoint) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(values: &[f64]) -> SimplexPoint {
        SimplexPoint::new(values.to_vec()).unwrap()
    }

    #[test]
    fn make_simplex_examples() {
        assert_eq!(point(&[0.5, 0.5]).as_slice(), &[0.5, 0.5]);

        let p = point(&[0.3, 0.3, 0.4 + 1e-12]);
        let sum: f64 = p.as_slice().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-15);

        assert!(matches!(
            SimplexPoint::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn make_simplex_rejects_bad_entries() {
        assert!(matches!(
            SimplexPoint::new(vec![1.5, -0.5]),
            Err(Error::InvalidEntry { index: 1, .. })
        ));
        assert_eq!(SimplexPoint::new(vec![0.0, 0.0]), Err(Error::ZeroMass));
        assert!(SimplexPoint::new(vec![f64::NAN, 1.0]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(simplex_project(&[0.6, 0.4]).unwrap().as_slice(), &[0.6, 0.4]);
        assert_eq!(simplex_project(&[1.2, -0.2]).unwrap().as_slice(), &[1.0, 0.0]);
        let p = simplex_project(&[0.5, 0.5, 0.5]).unwrap();
        for &v in p.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(simplex_project(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn sq_distance_examples() {
        assert_eq!(sq_distance(&point(&[1.0, 0.0]), &point(&[1.0, 0.0])).unwrap(), 0.0);
        assert_eq!(sq_distance(&point(&[1.0, 0.0]), &point(&[0.0, 1.0])).unwrap(), 2.0);
        let d = sq_distance(&point(&[0.6, 0.4]), &point(&[0.5, 0.5])).unwrap();
        assert!((d - 0.02).abs() < 1e-15);
        assert!(sq_distance(&point(&[1.0]), &point(&[0.5, 0.5])).is_err());
    }

    /// Dense grid search for the minimizer of |x - v|^2 over the simplex,
    /// followed by a local refinement around the best grid point.
    fn grid_projection(v: &[f64]) -> Vec<f64> {
        let steps = 400usize;
        let dist = |x: &[f64]| -> f64 { x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum() };
        let mut best = vec![0.0; v.len()];
        let mut best_d = f64::INFINITY;
        let mut consider = |x: Vec<f64>| {
            let d = dist(&x);
            if d < best_d {
                best_d = d;
                best = x;
            }
        };
        match v.len() {
            2 => {
                for i in 0..=steps {
                    let a = i as f64 / steps as f64;
                    consider(vec![a, 1.0 - a]);
                }
            }
            3 => {
                for i in 0..=steps {
                    for j in 0..=(steps - i) {
                        let a = i as f64 / steps as f64;
                        let b = j as f64 / steps as f64;
                        consider(vec![a, b, (1.0 - a - b).max(0.0)]);
                    }
                }
            }
            _ => unreachable!(),
        }
        // coordinate refinement along edge directions with shrinking steps
        let mut h = 1.0 / steps as f64;
        while h > 1e-9 {
            let mut improved = true;
            while improved {
                improved = false;
                for i in 0..v.len() {
                    for j in 0..v.len() {
                        if i == j || best[j] < h {
                            continue;
                        }
                        let mut x = best.clone();
                        x[i] += h;
                        x[j] -= h;
                        let d = dist(&x);
                        if d < best_d {
                            best_d = d;
                            best = x;
                            improved = true;
                        }
                    }
                }
            }
            h /= 2.0;
        }
        best
    }

    #[test]
    fn projection_of_overshoot_matches_grid_search() {
        let grid = grid_projection(&[1.2, -0.2]);
        assert!((grid[0] - 1.0).abs() < 1e-6 && grid[1].abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn make_simplex_never_violates_invariants(raw in prop::collection::vec(0.0f64..10.0, 1..8)) {
            let sum: f64 = raw.iter().sum();
            prop_assume!(sum > 1e-6);
            let normalized: Vec<f64> = raw.iter().map(|v| v / sum).collect();
            let p = SimplexPoint::new(normalized).unwrap();
            let total: f64 = p.as_slice().iter().sum();
            prop_assert!((total - 1.0).abs() <= EXACT_TOLERANCE);
            prop_assert!(p.as_slice().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn projection_lands_in_simplex(raw in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = simplex_project(&raw).unwrap();
            let total: f64 = p.as_slice().iter().sum();
            prop_assert!((total - 1.0).abs() <= EXACT_TOLERANCE);
            prop_assert!(p.as_slice().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn projection_is_idempotent(raw in prop::collection::vec(-2.0f64..2.0, 1..8)) {
            let once = simplex_project(&raw).unwrap();
            let twice = simplex_project(once.as_slice()).unwrap();
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }

        #[test]
        fn projection_matches_grid_search(raw in prop::collection::vec(-1.5f64..1.5, 2..=3)) {
            let p = simplex_project(&raw).unwrap();
            let grid = grid_projection(&raw);
            for (a, b) in p.as_slice().iter().zip(&grid) {
                prop_assert!((a - b).abs() <= 1e-6, "{:?} vs {:?}", p, grid);
            }
        }

        #[test]
        fn sq_distance_symmetric_and_bounded(
            a in prop::collection::vec(0.0f64..1.0, 3),
            b in prop::collection::vec(0.0f64..1.0, 3),
        ) {
            let pa = simplex_project(&a).unwrap();
            let pb = simplex_project(&b).unwrap();
            let d = sq_distance(&pa, &pb).unwrap();
            prop_assert_eq!(d, sq_distance(&pb, &pa).unwrap());
            prop_assert!((0.0..=2.0).contains(&d));
        }
    }
}
