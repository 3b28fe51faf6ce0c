//! Grid-sampled functions on a closed interval.
//!
//! Every curve in one analysis lives on a single uniform [`Grid`]. Suprema
//! over the domain are maxima over grid points and integrals use the
//! composite trapezoid rule, which is exact for constant and linear curves.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform discretization of `[a, b]` with `p ≥ 2` points, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    a: T,
    b: T,
    points: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn uniform(a: T, b: T, p: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::DegenerateDomain {
                a: a.to_f64_lossy(),
                b: b.to_f64_lossy(),
            });
        }
        if p < 2 {
            return Err(Error::GridSize(p));
        }
        let h = (b - a) / T::from_usize_lossy(p - 1);
        let mut points: Vec<T> = (0..p).map(|i| a + h * T::from_usize_lossy(i)).collect();
        points[p - 1] = b;
        Ok(Self { a, b, points })
    }

    /// Builds a grid from explicit points, which must be uniformly spaced to
    /// within `rel_tol` of the nominal spacing. The stored points are
    /// regenerated from the endpoints.
    pub fn from_points(points: &[T], rel_tol: T) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::GridSize(points.len()));
        }
        let p = points.len();
        let (a, b) = (points[0], points[p - 1]);
        let grid = Self::uniform(a, b, p)?;
        let h = grid.spacing();
        for (i, w) in points.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::BadGrid(format!(
                    "point {} ({}) does not exceed point {} ({})",
                    i + 1,
                    w[1],
                    i,
                    w[0]
                )));
            }
            if ((w[1] - w[0]) - h).abs() > rel_tol * h {
                return Err(Error::BadGrid(format!(
                    "spacing {} between points {} and {} differs from {}",
                    w[1] - w[0],
                    i,
                    i + 1,
                    h
                )));
            }
        }
        Ok(grid)
    }

    pub fn start(&self) -> T {
        self.a
    }

    pub fn end(&self) -> T {
        self.b
    }

    /// Domain length `|T| = b − a`.
    pub fn length(&self) -> T {
        self.b - self.a
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn spacing(&self) -> T {
        self.length() / T::from_usize_lossy(self.len() - 1)
    }

    /// Composite trapezoid rule over raw values aligned with this grid.
    pub fn trapezoid(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.len());
        let p = values.len();
        let interior: T = values[1..p - 1].iter().copied().sum();
        let half = T::lit(0.5);
        self.spacing() * (half * (values[0] + values[p - 1]) + interior)
    }

    pub(crate) fn mismatch(&self) -> Error {
        Error::GridMismatch {
            expected: self.len(),
            a: self.a.to_f64_lossy(),
            b: self.b.to_f64_lossy(),
        }
    }
}

/// `make_uniform_grid(a, b, p)`.
pub fn make_uniform_grid<T: Scalar>(a: T, b: T, p: usize) -> Result<Arc<Grid<T>>> {
    Grid::uniform(a, b, p).map(Arc::new)
}

fn same_grid<T: Scalar>(x: &Arc<Grid<T>>, y: &Arc<Grid<T>>) -> bool {
    Arc::ptr_eq(x, y) || **x == **y
}

/// A function's values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Scalar> Curve<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<Grid<T>>, value: T) -> Self {
        let values = vec![value; grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_parts_unchecked(grid: Arc<Grid<T>>, values: Vec<T>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shares_grid(&self, other: &Curve<T>) -> bool {
        same_grid(&self.grid, &other.grid)
    }

    pub(crate) fn check_grid(&self, grid: &Arc<Grid<T>>) -> Result<()> {
        if same_grid(&self.grid, grid) {
            Ok(())
        } else {
            Err(grid.mismatch())
        }
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn integrate(&self) -> T {
        self.grid.trapezoid(&self.values)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Curve<T> {
        Curve::from_parts_unchecked(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two curves on the same grid.
    pub fn zip_with(&self, other: &Curve<T>, f: impl Fn(T, T) -> T) -> Result<Curve<T>> {
        other.check_grid(&self.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Curve::from_parts_unchecked(self.grid.clone(), values))
    }

    pub fn scale(&self, factor: T) -> Curve<T> {
        self.map(|v| v * factor)
    }
}

/// `sup_t |x(t) − y(t)|`, realized as a maximum over grid points.
pub fn sup_abs_diff<T: Scalar>(x: &Curve<T>, y: &Curve<T>) -> Result<T> {
    y.check_grid(x.grid())?;
    Ok(sup_abs_diff_values(x.values(), y.values()))
}

pub(crate) fn sup_abs_diff_values<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| (a - b).abs())
        .fold(T::zero(), T::max)
}

pub fn integrate<T: Scalar>(x: &Curve<T>) -> T {
    x.integrate()
}

/// Ordered collection of curves sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample<T> {
    grid: Arc<Grid<T>>,
    curves: Vec<Curve<T>>,
}

impl<T: Scalar> FunctionalSample<T> {
    pub fn new(grid: Arc<Grid<T>>, curves: Vec<Curve<T>>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::EmptySample);
        }
        for c in &curves {
            c.check_grid(&grid)?;
        }
        Ok(Self { grid, curves })
    }

    /// Builds a sample from rows of raw values.
    pub fn from_rows(grid: Arc<Grid<T>>, rows: Vec<Vec<T>>) -> Result<Self> {
        let curves = rows
            .into_iter()
            .map(|r| Curve::new(grid.clone(), r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, curves)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn curves(&self) -> &[Curve<T>] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Curve<T>> {
        self.curves.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Curve<T>> {
        self.curves.iter()
    }

    /// Sub-sample in the given index order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let curves = indices
            .iter()
            .map(|&i| {
                self.curves.get(i).cloned().ok_or_else(|| {
                    Error::Config(format!("curve index {i} out of range for sample of {}", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), curves)
    }

    pub fn into_curves(self) -> Vec<Curve<T>> {
        self.curves
    }
}

/// Pointwise arithmetic mean.
pub fn mean_curve<T: Scalar>(sample: &FunctionalSample<T>) -> Result<Curve<T>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let p = sample.grid().len();
    let mut acc = vec![T::zero(); p];
    for c in sample.iter() {
        for (a, &v) in acc.iter_mut().zip(c.values()) {
            *a += v;
        }
    }
    let n = T::from_usize_lossy(sample.len());
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(Curve::from_parts_unchecked(sample.grid().clone(), acc))
}

/// Pointwise sample standard deviation with divisor `n − 1`.
pub fn std_curve<T: Scalar>(sample: &FunctionalSample<T>) -> Result<Curve<T>> {
    if sample.len() < 2 {
        return Err(Error::SampleTooSmall {
            need: 2,
            got: sample.len(),
        });
    }
    let mean = mean_curve(sample)?;
    let p = sample.grid().len();
    let mut acc = vec![T::zero(); p];
    for c in sample.iter() {
        for ((a, &v), &m) in acc.iter_mut().zip(c.values()).zip(mean.values()) {
            let d = v - m;
            *a += d * d;
        }
    }
    let denom = T::from_usize_lossy(sample.len() - 1);
    let values = acc.into_iter().map(|a| (a / denom).sqrt()).collect();
    Ok(Curve::from_parts_unchecked(sample.grid().clone(), values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(a: f64, b: f64, p: usize) -> Arc<Grid<f64>> {
        make_uniform_grid(a, b, p).unwrap()
    }

    fn curve(g: &Arc<Grid<f64>>, v: &[f64]) -> Curve<f64> {
        Curve::new(g.clone(), v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_grid_points() {
        assert_eq!(grid(0.0, 1.0, 3).points(), &[0.0, 0.5, 1.0]);
        assert_eq!(grid(0.0, 1.0, 2).points(), &[0.0, 1.0]);
        let g = grid(4.0, 18.0, 141);
        assert_relative_eq!(g.spacing(), 0.1, max_relative = 1e-12);
        assert_eq!(g.points()[0], 4.0);
        assert_eq!(g.points()[140], 18.0);
        for w in g.points().windows(2) {
            assert_relative_eq!(w[1] - w[0], 0.1, max_relative = 1e-12);
        }
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(
            Grid::uniform(1.0, 1.0, 3),
            Err(Error::DegenerateDomain { .. })
        ));
        assert!(matches!(
            Grid::uniform(2.0, 1.0, 3),
            Err(Error::DegenerateDomain { .. })
        ));
        assert!(matches!(Grid::uniform(0.0, 1.0, 1), Err(Error::GridSize(1))));
    }

    #[test]
    fn from_points_checks_uniformity() {
        let g = Grid::from_points(&[0.0, 0.5, 1.0], 1e-9).unwrap();
        assert_eq!(g.len(), 3);
        assert!(Grid::from_points(&[0.0, 0.4, 1.0], 1e-9).is_err());
        assert!(Grid::from_points(&[0.0, 1.0, 0.5], 1e-9).is_err());
    }

    #[test]
    fn curve_rejects_bad_values() {
        let g = grid(0.0, 1.0, 3);
        assert!(matches!(
            Curve::new(g.clone(), vec![1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            Curve::new(g, vec![1.0, f64::NAN, 2.0]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn sup_abs_diff_examples() {
        let g = grid(0.0, 1.0, 3);
        let x = curve(&g, &[0.0, 2.0, -5.0]);
        let z = Curve::constant(g.clone(), 0.0);
        assert_eq!(sup_abs_diff(&x, &x).unwrap(), 0.0);
        assert_eq!(sup_abs_diff(&x, &z).unwrap(), 5.0);
        let three = Curve::constant(g.clone(), 3.0);
        let one = Curve::constant(g, 1.0);
        assert_eq!(sup_abs_diff(&three, &one).unwrap(), 2.0);
    }

    #[test]
    fn sup_abs_diff_grid_mismatch() {
        let x = Curve::constant(grid(0.0, 1.0, 3), 1.0);
        let y = Curve::constant(grid(0.0, 1.0, 4), 1.0);
        assert!(matches!(sup_abs_diff(&x, &y), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn integrate_examples() {
        let g = grid(2.0, 5.0, 17);
        assert_eq!(Curve::constant(g, 1.5).integrate(), 4.5);
        let g = grid(0.0, 1.0, 101);
        let lin = Curve::from_fn(g.clone(), |t| t).unwrap();
        assert_relative_eq!(lin.integrate(), 0.5, max_relative = 1e-14);
        // trapezoid error for t^2 is h^2/12 * (b - a) * f'' / 1 = 1e-4/6
        let sq = Curve::from_fn(g, |t| t * t).unwrap();
        assert!((sq.integrate() - 0.33335).abs() < 1e-4);
        assert_relative_eq!(sq.integrate(), 1.0 / 3.0 + 1e-4 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn mean_and_std_examples() {
        let g = grid(0.0, 1.0, 2);
        let s = FunctionalSample::from_rows(g.clone(), vec![vec![1.0, 2.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(mean_curve(&s).unwrap().values(), &[2.0, 4.0]);

        let s = FunctionalSample::from_rows(g.clone(), vec![vec![0.0, 0.0], vec![2.0, 4.0]]).unwrap();
        let sd = std_curve(&s).unwrap();
        assert_relative_eq!(sd.values()[0], 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(sd.values()[1], 2.0 * 2f64.sqrt(), max_relative = 1e-15);

        let y = vec![0.3, -1.2];
        let s = FunctionalSample::from_rows(g.clone(), vec![y.clone()]).unwrap();
        assert_eq!(mean_curve(&s).unwrap().values(), &y[..]);
        assert!(matches!(std_curve(&s), Err(Error::SampleTooSmall { need: 2, got: 1 })));

        let s = FunctionalSample::from_rows(g.clone(), vec![y.clone(), y.clone()]).unwrap();
        assert_eq!(std_curve(&s).unwrap().values(), &[0.0, 0.0]);

        let s = FunctionalSample::from_rows(g, vec![vec![4.0, -1.0], vec![-4.0, 1.0]]).unwrap();
        assert_eq!(mean_curve(&s).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn empty_sample_rejected() {
        let g = grid(0.0, 1.0, 2);
        assert!(matches!(FunctionalSample::new(g, vec![]), Err(Error::EmptySample)));
    }

    fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (2usize..12).prop_flat_map(|p| {
            let v = || prop::collection::vec(-100.0..100.0f64, p);
            (v(), v(), v())
        })
    }

    proptest! {
        #[test]
        fn sup_metric_axioms((x, y, z) in triple()) {
            let g = grid(0.0, 1.0, x.len());
            let (x, y, z) = (curve(&g, &x), curve(&g, &y), curve(&g, &z));
            let dxy = sup_abs_diff(&x, &y).unwrap();
            let dyx = sup_abs_diff(&y, &x).unwrap();
            let dxz = sup_abs_diff(&x, &z).unwrap();
            let dzy = sup_abs_diff(&z, &y).unwrap();
            prop_assert_eq!(dxy, dyx);
            prop_assert!(dxy <= dxz + dzy + 1e-12);
            prop_assert!(dxy >= 0.0);
            prop_assert_eq!(dxy == 0.0, x == y);
        }

        #[test]
        fn integrate_is_linear((x, y, _) in triple(), alpha in -5.0..5.0f64, beta in -5.0..5.0f64) {
            let g = grid(-1.0, 3.0, x.len());
            let (x, y) = (curve(&g, &x), curve(&g, &y));
            let combo = x.zip_with(&y, |a, b| alpha * a + beta * b).unwrap();
            let lhs = combo.integrate();
            let rhs = alpha * x.integrate() + beta * y.integrate();
            let scale = (alpha.abs() * x.map(f64::abs).integrate() + beta.abs() * y.map(f64::abs).integrate()).max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn mean_minimizes_squared_deviation(rows in prop::collection::vec(-10.0..10.0f64, 2..8)) {
            let g = grid(0.0, 1.0, 2);
            let s = FunctionalSample::from_rows(g, rows.iter().map(|&v| vec![v, 0.0]).collect()).unwrap();
            let m = mean_curve(&s).unwrap().values()[0];
            let loss = |c: f64| rows.iter().map(|&v| (v - c) * (v - c)).sum::<f64>();
            let best = loss(m);
            for step in -200..=200 {
                let c = m + step as f64 * 0.01;
                prop_assert!(loss(c) >= best - 1e-9);
            }
        }

        #[test]
        fn std_is_shift_invariant(rows in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 3), 2..6), shift in -50.0..50.0f64) {
            let g = grid(0.0, 1.0, 3);
            let s = FunctionalSample::from_rows(g.clone(), rows.clone()).unwrap();
            let shifted = FunctionalSample::from_rows(g, rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect()).unwrap();
            let a = std_curve(&s).unwrap();
            let b = std_curve(&shifted).unwrap();
            for (u, v) in a.values().iter().zip(b.values()) {
                prop_assert!((u - v).abs() < 1e-9);
                prop_assert!(*u >= 0.0);
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = make_uniform_grid(0.0_f32, 2.0, 5).unwrap();
        let c = Curve::constant(g, 3.0_f32);
        assert!((c.integrate() - 6.0).abs() < 1e-6);
    }
}
