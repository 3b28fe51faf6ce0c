//! Clamped B-spline basis by the Cox–de Boor recursion.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Basis of the given order (degree + 1) on `[a, b]` with clamped boundary
/// knots. There are `interior.len() + order` functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis<T> {
    order: usize,
    knots: Vec<T>,
    a: T,
    b: T,
}

impl<T: Scalar> BSplineBasis<T> {
    pub fn new(order: usize, interior: &[T], a: T, b: T) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidKnots("order must be at least 1".into()));
        }
        if !(a < b) {
            return Err(Error::InvalidKnots(format!("empty domain [{a}, {b}]")));
        }
        let mut prev = a;
        for &k in interior {
            if !(k > prev && k < b) {
                return Err(Error::InvalidKnots(format!(
                    "interior knots must increase strictly inside ({a}, {b}); got {k}"
                )));
            }
            prev = k;
        }
        let mut knots = vec![a; order];
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat(b).take(order));
        Ok(Self { order, knots, a, b })
    }

    /// Cubic basis on `[0, 1]` with knots at `0.1, …, 0.9`.
    pub fn cubic_deciles() -> Self {
        let interior: Vec<T> = (1..10).map(|i| T::lit(i as f64 / 10.0)).collect();
        Self::new(4, &interior, T::zero(), T::one()).expect("valid knots")
    }

    pub fn len(&self) -> usize {
        self.knots.len() - self.order
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// All basis values at `t`.
    pub fn eval(&self, t: T) -> Result<Vec<T>> {
        if !(t >= self.a && t <= self.b) {
            return Err(Error::OutOfDomain {
                t: t.to_f64_lossy(),
                lo: self.a.to_f64_lossy(),
                hi: self.b.to_f64_lossy(),
            });
        }
        let kn = &self.knots;
        let nk = kn.len();
        // order-1 indicators on half-open spans; the right end belongs to the
        // last non-empty span
        let mut vals: Vec<T> = (0..nk - 1)
            .map(|i| {
                let inside = if t == self.b {
                    kn[i] < kn[i + 1] && kn[i + 1] == self.b
                } else {
                    kn[i] <= t && t < kn[i + 1]
                };
                if inside {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        for k in 2..=self.order {
            let next: Vec<T> = (0..nk - k)
                .map(|i| {
                    let mut v = T::zero();
                    let d1 = kn[i + k - 1] - kn[i];
                    if d1 > T::zero() {
                        v += (t - kn[i]) / d1 * vals[i];
                    }
                    let d2 = kn[i + k] - kn[i + 1];
                    if d2 > T::zero() {
                        v += (kn[i + k] - t) / d2 * vals[i + 1];
                    }
                    v
                })
                .collect();
            vals = next;
        }
        Ok(vals)
    }
}

/// `bspline_basis(order, interior, t)` on `[0, 1]`.
pub fn bspline_basis<T: Scalar>(order: usize, interior: &[T], t: T) -> Result<Vec<T>> {
    BSplineBasis::new(order, interior, T::zero(), T::one())?.eval(t)
}
