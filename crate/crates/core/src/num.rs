//! Floating-point scalar abstraction shared by the scoring and metric code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for PageRank scores, response-time ratios and summary
/// statistics. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from a count or a duration.
    fn of_u64(v: u64) -> Self {
        <Self as FromPrimitive>::from_u64(v).expect("u64 is representable as a float")
    }

    fn of_usize(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize is representable as a float")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Geometric mean. Any zero yields zero; an empty slice yields `None`.
pub fn geometric_mean<F: Scalar>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    if values.iter().any(|v| *v <= F::zero()) {
        return Some(F::zero());
    }
    let n = F::of_usize(values.len());
    let log_sum: F = values.iter().map(|v| v.ln()).sum();
    let mean = (log_sum / n).exp();
    // Pull rounding noise back inside [min, max].
    let (lo, hi) = min_max(values);
    Some(mean.max(lo).min(hi))
}

pub fn mean<F: Scalar>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let sum: F = values.iter().copied().sum();
    Some(sum / F::of_usize(values.len()))
}

/// Sample standard deviation (n - 1 denominator). A single value has zero spread.
pub fn sample_stdev<F: Scalar>(values: &[F]) -> Option<F> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some(F::zero());
    }
    let ss: F = values.iter().map(|v| (*v - m) * (*v - m)).sum();
    Some((ss / F::of_usize(values.len() - 1)).sqrt())
}

/// Population standard deviation (n denominator).
pub fn population_stdev<F: Scalar>(values: &[F]) -> Option<F> {
    let m = mean(values)?;
    let ss: F = values.iter().map(|v| (*v - m) * (*v - m)).sum();
    Some((ss / F::of_usize(values.len())).sqrt())
}

fn min_max<F: Scalar>(values: &[F]) -> (F, F) {
    values
        .iter()
        .fold((F::infinity(), F::neg_infinity()), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        })
}
