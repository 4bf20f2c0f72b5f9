use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sorted sample with cumulative fractions `i / n`, one point per value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve<T> {
    pub points: Vec<(T, T)>,
}

impl<T: Scalar> EcdfCurve<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fraction of the sample `<= x`.
    pub fn eval(&self, x: T) -> T {
        let k = self.points.partition_point(|p| p.0 <= x);
        if k == 0 {
            T::zero()
        } else {
            self.points[k - 1].1
        }
    }
}

pub fn ecdf<T: Scalar>(values: &[T]) -> Result<EcdfCurve<T>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("ECDF of an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("ECDF input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered"));
    let n = T::from_usize(sorted.len()).expect("sample size fits the scalar");
    let points = sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, T::from_usize(i + 1).expect("index fits the scalar") / n))
        .collect();
    Ok(EcdfCurve { points })
}
