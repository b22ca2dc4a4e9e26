//! Maximizing a linear functional over an L∞ ball around a distribution,
//! intersected with the probability simplex.

use crate::scalar::Scalar;

/// `{p : |p - center| <= half_width, p >= 0, sum p = 1}` together with the
/// objective coefficients.
#[derive(Debug, Clone, Copy)]
pub struct OptimisticBox<'a, T> {
    pub center: &'a [T],
    pub half_width: T,
    pub values: &'a [T],
}

impl<'a, T: Scalar> OptimisticBox<'a, T> {
    pub fn new(center: &'a [T], half_width: T, values: &'a [T]) -> Self {
        debug_assert_eq!(center.len(), values.len());
        Self {
            center,
            half_width,
            values,
        }
    }

    pub fn lower(&self, i: usize) -> T {
        (self.center[i] - self.half_width).max(T::zero())
    }

    pub fn upper(&self, i: usize) -> T {
        (self.center[i] + self.half_width).min(T::one())
    }
}

/// Exact maximizer: start every coordinate at its lower bound and pour the
/// remaining mass into coordinates in decreasing order of value (lower index
/// first on ties), each up to its upper bound.
pub fn optimistic_expectation<T: Scalar>(bx: &OptimisticBox<'_, T>) -> (Vec<T>, T) {
    let n = bx.center.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values keep index order
    order.sort_by(|&i, &j| {
        bx.values[j]
            .partial_cmp(&bx.values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut p: Vec<T> = (0..n).map(|i| bx.lower(i)).collect();
    let mut remaining = T::one() - p.iter().copied().sum::<T>();
    for &i in &order {
        if remaining <= T::zero() {
            break;
        }
        let add = (bx.upper(i) - p[i]).min(remaining);
        p[i] = p[i] + add;
        remaining = remaining - add;
    }
    let value = p.iter().zip(bx.values).map(|(&pi, &v)| pi * v).sum();
    (p, value)
}

/// Value of [`optimistic_expectation`] without allocating the maximizer.
/// `order` is scratch space.
pub(crate) fn optimistic_value<T: Scalar>(
    center: &[T],
    half_width: T,
    values: &[T],
    order: &mut Vec<usize>,
) -> T {
    let n = center.len();
    order.clear();
    order.extend(0..n);
    order.sort_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut value = T::zero();
    let mut remaining = T::one();
    for i in 0..n {
        let lo = (center[i] - half_width).max(T::zero());
        value = value + lo * values[i];
        remaining = remaining - lo;
    }
    for &i in order.iter() {
        if remaining <= T::zero() {
            break;
        }
        let lo = (center[i] - half_width).max(T::zero());
        let hi = (center[i] + half_width).min(T::one());
        let add = (hi - lo).min(remaining);
        value = value + add * values[i];
        remaining = remaining - add;
    }
    value
}
