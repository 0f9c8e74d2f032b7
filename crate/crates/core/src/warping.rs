//! Monotone piecewise-linear re-parametrizations of `[0, 1]`.

use crate::error::{ElasticError, Result};
use crate::scalar::Scalar;

/// A warping `γ` given by knots `(s, γ(s))`, interpolated linearly.
/// Both coordinates increase strictly from `(0, 0)` to `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Warping<T> {
    knots: Vec<(T, T)>,
}

impl<T: Scalar> Warping<T> {
    pub fn new(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(ElasticError::InvalidWarping("at least two knots required".into()));
        }
        let (first, last) = (knots[0], knots[knots.len() - 1]);
        if first != (T::zero(), T::zero()) || last != (T::one(), T::one()) {
            return Err(ElasticError::InvalidWarping("must map 0 to 0 and 1 to 1".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
            return Err(ElasticError::InvalidWarping("knots must increase strictly".into()));
        }
        Ok(Self { knots })
    }

    pub fn identity() -> Self {
        Self { knots: vec![(T::zero(), T::zero()), (T::one(), T::one())] }
    }

    /// Samples `f` on `n` equidistant points; `f` must be strictly increasing
    /// with `f(0) = 0` and `f(1) = 1`.
    pub fn from_fn(n: usize, f: impl Fn(T) -> T) -> Result<Self> {
        let last = T::from_usize_lossy(n - 1);
        let knots = (0..n)
            .map(|i| {
                let s = T::from_usize_lossy(i) / last;
                let v = if i == 0 {
                    T::zero()
                } else if i == n - 1 {
                    T::one()
                } else {
                    f(s)
                };
                (if i == n - 1 { T::one() } else { s }, v)
            })
            .collect();
        Self::new(knots)
    }

    pub fn knots(&self) -> &[(T, T)] {
        &self.knots
    }

    pub fn is_identity(&self) -> bool {
        self.knots.iter().all(|&(s, t)| s == t)
    }

    /// `γ(s)`.
    pub fn eval(&self, s: T) -> T {
        interp(&self.knots, s, |k| k.0, |k| k.1)
    }

    /// `γ⁻¹(t)`.
    pub fn inverse_eval(&self, t: T) -> T {
        interp(&self.knots, t, |k| k.1, |k| k.0)
    }

    pub fn inverse(&self) -> Self {
        Self { knots: self.knots.iter().map(|&(s, t)| (t, s)).collect() }
    }

    /// `γ̇` on the knot interval containing `s` (right-continuous).
    pub fn slope(&self, s: T) -> T {
        let i = self.interval(s);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        (b.1 - a.1) / (b.0 - a.0)
    }

    fn interval(&self, s: T) -> usize {
        let n = self.knots.len() - 1;
        self.knots.partition_point(|k| k.0 <= s).saturating_sub(1).min(n - 1)
    }

    /// `self ∘ inner`, i.e. `s ↦ self(inner(s))`.
    pub fn compose(&self, inner: &Self) -> Self {
        let mut ss: Vec<T> = inner.knots.iter().map(|k| k.0).collect();
        ss.extend(self.knots.iter().map(|k| inner.inverse_eval(k.0)));
        ss.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ss.dedup();
        let mut knots: Vec<(T, T)> = Vec::with_capacity(ss.len());
        for s in ss {
            let v = self.eval(inner.eval(s));
            if knots.last().map_or(true, |&(ps, pv)| s > ps && v > pv) {
                knots.push((s, v));
            }
        }
        let n = knots.len() - 1;
        knots[0] = (T::zero(), T::zero());
        knots[n] = (T::one(), T::one());
        Self { knots }
    }

    /// `sup_s |γ(s) − f(s)|` over a dense grid plus the knots.
    pub fn sup_distance(&self, f: impl Fn(T) -> T, grid: usize) -> T {
        let last = T::from_usize_lossy(grid - 1);
        let grid_max = (0..grid)
            .map(|i| T::from_usize_lossy(i) / last)
            .map(|s| (self.eval(s) - f(s)).abs())
            .fold(T::zero(), T::max);
        self.knots.iter().map(|&(s, t)| (t - f(s)).abs()).fold(grid_max, T::max)
    }
}

fn interp<T: Scalar>(
    knots: &[(T, T)],
    x: T,
    key: impl Fn(&(T, T)) -> T,
    val: impl Fn(&(T, T)) -> T,
) -> T {
    let n = knots.len() - 1;
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let i = knots.partition_point(|k| key(k) <= x).saturating_sub(1).min(n - 1);
    let (a, b) = (&knots[i], &knots[i + 1]);
    let u = (x - key(a)) / (key(b) - key(a));
    val(a) + (val(b) - val(a)) * u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let w = Warping::<f64>::from_fn(41, |s| s * s).unwrap();
        let inv = w.inverse();
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            assert!((inv.eval(w.eval(s)) - s).abs() < 1e-12);
        }
        assert!(w.compose(&inv).sup_distance(|s| s, 101) < 1e-12);
    }

    #[test]
    fn rejects_non_monotone() {
        assert!(Warping::new(vec![(0.0, 0.0), (0.5, 0.6), (0.6, 0.5), (1.0, 1.0)]).is_err());
        assert!(Warping::new(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn slope_is_piecewise_constant() {
        let w = Warping::new(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap();
        assert_eq!(w.slope(0.2), 0.5);
        assert_eq!(w.slope(0.5), 1.5);
    }
}
