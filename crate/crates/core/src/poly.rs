//! Vector-valued piecewise polynomials on `[0, 1]`.

use crate::quadrature::gauss3;
use crate::scalar::Scalar;

/// A piecewise polynomial `[0, 1] → R^d`. On span `k` the value is
/// `Σ_r c[k][r] · (s − breaks[k])^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly<T> {
    breaks: Vec<T>,
    dim: usize,
    order: usize,
    coefs: Vec<T>,
}

impl<T: Scalar> PiecewisePoly<T> {
    /// `coefs` is laid out span-major, then power, then coordinate.
    pub fn new(breaks: Vec<T>, dim: usize, order: usize, coefs: Vec<T>) -> Self {
        assert!(breaks.len() >= 2, "need at least one span");
        assert!(order >= 1 && dim >= 1);
        assert_eq!(coefs.len(), (breaks.len() - 1) * order * dim);
        Self { breaks, dim, order, coefs }
    }

    /// Piecewise-constant function with `values[k]` on `[breaks[k], breaks[k+1])`.
    pub fn constant(breaks: Vec<T>, dim: usize, values: Vec<T>) -> Self {
        Self::new(breaks, dim, 1, values)
    }

    /// Continuous piecewise-linear interpolant through `points` at `breaks`.
    pub fn linear_interpolant(breaks: &[T], dim: usize, points: &[T]) -> Self {
        let spans = breaks.len() - 1;
        let mut coefs = Vec::with_capacity(spans * 2 * dim);
        for k in 0..spans {
            let h = breaks[k + 1] - breaks[k];
            let p0 = &points[k * dim..(k + 1) * dim];
            let p1 = &points[(k + 1) * dim..(k + 2) * dim];
            coefs.extend_from_slice(p0);
            coefs.extend(p0.iter().zip(p1).map(|(&a, &b)| (b - a) / h));
        }
        Self::new(breaks.to_vec(), dim, 2, coefs)
    }

    pub fn breaks(&self) -> &[T] {
        &self.breaks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.order - 1
    }

    pub fn num_spans(&self) -> usize {
        self.breaks.len() - 1
    }

    /// All coefficients, span-major, then power, then coordinate.
    pub fn coefs(&self) -> &[T] {
        &self.coefs
    }

    pub(crate) fn span_coefs(&self, k: usize) -> &[T] {
        let w = self.order * self.dim;
        &self.coefs[k * w..(k + 1) * w]
    }

    /// Span containing `s` (right-continuous, clamped to the outer spans).
    pub fn span_index(&self, s: T) -> usize {
        let n = self.num_spans();
        if s <= self.breaks[0] {
            return 0;
        }
        if s >= self.breaks[n] {
            return n - 1;
        }
        // last break <= s
        let idx = self.breaks.partition_point(|&b| b <= s);
        (idx - 1).min(n - 1)
    }

    /// Evaluates on a given span, extending its polynomial if `s` lies outside.
    #[inline]
    pub fn eval_span_into(&self, k: usize, s: T, out: &mut [T]) {
        let h = s - self.breaks[k];
        let c = self.span_coefs(k);
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = c[(self.order - 1) * d + i];
            for r in (0..self.order - 1).rev() {
                acc = acc * h + c[r * d + i];
            }
            *o = acc;
        }
    }

    #[inline]
    pub fn eval_into(&self, s: T, out: &mut [T]) {
        self.eval_span_into(self.span_index(s), s, out);
    }

    pub fn eval(&self, s: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(s, &mut out);
        out
    }

    /// Antiderivative vanishing at `breaks[0]`.
    pub fn antiderivative(&self) -> Self {
        let d = self.dim;
        let order = self.order + 1;
        let spans = self.num_spans();
        let mut coefs = vec![T::zero(); spans * order * d];
        let mut acc = vec![T::zero(); d];
        for k in 0..spans {
            let c = self.span_coefs(k);
            let base = k * order * d;
            coefs[base..base + d].copy_from_slice(&acc);
            for r in 0..self.order {
                let div = T::from_usize_lossy(r + 1);
                for i in 0..d {
                    coefs[base + (r + 1) * d + i] = c[r * d + i] / div;
                }
            }
            // value at right end of the span
            let h = self.breaks[k + 1] - self.breaks[k];
            for i in 0..d {
                let mut v = coefs[base + (order - 1) * d + i];
                for r in (0..order - 1).rev() {
                    v = v * h + coefs[base + r * d + i];
                }
                acc[i] = v;
            }
        }
        Self::new(self.breaks.clone(), d, order, coefs)
    }

    /// `∫₀¹ ‖f‖²`, exact for degree ≤ 2.
    pub fn norm_sq(&self) -> T {
        let mut out = vec![T::zero(); self.dim];
        let mut total = T::zero();
        for k in 0..self.num_spans() {
            for (x, w) in gauss3(self.breaks[k], self.breaks[k + 1]) {
                self.eval_span_into(k, x, &mut out);
                total += w * crate::scalar::dot(&out, &out);
            }
        }
        total
    }

    /// `∫₀¹ ⟨f, g⟩`, exact when the degrees add up to at most 5.
    pub fn inner(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim);
        let grid = merge_breaks(&self.breaks, &other.breaks);
        let mut a = vec![T::zero(); self.dim];
        let mut b = vec![T::zero(); self.dim];
        let mut total = T::zero();
        let (mut ka, mut kb) = (0, 0);
        for win in grid.windows(2) {
            let mid = (win[0] + win[1]) * T::lit(0.5);
            while ka + 1 < self.num_spans() && self.breaks[ka + 1] <= mid {
                ka += 1;
            }
            while kb + 1 < other.num_spans() && other.breaks[kb + 1] <= mid {
                kb += 1;
            }
            for (x, w) in gauss3(win[0], win[1]) {
                self.eval_span_into(ka, x, &mut a);
                other.eval_span_into(kb, x, &mut b);
                total += w * crate::scalar::dot(&a, &b);
            }
        }
        total
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.coefs.iter_mut().for_each(|c| *c *= factor);
        out
    }
}

/// Sorted union of two break sequences, dropping exact duplicates.
pub(crate) fn merge_breaks<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        if out.last().map_or(true, |&l| next > l) {
            out.push(next);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antiderivative_of_linear() {
        // f(s) = (1, 2s + 1) on two spans
        let f = PiecewisePoly::new(
            vec![0.0, 0.5, 1.0],
            2,
            2,
            vec![1.0, 1.0, 0.0, 2.0, 1.0, 2.0, 0.0, 2.0],
        );
        let p = f.antiderivative();
        for &s in &[0.0f64, 0.2, 0.5, 0.77, 1.0] {
            let v = p.eval(s);
            assert!((v[0] - s).abs() < 1e-14);
            assert!((v[1] - (s * s + s)).abs() < 1e-14);
        }
        assert!((f.norm_sq() - (1.0 + 13.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn merge_drops_duplicates() {
        assert_eq!(merge_breaks(&[0.0, 0.5, 1.0], &[0.0, 0.25, 0.5, 1.0]), vec![0.0, 0.25, 0.5, 1.0]);
    }
}
