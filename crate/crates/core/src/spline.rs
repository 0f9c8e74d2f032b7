//! Equidistant B-spline bases on `[0, 1]`, open (clamped) or periodic.

use crate::error::{ElasticError, Result};
use crate::linalg::Cholesky;
use crate::poly::PiecewisePoly;
use crate::quadrature::gauss5;
use crate::scalar::Scalar;

/// B-spline basis of degree 0, 1 or 2 on `n_knots` equidistant knots
/// (including both ends of `[0, 1]`).
///
/// Open bases are clamped and have `n_knots + degree − 1` functions;
/// periodic bases wrap around and have `n_knots − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplineBasis {
    degree: usize,
    n_knots: usize,
    periodic: bool,
}

impl SplineBasis {
    pub fn new(degree: usize, n_knots: usize, periodic: bool) -> Result<Self> {
        if degree > 3 {
            return Err(ElasticError::InvalidBasis(format!("degree {degree} unsupported (0..=3)")));
        }
        if n_knots < 2 {
            return Err(ElasticError::InvalidBasis("at least two knots required".into()));
        }
        if periodic && n_knots - 1 < degree + 1 {
            return Err(ElasticError::InvalidBasis(format!(
                "periodic degree-{degree} basis needs at least {} knots",
                degree + 2
            )));
        }
        Ok(Self { degree, n_knots, periodic })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_knots(&self) -> usize {
        self.n_knots
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn num_spans(&self) -> usize {
        self.n_knots - 1
    }

    /// Number of basis functions `M`.
    pub fn size(&self) -> usize {
        if self.periodic {
            self.num_spans()
        } else {
            self.num_spans() + self.degree
        }
    }

    /// The same knots with the degree raised by one (curve-level counterpart
    /// of an SRV-level basis).
    pub fn raised(&self) -> Self {
        Self { degree: self.degree + 1, ..*self }
    }

    pub fn knot<T: Scalar>(&self, i: usize) -> T {
        if i + 1 == self.n_knots {
            T::one()
        } else {
            T::from_usize_lossy(i) / T::from_usize_lossy(self.num_spans())
        }
    }

    pub fn knots<T: Scalar>(&self) -> Vec<T> {
        (0..self.n_knots).map(|i| self.knot(i)).collect()
    }

    /// Knot span containing `t` (the last span is closed on the right).
    pub fn span_of<T: Scalar>(&self, t: T) -> usize {
        let k = (t * T::from_usize_lossy(self.num_spans())).floor();
        let k = k.to_usize().unwrap_or(0);
        k.min(self.num_spans() - 1)
    }

    fn ext_knot<T: Scalar>(&self, i: isize) -> T {
        // extended knot vector of the degree-p basis
        let p = self.degree as isize;
        let k = self.num_spans() as isize;
        if self.periodic {
            T::lit((i - p) as f64) / T::lit(k as f64)
        } else {
            let j = (i - p).clamp(0, k);
            T::lit(j as f64) / T::lit(k as f64)
        }
    }

    /// Values of the `degree + 1` functions that are non-zero on `span`,
    /// evaluated at `t` (the span polynomial is used even if `t` lies outside
    /// the span), together with the index of the first one. Indices must be
    /// reduced with [`SplineBasis::wrap`].
    pub fn span_values<T: Scalar>(&self, span: usize, t: T, out: &mut [T]) -> usize {
        let p = self.degree;
        let s = span + p; // knot index with u[s] <= t < u[s+1]
        out[0] = T::one();
        let mut left = [T::zero(); 4];
        let mut right = [T::zero(); 4];
        for j in 1..=p {
            left[j] = t - self.ext_knot::<T>(s as isize + 1 - j as isize);
            right[j] = self.ext_knot::<T>(s as isize + j as isize) - t;
            let mut saved = T::zero();
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        span
    }

    /// Maps an extended index to a basis function index.
    #[inline]
    pub fn wrap(&self, idx: usize) -> usize {
        if self.periodic {
            idx % self.size()
        } else {
            idx
        }
    }

    /// All `M` basis values at `t`.
    pub fn eval<T: Scalar>(&self, t: T) -> Result<Vec<T>> {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(ElasticError::OutOfDomain(t.to_f64_lossy()));
        }
        let mut out = vec![T::zero(); self.size()];
        let mut vals = [T::zero(); 4];
        let span = self.span_of(t);
        let first = self.span_values(span, t, &mut vals);
        for (r, &v) in vals.iter().enumerate().take(self.degree + 1) {
            out[self.wrap(first + r)] += v;
        }
        Ok(out)
    }

    /// Gram matrix `G[m][m'] = ∫₀¹ B_m B_m'` (row-major, exact).
    pub fn gram<T: Scalar>(&self) -> Vec<T> {
        let m = self.size();
        let mut g = vec![T::zero(); m * m];
        let mut vals = [T::zero(); 4];
        for span in 0..self.num_spans() {
            for (x, w) in gauss5(self.knot::<T>(span), self.knot::<T>(span + 1)) {
                let first = self.span_values(span, x, &mut vals);
                for a in 0..=self.degree {
                    for b in 0..=self.degree {
                        let (ia, ib) = (self.wrap(first + a), self.wrap(first + b));
                        g[ia * m + ib] += w * vals[a] * vals[b];
                    }
                }
            }
        }
        g
    }

    pub(crate) fn gram_factor<T: Scalar>(&self) -> Cholesky<T> {
        Cholesky::new(&self.gram::<T>(), self.size(), T::lit(1e-13))
            .expect("B-spline Gram matrices are positive definite")
    }

    /// Projections `∫₀¹ B_m(t) f(t) dt` for every basis function, as an
    /// `M × d` matrix. Exact when `deg f + degree ≤ 9`.
    pub fn project<T: Scalar>(&self, f: &PiecewisePoly<T>) -> Vec<T> {
        let d = f.dim();
        let mut out = vec![T::zero(); self.size() * d];
        let knots: Vec<T> = self.knots();
        let grid = crate::poly::merge_breaks(f.breaks(), &knots);
        let mut vals = [T::zero(); 4];
        let mut fv = vec![T::zero(); d];
        let mut fspan = 0;
        for win in grid.windows(2) {
            let mid = (win[0] + win[1]) * T::lit(0.5);
            while fspan + 1 < f.num_spans() && f.breaks()[fspan + 1] <= mid {
                fspan += 1;
            }
            let span = self.span_of(mid);
            for (x, w) in gauss5(win[0], win[1]) {
                f.eval_span_into(fspan, x, &mut fv);
                let first = self.span_values(span, x, &mut vals);
                for (r, &bv) in vals.iter().enumerate().take(self.degree + 1) {
                    let row = self.wrap(first + r) * d;
                    for i in 0..d {
                        out[row + i] += w * bv * fv[i];
                    }
                }
            }
        }
        out
    }

    /// `∫_a^b B_m` for all `m` (used for segment averages).
    pub fn integrals<T: Scalar>(&self, a: T, b: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.size()];
        let mut vals = [T::zero(); 4];
        let knots: Vec<T> = self.knots();
        let mut cuts = vec![a];
        cuts.extend(knots.iter().copied().filter(|&k| k > a && k < b));
        cuts.push(b);
        for win in cuts.windows(2) {
            let span = self.span_of((win[0] + win[1]) * T::lit(0.5));
            for (x, w) in gauss5(win[0], win[1]) {
                let first = self.span_values(span, x, &mut vals);
                for (r, &v) in vals.iter().enumerate().take(self.degree + 1) {
                    out[self.wrap(first + r)] += w * v;
                }
            }
        }
        out
    }

    /// The spline `Σ_m coefs[m] B_m` (coefs is `M × d`) as a piecewise
    /// polynomial on the knot spans.
    pub fn to_poly<T: Scalar>(&self, coefs: &[T], dim: usize) -> PiecewisePoly<T> {
        assert_eq!(coefs.len(), self.size() * dim);
        let p = self.degree;
        let spans = self.num_spans();
        let mut out = Vec::with_capacity(spans * (p + 1) * dim);
        let mut vals = [T::zero(); 4];
        for span in 0..spans {
            let (a, b) = (self.knot::<T>(span), self.knot::<T>(span + 1));
            let h = b - a;
            // sample at p + 1 equidistant nodes and convert to power form
            let nodes: Vec<T> = (0..=p)
                .map(|r| if p == 0 { T::zero() } else { h * T::from_usize_lossy(r) / T::from_usize_lossy(p) })
                .collect();
            let samples: Vec<Vec<T>> = nodes
                .iter()
                .map(|&u| {
                    let first = self.span_values(span, a + u, &mut vals);
                    let mut v = vec![T::zero(); dim];
                    for (r, &bv) in vals.iter().enumerate().take(p + 1) {
                        let m = self.wrap(first + r);
                        for i in 0..dim {
                            v[i] += bv * coefs[m * dim + i];
                        }
                    }
                    v
                })
                .collect();
            for c in newton_to_power(&nodes, &samples, dim) {
                out.extend(c);
            }
        }
        PiecewisePoly::new(self.knots(), dim, p + 1, out)
    }
}

/// Interpolating polynomial through `(nodes[r], samples[r])` in power form
/// around 0, returned coefficient by coefficient.
fn newton_to_power<T: Scalar>(nodes: &[T], samples: &[Vec<T>], dim: usize) -> Vec<Vec<T>> {
    let n = nodes.len();
    let mut dd: Vec<Vec<T>> = samples.to_vec();
    for j in 1..n {
        for i in (j..n).rev() {
            let denom = nodes[i] - nodes[i - j];
            for c in 0..dim {
                dd[i][c] = (dd[i][c] - dd[i - 1][c]) / denom;
            }
        }
    }
    // expand Newton form: p(x) = dd0 + dd1 (x - x0) + dd2 (x - x0)(x - x1) + ...
    let mut power = vec![vec![T::zero(); dim]; n];
    let mut basis = vec![T::zero(); n];
    basis[0] = T::one();
    for (j, ddj) in dd.iter().enumerate() {
        for (r, &b) in basis.iter().enumerate().take(j + 1) {
            for c in 0..dim {
                power[r][c] += b * ddj[c];
            }
        }
        if j + 1 < n {
            // basis *= (x - nodes[j])
            for r in (0..=j + 1).rev() {
                let shifted = if r > 0 { basis[r - 1] } else { T::zero() };
                basis[r] = shifted - nodes[j] * basis[r];
            }
        }
    }
    power
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_hat_values() {
        let b = SplineBasis::new(1, 3, false).unwrap();
        assert_eq!(b.size(), 3);
        assert_eq!(b.eval(0.0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(b.eval(0.25).unwrap(), vec![0.5, 0.5, 0.0]);
        assert_eq!(b.eval(1.0).unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn out_of_domain() {
        let b = SplineBasis::new(1, 3, false).unwrap();
        assert!(matches!(b.eval(1.5), Err(ElasticError::OutOfDomain(_))));
    }

    #[test]
    fn partition_of_unity_all_kinds() {
        for &(deg, periodic) in &[(0, false), (1, false), (2, false), (0, true), (1, true), (2, true), (3, false)] {
            let b = SplineBasis::new(deg, 7, periodic).unwrap();
            for i in 0..=97 {
                let t = i as f64 / 97.0;
                let v = b.eval(t).unwrap();
                assert!(v.iter().all(|&x| x >= -1e-15));
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12, "deg {deg} periodic {periodic}");
            }
        }
    }

    #[test]
    fn periodic_linear_wraps() {
        let b = SplineBasis::new(1, 5, true).unwrap();
        assert_eq!(b.size(), 4);
        let v0 = b.eval(0.0f64).unwrap();
        let v1 = b.eval(1.0f64).unwrap();
        assert!((v0[0] - 1.0).abs() < 1e-15 && (v1[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn local_support() {
        let b = SplineBasis::new(2, 11, false).unwrap();
        let v = b.eval(0.55).unwrap();
        assert_eq!(v.iter().filter(|&&x| x > 0.0).count(), 3);
    }

    #[test]
    fn gram_matches_dense_quadrature() {
        let b = SplineBasis::new(2, 5, true).unwrap();
        let g: Vec<f64> = b.gram();
        let m = b.size();
        let n = 20000;
        let mut dense = vec![0.0; m * m];
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            let v = b.eval(t).unwrap();
            for a in 0..m {
                for c in 0..m {
                    dense[a * m + c] += v[a] * v[c] / n as f64;
                }
            }
        }
        for (x, y) in g.iter().zip(&dense) {
            assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn poly_form_matches_basis() {
        let b = SplineBasis::new(2, 6, false).unwrap();
        let coefs: Vec<f64> = (0..b.size() * 2).map(|i| (i as f64 * 0.37).sin()).collect();
        let poly = b.to_poly(&coefs, 2);
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            let v = b.eval(t).unwrap();
            let direct: Vec<f64> = (0..2).map(|c| (0..b.size()).map(|m| v[m] * coefs[m * 2 + c]).sum()).collect();
            let p = poly.eval(t);
            assert!((p[0] - direct[0]).abs() < 1e-12 && (p[1] - direct[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_integrals_sum_to_length() {
        let b = SplineBasis::new(1, 4, false).unwrap();
        let ints: Vec<f64> = b.integrals(0.1, 0.8);
        assert!((ints.iter().sum::<f64>() - 0.7).abs() < 1e-14);
    }
}
