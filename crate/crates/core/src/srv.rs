//! Square-root-velocity functions, the transform of polygons and its inverse.

use crate::curve::Curve;
use crate::error::{ElasticError, Result};
use crate::poly::{merge_breaks, PiecewisePoly};
use crate::quadrature::gauss5;
use crate::scalar::{norm, Scalar};
use crate::spline::SplineBasis;
use crate::warping::Warping;

/// How an SRV function is represented.
#[derive(Debug, Clone, PartialEq)]
pub enum SrvKind<T> {
    /// Constant on each interval between breakpoints (SRV of a polygon).
    PiecewiseConstant,
    /// `Σ_m coefs[m] B_m` with an `M × d` coefficient matrix.
    Spline { basis: SplineBasis, coefs: Vec<T> },
}

/// A function `[0, 1] → R^d` on SRV level.
#[derive(Debug, Clone, PartialEq)]
pub struct SrvFunction<T> {
    kind: SrvKind<T>,
    poly: PiecewisePoly<T>,
}

/// Sampling of reconstructed curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputGrid {
    /// The breakpoints of the SRV function (exact vertices for polygons).
    Natural,
    /// `n` equidistant parameter values.
    Uniform(usize),
}

impl Default for OutputGrid {
    fn default() -> Self {
        OutputGrid::Uniform(100)
    }
}

impl<T: Scalar> SrvFunction<T> {
    /// `values` holds one `d`-vector per interval `[breaks[k], breaks[k+1])`.
    pub fn piecewise_constant(breaks: Vec<T>, dim: usize, values: Vec<T>) -> Result<Self> {
        if breaks.len() < 2 || breaks[0] != T::zero() || breaks[breaks.len() - 1] != T::one() {
            return Err(ElasticError::InvalidArgument("breakpoints must cover [0, 1]".into()));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ElasticError::InvalidArgument("breakpoints must increase strictly".into()));
        }
        if dim == 0 || values.len() != (breaks.len() - 1) * dim {
            return Err(ElasticError::DimensionMismatch {
                expected: (breaks.len() - 1) * dim,
                found: values.len(),
            });
        }
        Ok(Self { kind: SrvKind::PiecewiseConstant, poly: PiecewisePoly::constant(breaks, dim, values) })
    }

    pub fn spline(basis: SplineBasis, coefs: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 || coefs.len() != basis.size() * dim {
            return Err(ElasticError::DimensionMismatch { expected: basis.size() * dim, found: coefs.len() });
        }
        let poly = basis.to_poly(&coefs, dim);
        Ok(Self { kind: SrvKind::Spline { basis, coefs }, poly })
    }

    pub fn kind(&self) -> &SrvKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    pub fn breaks(&self) -> &[T] {
        self.poly.breaks()
    }

    /// Values per interval of a piecewise-constant function.
    pub fn values(&self) -> Option<&[T]> {
        match self.kind {
            SrvKind::PiecewiseConstant => Some(self.poly.coefs()),
            SrvKind::Spline { .. } => None,
        }
    }

    pub fn as_poly(&self) -> &PiecewisePoly<T> {
        &self.poly
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        self.poly.eval(t)
    }

    pub fn norm_sq(&self) -> T {
        self.poly.norm_sq()
    }

    pub fn inner(&self, other: &Self) -> T {
        self.poly.inner(&other.poly)
    }

    /// `‖self − other‖_{L2}`.
    pub fn l2_distance(&self, other: &Self) -> T {
        let sq = self.norm_sq() + other.norm_sq() - T::lit(2.0) * self.inner(other);
        sq.max(T::zero()).sqrt()
    }

    pub fn scaled(&self, factor: T) -> Self {
        let kind = match &self.kind {
            SrvKind::PiecewiseConstant => SrvKind::PiecewiseConstant,
            SrvKind::Spline { basis, coefs } => {
                SrvKind::Spline { basis: *basis, coefs: coefs.iter().map(|&c| c * factor).collect() }
            }
        };
        Self { kind, poly: self.poly.scaled(factor) }
    }

    /// `(1 − w)·self + w·other`. Splines on the same basis combine their
    /// coefficients; otherwise both must be piecewise constant and the result
    /// lives on the common refinement of their breakpoints.
    pub fn lerp(&self, other: &Self, w: T) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(ElasticError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let v = T::one() - w;
        match (&self.kind, &other.kind) {
            (SrvKind::Spline { basis: b1, coefs: c1 }, SrvKind::Spline { basis: b2, coefs: c2 }) if b1 == b2 => {
                let coefs = c1.iter().zip(c2).map(|(&a, &b)| v * a + w * b).collect();
                Self::spline(*b1, coefs, self.dim())
            }
            (SrvKind::PiecewiseConstant, SrvKind::PiecewiseConstant) => {
                let breaks = merge_breaks(self.breaks(), other.breaks());
                let d = self.dim();
                let mut values = Vec::with_capacity((breaks.len() - 1) * d);
                let (mut a, mut b) = (vec![T::zero(); d], vec![T::zero(); d]);
                for win in breaks.windows(2) {
                    let mid = (win[0] + win[1]) * T::lit(0.5);
                    self.poly.eval_into(mid, &mut a);
                    other.poly.eval_into(mid, &mut b);
                    values.extend(a.iter().zip(&b).map(|(&x, &y)| v * x + w * y));
                }
                Self::piecewise_constant(breaks, d, values)
            }
            _ => Err(ElasticError::InvalidArgument(
                "can only combine piecewise-constant functions or splines on one basis".into(),
            )),
        }
    }

    /// The group action `(q ∘ γ)·√γ̇` for a piecewise-constant `q`.
    pub fn warp(&self, w: &Warping<T>) -> Result<Self> {
        if self.values().is_none() {
            return Err(ElasticError::InvalidArgument("warping acts on piecewise-constant functions only".into()));
        }
        let pulled: Vec<T> = self.breaks().iter().map(|&t| w.inverse_eval(t)).collect();
        let knots: Vec<T> = w.knots().iter().map(|k| k.0).collect();
        let mut breaks = merge_breaks(&pulled, &knots);
        breaks[0] = T::zero();
        *breaks.last_mut().unwrap() = T::one();
        let d = self.dim();
        let mut values = Vec::with_capacity((breaks.len() - 1) * d);
        let mut q = vec![T::zero(); d];
        for win in breaks.windows(2) {
            let mid = (win[0] + win[1]) * T::lit(0.5);
            // map the whole interval to locate the source piece robustly
            let t_mid = (w.eval(win[0]) + w.eval(win[1])) * T::lit(0.5);
            self.poly.eval_into(t_mid, &mut q);
            let rate = w.slope(mid).sqrt();
            values.extend(q.iter().map(|&x| x * rate));
        }
        Self::piecewise_constant(breaks, d, values)
    }

    /// True if the function vanishes up to rounding.
    pub fn is_negligible(&self) -> bool {
        self.norm_sq() <= T::lit(1e-24)
    }
}

/// SRV of a polygon: `Δy / √(‖Δy‖·Δt)` on each segment.
pub fn srv_transform<T: Scalar>(curve: &Curve<T>) -> SrvFunction<T> {
    let d = curve.dim();
    let times = curve.times();
    let mut values = Vec::with_capacity(curve.num_segments() * d);
    for l in 0..curve.num_segments() {
        let dy: Vec<T> = curve.point(l + 1).iter().zip(curve.point(l)).map(|(&a, &b)| a - b).collect();
        let dt = times[l + 1] - times[l];
        let scale = (norm(&dy) * dt).sqrt();
        values.extend(dy.iter().map(|&x| x / scale));
    }
    SrvFunction::piecewise_constant(times.to_vec(), d, values).expect("curve invariants give a valid SRV")
}

/// `t ↦ ∫₀ᵗ q‖q‖` at the sorted parameters `at` (5-point Gauss–Legendre on
/// every piece between breakpoints and requested parameters).
pub fn integrate_srv<T: Scalar>(srv: &SrvFunction<T>, at: &[T]) -> Vec<Vec<T>> {
    let poly = srv.as_poly();
    let d = poly.dim();
    let grid = merge_breaks(poly.breaks(), at);
    let mut acc = vec![T::zero(); d];
    let mut q = vec![T::zero(); d];
    let mut out = Vec::with_capacity(at.len());
    let mut next = 0;
    while next < at.len() && at[next] <= grid[0] {
        out.push(acc.clone());
        next += 1;
    }
    let mut span = 0;
    for win in grid.windows(2) {
        let mid = (win[0] + win[1]) * T::lit(0.5);
        while span + 1 < poly.num_spans() && poly.breaks()[span + 1] <= mid {
            span += 1;
        }
        for (x, w) in gauss5(win[0], win[1]) {
            poly.eval_span_into(span, x, &mut q);
            let speed = norm(&q);
            for i in 0..d {
                acc[i] += w * q[i] * speed;
            }
        }
        while next < at.len() && at[next] <= win[1] {
            out.push(acc.clone());
            next += 1;
        }
    }
    while out.len() < at.len() {
        out.push(acc.clone());
    }
    out
}

fn grid_times<T: Scalar>(srv: &SrvFunction<T>, grid: OutputGrid) -> Vec<T> {
    match grid {
        OutputGrid::Natural => srv.breaks().to_vec(),
        OutputGrid::Uniform(n) => {
            let n = n.max(2);
            let last = T::from_usize_lossy(n - 1);
            let mut ts: Vec<T> = (0..n).map(|i| T::from_usize_lossy(i) / last).collect();
            ts[n - 1] = T::one();
            ts
        }
    }
}

/// `Q⁻¹`: the curve `∫₀ᵗ q‖q‖` starting at the origin, sampled on `grid`.
/// Fails only if `q` vanishes so that no curve remains.
pub fn srv_inverse<T: Scalar>(srv: &SrvFunction<T>, grid: OutputGrid) -> Result<Curve<T>> {
    srv_inverse_at(srv, &grid_times(srv, grid))
}

/// `Q⁻¹` sampled at explicit parameters (sorted, from 0 to 1).
pub fn srv_inverse_at<T: Scalar>(srv: &SrvFunction<T>, times: &[T]) -> Result<Curve<T>> {
    let pts: Vec<T> = integrate_srv(srv, times).into_iter().flatten().collect();
    Curve::with_times(&pts, times, srv.dim(), false)
}

/// Closed curve from an SRV-level prediction: `∫₀ᵗ p‖p‖ − t ∫₀¹ p‖p‖`.
pub fn close_prediction<T: Scalar>(srv: &SrvFunction<T>, grid: OutputGrid) -> Result<Curve<T>> {
    let times = grid_times(srv, grid);
    let d = srv.dim();
    let mut ints = integrate_srv(srv, &times);
    let total = ints.last().cloned().expect("grid has at least two points");
    let mut extent = T::zero();
    for (v, &t) in ints.iter_mut().zip(&times) {
        for i in 0..d {
            v[i] -= t * total[i];
            extent = extent.max(v[i].abs());
        }
    }
    // endpoint returns to the start exactly
    let n = ints.len();
    ints[n - 1] = ints[0].clone();
    let scale = srv.norm_sq();
    if !(extent > T::lit(1e-10) * scale.max(T::epsilon())) {
        return Err(ElasticError::DegeneratePrediction);
    }
    let pts: Vec<T> = ints.into_iter().flatten().collect();
    Curve::with_times(&pts, &times, d, true).map_err(|e| match e {
        ElasticError::AllPointsIdentical => ElasticError::DegeneratePrediction,
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(points: &[[f64; 2]]) -> Curve<f64> {
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        Curve::polygon(&flat, 2, false).unwrap()
    }

    #[test]
    fn straight_line_has_unit_srv() {
        let q = srv_transform(&poly(&[[0.0, 0.0], [1.0, 0.0]]));
        assert_eq!(q.values().unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn corner_polygon_srv() {
        let q = srv_transform(&poly(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]));
        let r = 2f64.sqrt();
        let v = q.values().unwrap();
        assert!((v[0] - r).abs() < 1e-15 && v[1] == 0.0 && v[2] == 0.0 && (v[3] - r).abs() < 1e-15);
    }

    #[test]
    fn round_trip_reproduces_vertices() {
        let c = poly(&[[1.0, 2.0], [3.0, 2.5], [2.0, 4.0], [0.5, 3.0], [1.0, 1.0]]);
        let back = srv_inverse(&srv_transform(&c), OutputGrid::Natural).unwrap();
        let anchored = c.anchored();
        assert_eq!(back.len(), c.len());
        for (a, b) in back.points().iter().zip(anchored.points()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_spline_inverse() {
        // q = (0, √(t + 0.5)) as a degree-1 spline is not exact; use the
        // closed form of q‖q‖ = (0, t + 0.5) via a constant-norm check instead
        let basis = SplineBasis::new(1, 2, false).unwrap();
        let q = SrvFunction::spline(basis, vec![0.0f64, 1.0, 0.0, 2.0], 2).unwrap();
        // q(t) = (0, 1 + t), q‖q‖ = (0, (1 + t)²), integral (0, ((1+t)³ − 1)/3)
        let c = srv_inverse(&q, OutputGrid::Uniform(11)).unwrap();
        for (l, &t) in c.times().iter().enumerate() {
            let expect = ((1.0 + t).powi(3) - 1.0) / 3.0;
            assert!((c.point(l)[1] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_speed_srv_norm_is_root_length() {
        let c = poly(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [4.0, 3.0]]);
        let root = c.length().sqrt();
        let q = srv_transform(&c);
        for v in q.values().unwrap().chunks(2) {
            assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - root).abs() < 1e-12);
        }
    }

    #[test]
    fn closing_a_straight_line_degenerates() {
        let basis = SplineBasis::new(0, 2, false).unwrap();
        let q = SrvFunction::spline(basis, vec![1.0, 0.0], 2).unwrap();
        assert_eq!(close_prediction(&q, OutputGrid::default()), Err(ElasticError::DegeneratePrediction));
    }

    #[test]
    fn warp_matches_curve_warping() {
        let c = poly(&[[0.0, 0.0], [1.0, 0.5], [1.5, 2.0], [3.0, 2.0]]);
        let w = Warping::new(vec![(0.0, 0.0), (0.3, 0.5), (0.7, 0.6), (1.0, 1.0)]).unwrap();
        let direct = srv_transform(&c).warp(&w).unwrap();
        let via_curve = srv_transform(&c.apply_warping(&w));
        assert!(direct.l2_distance(&via_curve) < 1e-10);
        assert!((direct.norm_sq() - c.length()).abs() < 1e-12);
    }
}
