//! Polygonal curves with explicit parameter timestamps.

use crate::error::{ElasticError, Result};
use crate::poly::PiecewisePoly;
use crate::scalar::{norm, Scalar};
use crate::warping::Warping;

/// An observed curve: vertices in `R^d` joined linearly, with strictly
/// increasing timestamps running from 0 to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve<T> {
    dim: usize,
    points: Vec<T>,
    times: Vec<T>,
    closed: bool,
}

impl<T: Scalar> Curve<T> {
    /// Builds the constant-speed polygon through `points` (flattened, `dim`
    /// coordinates each). Consecutive duplicates are merged; a closed curve
    /// gets its first point appended if it is not already repeated.
    pub fn polygon(points: &[T], dim: usize, closed: bool) -> Result<Self> {
        check_dim(points.len(), dim)?;
        let mut pts = dedup_points(points, dim);
        if pts.len() < 2 * dim {
            return Err(ElasticError::AllPointsIdentical);
        }
        if closed && pts[..dim] != pts[pts.len() - dim..] {
            let first = pts[..dim].to_vec();
            pts.extend_from_slice(&first);
        }
        let times = arc_length_times(&pts, dim);
        Ok(Self { dim, points: pts, times, closed })
    }

    /// Same as [`Curve::polygon`] for a list of point vectors.
    pub fn from_rows(rows: &[Vec<T>], closed: bool) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(ElasticError::InvalidCurve("points have differing dimensions".into()));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        Self::polygon(&flat, dim, closed)
    }

    /// Builds a curve with given timestamps. Timestamps must be strictly
    /// increasing from 0 to 1; zero-length segments are merged.
    pub fn with_times(points: &[T], times: &[T], dim: usize, closed: bool) -> Result<Self> {
        check_dim(points.len(), dim)?;
        if points.len() / dim != times.len() {
            return Err(ElasticError::InvalidCurve("one timestamp per point required".into()));
        }
        if times.first() != Some(&T::zero()) || times.last() != Some(&T::one()) {
            return Err(ElasticError::InvalidCurve("timestamps must run from 0 to 1".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ElasticError::InvalidCurve("timestamps must be strictly increasing".into()));
        }
        if closed && points[..dim] != points[points.len() - dim..] {
            return Err(ElasticError::InvalidCurve("closed curve must end at its start".into()));
        }
        let mut pts: Vec<T> = points[..dim].to_vec();
        let mut ts = vec![T::zero()];
        for l in 1..times.len() {
            let p = &points[l * dim..(l + 1) * dim];
            if p == &pts[pts.len() - dim..] {
                // merged: the later timestamp survives for the last vertex
                if l == times.len() - 1 {
                    *ts.last_mut().unwrap() = T::one();
                }
                continue;
            }
            pts.extend_from_slice(p);
            ts.push(times[l]);
        }
        if ts.len() < 2 {
            return Err(ElasticError::AllPointsIdentical);
        }
        *ts.last_mut().unwrap() = T::one();
        Ok(Self { dim, points: pts, times: ts, closed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Flattened vertex coordinates.
    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn point(&self, l: usize) -> &[T] {
        &self.points[l * self.dim..(l + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.points.chunks(self.dim).map(|c| c.to_vec()).collect()
    }

    pub fn num_segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn length(&self) -> T {
        (0..self.num_segments()).map(|l| self.segment_length(l)).sum()
    }

    pub(crate) fn segment_length(&self, l: usize) -> T {
        let d: Vec<T> = self.point(l + 1).iter().zip(self.point(l)).map(|(&a, &b)| a - b).collect();
        norm(&d)
    }

    /// Position at parameter `t` (linear between vertices).
    pub fn eval(&self, t: T) -> Vec<T> {
        let l = segment_at(&self.times, t);
        let (t0, t1) = (self.times[l], self.times[l + 1]);
        let u = (t - t0) / (t1 - t0);
        self.point(l).iter().zip(self.point(l + 1)).map(|(&a, &b)| a + (b - a) * u).collect()
    }

    /// The curve as a piecewise-linear function of its parameter.
    pub fn as_function(&self) -> PiecewisePoly<T> {
        PiecewisePoly::linear_interpolant(&self.times, self.dim, &self.points)
    }

    /// Same image re-parametrized with constant speed.
    pub fn constant_speed(&self) -> Self {
        let times = arc_length_times(&self.points, self.dim);
        Self { times, ..self.clone() }
    }

    pub fn translated(&self, offset: &[T]) -> Self {
        let mut out = self.clone();
        for p in out.points.chunks_mut(self.dim) {
            p.iter_mut().zip(offset).for_each(|(x, &o)| *x += o);
        }
        out
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.points.iter_mut().for_each(|x| *x *= factor);
        out
    }

    /// Mean position `∫₀¹ y(t) dt`.
    pub fn centroid(&self) -> Vec<T> {
        let mut c = vec![T::zero(); self.dim];
        let half = T::lit(0.5);
        for l in 0..self.num_segments() {
            let dt = self.times[l + 1] - self.times[l];
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += dt * half * (self.point(l)[i] + self.point(l + 1)[i]);
            }
        }
        c
    }

    pub fn centered(&self) -> Self {
        let c: Vec<T> = self.centroid().into_iter().map(|x| -x).collect();
        self.translated(&c)
    }

    /// Translates the curve so it starts at the origin.
    pub fn anchored(&self) -> Self {
        let c: Vec<T> = self.point(0).iter().map(|&x| -x).collect();
        self.translated(&c)
    }

    pub fn with_closed_flag(mut self, closed: bool) -> Self {
        self.closed = closed && self.point(0) == self.point(self.len() - 1);
        self
    }

    /// The curve `y ∘ w`: vertex `t_l` moves to `w⁻¹(t_l)`, and points are
    /// inserted at the knots of `w` so the result is again piecewise linear.
    pub fn apply_warping(&self, w: &Warping<T>) -> Self {
        let mut entries: Vec<(T, Vec<T>)> = self
            .times
            .iter()
            .enumerate()
            .map(|(l, &t)| (w.inverse_eval(t), self.point(l).to_vec()))
            .collect();
        for &(s, t) in w.knots() {
            entries.push((s, self.eval(t)));
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite timestamps"));
        let mut pts = Vec::with_capacity(entries.len() * self.dim);
        let mut ts: Vec<T> = Vec::with_capacity(entries.len());
        for (s, p) in entries {
            if ts.last().map_or(false, |&last| !(s > last)) {
                continue;
            }
            ts.push(s);
            pts.extend(p);
        }
        *ts.first_mut().unwrap() = T::zero();
        *ts.last_mut().unwrap() = T::one();
        let last = ts.len() - 1;
        // exact vertex positions at the ends
        pts[..self.dim].copy_from_slice(self.point(0));
        pts[last * self.dim..].copy_from_slice(self.point(self.len() - 1));
        Self::with_times(&pts, &ts, self.dim, self.closed)
            .expect("warping preserves curve validity")
    }
}

/// Constant-speed construction from a list of points.
pub fn polygon_from_points<T: Scalar>(points: &[Vec<T>], closed: bool) -> Result<Curve<T>> {
    Curve::from_rows(points, closed)
}

fn check_dim(len: usize, dim: usize) -> Result<()> {
    if dim == 0 || len % dim != 0 {
        return Err(ElasticError::InvalidCurve(format!(
            "{len} coordinates cannot be split into points of dimension {dim}"
        )));
    }
    if len < 2 * dim {
        return Err(ElasticError::InvalidCurve("at least two points required".into()));
    }
    Ok(())
}

fn dedup_points<T: Scalar>(points: &[T], dim: usize) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(points.len());
    for p in points.chunks(dim) {
        if out.len() >= dim && &out[out.len() - dim..] == p {
            continue;
        }
        out.extend_from_slice(p);
    }
    out
}

fn arc_length_times<T: Scalar>(points: &[T], dim: usize) -> Vec<T> {
    let n = points.len() / dim;
    let mut cum = Vec::with_capacity(n);
    cum.push(T::zero());
    let mut total = T::zero();
    for l in 1..n {
        let d: Vec<T> = points[l * dim..(l + 1) * dim]
            .iter()
            .zip(&points[(l - 1) * dim..l * dim])
            .map(|(&a, &b)| a - b)
            .collect();
        total += norm(&d);
        cum.push(total);
    }
    let mut times: Vec<T> = cum.into_iter().map(|c| c / total).collect();
    *times.last_mut().unwrap() = T::one();
    times
}

/// Index `l` with `times[l] <= t < times[l+1]`, clamped to valid segments.
pub(crate) fn segment_at<T: Scalar>(times: &[T], t: T) -> usize {
    let n = times.len() - 1;
    let idx = times.partition_point(|&x| x <= t);
    idx.saturating_sub(1).min(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(points: &[[f64; 2]], closed: bool) -> Curve<f64> {
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        Curve::polygon(&flat, 2, closed).unwrap()
    }

    #[test]
    fn equal_segments_give_uniform_times() {
        let c = curve(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], false);
        assert_eq!(c.times(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn times_follow_arc_length() {
        let c = curve(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0]], false);
        assert!((c.times()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.times()[2], 1.0);
    }

    #[test]
    fn duplicates_are_merged() {
        let c = curve(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]], false);
        assert_eq!(c.len(), 2);
        assert_eq!(c.times(), &[0.0, 1.0]);
    }

    #[test]
    fn identical_points_rejected() {
        let err = Curve::polygon(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 2, false).unwrap_err();
        assert_eq!(err, ElasticError::AllPointsIdentical);
    }

    #[test]
    fn closed_curve_gets_closing_point() {
        let c = curve(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], true);
        assert_eq!(c.len(), 4);
        assert_eq!(c.point(0), c.point(3));
        assert!(c.is_closed());
    }

    #[test]
    fn explicit_times_validated() {
        let pts = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        assert!(Curve::with_times(&pts, &[0.0, 0.7, 1.0], 2, false).is_ok());
        assert!(Curve::with_times(&pts, &[0.0, 1.0, 1.0], 2, false).is_err());
        assert!(Curve::with_times(&pts, &[0.1, 0.5, 1.0], 2, false).is_err());
    }

    #[test]
    fn centroid_of_segment() {
        let c = curve(&[[0.0, 0.0], [2.0, 0.0]], false);
        assert_eq!(c.centroid(), vec![1.0, 0.0]);
    }
}
