//! Function-on-scalar spline models and their least-squares fit.

use crate::curve::Curve;
use crate::error::{ElasticError, Result};
use crate::linalg::{dependent_columns, Cholesky, Collapsed};
use crate::poly::PiecewisePoly;
use crate::scalar::Scalar;
use crate::spline::SplineBasis;
use crate::srv::{close_prediction, srv_inverse, srv_transform, OutputGrid, SrvFunction};

/// Whether the linear predictor models SRV functions or curves directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelLevel {
    Srv,
    Curve,
}

/// Estimator that produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Quotient,
    PrealignSrv,
    PrealignCurve,
    IterateCurve,
    Frechet,
    /// A single least-squares fit without alignment.
    L2,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Quotient => "quotient",
            Method::PrealignSrv => "prealign-srv",
            Method::PrealignCurve => "prealign-curve",
            Method::IterateCurve => "iterate-curve",
            Method::Frechet => "frechet",
            Method::L2 => "l2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::Quotient, Self::PrealignSrv, Self::PrealignCurve, Self::IterateCurve, Self::Frechet, Self::L2]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitDiagnostics {
    /// Loss after the initial fit and after every half-step (warping, then fit).
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Coefficients `ξ_{j,m} ∈ R^d` of `β_j = Σ_m ξ_{j,m} B_m` for the intercept
/// (`j = 0`) and `k` covariates. Stored row-major in `(j, m, coordinate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    basis: SplineBasis,
    level: ModelLevel,
    method: Method,
    dim: usize,
    coefficients: Vec<T>,
    covariate_names: Vec<String>,
    closed: bool,
    pub diagnostics: FitDiagnostics,
}

impl<T: Scalar> Model<T> {
    pub fn new(
        basis: SplineBasis,
        level: ModelLevel,
        method: Method,
        dim: usize,
        coefficients: Vec<T>,
        covariate_names: Vec<String>,
        closed: bool,
    ) -> Result<Self> {
        let expected = (covariate_names.len() + 1) * basis.size() * dim;
        if dim == 0 || coefficients.len() != expected {
            return Err(ElasticError::DimensionMismatch { expected, found: coefficients.len() });
        }
        Ok(Self {
            basis,
            level,
            method,
            dim,
            coefficients,
            covariate_names,
            closed,
            diagnostics: FitDiagnostics::default(),
        })
    }

    pub fn basis(&self) -> SplineBasis {
        self.basis
    }

    pub fn level(&self) -> ModelLevel {
        self.level
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Number of covariates `k`.
    pub fn num_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    /// `ξ_{j,m}` (0-based `m`).
    pub fn coef(&self, j: usize, m: usize) -> &[T] {
        let start = (j * self.basis.size() + m) * self.dim;
        &self.coefficients[start..start + self.dim]
    }

    /// Coefficients of `β_j` as an `M × d` matrix.
    pub fn effect(&self, j: usize) -> &[T] {
        let w = self.basis.size() * self.dim;
        &self.coefficients[j * w..(j + 1) * w]
    }

    fn check_x(&self, x: &[T]) -> Result<()> {
        if x.len() != self.num_covariates() {
            return Err(ElasticError::DimensionMismatch { expected: self.num_covariates(), found: x.len() });
        }
        Ok(())
    }

    /// Coefficients of `β_0 + Σ_j x_j β_j` (`M × d`).
    pub fn predictor_coefs(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_x(x)?;
        Ok(combine(&self.coefficients, self.basis.size() * self.dim, x))
    }

    /// The linear predictor as a spline function (SRV level for SRV models,
    /// curve level otherwise).
    pub fn predictor(&self, x: &[T]) -> Result<SrvFunction<T>> {
        SrvFunction::spline(self.basis, self.predictor_coefs(x)?, self.dim)
    }

    /// Predicted curve, starting at the origin or centred at its centroid.
    pub fn predict(&self, x: &[T], grid: OutputGrid, centered: bool) -> Result<Curve<T>> {
        let p = self.predictor(x)?;
        let curve = match self.level {
            ModelLevel::Srv if self.closed => close_prediction(&p, grid)?,
            ModelLevel::Srv => srv_inverse(&p, grid)?,
            ModelLevel::Curve => sample_spline_curve(&p, grid, self.closed)?,
        };
        Ok(if centered { curve.centered() } else { curve })
    }

    /// The SRV function observations are aligned to: the predictor itself for
    /// open SRV models, otherwise the SRV of the predicted curve sampled on
    /// `points` parameters.
    pub fn alignment_target(&self, x: &[T], points: usize) -> Result<SrvFunction<T>> {
        let p = self.predictor(x)?;
        alignment_target_of(&p, self.level, self.closed, points)
    }
}

pub(crate) fn combine<T: Scalar>(coefs: &[T], width: usize, x: &[T]) -> Vec<T> {
    let mut out = coefs[..width].to_vec();
    for (j, &xj) in x.iter().enumerate() {
        let block = &coefs[(j + 1) * width..(j + 2) * width];
        out.iter_mut().zip(block).for_each(|(o, &b)| *o += xj * b);
    }
    out
}

pub(crate) fn alignment_target_of<T: Scalar>(
    p: &SrvFunction<T>,
    level: ModelLevel,
    closed: bool,
    points: usize,
) -> Result<SrvFunction<T>> {
    match level {
        ModelLevel::Srv if !closed => Ok(p.clone()),
        ModelLevel::Srv => Ok(srv_transform(&close_prediction(p, OutputGrid::Uniform(points))?)),
        ModelLevel::Curve => {
            Ok(srv_transform(&sample_spline_curve(p, OutputGrid::Uniform(points), closed)?))
        }
    }
}

fn sample_spline_curve<T: Scalar>(p: &SrvFunction<T>, grid: OutputGrid, closed: bool) -> Result<Curve<T>> {
    let n = match grid {
        OutputGrid::Uniform(n) => n.max(2),
        OutputGrid::Natural => p.breaks().len(),
    };
    let times: Vec<T> = match grid {
        OutputGrid::Natural => p.breaks().to_vec(),
        OutputGrid::Uniform(_) => {
            let last = T::from_usize_lossy(n - 1);
            let mut ts: Vec<T> = (0..n).map(|i| T::from_usize_lossy(i) / last).collect();
            ts[n - 1] = T::one();
            ts
        }
    };
    let d = p.dim();
    let mut pts: Vec<T> = times.iter().flat_map(|&t| p.eval(t)).collect();
    if closed {
        let first = pts[..d].to_vec();
        let len = pts.len();
        pts[len - d..].copy_from_slice(&first);
    }
    Curve::with_times(&pts, &times, d, closed).map_err(|e| match e {
        ElasticError::AllPointsIdentical => ElasticError::DegeneratePrediction,
        other => other,
    })
}

/// Cached pieces of the least-squares problem `Σ_i ‖Σ_j x_ij β_j − f_i‖²`
/// over spline effects `β_j`: the covariate cross-product (with intercept)
/// and the exact Gram matrix of the basis.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares<T> {
    basis: SplineBasis,
    /// `n × (k + 1)` design with leading intercept column.
    design: Vec<T>,
    n: usize,
    p: usize,
    sxx: Cholesky<T>,
    gram: Vec<T>,
    gram_chol: Cholesky<T>,
}

impl<T: Scalar> LeastSquares<T> {
    pub(crate) fn new(basis: SplineBasis, covariates: &[Vec<T>], names: &[String], ridge: Option<f64>) -> Result<Self> {
        let n = covariates.len();
        let k = names.len();
        if covariates.iter().any(|x| x.len() != k) {
            return Err(ElasticError::DimensionMismatch {
                expected: k,
                found: covariates.iter().map(|x| x.len()).find(|&l| l != k).unwrap_or(k),
            });
        }
        if n < k + 1 {
            return Err(ElasticError::DegreesOfFreedom { n, k });
        }
        let p = k + 1;
        let mut design = Vec::with_capacity(n * p);
        for x in covariates {
            design.push(T::one());
            design.extend_from_slice(x);
        }
        let mut sxx = vec![T::zero(); p * p];
        for row in design.chunks(p) {
            for a in 0..p {
                for b in 0..p {
                    sxx[a * p + b] += row[a] * row[b];
                }
            }
        }
        if let Some(eps) = ridge {
            let trace: T = (0..p).map(|a| sxx[a * p + a]).sum();
            let add = T::lit(eps) * trace;
            (0..p).for_each(|a| sxx[a * p + a] += add);
        }
        let sxx_chol = match Cholesky::new(&sxx, p, T::lit(1e-10)) {
            Ok(c) => c,
            Err(Collapsed(col)) => {
                let label = |c: usize| if c == 0 { "(intercept)".to_string() } else { names[c - 1].clone() };
                let deps: Vec<String> = dependent_columns(&sxx, p, col).into_iter().map(label).collect();
                return Err(ElasticError::RankDeficient(format!(
                    "column {} is a linear combination of {}",
                    label(col),
                    if deps.is_empty() { "nothing (it is zero)".to_string() } else { deps.join(", ") }
                )));
            }
        };
        let gram = basis.gram::<T>();
        let gram_chol = basis.gram_factor::<T>();
        Ok(Self { basis, design, n, p, sxx: sxx_chol, gram, gram_chol })
    }

    pub(crate) fn basis(&self) -> SplineBasis {
        self.basis
    }

    pub(crate) fn row(&self, i: usize) -> &[T] {
        &self.design[i * self.p..(i + 1) * self.p]
    }

    /// Least-squares coefficients (`(k+1) × M × d`) for responses `data`.
    pub(crate) fn fit(&self, data: &[PiecewisePoly<T>]) -> Vec<T> {
        assert_eq!(data.len(), self.n);
        let m = self.basis.size();
        let d = data[0].dim();
        let w = m * d;
        // R = Σ_i x_i ⊗ b_i
        let mut r = vec![T::zero(); self.p * w];
        for (i, f) in data.iter().enumerate() {
            let b = self.basis.project(f);
            let row = self.row(i);
            for j in 0..self.p {
                let xj = row[j];
                r[j * w..(j + 1) * w].iter_mut().zip(&b).for_each(|(acc, &v)| *acc += xj * v);
            }
        }
        // Sxx⁻¹ R column by column
        let mut col = vec![T::zero(); self.p];
        for c in 0..w {
            (0..self.p).for_each(|j| col[j] = r[j * w + c]);
            self.sxx.solve_in_place(&mut col);
            (0..self.p).for_each(|j| r[j * w + c] = col[j]);
        }
        // ... times G⁻¹ per effect and coordinate
        let mut v = vec![T::zero(); m];
        for j in 0..self.p {
            for c in 0..d {
                (0..m).for_each(|a| v[a] = r[j * w + a * d + c]);
                self.gram_chol.solve_in_place(&mut v);
                (0..m).for_each(|a| r[j * w + a * d + c] = v[a]);
            }
        }
        r
    }

    /// `Σ_i ‖predictor_i − data_i‖²` for given coefficients.
    pub(crate) fn loss(&self, coefs: &[T], data: &[PiecewisePoly<T>]) -> T {
        let m = self.basis.size();
        let d = data[0].dim();
        let w = m * d;
        let mut total = T::zero();
        for (i, f) in data.iter().enumerate() {
            let c = combine(coefs, w, &self.row(i)[1..]);
            let b = self.basis.project(f);
            total += self.quad(&c, d) - T::lit(2.0) * crate::scalar::dot(&c, &b) + f.norm_sq();
        }
        total.max(T::zero())
    }

    /// `Σ_coord cᵀ G c` for an `M × d` matrix.
    pub(crate) fn quad(&self, c: &[T], d: usize) -> T {
        let m = self.basis.size();
        let mut total = T::zero();
        for a in 0..m {
            for b in 0..m {
                let g = self.gram[a * m + b];
                if g != T::zero() {
                    for k in 0..d {
                        total += g * c[a * d + k] * c[b * d + k];
                    }
                }
            }
        }
        total
    }

    /// `max_j ‖β_j,old − β_j,new‖²_{L2}`.
    pub(crate) fn change(&self, old: &[T], new: &[T], d: usize) -> T {
        let w = self.basis.size() * d;
        (0..self.p)
            .map(|j| {
                let diff: Vec<T> = old[j * w..(j + 1) * w].iter().zip(&new[j * w..(j + 1) * w]).map(|(&a, &b)| a - b).collect();
                self.quad(&diff, d)
            })
            .fold(T::zero(), T::max)
    }
}

/// Plain least-squares fit of SRV functions on covariates (no alignment).
/// `covariates` has one row of `k` values per observation.
pub fn fit_l2_model<T: Scalar>(
    srv_data: &[SrvFunction<T>],
    covariates: &[Vec<T>],
    covariate_names: &[String],
    basis: SplineBasis,
) -> Result<Model<T>> {
    fit_l2_model_ridge(srv_data, covariates, covariate_names, basis, None)
}

/// [`fit_l2_model`] with an optional ridge `ε · trace` added to the
/// covariate cross-product.
pub fn fit_l2_model_ridge<T: Scalar>(
    srv_data: &[SrvFunction<T>],
    covariates: &[Vec<T>],
    covariate_names: &[String],
    basis: SplineBasis,
    ridge: Option<f64>,
) -> Result<Model<T>> {
    let dim = srv_data.first().map(|q| q.dim()).ok_or(ElasticError::InsufficientSamples(0))?;
    if let Some(q) = srv_data.iter().find(|q| q.dim() != dim) {
        return Err(ElasticError::DimensionMismatch { expected: dim, found: q.dim() });
    }
    if covariates.len() != srv_data.len() {
        return Err(ElasticError::DimensionMismatch { expected: srv_data.len(), found: covariates.len() });
    }
    let ls = LeastSquares::new(basis, covariates, covariate_names, ridge)?;
    let data: Vec<PiecewisePoly<T>> = srv_data.iter().map(|q| q.as_poly().clone()).collect();
    let coefs = ls.fit(&data);
    let loss = ls.loss(&coefs, &data);
    let mut model = Model::new(basis, ModelLevel::Srv, Method::L2, dim, coefs, covariate_names.to_vec(), false)?;
    model.diagnostics = FitDiagnostics {
        loss_trace: vec![loss.to_f64_lossy()],
        final_loss: loss.to_f64_lossy(),
        iterations: 0,
        converged: true,
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_srv(v: [f64; 2]) -> SrvFunction<f64> {
        SrvFunction::piecewise_constant(vec![0.0, 1.0], 2, v.to_vec()).unwrap()
    }

    #[test]
    fn simple_regression_on_constants() {
        let data = [constant_srv([1.0, 2.0]), constant_srv([3.0, -2.0])];
        let x = vec![vec![0.5], vec![1.5]];
        let basis = SplineBasis::new(0, 2, false).unwrap();
        let m = fit_l2_model(&data, &x, &["x".into()], basis).unwrap();
        assert!((m.coef(1, 0)[0] - 2.0).abs() < 1e-12);
        assert!((m.coef(1, 0)[1] + 4.0).abs() < 1e-12);
        assert!(m.diagnostics.final_loss < 1e-12, "{}", m.diagnostics.final_loss);
    }

    #[test]
    fn collinear_covariate_reported() {
        let data = vec![constant_srv([1.0, 0.0]); 4];
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let basis = SplineBasis::new(1, 3, false).unwrap();
        let err = fit_l2_model(&data, &x, &["a".into(), "b".into()], basis).unwrap_err();
        match err {
            ElasticError::RankDeficient(msg) => assert!(msg.contains("b") && msg.contains("a"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let constant: Vec<Vec<f64>> = (0..4).map(|_| vec![1.0]).collect();
        let err = fit_l2_model(&data, &constant, &["c".into()], basis).unwrap_err();
        assert!(matches!(err, ElasticError::RankDeficient(ref m) if m.contains("(intercept)")));
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Quotient, Method::PrealignSrv, Method::PrealignCurve, Method::IterateCurve, Method::Frechet] {
            assert_eq!(Method::from_name(m.name()), Some(m));
        }
    }
}
