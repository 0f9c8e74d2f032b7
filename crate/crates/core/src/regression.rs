//! The estimators: quotient regression (open and closed), pre-alignment
//! baselines, the iterated curve-level heuristic, Fréchet regression and the
//! elastic mean.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::align::{align_with_hint, AlignConfig, AlignmentResult};
use crate::curve::Curve;
use crate::error::{ElasticError, Result};
use crate::linalg::Cholesky;
use crate::model::{alignment_target_of, FitDiagnostics, LeastSquares, Method, Model, ModelLevel};
use crate::poly::PiecewisePoly;
use crate::scalar::Scalar;
use crate::spline::SplineBasis;
use crate::srv::{close_prediction, srv_inverse, srv_transform, OutputGrid, SrvFunction};
use crate::warping::Warping;

/// Covariate rows paired with observed curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    curves: Vec<Curve<T>>,
    covariates: Vec<Vec<T>>,
    covariate_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(curves: Vec<Curve<T>>, covariates: Vec<Vec<T>>, covariate_names: Vec<String>) -> Result<Self> {
        if curves.len() != covariates.len() {
            return Err(ElasticError::DimensionMismatch { expected: curves.len(), found: covariates.len() });
        }
        let k = covariate_names.len();
        if let Some(row) = covariates.iter().find(|r| r.len() != k) {
            return Err(ElasticError::DimensionMismatch { expected: k, found: row.len() });
        }
        if let Some(first) = curves.first() {
            if let Some(c) = curves.iter().find(|c| c.dim() != first.dim()) {
                return Err(ElasticError::DimensionMismatch { expected: first.dim(), found: c.dim() });
            }
        }
        Ok(Self { curves, covariates, covariate_names })
    }

    /// A dataset without covariates.
    pub fn unconditional(curves: Vec<Curve<T>>) -> Result<Self> {
        let n = curves.len();
        Self::new(curves, vec![Vec::new(); n], Vec::new())
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn num_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn dim(&self) -> usize {
        self.curves.first().map_or(0, |c| c.dim())
    }

    pub fn curves(&self) -> &[Curve<T>] {
        &self.curves
    }

    pub fn covariates(&self) -> &[Vec<T>] {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Rows `indices` (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            curves: indices.iter().map(|&i| self.curves[i].clone()).collect(),
            covariates: indices.iter().map(|&i| self.covariates[i].clone()).collect(),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Keeps only the covariate columns `columns`.
    pub fn select_covariates(&self, columns: &[usize]) -> Self {
        Self {
            curves: self.curves.clone(),
            covariates: self.covariates.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect(),
            covariate_names: columns.iter().map(|&c| self.covariate_names[c].clone()).collect(),
        }
    }

    /// Same covariates, curves replaced.
    pub fn with_curves(&self, curves: Vec<Curve<T>>) -> Result<Self> {
        Self::new(curves, self.covariates.clone(), self.covariate_names.clone())
    }
}

/// Settings shared by all estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Stop once `max_j ‖β_j,old − β_j,new‖²` falls to this value.
    pub eps_converge: f64,
    pub max_iter: usize,
    pub align: AlignConfig,
    /// SRV-level basis; curve-level estimators use one degree more.
    pub basis: SplineBasis,
    pub closed: bool,
    pub seed: u64,
    /// Number of initializations; all but the first start from random warpings.
    pub restarts: usize,
    /// With covariates, also start the quotient fit from the warpings that
    /// align each curve to the elastic mean. That run begins at the
    /// pre-aligned SRV fit and only descends, so the final loss never exceeds
    /// the pre-aligned one.
    pub prealign_start: bool,
    /// Optional ridge `ε · trace` on the covariate cross-product.
    pub ridge: Option<f64>,
    /// Sampling density of predicted curves used as alignment targets and
    /// returned by [`elastic_mean`] and [`frechet_predict`].
    pub target_points: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            eps_converge: 1e-6,
            max_iter: 50,
            align: AlignConfig::default(),
            basis: SplineBasis::new(1, 11, false).expect("valid default basis"),
            closed: false,
            seed: 0,
            restarts: 1,
            prealign_start: true,
            ridge: None,
            target_points: 201,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_converge > 0.0) {
            return Err(ElasticError::InvalidArgument("convergence tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(ElasticError::InvalidArgument("max_iter must be at least 1".into()));
        }
        if self.target_points < 3 {
            return Err(ElasticError::InvalidArgument("target_points must be at least 3".into()));
        }
        Ok(())
    }

    pub(crate) fn grid(&self) -> OutputGrid {
        OutputGrid::Uniform(self.target_points)
    }
}

/// Alternating fit shared by the quotient and iterated curve-level estimators.
struct Engine<'a, T: Scalar> {
    data: &'a Dataset<T>,
    ls: LeastSquares<T>,
    level: ModelLevel,
    config: &'a FitConfig,
    srvs: Vec<SrvFunction<T>>,
}

struct EngineRun<T> {
    coefs: Vec<T>,
    diagnostics: FitDiagnostics,
}

impl<'a, T: Scalar> Engine<'a, T> {
    fn new(data: &'a Dataset<T>, level: ModelLevel, config: &'a FitConfig) -> Result<Self> {
        config.validate()?;
        let basis = match level {
            ModelLevel::Srv => config.basis,
            ModelLevel::Curve => config.basis.raised(),
        };
        let ls = LeastSquares::new(basis, data.covariates(), data.covariate_names(), config.ridge)?;
        let srvs = data.curves().iter().map(srv_transform).collect();
        Ok(Self { data, ls, level, config, srvs })
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Response functions for given warpings.
    fn responses(&self, warps: &[Warping<T>]) -> Result<Vec<PiecewisePoly<T>>> {
        self.data
            .curves()
            .iter()
            .zip(&self.srvs)
            .zip(warps)
            .map(|((c, q), w)| self.response(c, q, w))
            .collect()
    }

    fn response(&self, curve: &Curve<T>, srv: &SrvFunction<T>, w: &Warping<T>) -> Result<PiecewisePoly<T>> {
        Ok(match self.level {
            ModelLevel::Srv if w.is_identity() => srv.as_poly().clone(),
            ModelLevel::Srv => srv.warp(w)?.as_poly().clone(),
            ModelLevel::Curve => curve.apply_warping(w).centered().as_function(),
        })
    }

    fn target(&self, coefs: &[T], i: usize) -> Result<SrvFunction<T>> {
        let w = self.ls.basis().size() * self.dim();
        let c = crate::model::combine(coefs, w, &self.data.covariates()[i]);
        let p = SrvFunction::spline(self.ls.basis(), c, self.dim())?;
        alignment_target_of(&p, self.level, self.config.closed, self.config.target_points)
    }

    /// Warping step: aligns every curve to its current target.
    /// Aligns every curve to its current target. The first pass always runs
    /// the global search; later passes may start from the previous warps.
    fn align_all(&self, coefs: &[T], hints: &[Warping<T>], first: bool) -> Result<Vec<AlignmentResult<T>>> {
        let align = AlignConfig { warm_start: self.config.align.warm_start && !first, ..self.config.align };
        (0..self.data.len())
            .into_par_iter()
            .map(|i| {
                let target = self.target(coefs, i)?;
                align_with_hint(&self.data.curves()[i], &target, &align, Some(&hints[i]))
            })
            .collect()
    }

    fn run(&self, mut warps: Vec<Warping<T>>) -> Result<EngineRun<T>> {
        let d = self.dim();
        let mut data = self.responses(&warps)?;
        let mut coefs = self.ls.fit(&data);
        let mut trace = vec![self.ls.loss(&coefs, &data).to_f64_lossy()];
        let eps = T::lit(self.config.eps_converge);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.config.max_iter {
            iterations += 1;
            let results = self.align_all(&coefs, &warps, iterations == 1)?;
            warps = results.into_iter().map(|r| r.warping).collect();
            data = self.responses(&warps)?;
            trace.push(self.ls.loss(&coefs, &data).to_f64_lossy());
            let old = std::mem::replace(&mut coefs, self.ls.fit(&data));
            trace.push(self.ls.loss(&coefs, &data).to_f64_lossy());
            if self.ls.change(&old, &coefs, d) <= eps {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!("alternating fit stopped after {iterations} iterations without converging");
        }
        let final_loss = *trace.last().expect("non-empty trace");
        Ok(EngineRun { coefs, diagnostics: FitDiagnostics { loss_trace: trace, final_loss, iterations, converged } })
    }

    /// Runs every configured initialization and keeps the smallest final loss.
    fn run_with_restarts(&self) -> Result<EngineRun<T>> {
        let n = self.data.len();
        let mut best = self.run(vec![Warping::identity(); n])?;
        if self.config.prealign_start && self.level == ModelLevel::Srv && self.data.num_covariates() > 0 {
            let run = self.run(prealign(self.data, self.config)?)?;
            if run.diagnostics.final_loss < best.diagnostics.final_loss {
                best = run;
            }
        }
        for r in 1..self.config.restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
            rng.set_stream(r as u64);
            let warps = (0..n).map(|_| random_warping(&mut rng)).collect();
            let run = self.run(warps)?;
            if run.diagnostics.final_loss < best.diagnostics.final_loss {
                best = run;
            }
        }
        Ok(best)
    }

    fn into_model(self, run: EngineRun<T>, method: Method) -> Result<Model<T>> {
        let mut model = Model::new(
            self.ls.basis(),
            self.level,
            method,
            self.dim(),
            run.coefs,
            self.data.covariate_names().to_vec(),
            self.config.closed,
        )?;
        model.diagnostics = run.diagnostics;
        Ok(model)
    }
}

/// A random warping with four equal `s`-steps whose `t`-increments mix a
/// uniform share with exponential weights.
pub(crate) fn random_warping<T: Scalar, R: Rng>(rng: &mut R) -> Warping<T> {
    const PIECES: usize = 4;
    let weights: Vec<f64> = (0..PIECES).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = weights.iter().sum();
    let mut knots = vec![(T::zero(), T::zero())];
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate().take(PIECES - 1) {
        acc += 0.5 / PIECES as f64 + 0.5 * w / total;
        knots.push((T::lit((i + 1) as f64 / PIECES as f64), T::lit(acc)));
    }
    knots.push((T::one(), T::one()));
    Warping::new(knots).expect("increments are positive")
}

fn check_data<T: Scalar>(data: &Dataset<T>) -> Result<()> {
    if data.is_empty() {
        return Err(ElasticError::InsufficientSamples(0));
    }
    Ok(())
}

/// Quotient SRV-linear regression: alternates optimal warping of every curve
/// towards its predictor with a least-squares spline fit. Closed models
/// (`config.closed`) align to the SRV of the closed predicted curve.
pub fn fit_quotient<T: Scalar>(data: &Dataset<T>, config: &FitConfig) -> Result<Model<T>> {
    check_data(data)?;
    let engine = Engine::new(data, ModelLevel::Srv, config)?;
    let run = engine.run_with_restarts()?;
    engine.into_model(run, Method::Quotient)
}

/// [`fit_quotient`] started from the given warpings instead of the identity.
pub(crate) fn fit_quotient_from<T: Scalar>(data: &Dataset<T>, config: &FitConfig, warps: Vec<Warping<T>>) -> Result<Model<T>> {
    check_data(data)?;
    if warps.len() != data.len() {
        return Err(ElasticError::DimensionMismatch { expected: data.len(), found: warps.len() });
    }
    let engine = Engine::new(data, ModelLevel::Srv, config)?;
    let run = engine.run(warps)?;
    engine.into_model(run, Method::Quotient)
}

/// [`fit_quotient`] for closed curves, regardless of `config.closed`.
pub fn fit_quotient_closed<T: Scalar>(data: &Dataset<T>, config: &FitConfig) -> Result<Model<T>> {
    if !config.basis.is_periodic() {
        log::warn!("closed quotient fit with a non-periodic basis");
    }
    fit_quotient(data, &FitConfig { closed: true, ..config.clone() })
}

/// Independent quotient fits for product-space responses (one dataset per
/// component, sharing covariates); the summed loss separates.
pub fn fit_quotient_product<T: Scalar>(components: &[Dataset<T>], config: &FitConfig) -> Result<Vec<Model<T>>> {
    components.iter().map(|d| fit_quotient(d, config)).collect()
}

/// Intercept-only quotient fit: the elastic mean as a model.
pub fn elastic_mean_model<T: Scalar>(curves: &[Curve<T>], config: &FitConfig) -> Result<Model<T>> {
    fit_quotient(&Dataset::unconditional(curves.to_vec())?, config)
}

/// Elastic mean curve, starting at the origin.
pub fn elastic_mean<T: Scalar>(curves: &[Curve<T>], config: &FitConfig) -> Result<Curve<T>> {
    elastic_mean_model(curves, config)?.predict(&[], config.grid(), false)
}

/// Aligns every curve once to the elastic mean of all curves.
fn prealign<T: Scalar>(data: &Dataset<T>, config: &FitConfig) -> Result<Vec<Warping<T>>> {
    let mean = elastic_mean_model(data.curves(), config)?;
    let target = mean.alignment_target(&[], config.target_points)?;
    data.curves()
        .par_iter()
        .map(|c| align_with_hint(c, &target, &config.align, None).map(|r| r.warping))
        .collect()
}

fn single_fit<T: Scalar>(data: &Dataset<T>, config: &FitConfig, level: ModelLevel, method: Method) -> Result<Model<T>> {
    check_data(data)?;
    config.validate()?;
    let warps = prealign(data, config)?;
    let engine = Engine::new(data, level, config)?;
    let responses = engine.responses(&warps)?;
    let coefs = engine.ls.fit(&responses);
    let loss = engine.ls.loss(&coefs, &responses).to_f64_lossy();
    let run = EngineRun {
        coefs,
        diagnostics: FitDiagnostics { loss_trace: vec![loss], final_loss: loss, iterations: 1, converged: true },
    };
    engine.into_model(run, method)
}

/// Aligns all curves once to their elastic mean, then fits on SRV level.
pub fn fit_prealign_srv<T: Scalar>(data: &Dataset<T>, config: &FitConfig) -> Result<Model<T>> {
    single_fit(data, config, ModelLevel::Srv, Method::PrealignSrv)
}

/// Aligns all curves once to their elastic mean, then fits the centred,
/// warped curves on curve level.
pub fn fit_prealign_curve<T: Scalar>(data: &Dataset<T>, config: &FitConfig) -> Result<Model<T>> {
    single_fit(data, config, ModelLevel::Curve, Method::PrealignCurve)
}

/// Alternates a curve-level fit with re-alignment of the data to the current
/// predicted curves. No loss is guaranteed to decrease.
pub fn fit_iterate_curve<T: Scalar>(data: &Dataset<T>, config: &FitConfig) -> Result<Model<T>> {
    check_data(data)?;
    let engine = Engine::new(data, ModelLevel::Curve, config)?;
    let run = engine.run(vec![Warping::identity(); data.len()])?;
    engine.into_model(run, Method::IterateCurve)
}

/// Fits with the named method. Fréchet regression has no global model and
/// is rejected here.
pub fn fit_method<T: Scalar>(method: Method, data: &Dataset<T>, config: &FitConfig) -> Result<Model<T>> {
    match method {
        Method::Quotient if config.closed => fit_quotient_closed(data, config),
        Method::Quotient => fit_quotient(data, config),
        Method::PrealignSrv => fit_prealign_srv(data, config),
        Method::PrealignCurve => fit_prealign_curve(data, config),
        Method::IterateCurve => fit_iterate_curve(data, config),
        Method::L2 => {
            let srvs: Vec<SrvFunction<T>> = data.curves().iter().map(srv_transform).collect();
            crate::model::fit_l2_model_ridge(srvs.as_slice(), data.covariates(), data.covariate_names(), config.basis, config.ridge)
        }
        Method::Frechet => Err(ElasticError::InvalidArgument(
            "Fréchet regression predicts at given covariate values only; use frechet_predict".into(),
        )),
    }
}

/// Predicted curve at `x`, starting at the origin.
pub fn predict<T: Scalar>(model: &Model<T>, x: &[T]) -> Result<Curve<T>> {
    model.predict(x, OutputGrid::default(), false)
}

/// `Σ_i d(y_i, [predictor(x_i)])²`, aligning each curve from scratch.
pub fn quotient_loss<T: Scalar>(model: &Model<T>, data: &Dataset<T>, align: &AlignConfig, target_points: usize) -> Result<T> {
    let residuals: Vec<T> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let target = model.alignment_target(&data.covariates()[i], target_points)?;
            Ok(align_with_hint(&data.curves()[i], &target, align, None)?.residual)
        })
        .collect::<Result<_>>()?;
    Ok(residuals.iter().map(|&r| r * r).sum())
}

/// Fréchet regression weights `1 + (x_i − x̄)ᵀ Σ̂⁻¹ (x − x̄)` with the
/// covariance estimated with divisor `n`.
pub fn frechet_weights<T: Scalar>(covariates: &[Vec<T>], x: &[T]) -> Result<Vec<T>> {
    let n = covariates.len();
    let k = x.len();
    if n < 2 {
        return Err(ElasticError::InsufficientSamples(n));
    }
    if let Some(r) = covariates.iter().find(|r| r.len() != k) {
        return Err(ElasticError::DimensionMismatch { expected: k, found: r.len() });
    }
    if k == 0 {
        return Ok(vec![T::one(); n]);
    }
    let nf = T::from_usize_lossy(n);
    let mean: Vec<T> = (0..k).map(|j| covariates.iter().map(|r| r[j]).sum::<T>() / nf).collect();
    let mut cov = vec![T::zero(); k * k];
    for r in covariates {
        for a in 0..k {
            for b in 0..k {
                cov[a * k + b] += (r[a] - mean[a]) * (r[b] - mean[b]) / nf;
            }
        }
    }
    let chol = Cholesky::new(&cov, k, T::lit(1e-10)).map_err(|_| ElasticError::SingularCovariance)?;
    let dx: Vec<T> = x.iter().zip(&mean).map(|(&a, &m)| a - m).collect();
    let v = chol.solve(&dx);
    Ok(covariates
        .iter()
        .map(|r| T::one() + r.iter().zip(&mean).zip(&v).map(|((&a, &m), &vv)| (a - m) * vv).sum::<T>())
        .collect())
}

/// Weighted elastic mean on SRV level for one covariate value.
pub fn frechet_mean_srv<T: Scalar>(data: &Dataset<T>, x: &[T], config: &FitConfig) -> Result<(SrvFunction<T>, FitDiagnostics)> {
    check_data(data)?;
    config.validate()?;
    let weights = frechet_weights(data.covariates(), x)?;
    let n = data.len();
    let d = data.dim();
    let ls = LeastSquares::new(config.basis, &vec![Vec::new(); n], &[], None)?;
    let srvs: Vec<SrvFunction<T>> = data.curves().iter().map(srv_transform).collect();
    let plain: Vec<PiecewisePoly<T>> = srvs.iter().map(|q| q.as_poly().clone()).collect();
    let mut mean = ls.fit(&plain);
    let mut warps = vec![Warping::identity(); n];
    let eps = T::lit(config.eps_converge);
    let (mut iterations, mut converged) = (0, false);
    let mut trace = Vec::new();
    while iterations < config.max_iter {
        iterations += 1;
        let align = AlignConfig { warm_start: config.align.warm_start && iterations > 1, ..config.align };
        let p = SrvFunction::spline(config.basis, mean.clone(), d)?;
        let target = alignment_target_of(&p, ModelLevel::Srv, config.closed, config.target_points)?;
        let results: Vec<AlignmentResult<T>> = data
            .curves()
            .par_iter()
            .zip(&warps)
            .map(|(c, h)| align_with_hint(c, &target, &align, Some(h)))
            .collect::<Result<_>>()?;
        let pseudo: Vec<PiecewisePoly<T>> =
            results.iter().zip(&weights).map(|(r, &s)| r.warped.as_poly().scaled(s)).collect();
        warps = results.into_iter().map(|r| r.warping).collect();
        let old = std::mem::replace(&mut mean, ls.fit(&pseudo));
        trace.push(ls.loss(&mean, &pseudo).to_f64_lossy());
        if ls.change(&old, &mean, d) <= eps {
            converged = true;
            break;
        }
    }
    let diagnostics = FitDiagnostics {
        final_loss: trace.last().copied().unwrap_or(f64::NAN),
        loss_trace: trace,
        iterations,
        converged,
    };
    Ok((SrvFunction::spline(config.basis, mean, d)?, diagnostics))
}

/// Fréchet regression predictions (curves starting at the origin) at each
/// covariate value in `x_new`.
pub fn frechet_predict<T: Scalar>(data: &Dataset<T>, x_new: &[Vec<T>], config: &FitConfig) -> Result<Vec<Curve<T>>> {
    x_new
        .iter()
        .map(|x| {
            let (p, _) = frechet_mean_srv(data, x, config)?;
            if config.closed {
                close_prediction(&p, config.grid())
            } else {
                srv_inverse(&p, config.grid())
            }
        })
        .collect()
}
