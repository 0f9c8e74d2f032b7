//! Goodness of fit, permutation and bootstrap inference for quotient models.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::align::{align_to_target, elastic_distance};
use crate::curve::Curve;
use crate::error::{ElasticError, Result};
use crate::linalg::Cholesky;
use crate::model::Model;
use crate::regression::{elastic_mean_model, fit_quotient, fit_quotient_from, quotient_loss, Dataset, FitConfig};
use crate::scalar::Scalar;
use crate::warping::Warping;

/// Total variation below this fraction of the summed curve lengths counts as zero.
const ZERO_VARIATION: f64 = 1e-12;
/// Resampling attempts after a rank-deficient bootstrap design.
const MAX_REDRAWS: usize = 5;

fn total_length<T: Scalar>(curves: &[Curve<T>]) -> T {
    curves.iter().fold(T::zero(), |acc, c| acc + c.length())
}

fn r2_from<T: Scalar>(residual: T, total: T, curves: &[Curve<T>]) -> Result<T> {
    if !(total > T::lit(ZERO_VARIATION) * total_length(curves)) {
        return Err(ElasticError::ZeroTotalVariation);
    }
    Ok(T::one() - residual / total)
}

/// Fréchet coefficient of determination from explicit curves:
/// `1 − Σ d(yᵢ, ŷᵢ)² / Σ d(yᵢ, μ)²`.
pub fn frechet_r2<T: Scalar>(
    predictions: &[Curve<T>],
    curves: &[Curve<T>],
    mean: &Curve<T>,
    config: &FitConfig,
) -> Result<T> {
    if predictions.len() != curves.len() {
        return Err(ElasticError::DimensionMismatch { expected: curves.len(), found: predictions.len() });
    }
    let sq = |a: &Curve<T>, b: &Curve<T>| elastic_distance(a, b, &config.align).map(|d| d * d);
    let residual = curves
        .par_iter()
        .zip(predictions)
        .map(|(y, p)| sq(y, p))
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .fold(T::zero(), |a, b| a + b);
    let total = curves.par_iter().map(|y| sq(y, mean)).collect::<Result<Vec<T>>>()?.into_iter().fold(T::zero(), |a, b| a + b);
    r2_from(residual, total, curves)
}

/// Fréchet R² of a fitted model, with squared distances to the predicted
/// and the mean shape classes computed by fresh alignment.
pub fn model_r2<T: Scalar>(model: &Model<T>, data: &Dataset<T>, config: &FitConfig) -> Result<T> {
    let total = total_variation(data, config)?;
    let residual = quotient_loss(model, data, &config.align, config.target_points)?;
    r2_from(residual, total, data.curves())
}

fn total_variation<T: Scalar>(data: &Dataset<T>, config: &FitConfig) -> Result<T> {
    let curves_only = Dataset::unconditional(data.curves().to_vec())?;
    let mean = elastic_mean_model(curves_only.curves(), config)?;
    quotient_loss(&mean, &curves_only, &config.align, config.target_points)
}

/// `1 − (1 − R²)(n − 1)/(n − k − 1)`.
pub fn adjusted_r2(r2: f64, n: usize, k: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(ElasticError::DegreesOfFreedom { n, k });
    }
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - 1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationTest {
    pub r2: f64,
    /// R² of every permuted refit, in permutation order.
    pub permuted: Vec<f64>,
    /// Add-one p-value `(1 + #{R²_perm ≥ R²}) / (n_perm + 1)`.
    pub p_value: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Global test of "no covariate effect": refits the quotient model after
/// permuting the curves against fixed covariates.
pub fn permutation_test_global<T: Scalar>(
    data: &Dataset<T>,
    config: &FitConfig,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationTest> {
    if n_perm < 99 {
        return Err(ElasticError::InvalidArgument(format!("at least 99 permutations are required, got {n_perm}")));
    }
    let total = total_variation(data, config)?;
    let r2_of = |d: &Dataset<T>| -> Result<f64> {
        let model = fit_quotient(d, config)?;
        let residual = quotient_loss(&model, d, &config.align, config.target_points)?;
        Ok(r2_from(residual, total, d.curves())?.to_f64_lossy())
    };
    let r2 = r2_of(data)?;
    let permuted = (0..n_perm)
        .into_par_iter()
        .map(|b| {
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut stream_rng(seed, b as u64));
            let curves = order.iter().map(|&i| data.curves()[i].clone()).collect();
            r2_of(&data.with_curves(curves)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let exceed = permuted.iter().filter(|&&p| p >= r2).count();
    Ok(PermutationTest { r2, p_value: (1 + exceed) as f64 / (n_perm + 1) as f64, permuted })
}

/// One case-resampled refit.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSample<T> {
    pub replicate: usize,
    /// Resampled rows, drawn with replacement.
    pub indices: Vec<usize>,
    pub model: Model<T>,
    pub x_eval: Vec<Vec<T>>,
    /// Predicted curves at `x_eval`, in the same order.
    pub predictions: Vec<Curve<T>>,
    /// Rows never drawn, ascending.
    pub out_of_bag: Vec<usize>,
    /// Draws discarded because the resampled design was rank deficient.
    pub redraws: usize,
}

impl<T: Scalar> BootstrapSample<T> {
    /// Prediction at `x`, reusing the stored one when `x` was requested.
    pub fn prediction_at(&self, x: &[T], config: &FitConfig) -> Result<Curve<T>> {
        match self.x_eval.iter().position(|e| e.as_slice() == x) {
            Some(i) => Ok(self.predictions[i].clone()),
            None => self.model.predict(x, config.grid(), false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Start every refit from the full-data warpings of the resampled rows
    /// instead of the as-given parametrizations. Faster, but replicates
    /// then share the full-data alignment.
    pub warm_start: bool,
}

fn resample(n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut drawn = vec![false; n];
    indices.iter().for_each(|&i| drawn[i] = true);
    let oob = (0..n).filter(|&i| !drawn[i]).collect();
    (indices, oob)
}

/// Draws resamples until `fit` accepts one, allowing [`MAX_REDRAWS`] retries
/// after rank-deficient designs.
fn draw_fitted<R>(
    n: usize,
    rng: &mut ChaCha8Rng,
    mut fit: impl FnMut(&[usize], &[usize]) -> Result<R>,
) -> Result<(Vec<usize>, Vec<usize>, R, usize)> {
    let mut redraws = 0;
    loop {
        let (indices, oob) = resample(n, rng);
        match fit(&indices, &oob) {
            Ok(r) => return Ok((indices, oob, r, redraws)),
            Err(ElasticError::RankDeficient(msg)) if redraws < MAX_REDRAWS => {
                log::debug!("redrawing rank-deficient bootstrap sample: {msg}");
                redraws += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Case bootstrap of the quotient model with replicates refitted from the
/// as-given parametrizations.
pub fn bootstrap<T: Scalar>(
    data: &Dataset<T>,
    config: &FitConfig,
    n_boot: usize,
    x_eval: &[Vec<T>],
    seed: u64,
) -> Result<Vec<BootstrapSample<T>>> {
    bootstrap_with(data, config, x_eval, &BootstrapOptions { replicates: n_boot, seed, warm_start: false })
}

pub fn bootstrap_with<T: Scalar>(
    data: &Dataset<T>,
    config: &FitConfig,
    x_eval: &[Vec<T>],
    options: &BootstrapOptions,
) -> Result<Vec<BootstrapSample<T>>> {
    if options.replicates == 0 {
        return Err(ElasticError::InvalidArgument("at least one bootstrap replicate is required".into()));
    }
    if data.is_empty() {
        return Err(ElasticError::InsufficientSamples(0));
    }
    if let Some(x) = x_eval.iter().find(|x| x.len() != data.num_covariates()) {
        return Err(ElasticError::DimensionMismatch { expected: data.num_covariates(), found: x.len() });
    }
    let warm: Option<Vec<Warping<T>>> = if options.warm_start { Some(full_data_warps(data, config)?) } else { None };
    (0..options.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(options.seed, b as u64);
            let (indices, out_of_bag, model, redraws) = draw_fitted(data.len(), &mut rng, |idx, _| {
                let sample = data.subset(idx);
                match &warm {
                    Some(w) => fit_quotient_from(&sample, config, idx.iter().map(|&i| w[i].clone()).collect()),
                    None => fit_quotient(&sample, config),
                }
            })?;
            let predictions =
                x_eval.iter().map(|x| model.predict(x, config.grid(), false)).collect::<Result<Vec<_>>>()?;
            Ok(BootstrapSample { replicate: b, indices, model, x_eval: x_eval.to_vec(), predictions, out_of_bag, redraws })
        })
        .collect()
}

fn full_data_warps<T: Scalar>(data: &Dataset<T>, config: &FitConfig) -> Result<Vec<Warping<T>>> {
    let model = fit_quotient(data, config)?;
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let target = model.alignment_target(&data.covariates()[i], config.target_points)?;
            Ok(align_to_target(&data.curves()[i], &target, &config.align)?.warping)
        })
        .collect()
}

/// The bootstrap predictions closest to their elastic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRegion<T> {
    /// Elastic mean of the centred predictions.
    pub mean: Curve<T>,
    /// Centred member curves, closest first.
    pub curves: Vec<Curve<T>>,
    /// Positions of the members in the sample list.
    pub members: Vec<usize>,
    pub distances: Vec<T>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ElasticError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `⌈(1 − α) n⌉`, robust to rounding in `1 − α`.
fn region_size(alpha: f64, n: usize) -> usize {
    ((1.0 - alpha) * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Distance-based confidence region for the predicted shape at `x`: the
/// `⌈(1 − α) N⌉` centred bootstrap predictions closest to their elastic mean.
pub fn distance_confidence_region<T: Scalar>(
    samples: &[BootstrapSample<T>],
    x: &[T],
    alpha: f64,
    config: &FitConfig,
) -> Result<DistanceRegion<T>> {
    check_alpha(alpha)?;
    let size = region_size(alpha, samples.len());
    if size < 1 {
        return Err(ElasticError::InsufficientSamples(samples.len()));
    }
    let curves: Vec<Curve<T>> =
        samples.iter().map(|s| s.prediction_at(x, config).map(|c| c.centered())).collect::<Result<_>>()?;
    let mean_model = elastic_mean_model(&curves, config)?;
    let target = mean_model.alignment_target(&[], config.target_points)?;
    let distances: Vec<T> = curves
        .par_iter()
        .map(|c| align_to_target(c, &target, &config.align).map(|r| r.residual))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..curves.len()).collect();
    order.sort_by(|&a, &b| distances[a].partial_cmp(&distances[b]).expect("finite distances").then(a.cmp(&b)));
    order.truncate(size);
    Ok(DistanceRegion {
        mean: mean_model.predict(&[], config.grid(), true)?,
        curves: order.iter().map(|&i| curves[i].clone()).collect(),
        distances: order.iter().map(|&i| distances[i]).collect(),
        members: order,
    })
}

/// Type-7 empirical quantile of ascending `sorted`.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bootstrap confidence ellipse for one spline coefficient `ξ_{j,m} ∈ R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefEllipse<T> {
    pub center: Vec<T>,
    /// Bootstrap covariance (`d × d`, row-major, divisor `N − 1`).
    pub shape: Vec<T>,
    /// Quantile of the studentized bootstrap sample at `1 − α`.
    pub radius: T,
    /// Same at the Bonferroni level `1 − α/M`.
    pub joint_radius: T,
    /// The covariance was singular and a small ridge was added.
    pub regularized: bool,
    precision: Vec<T>,
}

impl<T: Scalar> CoefEllipse<T> {
    /// `(ξ − center)ᵀ Σ⁻¹ (ξ − center)`.
    pub fn statistic(&self, xi: &[T]) -> T {
        let diff: Vec<T> = xi.iter().zip(&self.center).map(|(&a, &b)| a - b).collect();
        self.form(&diff)
    }

    /// `center ᵀ Σ⁻¹ center`, the statistic for `ξ = 0`.
    pub fn null_statistic(&self) -> T {
        self.form(&self.center)
    }

    pub fn contains(&self, xi: &[T]) -> bool {
        self.statistic(xi) <= self.radius
    }

    pub fn contains_joint(&self, xi: &[T]) -> bool {
        self.statistic(xi) <= self.joint_radius
    }

    fn form(&self, v: &[T]) -> T {
        let d = v.len();
        (0..d).fold(T::zero(), |acc, r| acc + v[r] * (0..d).fold(T::zero(), |s, c| s + self.precision[r * d + c] * v[c]))
    }
}

/// Coefficient-wise confidence ellipses and tests of `β_j = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefInference<T> {
    pub alpha: f64,
    pub num_functions: usize,
    /// Indexed by `j · M + m`.
    pub ellipses: Vec<CoefEllipse<T>>,
    /// `ξ̄ᵀΣ̂⁻¹ξ̄ ≥ c_{1−α}` per coefficient.
    pub coef_rejected: Vec<bool>,
    /// `max_m ξ̄ᵀΣ̂⁻¹ξ̄ / c_{1−α/M} ≥ 1` per effect `j` (intercept first).
    pub effect_rejected: Vec<bool>,
    /// Bootstrap spread of the intercept exceeds its size; alignment
    /// variability may dominate and distance-based regions are preferable.
    pub high_dispersion: bool,
}

impl<T: Scalar> CoefInference<T> {
    pub fn ellipse(&self, j: usize, m: usize) -> &CoefEllipse<T> {
        &self.ellipses[j * self.num_functions + m]
    }
}

/// Confidence ellipses from the coefficients of bootstrap refits.
pub fn coef_confidence_regions<T: Scalar>(samples: &[BootstrapSample<T>], alpha: f64) -> Result<CoefInference<T>> {
    let first = samples.first().ok_or(ElasticError::InsufficientSamples(0))?;
    let (m, d) = (first.model.basis().size(), first.model.dim());
    let effects = first.model.num_covariates() + 1;
    let coefs: Vec<&[T]> = samples.iter().map(|s| s.model.coefficients()).collect();
    if let Some(c) = coefs.iter().find(|c| c.len() != effects * m * d) {
        return Err(ElasticError::DimensionMismatch { expected: effects * m * d, found: c.len() });
    }
    coef_regions_from(&coefs, effects, m, d, alpha)
}

/// [`coef_confidence_regions`] on raw coefficient arrays laid out as
/// `(j, m, coordinate)`.
pub fn coef_regions_from<T: Scalar>(
    coefs: &[&[T]],
    effects: usize,
    num_functions: usize,
    d: usize,
    alpha: f64,
) -> Result<CoefInference<T>> {
    check_alpha(alpha)?;
    let n = coefs.len();
    if n < 2 {
        return Err(ElasticError::InsufficientSamples(n));
    }
    if n < 50 {
        log::warn!("only {n} bootstrap replicates; at least 50 are recommended for coefficient regions");
    }
    let joint_level = 1.0 - alpha / num_functions as f64;
    let mut ellipses = Vec::with_capacity(effects * num_functions);
    for j in 0..effects {
        for m in 0..num_functions {
            let start = (j * num_functions + m) * d;
            let draws: Vec<&[T]> = coefs.iter().map(|c| &c[start..start + d]).collect();
            ellipses.push(ellipse(&draws, alpha, joint_level));
        }
    }
    let coef_rejected = ellipses.iter().map(|e| e.null_statistic() >= e.radius).collect();
    let effect_rejected = (0..effects)
        .map(|j| ellipses[j * num_functions..(j + 1) * num_functions].iter().any(|e| e.null_statistic() >= e.joint_radius))
        .collect();
    let intercept = &ellipses[..num_functions];
    let spread = intercept.iter().fold(T::zero(), |acc, e| acc + (0..d).fold(T::zero(), |s, i| s + e.shape[i * d + i]));
    let size = intercept.iter().fold(T::zero(), |acc, e| acc + e.center.iter().fold(T::zero(), |s, &c| s + c * c));
    let high_dispersion = spread > size;
    if high_dispersion {
        log::warn!("bootstrap coefficients vary more than the intercept's size; alignment may differ between replicates, prefer distance-based regions");
    }
    if ellipses.iter().any(|e| e.regularized) {
        log::warn!("singular bootstrap covariance regularized with a small ridge");
    }
    Ok(CoefInference { alpha, num_functions, ellipses, coef_rejected, effect_rejected, high_dispersion })
}

fn ellipse<T: Scalar>(draws: &[&[T]], alpha: f64, joint_level: f64) -> CoefEllipse<T> {
    let d = draws[0].len();
    let nf = T::from_usize_lossy(draws.len());
    let mut center = vec![T::zero(); d];
    for x in draws {
        center.iter_mut().zip(x.iter()).for_each(|(c, &v)| *c += v);
    }
    center.iter_mut().for_each(|c| *c /= nf);
    let mut shape = vec![T::zero(); d * d];
    for x in draws {
        for r in 0..d {
            for c in 0..d {
                shape[r * d + c] += (x[r] - center[r]) * (x[c] - center[c]);
            }
        }
    }
    shape.iter_mut().for_each(|v| *v /= nf - T::one());
    let (precision, regularized) = precision_of(&shape, d);
    let mut e = CoefEllipse { center, shape, radius: T::zero(), joint_radius: T::zero(), regularized, precision };
    let mut stats: Vec<f64> = draws.iter().map(|x| e.statistic(x).to_f64_lossy()).collect();
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    e.radius = T::lit(quantile_type7(&stats, 1.0 - alpha));
    e.joint_radius = T::lit(quantile_type7(&stats, joint_level));
    e
}

/// Inverse of a covariance matrix, adding `1e−9 · trace` to the diagonal when
/// it is singular.
fn precision_of<T: Scalar>(cov: &[T], d: usize) -> (Vec<T>, bool) {
    let tol = T::lit(1e-12);
    let (factor, regularized) = match Cholesky::new(cov, d, tol) {
        Ok(f) => (f, false),
        Err(_) => {
            let trace = (0..d).fold(T::zero(), |s, i| s + cov[i * d + i]);
            let ridge = T::lit(1e-9) * trace.max(T::epsilon());
            let mut a = cov.to_vec();
            (0..d).for_each(|i| a[i * d + i] += ridge);
            let f = Cholesky::new(&a, d, T::zero()).unwrap_or_else(|_| {
                let eye: Vec<T> = (0..d * d).map(|k| if k % (d + 1) == 0 { ridge } else { T::zero() }).collect();
                Cholesky::new(&eye, d, T::zero()).expect("positive ridge")
            });
            (f, true)
        }
    };
    let mut inv = vec![T::zero(); d * d];
    for c in 0..d {
        let mut e = vec![T::zero(); d];
        e[c] = T::one();
        factor.solve_in_place(&mut e);
        (0..d).for_each(|r| inv[r * d + c] = e[r]);
    }
    (inv, regularized)
}

/// Out-of-bootstrap comparison of the full model with a reduced one.
#[derive(Debug, Clone, PartialEq)]
pub struct OobComparison {
    /// Covariate columns kept by the reduced model.
    pub kept: Vec<usize>,
    /// Mean over replicates of `MSE(reduced) − MSE(full)` on out-of-bag rows.
    pub mean_delta_mse: f64,
    /// Fraction of replicates in which dropping covariates increased the MSE.
    pub increase_fraction: f64,
    pub replicates: usize,
    /// Replicates without out-of-bag rows.
    pub skipped: usize,
}

fn oob_mse<T: Scalar>(model: &Model<T>, data: &Dataset<T>, config: &FitConfig) -> Result<f64> {
    Ok(quotient_loss(model, data, &config.align, config.target_points)?.to_f64_lossy() / data.len() as f64)
}

/// Compares the full quotient model with reduced models keeping the
/// covariate columns in each of `subsets` (the intercept is always kept).
pub fn oob_model_comparison<T: Scalar>(
    data: &Dataset<T>,
    config: &FitConfig,
    subsets: &[Vec<usize>],
    n_boot: usize,
    seed: u64,
) -> Result<Vec<OobComparison>> {
    if n_boot == 0 {
        return Err(ElasticError::InvalidArgument("at least one bootstrap replicate is required".into()));
    }
    let k = data.num_covariates();
    if let Some(&c) = subsets.iter().flatten().find(|&&c| c >= k) {
        return Err(ElasticError::InvalidArgument(format!("covariate column {c} does not exist ({k} covariates)")));
    }
    let deltas: Vec<Option<Vec<f64>>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let (_, oob, deltas, _) = draw_fitted(data.len(), &mut rng, |idx, oob| {
                if oob.is_empty() {
                    return Ok(None);
                }
                let sample = data.subset(idx);
                let held_out = data.subset(oob);
                let full = oob_mse(&fit_quotient(&sample, config)?, &held_out, config)?;
                subsets
                    .iter()
                    .map(|kept| {
                        let reduced = fit_quotient(&sample.select_covariates(kept), config)?;
                        Ok(oob_mse(&reduced, &held_out.select_covariates(kept), config)? - full)
                    })
                    .collect::<Result<Vec<f64>>>()
                    .map(Some)
            })?;
            if oob.is_empty() {
                log::debug!("bootstrap replicate {b} has no out-of-bag rows; skipped");
            }
            Ok(deltas)
        })
        .collect::<Result<_>>()?;
    let used: Vec<&Vec<f64>> = deltas.iter().flatten().collect();
    let skipped = n_boot - used.len();
    Ok(subsets
        .iter()
        .enumerate()
        .map(|(s, kept)| {
            let vals: Vec<f64> = used.iter().map(|d| d[s]).collect();
            let count = vals.len().max(1) as f64;
            OobComparison {
                kept: kept.clone(),
                mean_delta_mse: if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / count },
                increase_fraction: if vals.is_empty() { f64::NAN } else { vals.iter().filter(|&&v| v > 0.0).count() as f64 / count },
                replicates: vals.len(),
                skipped,
            }
        })
        .collect())
}
