//! Synthetic data for the simulation scenarios and the benchmark harness.
//!
//! Scenarios 1 and 2 interpolate two open templates linearly on SRV level
//! (scenario 1 after aligning them, scenario 2 as given), perturb 50
//! finite-difference SRV vectors by a Gaussian random walk and keep a random
//! subset of the 51 reconstructed points. Scenario 3 interpolates two closed
//! quadratic spline curves on curve level and perturbs the kept points.
//! The coefficient-test scenario samples points on curves of a known linear
//! SRV spline model with three uniform covariates, the third one inert.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::align::{align_to_target, elastic_distance};
use crate::curve::Curve;
use crate::error::{ElasticError, Result};
use crate::model::{combine, Method};
use crate::regression::{fit_method, frechet_predict, Dataset, FitConfig};
use crate::scalar::Scalar;
use crate::spline::SplineBasis;
use crate::srv::{srv_inverse_at, srv_transform, OutputGrid, SrvFunction};

const SCENARIO1_CSV: &str = include_str!("../templates/scenario1.csv");
const SCENARIO2_CSV: &str = include_str!("../templates/scenario2.csv");
const SCENARIO3_CSV: &str = include_str!("../templates/scenario3.csv");
const COEF_TEST_CSV: &str = include_str!("../templates/coef_test.csv");

/// Points of the dense grid the generating curves are evaluated on.
pub const DENSE_POINTS: usize = 51;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Geodesic between two similar open templates.
    One,
    /// Linear SRV path between non-aligned open templates, with a corner
    /// feature present only at `x = −1`.
    Two,
    /// Closed curves, linear on curve level.
    Three,
    /// Known linear SRV spline model with two active covariates and one inert.
    CoefTest,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::One => "1",
            Scenario::Two => "2",
            Scenario::Three => "3",
            Scenario::CoefTest => "coef-test",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::One, Self::Two, Self::Three, Self::CoefTest].into_iter().find(|s| s.name() == name)
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, Scenario::Three)
    }

    /// Basis and closedness used for fitting this scenario: linear SRV
    /// splines with 11 knots, constant ones with 51 knots for the cornered
    /// templates, periodic linear ones with 21 knots for closed curves.
    pub fn fit_config(&self) -> FitConfig {
        let (degree, knots, closed) = match self {
            Scenario::One => (1, 11, false),
            Scenario::Two => (0, 51, false),
            Scenario::Three => (1, 21, true),
            Scenario::CoefTest => (1, 6, false),
        };
        FitConfig {
            basis: SplineBasis::new(degree, knots, closed).expect("valid scenario basis"),
            closed,
            ..FitConfig::default()
        }
    }
}

/// Generating templates.
#[derive(Debug, Clone, PartialEq)]
pub enum Templates<T> {
    /// Curves modelled at `x = −1` and `x = 1`.
    Pair { minus: Curve<T>, plus: Curve<T> },
    /// Coefficient matrices (`M × d`) of `β₀, β₁, β₂` on `basis`.
    Coefficients { basis: SplineBasis, effects: Vec<Vec<T>> },
}

impl<T: Scalar> Templates<T> {
    /// The built-in templates of a scenario.
    pub fn builtin(scenario: Scenario) -> Self {
        match scenario {
            Scenario::One => pair_from_csv(SCENARIO1_CSV, false),
            Scenario::Two => pair_from_csv(SCENARIO2_CSV, false),
            Scenario::Three => closed_spline_pair(SCENARIO3_CSV),
            Scenario::CoefTest => coefficients_from_csv(COEF_TEST_CSV),
        }
        .expect("built-in templates are valid")
    }
}

fn read_groups(text: &str) -> Result<Vec<(String, Vec<Vec<f64>>)>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut groups: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ElasticError::InvalidArgument(format!("template: {e}")))?;
        let id = record.get(0).unwrap_or_default().to_string();
        let values = record
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| ElasticError::InvalidArgument(format!("template: {e}")))?;
        match groups.last_mut() {
            Some((last, rows)) if *last == id => rows.push(values),
            _ => groups.push((id, vec![values])),
        }
    }
    Ok(groups)
}

fn rows_to_t<T: Scalar>(rows: &[Vec<f64>]) -> Vec<Vec<T>> {
    rows.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect()
}

fn find_group<'a>(groups: &'a [(String, Vec<Vec<f64>>)], id: &str) -> Result<&'a [Vec<f64>]> {
    groups
        .iter()
        .find(|g| g.0 == id)
        .map(|g| g.1.as_slice())
        .ok_or_else(|| ElasticError::InvalidArgument(format!("template '{id}' missing")))
}

/// Parses a long-format `curve_id,c1,..,cd` table with ids `minus` and `plus`.
pub fn pair_from_csv<T: Scalar>(text: &str, closed: bool) -> Result<Templates<T>> {
    let groups = read_groups(text)?;
    let minus = Curve::from_rows(&rows_to_t(find_group(&groups, "minus")?), closed)?;
    let plus = Curve::from_rows(&rows_to_t(find_group(&groups, "plus")?), closed)?;
    Ok(Templates::Pair { minus, plus })
}

/// Closed quadratic periodic B-spline curves from control polygons (ids
/// `minus` and `plus`), sampled densely and parametrized by the spline
/// parameter.
pub fn closed_spline_pair<T: Scalar>(text: &str) -> Result<Templates<T>> {
    let groups = read_groups(text)?;
    let curve = |id: &str| -> Result<Curve<T>> {
        let ctrl = rows_to_t::<T>(find_group(&groups, id)?);
        let d = ctrl[0].len();
        let basis = SplineBasis::new(2, ctrl.len() + 1, true)?;
        let poly = basis.to_poly(&ctrl.concat(), d);
        let n = 400;
        let times: Vec<T> = (0..=n).map(|i| T::from_usize_lossy(i) / T::from_usize_lossy(n)).collect();
        let mut pts: Vec<T> = times.iter().flat_map(|&t| poly.eval(t)).collect();
        let first = pts[..d].to_vec();
        let len = pts.len();
        pts[len - d..].copy_from_slice(&first);
        Curve::with_times(&pts, &times, d, true)
    };
    Ok(Templates::Pair { minus: curve("minus")?, plus: curve("plus")? })
}

/// Parses `effect,m,c1,..,cd` rows into coefficient matrices on a linear
/// open basis with one knot per row of each effect.
pub fn coefficients_from_csv<T: Scalar>(text: &str) -> Result<Templates<T>> {
    let groups = read_groups(text)?;
    let mut effects = Vec::new();
    for (_, rows) in &groups {
        // drop the column holding `m`
        let coefs: Vec<T> = rows.iter().flat_map(|r| r[1..].iter().map(|&v| T::lit(v))).collect();
        effects.push(coefs);
    }
    let m = groups.first().map_or(0, |g| g.1.len());
    let basis = SplineBasis::new(1, m, false)?;
    Ok(Templates::Coefficients { basis, effects })
}

/// `(1 − w)·Q(a) + w·Q(b)` with `w = (x + 1)/2`, on the common refinement of
/// both breakpoint sets.
pub fn geodesic_interpolate<T: Scalar>(a: &Curve<T>, b: &Curve<T>, x: T) -> Result<SrvFunction<T>> {
    if a.dim() != b.dim() {
        return Err(ElasticError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    if !(x >= -T::one() && x <= T::one()) {
        return Err(ElasticError::OutOfDomain(x.to_f64_lossy()));
    }
    let w = (x + T::one()) * T::lit(0.5);
    srv_transform(a).lerp(&srv_transform(b), w)
}

/// Parameters of a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec<T> {
    pub scenario: Scenario,
    pub sd: f64,
    /// Inclusive range of points kept per curve.
    pub kappa_range: (usize, usize),
    /// Observations per dataset; scenarios 1 to 3 use an equidistant grid of
    /// covariate values on `[−1, 1]`.
    pub n: usize,
    pub seed: u64,
    /// Replaces the built-in templates.
    pub templates: Option<Templates<T>>,
}

impl<T: Scalar> ScenarioSpec<T> {
    /// Defaults: the smaller noise level of each scenario, 15 to 20 points,
    /// `n = 11` (30 for the coefficient test, whose curves carry 10 to 15
    /// noiseless points).
    pub fn new(scenario: Scenario) -> Self {
        let (sd, kappa_range, n) = match scenario {
            Scenario::One => (0.4, (15, 20), 11),
            Scenario::Two => (0.2, (15, 20), 11),
            Scenario::Three => (0.1, (15, 20), 11),
            Scenario::CoefTest => (0.0, (10, 15), 30),
        };
        Self { scenario, sd, kappa_range, n, seed: 0, templates: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sd >= 0.0) || !self.sd.is_finite() {
            return Err(ElasticError::InvalidArgument("sd must be finite and non-negative".into()));
        }
        let max = if self.scenario.is_closed() { DENSE_POINTS - 1 } else { DENSE_POINTS };
        let (lo, hi) = self.kappa_range;
        if lo < 3 || lo > hi || (self.scenario != Scenario::CoefTest && hi > max) {
            return Err(ElasticError::InvalidArgument(format!("kappa range must lie within [3, {max}]")));
        }
        if self.n < 2 {
            return Err(ElasticError::InsufficientSamples(self.n));
        }
        Ok(())
    }
}

/// Training data and an independent test set drawn at the same covariates
/// (fresh covariates for the coefficient test).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
}

/// The noiseless generating family of a scenario.
#[derive(Debug, Clone)]
pub struct Generator<T: Scalar> {
    spec: ScenarioSpec<T>,
    family: Family<T>,
}

#[derive(Debug, Clone)]
enum Family<T: Scalar> {
    Srv { minus: SrvFunction<T>, plus: SrvFunction<T> },
    Curves { minus: Curve<T>, plus: Curve<T> },
    Model { basis: SplineBasis, coefs: Vec<T>, dim: usize },
}

impl<T: Scalar> Generator<T> {
    pub fn new(spec: ScenarioSpec<T>) -> Result<Self> {
        spec.validate()?;
        let templates = spec.templates.clone().unwrap_or_else(|| Templates::builtin(spec.scenario));
        let family = match (spec.scenario, templates) {
            (Scenario::One, Templates::Pair { minus, plus }) => {
                // align the plus template to the minus one so the path is a geodesic
                let qa = srv_transform(&minus);
                let w = align_to_target(&plus, &qa, &Default::default())?.warping;
                let plus = plus.apply_warping(&w);
                Family::Srv { minus: qa, plus: srv_transform(&plus) }
            }
            (Scenario::Two, Templates::Pair { minus, plus }) => {
                Family::Srv { minus: srv_transform(&minus), plus: srv_transform(&plus) }
            }
            (Scenario::Three, Templates::Pair { minus, plus }) => Family::Curves { minus, plus },
            (Scenario::CoefTest, Templates::Coefficients { basis, effects }) => {
                if effects.len() != 3 || effects.iter().any(|e| e.len() != effects[0].len()) {
                    return Err(ElasticError::InvalidArgument("three coefficient matrices of equal size required".into()));
                }
                let dim = effects[0].len() / basis.size();
                Family::Model { basis, coefs: effects.concat(), dim }
            }
            _ => return Err(ElasticError::InvalidArgument("templates do not match the scenario".into())),
        };
        Ok(Self { spec, family })
    }

    pub fn spec(&self) -> &ScenarioSpec<T> {
        &self.spec
    }

    /// Number of covariates of generated datasets.
    pub fn num_covariates(&self) -> usize {
        match self.family {
            Family::Model { .. } => 3,
            _ => 1,
        }
    }

    pub fn covariate_names(&self) -> Vec<String> {
        (1..=self.num_covariates()).map(|j| if self.num_covariates() == 1 { "x".to_string() } else { format!("x{j}") }).collect()
    }

    /// The generating curve at `x` on the dense grid (starting at the origin
    /// for SRV-level families).
    pub fn truth(&self, x: &[T]) -> Result<Curve<T>> {
        let times = dense_times::<T>(DENSE_POINTS);
        match &self.family {
            Family::Srv { .. } | Family::Model { .. } => srv_inverse_at(&self.generating_srv(x)?, &times),
            Family::Curves { minus, plus } => {
                let w = (x[0] + T::one()) * T::lit(0.5);
                let d = minus.dim();
                let mut pts: Vec<T> = times
                    .iter()
                    .flat_map(|&t| {
                        let (a, b) = (minus.eval(t), plus.eval(t));
                        a.into_iter().zip(b).map(|(u, v)| (T::one() - w) * u + w * v).collect::<Vec<T>>()
                    })
                    .collect();
                let first = pts[..d].to_vec();
                let len = pts.len();
                pts[len - d..].copy_from_slice(&first);
                Curve::with_times(&pts, &times, d, true)
            }
        }
    }

    /// The generating SRV function at `x` (SRV-level families only).
    pub fn generating_srv(&self, x: &[T]) -> Result<SrvFunction<T>> {
        match &self.family {
            Family::Srv { minus, plus } => minus.lerp(plus, (x[0] + T::one()) * T::lit(0.5)),
            Family::Model { basis, coefs, dim } => {
                let w = basis.size() * dim;
                SrvFunction::spline(*basis, combine(coefs, w, &x[..2]), *dim)
            }
            Family::Curves { .. } => Err(ElasticError::InvalidArgument("scenario 3 is generated on curve level".into())),
        }
    }

    fn covariates(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
        let n = self.spec.n;
        match self.family {
            Family::Model { .. } => {
                (0..n).map(|_| (0..3).map(|_| T::lit(rng.gen_range(-1.0..=1.0))).collect()).collect()
            }
            _ => (0..n)
                .map(|i| vec![T::lit(-1.0 + 2.0 * i as f64 / (n - 1) as f64)])
                .collect(),
        }
    }

    fn observation(&self, x: &[T], rng: &mut ChaCha8Rng) -> Result<Curve<T>> {
        let (lo, hi) = self.spec.kappa_range;
        let kappa = rng.gen_range(lo..=hi);
        let noise = Walk { sd: self.spec.sd };
        match &self.family {
            Family::Srv { .. } => {
                let truth = self.truth(x)?;
                let d = truth.dim();
                let pts = perturb_srv_vectors(truth.points(), d, &noise, rng);
                let keep = keep_indices(DENSE_POINTS, kappa, rng, true);
                let rows: Vec<Vec<T>> = keep.iter().map(|&i| pts[i * d..(i + 1) * d].to_vec()).collect();
                Curve::from_rows(&rows, false)
            }
            Family::Curves { .. } => {
                let truth = self.truth(x)?;
                let d = truth.dim();
                let keep = keep_indices(DENSE_POINTS - 1, kappa, rng, false);
                let step = 1.0 / (DENSE_POINTS - 1) as f64;
                let mut walk = vec![0.0; d];
                let mut rows = Vec::with_capacity(keep.len());
                for (r, &i) in keep.iter().enumerate() {
                    if r > 0 {
                        noise.advance(&mut walk, (i - keep[r - 1]) as f64 * step, rng);
                    }
                    rows.push(truth.point(i).iter().zip(&walk).map(|(&p, &w)| p + T::lit(w)).collect());
                }
                Curve::from_rows(&rows, true)
            }
            Family::Model { .. } => {
                let p = self.generating_srv(x)?;
                let mut times: Vec<f64> = (0..kappa - 2).map(|_| rng.gen_range(0.0..1.0)).collect();
                times.push(0.0);
                times.push(1.0);
                times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                times.dedup();
                let ts: Vec<T> = times.iter().map(|&t| T::lit(t)).collect();
                let curve = srv_inverse_at(&p, &ts)?;
                let d = curve.dim();
                let mut walk = vec![0.0; d];
                let mut rows = Vec::with_capacity(ts.len());
                for l in 0..curve.len() {
                    if l > 0 && self.spec.sd > 0.0 {
                        noise.advance(&mut walk, times[l] - times[l - 1], rng);
                    }
                    rows.push(curve.point(l).iter().zip(&walk).map(|(&p, &w)| p + T::lit(w)).collect());
                }
                Curve::from_rows(&rows, false)
            }
        }
    }

    fn dataset(&self, rng: &mut ChaCha8Rng) -> Result<Dataset<T>> {
        let xs = self.covariates(rng);
        let curves = xs.iter().map(|x| self.observation(x, rng)).collect::<Result<Vec<_>>>()?;
        Dataset::new(curves, xs, self.covariate_names())
    }

    /// Draws a training and a test dataset. Both are pure functions of the
    /// spec and its seed.
    pub fn generate(&self) -> Result<SimulatedData<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        let train = self.dataset(&mut rng)?;
        rng.set_stream(1);
        let test = self.dataset(&mut rng)?;
        Ok(SimulatedData { train, test })
    }
}

/// Generates training and test data for `spec`.
pub fn generate_scenario<T: Scalar>(spec: &ScenarioSpec<T>) -> Result<SimulatedData<T>> {
    Generator::new(spec.clone())?.generate()
}

fn dense_times<T: Scalar>(n: usize) -> Vec<T> {
    let last = T::from_usize_lossy(n - 1);
    let mut ts: Vec<T> = (0..n).map(|i| T::from_usize_lossy(i) / last).collect();
    ts[n - 1] = T::one();
    ts
}

/// Gaussian random walk in the curve parameter: after parameter time `t`
/// each coordinate has standard deviation `sd·√t`, so `sd` is the spread
/// reached at the end of the curve.
struct Walk {
    sd: f64,
}

impl Walk {
    fn advance(&self, walk: &mut [f64], dt: f64, rng: &mut ChaCha8Rng) {
        let scale = self.sd * dt.sqrt();
        walk.iter_mut().for_each(|w| *w += scale * rng.sample::<f64, _>(StandardNormal));
    }
}

/// Adds a random walk, started at zero on the first vector, to the
/// finite-difference SRV vectors of `points` and integrates back to points
/// starting at the origin.
fn perturb_srv_vectors<T: Scalar>(points: &[T], d: usize, noise: &Walk, rng: &mut ChaCha8Rng) -> Vec<T> {
    let n = points.len() / d;
    let dt = T::one() / T::from_usize_lossy(n - 1);
    let mut raw = vec![0.0; d];
    let mut out = vec![T::zero(); d];
    let mut pos = vec![T::zero(); d];
    for k in 0..n - 1 {
        if k > 0 {
            noise.advance(&mut raw, dt.to_f64_lossy(), rng);
        }
        let walk: Vec<T> = raw.iter().map(|&w| T::lit(w)).collect();
        let dy: Vec<T> = (0..d).map(|i| points[(k + 1) * d + i] - points[k * d + i]).collect();
        let len = crate::scalar::norm(&dy);
        let scale = if len > T::zero() { (len * dt).sqrt() } else { T::one() };
        let q: Vec<T> = dy.iter().zip(&walk).map(|(&v, &w)| v / scale + w).collect();
        let speed = crate::scalar::norm(&q);
        pos.iter_mut().zip(&q).for_each(|(p, &v)| *p += v * speed * dt);
        out.extend_from_slice(&pos);
    }
    out
}

/// `kappa` sorted indices out of `0..n`, always containing 0 (and `n − 1`
/// when `keep_last`).
fn keep_indices(n: usize, kappa: usize, rng: &mut ChaCha8Rng, keep_last: bool) -> Vec<usize> {
    let kappa = kappa.min(n);
    let fixed = if keep_last { 2 } else { 1 };
    let inner = n - fixed;
    let mut keep: Vec<usize> = sample(rng, inner, kappa - fixed).into_iter().map(|i| i + 1).collect();
    keep.push(0);
    if keep_last {
        keep.push(n - 1);
    }
    keep.sort_unstable();
    keep
}

/// Out-of-sample errors of several estimators over simulated replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub methods: Vec<Method>,
    /// `mse[r][m]`: mean squared elastic distance of method `m` in replicate
    /// `r`; `None` if the fit failed.
    pub mse: Vec<Vec<Option<f64>>>,
    /// Wall-clock seconds per fit, same layout.
    pub seconds: Vec<Vec<f64>>,
}

impl BenchmarkTable {
    /// Mean over successful replicates.
    pub fn mean_mse(&self, method: usize) -> Option<f64> {
        let ok: Vec<f64> = self.mse.iter().filter_map(|r| r[method]).collect();
        (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
    }

    pub fn failures(&self, method: usize) -> usize {
        self.mse.iter().filter(|r| r[method].is_none()).count()
    }

    pub fn mean_seconds(&self, method: usize) -> f64 {
        self.seconds.iter().map(|r| r[method]).sum::<f64>() / self.seconds.len().max(1) as f64
    }

    /// Index of the method with the smallest mean MSE.
    pub fn best(&self) -> Option<usize> {
        (0..self.methods.len())
            .filter_map(|m| self.mean_mse(m).map(|v| (m, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(m, _)| m)
    }

    /// Index of the best method within replicate `r`.
    pub fn best_in_replicate(&self, r: usize) -> Option<usize> {
        self.mse[r]
            .iter()
            .enumerate()
            .filter_map(|(m, v)| v.map(|v| (m, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(m, _)| m)
    }
}

/// Seed of replicate `r`, derived from the master seed.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64 + 1);
    rng.gen()
}

/// Mean squared elastic distance between test curves and predictions.
fn test_mse<T: Scalar>(test: &Dataset<T>, predictions: &[Curve<T>], config: &FitConfig) -> Result<f64> {
    let sq: Vec<f64> = test
        .curves()
        .par_iter()
        .zip(predictions)
        .map(|(y, p)| elastic_distance(y, p, &config.align).map(|d| (d * d).to_f64_lossy()))
        .collect::<Result<_>>()?;
    Ok(sq.iter().sum::<f64>() / sq.len() as f64)
}

/// Predictions of one method at the test covariates.
pub fn method_predictions<T: Scalar>(method: Method, train: &Dataset<T>, x: &[Vec<T>], config: &FitConfig) -> Result<Vec<Curve<T>>> {
    if method == Method::Frechet {
        return frechet_predict(train, x, config);
    }
    let model = fit_method(method, train, config)?;
    x.iter().map(|xi| model.predict(xi, OutputGrid::Uniform(config.target_points), false)).collect()
}

/// Fits every method on fresh training data per replicate and scores it on
/// an independent test set. `config` defaults to the scenario's settings.
pub fn run_benchmark<T: Scalar>(
    spec: &ScenarioSpec<T>,
    methods: &[Method],
    replicates: usize,
    seed: u64,
    config: Option<&FitConfig>,
) -> Result<BenchmarkTable> {
    spec.validate()?;
    let base = config.cloned().unwrap_or_else(|| spec.scenario.fit_config());
    let rows: Vec<(Vec<Option<f64>>, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rseed = replicate_seed(seed, r);
            let data = generate_scenario(&ScenarioSpec { seed: rseed, ..spec.clone() })?;
            let cfg = FitConfig { seed: rseed, ..base.clone() };
            let mut mse = Vec::with_capacity(methods.len());
            let mut secs = Vec::with_capacity(methods.len());
            for &m in methods {
                let start = Instant::now();
                let outcome = method_predictions(m, &data.train, data.test.covariates(), &cfg)
                    .and_then(|preds| test_mse(&data.test, &preds, &cfg));
                secs.push(start.elapsed().as_secs_f64());
                match outcome {
                    Ok(v) => mse.push(Some(v)),
                    Err(e) => {
                        log::warn!("replicate {r}, method {}: {e}", m.name());
                        mse.push(None);
                    }
                }
            }
            Ok((mse, secs))
        })
        .collect::<Result<_>>()?;
    let (mse, seconds) = rows.into_iter().unzip();
    Ok(BenchmarkTable { methods: methods.to_vec(), mse, seconds })
}

/// The five estimators compared in the benchmark.
pub const ALL_METHODS: [Method; 5] =
    [Method::Quotient, Method::PrealignSrv, Method::PrealignCurve, Method::IterateCurve, Method::Frechet];
