//! Elastic regression for curves modulo re-parametrization.
//!
//! Curves are handled through their square-root-velocity (SRV) transform,
//! under which re-parametrization acts by L2 isometries. Regression models
//! are linear in the covariates on SRV level and are fitted by alternating
//! between warping the observations and a least-squares spline fit.

pub mod align;
pub mod curve;
pub mod error;
pub mod inference;
mod linalg;
pub mod model;
pub mod poly;
mod quadrature;
pub mod regression;
pub mod scalar;
pub mod simulate;
pub mod spline;
pub mod srv;
pub mod warping;

pub use align::{
    align_to_target, align_with_hint, brute_force_distance, distance_to_srv, elastic_distance, AlignConfig,
    AlignmentResult,
};
pub use curve::{polygon_from_points, Curve};
pub use error::{ElasticError, Result};
pub use inference::{
    adjusted_r2, bootstrap, bootstrap_with, coef_confidence_regions, distance_confidence_region, frechet_r2, model_r2,
    oob_model_comparison, permutation_test_global, BootstrapOptions, BootstrapSample, CoefEllipse, CoefInference,
    DistanceRegion, OobComparison, PermutationTest,
};
pub use model::{fit_l2_model, fit_l2_model_ridge, FitDiagnostics, Method, Model, ModelLevel};
pub use regression::{
    elastic_mean, elastic_mean_model, fit_iterate_curve, fit_method, fit_prealign_curve, fit_prealign_srv,
    fit_quotient, fit_quotient_closed, fit_quotient_product, frechet_mean_srv, frechet_predict, frechet_weights,
    predict, quotient_loss, Dataset, FitConfig,
};
pub use scalar::Scalar;
pub use simulate::{
    generate_scenario, geodesic_interpolate, run_benchmark, BenchmarkTable, Scenario, ScenarioSpec, SimulatedData, Templates,
};
pub use spline::SplineBasis;
pub use srv::{close_prediction, srv_inverse, srv_inverse_at, srv_transform, OutputGrid, SrvFunction, SrvKind};
pub use warping::Warping;

pub type Curve64 = Curve<f64>;
pub type Curve32 = Curve<f32>;
pub type Warping64 = Warping<f64>;
pub type Warping32 = Warping<f32>;
pub type SrvFunction64 = SrvFunction<f64>;
pub type SrvFunction32 = SrvFunction<f32>;
pub type Model64 = Model<f64>;
pub type Model32 = Model<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
