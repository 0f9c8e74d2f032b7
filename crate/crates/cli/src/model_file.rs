//! Versioned JSON model files.

use std::path::Path;

use elastica::{FitDiagnostics, Method, Model64, ModelLevel, SplineBasis};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::Encoding;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub degree: usize,
    pub knots: usize,
    pub periodic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub method: String,
    /// `srv` or `curve`.
    pub level: String,
    pub basis: BasisSpec,
    pub dim: usize,
    pub closed: bool,
    /// Design columns after dummy encoding, intercept excluded.
    pub covariate_names: Vec<String>,
    /// Raw covariate columns and how they were encoded.
    pub encoding: Vec<Encoding>,
    /// Row-major in (effect, basis function, coordinate).
    pub coefficients: Vec<f64>,
    pub target_points: usize,
    pub seed: u64,
    pub diagnostics: Diagnostics,
}

impl ModelFile {
    pub fn from_model(model: &Model64, encoding: Vec<Encoding>, target_points: usize, seed: u64) -> Self {
        let basis = model.basis();
        let d = &model.diagnostics;
        Self {
            schema_version: SCHEMA_VERSION,
            method: model.method().name().to_string(),
            level: match model.level() {
                ModelLevel::Srv => "srv",
                ModelLevel::Curve => "curve",
            }
            .to_string(),
            basis: BasisSpec { degree: basis.degree(), knots: basis.n_knots(), periodic: basis.is_periodic() },
            dim: model.dim(),
            closed: model.is_closed(),
            covariate_names: model.covariate_names().to_vec(),
            encoding,
            coefficients: model.coefficients().to_vec(),
            target_points,
            seed,
            diagnostics: Diagnostics {
                loss_trace: d.loss_trace.clone(),
                final_loss: d.final_loss,
                iterations: d.iterations,
                converged: d.converged,
            },
        }
    }

    pub fn to_model(&self) -> Result<Model64, CliError> {
        let bad = |msg: String| CliError::Parse(format!("model file: {msg}"));
        let method = Method::from_name(&self.method).ok_or_else(|| bad(format!("unknown method '{}'", self.method)))?;
        let level = match self.level.as_str() {
            "srv" => ModelLevel::Srv,
            "curve" => ModelLevel::Curve,
            other => return Err(bad(format!("unknown level '{other}'"))),
        };
        let basis = SplineBasis::new(self.basis.degree, self.basis.knots, self.basis.periodic).map_err(|e| bad(e.to_string()))?;
        let mut model = Model64::new(basis, level, method, self.dim, self.coefficients.clone(), self.covariate_names.clone(), self.closed)
            .map_err(|e| bad(e.to_string()))?;
        let d = &self.diagnostics;
        model.diagnostics =
            FitDiagnostics { loss_trace: d.loss_trace.clone(), final_loss: d.final_loss, iterations: d.iterations, converged: d.converged };
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Parse(e.to_string()))?;
        text.push('\n');
        crate::io::write_file(path, &text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let file: Self = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::Parse(format!(
                "{}: unsupported schema version {} (expected {SCHEMA_VERSION})",
                path.display(),
                file.schema_version
            )));
        }
        Ok(file)
    }
}
