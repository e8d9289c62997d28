//! On-disk fit artifact, schema version 1.

use serde::{Deserialize, Serialize};
use wocr::{FitResult, TuningParams};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerJson {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub response_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub schema: u32,
    pub variant: String,
    pub criterion: String,
    pub params: TuningParams,
    pub sse: f64,
    pub df: f64,
    pub criterion_value: f64,
    pub effective_components: f64,
    pub hard_components: usize,
    pub beta_original: Vec<f64>,
    pub intercept: f64,
    pub column_names: Vec<String>,
    pub standardizer: StandardizerJson,
    pub weights: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl FitArtifact {
    pub fn new(fit: &FitResult, column_names: Vec<String>) -> Self {
        Self {
            schema: SCHEMA,
            variant: fit.spec.variant.name().to_string(),
            criterion: fit.spec.criterion.name().to_string(),
            params: fit.params,
            sse: fit.sse,
            df: fit.df,
            criterion_value: fit.criterion_value,
            effective_components: fit.effective_components,
            hard_components: fit.hard_components,
            beta_original: fit.beta_original.clone(),
            intercept: fit.intercept,
            column_names,
            standardizer: StandardizerJson {
                means: fit.standardizer.column_means.clone(),
                scales: fit.standardizer.column_scales.clone(),
                response_mean: fit.standardizer.response_mean,
            },
            weights: fit.weights.clone(),
            singular_values: fit.singular_values.clone(),
            gamma: fit.gamma.clone(),
        }
    }

    /// Checks the schema version and that the vectors agree in length.
    pub fn validate(&self) -> Result<(), String> {
        if self.schema != SCHEMA {
            return Err(format!("unsupported fit schema {} (expected {SCHEMA})", self.schema));
        }
        let p = self.column_names.len();
        if self.beta_original.len() != p
            || self.standardizer.means.len() != p
            || self.standardizer.scales.len() != p
        {
            return Err("fit file is inconsistent: coefficient and column counts differ".into());
        }
        let m = self.weights.len();
        if self.singular_values.len() != m || self.gamma.len() != m {
            return Err("fit file is inconsistent: component vectors differ in length".into());
        }
        Ok(())
    }

    /// `(j, d_j, gamma_j, w_j)` rows.
    pub fn component_rows(&self) -> Vec<wocr::models::ComponentRow> {
        (0..self.weights.len())
            .map(|j| wocr::models::ComponentRow {
                j: j + 1,
                d: self.singular_values[j],
                gamma: self.gamma[j],
                w: self.weights[j],
            })
            .collect()
    }
}
