//! Component weight families.
//!
//! Two families (ridge shrinkage and expit) crossed with two orderings
//! (singular value `d_j` or squared coefficient `gamma_j^2`) give the four
//! weight functions used by the model variants.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::components::OrthoBasis;
use crate::error::{Result, WocrError};

/// Default expit scale for the component-selecting variants.
pub const DEFAULT_FIXED_A: f64 = 50.0;

const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightFamily {
    /// `s / (s + lambda)` with `s = d^2` or `gamma^2`.
    RidgeShrink,
    /// `expit(a (s - c))` with `s = d` or `gamma^2`.
    Expit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentOrdering {
    SingularValue,
    GammaSquared,
}

/// Tuning parameters; which fields are required depends on the family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl TuningParams {
    pub fn ridge(lambda: f64) -> Self {
        Self {
            lambda: Some(lambda),
            ..Self::default()
        }
    }

    pub fn expit(a: f64, c: f64) -> Self {
        Self {
            a: Some(a),
            c: Some(c),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: WeightFamily,
    pub ordering: ComponentOrdering,
    pub params: TuningParams,
}

/// Logistic function with the exponent clamped at +-700.
pub fn expit(z: f64) -> f64 {
    if z < -EXP_GUARD {
        z.exp()
    } else if z > EXP_GUARD {
        1.0
    } else {
        1.0 / (1.0 + (-z).exp())
    }
}

/// Resolved parameters, validated once per evaluation.
#[derive(Debug, Clone, Copy)]
enum Resolved {
    Ridge { lambda: f64 },
    Expit { a: f64, c: f64 },
}

impl WeightSpec {
    pub fn new(family: WeightFamily, ordering: ComponentOrdering, params: TuningParams) -> Self {
        Self {
            family,
            ordering,
            params,
        }
    }

    fn resolve(&self) -> Result<Resolved> {
        match self.family {
            WeightFamily::RidgeShrink => {
                let lambda = self.params.lambda.ok_or(WocrError::MissingParam("lambda"))?;
                if !(lambda >= 0.0) || !lambda.is_finite() {
                    return Err(WocrError::InvalidParam {
                        name: "lambda",
                        value: lambda,
                    });
                }
                Ok(Resolved::Ridge { lambda })
            }
            WeightFamily::Expit => {
                let a = self.params.a.ok_or(WocrError::MissingParam("a"))?;
                let c = self.params.c.ok_or(WocrError::MissingParam("c"))?;
                if !(a > 0.0) || !a.is_finite() {
                    return Err(WocrError::InvalidParam { name: "a", value: a });
                }
                if !c.is_finite() {
                    return Err(WocrError::InvalidParam { name: "c", value: c });
                }
                Ok(Resolved::Expit { a, c })
            }
        }
    }

    /// Ordering statistic for one component: `d_j` or `gamma_j^2`.
    pub fn statistic(&self, d: f64, gamma: f64) -> f64 {
        match self.ordering {
            ComponentOrdering::SingularValue => d,
            ComponentOrdering::GammaSquared => gamma * gamma,
        }
    }

    /// Weights from raw singular values and coefficients.
    pub fn weights_from(&self, d: &[f64], gamma: &[f64]) -> Result<Vec<f64>> {
        check_lengths(d, gamma)?;
        let resolved = self.resolve()?;
        Ok(d.iter()
            .zip(gamma)
            .map(|(&dj, &gj)| {
                let s = self.statistic(dj, gj);
                match resolved {
                    Resolved::Ridge { lambda } => {
                        // d enters squared for the ridge family
                        let s2 = match self.ordering {
                            ComponentOrdering::SingularValue => s * s,
                            ComponentOrdering::GammaSquared => s,
                        };
                        if lambda == 0.0 {
                            1.0
                        } else {
                            s2 / (s2 + lambda)
                        }
                    }
                    Resolved::Expit { a, c } => expit(a * (s - c)),
                }
            })
            .collect())
    }

    /// `dw_j / d(gamma_j^2)`; identically zero under singular-value ordering.
    pub fn derivs_from(&self, d: &[f64], gamma: &[f64]) -> Result<Vec<f64>> {
        check_lengths(d, gamma)?;
        let resolved = self.resolve()?;
        if self.ordering == ComponentOrdering::SingularValue {
            return Ok(vec![0.0; d.len()]);
        }
        Ok(gamma
            .iter()
            .map(|&gj| {
                let g2 = gj * gj;
                match resolved {
                    Resolved::Ridge { lambda } => {
                        if lambda == 0.0 {
                            0.0
                        } else {
                            lambda / (g2 + lambda).powi(2)
                        }
                    }
                    Resolved::Expit { a, c } => {
                        let z = a * (g2 - c);
                        a * expit(z) * expit(-z)
                    }
                }
            })
            .collect())
    }
}

fn check_lengths(d: &[f64], gamma: &[f64]) -> Result<()> {
    if d.len() != gamma.len() {
        return Err(WocrError::DimensionMismatch(format!(
            "{} singular values but {} coefficients",
            d.len(),
            gamma.len()
        )));
    }
    Ok(())
}

/// Component weights in `[0, 1]` for a basis.
pub fn weights(spec: &WeightSpec, basis: &OrthoBasis) -> Result<DVector<f64>> {
    let w = spec.weights_from(basis.d().as_slice(), basis.gamma().as_slice())?;
    Ok(DVector::from_vec(w))
}

/// Derivative of each weight with respect to `gamma_j^2`.
pub fn weight_derivs_wrt_gamma_sq(spec: &WeightSpec, basis: &OrthoBasis) -> Result<DVector<f64>> {
    let dw = spec.derivs_from(basis.d().as_slice(), basis.gamma().as_slice())?;
    Ok(DVector::from_vec(dw))
}
