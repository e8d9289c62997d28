//! SSE, degrees of freedom, and GCV/AIC/BIC computed from the component
//! coefficients and weights alone. No `n x n` matrix is ever formed.

use serde::{Deserialize, Serialize};

use crate::components::OrthoBasis;
use crate::error::{Result, WocrError};
use crate::weights::{ComponentOrdering, WeightSpec};

/// Smallest SSE fed to a logarithm.
pub const SSE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Gcv,
    Aic,
    Bic,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Gcv => "gcv",
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        }
    }

    /// Evaluates the criterion; `Err` on a degenerate or invalid input.
    pub fn evaluate(self, sse: f64, df: f64, n: usize) -> Result<f64> {
        match self {
            Criterion::Gcv => gcv(sse, df, n),
            Criterion::Aic => aic(sse, df, n),
            Criterion::Bic => bic(sse, df, n),
        }
    }

    /// Objective form used by the tuner: degenerate points map to `+inf`.
    pub fn objective(self, sse: f64, df: f64, n: usize) -> f64 {
        match self.evaluate(sse.max(0.0), df, n) {
            Ok(v) if !v.is_nan() => v,
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub sse: f64,
    pub df: f64,
    pub value: f64,
    pub criterion: Criterion,
}

/// `||y||^2 - sum_j (2 w_j - w_j^2) gamma_j^2`.
pub fn sse_from_coefficients(y_norm_sq: f64, w: &[f64], gamma: &[f64]) -> f64 {
    let explained: f64 = w
        .iter()
        .zip(gamma)
        .map(|(&wj, &gj)| (2.0 * wj - wj * wj) * gj * gj)
        .sum();
    y_norm_sq - explained
}

/// `||y||^2 - sum_j w_j gamma_j^2`, the SSE of a projection with the
/// indicator weights replaced by smooth ones.
pub fn sse_idempotent_form(y_norm_sq: f64, w: &[f64], gamma: &[f64]) -> f64 {
    let explained: f64 = w.iter().zip(gamma).map(|(&wj, &gj)| wj * gj * gj).sum();
    y_norm_sq - explained
}

pub fn sse_closed_form(basis: &OrthoBasis, w: &[f64], yc: &[f64]) -> Result<f64> {
    if w.len() != basis.rank() {
        return Err(WocrError::DimensionMismatch(format!(
            "{} weights for {} components",
            w.len(),
            basis.rank()
        )));
    }
    if yc.len() != basis.n() {
        return Err(WocrError::DimensionMismatch(format!(
            "response has {} entries, basis has {} rows",
            yc.len(),
            basis.n()
        )));
    }
    let y_norm_sq: f64 = yc.iter().map(|v| v * v).sum();
    Ok(sse_from_coefficients(y_norm_sq, w, basis.gamma().as_slice()))
}

/// Degrees of freedom from weights and, for response-ordered weights, their
/// derivatives: `sum w_j` or `sum (2 gamma_j^2 w'_j + w_j)`.
pub fn df_from(ordering: ComponentOrdering, w: &[f64], dw: &[f64], gamma: &[f64]) -> f64 {
    match ordering {
        ComponentOrdering::SingularValue => w.iter().sum(),
        ComponentOrdering::GammaSquared => w
            .iter()
            .zip(dw)
            .zip(gamma)
            .map(|((&wj, &dj), &gj)| 2.0 * gj * gj * dj + wj)
            .sum(),
    }
}

pub fn degrees_of_freedom(spec: &WeightSpec, basis: &OrthoBasis) -> Result<f64> {
    let d = basis.d().as_slice();
    let gamma = basis.gamma().as_slice();
    let w = spec.weights_from(d, gamma)?;
    let dw = spec.derivs_from(d, gamma)?;
    Ok(df_from(spec.ordering, &w, &dw, gamma))
}

/// Threshold on `n - df` below which GCV is treated as degenerate.
pub fn df_margin(n: usize) -> f64 {
    (0.01 * n as f64).max(1.0)
}

/// `SSE / (n - df)^2`.
pub fn gcv(sse: f64, df: f64, n: usize) -> Result<f64> {
    check_sse(sse)?;
    let resid_df = n as f64 - df;
    if !(resid_df >= df_margin(n)) {
        return Err(WocrError::DegenerateDf { df, n });
    }
    Ok(sse / (resid_df * resid_df))
}

/// `n ln(SSE) + 2 df`.
pub fn aic(sse: f64, df: f64, n: usize) -> Result<f64> {
    check_sse(sse)?;
    Ok(n as f64 * sse.max(SSE_FLOOR).ln() + 2.0 * df)
}

/// `n ln(SSE) + ln(n) df`.
pub fn bic(sse: f64, df: f64, n: usize) -> Result<f64> {
    bic_real_n(sse, df, n as f64)
}

/// BIC with a real-valued sample size.
pub fn bic_real_n(sse: f64, df: f64, n: f64) -> Result<f64> {
    check_sse(sse)?;
    if !(n >= 2.0) {
        return Err(WocrError::TooFewRows(format!("BIC needs n >= 2, got {n}")));
    }
    Ok(n * sse.max(SSE_FLOOR).ln() + n.ln() * df)
}

fn check_sse(sse: f64) -> Result<()> {
    if !(sse >= 0.0) || !sse.is_finite() {
        return Err(WocrError::NonpositiveSse(sse));
    }
    Ok(())
}
