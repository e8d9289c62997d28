//! Standardization and orthonormal component extraction.
//!
//! A design matrix is centered and scaled column by column (sample standard
//! deviation, divisor `n - 1`) and the response is centered. The thin SVD of
//! the standardized design then provides the orthonormal components `u_j`,
//! their singular values `d_j`, the principal directions `v_j`, and the
//! component coefficients `gamma_j = <y, u_j>`.

use faer::Mat;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WocrError};

/// Default relative rank tolerance: singular values at or below
/// `DEFAULT_RANK_TOL * d_1` are discarded.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Column centering/scaling and response centering recorded at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub column_means: Vec<f64>,
    pub column_scales: Vec<f64>,
    pub response_mean: f64,
}

impl Standardizer {
    /// Learns the transform from a design and response.
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(WocrError::DimensionMismatch(format!(
                "response has {} entries but design has {} rows",
                y.len(),
                n
            )));
        }
        if n < 2 {
            return Err(WocrError::TooFewRows(format!("need at least 2 rows, got {n}")));
        }
        let mut column_means = Vec::with_capacity(p);
        let mut column_scales = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            let mean = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let sd = (ss / (n as f64 - 1.0)).sqrt();
            let magnitude = col.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
            if !(sd > 1e-12 * magnitude) {
                return Err(WocrError::ConstantColumn(j));
            }
            column_means.push(mean);
            column_scales.push(sd);
        }
        let response_mean = y.sum() / n as f64;
        Ok(Self {
            column_means,
            column_scales,
            response_mean,
        })
    }

    pub fn n_predictors(&self) -> usize {
        self.column_means.len()
    }

    /// Applies the recorded column transform to a (possibly new) design.
    pub fn transform_x(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_predictors() {
            return Err(WocrError::DimensionMismatch(format!(
                "expected {} columns, got {}",
                self.n_predictors(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.column_means[j], self.column_scales[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn inverse_transform_x(&self, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if xs.ncols() != self.n_predictors() {
            return Err(WocrError::DimensionMismatch(format!(
                "expected {} columns, got {}",
                self.n_predictors(),
                xs.ncols()
            )));
        }
        let mut out = xs.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.column_means[j], self.column_scales[j]);
            col.apply(|v| *v = *v * s + m);
        }
        Ok(out)
    }

    pub fn center_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.add_scalar(-self.response_mean)
    }

    pub fn restore_y(&self, yc: &DVector<f64>) -> DVector<f64> {
        yc.add_scalar(self.response_mean)
    }
}

/// Centers and scales `x`, centers `y`, and returns the transform used.
pub fn standardize(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>, Standardizer)> {
    let st = Standardizer::fit(x, y)?;
    let xs = st.transform_x(x)?;
    let yc = st.center_y(y);
    Ok((xs, yc, st))
}

/// Thin SVD factors of a standardized design plus the response coefficients.
///
/// `u` is `n x m`, `d` has length `m` (strictly positive, non-increasing),
/// `v` is `p x m`, and `gamma = u^T y`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    u: DMatrix<f64>,
    d: DVector<f64>,
    v: DMatrix<f64>,
    gamma: DVector<f64>,
}

impl OrthoBasis {
    /// Assembles a basis from precomputed factors. Only shapes and the
    /// ordering of `d` are checked; orthonormality is the caller's contract.
    pub fn from_parts(
        u: DMatrix<f64>,
        d: DVector<f64>,
        v: DMatrix<f64>,
        gamma: DVector<f64>,
    ) -> Result<Self> {
        let m = d.len();
        if u.ncols() != m || v.ncols() != m || gamma.len() != m {
            return Err(WocrError::DimensionMismatch(format!(
                "factor shapes disagree: u {:?}, d {}, v {:?}, gamma {}",
                u.shape(),
                m,
                v.shape(),
                gamma.len()
            )));
        }
        if m == 0 {
            return Err(WocrError::ZeroMatrix);
        }
        if d.iter().any(|&x| !(x > 0.0)) || d.as_slice().windows(2).any(|w| w[1] > w[0]) {
            return Err(WocrError::InvalidConfig(
                "singular values must be positive and non-increasing".into(),
            ));
        }
        Ok(Self { u, d, v, gamma })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn p(&self) -> usize {
        self.v.nrows()
    }

    /// Number of retained components.
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    /// Same components, coefficients recomputed for another response.
    pub fn with_response(&self, yc: &DVector<f64>) -> Result<Self> {
        if yc.len() != self.n() {
            return Err(WocrError::DimensionMismatch(format!(
                "response has {} entries, basis has {} rows",
                yc.len(),
                self.n()
            )));
        }
        Ok(Self {
            gamma: self.u.tr_mul(yc),
            ..self.clone()
        })
    }

    /// `sum_j w_j gamma_j u_j`.
    pub fn fitted(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.u * w.component_mul(&self.gamma)
    }

    /// Coefficients in standardized-predictor space: `V diag(w / d) gamma`.
    pub fn coefficients(&self, w: &DVector<f64>) -> DVector<f64> {
        let scaled = DVector::from_iterator(
            self.rank(),
            (0..self.rank()).map(|j| w[j] * self.gamma[j] / self.d[j]),
        );
        &self.v * scaled
    }
}

/// Thin SVD of `xs`, truncated to singular values above `rank_tol * d_1`.
///
/// Singular values within `rank_tol * d_1` of the smallest retained value are
/// retained with it, so a repeated value never straddles the cutoff.
pub fn extract_components(
    xs: &DMatrix<f64>,
    yc: &DVector<f64>,
    rank_tol: f64,
) -> Result<OrthoBasis> {
    let (n, p) = xs.shape();
    if yc.len() != n {
        return Err(WocrError::DimensionMismatch(format!(
            "response has {} entries but design has {} rows",
            yc.len(),
            n
        )));
    }
    if n == 0 || p == 0 {
        return Err(WocrError::ZeroMatrix);
    }
    // faer's SVD stays accurate on rank-deficient input, which every centered
    // design with p >= n is
    let svd = Mat::<f64>::from_fn(n, p, |i, j| xs[(i, j)])
        .thin_svd()
        .map_err(|_| WocrError::SingularFit)?;
    let sv = svd.S().column_vector();
    let d1 = sv[0];
    if !(d1 > 0.0) || !d1.is_finite() {
        return Err(WocrError::ZeroMatrix);
    }
    let k = sv.nrows();
    let cutoff = rank_tol * d1;
    let mut m = (0..k).take_while(|&j| sv[j] > cutoff).count();
    while m > 0 && m < k && sv[m] > 0.0 && sv[m - 1] - sv[m] <= cutoff {
        m += 1;
    }
    let (fu, fv) = (svd.U(), svd.V());
    let u = DMatrix::from_fn(n, m, |i, j| fu[(i, j)]);
    let v = DMatrix::from_fn(p, m, |i, j| fv[(i, j)]);
    let d = DVector::from_fn(m, |j, _| sv[j]);
    let gamma = u.tr_mul(yc);
    Ok(OrthoBasis { u, d, v, gamma })
}
