//! The six weighted-component model variants and two conventional baselines.
//!
//! | variant        | ordering   | weights                         | tuned   | default criterion |
//! |----------------|------------|---------------------------------|---------|-------------------|
//! | `RrD`          | `d`        | `d^2 / (d^2 + lambda)`          | lambda  | GCV               |
//! | `RrGamma`      | `gamma^2`  | `gamma^2 / (gamma^2 + lambda)`  | lambda  | GCV               |
//! | `PcrDC`        | `d`        | `expit(a (d - c))`, fixed `a`   | c       | BIC               |
//! | `PcrGammaC`    | `gamma^2`  | `expit(a (gamma^2 - c))`, fixed | c       | BIC               |
//! | `PcrDAc`       | `d`        | `expit(a (d - c))`              | a, c    | GCV               |
//! | `PcrGammaAc`   | `gamma^2`  | `expit(a (gamma^2 - c))`        | a, c    | GCV               |
//!
//! The fixed-`a` variants use their smooth criterion only to locate the
//! threshold `c`; the final fit keeps exactly the components whose ordering
//! statistic reaches `c`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::components::{extract_components, standardize, OrthoBasis, Standardizer, DEFAULT_RANK_TOL};
use crate::criteria::{self, Criterion, CriterionValue};
use crate::error::{Result, WocrError};
use crate::tuner::{
    default_range, minimize_1d, minimize_2d, TuneResult, DEFAULT_BUDGET_2D, DEFAULT_REL_TOL,
    DEFAULT_SUBDIVISIONS,
};
use crate::weights::{ComponentOrdering, TuningParams, WeightFamily, WeightSpec, DEFAULT_FIXED_A};

pub const DEFAULT_CV_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    RrD,
    RrGamma,
    PcrDC,
    PcrGammaC,
    PcrDAc,
    PcrGammaAc,
    BaselineRidgeGrid,
    BaselinePcrCv,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::RrD,
        Variant::RrGamma,
        Variant::PcrDC,
        Variant::PcrGammaC,
        Variant::PcrDAc,
        Variant::PcrGammaAc,
        Variant::BaselineRidgeGrid,
        Variant::BaselinePcrCv,
    ];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            Variant::RrD => "rr-d",
            Variant::RrGamma => "rr-gamma",
            Variant::PcrDC => "pcr-d-c",
            Variant::PcrGammaC => "pcr-gamma-c",
            Variant::PcrDAc => "pcr-d-ac",
            Variant::PcrGammaAc => "pcr-gamma-ac",
            Variant::BaselineRidgeGrid => "ridge-grid",
            Variant::BaselinePcrCv => "pcr-cv",
        }
    }

    /// Display label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::RrD => "RR(d;lambda)",
            Variant::RrGamma => "RR(gamma;lambda)",
            Variant::PcrDC => "PCR(d;c)",
            Variant::PcrGammaC => "PCR(gamma;c)",
            Variant::PcrDAc => "PCR(d;a,c)",
            Variant::PcrGammaAc => "PCR(gamma;a,c)",
            Variant::BaselineRidgeGrid => "RR(grid)",
            Variant::BaselinePcrCv => "PCR(CV)",
        }
    }

    pub fn default_criterion(self) -> Criterion {
        match self {
            Variant::PcrDC | Variant::PcrGammaC => Criterion::Bic,
            _ => Criterion::Gcv,
        }
    }

    /// Weight family and ordering; `None` for the baselines.
    pub fn weight_shape(self) -> Option<(WeightFamily, ComponentOrdering)> {
        use ComponentOrdering::*;
        use WeightFamily::*;
        match self {
            Variant::RrD => Some((RidgeShrink, SingularValue)),
            Variant::RrGamma => Some((RidgeShrink, GammaSquared)),
            Variant::PcrDC | Variant::PcrDAc => Some((Expit, SingularValue)),
            Variant::PcrGammaC | Variant::PcrGammaAc => Some((Expit, GammaSquared)),
            Variant::BaselineRidgeGrid | Variant::BaselinePcrCv => None,
        }
    }

    /// Fixed-scale expit variants that end in a hard component selection.
    pub fn is_thresholding(self) -> bool {
        matches!(self, Variant::PcrDC | Variant::PcrGammaC)
    }

    pub fn tunes_scale(self) -> bool {
        matches!(self, Variant::PcrDAc | Variant::PcrGammaAc)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = WocrError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                WocrError::InvalidConfig(format!(
                    "unknown model `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub criterion: Criterion,
    /// Expit scale for `PcrDC` / `PcrGammaC`.
    pub fixed_a: f64,
    /// Brent sub-intervals; `None` picks a per-variant default.
    pub subdivisions: Option<usize>,
    /// 1-D interval tolerance relative to the search width.
    pub rel_tol: f64,
    /// Objective evaluations allowed for the 2-D search.
    pub budget: usize,
    pub seed: u64,
    pub rank_tol: f64,
    /// Ridge-grid baseline lambdas; `None` means 0.01, 0.02, ..., 200.
    pub lambda_grid: Option<Vec<f64>>,
    pub cv_folds: usize,
    /// Skip tuning and use these parameters directly.
    pub fixed_params: Option<TuningParams>,
}

impl ModelSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            criterion: variant.default_criterion(),
            fixed_a: DEFAULT_FIXED_A,
            subdivisions: None,
            rel_tol: DEFAULT_REL_TOL,
            budget: DEFAULT_BUDGET_2D,
            seed: 0,
            rank_tol: DEFAULT_RANK_TOL,
            lambda_grid: None,
            cv_folds: DEFAULT_CV_FOLDS,
            fixed_params: None,
        }
    }

    pub fn with_criterion(mut self, criterion: Criterion) -> Self {
        self.criterion = criterion;
        self
    }

    pub fn with_fixed_a(mut self, a: f64) -> Self {
        self.fixed_a = a;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_params(mut self, params: TuningParams) -> Self {
        self.fixed_params = Some(params);
        self
    }

    pub fn with_lambda_grid(mut self, grid: Vec<f64>) -> Self {
        self.lambda_grid = Some(grid);
        self
    }

    pub fn with_subdivisions(mut self, subdivisions: usize) -> Self {
        self.subdivisions = Some(subdivisions);
        self
    }

    /// Short identifier, e.g. `pcr-d-c(a=10)` when `a` differs from default.
    pub fn label(&self) -> String {
        let mut s = self.variant.label().to_string();
        if self.variant.is_thresholding() && self.fixed_a != DEFAULT_FIXED_A {
            s.push_str(&format!("[a={}]", self.fixed_a));
        }
        if self.criterion != self.variant.default_criterion()
            && self.variant != Variant::BaselinePcrCv
        {
            s.push_str(&format!("[{}]", self.criterion.name()));
        }
        s
    }

    fn validate(&self) -> Result<()> {
        if self.variant.is_thresholding() && !(self.fixed_a > 0.0 && self.fixed_a.is_finite()) {
            return Err(WocrError::InvalidParam {
                name: "a",
                value: self.fixed_a,
            });
        }
        if !(self.rel_tol > 0.0) {
            return Err(WocrError::InvalidConfig("rel_tol must be positive".into()));
        }
        if self.variant == Variant::BaselinePcrCv && self.cv_folds < 2 {
            return Err(WocrError::InvalidConfig("cv_folds must be at least 2".into()));
        }
        Ok(())
    }

    fn weight_spec(&self, params: TuningParams) -> Option<WeightSpec> {
        self.variant
            .weight_shape()
            .map(|(family, ordering)| WeightSpec::new(family, ordering, params))
    }
}

/// Outcome of tuning and finalizing a model on a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentFit {
    pub params: TuningParams,
    pub weights: Vec<f64>,
    pub sse: f64,
    pub df: f64,
    pub criterion_value: f64,
    /// Minimized smooth objective, when tuning ran.
    pub tuning: Option<TuneResult>,
}

impl ComponentFit {
    pub fn hard_components(&self) -> usize {
        self.weights.iter().filter(|&&w| w >= 0.5).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: TuningParams,
    pub weights: Vec<f64>,
    /// Coefficients on the standardized predictors.
    pub beta_tilde: Vec<f64>,
    /// Coefficients on the raw predictors; pair with `intercept`.
    pub beta_original: Vec<f64>,
    pub intercept: f64,
    pub sse: f64,
    pub df: f64,
    pub criterion_value: f64,
    pub tuning_objective: Option<f64>,
    pub evaluations: usize,
    pub effective_components: f64,
    pub hard_components: usize,
    pub singular_values: Vec<f64>,
    pub gamma: Vec<f64>,
    pub standardizer: Standardizer,
    pub n: usize,
}

impl FitResult {
    /// 1-based indices of components with weight at least one half.
    pub fn selected_components(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w >= 0.5)
            .map(|(j, _)| j + 1)
            .collect()
    }
}

/// Smooth criterion for `spec` at `params`, on a fixed basis.
pub fn criterion_at(
    spec: &ModelSpec,
    basis: &OrthoBasis,
    y_norm_sq: f64,
    params: TuningParams,
) -> Result<CriterionValue> {
    let ws = spec
        .weight_spec(params)
        .ok_or_else(|| WocrError::InvalidConfig(format!("{} has no weight function", spec.variant)))?;
    let d = basis.d().as_slice();
    let gamma = basis.gamma().as_slice();
    let w = ws.weights_from(d, gamma)?;
    let dw = ws.derivs_from(d, gamma)?;
    let sse = if spec.variant.is_thresholding() {
        criteria::sse_idempotent_form(y_norm_sq, &w, gamma)
    } else {
        criteria::sse_from_coefficients(y_norm_sq, &w, gamma)
    };
    let df = criteria::df_from(ws.ordering, &w, &dw, gamma);
    Ok(CriterionValue {
        sse,
        df,
        value: spec.criterion.objective(sse, df, basis.n()),
        criterion: spec.criterion,
    })
}

fn objective_value(spec: &ModelSpec, basis: &OrthoBasis, y_norm_sq: f64, params: TuningParams) -> f64 {
    criterion_at(spec, basis, y_norm_sq, params)
        .map(|cv| cv.value)
        .unwrap_or(f64::INFINITY)
}

/// Sub-intervals used by the 1-D search for this variant and rank.
///
/// A sharp fixed-scale expit turns the criterion into a smoothed staircase
/// with one step per component, so those variants get at least `2m` brackets.
pub fn subdivisions_for(spec: &ModelSpec, m: usize) -> usize {
    spec.subdivisions.unwrap_or(if spec.variant.is_thresholding() {
        DEFAULT_SUBDIVISIONS.max(2 * m)
    } else {
        DEFAULT_SUBDIVISIONS
    })
}

/// Tunes (unless parameters are fixed) and finalizes a weighted-component
/// model on a precomputed basis. `y_norm_sq` is `||yc||^2`.
pub fn fit_components(spec: &ModelSpec, basis: &OrthoBasis, y_norm_sq: f64) -> Result<ComponentFit> {
    spec.validate()?;
    let (family, ordering) = spec.variant.weight_shape().ok_or_else(|| {
        WocrError::InvalidConfig(format!("{} is not a weighted-component model", spec.variant))
    })?;
    let probe = WeightSpec::new(family, ordering, TuningParams::default());
    let ranges = default_range(&probe, basis);

    let (params, tuning) = match spec.fixed_params {
        Some(p) => (p, None),
        None => {
            if spec.variant.tunes_scale() {
                let res = minimize_2d(
                    |a, c| objective_value(spec, basis, y_norm_sq, TuningParams::expit(a, c)),
                    &ranges.scale,
                    &ranges.primary,
                    spec.budget,
                    spec.seed,
                )?;
                (TuningParams::expit(res.point[0], res.point[1]), Some(res))
            } else {
                let range = ranges
                    .primary
                    .with_subdivisions(subdivisions_for(spec, basis.rank()));
                let tol = spec.rel_tol * range.width();
                let to_params = |x: f64| match family {
                    WeightFamily::RidgeShrink => TuningParams::ridge(x),
                    WeightFamily::Expit => TuningParams::expit(spec.fixed_a, x),
                };
                let res = minimize_1d(
                    |x| objective_value(spec, basis, y_norm_sq, to_params(x)),
                    &range,
                    tol,
                )?;
                (to_params(res.point[0]), Some(res))
            }
        }
    };

    let gamma = basis.gamma().as_slice();
    if spec.variant.is_thresholding() {
        let c = params.c.ok_or(WocrError::MissingParam("c"))?;
        let ws = WeightSpec::new(family, ordering, params);
        let weights: Vec<f64> = basis
            .d()
            .iter()
            .zip(gamma)
            .map(|(&d, &g)| if ws.statistic(d, g) >= c { 1.0 } else { 0.0 })
            .collect();
        let sse = criteria::sse_idempotent_form(y_norm_sq, &weights, gamma).max(0.0);
        let df: f64 = weights.iter().sum();
        let criterion_value = spec.criterion.objective(sse, df, basis.n());
        Ok(ComponentFit {
            params,
            weights,
            sse,
            df,
            criterion_value,
            tuning,
        })
    } else {
        let ws = WeightSpec::new(family, ordering, params);
        let weights = ws.weights_from(basis.d().as_slice(), gamma)?;
        let cv = criterion_at(spec, basis, y_norm_sq, params)?;
        Ok(ComponentFit {
            params,
            weights,
            sse: cv.sse.max(0.0),
            df: cv.df,
            criterion_value: cv.value,
            tuning,
        })
    }
}

/// Standardizes, extracts components, tunes, and fits one model.
pub fn fit(spec: &ModelSpec, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    spec.validate()?;
    if x.nrows() < 3 {
        return Err(WocrError::TooFewRows(format!("need at least 3 rows, got {}", x.nrows())));
    }
    let (xs, yc, standardizer) = standardize(x, y)?;
    let basis = match extract_components(&xs, &yc, spec.rank_tol) {
        Err(WocrError::ZeroMatrix) => return Err(WocrError::SingularFit),
        other => other?,
    };
    let y_norm_sq = yc.norm_squared();

    let (cf, beta_tilde) = match spec.variant {
        Variant::BaselineRidgeGrid => fit_ridge_grid(spec, &xs, &yc, &basis)?,
        Variant::BaselinePcrCv => {
            let cf = fit_pcr_cv(spec, &xs, &yc, &basis)?;
            let beta = basis.coefficients(&DVector::from_column_slice(&cf.weights));
            (cf, beta)
        }
        _ => {
            let cf = fit_components(spec, &basis, y_norm_sq)?;
            let beta = basis.coefficients(&DVector::from_column_slice(&cf.weights));
            (cf, beta)
        }
    };

    let beta_original: Vec<f64> = beta_tilde
        .iter()
        .zip(&standardizer.column_scales)
        .map(|(b, s)| b / s)
        .collect();
    let intercept = standardizer.response_mean
        - beta_original
            .iter()
            .zip(&standardizer.column_means)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    let hard_components = cf.hard_components();
    Ok(FitResult {
        spec: spec.clone(),
        params: cf.params,
        effective_components: cf.weights.iter().sum(),
        hard_components,
        weights: cf.weights,
        beta_tilde: beta_tilde.iter().copied().collect(),
        beta_original,
        intercept,
        sse: cf.sse,
        df: cf.df,
        criterion_value: cf.criterion_value,
        tuning_objective: cf.tuning.as_ref().map(|t| t.objective_value),
        evaluations: cf.tuning.as_ref().map_or(0, |t| t.evaluations),
        singular_values: basis.d().iter().copied().collect(),
        gamma: basis.gamma().iter().copied().collect(),
        standardizer,
        n: x.nrows(),
    })
}

/// Predictions through the standardized path: `Xs' beta_tilde + mean(y)`.
pub fn predict(fit: &FitResult, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    let xs = fit.standardizer.transform_x(x_new)?;
    let beta = DVector::from_column_slice(&fit.beta_tilde);
    Ok((xs * beta).add_scalar(fit.standardizer.response_mean))
}

/// Predictions from raw-scale coefficients: `X' beta + intercept`.
pub fn predict_with_coefficients(
    beta_original: &[f64],
    intercept: f64,
    x_new: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if x_new.ncols() != beta_original.len() {
        return Err(WocrError::DimensionMismatch(format!(
            "expected {} columns, got {}",
            beta_original.len(),
            x_new.ncols()
        )));
    }
    Ok((x_new * DVector::from_column_slice(beta_original)).add_scalar(intercept))
}

/// Default ridge-grid lambdas: 0.01, 0.02, ..., 200.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=20_000).map(|i| i as f64 / 100.0).collect()
}

/// Conventional ridge tuning: solve the penalized normal equations at every
/// grid value and keep the GCV (or chosen criterion) minimizer.
///
/// Works on the `p x p` Gram matrix when `p <= n` and on the `n x n` kernel
/// matrix otherwise. Returns `(lambda, criterion value)` at the argmin.
pub fn ridge_grid_search(
    xs: &DMatrix<f64>,
    yc: &DVector<f64>,
    grid: &[f64],
    criterion: Criterion,
) -> Result<(f64, f64)> {
    let solver = DirectRidge::new(xs, yc);
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let Some(sol) = solver.solve(lambda, true) else { continue };
        let v = criterion.objective(sol.sse, sol.df, xs.nrows());
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((lambda, v));
        }
    }
    match best {
        Some((l, v)) if v.is_finite() => Ok((l, v)),
        _ => Err(WocrError::AllInfinite),
    }
}

/// Direct ridge solves against a cached Gram or kernel matrix.
pub struct DirectRidge<'a> {
    xs: &'a DMatrix<f64>,
    yc: &'a DVector<f64>,
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    primal: bool,
}

pub struct RidgeSolution {
    pub beta: DVector<f64>,
    pub fitted: DVector<f64>,
    pub sse: f64,
    pub df: f64,
}

impl<'a> DirectRidge<'a> {
    pub fn new(xs: &'a DMatrix<f64>, yc: &'a DVector<f64>) -> Self {
        let primal = xs.ncols() <= xs.nrows();
        let (gram, rhs) = if primal {
            (xs.tr_mul(xs), xs.tr_mul(yc))
        } else {
            (xs * xs.transpose(), yc.clone())
        };
        Self {
            xs,
            yc,
            gram,
            rhs,
            primal,
        }
    }

    /// `None` when `G + lambda I` is not positive definite.
    pub fn solve(&self, lambda: f64, with_df: bool) -> Option<RidgeSolution> {
        let k = self.gram.nrows();
        let mut a = self.gram.clone();
        for i in 0..k {
            a[(i, i)] += lambda;
        }
        let chol = Cholesky::new(a)?;
        let sol = chol.solve(&self.rhs);
        let (beta, fitted) = if self.primal {
            let fitted = self.xs * &sol;
            (sol, fitted)
        } else {
            let beta = self.xs.tr_mul(&sol);
            let fitted = &self.gram * &sol;
            (beta, fitted)
        };
        let sse = (self.yc - &fitted).norm_squared();
        // tr(H) = tr((G + lambda I)^-1 G) = k - lambda tr((G + lambda I)^-1)
        let df = if with_df {
            let inv = chol.inverse();
            k as f64 - lambda * inv.trace()
        } else {
            f64::NAN
        };
        Some(RidgeSolution {
            beta,
            fitted,
            sse,
            df,
        })
    }
}

fn fit_ridge_grid(
    spec: &ModelSpec,
    xs: &DMatrix<f64>,
    yc: &DVector<f64>,
    basis: &OrthoBasis,
) -> Result<(ComponentFit, DVector<f64>)> {
    let owned;
    let grid: &[f64] = match &spec.lambda_grid {
        Some(g) => g,
        None => {
            owned = default_lambda_grid();
            &owned
        }
    };
    if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(WocrError::InvalidConfig("lambda grid must be non-empty and nonnegative".into()));
    }
    let (lambda, value) = ridge_grid_search(xs, yc, grid, spec.criterion)?;
    let sol = DirectRidge::new(xs, yc)
        .solve(lambda, true)
        .ok_or(WocrError::SingularFit)?;
    let weights: Vec<f64> = basis
        .d()
        .iter()
        .map(|d| if lambda == 0.0 { 1.0 } else { d * d / (d * d + lambda) })
        .collect();
    Ok((
        ComponentFit {
            params: TuningParams::ridge(lambda),
            weights,
            sse: sol.sse,
            df: sol.df,
            criterion_value: value,
            tuning: Some(TuneResult {
                point: vec![lambda],
                objective_value: value,
                evaluations: grid.len(),
                trace: None,
            }),
        },
        sol.beta,
    ))
}

/// Cross-validated squared error of hard PCR for each `k = 0..=k_max`.
///
/// Folds come from a seeded shuffle; each training fold is standardized and
/// decomposed on its own.
pub fn pcr_cv_errors(
    xs: &DMatrix<f64>,
    yc: &DVector<f64>,
    folds: usize,
    k_max: usize,
    seed: u64,
    rank_tol: f64,
) -> Result<Vec<f64>> {
    let n = xs.nrows();
    let folds = folds.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let mut errors = vec![0.0; k_max + 1];
    let mut usable = k_max;
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        if test.is_empty() {
            continue;
        }
        let x_tr = xs.select_rows(&train);
        let y_tr = DVector::from_iterator(train.len(), train.iter().map(|&i| yc[i]));
        let (xs_tr, yc_tr, st) = standardize(&x_tr, &y_tr)?;
        let basis = extract_components(&xs_tr, &yc_tr, rank_tol)?;
        let xs_te = st.transform_x(&xs.select_rows(&test))?;
        let scores = &xs_te * basis.v();
        let m = basis.rank();
        usable = usable.min(m);
        for (r, &i) in test.iter().enumerate() {
            let mut pred = st.response_mean;
            let resid0 = yc[i] - pred;
            errors[0] += resid0 * resid0;
            for j in 0..k_max.min(m) {
                pred += basis.gamma()[j] * scores[(r, j)] / basis.d()[j];
                let resid = yc[i] - pred;
                errors[j + 1] += resid * resid;
            }
        }
    }
    errors.truncate(usable + 1);
    Ok(errors.into_iter().map(|e| e / n as f64).collect())
}

fn fit_pcr_cv(
    spec: &ModelSpec,
    xs: &DMatrix<f64>,
    yc: &DVector<f64>,
    basis: &OrthoBasis,
) -> Result<ComponentFit> {
    let m = basis.rank();
    let errors = pcr_cv_errors(xs, yc, spec.cv_folds, m, spec.seed, spec.rank_tol)?;
    // strict comparison keeps the smaller k on ties
    let mut k = 0;
    for (j, &e) in errors.iter().enumerate() {
        if e < errors[k] {
            k = j;
        }
    }
    let weights: Vec<f64> = (0..m).map(|j| if j < k { 1.0 } else { 0.0 }).collect();
    let sse = criteria::sse_idempotent_form(yc.norm_squared(), &weights, basis.gamma().as_slice())
        .max(0.0);
    let df = k as f64;
    Ok(ComponentFit {
        params: TuningParams::default(),
        criterion_value: spec.criterion.objective(sse, df, basis.n()),
        weights,
        sse,
        df,
        tuning: Some(TuneResult {
            point: vec![k as f64],
            objective_value: errors[k],
            evaluations: errors.len(),
            trace: None,
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    /// 1-based component index.
    pub j: usize,
    pub d: f64,
    pub gamma: f64,
    pub w: f64,
}

pub fn component_report(fit: &FitResult) -> Vec<ComponentRow> {
    fit.singular_values
        .iter()
        .zip(&fit.gamma)
        .zip(&fit.weights)
        .enumerate()
        .map(|(j, ((&d, &gamma), &w))| ComponentRow {
            j: j + 1,
            d,
            gamma,
            w,
        })
        .collect()
}

/// CSV rendering with shortest round-trip float formatting.
pub fn report_to_csv(rows: &[ComponentRow]) -> String {
    let mut out = String::from("j,d,gamma,w\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.j, r.d, r.gamma, r.w));
    }
    out
}

pub fn report_from_csv(text: &str) -> Result<Vec<ComponentRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("j,d,gamma,w") => {}
        other => {
            return Err(WocrError::InvalidConfig(format!("unexpected report header {other:?}")));
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || WocrError::InvalidConfig(format!("malformed report row {}: {line}", i + 2));
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 4 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(ComponentRow {
                j: cells[0].parse().map_err(|_| bad())?,
                d: num(cells[1])?,
                gamma: num(cells[2])?,
                w: num(cells[3])?,
            })
        })
        .collect()
}
