//! Simulation benchmarks and the repeated train/test split protocol.
//!
//! Three data generators are provided:
//!
//! * Model A: `X ~ N(0, Sigma)` with `Sigma_jk = rho^|j-k|`, response
//!   `y = sum_j b_j u_j + eps` on the realized training components.
//! * Model B: `0.1 exp(4 x1) + 4 expit(20 (x2 - 0.5)) + 3 x3 + 2 x4 + x5 + eps`.
//! * Model C: `10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + x5 + eps`.
//!
//! For Model A the test responses share the training signal: test rows are
//! standardized with the training transform and mapped through
//! `beta = sum_j b_j v_j / d_j`.
//!
//! Every run draws from its own ChaCha stream keyed by `(seed, run)`, so
//! results do not depend on scheduling.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::{extract_components, standardize, DEFAULT_RANK_TOL};
use crate::error::{Result, WocrError};
use crate::models::{fit, predict, ModelSpec};
use crate::weights::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    ModelA,
    ModelB,
    ModelC,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub generator: Generator,
    pub n: usize,
    pub p: usize,
    /// AR(1) correlation, Model A only.
    pub rho: f64,
    pub sigma2: f64,
    /// Component coefficients, Model A only; default `(m - j + 1) / 10`.
    pub b: Option<Vec<f64>>,
    pub runs: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(generator: Generator, n: usize, p: usize) -> Self {
        Self {
            generator,
            n,
            p,
            rho: 0.5,
            sigma2: 1.0,
            b: None,
            runs: 200,
            test_size: 500,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(WocrError::InvalidConfig(msg));
        if self.n < 3 {
            return bad(format!("n must be at least 3, got {}", self.n));
        }
        if self.p == 0 || self.runs == 0 || self.test_size == 0 {
            return bad("p, runs and test_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return bad(format!("sigma2 must be nonnegative, got {}", self.sigma2));
        }
        match self.generator {
            Generator::ModelA => {
                if let Some(b) = &self.b {
                    if b.len() != self.n.min(self.p) {
                        return bad(format!(
                            "b has {} entries, expected min(n, p) = {}",
                            b.len(),
                            self.n.min(self.p)
                        ));
                    }
                }
            }
            Generator::ModelB | Generator::ModelC => {
                if self.p < 5 {
                    return bad(format!("models B and C need p >= 5, got {}", self.p));
                }
            }
        }
        Ok(())
    }

    /// Model A coefficients actually used (explicit or default).
    pub fn coefficients(&self) -> Vec<f64> {
        let m = self.n.min(self.p);
        self.b
            .clone()
            .unwrap_or_else(|| (1..=m).map(|j| (m - j + 1) as f64 / 10.0).collect())
    }
}

/// Noise-free Model B mean for one row (first five predictors used).
pub fn model_b_mean(x: &[f64]) -> f64 {
    0.1 * (4.0 * x[0]).exp() + 4.0 * expit(20.0 * (x[1] - 0.5)) + 3.0 * x[2] + 2.0 * x[3] + x[4]
}

/// Noise-free Model C mean for one row (first five predictors used).
pub fn model_c_mean(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
        + 20.0 * (x[2] - 0.5).powi(2)
        + 10.0 * x[3]
        + x[4]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub x_train: DMatrix<f64>,
    pub y_train: DVector<f64>,
    pub x_test: DMatrix<f64>,
    pub y_test: DVector<f64>,
}

/// Data generator with the AR(1) Cholesky factor computed once.
pub struct SimGenerator {
    config: SimConfig,
    chol_lower: Option<DMatrix<f64>>,
}

/// RNG for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl SimGenerator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let chol_lower = match config.generator {
            Generator::ModelA => {
                let p = config.p;
                let sigma = DMatrix::from_fn(p, p, |i, j| config.rho.powi(i.abs_diff(j) as i32));
                let chol = Cholesky::new(sigma).ok_or_else(|| {
                    WocrError::InvalidConfig("AR(1) covariance is not positive definite".into())
                })?;
                Some(chol.unpack())
            }
            _ => None,
        };
        Ok(Self { config, chol_lower })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn generate(&self, run_index: usize) -> Result<SimData> {
        let cfg = &self.config;
        let mut rng = stream_rng(cfg.seed, run_index as u64);
        let sigma = cfg.sigma2.sqrt();
        match cfg.generator {
            Generator::ModelA => {
                let l = self.chol_lower.as_ref().expect("factor for model A");
                let x_train = self.gaussian_design(&mut rng, cfg.n, l);
                let x_test = self.gaussian_design(&mut rng, cfg.test_size, l);
                let (xs, _, st) = standardize(&x_train, &DVector::zeros(cfg.n))?;
                let basis = extract_components(&xs, &DVector::zeros(cfg.n), DEFAULT_RANK_TOL)?;
                let b_full = cfg.coefficients();
                let m = basis.rank();
                let b = DVector::from_iterator(m, b_full.iter().take(m).copied());
                let mean_train = basis.u() * &b;
                let scaled = DVector::from_iterator(m, (0..m).map(|j| b[j] / basis.d()[j]));
                let beta = basis.v() * scaled;
                let mean_test = st.transform_x(&x_test)? * beta;
                let y_train = add_noise(&mut rng, mean_train, sigma);
                let y_test = add_noise(&mut rng, mean_test, sigma);
                Ok(SimData {
                    x_train,
                    y_train,
                    x_test,
                    y_test,
                })
            }
            Generator::ModelB | Generator::ModelC => {
                let mean_fn = if cfg.generator == Generator::ModelB {
                    model_b_mean
                } else {
                    model_c_mean
                };
                let (x_train, y_train) = uniform_sample(&mut rng, cfg.n, cfg.p, sigma, mean_fn);
                let (x_test, y_test) = uniform_sample(&mut rng, cfg.test_size, cfg.p, sigma, mean_fn);
                Ok(SimData {
                    x_train,
                    y_train,
                    x_test,
                    y_test,
                })
            }
        }
    }

    fn gaussian_design(&self, rng: &mut ChaCha8Rng, rows: usize, l: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.config.p;
        let z = DMatrix::from_fn(rows, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        // rows of Z L^T have covariance L L^T
        z * l.transpose()
    }
}

fn add_noise(rng: &mut ChaCha8Rng, mean: DVector<f64>, sigma: f64) -> DVector<f64> {
    let mut y = mean;
    for v in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += sigma * e;
    }
    y
}

fn uniform_sample(
    rng: &mut ChaCha8Rng,
    rows: usize,
    p: usize,
    sigma: f64,
    mean_fn: fn(&[f64]) -> f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut x = DMatrix::zeros(rows, p);
    let mut y = DVector::zeros(rows);
    let mut row = vec![0.0; p];
    for i in 0..rows {
        for (j, r) in row.iter_mut().enumerate() {
            *r = rng.random::<f64>();
            x[(i, j)] = *r;
        }
        let e: f64 = rng.sample(StandardNormal);
        y[i] = mean_fn(&row) + sigma * e;
    }
    (x, y)
}

/// Draws one replicate for `config`.
pub fn generate(config: &SimConfig, run_index: usize) -> Result<SimData> {
    SimGenerator::new(config.clone())?.generate(run_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub method: String,
    pub mse: Option<f64>,
    pub hard_components: Option<usize>,
    pub effective_components: Option<f64>,
    /// 1-based indices of components with weight >= 0.5.
    pub selected: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub spec: ModelSpec,
    pub average_mse: f64,
    pub se_mse: f64,
    pub median_components: f64,
    pub median_effective_components: f64,
    pub successful_runs: usize,
    pub failed_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchSource {
    Simulation(SimConfig),
    Split {
        n: usize,
        p: usize,
        ratio: f64,
        runs: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub source: BenchSource,
    pub methods: Vec<MethodSummary>,
    pub runs: Vec<RunRecord>,
    pub notes: Vec<String>,
}

/// Total wall-clock seconds spent fitting each method, in method order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub fit_seconds: Vec<f64>,
}

/// Sum with a fixed pairwise reduction tree.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Median; average of the two middle values for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// `(mean, sd / sqrt(k))`; the standard error is 0 for a single value.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let sd = (pairwise_sum(&dev) / (k as f64 - 1.0)).sqrt();
    (mean, sd / (k as f64).sqrt())
}

fn mix_seed(base: u64, run: usize) -> u64 {
    // splitmix64 step
    let mut z = base ^ (run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Outcome {
    record: RunRecord,
    seconds: f64,
}

fn evaluate_methods(
    run: usize,
    data: &SimData,
    methods: &[ModelSpec],
    seed: u64,
) -> Vec<Outcome> {
    methods
        .iter()
        .map(|spec| {
            let spec = spec.clone().with_seed(mix_seed(seed ^ spec.seed, run));
            let start = Instant::now();
            let result = fit(&spec, &data.x_train, &data.y_train).and_then(|f| {
                let pred = predict(&f, &data.x_test)?;
                let mse = (&data.y_test - pred).norm_squared() / data.y_test.len() as f64;
                Ok((f, mse))
            });
            let seconds = start.elapsed().as_secs_f64();
            let method = spec.label();
            let record = match result {
                Ok((f, mse)) => RunRecord {
                    run,
                    method,
                    mse: Some(mse),
                    hard_components: Some(f.hard_components),
                    effective_components: Some(f.effective_components),
                    selected: f.selected_components(),
                    error: None,
                },
                Err(e) => RunRecord {
                    run,
                    method,
                    mse: None,
                    hard_components: None,
                    effective_components: None,
                    selected: Vec::new(),
                    error: Some(e.to_string()),
                },
            };
            Outcome { record, seconds }
        })
        .collect()
}

fn summarize(
    source: BenchSource,
    methods: &[ModelSpec],
    per_run: Vec<Vec<Outcome>>,
    mut notes: Vec<String>,
) -> (BenchReport, Timings) {
    let mut summaries = Vec::with_capacity(methods.len());
    let mut fit_seconds = vec![0.0; methods.len()];
    for (k, spec) in methods.iter().enumerate() {
        let recs: Vec<&Outcome> = per_run.iter().map(|r| &r[k]).collect();
        let mses: Vec<f64> = recs.iter().filter_map(|o| o.record.mse).collect();
        let comps: Vec<f64> = recs
            .iter()
            .filter_map(|o| o.record.hard_components.map(|c| c as f64))
            .collect();
        let eff: Vec<f64> = recs.iter().filter_map(|o| o.record.effective_components).collect();
        let (average_mse, se_mse) = mean_and_se(&mses);
        let failed = recs.len() - mses.len();
        if failed > 0 {
            notes.push(format!("{}: {} failed run(s)", spec.label(), failed));
        }
        fit_seconds[k] = pairwise_sum(&recs.iter().map(|o| o.seconds).collect::<Vec<_>>());
        summaries.push(MethodSummary {
            method: spec.label(),
            spec: spec.clone(),
            average_mse,
            se_mse,
            median_components: median(&comps),
            median_effective_components: median(&eff),
            successful_runs: mses.len(),
            failed_runs: failed,
        });
    }
    let runs = per_run
        .into_iter()
        .flat_map(|r| r.into_iter().map(|o| o.record))
        .collect();
    (
        BenchReport {
            source,
            methods: summaries,
            runs,
            notes,
        },
        Timings { fit_seconds },
    )
}

/// Runs every method on `config.runs` simulated replicates.
pub fn run_benchmark(config: &SimConfig, methods: &[ModelSpec]) -> Result<BenchReport> {
    run_benchmark_timed(config, methods).map(|(r, _)| r)
}

/// As [`run_benchmark`], also returning per-method fitting time.
pub fn run_benchmark_timed(
    config: &SimConfig,
    methods: &[ModelSpec],
) -> Result<(BenchReport, Timings)> {
    if methods.is_empty() {
        return Err(WocrError::InvalidConfig("no methods requested".into()));
    }
    let generator = SimGenerator::new(config.clone())?;
    let per_run: Vec<Vec<Outcome>> = (0..config.runs)
        .into_par_iter()
        .map(|run| match generator.generate(run) {
            Ok(data) => evaluate_methods(run, &data, methods, config.seed),
            Err(e) => failed_run(run, methods, &e),
        })
        .collect();
    let mut notes = Vec::new();
    if config.generator == Generator::ModelA {
        notes.push(
            "model A test responses use the training signal beta = sum_j b_j v_j / d_j".into(),
        );
    }
    Ok(summarize(
        BenchSource::Simulation(config.clone()),
        methods,
        per_run,
        notes,
    ))
}

fn failed_run(run: usize, methods: &[ModelSpec], err: &WocrError) -> Vec<Outcome> {
    methods
        .iter()
        .map(|spec| Outcome {
            record: RunRecord {
                run,
                method: spec.label(),
                mse: None,
                hard_components: None,
                effective_components: None,
                selected: Vec::new(),
                error: Some(err.to_string()),
            },
            seconds: 0.0,
        })
        .collect()
}

/// Training-set size for a split ratio.
pub fn train_size(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Repeated random train/test splits of a user data set.
pub fn split_protocol(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    ratio: f64,
    runs: usize,
    methods: &[ModelSpec],
    seed: u64,
) -> Result<BenchReport> {
    split_protocol_timed(x, y, ratio, runs, methods, seed).map(|(r, _)| r)
}

pub fn split_protocol_timed(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    ratio: f64,
    runs: usize,
    methods: &[ModelSpec],
    seed: u64,
) -> Result<(BenchReport, Timings)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(WocrError::InvalidConfig(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    if methods.is_empty() || runs == 0 {
        return Err(WocrError::InvalidConfig("need at least one method and one run".into()));
    }
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(WocrError::DimensionMismatch(format!(
            "response has {} entries but design has {} rows",
            y.len(),
            n
        )));
    }
    let n_train = train_size(n, ratio);
    let mut notes = Vec::new();
    if n_train < p + 2 {
        notes.push(
            WocrError::TooFewRows(format!(
                "training split has {n_train} rows for {p} predictors; full-rank baselines are unreliable"
            ))
            .to_string(),
        );
    }
    let per_run: Vec<Vec<Outcome>> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut stream_rng(seed, run as u64));
            let (tr, te) = idx.split_at(n_train);
            let data = SimData {
                x_train: x.select_rows(tr),
                y_train: DVector::from_iterator(tr.len(), tr.iter().map(|&i| y[i])),
                x_test: x.select_rows(te),
                y_test: DVector::from_iterator(te.len(), te.iter().map(|&i| y[i])),
            };
            evaluate_methods(run, &data, methods, seed)
        })
        .collect();
    Ok(summarize(
        BenchSource::Split {
            n,
            p,
            ratio,
            runs,
            seed,
        },
        methods,
        per_run,
        notes,
    ))
}

impl BenchReport {
    /// Aligned text table: one row per method with MSE mean, SE, and
    /// median component count, plus fitting time when supplied.
    pub fn to_table(&self, timings: Option<&Timings>) -> String {
        let width = self
            .methods
            .iter()
            .map(|m| m.method.len())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut out = format!(
            "{:<width$}  {:>12}  {:>10}  {:>8}  {:>8}",
            "method", "average-MSE", "SE-MSE", "# comps", "failed"
        );
        if timings.is_some() {
            out.push_str(&format!("  {:>10}", "time (s)"));
        }
        out.push('\n');
        for (k, m) in self.methods.iter().enumerate() {
            out.push_str(&format!(
                "{:<width$}  {:>12.4}  {:>10.4}  {:>8}  {:>8}",
                m.method, m.average_mse, m.se_mse, m.median_components, m.failed_runs
            ));
            if let Some(t) = timings {
                out.push_str(&format!("  {:>10.3}", t.fit_seconds[k]));
            }
            out.push('\n');
        }
        out
    }

    pub fn method(&self, label: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == label)
    }
}
