mod artifact;
mod data;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wocr::bench::{run_benchmark_timed, split_protocol_timed, BenchReport, Generator, SimConfig, Timings};
use wocr::models::{predict_with_coefficients, report_to_csv};
use wocr::{fit, Criterion, ModelSpec, Variant, WocrError};

use artifact::FitArtifact;
use data::Table;

#[derive(Debug)]
pub enum CliError {
    /// Bad input or flags; exit code 2.
    Input(String),
    /// The model could not be fitted; exit code 3.
    Fit(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Fit(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Fit(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "wocr", version, about = "Weighted orthogonal components regression")]
struct Cli {
    /// Worker threads for benchmarks (default: all cores).
    #[arg(long, global = true, env = "WOCR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV file and write the fit as JSON.
    Fit(FitArgs),
    /// Predict from a saved fit.
    Predict(PredictArgs),
    /// Run a simulation benchmark or a repeated-split study on a CSV file.
    Bench(BenchArgs),
    /// Per-component diagnostics (j, d, gamma, w) of a saved fit.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    #[value(name = "rr-d")]
    RrD,
    #[value(name = "rr-gamma")]
    RrGamma,
    #[value(name = "pcr-d-c")]
    PcrDC,
    #[value(name = "pcr-gamma-c")]
    PcrGammaC,
    #[value(name = "pcr-d-ac")]
    PcrDAc,
    #[value(name = "pcr-gamma-ac")]
    PcrGammaAc,
    #[value(name = "ridge-grid")]
    RidgeGrid,
    #[value(name = "pcr-cv")]
    PcrCv,
}

impl From<ModelArg> for Variant {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::RrD => Variant::RrD,
            ModelArg::RrGamma => Variant::RrGamma,
            ModelArg::PcrDC => Variant::PcrDC,
            ModelArg::PcrGammaC => Variant::PcrGammaC,
            ModelArg::PcrDAc => Variant::PcrDAc,
            ModelArg::PcrGammaAc => Variant::PcrGammaAc,
            ModelArg::RidgeGrid => Variant::BaselineRidgeGrid,
            ModelArg::PcrCv => Variant::BaselinePcrCv,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    Gcv,
    Aic,
    Bic,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Gcv => Criterion::Gcv,
            CriterionArg::Aic => Criterion::Aic,
            CriterionArg::Bic => Criterion::Bic,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "C", alias = "c")]
    C,
}

#[derive(Args)]
struct ModelOpts {
    /// Criterion override (default depends on the model).
    #[arg(long, value_enum)]
    criterion: Option<CriterionArg>,
    /// Fixed expit scale for pcr-d-c and pcr-gamma-c.
    #[arg(long)]
    a: Option<f64>,
    /// Seed for the 2-D search and cross-validation folds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelOpts {
    fn spec(&self, variant: Variant) -> Result<ModelSpec, CliError> {
        let mut spec = ModelSpec::new(variant).with_seed(self.seed);
        if let Some(c) = self.criterion {
            spec = spec.with_criterion(c.into());
        }
        if let Some(a) = self.a {
            if !(a > 0.0) || !a.is_finite() {
                return Err(CliError::Input(format!("--a must be a positive number, got {a}")));
            }
            spec = spec.with_fixed_a(a);
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct FitArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column; all other columns are predictors.
    #[arg(long)]
    response: String,
    #[arg(long, value_enum)]
    model: ModelArg,
    #[command(flatten)]
    opts: ModelOpts,
    /// Where to write the fit JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Standard-output format: summary table, fit JSON, or component CSV.
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct PredictArgs {
    /// Fit JSON written by `wocr fit`.
    #[arg(long)]
    fit: PathBuf,
    /// CSV containing (at least) the predictor columns used for fitting.
    #[arg(long)]
    data: PathBuf,
    /// Where to write predictions (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Simulation generator; mutually exclusive with --data.
    #[arg(long, value_enum, conflicts_with = "data", required_unless_present = "data")]
    gen: Option<GeneratorArg>,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// AR(1) correlation for generator A.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Noise variance.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Comma-separated generator A coefficients (length min(n, p)).
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<f64>>,
    #[arg(long, default_value_t = 500)]
    test_size: usize,
    /// Repeated-split mode: CSV data set to split.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Response column for --data.
    #[arg(long, requires = "data")]
    response: Option<String>,
    /// Training fraction for --data.
    #[arg(long, default_value_t = 0.667)]
    ratio: f64,
    /// Methods to compare (default: all eight).
    #[arg(long, value_enum, value_delimiter = ',')]
    models: Option<Vec<ModelArg>>,
    #[arg(long, value_enum)]
    criterion: Option<CriterionArg>,
    /// Fixed expit scale for pcr-d-c and pcr-gamma-c.
    #[arg(long)]
    a: Option<f64>,
    /// Lambda grid for ridge-grid as start:step:end (default 0.01:0.01:200).
    #[arg(long, value_parser = parse_grid)]
    lambda_grid: Option<Grid>,
    /// Where to write the report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write per-method fitting time as JSON.
    #[arg(long)]
    timing: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn read_fit(path: &Path) -> Result<FitArtifact, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let fit: FitArtifact = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: invalid fit file: {e}", path.display())))?;
    fit.validate()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(fit)
}

fn fmt_param(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn summary(a: &FitArtifact) -> String {
    let mut s = String::new();
    s.push_str(&format!("model        {}\n", a.variant));
    s.push_str(&format!("criterion    {} = {:.6}\n", a.criterion, a.criterion_value));
    s.push_str(&format!(
        "params       lambda {}  a {}  c {}\n",
        fmt_param(a.params.lambda),
        fmt_param(a.params.a),
        fmt_param(a.params.c)
    ));
    s.push_str(&format!("sse          {:.6}\n", a.sse));
    s.push_str(&format!("df           {:.6}\n", a.df));
    s.push_str(&format!(
        "components   {} hard, {:.4} effective, {} total\n",
        a.hard_components,
        a.effective_components,
        a.weights.len()
    ));
    s
}

fn components_table(a: &FitArtifact) -> String {
    let mut s = format!("{:>4}  {:>14}  {:>14}  {:>10}\n", "j", "d", "gamma", "w");
    for r in a.component_rows() {
        s.push_str(&format!("{:>4}  {:>14.6}  {:>14.6}  {:>10.6}\n", r.j, r.d, r.gamma, r.w));
    }
    s
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let spec = args.opts.spec(args.model.into())?;
    let table = Table::read(&args.data)?;
    let (x, y, names) = table.design(&args.response)?;
    let result = fit(&spec, &x, &y).map_err(|e| match e {
        WocrError::ConstantColumn(j) => {
            CliError::Fit(format!("fit failed: predictor `{}` is constant", names[j]))
        }
        e => CliError::Fit(format!("fit failed: {e}")),
    })?;
    let artifact = FitArtifact::new(&result, names);
    let json = to_json(&artifact);
    if let Some(out) = &args.out {
        write_output(Some(out), &json)?;
    }
    match args.format {
        Format::Table => print!("{}", summary(&artifact)),
        Format::Json if args.out.is_none() => print!("{json}"),
        Format::Json => print!("{}", summary(&artifact)),
        Format::Csv => print!("{}", report_to_csv(&artifact.component_rows())),
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let fit = read_fit(&args.fit)?;
    let table = Table::read(&args.data)?;
    let x = table.columns(&fit.column_names)?;
    let pred = predict_with_coefficients(&fit.beta_original, fit.intercept, &x)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let text = match args.format {
        Format::Json => to_json(&pred.as_slice()),
        Format::Csv | Format::Table => {
            let mut s = String::from("prediction\n");
            for v in pred.iter() {
                s.push_str(&format!("{v}\n"));
            }
            s
        }
    };
    write_output(args.out.as_deref(), &text)
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let fit = read_fit(&args.fit)?;
    let text = match args.format {
        Format::Csv => report_to_csv(&fit.component_rows()),
        Format::Json => to_json(&fit.component_rows()),
        Format::Table => components_table(&fit),
    };
    write_output(args.out.as_deref(), &text)
}

fn bench_specs(args: &BenchArgs) -> Result<Vec<ModelSpec>, CliError> {
    let opts = ModelOpts {
        criterion: args.criterion,
        a: args.a,
        seed: 0,
    };
    let variants: Vec<Variant> = match &args.models {
        Some(ms) if ms.is_empty() => return Err(CliError::Input("--models is empty".into())),
        Some(ms) => ms.iter().map(|&m| m.into()).collect(),
        None => Variant::ALL.to_vec(),
    };
    variants
        .into_iter()
        .map(|v| {
            let spec = opts.spec(v)?;
            Ok(match &args.lambda_grid {
                Some(g) => spec.with_lambda_grid(g.0.clone()),
                None => spec,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect::<Result<_, _>>()?;
    let [start, step, end] = parts[..] else {
        return Err("expected start:step:end".into());
    };
    if !(start >= 0.0 && step > 0.0 && end >= start) {
        return Err("need 0 <= start <= end and step > 0".into());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    if count > 10_000_000 {
        return Err("grid too large".into());
    }
    Ok(Grid((0..count).map(|i| start + step * i as f64).collect()))
}

fn bench_csv(report: &BenchReport) -> String {
    let mut s = String::from("method,average_mse,se_mse,median_components,median_effective_components,failed_runs\n");
    for m in &report.methods {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.method, m.average_mse, m.se_mse, m.median_components, m.median_effective_components, m.failed_runs
        ));
    }
    s
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let specs = bench_specs(args)?;
    let (report, timings): (BenchReport, Timings) = match (&args.data, args.gen) {
        (Some(path), _) => {
            let response = args
                .response
                .as_deref()
                .ok_or_else(|| CliError::Input("--data needs --response".into()))?;
            let table = Table::read(path)?;
            let (x, y, _) = table.design(response)?;
            split_protocol_timed(&x, &y, args.ratio, args.runs, &specs, args.seed)
                .map_err(|e| CliError::Input(e.to_string()))?
        }
        (None, Some(g)) => {
            let generator = match g {
                GeneratorArg::A => Generator::ModelA,
                GeneratorArg::B => Generator::ModelB,
                GeneratorArg::C => Generator::ModelC,
            };
            let mut cfg = SimConfig::new(generator, args.n, args.p);
            cfg.runs = args.runs;
            cfg.seed = args.seed;
            cfg.rho = args.rho;
            cfg.sigma2 = args.sigma2;
            cfg.b = args.b.clone();
            cfg.test_size = args.test_size;
            cfg.validate().map_err(|e| CliError::Input(e.to_string()))?;
            run_benchmark_timed(&cfg, &specs).map_err(|e| CliError::Input(e.to_string()))?
        }
        (None, None) => return Err(CliError::Input("either --gen or --data is required".into())),
    };
    let json = to_json(&report);
    if let Some(out) = &args.out {
        write_output(Some(out), &json)?;
    }
    if let Some(path) = &args.timing {
        let rows: Vec<serde_json::Value> = report
            .methods
            .iter()
            .zip(&timings.fit_seconds)
            .map(|(m, t)| serde_json::json!({ "method": m.method, "fit_seconds": t }))
            .collect();
        write_output(Some(path), &to_json(&rows))?;
    }
    match args.format {
        Format::Table => print!("{}", report.to_table(Some(&timings))),
        Format::Json if args.out.is_none() => print!("{json}"),
        Format::Json => print!("{}", report.to_table(Some(&timings))),
        Format::Csv => print!("{}", bench_csv(&report)),
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    Ok(())
}


fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
