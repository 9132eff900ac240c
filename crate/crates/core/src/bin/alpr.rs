use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alpr::classify::{Classifier, PrunedModel};
use alpr::harness::{
    export_trace, grid_search, load_csv, load_csv_for_evaluation, load_model, run_experiment,
    save_csv, save_model, tune_baseline, write_report, DataSource, ExperimentSpec, Method,
    Validation,
};
use alpr::synthetic::{generate, ThreeRingSpec};
use alpr::{fit, AlprError, SolverConfig};

#[derive(Parser)]
#[command(name = "alpr", version, about = "Adaptive locality preserving regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate three-ring synthetic data as CSV.
    Gen(GenArgs),
    /// Fit a model on a CSV dataset and save it.
    Fit(FitArgs),
    /// Classify a CSV dataset with a saved model.
    Predict(PredictArgs),
    /// Repeated-split evaluation of one or more methods.
    Eval(EvalArgs),
    /// Two-pass grid search over lambda1 and lambda2.
    Grid(GridArgs),
    /// Fit and write the per-iteration objective trace.
    Trace(TraceArgs),
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.1)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda2: f64,
    #[arg(long, default_value_t = 1e-4)]
    rho: f64,
    #[arg(long, default_value_t = 5)]
    knn_init: usize,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    epsilon_dist: f64,
    #[arg(long, default_value_t = 1e-8)]
    epsilon_row: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            knn_init: self.knn_init,
            epsilon_dist: self.epsilon_dist,
            epsilon_row: self.epsilon_row,
            rho: self.rho,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// `th1` (amplitude 20) or `th2` (amplitude 2000); other flags override it.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    radial_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

impl GenArgs {
    fn spec(&self) -> Result<ThreeRingSpec, String> {
        let mut spec = match self.preset.as_deref() {
            None | Some("th1") => ThreeRingSpec::th1(self.seed),
            Some("th2") => ThreeRingSpec::th2(self.seed),
            Some(other) => return Err(format!("unknown preset {other:?} (expected th1 or th2)")),
        };
        if let Some(n) = self.samples_per_class {
            spec.samples_per_class = n;
        }
        if let Some(a) = self.amplitude {
            spec.noise_amplitude = a;
        }
        if let Some(s) = self.radial_sigma {
            spec.radial_sigma = s;
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Also write the objective trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write one predicted label per line here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// CSV dataset; mutually exclusive with --preset.
    #[arg(long, conflicts_with = "preset")]
    data: Option<PathBuf>,
    /// Synthetic source: th1 or th2.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long)]
    train_per_class: usize,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    /// Base seed for the random splits.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 0.1)]
    ridge_lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    relsr_lambda: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

impl ExperimentArgs {
    fn spec(&self) -> Result<ExperimentSpec, String> {
        let source = match (&self.data, self.preset.as_deref()) {
            (Some(p), None) => DataSource::Csv(p.clone()),
            (None, Some("th1")) => DataSource::Synthetic(ThreeRingSpec::th1(self.data_seed)),
            (None, Some("th2")) => DataSource::Synthetic(ThreeRingSpec::th2(self.data_seed)),
            (None, Some(other)) => return Err(format!("unknown preset {other:?}")),
            _ => return Err("one of --data or --preset is required".into()),
        };
        let mut spec = ExperimentSpec::new(source, self.train_per_class);
        spec.repeats = self.repeats;
        spec.seed = self.split_seed;
        spec.solver = self.solver.config();
        spec.ridge_lambda = self.ridge_lambda;
        spec.relsr_lambda = self.relsr_lambda;
        Ok(spec)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated subset of alpr,ridge,relsr,nc.
    #[arg(long, value_delimiter = ',', default_value = "alpr,ridge,relsr,nc")]
    methods: Vec<Method>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Score cells on this many held-out training samples per class instead of
    /// the test split.
    #[arg(long)]
    holdout: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    lambda1_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda2_grid: Option<Vec<f64>>,
    /// Also tune the ridge and ReLSR regularization over the lambda2 grid.
    #[arg(long)]
    baselines: bool,
    /// Write the grid cells as CSV here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn err(e: AlprError) -> String {
    e.to_string()
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Gen(args) => {
            let data = generate(&args.spec()?).map_err(err)?;
            save_csv(&data, &args.out).map_err(err)?;
            println!("wrote {} samples to {}", data.len(), args.out.display());
        }
        Command::Fit(args) => {
            let data = load_csv(&args.data).map_err(err)?;
            let result = fit(&data, &args.solver.config()).map_err(err)?;
            let model = PrunedModel::from_fit(&result);
            save_model(&model, &args.model).map_err(err)?;
            if let Some(path) = &args.trace {
                export_trace(&result, path).map_err(err)?;
            }
            let train_acc = model.accuracy(&data).map_err(err)?;
            println!(
                "iterations={} objective={:e} selected_features={}/{} train_accuracy={:.4}",
                result.iterations_run,
                result.objective_trace.last().copied().unwrap_or(f64::NAN),
                model.selected_count(),
                data.dim(),
                train_acc
            );
        }
        Command::Predict(args) => {
            let model = load_model(&args.model).map_err(err)?;
            let classes = model.train_embedding.nrows();
            let data = load_csv_for_evaluation(&args.data, classes).map_err(err)?;
            let predicted = model.predict_all(data.features()).map_err(err)?;
            let body: String = predicted.iter().map(|l| format!("{l}\n")).collect();
            match &args.out {
                Some(path) => std::fs::write(path, body).map_err(|e| e.to_string())?,
                None => print!("{body}"),
            }
            let hits = predicted.iter().zip(data.labels()).filter(|(p, l)| p == l).count();
            eprintln!("accuracy={:.4}", hits as f64 / data.len() as f64);
        }
        Command::Eval(args) => {
            let mut spec = args.experiment.spec()?;
            spec.methods = args.methods;
            let report = run_experiment(&spec).map_err(err)?;
            for m in &report.methods {
                let secs: f64 = m.fit_seconds.iter().sum::<f64>() / m.fit_seconds.len() as f64;
                println!(
                    "{:<6} mean_accuracy={:.2}% runs={} mean_fit_seconds={:.3}",
                    m.method,
                    100.0 * m.mean_accuracy(),
                    m.accuracies.len(),
                    secs
                );
            }
            if let Some(path) = &args.report {
                write_report(&report, path).map_err(err)?;
            }
        }
        Command::Grid(args) => {
            let mut spec = args.experiment.spec()?;
            if let Some(h) = args.holdout {
                spec.validation = Validation::Holdout(h);
            }
            if let Some(g) = args.lambda1_grid {
                spec.lambda1_grid = g;
            }
            if let Some(g) = args.lambda2_grid {
                spec.lambda2_grid = g;
            }
            let result = grid_search(&spec).map_err(err)?;
            println!("selected lambda1={} lambda2={}", result.lambda1, result.lambda2);
            if (0.1..=1.0).contains(&result.lambda2) {
                log::info!("selected lambda2 lies in [0.1, 1]");
            } else {
                log::info!("selected lambda2 {} lies outside [0.1, 1]", result.lambda2);
            }
            let mut body = result.to_csv();
            if args.baselines {
                for method in [Method::Ridge, Method::Relsr] {
                    let (lambda, _) = tune_baseline(&spec, method).map_err(err)?;
                    println!("selected {method} lambda={lambda}");
                    body.push_str(&format!("# selected {method} lambda={lambda}\n"));
                }
            }
            if let Some(path) = &args.report {
                std::fs::write(path, body).map_err(|e| e.to_string())?;
            }
        }
        Command::Trace(args) => {
            let data = load_csv(&args.data).map_err(err)?;
            let result = fit(&data, &args.solver.config()).map_err(err)?;
            export_trace(&result, &args.out).map_err(err)?;
            println!("wrote {} iterations to {}", result.iterations_run, args.out.display());
        }
    }
    Ok(())
}
