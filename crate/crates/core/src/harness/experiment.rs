//! Repeated random-split evaluation and two-pass grid search.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;

use crate::baselines::{fit_nc, fit_relsr, fit_ridge, RelsrOptions};
use crate::classify::{Classifier, PrunedModel};
use crate::data::{Dataset, SolverConfig};
use crate::error::{AlprError, Result};
use crate::harness::io::load_csv;
use crate::solver::fit;
use crate::synthetic::{generate, split, ThreeRingSpec};

/// Regularization values swept by default: `10⁻⁵, 10⁻⁴, …, 1`.
pub const DEFAULT_GRID: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Where the graph weight is held while the sparsity weight is swept.
pub const FIXED_LAMBDA1: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Alpr,
    Ridge,
    Relsr,
    Nc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Alpr, Method::Ridge, Method::Relsr, Method::Nc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Alpr => "alpr",
            Method::Ridge => "ridge",
            Method::Relsr => "relsr",
            Method::Nc => "nc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method {s:?} (expected alpr, ridge, relsr or nc)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(ThreeRingSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv(p) => load_csv(p),
            DataSource::Synthetic(spec) => generate(spec),
        }
    }
}

/// How grid cells are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    /// Accuracy on each repeat's test split.
    TestSplit,
    /// Hold out this many samples per class from each training split and score on
    /// them; the test split is never seen.
    Holdout(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub train_per_class: usize,
    pub repeats: usize,
    /// Repeat `r` splits with `seed + r` and starts the solver from `solver.seed + r`.
    pub seed: u64,
    pub solver: SolverConfig,
    pub ridge_lambda: f64,
    pub relsr_lambda: f64,
    pub methods: Vec<Method>,
    pub lambda1_grid: Vec<f64>,
    pub lambda2_grid: Vec<f64>,
    pub validation: Validation,
}

impl ExperimentSpec {
    pub fn new(source: DataSource, train_per_class: usize) -> Self {
        Self {
            source,
            train_per_class,
            repeats: 20,
            seed: 0,
            solver: SolverConfig::default(),
            ridge_lambda: 0.1,
            relsr_lambda: 0.1,
            methods: Method::ALL.to_vec(),
            lambda1_grid: DEFAULT_GRID.to_vec(),
            lambda2_grid: DEFAULT_GRID.to_vec(),
            validation: Validation::TestSplit,
        }
    }

    fn check(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(AlprError::InvalidConfig("repeats must be at least 1".into()));
        }
        self.solver.validate()
    }

    fn split_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(repeat as u64)
    }

    fn solver_for(&self, repeat: usize) -> SolverConfig {
        SolverConfig {
            seed: self.solver.seed.wrapping_add(repeat as u64),
            ..self.solver.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: Method,
    /// Test accuracy of each repeat, in `[0, 1]`.
    pub accuracies: Vec<f64>,
    pub fit_seconds: Vec<f64>,
}

impl MethodReport {
    pub fn mean_accuracy(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub methods: Vec<MethodReport>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub ridge_lambda: f64,
    pub relsr_lambda: f64,
    /// ALPR objective trace of each repeat (empty when ALPR was not run).
    pub traces: Vec<Vec<f64>>,
}

impl ExperimentReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// The report file body. Timings are left out so the file is reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,run,accuracy\n");
        for m in &self.methods {
            for (run, acc) in m.accuracies.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", m.method, run + 1, acc);
            }
        }
        out.push_str("# summary\n# method,mean_accuracy,runs\n");
        for m in &self.methods {
            let _ = writeln!(out, "# {},{},{}", m.method, m.mean_accuracy(), m.accuracies.len());
        }
        let _ = writeln!(
            out,
            "# lambda1={} lambda2={} ridge_lambda={} relsr_lambda={}",
            self.lambda1, self.lambda2, self.ridge_lambda, self.relsr_lambda
        );
        out
    }
}

struct RunOutcome {
    accuracy: f64,
    seconds: f64,
    trace: Option<Vec<f64>>,
}

fn run_method(
    method: Method,
    train: &Dataset,
    test: &Dataset,
    solver: &SolverConfig,
    ridge_lambda: f64,
    relsr_lambda: f64,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let (accuracy, trace) = match method {
        Method::Alpr => {
            let fit = fit(train, solver)?;
            let model = PrunedModel::from_fit(&fit);
            (model.accuracy(test)?, Some(fit.objective_trace))
        }
        Method::Ridge => (fit_ridge(train, ridge_lambda)?.accuracy(test)?, None),
        Method::Relsr => {
            let opts = RelsrOptions {
                lambda: relsr_lambda,
                max_iters: solver.max_iters,
                rel_tol: solver.rel_tol,
                retarget: true,
            };
            (fit_relsr(train, &opts)?.model.accuracy(test)?, None)
        }
        Method::Nc => (fit_nc(train).accuracy(test)?, None),
    };
    Ok(RunOutcome {
        accuracy,
        seconds: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// Fits every requested method on `repeats` fresh splits and reports test accuracy.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.check()?;
    let data = spec.source.load()?;
    let per_repeat: Vec<Vec<RunOutcome>> = (0..spec.repeats)
        .into_par_iter()
        .map(|r| {
            let (train, test) = split(&data, spec.train_per_class, spec.split_seed(r))?;
            let solver = spec.solver_for(r);
            spec.methods
                .iter()
                .map(|&m| run_method(m, &train, &test, &solver, spec.ridge_lambda, spec.relsr_lambda))
                .collect()
        })
        .collect::<Result<_>>()?;

    let methods = spec
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| MethodReport {
            method,
            accuracies: per_repeat.iter().map(|runs| runs[k].accuracy).collect(),
            fit_seconds: per_repeat.iter().map(|runs| runs[k].seconds).collect(),
        })
        .collect();
    let traces = per_repeat
        .iter()
        .filter_map(|runs| runs.iter().find_map(|o| o.trace.clone()))
        .collect();
    Ok(ExperimentReport {
        methods,
        lambda1: spec.solver.lambda1,
        lambda2: spec.solver.lambda2,
        ridge_lambda: spec.ridge_lambda,
        relsr_lambda: spec.relsr_lambda,
        traces,
    })
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Mean validation accuracy, 0 if the cell failed.
    pub mean_accuracy: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Every evaluated cell, in evaluation order.
    pub cells: Vec<GridCell>,
}

impl GridSearchResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda1,lambda2,mean_accuracy,error\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                c.lambda1,
                c.lambda2,
                c.mean_accuracy,
                c.error.as_deref().unwrap_or("").replace(',', ";")
            );
        }
        let _ = writeln!(out, "# selected lambda1={} lambda2={}", self.lambda1, self.lambda2);
        out
    }
}

fn sorted_grid(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// The grid value nearest to `target` on a log scale.
fn nearest_on_grid(grid: &[f64], target: f64) -> f64 {
    let dist = |v: f64| {
        if v > 0.0 {
            (v.ln() - target.ln()).abs()
        } else {
            f64::INFINITY
        }
    };
    grid.iter()
        .copied()
        .min_by(|a, b| dist(*a).total_cmp(&dist(*b)))
        .expect("non-empty grid")
}

/// Two-pass search with a caller-supplied cell score.
///
/// Pass one holds `λ1` at [`FIXED_LAMBDA1`] (or the nearest `λ1` grid value) and sweeps
/// `λ2`; pass two holds the winning `λ2` and sweeps `λ1`. Higher score wins, ties go
/// to the smaller value. A failing cell scores 0 and is logged.
pub fn grid_search_with(
    lambda1_grid: &[f64],
    lambda2_grid: &[f64],
    score: impl Fn(f64, f64) -> Result<f64> + Sync,
) -> Result<GridSearchResult> {
    if lambda1_grid.is_empty() || lambda2_grid.is_empty() {
        return Err(AlprError::InvalidConfig("grids must be non-empty".into()));
    }
    let g1 = sorted_grid(lambda1_grid);
    let g2 = sorted_grid(lambda2_grid);
    let mut evaluated: BTreeMap<(u64, u64), GridCell> = BTreeMap::new();
    let mut cells = Vec::new();

    let mut sweep = |pairs: Vec<(f64, f64)>| -> Vec<GridCell> {
        let fresh: Vec<(f64, f64)> = pairs
            .iter()
            .copied()
            .filter(|&(a, b)| !evaluated.contains_key(&(a.to_bits(), b.to_bits())))
            .collect();
        let scored: Vec<GridCell> = fresh
            .par_iter()
            .map(|&(lambda1, lambda2)| match score(lambda1, lambda2) {
                Ok(mean_accuracy) => GridCell {
                    lambda1,
                    lambda2,
                    mean_accuracy,
                    error: None,
                },
                Err(e) => {
                    warn!("grid cell lambda1={lambda1} lambda2={lambda2} failed: {e}");
                    GridCell {
                        lambda1,
                        lambda2,
                        mean_accuracy: 0.0,
                        error: Some(e.to_string()),
                    }
                }
            })
            .collect();
        for cell in scored {
            cells.push(cell.clone());
            evaluated.insert((cell.lambda1.to_bits(), cell.lambda2.to_bits()), cell);
        }
        pairs
            .iter()
            .map(|(a, b)| evaluated[&(a.to_bits(), b.to_bits())].clone())
            .collect()
    };

    let best = |row: &[GridCell]| -> GridCell {
        let mut best = row[0].clone();
        for c in &row[1..] {
            if c.mean_accuracy > best.mean_accuracy {
                best = c.clone();
            }
        }
        best
    };

    let fixed1 = nearest_on_grid(&g1, FIXED_LAMBDA1);
    let first = sweep(g2.iter().map(|&l2| (fixed1, l2)).collect());
    let lambda2 = best(&first).lambda2;
    let second = sweep(g1.iter().map(|&l1| (l1, lambda2)).collect());
    let lambda1 = best(&second).lambda1;

    Ok(GridSearchResult {
        lambda1,
        lambda2,
        cells,
    })
}

/// Mean validation accuracy of `method` over the spec's repeats.
fn validation_score(
    spec: &ExperimentSpec,
    data: &Dataset,
    method: Method,
    solver: &SolverConfig,
    ridge_lambda: f64,
    relsr_lambda: f64,
) -> Result<f64> {
    let accs = (0..spec.repeats)
        .map(|r| {
            let (train, test) = split(data, spec.train_per_class, spec.split_seed(r))?;
            let (fit_set, val_set) = match spec.validation {
                Validation::TestSplit => (train, test),
                Validation::Holdout(per_class) => {
                    let keep = spec.train_per_class.checked_sub(per_class).ok_or_else(|| {
                        AlprError::InvalidConfig("holdout exceeds train_per_class".into())
                    })?;
                    split(&train, keep, spec.split_seed(r) ^ 0x5eed)?
                }
            };
            let cfg = SolverConfig {
                seed: solver.seed.wrapping_add(r as u64),
                ..solver.clone()
            };
            run_method(method, &fit_set, &val_set, &cfg, ridge_lambda, relsr_lambda)
                .map(|o| o.accuracy)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}

/// Selects `λ1, λ2` for ALPR by [`grid_search_with`] on the spec's grids.
pub fn grid_search(spec: &ExperimentSpec) -> Result<GridSearchResult> {
    spec.check()?;
    let data = spec.source.load()?;
    grid_search_with(&spec.lambda1_grid, &spec.lambda2_grid, |lambda1, lambda2| {
        let solver = SolverConfig {
            lambda1,
            lambda2,
            ..spec.solver.clone()
        };
        validation_score(spec, &data, Method::Alpr, &solver, 0.0, 0.0)
    })
}

/// Selects the regularization of a baseline over the spec's `λ2` grid, with the
/// same scoring as the ALPR search. Returns the chosen value and every cell.
pub fn tune_baseline(spec: &ExperimentSpec, method: Method) -> Result<(f64, Vec<GridCell>)> {
    spec.check()?;
    if !matches!(method, Method::Ridge | Method::Relsr) {
        return Err(AlprError::InvalidConfig(format!("{method} has no regularization to tune")));
    }
    let data = spec.source.load()?;
    let result = grid_search_with(&[FIXED_LAMBDA1], &spec.lambda2_grid, |_, lambda| {
        validation_score(spec, &data, method, &spec.solver, lambda, lambda)
    })?;
    Ok((result.lambda2, result.cells))
}
