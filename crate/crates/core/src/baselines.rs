//! Reference classifiers: ridge least-squares regression, retargeted least-squares
//! regression (ReLSR) and a plain nearest-neighbor classifier.

use nalgebra::{DMatrix, DVectorView};

use crate::classify::{nearest_label, Classifier};
use crate::data::{one_hot, Dataset, TargetMatrix};
use crate::error::{AlprError, Result};
use crate::retarget::retarget_matrix;
use crate::solver::spd_solve;

#[derive(Debug, Clone, PartialEq)]
pub enum DecisionRule {
    /// Predict the class with the largest regression output `xᵀW`.
    Argmax,
    /// Nearest training embedding (C × n) in the target space.
    NearestInTarget {
        embedding: DMatrix<f64>,
        labels: Vec<usize>,
    },
}

/// A linear projection with a decision rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// m × C.
    pub projection: DMatrix<f64>,
    pub decision_rule: DecisionRule,
}

impl Classifier for LinearModel {
    fn predict(&self, sample: DVectorView<'_, f64>) -> Result<usize> {
        if sample.len() != self.projection.nrows() {
            return Err(AlprError::ShapeMismatch(format!(
                "sample has {} features, model expects {}",
                sample.len(),
                self.projection.nrows()
            )));
        }
        let out = self.projection.tr_mul(&sample);
        match &self.decision_rule {
            DecisionRule::Argmax => {
                // first maximum wins
                let mut best = 0;
                for (k, &v) in out.iter().enumerate() {
                    if v > out[best] {
                        best = k;
                    }
                }
                Ok(best + 1)
            }
            DecisionRule::NearestInTarget { embedding, labels } => {
                nearest_label(embedding, labels, out.as_slice())
            }
        }
    }
}

fn ridge_solve(dataset: &Dataset, lambda: f64, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = dataset.features();
    let mut system = x * x.transpose();
    for i in 0..system.nrows() {
        system[(i, i)] += lambda;
    }
    spd_solve(&system, &(x * target))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(AlprError::InvalidConfig(format!("lambda must be positive, got {lambda}")))
    }
}

/// `‖Y − XᵀW‖_F² + λ‖W‖_F²`, the ridge / ReLSR objective for a given target.
pub fn ridge_objective(dataset: &Dataset, target: &DMatrix<f64>, w: &DMatrix<f64>, lambda: f64) -> f64 {
    (target - dataset.features().tr_mul(w)).norm_squared() + lambda * w.norm_squared()
}

/// Ridge regression onto the one-hot labels: `W = (XXᵀ + λI)⁻¹ X Y`.
pub fn fit_ridge(dataset: &Dataset, lambda: f64) -> Result<LinearModel> {
    check_lambda(lambda)?;
    let y = one_hot(dataset).matrix;
    Ok(LinearModel {
        projection: ridge_solve(dataset, lambda, &y)?,
        decision_rule: DecisionRule::Argmax,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelsrOptions {
    pub lambda: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// When false the target stays at the one-hot labels (plain ridge).
    pub retarget: bool,
}

impl Default for RelsrOptions {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_iters: 50,
            rel_tol: 1e-6,
            retarget: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelsrFit {
    pub model: LinearModel,
    pub target: TargetMatrix,
    /// Objective after each sweep.
    pub objective_trace: Vec<f64>,
}

/// Retargeted least squares: alternates the ridge solve for `W` with the margin
/// projection of `XᵀW`, starting from the one-hot target.
pub fn fit_relsr(dataset: &Dataset, options: &RelsrOptions) -> Result<RelsrFit> {
    check_lambda(options.lambda)?;
    if options.max_iters == 0 {
        return Err(AlprError::InvalidConfig("max_iters must be at least 1".into()));
    }
    let x = dataset.features();
    let mut target = TargetMatrix {
        matrix: one_hot(dataset).matrix,
    };
    let mut w = DMatrix::zeros(dataset.dim(), dataset.class_count());
    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..options.max_iters {
        w = ridge_solve(dataset, options.lambda, &target.matrix)?;
        if options.retarget {
            target = retarget_matrix(&x.tr_mul(&w), dataset.labels())?;
        }
        let obj = ridge_objective(dataset, &target.matrix, &w, options.lambda);
        let converged = trace
            .last()
            .is_some_and(|&prev| (prev - obj).abs() < options.rel_tol * prev.abs().max(f64::MIN_POSITIVE));
        trace.push(obj);
        if converged {
            break;
        }
    }
    Ok(RelsrFit {
        model: LinearModel {
            projection: w,
            decision_rule: DecisionRule::Argmax,
        },
        target,
        objective_trace: trace,
    })
}

/// Nearest-neighbor classifier in the original feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestNeighbor {
    features: DMatrix<f64>,
    labels: Vec<usize>,
}

pub fn fit_nc(dataset: &Dataset) -> NearestNeighbor {
    NearestNeighbor {
        features: dataset.features().clone(),
        labels: dataset.labels().to_vec(),
    }
}

impl Classifier for NearestNeighbor {
    fn predict(&self, sample: DVectorView<'_, f64>) -> Result<usize> {
        if sample.len() != self.features.nrows() {
            return Err(AlprError::ShapeMismatch(format!(
                "sample has {} features, model expects {}",
                sample.len(),
                self.features.nrows()
            )));
        }
        nearest_label(&self.features, &self.labels, sample.as_slice())
    }
}
