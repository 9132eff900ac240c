//! Alternating minimization over the projection `W`, the class graphs `S` and the
//! target `T`.
//!
//! One sweep is `W → S → T`:
//!
//! 1. `W = (XXᵀ + λ1·S_W + (λ2/2)·D)⁻¹ X T`, with the reweighting diagonal
//!    `D_ii = 1 / max(‖W_{i,:}‖₂, ε_row)` taken from the previous `W`;
//! 2. every graph row is refit to inverse projected distances;
//! 3. every target row is projected onto the unit-margin set.
//!
//! The objective `(‖T − XᵀW‖_F² + λ1·Tr(WᵀS_W W) + λ2·‖W‖_{2,1}) / ‖X‖_F²` is recorded
//! once per sweep.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classify::prune;
use crate::data::{one_hot, Dataset, Projection, SolverConfig, TargetMatrix};
use crate::error::{AlprError, Result};
use crate::graph::{assemble_scatter, init_knn, update_weights, ClassGraph};
use crate::retarget::retarget_matrix;

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub struct FitResult {
    /// The learned projection, before any pruning.
    pub projection: Projection,
    pub target: TargetMatrix,
    pub graph: ClassGraph,
    /// Normalized objective after each sweep.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    /// `WᵀX` (C × n) with rows of `W` below `rho` zeroed.
    pub train_embedding: DMatrix<f64>,
    pub train_labels: Vec<usize>,
    /// Pruning threshold used for `train_embedding`.
    pub rho: f64,
}

impl FitResult {
    /// Whether every consecutive trace pair satisfies `next ≤ prev + slack·max(1, prev)`.
    pub fn trace_is_monotone(&self, slack: f64) -> bool {
        self.objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + slack * w[0].max(1.0))
    }
}

/// Everything the projection step saw and produced, passed to a [`fit_with_observer`]
/// callback after each `W` update.
pub struct ProjectionStep<'a> {
    pub iter: usize,
    pub graph: &'a ClassGraph,
    pub scatter: &'a DMatrix<f64>,
    pub target: &'a TargetMatrix,
    /// The diagonal of `D`, or `None` when `λ2 = 0`.
    pub reweight: Option<&'a DVector<f64>>,
    pub previous: &'a Projection,
    pub updated: &'a Projection,
}

/// Normalized objective value.
pub fn objective(
    dataset: &Dataset,
    projection: &Projection,
    graph: &ClassGraph,
    target: &TargetMatrix,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let scatter = assemble_scatter(dataset, graph)?;
    Ok(objective_with_scatter(dataset, projection, &scatter, target, lambda1, lambda2))
}

fn objective_with_scatter(
    dataset: &Dataset,
    projection: &Projection,
    scatter: &DMatrix<f64>,
    target: &TargetMatrix,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    let x = dataset.features();
    let w = projection.matrix();
    let fit = (&target.matrix - x.tr_mul(w)).norm_squared();
    let graph = if lambda1 > 0.0 {
        (w.transpose() * scatter * w).trace()
    } else {
        0.0
    };
    let sparsity = if lambda2 > 0.0 { projection.l21_norm() } else { 0.0 };
    let scale = x.norm_squared();
    (fit + lambda1 * graph + lambda2 * sparsity) / scale
}

/// Diagonal of the reweighting matrix `D` for the `‖W‖_{2,1}` majorizer.
pub fn irls_weights(previous: &Projection, epsilon_row: f64) -> DVector<f64> {
    previous.row_norms().map(|n| 1.0 / n.max(epsilon_row))
}

/// The projection step: solves the regularized normal equations for `W`.
pub fn update_projection(
    dataset: &Dataset,
    graph: &ClassGraph,
    target: &TargetMatrix,
    lambda1: f64,
    lambda2: f64,
    epsilon_row: f64,
    previous: &Projection,
) -> Result<Projection> {
    let scatter = assemble_scatter(dataset, graph)?;
    let reweight = (lambda2 > 0.0).then(|| irls_weights(previous, epsilon_row));
    let gram = dataset.features() * dataset.features().transpose();
    solve_projection(
        dataset,
        &gram,
        &scatter,
        target,
        lambda1,
        lambda2,
        reweight.as_ref(),
    )
}

fn solve_projection(
    dataset: &Dataset,
    gram: &DMatrix<f64>,
    scatter: &DMatrix<f64>,
    target: &TargetMatrix,
    lambda1: f64,
    lambda2: f64,
    reweight: Option<&DVector<f64>>,
) -> Result<Projection> {
    if target.matrix.nrows() != dataset.len() {
        return Err(AlprError::ShapeMismatch(format!(
            "target has {} rows, dataset has {} samples",
            target.matrix.nrows(),
            dataset.len()
        )));
    }
    let mut system = gram.clone();
    if lambda1 > 0.0 {
        system += scatter * lambda1;
    }
    if let Some(d) = reweight {
        for (i, di) in d.iter().enumerate() {
            system[(i, i)] += 0.5 * lambda2 * di;
        }
    }
    let rhs = dataset.features() * &target.matrix;
    Ok(Projection::new(spd_solve(&system, &rhs)?))
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky, with one round
/// of iterative refinement. Retries once with `1e-10·tr(A)/m` added to the diagonal.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = match a.clone().cholesky() {
        Some(c) => c,
        None => {
            let m = a.nrows();
            let jitter = 1e-10 * a.trace() / m as f64;
            let mut shifted = a.clone();
            for i in 0..m {
                shifted[(i, i)] += jitter;
            }
            shifted.cholesky().ok_or(AlprError::NotPositiveDefinite)?
        }
    };
    let mut x = chol.solve(b);
    let residual = b - a * &x;
    x += chol.solve(&residual);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(AlprError::NotPositiveDefinite)
    }
}

/// `‖X(XᵀW − T) + λ1·S_W·W + (λ2/2)·D·W‖_F / ‖XT‖_F`, the relative gradient of the
/// majorized objective at `W`.
pub fn stationarity_residual(
    dataset: &Dataset,
    scatter: &DMatrix<f64>,
    target: &TargetMatrix,
    lambda1: f64,
    lambda2: f64,
    reweight: Option<&DVector<f64>>,
    projection: &Projection,
) -> f64 {
    let x = dataset.features();
    let w = projection.matrix();
    let mut grad = x * (x.tr_mul(w) - &target.matrix);
    if lambda1 > 0.0 {
        grad += scatter * w * lambda1;
    }
    if let Some(d) = reweight {
        for (i, di) in d.iter().enumerate() {
            let mut row = grad.row_mut(i);
            row += w.row(i) * (0.5 * lambda2 * di);
        }
    }
    grad.norm() / (x * &target.matrix).norm()
}

/// Seeded standard-normal start scaled by `1/√m`.
pub fn initial_projection(m: usize, c: usize, seed: u64) -> Projection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let w = DMatrix::from_fn(m, c, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    });
    Projection::new(w)
}

/// Fits the model.
pub fn fit(dataset: &Dataset, config: &SolverConfig) -> Result<FitResult> {
    fit_with_observer(dataset, config, |_| {})
}

/// [`fit`], calling `observe` after every projection step.
pub fn fit_with_observer(
    dataset: &Dataset,
    config: &SolverConfig,
    mut observe: impl FnMut(&ProjectionStep<'_>),
) -> Result<FitResult> {
    config.validate()?;
    dataset.validate()?;
    let x = dataset.features();
    let gram = x * x.transpose();

    let mut projection = initial_projection(dataset.dim(), dataset.class_count(), config.seed);
    let mut target = TargetMatrix {
        matrix: one_hot(dataset).matrix,
    };
    let mut graph = init_knn(dataset, config.knn_init);
    let mut trace = Vec::with_capacity(config.max_iters);

    for iter in 1..=config.max_iters {
        let scatter = assemble_scatter(dataset, &graph)?;
        let reweight = (config.lambda2 > 0.0).then(|| irls_weights(&projection, config.epsilon_row));
        let updated = solve_projection(
            dataset,
            &gram,
            &scatter,
            &target,
            config.lambda1,
            config.lambda2,
            reweight.as_ref(),
        )?;
        observe(&ProjectionStep {
            iter,
            graph: &graph,
            scatter: &scatter,
            target: &target,
            reweight: reweight.as_ref(),
            previous: &projection,
            updated: &updated,
        });
        projection = updated;

        graph = update_weights(dataset, &projection, config.epsilon_dist)?;
        target = retarget_matrix(&x.tr_mul(projection.matrix()), dataset.labels())?;

        let scatter = assemble_scatter(dataset, &graph)?;
        let obj = objective_with_scatter(
            dataset,
            &projection,
            &scatter,
            &target,
            config.lambda1,
            config.lambda2,
        );
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (prev - obj).abs() < config.rel_tol * prev.abs().max(f64::MIN_POSITIVE));
        trace.push(obj);
        if converged {
            break;
        }
    }

    let (pruned, _) = prune(&projection, config.rho);
    let train_embedding = pruned.matrix().tr_mul(x);
    Ok(FitResult {
        iterations_run: trace.len(),
        projection,
        target,
        graph,
        objective_trace: trace,
        train_embedding,
        train_labels: dataset.labels().to_vec(),
        rho: config.rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ClassBlock;

    fn tiny() -> Dataset {
        let x = DMatrix::from_row_slice(2, 4, &[1.0, 0.5, -1.0, -0.2, 0.3, 0.1, 0.7, -0.4]);
        Dataset::new(x, vec![1, 1, 2, 2], 2).unwrap()
    }

    #[test]
    fn objective_zero_cases() {
        let d = tiny();
        let g = init_knn(&d, 1);
        let zero_w = Projection::new(DMatrix::zeros(2, 2));
        let zero_t = TargetMatrix { matrix: DMatrix::zeros(4, 2) };
        assert_eq!(objective(&d, &zero_w, &g, &zero_t, 1.0, 1.0).unwrap(), 0.0);

        let w = Projection::new(DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 2.0, 0.5]));
        let t = TargetMatrix { matrix: d.features().tr_mul(w.matrix()) };
        assert_eq!(objective(&d, &w, &g, &t, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn objective_one_by_one() {
        let x = DMatrix::from_row_slice(1, 2, &[2.0, 2.0]);
        let d = Dataset::new(x, vec![1, 1], 1).unwrap();
        let g = init_knn(&d, 1);
        let w = Projection::new(DMatrix::from_element(1, 1, 1.0));
        let t = TargetMatrix { matrix: DMatrix::from_element(2, 1, 1.0) };
        // per sample (1 − 2)² = 1, twice; plus λ2·1; over ‖X‖² = 8
        assert_eq!(objective(&d, &w, &g, &t, 0.0, 1.0).unwrap(), 3.0 / 8.0);
    }

    #[test]
    fn identity_design_recovers_target() {
        let x = DMatrix::identity(4, 4);
        let d = Dataset::new(x, vec![1, 2, 1, 2], 2).unwrap();
        let g = init_knn(&d, 1);
        let t = TargetMatrix {
            matrix: DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -0.5, 0.5, 2.0, 1.0, 0.0, 3.0]),
        };
        let prev = initial_projection(4, 2, 7);
        let w = update_projection(&d, &g, &t, 0.0, 0.0, 1e-8, &prev).unwrap();
        assert!((w.matrix() - &t.matrix).amax() < 1e-12);
    }

    #[test]
    fn jitter_and_failure() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DMatrix::from_element(2, 1, 1.0);
        // semidefinite: the jittered retry succeeds
        assert!(spd_solve(&singular, &b).is_ok());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(spd_solve(&indefinite, &b), Err(AlprError::NotPositiveDefinite)));
    }

    #[test]
    fn single_iteration_trace() {
        let d = tiny();
        let cfg = SolverConfig { max_iters: 1, ..Default::default() };
        let r = fit(&d, &cfg).unwrap();
        assert_eq!(r.objective_trace.len(), 1);
        assert_eq!(r.iterations_run, 1);
        assert!(r.target.satisfies_margin(d.labels()));
        assert!(r.graph.constraint_violation() < 1e-10);
        assert_eq!(r.train_embedding.shape(), (2, 4));
    }

    #[test]
    fn lambda2_zero_omits_reweighting() {
        let d = tiny();
        let cfg = SolverConfig { lambda2: 0.0, max_iters: 2, ..Default::default() };
        let mut saw = 0;
        fit_with_observer(&d, &cfg, |s| {
            assert!(s.reweight.is_none());
            saw += 1;
        })
        .unwrap();
        assert_eq!(saw, 2);
    }

    #[test]
    fn rejects_bad_config() {
        let d = tiny();
        let cfg = SolverConfig { rel_tol: 0.0, ..Default::default() };
        assert!(matches!(fit(&d, &cfg), Err(AlprError::InvalidConfig(_))));
    }

    #[test]
    fn objective_uses_ordered_pairs() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let d = Dataset::new(x, vec![1, 1], 1).unwrap();
        let g = ClassGraph::from_blocks(vec![ClassBlock {
            members: vec![0, 1],
            weights: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        }]);
        let w = Projection::new(DMatrix::from_element(1, 1, 1.0));
        let t = TargetMatrix { matrix: d.features().tr_mul(w.matrix()) };
        // graph term: n_i · (1 + 1) · 1 = 4, normalized by ‖X‖² = 1
        assert_eq!(objective(&d, &w, &g, &t, 1.0, 0.0).unwrap(), 4.0);
    }
}
