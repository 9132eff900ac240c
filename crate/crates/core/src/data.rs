//! Domain types shared by every module.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{AlprError, Result};

/// Labelled samples, stored column-per-sample.
///
/// `features` is m × n (one column per sample) and `labels[j]` is the class of
/// column `j`, in `1..=class_count`. Construction validates every invariant, so
/// holding a `Dataset` means:
///
/// * `m ≥ 1`, `n ≥ 2` and every feature is finite,
/// * every label is in range,
/// * every class has at least two samples (each sample has a same-class neighbor).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    class_count: usize,
    members: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        validate(&features, &labels, class_count)?;
        Ok(Self::assemble(features, labels, class_count))
    }

    /// Like [`Dataset::new`] but allows classes with fewer than two samples (or none),
    /// which is fine for held-out evaluation data that is never fit.
    pub fn for_evaluation(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        check(&features, &labels, class_count, 0)?;
        Ok(Self::assemble(features, labels, class_count))
    }

    fn assemble(features: DMatrix<f64>, labels: Vec<usize>, class_count: usize) -> Self {
        let mut members = vec![Vec::new(); class_count];
        for (j, &l) in labels.iter().enumerate() {
            members[l - 1].push(j);
        }
        Self {
            features,
            labels,
            class_count,
            members,
        }
    }

    /// Re-checks the training invariants; fails for evaluation-only datasets.
    pub fn validate(&self) -> Result<()> {
        validate(&self.features, &self.labels, self.class_count)
    }

    /// Builds a dataset from row-per-sample data, the orientation used by CSV files.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(AlprError::ShapeMismatch("rows have different lengths".into()));
        }
        let features = DMatrix::from_fn(m, n, |i, j| rows[j][i]);
        Self::new(features, labels, class_count)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Number of features (rows of X).
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    /// Number of samples (columns of X).
    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, j: usize) -> DVectorView<'_, f64> {
        self.features.column(j)
    }

    /// Global sample indices of `class` (1-based), in dataset order.
    pub fn class_members(&self, class: usize) -> &[usize] {
        &self.members[class - 1]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// The dataset restricted to the given sample indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select_columns(indices);
        let labels = indices.iter().map(|&j| self.labels[j]).collect();
        Self::new(features, labels, self.class_count)
    }

    /// [`Dataset::subset`] without the two-samples-per-class requirement.
    pub fn subset_for_evaluation(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select_columns(indices);
        let labels = indices.iter().map(|&j| self.labels[j]).collect();
        Self::for_evaluation(features, labels, self.class_count)
    }
}

/// Checks the [`Dataset`] invariants without building one.
pub fn validate(features: &DMatrix<f64>, labels: &[usize], class_count: usize) -> Result<()> {
    check(features, labels, class_count, 2)
}

fn check(
    features: &DMatrix<f64>,
    labels: &[usize],
    class_count: usize,
    min_class_size: usize,
) -> Result<()> {
    let (m, n) = features.shape();
    if m == 0 {
        return Err(AlprError::InvalidDataset("no features".into()));
    }
    if min_class_size > 0 && n < 2 {
        return Err(AlprError::InvalidDataset(format!("need at least 2 samples, got {n}")));
    }
    if labels.len() != n {
        return Err(AlprError::ShapeMismatch(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if class_count == 0 {
        return Err(AlprError::InvalidDataset("class count is 0".into()));
    }
    for (index, &label) in labels.iter().enumerate() {
        if label == 0 || label > class_count {
            return Err(AlprError::LabelOutOfRange {
                index,
                label,
                class_count,
            });
        }
    }
    let mut counts = vec![0usize; class_count];
    for &l in labels {
        counts[l - 1] += 1;
    }
    if let Some((c, &count)) = counts.iter().enumerate().find(|(_, &c)| c < min_class_size) {
        return Err(AlprError::SingletonClass { class: c + 1, count });
    }
    for sample in 0..n {
        for feature in 0..m {
            if !features[(feature, sample)].is_finite() {
                return Err(AlprError::NonFiniteFeature { feature, sample });
            }
        }
    }
    Ok(())
}

/// The n × C zero-one label matrix `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotLabels {
    pub matrix: DMatrix<f64>,
}

pub fn one_hot(dataset: &Dataset) -> OneHotLabels {
    let mut matrix = DMatrix::zeros(dataset.len(), dataset.class_count());
    for (i, &l) in dataset.labels().iter().enumerate() {
        matrix[(i, l - 1)] = 1.0;
    }
    OneHotLabels { matrix }
}

/// An m × C projection with cached row l2-norms (the per-feature discriminability).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    matrix: DMatrix<f64>,
    row_norms: DVector<f64>,
}

impl Projection {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let row_norms = DVector::from_iterator(
            matrix.nrows(),
            matrix.row_iter().map(|r| r.norm()),
        );
        Self { matrix, row_norms }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row_norms(&self) -> &DVector<f64> {
        &self.row_norms
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `‖W‖_{2,1}`, the sum of row norms.
    pub fn l21_norm(&self) -> f64 {
        self.row_norms.iter().sum()
    }

    /// `Wᵀx` for a single sample.
    pub fn project(&self, sample: DVectorView<'_, f64>) -> DVector<f64> {
        self.matrix.tr_mul(&sample)
    }
}

/// The n × C regression target `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    pub matrix: DMatrix<f64>,
}

impl TargetMatrix {
    /// Smallest `T[i, l_i] − max_{j≠l_i} T[i, j]` over all rows.
    pub fn min_margin(&self, labels: &[usize]) -> f64 {
        self.matrix
            .row_iter()
            .zip(labels)
            .map(|(row, &l)| {
                let own = row[l - 1];
                let rival = row
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != l - 1)
                    .map(|(_, &v)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                own - rival
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn satisfies_margin(&self, labels: &[usize]) -> bool {
        self.min_margin(labels) >= 1.0 - 1e-9
    }
}

/// Hyperparameters for [`crate::solver::fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight of the adaptive graph term.
    pub lambda1: f64,
    /// Weight of the `‖W‖_{2,1}` sparsity term.
    pub lambda2: f64,
    pub max_iters: usize,
    /// Stop once the relative objective change falls below this.
    pub rel_tol: f64,
    /// Neighbors per sample in the initial graph.
    pub knn_init: usize,
    /// Floor for squared projected distances in the graph update.
    pub epsilon_dist: f64,
    /// Floor for row norms in the reweighting diagonal.
    pub epsilon_row: f64,
    /// Row-norm threshold for feature pruning at classification time.
    pub rho: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 0.1,
            max_iters: 50,
            rel_tol: 1e-6,
            knn_init: 5,
            epsilon_dist: 1e-12,
            epsilon_row: 1e-8,
            rho: 1e-4,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(AlprError::InvalidConfig(msg.to_string()));
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return bad("lambda1 must be finite and nonnegative");
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return bad("lambda2 must be finite and nonnegative");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        if self.knn_init == 0 {
            return bad("knn_init must be positive");
        }
        if !(self.epsilon_dist > 0.0 && self.epsilon_row > 0.0) {
            return bad("epsilons must be positive");
        }
        if !(self.rho >= 0.0) {
            return bad("rho must be nonnegative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(labels: Vec<usize>, c: usize) -> Result<Dataset> {
        let n = labels.len();
        Dataset::new(DMatrix::from_fn(2, n, |i, j| (i + 2 * j) as f64), labels, c)
    }

    #[test]
    fn one_hot_examples() {
        let y = one_hot(&ds(vec![1, 2, 1, 2], 2).unwrap());
        assert_eq!(y.matrix.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
        assert_eq!(y.matrix.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);

        let y = one_hot(&ds(vec![2, 2, 1, 1], 2).unwrap());
        let expect = DMatrix::from_row_slice(4, 2, &[0., 1., 0., 1., 1., 0., 1., 0.]);
        assert_eq!(y.matrix, expect);

        let y = one_hot(&ds(vec![3, 1, 2, 3, 1, 2], 3).unwrap());
        assert_eq!(y.matrix.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn validate_examples() {
        assert!(ds(vec![1, 1, 2, 2], 2).is_ok());
        assert!(matches!(
            ds(vec![1, 2], 2),
            Err(AlprError::SingletonClass { class: 1, count: 1 })
        ));
        assert!(matches!(
            ds(vec![1, 1, 3, 3], 2),
            Err(AlprError::LabelOutOfRange { index: 2, label: 3, .. })
        ));
        assert!(matches!(
            ds(vec![0, 1, 1, 2, 2], 2),
            Err(AlprError::LabelOutOfRange { index: 0, .. })
        ));
        let mut x = DMatrix::from_element(2, 4, 1.0);
        x[(1, 3)] = f64::NAN;
        assert!(matches!(
            Dataset::new(x, vec![1, 1, 2, 2], 2),
            Err(AlprError::NonFiniteFeature { feature: 1, sample: 3 })
        ));
        let msg = ds(vec![1, 2], 2).unwrap_err().to_string();
        assert!(msg.contains("class with fewer than 2 samples"), "{msg}");
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let c = SolverConfig { max_iters: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = SolverConfig { epsilon_row: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn margin_check() {
        let t = TargetMatrix {
            matrix: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -0.5, 0.5]),
        };
        assert!((t.min_margin(&[1, 2]) - 1.0).abs() < 1e-15);
        assert!(t.satisfies_margin(&[1, 2]));
        assert!(!t.satisfies_margin(&[2, 2]));
    }

    proptest! {
        #[test]
        fn one_hot_argmax_recovers_labels(raw in prop::collection::vec(0usize..4, 2..40)) {
            // Make every class appear at least twice.
            let mut labels: Vec<usize> = raw.iter().map(|l| l + 1).collect();
            labels.extend([1, 1, 2, 2, 3, 3, 4, 4]);
            let d = ds(labels.clone(), 4).unwrap();
            let y = one_hot(&d);
            for (i, row) in y.matrix.row_iter().enumerate() {
                prop_assert_eq!(row.sum(), 1.0);
                prop_assert_eq!(row.transpose().argmax().0 + 1, labels[i]);
            }
        }

        #[test]
        fn cached_row_norms_match(vals in prop::collection::vec(-1e3f64..1e3, 12)) {
            let w = DMatrix::from_vec(4, 3, vals);
            let p = Projection::new(w.clone());
            for i in 0..4 {
                let direct = w.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((p.row_norms()[i] - direct).abs() <= 1e-12 * direct.max(1e-300));
            }
        }
    }
}
