//! Threshold-based feature pruning and nearest-neighbor classification in the
//! target space.

use nalgebra::{DMatrix, DVectorView};

use crate::data::{Dataset, Projection};
use crate::error::{AlprError, Result};
use crate::solver::FitResult;

/// Anything that maps a feature vector to a class label (1-based).
pub trait Classifier {
    fn predict(&self, sample: DVectorView<'_, f64>) -> Result<usize>;

    /// Labels for every column of `features`.
    fn predict_all(&self, features: &DMatrix<f64>) -> Result<Vec<usize>> {
        features.column_iter().map(|c| self.predict(c)).collect()
    }

    /// Fraction of `test` samples labelled correctly, in `[0, 1]`.
    fn accuracy(&self, test: &Dataset) -> Result<f64> {
        let predicted = self.predict_all(test.features())?;
        let hits = predicted
            .iter()
            .zip(test.labels())
            .filter(|(p, l)| p == l)
            .count();
        Ok(hits as f64 / test.len() as f64)
    }
}

/// Zeroes every row of `projection` whose l2-norm is below `rho`. Returns the pruned
/// projection and the mask of kept rows.
pub fn prune(projection: &Projection, rho: f64) -> (Projection, Vec<bool>) {
    let mask: Vec<bool> = projection.row_norms().iter().map(|&n| n >= rho).collect();
    let mut w = projection.matrix().clone();
    for (i, keep) in mask.iter().enumerate() {
        if !keep {
            w.row_mut(i).fill(0.0);
        }
    }
    (Projection::new(w), mask)
}

/// A pruned projection plus the embedded training set it classifies against.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedModel {
    pub projection: Projection,
    pub selected_mask: Vec<bool>,
    /// C × n, one column per training sample.
    pub train_embedding: DMatrix<f64>,
    pub train_labels: Vec<usize>,
    pub rho: f64,
}

impl PrunedModel {
    pub fn new(projection: &Projection, rho: f64, train: &Dataset) -> Self {
        let (pruned, selected_mask) = prune(projection, rho);
        let train_embedding = pruned.matrix().tr_mul(train.features());
        Self {
            projection: pruned,
            selected_mask,
            train_embedding,
            train_labels: train.labels().to_vec(),
            rho,
        }
    }

    /// The classifier for a fit, using the threshold the fit was run with.
    pub fn from_fit(fit: &FitResult) -> Self {
        let (pruned, selected_mask) = prune(&fit.projection, fit.rho);
        Self {
            projection: pruned,
            selected_mask,
            train_embedding: fit.train_embedding.clone(),
            train_labels: fit.train_labels.clone(),
            rho: fit.rho,
        }
    }

    pub fn selected_count(&self) -> usize {
        self.selected_mask.iter().filter(|&&s| s).count()
    }
}

impl Classifier for PrunedModel {
    fn predict(&self, sample: DVectorView<'_, f64>) -> Result<usize> {
        if self.selected_count() == 0 {
            return Err(AlprError::NoFeaturesSelected);
        }
        if sample.len() != self.projection.matrix().nrows() {
            return Err(AlprError::ShapeMismatch(format!(
                "sample has {} features, model expects {}",
                sample.len(),
                self.projection.matrix().nrows()
            )));
        }
        let z = self.projection.project(sample);
        nearest_label(&self.train_embedding, &self.train_labels, z.as_slice())
    }
}

/// Label of the column of `points` nearest to `query`; ties go to the smaller index.
pub(crate) fn nearest_label(points: &DMatrix<f64>, labels: &[usize], query: &[f64]) -> Result<usize> {
    let mut best = (f64::INFINITY, usize::MAX);
    for (j, col) in points.column_iter().enumerate() {
        let d: f64 = col.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, j);
        }
    }
    labels
        .get(best.1)
        .copied()
        .ok_or_else(|| AlprError::InvalidDataset("empty training set".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w() -> Projection {
        Projection::new(DMatrix::from_row_slice(3, 2, &[0.3, 0.4, 1e-6, 0.0, 0.0, 0.3]))
    }

    #[test]
    fn prune_examples() {
        let (p, mask) = prune(&w(), 0.0);
        assert_eq!(p, w());
        assert_eq!(mask, vec![true; 3]);

        let (p, mask) = prune(&w(), 1e-4);
        assert_eq!(mask, vec![true, false, true]);
        assert!(p.matrix().row(1).iter().all(|&v| v == 0.0));
        assert_eq!(p.matrix().row(0), w().matrix().row(0));

        let (p, mask) = prune(&w(), 10.0);
        assert!(mask.iter().all(|s| !s));
        assert_eq!(p.matrix(), &DMatrix::zeros(3, 2));
    }

    fn train() -> Dataset {
        let x = DMatrix::from_row_slice(3, 4, &[0., 1., 5., 6., 9., 9., 9., 9., 0., 0., 1., 1.]);
        Dataset::new(x, vec![1, 1, 2, 2], 2).unwrap()
    }

    #[test]
    fn predicts_training_points() {
        let d = train();
        let model = PrunedModel::new(&w(), 1e-4, &d);
        for j in 0..d.len() {
            assert_eq!(model.predict(d.sample(j)).unwrap(), d.labels()[j]);
        }
        assert_eq!(model.accuracy(&d).unwrap(), 1.0);
    }

    #[test]
    fn empty_selection_errors() {
        let d = train();
        let model = PrunedModel::new(&w(), 10.0, &d);
        assert!(matches!(model.predict(d.sample(0)), Err(AlprError::NoFeaturesSelected)));
    }

    #[test]
    fn ties_go_to_first_index() {
        let pts = DMatrix::from_row_slice(1, 3, &[-1.0, 1.0, 1.0]);
        assert_eq!(nearest_label(&pts, &[2, 1, 3], &[0.0]).unwrap(), 2);
        assert_eq!(nearest_label(&pts, &[2, 1, 3], &[1.0]).unwrap(), 1);
    }

    #[test]
    fn wrong_dimension_errors() {
        let model = PrunedModel::new(&w(), 0.0, &train());
        let x = nalgebra::DVector::from_vec(vec![1.0, 2.0]);
        assert!(model.predict(x.as_view()).is_err());
    }
}
