//! Per-class adaptive neighbor graphs.
//!
//! Each class `i` carries an `n_i × n_i` weight matrix `S^i` whose rows lie on the
//! probability simplex (zero diagonal, nonnegative, unit row sums). The graph starts
//! as a normalized k-NN graph and is then refit in closed form from distances in the
//! projected space: for a fixed row, minimizing `Σ_k a_k² b_k` over the simplex gives
//! `a_k ∝ 1 / b_k`.

use nalgebra::DMatrix;

use crate::data::{Dataset, Projection};
use crate::error::{AlprError, Result};

/// The neighbor weights of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBlock {
    /// Global sample index of each within-class position.
    pub members: Vec<usize>,
    /// `weights[(j, k)]` is `S^i_{j,k}`.
    pub weights: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassGraph {
    blocks: Vec<ClassBlock>,
}

impl ClassGraph {
    pub fn from_blocks(blocks: Vec<ClassBlock>) -> Self {
        Self { blocks }
    }

    /// Block of `class` (1-based).
    pub fn class(&self, class: usize) -> &ClassBlock {
        &self.blocks[class - 1]
    }

    pub fn blocks(&self) -> &[ClassBlock] {
        &self.blocks
    }

    /// Largest deviation from the simplex constraints over all rows: the maximum of
    /// `|row sum − 1|`, `|diagonal|` and `−min entry`.
    pub fn constraint_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for b in &self.blocks {
            for (j, row) in b.weights.row_iter().enumerate() {
                worst = worst.max((row.sum() - 1.0).abs());
                worst = worst.max(row[j].abs());
                worst = worst.max(-row.min());
            }
        }
        worst
    }

    fn check_shape(&self, dataset: &Dataset) -> Result<()> {
        let ok = self.blocks.len() == dataset.class_count()
            && self
                .blocks
                .iter()
                .enumerate()
                .all(|(c, b)| b.members == dataset.class_members(c + 1));
        if ok {
            Ok(())
        } else {
            Err(AlprError::ShapeMismatch("graph does not match dataset classes".into()))
        }
    }
}

/// Normalized k-nearest-neighbor graph in the original feature space.
///
/// Each sample gets weight `1/k'` on its `k' = min(k, n_i − 1)` nearest classmates;
/// equal distances go to the smaller within-class index.
pub fn init_knn(dataset: &Dataset, k: usize) -> ClassGraph {
    let x = dataset.features();
    let blocks = (1..=dataset.class_count())
        .map(|c| {
            let members = dataset.class_members(c).to_vec();
            let ni = members.len();
            let kk = k.clamp(1, ni - 1);
            let mut weights = DMatrix::zeros(ni, ni);
            let mut order: Vec<(f64, usize)> = Vec::with_capacity(ni - 1);
            for j in 0..ni {
                order.clear();
                let xj = x.column(members[j]);
                order.extend(
                    (0..ni)
                        .filter(|&p| p != j)
                        .map(|p| ((xj - x.column(members[p])).norm_squared(), p)),
                );
                order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for &(_, p) in order.iter().take(kk) {
                    weights[(j, p)] = 1.0 / kk as f64;
                }
            }
            ClassBlock { members, weights }
        })
        .collect();
    ClassGraph { blocks }
}

/// Simplex weights minimizing `Σ a_k² b_k`: `a_k = (1/b_k) / Σ_p (1/b_p)`.
pub fn inverse_cost_weights(costs: &[f64]) -> Vec<f64> {
    let inv: Vec<f64> = costs.iter().map(|b| 1.0 / b).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|v| v / total).collect()
}

/// Refits every class graph from squared distances in the projected space,
/// clamped below at `epsilon_dist`.
pub fn update_weights(
    dataset: &Dataset,
    projection: &Projection,
    epsilon_dist: f64,
) -> Result<ClassGraph> {
    if projection.matrix().nrows() != dataset.dim() {
        return Err(AlprError::ShapeMismatch(format!(
            "projection has {} rows, dataset has {} features",
            projection.matrix().nrows(),
            dataset.dim()
        )));
    }
    let embedded = projection.matrix().tr_mul(dataset.features());
    let blocks = (1..=dataset.class_count())
        .map(|c| {
            let members = dataset.class_members(c).to_vec();
            let ni = members.len();
            let mut weights = DMatrix::zeros(ni, ni);
            let mut costs = Vec::with_capacity(ni - 1);
            for j in 0..ni {
                costs.clear();
                let pj = embedded.column(members[j]);
                costs.extend((0..ni).filter(|&p| p != j).map(|p| {
                    (pj - embedded.column(members[p]))
                        .norm_squared()
                        .max(epsilon_dist)
                }));
                let row = inverse_cost_weights(&costs);
                for (p, w) in (0..ni).filter(|&p| p != j).zip(row) {
                    weights[(j, p)] = w;
                }
            }
            ClassBlock { members, weights }
        })
        .collect();
    Ok(ClassGraph { blocks })
}

/// `S_W = Σ_i n_i Σ_{j≠k} (S^i_{j,k})² (x_j − x_k)(x_j − x_k)ᵀ`, summed over ordered pairs.
///
/// Computed per class as `n_i · X_i L_i X_iᵀ` with the Laplacian
/// `L_i = diag(A𝟙 + Aᵀ𝟙) − A − Aᵀ` of the squared weights `A = S^i ∘ S^i`.
pub fn assemble_scatter(dataset: &Dataset, graph: &ClassGraph) -> Result<DMatrix<f64>> {
    graph.check_shape(dataset)?;
    let m = dataset.dim();
    let mut scatter = DMatrix::zeros(m, m);
    for block in graph.blocks() {
        let ni = block.members.len();
        let a = block.weights.component_mul(&block.weights);
        let mut lap = -(&a + a.transpose());
        for j in 0..ni {
            lap[(j, j)] += a.row(j).sum() + a.column(j).sum();
        }
        let xi = dataset.features().select_columns(&block.members);
        scatter += (&xi * lap * xi.transpose()) * ni as f64;
    }
    let sym = (&scatter + scatter.transpose()) * 0.5;
    Ok(sym)
}

/// Independent solver for `min Σ a_i² b_i` over the probability simplex, by
/// projected gradient with step `1/L`. Used to certify
/// [`inverse_cost_weights`]; not on any fitting path.
pub fn simplex_oracle(b: &[f64]) -> Result<Vec<f64>> {
    for (index, &value) in b.iter().enumerate() {
        if !(value > 0.0) {
            return Err(AlprError::NonPositiveWeight { index, value });
        }
    }
    let q = b.len();
    if q == 0 {
        return Ok(Vec::new());
    }
    let step = 1.0 / (2.0 * b.iter().cloned().fold(0.0, f64::max));

    // plain projected gradient: monotone, and the step length is the stopping test
    let mut a = vec![1.0 / q as f64; q];
    for _ in 0..10_000_000 {
        let grad_step: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(ai, bi)| ai - step * 2.0 * ai * bi)
            .collect();
        let next = project_to_simplex(&grad_step);
        let moved = next
            .iter()
            .zip(&a)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        a = next;
        if moved < 1e-15 {
            break;
        }
    }
    Ok(a)
}

/// Euclidean projection onto `{a : Σ a = 1, a ≥ 0}` (sort-and-threshold).
fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
