//! Pointwise kernel-PCA baseline: individual state samples are the data
//! units, reconstruction errors are computed per point and aggregated by
//! mean over a trajectory's samples. This is the comparison method run
//! alongside OKPCA.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::model::dominant_eigenpairs;
use crate::trajectory::{QuadratureRule, Trajectory};

/// Pointwise KPCA model over a pooled training point set. Same
/// eigen-normalization and rank conventions as the OKPCA model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KpcaModel {
    spec: KernelSpec,
    /// Pooled training points, row-major `P × n`.
    training_points: Array2<f64>,
    eigenvalues: Vec<f64>,
    alphas: Array2<f64>,
    num_components: usize,
    rank: usize,
    row_means: Vec<f64>,
    grand_mean: f64,
}

impl KpcaModel {
    pub fn num_points(&self) -> usize {
        self.training_points.nrows()
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn alphas(&self) -> &Array2<f64> {
        &self.alphas
    }

    pub fn state_dim(&self) -> usize {
        self.training_points.ncols()
    }
}

/// Fit pointwise KPCA: identical linear algebra to the OKPCA fit, with the
/// pointwise kernel Gram `K[i][j] = k(x_i, x_j)` in place of occupation-kernel
/// inner products.
pub fn kpca_fit(
    spec: &KernelSpec,
    points: Array2<f64>,
    num_components: usize,
) -> Result<KpcaModel> {
    let p = points.nrows();
    if p < 2 {
        return Err(Error::Config(
            "KPCA requires at least 2 training points".into(),
        ));
    }
    if num_components == 0 {
        return Err(Error::Config("component count must be at least 1".into()));
    }
    let rows: Vec<&[f64]> = (0..p)
        .map(|i| points.row(i).to_slice().expect("row-major"))
        .collect();
    let mut gram = Array2::zeros((p, p));
    for i in 0..p {
        gram[(i, i)] = 1.0;
        for j in i + 1..p {
            let v = spec.eval_unchecked(rows[i], rows[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let row_means: Vec<f64> = (0..p).map(|i| gram.row(i).sum() / p as f64).collect();
    let grand_mean = row_means.iter().sum::<f64>() / p as f64;
    let mut centered = gram;
    for ((i, j), v) in centered.indexed_iter_mut() {
        *v += grand_mean - row_means[i] - row_means[j];
    }
    let (eigenvalues, alphas, rank) = dominant_eigenpairs(&centered, num_components)?;
    Ok(KpcaModel {
        spec: *spec,
        training_points: points,
        eigenvalues,
        alphas,
        num_components,
        rank,
        row_means,
        grand_mean,
    })
}

/// Pointwise reconstruction error `‖Φ̃(x)‖² − Σ_k ⟨Φ̃(x), v^(k)⟩²` via
/// centered-kernel expansions. Raw value, may be a tiny negative number.
pub fn kpca_point_error(model: &KpcaModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.state_dim(),
            got: x.len(),
        });
    }
    let p = model.num_points();
    let kvec: Vec<f64> = (0..p)
        .map(|j| {
            model.spec.eval_unchecked(
                x,
                model.training_points.row(j).to_slice().expect("row-major"),
            )
        })
        .collect();
    let kmean = kvec.iter().sum::<f64>() / p as f64;
    // k(x, x) = 1 for the Gaussian RBF
    let norm_sq = 1.0 - 2.0 * kmean + model.grand_mean;
    let centered: Vec<f64> = (0..p)
        .map(|j| kvec[j] - model.row_means[j] - kmean + model.grand_mean)
        .collect();
    let proj_sq: f64 = (0..model.num_components)
        .map(|k| {
            let proj: f64 = (0..p).map(|j| model.alphas[(j, k)] * centered[j]).sum();
            proj * proj
        })
        .sum();
    Ok(norm_sq - proj_sq)
}

/// Per-trajectory score: mean of the pointwise errors over the trajectory's
/// samples. Mean rather than max keeps single-sample noise spikes from
/// dominating the score.
pub fn kpca_trajectory_error(model: &KpcaModel, gamma: &Trajectory) -> Result<f64> {
    if gamma.dim() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.state_dim(),
            got: gamma.dim(),
        });
    }
    let m = gamma.num_samples();
    let sum: f64 = (0..m)
        .map(|i| kpca_point_error(model, gamma.sample(i)).expect("dims checked"))
        .sum();
    Ok(sum / m as f64)
}

/// Pool the samples of all trajectories into a single point matrix,
/// subsampling uniformly (every k-th pooled sample, in time order) down to at
/// most `max_points`. Pooling every sample of a realistic training set makes
/// the cubic eigensolver intractable.
pub fn pool_points(trajectories: &[Trajectory], max_points: usize) -> Result<Array2<f64>> {
    if trajectories.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = trajectories[0].dim();
    let total: usize = trajectories.iter().map(Trajectory::num_samples).sum();
    let keep = total.min(max_points.max(1));
    let mut points = Array2::zeros((keep, dim));
    let mut out = 0usize;
    let mut global = 0usize;
    for t in trajectories {
        if t.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: t.dim(),
            });
        }
        for i in 0..t.num_samples() {
            // take pooled index j*total/keep for j = 0..keep
            if out < keep && global == out * total / keep {
                points
                    .row_mut(out)
                    .assign(&ndarray::ArrayView1::from(t.sample(i)));
                out += 1;
            }
            global += 1;
        }
    }
    Ok(points.slice_move(ndarray::s![..out, ..]))
}

/// Embed a trajectory as a single Euclidean vector: sample `i` is scaled by
/// `√w_i`, the square root of its quadrature weight, so that the squared
/// Euclidean distance between two embedded trajectories on a shared sampling
/// grid equals the time-weighted L² distance `∫₀ᵀ ‖γ_a(t) − γ_b(t)‖² dt`.
///
/// A Gaussian kernel over these vectors treats whole trajectories as data
/// units. For faults whose states stay inside the support of the nominal
/// point cloud, pooled per-point errors cannot separate the classes no
/// matter the kernel width; the L² embedding keeps the curve shape and
/// restores the separation.
pub fn trajectory_vector(gamma: &Trajectory, rule: QuadratureRule) -> Vec<f64> {
    let w = gamma.quad_weights(rule);
    let mut out = Vec::with_capacity(gamma.num_samples() * gamma.dim());
    for i in 0..gamma.num_samples() {
        let s = w[i].sqrt();
        out.extend(gamma.sample(i).iter().map(|v| v * s));
    }
    out
}

/// Stack `trajectory_vector` rows for a whole set. All trajectories must
/// share one sampling grid; distances between vectors from different grids
/// are meaningless.
pub fn trajectory_vectors(
    trajectories: &[Trajectory],
    rule: QuadratureRule,
) -> Result<Array2<f64>> {
    let first = trajectories.first().ok_or(Error::EmptyDataset)?;
    let cols = first.num_samples() * first.dim();
    let mut out = Array2::zeros((trajectories.len(), cols));
    for (r, t) in trajectories.iter().enumerate() {
        if t.dim() != first.dim() || !same_grid(t.times(), first.times()) {
            return Err(Error::Config(format!(
                "trajectory {:?} is not on the shared sampling grid",
                t.id()
            )));
        }
        out.row_mut(r)
            .assign(&ndarray::ArrayView1::from(&trajectory_vector(t, rule)[..]));
    }
    Ok(out)
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
}
