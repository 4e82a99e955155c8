//! OKPCA model fitting: occupation-kernel Gram matrix assembly, centering,
//! the symmetric eigenproblem, and principal-component projections.
//!
//! All computation happens in M-dimensional coordinate space via the Gram
//! matrix; the covariance operator and feature maps are never materialized.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::trajectory::{occupation_inner, QuadratureRule, Trajectory};

/// Eigenvalues at or below `RANK_TOL * lambda_max` are treated as zero.
/// Quadrature and floating-point noise produce tiny spurious eigenvalues on a
/// PSD-up-to-error matrix.
pub const RANK_TOL: f64 = 1e-10;

/// Symmetric matrix of pairwise occupation-kernel inner products, raw or
/// centered.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramMatrix {
    entries: Array2<f64>,
    centered: bool,
}

impl GramMatrix {
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }
}

/// Assemble the raw Gram matrix `K[i][j] = ⟨Γ_i, Γ_j⟩`. Entries for distinct
/// index pairs are computed concurrently.
pub fn gram_matrix(
    spec: &KernelSpec,
    rule: QuadratureRule,
    trajectories: &[Trajectory],
) -> Result<GramMatrix> {
    if trajectories.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = trajectories[0].dim();
    for t in trajectories {
        if t.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: t.dim(),
            });
        }
        // warm the weight cache before the parallel section
        t.quad_weights(rule);
    }
    let m = trajectories.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            occupation_inner(spec, rule, &trajectories[i], &trajectories[j])
                .expect("dimensions validated above")
        })
        .collect();
    let mut entries = Array2::zeros((m, m));
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: format!("Gram entry ({i}, {j})"),
            });
        }
        entries[(i, j)] = v;
        entries[(j, i)] = v;
    }
    Ok(GramMatrix {
        entries,
        centered: false,
    })
}

/// Center a raw Gram matrix: `K̃ = K − J K − K J + J K J` with
/// `J[i][j] = 1/M`, equivalently `(I − J) K (I − J)`. Row and column sums of
/// the result vanish. Centering an already-centered matrix is rejected;
/// double centering is a silent bug.
pub fn center_gram(gram: &GramMatrix) -> Result<GramMatrix> {
    if gram.centered {
        return Err(Error::AlreadyCentered);
    }
    let k = &gram.entries;
    let m = k.nrows();
    let row_means = k.mean_axis(ndarray::Axis(1)).expect("non-empty");
    let grand = row_means.sum() / m as f64;
    let mut entries = k.clone();
    for ((i, j), v) in entries.indexed_iter_mut() {
        *v += grand - row_means[i] - row_means[j];
    }
    Ok(GramMatrix {
        entries,
        centered: true,
    })
}

/// Feature-space coordinates of one trajectory relative to a fitted model:
/// its principal-component projections and the squared norm of its centered
/// embedding.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub projections: Vec<f64>,
    pub centered_norm_sq: f64,
}

/// A fitted OKPCA model. Immutable after `fit`; projections and scoring are
/// read-only and safe to run concurrently.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OkpcaModel {
    spec: KernelSpec,
    rule: QuadratureRule,
    training: Vec<Trajectory>,
    gram_raw: GramMatrix,
    gram_centered: GramMatrix,
    /// Eigenvalues of the centered Gram matrix, descending, zero modes
    /// dropped, truncated to `num_components`.
    eigenvalues: Vec<f64>,
    /// Column k holds the coefficient vector of the k-th eigenfunction,
    /// scaled so the eigenfunction has unit RKHS norm.
    alphas: Array2<f64>,
    num_components: usize,
    /// Numerical rank of the centered Gram matrix at fit time.
    rank: usize,
    /// Row means of the raw Gram matrix; reused by every projection.
    row_means: Vec<f64>,
    grand_mean: f64,
}

impl OkpcaModel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn training(&self) -> &[Trajectory] {
        &self.training
    }

    pub fn num_training(&self) -> usize {
        self.training.len()
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

    pub fn gram_raw(&self) -> &GramMatrix {
        &self.gram_raw
    }

    pub fn gram_centered(&self) -> &GramMatrix {
        &self.gram_centered
    }

    pub fn state_dim(&self) -> usize {
        self.training[0].dim()
    }
}

/// Dominant eigenpairs of a centered Gram matrix: descending eigenvalues
/// above the rank tolerance, coefficient columns scaled by `1/sqrt(λ)` for
/// unit-norm eigenfunctions, and the numerical rank. Shared by the OKPCA fit
/// and the pointwise KPCA baseline.
pub(crate) fn dominant_eigenpairs(
    centered: &Array2<f64>,
    num_components: usize,
) -> Result<(Vec<f64>, Array2<f64>, usize)> {
    let m = centered.nrows();
    let (eigs, vecs) = centered
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigen(e.to_string()))?;
    // eigh returns ascending eigenvalues
    let lambda_max = eigs[m - 1].max(0.0);
    let tol = RANK_TOL * lambda_max;
    let rank = eigs.iter().filter(|&&l| l > tol).count();
    if num_components > rank {
        return Err(Error::RankDeficient {
            requested: num_components,
            rank,
        });
    }
    let mut eigenvalues = Vec::with_capacity(num_components);
    let mut alphas = Array2::zeros((m, num_components));
    for k in 0..num_components {
        let idx = m - 1 - k;
        let lambda = eigs[idx];
        eigenvalues.push(lambda);
        let scale = 1.0 / lambda.sqrt();
        for i in 0..m {
            alphas[(i, k)] = vecs[(i, idx)] * scale;
        }
    }
    Ok((eigenvalues, alphas, rank))
}

/// Fit an OKPCA model on `trajectories`, retaining the `num_components`
/// dominant eigenfunctions of the centered Gram matrix. Coefficient vectors
/// are scaled by `1/sqrt(λ̃)` so every retained eigenfunction has unit RKHS
/// norm.
pub fn fit(
    spec: &KernelSpec,
    rule: QuadratureRule,
    trajectories: Vec<Trajectory>,
    num_components: usize,
) -> Result<OkpcaModel> {
    if num_components == 0 {
        return Err(Error::Config("component count must be at least 1".into()));
    }
    if trajectories.len() < 2 {
        return Err(Error::Config(
            "fit requires at least 2 training trajectories".into(),
        ));
    }
    let gram_raw = gram_matrix(spec, rule, &trajectories)?;
    let gram_centered = center_gram(&gram_raw)?;
    let m = trajectories.len();

    let row_means: Vec<f64> = gram_raw
        .entries
        .mean_axis(ndarray::Axis(1))
        .expect("non-empty")
        .to_vec();
    let grand_mean = row_means.iter().sum::<f64>() / m as f64;

    let (eigenvalues, alphas, rank) = dominant_eigenpairs(&gram_centered.entries, num_components)?;

    Ok(OkpcaModel {
        spec: *spec,
        rule,
        training: trajectories,
        gram_raw,
        gram_centered,
        eigenvalues,
        alphas,
        num_components,
        rank,
        row_means,
        grand_mean,
    })
}

impl OkpcaModel {
    /// Raw occupation-kernel inner products of `gamma` against every training
    /// trajectory, plus its self inner product.
    fn cross_inner(&self, gamma: &Trajectory) -> Result<(Vec<f64>, f64)> {
        if gamma.dim() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                got: gamma.dim(),
            });
        }
        let cross: Vec<f64> = self
            .training
            .par_iter()
            .map(|t| occupation_inner(&self.spec, self.rule, gamma, t).expect("dims checked"))
            .collect();
        let self_inner = occupation_inner(&self.spec, self.rule, gamma, gamma)?;
        Ok((cross, self_inner))
    }

    /// Embed a trajectory: centered squared norm and projections onto the
    /// retained eigenfunctions, all via Gram-space expansions.
    pub fn embed(&self, gamma: &Trajectory) -> Result<Embedding> {
        let (cross, self_inner) = self.cross_inner(gamma)?;
        Ok(self.embed_from_inner(&cross, self_inner))
    }

    /// Same as `embed`, but from precomputed inner products. Lets training
    /// trajectories be embedded straight from the cached Gram matrix.
    pub(crate) fn embed_from_inner(&self, cross: &[f64], self_inner: f64) -> Embedding {
        let m = self.training.len();
        let cross_mean = cross.iter().sum::<f64>() / m as f64;
        // ‖Φ̃(γ)‖² = ⟨Γ_γ,Γ_γ⟩ − 2·mean_j⟨Γ_γ,Γ_j⟩ + grand mean of K
        let centered_norm_sq = self_inner - 2.0 * cross_mean + self.grand_mean;
        // centered cross inner products ⟨Φ̃(γ), Φ̃(γ_j)⟩
        let centered: Vec<f64> = (0..m)
            .map(|j| cross[j] - self.row_means[j] - cross_mean + self.grand_mean)
            .collect();
        let projections: Vec<f64> = (0..self.num_components)
            .map(|k| {
                (0..m)
                    .map(|j| self.alphas[(j, k)] * centered[j])
                    .sum::<f64>()
            })
            .collect();
        Embedding {
            projections,
            centered_norm_sq,
        }
    }

    /// Nonlinear principal components of `gamma`: `⟨Φ̃(γ), v^(k)⟩` for each
    /// retained eigenfunction.
    pub fn project(&self, gamma: &Trajectory) -> Result<Vec<f64>> {
        Ok(self.embed(gamma)?.projections)
    }

    /// Embeddings of the training trajectories, computed from the cached raw
    /// Gram matrix without re-running quadrature.
    pub fn training_embeddings(&self) -> Vec<Embedding> {
        let k = self.gram_raw.entries();
        (0..self.training.len())
            .map(|i| {
                let row: Vec<f64> = k.row(i).to_vec();
                self.embed_from_inner(&row, k[(i, i)])
            })
            .collect()
    }

    /// Re-fit on the same Gram matrix with a different component count.
    /// Avoids re-running quadrature when exploring nested models.
    pub fn with_num_components(&self, num_components: usize) -> Result<OkpcaModel> {
        if num_components == 0 {
            return Err(Error::Config("component count must be at least 1".into()));
        }
        let (eigenvalues, alphas, _) =
            dominant_eigenpairs(&self.gram_centered.entries, num_components)?;
        let mut out = self.clone();
        out.eigenvalues = eigenvalues;
        out.alphas = alphas;
        out.num_components = num_components;
        Ok(out)
    }
}

/// Versioned on-disk model container.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: OkpcaModel,
}

const MODEL_FORMAT: &str = "okpca-model";
const MODEL_VERSION: u32 = 1;

impl OkpcaModel {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        let json = serde_json::to_string(&file).map_err(|e| Error::ModelFormat(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &std::path::Path) -> Result<OkpcaModel> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unexpected format tag {:?}",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        Ok(file.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array1;

    fn constant(id: &str, x: &[f64], duration: f64) -> Trajectory {
        let times = vec![0.0, duration / 2.0, duration];
        let states: Vec<f64> = (0..3).flat_map(|_| x.iter().copied()).collect();
        Trajectory::new(id, times, states, x.len()).unwrap()
    }

    fn spec() -> KernelSpec {
        KernelSpec::gaussian(0.6).unwrap()
    }

    #[test]
    fn gram_of_constant_pair_closed_form() {
        let s = spec();
        let xi = [0.3, 0.0];
        let xj = [-0.5, 0.2];
        let (ti, tj) = (1.5, 2.0);
        let g = gram_matrix(
            &s,
            QuadratureRule::Trapezoid,
            &[constant("i", &xi, ti), constant("j", &xj, tj)],
        )
        .unwrap();
        let k = s.eval(&xi, &xj).unwrap();
        assert_relative_eq!(g.entries()[(0, 0)], ti * ti, epsilon = 1e-12);
        assert_relative_eq!(g.entries()[(1, 1)], tj * tj, epsilon = 1e-12);
        assert_relative_eq!(g.entries()[(0, 1)], ti * tj * k, epsilon = 1e-12);
        assert_relative_eq!(g.entries()[(1, 0)], ti * tj * k, epsilon = 1e-12);
        assert!(!g.is_centered());
    }

    #[test]
    fn gram_single_trajectory_positive() {
        let g = gram_matrix(
            &spec(),
            QuadratureRule::Trapezoid,
            &[constant("a", &[0.1, 0.1], 1.0)],
        )
        .unwrap();
        assert_eq!(g.size(), 1);
        assert!(g.entries()[(0, 0)] > 0.0);
    }

    #[test]
    fn gram_empty_rejected() {
        assert!(matches!(
            gram_matrix(&spec(), QuadratureRule::Trapezoid, &[]),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn centering_scalar_and_constant_matrix() {
        let g = gram_matrix(
            &spec(),
            QuadratureRule::Trapezoid,
            &[constant("a", &[0.1], 1.0)],
        )
        .unwrap();
        let c = center_gram(&g).unwrap();
        assert_relative_eq!(c.entries()[(0, 0)], 0.0, epsilon = 1e-12);

        // constant matrix (identical trajectories) centers to zero
        let g = gram_matrix(
            &spec(),
            QuadratureRule::Trapezoid,
            &[constant("a", &[0.1], 1.0), constant("b", &[0.1], 1.0)],
        )
        .unwrap();
        let c = center_gram(&g).unwrap();
        for v in c.entries() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn centering_matches_four_term_formula() {
        let m = 5;
        let mut entries = Array2::zeros((m, m));
        let mut state = 42u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for i in 0..m {
            for j in i..m {
                let v = next();
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        let gram = GramMatrix {
            entries: entries.clone(),
            centered: false,
        };
        let centered = center_gram(&gram).unwrap();

        let j_m = Array2::from_elem((m, m), 1.0 / m as f64);
        let four_term =
            &entries - &j_m.dot(&entries) - &entries.dot(&j_m) + j_m.dot(&entries).dot(&j_m);
        for i in 0..m {
            for j in 0..m {
                assert!((centered.entries()[(i, j)] - four_term[(i, j)]).abs() < 1e-12);
            }
        }
        // row/column sums vanish
        for i in 0..m {
            assert!(centered.entries().row(i).sum().abs() < 1e-9);
            assert!(centered.entries().column(i).sum().abs() < 1e-9);
        }
    }

    #[test]
    fn double_centering_rejected() {
        let g = gram_matrix(
            &spec(),
            QuadratureRule::Trapezoid,
            &[constant("a", &[0.1], 1.0), constant("b", &[0.4], 1.0)],
        )
        .unwrap();
        let c = center_gram(&g).unwrap();
        assert!(matches!(center_gram(&c), Err(Error::AlreadyCentered)));
    }

    #[test]
    fn duplicated_trajectories_have_rank_zero() {
        let t = constant("a", &[0.2, 0.3], 1.0);
        let dup = t.clone().with_id("b");
        let err = fit(&spec(), QuadratureRule::Trapezoid, vec![t, dup], 1);
        assert!(matches!(err, Err(Error::RankDeficient { rank: 0, .. })));
    }

    #[test]
    fn three_constants_rank_and_trace() {
        let trajs = vec![
            constant("a", &[0.5, 0.0], 1.0),
            constant("b", &[-0.5, 0.0], 1.0),
            constant("c", &[0.0, 0.7], 1.0),
        ];
        let g = gram_matrix(&spec(), QuadratureRule::Trapezoid, &trajs).unwrap();
        let c = center_gram(&g).unwrap();
        let trace: f64 = (0..3).map(|i| c.entries()[(i, i)]).sum();

        let model = fit(&spec(), QuadratureRule::Trapezoid, trajs, 2).unwrap();
        assert!(model.rank() <= 2);
        let eig_sum: f64 = model.eigenvalues().iter().sum();
        // rank 2, so the two retained eigenvalues carry the whole trace
        assert_relative_eq!(eig_sum, trace, epsilon = 1e-10);
        // requesting more than the rank errors with the achievable rank
        let model3 = fit(
            &spec(),
            QuadratureRule::Trapezoid,
            vec![
                constant("a", &[0.5, 0.0], 1.0),
                constant("b", &[-0.5, 0.0], 1.0),
                constant("c", &[0.0, 0.7], 1.0),
            ],
            3,
        );
        assert!(matches!(model3, Err(Error::RankDeficient { rank: 2, .. })));
    }

    #[test]
    fn mirror_pair_projection_is_antisymmetric() {
        let g1 = constant("p", &[0.4, 0.0], 2.0);
        let g2 = constant("m", &[-0.4, 0.0], 2.0);
        let model = fit(
            &spec(),
            QuadratureRule::Trapezoid,
            vec![g1.clone(), g2.clone()],
            1,
        )
        .unwrap();
        assert_eq!(model.rank(), 1);
        let p1 = model.project(&g1).unwrap();
        let p2 = model.project(&g2).unwrap();
        assert_relative_eq!(p1[0], -p2[0], epsilon = 1e-10);
        assert!(p1[0].abs() > 1e-6);
    }

    #[test]
    fn eigen_residual_and_normalization() {
        let trajs = vec![
            constant("a", &[0.5, 0.1], 1.0),
            constant("b", &[-0.4, 0.2], 1.5),
            constant("c", &[0.1, -0.6], 0.8),
            constant("d", &[0.0, 0.0], 1.2),
        ];
        let model = fit(&spec(), QuadratureRule::Trapezoid, trajs, 3).unwrap();
        let kc = model.gram_centered().entries();
        let knorm = kc.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (k, &lambda) in model.eigenvalues().iter().enumerate() {
            let alpha: Array1<f64> = model.alphas().column(k).to_owned();
            let resid = kc.dot(&alpha) - lambda * &alpha;
            let rnorm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(rnorm <= 1e-8 * knorm.max(1.0), "residual {rnorm}");
            // α^T K̃ α = 1
            let quad = alpha.dot(&kc.dot(&alpha));
            assert_relative_eq!(quad, 1.0, epsilon = 1e-8);
        }
        // descending eigenvalue order
        for w in model.eigenvalues().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn training_projection_reconstructs_norm_at_full_rank() {
        let trajs = vec![
            constant("a", &[0.5, 0.1], 1.0),
            constant("b", &[-0.4, 0.2], 1.5),
            constant("c", &[0.1, -0.6], 0.8),
            constant("d", &[0.3, 0.4], 1.2),
        ];
        let probe = fit(&spec(), QuadratureRule::Trapezoid, trajs.clone(), 1).unwrap();
        let model = fit(
            &spec(),
            QuadratureRule::Trapezoid,
            trajs.clone(),
            probe.rank(),
        )
        .unwrap();
        for t in &trajs {
            let e = model.embed(t).unwrap();
            let proj_sq: f64 = e.projections.iter().map(|p| p * p).sum();
            assert_relative_eq!(proj_sq, e.centered_norm_sq, epsilon = 1e-8);
        }
    }

    #[test]
    fn training_embeddings_match_quadrature_path() {
        let trajs = vec![
            constant("a", &[0.5, 0.1], 1.0),
            constant("b", &[-0.4, 0.2], 1.5),
            constant("c", &[0.1, -0.6], 0.8),
        ];
        let model = fit(&spec(), QuadratureRule::Trapezoid, trajs.clone(), 2).unwrap();
        let cached = model.training_embeddings();
        for (t, c) in trajs.iter().zip(&cached) {
            let direct = model.embed(t).unwrap();
            assert_relative_eq!(direct.centered_norm_sq, c.centered_norm_sq, epsilon = 1e-10);
            for (a, b) in direct.projections.iter().zip(&c.projections) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let trajs = vec![
            constant("a", &[0.5, 0.1], 1.0),
            constant("b", &[-0.4, 0.2], 1.5),
            constant("c", &[0.1, -0.6], 0.8),
            constant("d", &[0.3, 0.4], 1.2),
        ];
        let test = constant("t", &[0.2, 0.2], 1.1);
        let model = fit(&spec(), QuadratureRule::Trapezoid, trajs.clone(), 2).unwrap();
        let mut permuted = trajs;
        permuted.rotate_left(2);
        permuted.swap(0, 1);
        let model_p = fit(&spec(), QuadratureRule::Trapezoid, permuted, 2).unwrap();
        let e = model.embed(&test).unwrap();
        let ep = model_p.embed(&test).unwrap();
        assert_relative_eq!(e.centered_norm_sq, ep.centered_norm_sq, epsilon = 1e-10);
        // eigenvector sign is arbitrary; compare squared projections
        for (a, b) in e.projections.iter().zip(&ep.projections) {
            assert_relative_eq!(a * a, b * b, epsilon = 1e-10);
        }
    }

    #[test]
    fn model_roundtrip_through_disk() {
        let trajs = vec![
            constant("a", &[0.5, 0.1], 1.0),
            constant("b", &[-0.4, 0.2], 1.5),
            constant("c", &[0.1, -0.6], 0.8),
        ];
        let test = constant("t", &[0.2, 0.2], 1.1);
        let model = fit(&spec(), QuadratureRule::Trapezoid, trajs, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = OkpcaModel::load(&path).unwrap();
        let a = model.embed(&test).unwrap();
        let b = loaded.embed(&test).unwrap();
        assert_eq!(a.centered_norm_sq, b.centered_norm_sq);
        assert_eq!(a.projections, b.projections);
        assert_eq!(model.eigenvalues(), loaded.eigenvalues());
    }
}
