//! Trajectory representation and the quadrature engine behind
//! occupation-kernel evaluations `Γ_γ(x) = ∫ k(x, γ(t)) dt` and inner
//! products `⟨Γ_a, Γ_b⟩ = ∫∫ k(a(τ), b(t)) dτ dt`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Quadrature scheme applied over a trajectory's (possibly non-uniform)
/// sample times. Trapezoid is the default; Riemann is the left-endpoint rule,
/// kept for convergence comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum QuadratureRule {
    #[default]
    Trapezoid,
    Riemann,
}

/// Timestamped state samples of one system run. Times are strictly
/// increasing; `states` is row-major with one row per sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    id: String,
    times: Vec<f64>,
    /// Flat row-major sample matrix, `times.len() * dim` entries.
    states: Vec<f64>,
    dim: usize,
    #[serde(skip)]
    trapezoid_weights: OnceLock<Vec<f64>>,
    #[serde(skip)]
    riemann_weights: OnceLock<Vec<f64>>,
}

impl Trajectory {
    pub fn new(
        id: impl Into<String>,
        times: Vec<f64>,
        states: Vec<f64>,
        dim: usize,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: &str| Error::InvalidTrajectory {
            id: id.clone(),
            reason: reason.to_string(),
        };
        if dim == 0 {
            return Err(invalid("state dimension must be at least 1"));
        }
        if times.len() < 2 {
            return Err(invalid("at least 2 samples are required"));
        }
        if states.len() != times.len() * dim {
            return Err(invalid("states length must equal times length times dim"));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("times must be strictly increasing"));
        }
        if times.iter().chain(states.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite time or state value"));
        }
        Ok(Trajectory {
            id,
            times,
            states,
            dim,
            trapezoid_weights: OnceLock::new(),
            riemann_weights: OnceLock::new(),
        })
    }

    /// Build from per-sample state rows.
    pub fn from_rows(id: impl Into<String>, times: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::InvalidTrajectory {
                    id: id.into(),
                    reason: "inconsistent state dimension across samples".into(),
                });
            }
            flat.extend_from_slice(r);
        }
        Trajectory::new(id, times, flat, dim)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_samples(&self) -> usize {
        self.times.len()
    }

    /// Total duration `T = t_last - t_first`.
    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat row-major view of all samples.
    pub fn states_flat(&self) -> &[f64] {
        &self.states
    }

    pub fn with_states(&self, states: Vec<f64>) -> Result<Self> {
        Trajectory::new(self.id.clone(), self.times.clone(), states, self.dim)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Quadrature weight vector for this trajectory's sample grid. Computed
    /// once per rule and cached; Gram assembly reuses it O(M) times.
    pub fn quad_weights(&self, rule: QuadratureRule) -> &[f64] {
        let cell = match rule {
            QuadratureRule::Trapezoid => &self.trapezoid_weights,
            QuadratureRule::Riemann => &self.riemann_weights,
        };
        cell.get_or_init(|| {
            let t = &self.times;
            let m = t.len();
            let mut w = vec![0.0; m];
            match rule {
                QuadratureRule::Trapezoid => {
                    for i in 0..m - 1 {
                        let h = (t[i + 1] - t[i]) / 2.0;
                        w[i] += h;
                        w[i + 1] += h;
                    }
                }
                QuadratureRule::Riemann => {
                    for i in 0..m - 1 {
                        w[i] = t[i + 1] - t[i];
                    }
                }
            }
            w
        })
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// Occupation-kernel evaluation `Γ_γ(x) ≈ Σ_i w_i k(x, γ(t_i))`, a quadrature
/// approximation of `∫ k(x, γ(t)) dt`.
pub fn occupation_eval(
    spec: &KernelSpec,
    rule: QuadratureRule,
    gamma: &Trajectory,
    x: &[f64],
) -> Result<f64> {
    check_dims(gamma.dim(), x.len())?;
    Ok(spec.weighted_sum(x, gamma.states_flat(), gamma.quad_weights(rule)))
}

/// Occupation-kernel inner product
/// `⟨Γ_a, Γ_b⟩ ≈ Σ_i Σ_j w_i w_j k(a(t_i), b(t_j))`, the tensor-product
/// quadrature of the double integral. Cost is one kernel evaluation per
/// sample pair.
pub fn occupation_inner(
    spec: &KernelSpec,
    rule: QuadratureRule,
    a: &Trajectory,
    b: &Trajectory,
) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let wa = a.quad_weights(rule);
    let wb = b.quad_weights(rule);
    let bs = b.states_flat();
    let mut total = 0.0;
    for (i, &wi) in wa.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        total += wi * spec.weighted_sum(a.sample(i), bs, wb);
    }
    Ok(total)
}
