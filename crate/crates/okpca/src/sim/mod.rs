//! Simulators generating the training and test trajectories: ODE systems,
//! a fixed-step RK4 integrator, initial-condition samplers, and measurement
//! noise injection.

mod academic;
mod quadrotor;

pub use academic::academic_system;
pub use quadrotor::{quadrotor_system, PidGains, QuadrotorParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// A (possibly closed-loop) ODE. `state_dim` is the integrated dimension;
/// only the first `output_dim` coordinates are emitted into trajectories,
/// so controller integrator states stay internal.
pub struct OdeSystem {
    name: String,
    state_dim: usize,
    output_dim: usize,
    field: Box<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>,
}

impl OdeSystem {
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        output_dim: usize,
        field: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(output_dim >= 1 && output_dim <= state_dim);
        OdeSystem {
            name: name.into(),
            state_dim,
            output_dim,
            field: Box::new(field),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Evaluate the vector field into `dxdt`.
    pub fn eval(&self, t: f64, x: &[f64], dxdt: &mut [f64]) {
        (self.field)(t, x, dxdt)
    }
}

/// Tunables of a single simulation run. Noise is applied after integration
/// (measurement noise on recorded samples), never inside the dynamics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    /// Sampling interval of the emitted trajectory, seconds.
    pub dt_sample: f64,
    /// Total duration, seconds.
    pub duration: f64,
    /// RK4 substeps per sample interval.
    pub substeps: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_sample > 0.0 && self.dt_sample.is_finite()) {
            return Err(Error::Config("dt_sample must be positive".into()));
        }
        if self.duration < self.dt_sample {
            return Err(Error::Config("duration must be at least dt_sample".into()));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Integrate with classical fixed-step RK4, emitting samples at
/// `t = 0, dt, ..., duration`. The initial condition may cover either the
/// full internal state or just the emitted coordinates; hidden states
/// (controller integrators) start at zero.
pub fn simulate(system: &OdeSystem, ic: &[f64], cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = system.state_dim();
    let mut state = if ic.len() == n {
        ic.to_vec()
    } else if ic.len() == system.output_dim() {
        let mut s = vec![0.0; n];
        s[..ic.len()].copy_from_slice(ic);
        s
    } else {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ic.len(),
        });
    };

    let num_samples = (cfg.duration / cfg.dt_sample).round() as usize + 1;
    let h = cfg.dt_sample / cfg.substeps as f64;
    let mut times = Vec::with_capacity(num_samples);
    let mut states = Vec::with_capacity(num_samples * system.output_dim());

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    for sample in 0..num_samples {
        let t_sample = sample as f64 * cfg.dt_sample;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimulationDiverged { time: t_sample });
        }
        times.push(t_sample);
        states.extend_from_slice(&state[..system.output_dim()]);
        if sample + 1 == num_samples {
            break;
        }
        for sub in 0..cfg.substeps {
            let t = t_sample + sub as f64 * h;
            system.eval(t, &state, &mut k1);
            for i in 0..n {
                tmp[i] = state[i] + 0.5 * h * k1[i];
            }
            system.eval(t + 0.5 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = state[i] + 0.5 * h * k2[i];
            }
            system.eval(t + 0.5 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = state[i] + h * k3[i];
            }
            system.eval(t + h, &tmp, &mut k4);
            for i in 0..n {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }

    Trajectory::new(system.name(), times, states, system.output_dim())
}

/// Add i.i.d. zero-mean Gaussian measurement noise to every state coordinate
/// of every sample. Times are unchanged; deterministic given the seed.
pub fn add_noise(gamma: &Trajectory, sigma: f64, seed: u64) -> Result<Trajectory> {
    if sigma < 0.0 {
        return Err(Error::Config("noise sigma must be nonnegative".into()));
    }
    if sigma == 0.0 {
        return Ok(gamma.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma > 0");
    let states: Vec<f64> = gamma
        .states_flat()
        .iter()
        .map(|v| v + normal.sample(&mut rng))
        .collect();
    gamma.with_states(states)
}

/// Initial-condition distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// Uniform angle on the unit circle in the plane.
    UnitCircle,
    /// Uniform per coordinate on `[-side/2, side/2]^dim`.
    Box { side: f64, dim: usize },
}

/// Draw an initial condition.
pub fn sample_initial(kind: &InitialCondition, rng: &mut impl Rng) -> Vec<f64> {
    match kind {
        InitialCondition::UnitCircle => {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            vec![theta.cos(), theta.sin()]
        }
        InitialCondition::Box { side, dim } => {
            let half = side / 2.0;
            (0..*dim).map(|_| rng.gen_range(-half..=half)).collect()
        }
    }
}

/// splitmix64 seed derivation: independent, reproducible RNG streams per
/// (base seed, stream index) regardless of execution order.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn decay() -> OdeSystem {
        OdeSystem::new("decay", 1, 1, |_t, x, dxdt| dxdt[0] = -x[0])
    }

    #[test]
    fn linear_decay_closed_form() {
        let cfg = SimConfig {
            dt_sample: 0.01,
            duration: 1.0,
            substeps: 1,
        };
        let traj = simulate(&decay(), &[1.0], &cfg).unwrap();
        assert_eq!(traj.num_samples(), 101);
        let last = traj.sample(traj.num_samples() - 1)[0];
        assert_relative_eq!(last, (-1.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        // global error on ẋ = −x shrinks ~16× per step halving
        let exact = (-1.0f64).exp();
        let err = |substeps: usize| {
            let cfg = SimConfig {
                dt_sample: 1.0,
                duration: 1.0,
                substeps,
            };
            let traj = simulate(&decay(), &[1.0], &cfg).unwrap();
            (traj.sample(1)[0] - exact).abs()
        };
        let e1 = err(4);
        let e2 = err(8);
        let e3 = err(16);
        let r1 = e1 / e2;
        let r2 = e2 / e3;
        assert!(r1 > 12.0 && r1 < 20.0, "ratio {r1}");
        assert!(r2 > 12.0 && r2 < 20.0, "ratio {r2}");
    }

    #[test]
    fn divergence_reported_with_time() {
        let blowup = OdeSystem::new("blowup", 1, 1, |_t, x, dxdt| dxdt[0] = x[0] * x[0]);
        let cfg = SimConfig {
            dt_sample: 0.1,
            duration: 10.0,
            substeps: 1,
        };
        let err = simulate(&blowup, &[5.0], &cfg);
        assert!(matches!(err, Err(Error::SimulationDiverged { .. })));
    }

    #[test]
    fn determinism_bitwise() {
        let cfg = SimConfig {
            dt_sample: 0.05,
            duration: 2.0,
            substeps: 2,
        };
        let sys = academic_system(false);
        let a = simulate(&sys, &[0.3, -0.7], &cfg).unwrap();
        let b = simulate(&sys, &[0.3, -0.7], &cfg).unwrap();
        assert_eq!(a.states_flat(), b.states_flat());
        let an = add_noise(&a, 0.01, 99).unwrap();
        let bn = add_noise(&b, 0.01, 99).unwrap();
        assert_eq!(an.states_flat(), bn.states_flat());
    }

    #[test]
    fn noise_zero_sigma_is_identity() {
        let cfg = SimConfig {
            dt_sample: 0.1,
            duration: 1.0,
            substeps: 1,
        };
        let traj = simulate(&decay(), &[1.0], &cfg).unwrap();
        let noisy = add_noise(&traj, 0.0, 7).unwrap();
        assert_eq!(traj.states_flat(), noisy.states_flat());
    }

    #[test]
    fn noise_is_zero_mean() {
        // CLT bound over 10^6 draws: |mean| < 3σ/10³
        let times: Vec<f64> = (0..1_000_000).map(|i| i as f64).collect();
        let states = vec![0.0; 1_000_000];
        let traj = Trajectory::new("z", times, states, 1).unwrap();
        let sigma = 0.01;
        let noisy = add_noise(&traj, sigma, 1234).unwrap();
        let mean: f64 = noisy.states_flat().iter().sum::<f64>() / 1e6;
        assert!(mean.abs() < 3.0 * sigma / 1e3, "mean {mean}");
    }

    #[test]
    fn unit_circle_samples_have_unit_norm() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = sample_initial(&InitialCondition::UnitCircle, &mut rng);
            let norm = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn box_samples_bounded_and_centered() {
        use rand::SeedableRng;
        let kind = InitialCondition::Box { side: 2.0, dim: 12 };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut sums = vec![0.0; 12];
        let n = 100_000;
        for _ in 0..n {
            let x = sample_initial(&kind, &mut rng);
            for (s, v) in sums.iter_mut().zip(&x) {
                assert!(v.abs() <= 1.0);
                *s += v;
            }
        }
        for s in sums {
            assert!((s / n as f64).abs() < 0.02);
        }
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(42, 0));
    }
}
