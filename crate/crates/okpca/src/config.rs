//! Experiment configuration: all tunables of a trial batch, TOML
//! (de)serialization, and the named presets for the reference experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{PidGains, QuadrotorParams, SimConfig};
use crate::trajectory::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Academic,
    QuadrotorMajor,
    QuadrotorMinor,
}

/// Quadrotor-specific settings: the nominal and fault gain sets, the
/// setpoint, and the physical constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadrotorConfig {
    pub nominal_gains: PidGains,
    pub fault_gains: PidGains,
    pub params: QuadrotorParams,
}

/// How the KPCA baseline forms its data units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KpcaMode {
    /// Pool individual state samples across trajectories (subsampled to
    /// `max_pool`) and score a trajectory by its mean per-point error.
    /// Blind to curve shape: a fault whose states stay inside the nominal
    /// point cloud is invisible to this variant.
    PooledPoints,
    /// One vector per trajectory under the time-weighted L² distance
    /// (see `kpca::trajectory_vector`). This is the variant used for the
    /// method comparison.
    #[default]
    TrajectoryL2,
}

/// KPCA baseline settings for the comparison runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KpcaConfig {
    pub mu: f64,
    pub num_components: usize,
    /// Cap on the pooled training point count (cubic eigensolver cost).
    /// Only used in `PooledPoints` mode.
    pub max_pool: usize,
    #[serde(default)]
    pub mode: KpcaMode,
}

impl Default for KpcaConfig {
    fn default() -> Self {
        KpcaConfig {
            mu: 5.0,
            num_components: 20,
            max_pool: 2000,
            mode: KpcaMode::default(),
        }
    }
}

/// All tunables of one trial batch. Echoed into every output file for
/// provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Training trajectory count M.
    pub num_training: usize,
    pub num_test_normal: usize,
    pub num_test_faulty: usize,
    /// Kernel width μ.
    pub mu: f64,
    /// Retained component count N.
    pub num_components: usize,
    /// Threshold multiplier c in ε = c·max training error.
    pub threshold_multiplier: f64,
    pub noise_sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub quadrature: QuadratureRule,
    pub sim: SimConfig,
    /// Training-set sizes for a sweep run; empty means no sweep.
    #[serde(default)]
    pub m_sweep: Vec<usize>,
    #[serde(default)]
    pub quadrotor: Option<QuadrotorConfig>,
    #[serde(default)]
    pub kpca: Option<KpcaConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: usize, name: &str| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be at least 1")))
            } else {
                Ok(())
            }
        };
        positive(self.num_training, "num_training")?;
        positive(self.num_test_normal, "num_test_normal")?;
        positive(self.num_test_faulty, "num_test_faulty")?;
        positive(self.num_components, "num_components")?;
        positive(self.trials, "trials")?;
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.threshold_multiplier > 0.0) {
            return Err(Error::Config(
                "threshold_multiplier must be positive".into(),
            ));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be nonnegative".into()));
        }
        self.sim.validate()?;
        if matches!(
            self.experiment,
            ExperimentKind::QuadrotorMajor | ExperimentKind::QuadrotorMinor
        ) && self.quadrotor.is_none()
        {
            return Err(Error::Config(
                "quadrotor experiments require a [quadrotor] section".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    /// The resolved config as `# `-prefixed comment lines, embedded at the
    /// top of every output file so a run can be re-executed from its output.
    pub fn echo_header(&self) -> String {
        let mut out = String::new();
        for line in self.to_toml().lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    /// Recover a config from an output file that begins with an echo header.
    pub fn from_echo_header(text: &str) -> Result<Self> {
        let toml_text: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        Self::from_toml(&toml_text)
    }
}

/// Named presets carrying the reference experiments' parameters. Trial
/// counts are desk-scale defaults (the full-scale studies used 1000 and 100
/// trials); raise `--trials` for full scale.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let academic_sim = SimConfig {
        dt_sample: 0.01,
        duration: 2.0,
        substeps: 1,
    };
    let quad_sim = SimConfig {
        dt_sample: 0.2, // 5 Hz
        duration: 15.2,
        substeps: 10,
    };
    let quad_base = |fault_gains: PidGains| QuadrotorConfig {
        nominal_gains: PidGains::new(5.0, 2.0, 8.0).expect("valid"),
        fault_gains,
        params: QuadrotorParams::default(),
    };
    let cfg = match name {
        "exp1" => ExperimentConfig {
            experiment: ExperimentKind::Academic,
            num_training: 100,
            num_test_normal: 20,
            num_test_faulty: 20,
            mu: 0.6,
            num_components: 20,
            threshold_multiplier: 2.0,
            noise_sigma: 0.0,
            trials: 100,
            seed: 2024,
            quadrature: QuadratureRule::Trapezoid,
            sim: academic_sim,
            m_sweep: vec![],
            quadrotor: None,
            kpca: Some(KpcaConfig::default()),
        },
        "exp1-noisy" => ExperimentConfig {
            num_training: 150,
            mu: 0.4,
            noise_sigma: 0.01,
            ..preset("exp1")?
        },
        "exp2-major" => ExperimentConfig {
            experiment: ExperimentKind::QuadrotorMajor,
            num_training: 100,
            num_test_normal: 20,
            num_test_faulty: 20,
            mu: 1000.0,
            num_components: 50,
            threshold_multiplier: 10.0,
            noise_sigma: 0.01,
            trials: 1,
            seed: 2024,
            quadrature: QuadratureRule::Trapezoid,
            sim: quad_sim,
            m_sweep: vec![],
            quadrotor: Some(quad_base(PidGains::new(15.0, 12.0, 2.0).expect("valid"))),
            kpca: None,
        },
        "exp2-minor" => ExperimentConfig {
            experiment: ExperimentKind::QuadrotorMinor,
            threshold_multiplier: 3.0,
            quadrotor: Some(quad_base(PidGains::new(4.0, 3.0, 7.0).expect("valid"))),
            ..preset("exp2-major")?
        },
        "size-sweep" => ExperimentConfig {
            trials: 20,
            m_sweep: vec![50, 100, 150, 300],
            ..preset("exp1")?
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available: exp1, exp1-noisy, exp2-major, exp2-minor, size-sweep"
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
