//! Experiment harness: randomized fault-detection trials, aggregation of
//! false-positive/false-negative rates, the training-set-size sweep, and the
//! OKPCA-vs-KPCA comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind, KpcaConfig, KpcaMode};
use crate::dataset::{Label, ManifestEntry};
use crate::detector::{self, DetectionReport, Verdict};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::kpca::{self, KpcaModel};
use crate::model;
use crate::sim::{
    academic_system, add_noise, derive_seed, quadrotor_system, sample_initial, simulate,
    InitialCondition, OdeSystem,
};
use crate::trajectory::Trajectory;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trajectories generated for one trial, with manifest provenance.
pub struct TrialData {
    pub training: Vec<(Trajectory, ManifestEntry)>,
    pub test_normal: Vec<(Trajectory, ManifestEntry)>,
    pub test_faulty: Vec<(Trajectory, ManifestEntry)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_positives: usize,
    pub true_negatives: usize,
    pub threshold: f64,
    pub max_training_error: f64,
    pub reports: Vec<DetectionReport>,
}

impl TrialOutcome {
    pub fn total_tests(&self) -> usize {
        self.false_positives + self.false_negatives + self.true_positives + self.true_negatives
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerTrialStats {
    pub trial: usize,
    pub seed: u64,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub trials: usize,
    pub num_test_normal: usize,
    pub num_test_faulty: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// FP / (trials · num_test_normal)
    pub false_positive_rate: f64,
    /// FN / (trials · num_test_faulty)
    pub false_negative_rate: f64,
    pub per_trial: Vec<PerTrialStats>,
}

enum SystemPair {
    Academic,
    Quadrotor {
        nominal: OdeSystem,
        faulty: OdeSystem,
        gains_label: (String, String),
    },
}

fn build_systems(cfg: &ExperimentConfig) -> Result<SystemPair> {
    match cfg.experiment {
        ExperimentKind::Academic => Ok(SystemPair::Academic),
        ExperimentKind::QuadrotorMajor | ExperimentKind::QuadrotorMinor => {
            let q = cfg
                .quadrotor
                .ok_or_else(|| Error::Config("missing quadrotor section".into()))?;
            let setpoint = [0.0; 12];
            let fmt = |g: &crate::sim::PidGains| format!("{}/{}/{}", g.kp, g.ki, g.kd);
            Ok(SystemPair::Quadrotor {
                nominal: quadrotor_system(&q.nominal_gains, &setpoint, &q.params),
                faulty: quadrotor_system(&q.fault_gains, &setpoint, &q.params),
                gains_label: (fmt(&q.nominal_gains), fmt(&q.fault_gains)),
            })
        }
    }
}

/// Generate all trajectories for one trial. Each trajectory gets its own RNG
/// stream derived from `(trial_seed, stream index)`, so generation is
/// reproducible regardless of scheduling.
pub fn generate_trial_data(cfg: &ExperimentConfig, trial_seed: u64) -> Result<TrialData> {
    generate_trial_data_with_m(cfg, trial_seed, cfg.num_training)
}

/// `generate_trial_data` with an explicit training count, for sweep runs.
pub fn generate_trial_data_with_m(
    cfg: &ExperimentConfig,
    trial_seed: u64,
    num_training: usize,
) -> Result<TrialData> {
    let systems = build_systems(cfg)?;
    let (ic_kind, nominal, faulty, nominal_gains, fault_gains): (
        InitialCondition,
        &OdeSystem,
        &OdeSystem,
        String,
        String,
    );
    let academic_nominal;
    let academic_faulty;
    match &systems {
        SystemPair::Academic => {
            academic_nominal = academic_system(false);
            academic_faulty = academic_system(true);
            ic_kind = InitialCondition::UnitCircle;
            nominal = &academic_nominal;
            faulty = &academic_faulty;
            nominal_gains = String::new();
            fault_gains = String::new();
        }
        SystemPair::Quadrotor {
            nominal: n,
            faulty: f,
            gains_label,
        } => {
            ic_kind = InitialCondition::Box { side: 2.0, dim: 12 };
            nominal = n;
            faulty = f;
            nominal_gains = gains_label.0.clone();
            fault_gains = gains_label.1.clone();
        }
    }

    let make = |prefix: &str,
                label: Label,
                system: &OdeSystem,
                gains: &str,
                stream_offset: u64,
                count: usize|
     -> Result<Vec<(Trajectory, ManifestEntry)>> {
        (0..count)
            .map(|i| {
                let traj_seed = derive_seed(trial_seed, stream_offset + i as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(traj_seed);
                let ic = sample_initial(&ic_kind, &mut rng);
                let clean = simulate(system, &ic, &cfg.sim)?;
                let noisy = add_noise(&clean, cfg.noise_sigma, derive_seed(traj_seed, 1))?;
                let id = format!("{prefix}-{i:03}");
                let entry = ManifestEntry {
                    file: format!("{id}.csv"),
                    label,
                    system: system.name().to_string(),
                    gains: gains.to_string(),
                    seed: traj_seed,
                    noise_sigma: cfg.noise_sigma,
                };
                Ok((noisy.with_id(id), entry))
            })
            .collect()
    };

    Ok(TrialData {
        training: make(
            "train",
            Label::Normal,
            nominal,
            &nominal_gains,
            0,
            num_training,
        )?,
        test_normal: make(
            "test-normal",
            Label::Normal,
            nominal,
            &nominal_gains,
            1_000_000,
            cfg.num_test_normal,
        )?,
        test_faulty: make(
            "test-faulty",
            Label::Faulty,
            faulty,
            &fault_gains,
            2_000_000,
            cfg.num_test_faulty,
        )?,
    })
}

fn tally(
    reports: Vec<DetectionReport>,
    labels: &[Label],
    threshold: f64,
    max_err: f64,
) -> TrialOutcome {
    let mut out = TrialOutcome {
        false_positives: 0,
        false_negatives: 0,
        true_positives: 0,
        true_negatives: 0,
        threshold,
        max_training_error: max_err,
        reports: Vec::new(),
    };
    for (report, label) in reports.into_iter().zip(labels) {
        match (label, report.verdict) {
            (Label::Normal, Verdict::Faulty) => out.false_positives += 1,
            (Label::Normal, Verdict::Normal) => out.true_negatives += 1,
            (Label::Faulty, Verdict::Normal) => out.false_negatives += 1,
            (Label::Faulty, Verdict::Faulty) => out.true_positives += 1,
            (Label::Unknown, _) => {}
        }
        out.reports.push(report);
    }
    out
}

/// Fit OKPCA on the trial's training data and classify its test sets.
pub fn run_okpca_on_data(cfg: &ExperimentConfig, data: &TrialData) -> Result<TrialOutcome> {
    let spec = KernelSpec::gaussian(cfg.mu)?;
    let training: Vec<Trajectory> = data.training.iter().map(|(t, _)| t.clone()).collect();
    let fitted = model::fit(&spec, cfg.quadrature, training, cfg.num_components)?;
    let max_err = detector::training_errors(&fitted)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = cfg.threshold_multiplier * max_err;

    let tests: Vec<&(Trajectory, ManifestEntry)> =
        data.test_normal.iter().chain(&data.test_faulty).collect();
    let labels: Vec<Label> = tests.iter().map(|(_, e)| e.label).collect();
    let reports: Vec<DetectionReport> = tests
        .par_iter()
        .map(|(t, _)| detector::classify(&fitted, threshold, t))
        .collect::<Result<_>>()?;
    Ok(tally(reports, &labels, threshold, max_err))
}

/// Fit the KPCA baseline on the same trial data and classify its test sets.
/// `TrajectoryL2` mode embeds each trajectory as one L²-weighted vector;
/// `PooledPoints` mode pools state samples and scores by mean per-point
/// error.
pub fn run_kpca_on_data(
    cfg: &ExperimentConfig,
    kcfg: &KpcaConfig,
    data: &TrialData,
) -> Result<TrialOutcome> {
    let spec = KernelSpec::gaussian(kcfg.mu)?;
    let training: Vec<Trajectory> = data.training.iter().map(|(t, _)| t.clone()).collect();
    // On noise-free data the Gram spectrum can decay below the rank
    // tolerance before `num_components` is reached; fall back to the
    // effective rank so a vanishing trailing eigenvalue does not abort the
    // whole experiment.
    let fit_clamped = |points: ndarray::Array2<f64>| -> Result<KpcaModel> {
        match kpca::kpca_fit(&spec, points.clone(), kcfg.num_components) {
            Err(Error::RankDeficient { rank, .. }) if rank > 0 => {
                kpca::kpca_fit(&spec, points, rank)
            }
            other => other,
        }
    };
    let (fitted, score): (
        KpcaModel,
        Box<dyn Fn(&KpcaModel, &Trajectory) -> Result<f64> + Sync>,
    ) = match kcfg.mode {
        KpcaMode::PooledPoints => {
            let pool = kpca::pool_points(&training, kcfg.max_pool)?;
            (
                fit_clamped(pool)?,
                Box::new(|m, t| kpca::kpca_trajectory_error(m, t)),
            )
        }
        KpcaMode::TrajectoryL2 => {
            let vectors = kpca::trajectory_vectors(&training, cfg.quadrature)?;
            let rule = cfg.quadrature;
            (
                fit_clamped(vectors)?,
                Box::new(move |m, t| kpca::kpca_point_error(m, &kpca::trajectory_vector(t, rule))),
            )
        }
    };

    let training_errors: Vec<f64> = training
        .par_iter()
        .map(|t| score(&fitted, t))
        .collect::<Result<_>>()?;
    let max_err = training_errors
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = cfg.threshold_multiplier * max_err;

    let tests: Vec<&(Trajectory, ManifestEntry)> =
        data.test_normal.iter().chain(&data.test_faulty).collect();
    let labels: Vec<Label> = tests.iter().map(|(_, e)| e.label).collect();
    let reports: Vec<DetectionReport> = tests
        .par_iter()
        .map(|(t, _)| {
            let raw = score(&fitted, t)?;
            Ok(DetectionReport {
                trajectory_id: t.id().to_string(),
                reconstruction_error: raw.max(0.0),
                threshold,
                verdict: if raw > threshold {
                    Verdict::Faulty
                } else {
                    Verdict::Normal
                },
                num_components_used: fitted.num_components(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(tally(reports, &labels, threshold, max_err))
}

///// One full fault-detection trial: generate training and test sets, fit,
/// derive the threshold, classify, tally.
pub fn run_trial(cfg: &ExperimentConfig, trial_seed: u64) -> Result<TrialOutcome> {
    let data = generate_trial_data(cfg, trial_seed)?;
    run_okpca_on_data(cfg, &data)
}

fn summarize(
    cfg: &ExperimentConfig,
    outcomes: Vec<(usize, u64, TrialOutcome)>,
) -> ExperimentSummary {
    let trials = outcomes.len();
    let fp: usize = outcomes.iter().map(|(_, _, o)| o.false_positives).sum();
    let fneg: usize = outcomes.iter().map(|(_, _, o)| o.false_negatives).sum();
    ExperimentSummary {
        trials,
        num_test_normal: cfg.num_test_normal,
        num_test_faulty: cfg.num_test_faulty,
        false_positives: fp,
        false_negatives: fneg,
        false_positive_rate: fp as f64 / (trials * cfg.num_test_normal) as f64,
        false_negative_rate: fneg as f64 / (trials * cfg.num_test_faulty) as f64,
        per_trial: outcomes
            .into_iter()
            .map(|(trial, seed, o)| PerTrialStats {
                trial,
                seed,
                false_positives: o.false_positives,
                false_negatives: o.false_negatives,
                threshold: o.threshold,
            })
            .collect(),
    }
}

/// Run `cfg.trials` independent trials and aggregate FP/FN rates. FP rate is
/// computed over normal tests only, FN rate over faulty tests only.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let outcomes: Vec<(usize, u64, TrialOutcome)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(cfg.seed, trial as u64);
            let outcome = run_trial(cfg, trial_seed)?;
            Ok((trial, trial_seed, outcome))
        })
        .collect::<Result<_>>()?;
    Ok(summarize(cfg, outcomes))
}

/// Training-set-size sweep: run the experiment once per M in `cfg.m_sweep`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<(usize, ExperimentSummary)>> {
    cfg.validate()?;
    if cfg.m_sweep.is_empty() {
        return Err(Error::Config("m_sweep is empty".into()));
    }
    cfg.m_sweep
        .iter()
        .map(|&m| {
            let outcomes: Vec<(usize, u64, TrialOutcome)> = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let trial_seed = derive_seed(cfg.seed, (m as u64) << 32 | trial as u64);
                    let data = generate_trial_data_with_m(cfg, trial_seed, m)?;
                    let outcome = run_okpca_on_data(cfg, &data)?;
                    Ok((trial, trial_seed, outcome))
                })
                .collect::<Result<_>>()?;
            Ok((m, summarize(cfg, outcomes)))
        })
        .collect()
}

/// Aggregate rates of both methods over the same trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub okpca: ExperimentSummary,
    pub kpca: ExperimentSummary,
}

/// Run OKPCA and the KPCA baseline on identical trial data.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ComparisonSummary> {
    cfg.validate()?;
    let kcfg = cfg
        .kpca
        .ok_or_else(|| Error::Config("comparison requires a [kpca] section".into()))?;
    let results: Vec<(usize, u64, TrialOutcome, TrialOutcome)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(cfg.seed, trial as u64);
            let data = generate_trial_data(cfg, trial_seed)?;
            let ok = run_okpca_on_data(cfg, &data)?;
            let kp = run_kpca_on_data(cfg, &kcfg, &data)?;
            Ok((trial, trial_seed, ok, kp))
        })
        .collect::<Result<_>>()?;
    let okpca_outcomes = results
        .iter()
        .map(|(t, s, o, _)| (*t, *s, o.clone()))
        .collect();
    let kpca_outcomes = results.into_iter().map(|(t, s, _, k)| (t, s, k)).collect();
    Ok(ComparisonSummary {
        okpca: summarize(cfg, okpca_outcomes),
        kpca: summarize(cfg, kpca_outcomes),
    })
}
