//! Command-line entry point: dataset generation, model fitting, scoring,
//! fault classification, and experiment reproduction.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use okpca::config::{preset, ExperimentConfig};
use okpca::dataset::{read_dataset, write_dataset, Label};
use okpca::detector;
use okpca::error::{Error, Result};
use okpca::experiment::{
    generate_trial_data, run_comparison, run_experiment, run_sweep, ExperimentSummary,
};
use okpca::kernel::KernelSpec;
use okpca::model::{fit, OkpcaModel};
use okpca::sim::derive_seed;
use okpca::trajectory::QuadratureRule;

#[derive(Parser)]
#[command(
    name = "okpca",
    version,
    about = "Occupation-kernel PCA fault detection"
)]
struct Cli {
    /// rayon thread count (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset: exp1, exp1-noisy, exp2-major, exp2-minor, size-sweep
    #[arg(long)]
    preset: Option<String>,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's trial count
    #[arg(long)]
    trials: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => ExperimentConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => return Err(Error::Config("pass --preset or --config".into())),
            (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate one trial's datasets (train/, test-normal/, test-faulty/)
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an OKPCA model on a dataset directory
    Fit {
        /// Dataset directory (with manifest.csv)
        #[arg(long)]
        data: PathBuf,
        /// Output model file (JSON)
        #[arg(long)]
        out: PathBuf,
        /// Kernel width mu
        #[arg(long)]
        mu: f64,
        /// Number of principal components N
        #[arg(long)]
        components: usize,
        /// Quadrature rule
        #[arg(long, default_value = "trapezoid")]
        quadrature: String,
    },
    /// Reconstruction errors of a dataset against a model
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Score plus threshold and normal/faulty verdicts
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV
        #[arg(long)]
        out: PathBuf,
        /// Threshold multiplier c in eps = c * max training error
        #[arg(long, default_value_t = 2.0)]
        multiplier: f64,
    },
    /// Run repeated fault-detection trials and report FP/FN rates
    Experiment {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Four-row OKPCA vs KPCA comparison (noise-free and noisy)
    CompareKpca {
        /// Override both presets' master seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override both presets' trial count
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_quadrature(name: &str) -> Result<QuadratureRule> {
    match name {
        "trapezoid" => Ok(QuadratureRule::Trapezoid),
        "riemann" => Ok(QuadratureRule::Riemann),
        other => Err(Error::Config(format!(
            "unknown quadrature rule {other:?} (trapezoid, riemann)"
        ))),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let data = generate_trial_data(cfg, derive_seed(cfg.seed, 0))?;
    write_dataset(&out.join("train"), &data.training)?;
    write_dataset(&out.join("test-normal"), &data.test_normal)?;
    write_dataset(&out.join("test-faulty"), &data.test_faulty)?;
    write_file(&out.join("config.toml"), &cfg.to_toml())?;
    println!(
        "wrote {} training, {} normal test, {} faulty test trajectories to {}",
        data.training.len(),
        data.test_normal.len(),
        data.test_faulty.len(),
        out.display()
    );
    Ok(())
}

fn cmd_fit(data: &Path, out: &Path, mu: f64, components: usize, quadrature: &str) -> Result<()> {
    let rule = parse_quadrature(quadrature)?;
    let spec = KernelSpec::gaussian(mu)?;
    let dataset = read_dataset(data)?;
    let model = fit(&spec, rule, dataset.trajectories(), components)?;
    model.save(out)?;
    println!(
        "fitted OKPCA model: M={}, N={}, rank={}, top eigenvalue {:.6e}; saved to {}",
        model.num_training(),
        model.num_components(),
        model.rank(),
        model.eigenvalues().first().copied().unwrap_or(0.0),
        out.display()
    );
    Ok(())
}

fn cmd_score(model_path: &Path, data: &Path, out: &Path) -> Result<()> {
    let model = OkpcaModel::load(model_path)?;
    let dataset = read_dataset(data)?;
    let mut csv = String::from("id,reconstruction_error\n");
    for (traj, _) in &dataset.entries {
        let err = detector::reconstruction_error(&model, traj)?;
        csv.push_str(&format!("{},{}\n", traj.id(), err.max(0.0)));
    }
    write_file(out, &csv)?;
    println!(
        "scored {} trajectories into {}",
        dataset.entries.len(),
        out.display()
    );
    Ok(())
}

fn cmd_detect(model_path: &Path, data: &Path, out: &Path, multiplier: f64) -> Result<()> {
    if multiplier <= 0.0 {
        return Err(Error::Config("multiplier must be positive".into()));
    }
    let model = OkpcaModel::load(model_path)?;
    let dataset = read_dataset(data)?;
    let threshold = detector::threshold_from_training(&model, multiplier);
    let reports: Vec<_> = dataset
        .entries
        .iter()
        .map(|(traj, _)| detector::classify(&model, threshold, traj))
        .collect::<Result<_>>()?;
    let mut buf = Vec::new();
    detector::write_reports(&mut buf, &reports)
        .map_err(|e| Error::io(out.display().to_string(), e))?;
    write_file(out, &String::from_utf8(buf).expect("utf8"))?;
    let faulty = reports
        .iter()
        .filter(|r| r.verdict == detector::Verdict::Faulty)
        .count();
    println!(
        "classified {} trajectories ({} faulty) at threshold {:.6e} into {}",
        reports.len(),
        faulty,
        threshold,
        out.display()
    );
    Ok(())
}

fn summary_csv(cfg: &ExperimentConfig, label: &str, summary: &ExperimentSummary) -> String {
    let mut out = cfg.echo_header();
    out.push_str("run,trials,false_positives,false_negatives,fp_rate,fn_rate\n");
    out.push_str(&format!(
        "{label},{},{},{},{},{}\n",
        summary.trials,
        summary.false_positives,
        summary.false_negatives,
        summary.false_positive_rate,
        summary.false_negative_rate
    ));
    out
}

fn per_trial_csv(cfg: &ExperimentConfig, summary: &ExperimentSummary) -> String {
    let mut out = cfg.echo_header();
    out.push_str("trial,seed,false_positives,false_negatives,threshold\n");
    for t in &summary.per_trial {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            t.trial, t.seed, t.false_positives, t.false_negatives, t.threshold
        ));
    }
    out
}

fn print_summary(label: &str, s: &ExperimentSummary) {
    println!(
        "{label}: {} trials, FP {}/{} ({:.3}%), FN {}/{} ({:.3}%)",
        s.trials,
        s.false_positives,
        s.trials * s.num_test_normal,
        100.0 * s.false_positive_rate,
        s.false_negatives,
        s.trials * s.num_test_faulty,
        100.0 * s.false_negative_rate
    );
}

fn cmd_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    if cfg.m_sweep.is_empty() {
        let summary = run_experiment(cfg)?;
        write_file(
            &out.join("summary.csv"),
            &summary_csv(cfg, "okpca", &summary),
        )?;
        write_file(&out.join("trials.csv"), &per_trial_csv(cfg, &summary))?;
        print_summary("okpca", &summary);
    } else {
        let results = run_sweep(cfg)?;
        let mut csv = cfg.echo_header();
        csv.push_str("m,trials,false_positives,false_negatives,fp_rate,fn_rate\n");
        for (m, summary) in &results {
            csv.push_str(&format!(
                "{m},{},{},{},{},{}\n",
                summary.trials,
                summary.false_positives,
                summary.false_negatives,
                summary.false_positive_rate,
                summary.false_negative_rate
            ));
            print_summary(&format!("M={m}"), summary);
            write_file(
                &out.join(format!("trials-m{m}.csv")),
                &per_trial_csv(cfg, summary),
            )?;
        }
        write_file(&out.join("sweep.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_compare_kpca(seed: Option<u64>, trials: Option<usize>, out: &Path) -> Result<()> {
    let mut rows = String::from("method,noise,trials,fp_rate,fn_rate\n");
    for (preset_name, noise_label) in [("exp1", "no-noise"), ("exp1-noisy", "with-noise")] {
        let mut cfg = preset(preset_name)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(t) = trials {
            cfg.trials = t;
        }
        let comparison = run_comparison(&cfg)?;
        print_summary(&format!("OKPCA {noise_label}"), &comparison.okpca);
        print_summary(&format!("KPCA {noise_label}"), &comparison.kpca);
        for (method, s) in [("okpca", &comparison.okpca), ("kpca", &comparison.kpca)] {
            rows.push_str(&format!(
                "{method},{noise_label},{},{},{}\n",
                s.trials, s.false_positive_rate, s.false_negative_rate
            ));
        }
        write_file(
            &out.join(format!("comparison-{noise_label}.csv")),
            &summary_csv(&cfg, "okpca", &comparison.okpca),
        )?;
    }
    write_file(&out.join("comparison.csv"), &rows)?;
    Ok(())
}

/// Experiment per-trial report emission: per-trajectory reconstruction
/// errors with true class labels, ready for plotting.
fn cmd_experiment_reports(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let data = generate_trial_data(cfg, derive_seed(cfg.seed, 0))?;
    let outcome = okpca::experiment::run_okpca_on_data(cfg, &data)?;
    let labels: Vec<Label> = data
        .test_normal
        .iter()
        .chain(&data.test_faulty)
        .map(|(_, e)| e.label)
        .collect();
    let mut csv = cfg.echo_header();
    csv.push_str("id,class,reconstruction_error,threshold,verdict\n");
    for (report, label) in outcome.reports.iter().zip(&labels) {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            report.trajectory_id,
            match label {
                Label::Normal => "normal",
                Label::Faulty => "faulty",
                Label::Unknown => "unknown",
            },
            report.reconstruction_error,
            report.threshold,
            match report.verdict {
                detector::Verdict::Normal => "normal",
                detector::Verdict::Faulty => "faulty",
            }
        ));
    }
    write_file(out, &csv)?;
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config.resolve()?, out),
        Command::Fit {
            data,
            out,
            mu,
            components,
            quadrature,
        } => cmd_fit(data, out, *mu, *components, quadrature),
        Command::Score { model, data, out } => cmd_score(model, data, out),
        Command::Detect {
            model,
            data,
            out,
            multiplier,
        } => cmd_detect(model, data, out, *multiplier),
        Command::Experiment { config, out } => {
            let cfg = config.resolve()?;
            cmd_experiment(&cfg, out)?;
            // also emit one example trial's per-trajectory errors for plotting
            cmd_experiment_reports(&cfg, &out.join("trial-0-reports.csv"))
        }
        Command::CompareKpca { seed, trials, out } => cmd_compare_kpca(*seed, *trials, out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
