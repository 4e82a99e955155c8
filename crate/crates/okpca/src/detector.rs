//! Reconstruction-error fault detection: the error statistic, threshold
//! selection from training data, and classification of test trajectories.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Embedding, OkpcaModel};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Normal,
    Faulty,
}

/// Per-trajectory detection outcome. `reconstruction_error` is clamped to 0
/// at reporting level; tiny negative values are floating-point artifacts and
/// clamping cannot flip a verdict against a positive threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    pub trajectory_id: String,
    pub reconstruction_error: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub num_components_used: usize,
}

fn error_from_embedding(e: &Embedding) -> f64 {
    e.centered_norm_sq - e.projections.iter().map(|p| p * p).sum::<f64>()
}

/// Reconstruction error `R(γ) = ‖Φ̃(γ)‖² − Σ_k ⟨Φ̃(γ), v^(k)⟩²`. Raw value;
/// may be a tiny negative number from floating-point cancellation.
pub fn reconstruction_error(model: &OkpcaModel, gamma: &Trajectory) -> Result<f64> {
    Ok(error_from_embedding(&model.embed(gamma)?))
}

/// In-sample reconstruction errors of the training trajectories, computed
/// from the cached Gram matrix.
pub fn training_errors(model: &OkpcaModel) -> Vec<f64> {
    model
        .training_embeddings()
        .iter()
        .map(error_from_embedding)
        .collect()
}

/// Threshold `ε = multiplier · max_i R(γ_i)` over the training set, using the
/// model's own component count.
///
/// When `N` equals the rank, every training error is ~0 and the detector
/// degenerates; a warning is printed in that case.
pub fn threshold_from_training(model: &OkpcaModel, multiplier: f64) -> f64 {
    let max_err = training_errors(model)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if max_err < 1e-12 {
        eprintln!(
            "warning: max training reconstruction error {max_err:.3e} is near zero; \
             threshold will classify almost everything as faulty (is N = rank?)"
        );
    }
    multiplier * max_err
}

/// Classify a test trajectory. Faulty iff `R(γ) > ε`, strictly: a tie is
/// Normal.
pub fn classify(model: &OkpcaModel, threshold: f64, gamma: &Trajectory) -> Result<DetectionReport> {
    let raw = reconstruction_error(model, gamma)?;
    Ok(DetectionReport {
        trajectory_id: gamma.id().to_string(),
        reconstruction_error: raw.max(0.0),
        threshold,
        verdict: if raw > threshold {
            Verdict::Faulty
        } else {
            Verdict::Normal
        },
        num_components_used: model.num_components(),
    })
}

/// Write reports as CSV: `id,reconstruction_error,threshold,verdict`.
pub fn write_reports<W: std::io::Write>(
    mut w: W,
    reports: &[DetectionReport],
) -> std::io::Result<()> {
    writeln!(w, "id,reconstruction_error,threshold,verdict")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{}",
            r.trajectory_id,
            r.reconstruction_error,
            r.threshold,
            match r.verdict {
                Verdict::Normal => "normal",
                Verdict::Faulty => "faulty",
            }
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::model::fit;
    use crate::trajectory::QuadratureRule;
    use approx::assert_relative_eq;

    fn constant(id: &str, x: &[f64], duration: f64) -> Trajectory {
        let times = vec![0.0, duration / 2.0, duration];
        let states: Vec<f64> = (0..3).flat_map(|_| x.iter().copied()).collect();
        Trajectory::new(id, times, states, x.len()).unwrap()
    }

    fn spec() -> KernelSpec {
        KernelSpec::gaussian(0.6).unwrap()
    }

    fn four_constants() -> Vec<Trajectory> {
        vec![
            constant("a", &[0.5, 0.1], 1.0),
            constant("b", &[-0.4, 0.2], 1.5),
            constant("c", &[0.1, -0.6], 0.8),
            constant("d", &[0.3, 0.4], 1.2),
        ]
    }

    #[test]
    fn training_error_zero_at_full_rank() {
        let trajs = four_constants();
        let probe = fit(&spec(), QuadratureRule::Trapezoid, trajs.clone(), 1).unwrap();
        let model = fit(
            &spec(),
            QuadratureRule::Trapezoid,
            trajs.clone(),
            probe.rank(),
        )
        .unwrap();
        for t in &trajs {
            let r = reconstruction_error(&model, t).unwrap();
            assert!(r.abs() < 1e-8, "training error {r}");
        }
        for r in training_errors(&model) {
            assert!(r.abs() < 1e-8);
        }
    }

    #[test]
    fn mirror_pair_training_error_zero() {
        let g1 = constant("p", &[0.4, 0.0], 2.0);
        let g2 = constant("m", &[-0.4, 0.0], 2.0);
        let model = fit(&spec(), QuadratureRule::Trapezoid, vec![g1.clone(), g2], 1).unwrap();
        let r = reconstruction_error(&model, &g1).unwrap();
        assert!(r.abs() < 1e-10, "mirror-pair error {r}");
    }

    #[test]
    fn monotone_nonincreasing_in_component_count() {
        let trajs = four_constants();
        let probe = fit(&spec(), QuadratureRule::Trapezoid, trajs, 1).unwrap();
        let test = constant("t", &[0.0, 0.2], 1.1);
        let mut prev = f64::INFINITY;
        for n in 1..=probe.rank() {
            let model = probe.with_num_components(n).unwrap();
            let r = reconstruction_error(&model, &test).unwrap();
            assert!(r <= prev + 1e-9, "R grew from {prev} to {r} at N={n}");
            assert!(r >= -1e-8);
            prev = r;
        }
    }

    #[test]
    fn geometric_identity() {
        // R(γ) = ⟨Φ̃, Φ̃ − Σ⟨Φ̃,v⟩v⟩ expands to norm² − Σ proj²; check the two
        // routes agree when the second is assembled term by term.
        let trajs = four_constants();
        let model = fit(&spec(), QuadratureRule::Trapezoid, trajs, 2).unwrap();
        let test = constant("t", &[0.15, -0.3], 0.9);
        let e = model.embed(&test).unwrap();
        // ⟨Φ̃, Σ proj_k v_k⟩ = Σ proj_k ⟨Φ̃, v_k⟩ = Σ proj_k²
        let inner_form = e.centered_norm_sq - e.projections.iter().map(|p| p * p).sum::<f64>();
        let direct = reconstruction_error(&model, &test).unwrap();
        assert_relative_eq!(direct, inner_form, epsilon = 1e-9);
    }

    #[test]
    fn classify_strictness_and_clamping() {
        let trajs = four_constants();
        let model = fit(&spec(), QuadratureRule::Trapezoid, trajs.clone(), 2).unwrap();
        let test = constant("t", &[0.15, -0.3], 0.9);
        let r = reconstruction_error(&model, &test).unwrap();
        // tie goes to Normal: Def. of faulty is a strict inequality
        let at_tie = classify(&model, r, &test).unwrap();
        assert_eq!(at_tie.verdict, Verdict::Normal);
        let below = classify(&model, r * (1.0 - 1e-9), &test).unwrap();
        assert_eq!(below.verdict, Verdict::Faulty);
        // training member at full rank stays normal under any sane threshold
        let full = fit(
            &spec(),
            QuadratureRule::Trapezoid,
            trajs.clone(),
            model.rank(),
        )
        .unwrap();
        let rep = classify(&full, 1e-6, &trajs[0]).unwrap();
        assert_eq!(rep.verdict, Verdict::Normal);
        assert!(rep.reconstruction_error >= 0.0);
    }

    #[test]
    fn threshold_multiplier_applied() {
        let trajs = four_constants();
        let model = fit(&spec(), QuadratureRule::Trapezoid, trajs, 2).unwrap();
        let max_err = training_errors(&model)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let eps = threshold_from_training(&model, 2.0);
        assert_relative_eq!(eps, 2.0 * max_err, epsilon = 1e-12);
    }

    #[test]
    fn report_csv_format() {
        let reports = vec![DetectionReport {
            trajectory_id: "traj-0".into(),
            reconstruction_error: 0.25,
            threshold: 0.5,
            verdict: Verdict::Normal,
            num_components_used: 3,
        }];
        let mut buf = Vec::new();
        write_reports(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "id,reconstruction_error,threshold,verdict\ntraj-0,0.25,0.5,normal\n"
        );
    }
}
