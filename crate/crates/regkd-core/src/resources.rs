//! Analytic resource planning and training-log analysis.
//!
//! The VRAM estimator is a standard components model — weights + gradients
//! + optimizer state + activation overhead — with two shipped profiles
//! bracketing full fine-tuning of a 7B model against its 4-bit low-rank
//! adaptation. It is a planning tool, not a measurement: it answers "does
//! this configuration plausibly fit on this card", not "what will the
//! driver report". GB means 2^30 bytes throughout.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

const BYTES_PER_GB: f64 = (1u64 << 30) as f64;

/// Memory-relevant shape of a fine-tuning configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    /// Parameter count of the base model.
    pub n_params: u64,
    /// Bits per stored weight (4, 8, 16, or 32).
    pub weight_bits: u32,
    /// Fraction of parameters that are trainable; 1.0 is full fine-tuning,
    /// small values model low-rank adapters.
    pub trainable_fraction: f64,
    /// Bytes of gradient state per trainable parameter.
    pub grad_bytes_per_trainable: f64,
    /// Bytes of optimizer state per trainable parameter.
    pub optimizer_bytes_per_trainable: f64,
    /// Flat allowance for activations, buffers, and framework overhead.
    pub activation_overhead_gb: f64,
}

impl ModelProfile {
    pub fn validate(&self) -> Result<(), ResourceError> {
        if !matches!(self.weight_bits, 4 | 8 | 16 | 32) {
            return Err(ResourceError::InvalidProfile("weight_bits must be 4, 8, 16, or 32".into()));
        }
        if self.n_params == 0 {
            return Err(ResourceError::InvalidProfile("n_params must be positive".into()));
        }
        if !(self.trainable_fraction > 0.0 && self.trainable_fraction <= 1.0) {
            return Err(ResourceError::InvalidProfile("trainable_fraction must be in (0, 1]".into()));
        }
        if self.grad_bytes_per_trainable < 0.0
            || self.optimizer_bytes_per_trainable < 0.0
            || self.activation_overhead_gb < 0.0
        {
            return Err(ResourceError::InvalidProfile("byte and overhead fields must be non-negative".into()));
        }
        Ok(())
    }
}

/// Full 16-bit fine-tuning of a 7B model with a momentum+variance optimizer.
pub fn full_ft_7b() -> ModelProfile {
    ModelProfile {
        n_params: 7_000_000_000,
        weight_bits: 16,
        trainable_fraction: 1.0,
        grad_bytes_per_trainable: 2.0,
        optimizer_bytes_per_trainable: 8.0,
        activation_overhead_gb: 6.0,
    }
}

/// 4-bit quantized base with ~1% trainable low-rank adapter parameters.
pub fn qlora_7b() -> ModelProfile {
    ModelProfile {
        n_params: 7_000_000_000,
        weight_bits: 4,
        trainable_fraction: 0.01,
        grad_bytes_per_trainable: 2.0,
        optimizer_bytes_per_trainable: 8.0,
        activation_overhead_gb: 10.0,
    }
}

/// Looks up a shipped profile preset by name.
pub fn preset(name: &str) -> Option<ModelProfile> {
    match name {
        "full-ft-7b" => Some(full_ft_7b()),
        "qlora-7b" => Some(qlora_7b()),
        _ => None,
    }
}

pub const PRESET_NAMES: &[&str] = &["full-ft-7b", "qlora-7b"];

/// Component breakdown of a VRAM estimate, in GB (2^30 bytes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub weights_gb: f64,
    pub gradients_gb: f64,
    pub optimizer_gb: f64,
    pub activations_gb: f64,
    pub total_gb: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResourceError {
    #[error("invalid model profile: {0}")]
    InvalidProfile(String),
    #[error("need at least 2 loss points, got {0}")]
    TooFewPoints(usize),
    #[error("loss log line {line}: {reason}")]
    BadLossLog { line: usize, reason: String },
}

/// Estimates training VRAM for a profile.
///
/// weights = n_params × weight_bits / 8; gradients and optimizer state
/// scale with the trainable fraction; activations are the flat overhead.
/// Monotone in every field.
pub fn estimate_vram(profile: &ModelProfile) -> Result<MemoryEstimate, ResourceError> {
    profile.validate()?;
    let n = profile.n_params as f64;
    let trainable = n * profile.trainable_fraction;
    let weights_gb = n * profile.weight_bits as f64 / 8.0 / BYTES_PER_GB;
    let gradients_gb = trainable * profile.grad_bytes_per_trainable / BYTES_PER_GB;
    let optimizer_gb = trainable * profile.optimizer_bytes_per_trainable / BYTES_PER_GB;
    let activations_gb = profile.activation_overhead_gb;
    Ok(MemoryEstimate {
        weights_gb,
        gradients_gb,
        optimizer_gb,
        activations_gb,
        total_gb: weights_gb + gradients_gb + optimizer_gb + activations_gb,
    })
}

/// One step of a training-loss log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: u64,
    pub loss: f64,
}

/// Summary of a loss curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub initial: f64,
    pub final_loss: f64,
    /// `(initial - final) / initial`; 0 when the curve starts at 0.
    pub drop_ratio: f64,
    /// First step from which every later loss stays within `tolerance` of
    /// the final loss, provided at least `stabilization_window` points lie
    /// in that stable tail. `None` when the curve never settles.
    pub stabilized_step: Option<u64>,
    /// Count of adjacent increases.
    pub monotone_violations: usize,
}

/// Analyzes a loss log. Steps must be strictly increasing; values, not
/// step spacing, drive every field except the reported step label.
pub fn analyze_convergence(
    points: &[LossPoint],
    stabilization_window: usize,
    tolerance: f64,
) -> Result<ConvergenceReport, ResourceError> {
    assert!(stabilization_window >= 1, "stabilization_window must be at least 1");
    assert!(tolerance >= 0.0, "tolerance must be non-negative");
    if points.len() < 2 {
        return Err(ResourceError::TooFewPoints(points.len()));
    }
    for pair in points.windows(2) {
        if pair[1].step <= pair[0].step {
            return Err(ResourceError::BadLossLog {
                line: 0,
                reason: "steps must be strictly increasing".to_string(),
            });
        }
    }

    let initial = points[0].loss;
    let final_loss = points[points.len() - 1].loss;
    let drop_ratio = if initial == 0.0 { 0.0 } else { (initial - final_loss) / initial };

    let within = |p: &LossPoint| (p.loss - final_loss).abs() <= tolerance;
    let mut stabilized_step = None;
    for i in 0..points.len() {
        if points.len() - i >= stabilization_window && points[i..].iter().all(within) {
            stabilized_step = Some(points[i].step);
            break;
        }
    }

    let monotone_violations = points.windows(2).filter(|p| p[1].loss > p[0].loss).count();

    Ok(ConvergenceReport { initial, final_loss, drop_ratio, stabilized_step, monotone_violations })
}

/// Parses a `step,loss` CSV (header required).
pub fn parse_loss_csv(content: &str) -> Result<Vec<LossPoint>, ResourceError> {
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "step,loss" => {}
        Some((_, header)) => {
            return Err(ResourceError::BadLossLog {
                line: 1,
                reason: alloc::format!("expected header `step,loss`, got `{}`", header.trim()),
            })
        }
        None => return Err(ResourceError::BadLossLog { line: 1, reason: "empty file".into() }),
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (step, loss) = match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(l), None) => (s.trim(), l.trim()),
            _ => {
                return Err(ResourceError::BadLossLog {
                    line: line_no,
                    reason: "expected exactly two comma-separated fields".into(),
                })
            }
        };
        let step: u64 = step.parse().map_err(|_| ResourceError::BadLossLog {
            line: line_no,
            reason: alloc::format!("bad step `{step}`"),
        })?;
        let loss: f64 = loss.parse().map_err(|_| ResourceError::BadLossLog {
            line: line_no,
            reason: alloc::format!("bad loss `{loss}`"),
        })?;
        if loss < 0.0 {
            return Err(ResourceError::BadLossLog {
                line: line_no,
                reason: "loss must be non-negative".into(),
            });
        }
        if let Some(last) = points.last() {
            let last: &LossPoint = last;
            if step <= last.step {
                return Err(ResourceError::BadLossLog {
                    line: line_no,
                    reason: "steps must be strictly increasing".into(),
                });
            }
        }
        points.push(LossPoint { step, loss });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const GB: f64 = (1u64 << 30) as f64;

    fn close(a: f64, b: f64, eps: f64) -> bool {
        (a - b).abs() <= eps
    }

    #[test]
    fn full_finetune_estimate_matches_arithmetic() {
        // Recompute each component independently from the formula.
        let est = estimate_vram(&full_ft_7b()).unwrap();
        let n = 7.0e9;
        assert!(close(est.weights_gb, n * 16.0 / 8.0 / GB, 1e-9));
        assert!(close(est.gradients_gb, n * 2.0 / GB, 1e-9));
        assert!(close(est.optimizer_gb, n * 8.0 / GB, 1e-9));
        assert_eq!(est.activations_gb, 6.0);
        assert!(close(
            est.total_gb,
            est.weights_gb + est.gradients_gb + est.optimizer_gb + est.activations_gb,
            1e-12
        ));
        // 13.04 + 13.04 + 52.15 + 6 ≈ 84.2
        assert!(close(est.total_gb, 84.27, 0.05), "got {}", est.total_gb);
        assert!(est.total_gb > 40.0);
    }

    #[test]
    fn qlora_estimate_fits_consumer_budget() {
        let est = estimate_vram(&qlora_7b()).unwrap();
        let n = 7.0e9;
        assert!(close(est.weights_gb, n * 4.0 / 8.0 / GB, 1e-9)); // ≈ 3.26
        let adapters = est.gradients_gb + est.optimizer_gb;
        assert!(close(adapters, n * 0.01 * 10.0 / GB, 1e-9)); // ≈ 0.65
        assert!(est.total_gb <= 16.0, "got {}", est.total_gb);

        let full = estimate_vram(&full_ft_7b()).unwrap();
        assert!(est.total_gb / full.total_gb <= 0.40, "memory reduction weaker than claimed");
    }

    #[test]
    fn zero_overhead_tiny_fraction_limits_to_weights() {
        let mut profile = qlora_7b();
        profile.activation_overhead_gb = 0.0;
        profile.trainable_fraction = 1e-12;
        let est = estimate_vram(&profile).unwrap();
        assert!(close(est.total_gb, est.weights_gb, 1e-6));
    }

    #[test]
    fn estimate_is_monotone_in_each_field() {
        let base = qlora_7b();
        let total = |p: &ModelProfile| estimate_vram(p).unwrap().total_gb;
        let t0 = total(&base);

        let mut p = base.clone();
        p.n_params *= 2;
        assert!(total(&p) >= t0);
        p = base.clone();
        p.weight_bits = 8;
        assert!(total(&p) >= t0);
        p = base.clone();
        p.trainable_fraction = 0.02;
        assert!(total(&p) >= t0);
        p = base.clone();
        p.optimizer_bytes_per_trainable = 12.0;
        assert!(total(&p) >= t0);
        p = base.clone();
        p.activation_overhead_gb += 1.0;
        assert!(total(&p) >= t0);
    }

    #[test]
    fn scaling_params_scales_non_activation_components() {
        let base = full_ft_7b();
        let mut doubled = base.clone();
        doubled.n_params *= 2;
        let a = estimate_vram(&base).unwrap();
        let b = estimate_vram(&doubled).unwrap();
        assert!(close(b.weights_gb, 2.0 * a.weights_gb, 1e-9));
        assert!(close(b.gradients_gb, 2.0 * a.gradients_gb, 1e-9));
        assert!(close(b.optimizer_gb, 2.0 * a.optimizer_gb, 1e-9));
        assert_eq!(b.activations_gb, a.activations_gb);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let mut p = full_ft_7b();
        p.weight_bits = 12;
        assert!(estimate_vram(&p).is_err());
        p = full_ft_7b();
        p.trainable_fraction = 0.0;
        assert!(estimate_vram(&p).is_err());
        p = full_ft_7b();
        p.n_params = 0;
        assert!(estimate_vram(&p).is_err());
    }

    #[test]
    fn preset_lookup() {
        assert_eq!(preset("full-ft-7b"), Some(full_ft_7b()));
        assert_eq!(preset("qlora-7b"), Some(qlora_7b()));
        assert_eq!(preset("other"), None);
    }

    #[test]
    fn convergence_on_reference_log() {
        let points = vec![
            LossPoint { step: 10, loss: 2.28 },
            LossPoint { step: 50, loss: 0.72 },
            LossPoint { step: 100, loss: 0.40 },
        ];
        let report = analyze_convergence(&points, 1, 0.1).unwrap();
        assert_eq!(report.initial, 2.28);
        assert_eq!(report.final_loss, 0.40);
        assert!(close(report.drop_ratio, (2.28 - 0.40) / 2.28, 1e-12));
        assert!(close(report.drop_ratio, 0.825, 1e-3));
        assert_eq!(report.monotone_violations, 0);
        assert_eq!(report.stabilized_step, Some(100));
    }

    #[test]
    fn constant_log_stabilizes_immediately() {
        let points = vec![
            LossPoint { step: 1, loss: 1.5 },
            LossPoint { step: 2, loss: 1.5 },
            LossPoint { step: 3, loss: 1.5 },
        ];
        let report = analyze_convergence(&points, 1, 0.01).unwrap();
        assert_eq!(report.drop_ratio, 0.0);
        assert_eq!(report.stabilized_step, Some(1));
        assert_eq!(report.monotone_violations, 0);
    }

    #[test]
    fn upticks_match_pairwise_oracle() {
        let points = vec![
            LossPoint { step: 1, loss: 2.0 },
            LossPoint { step: 2, loss: 1.0 },
            LossPoint { step: 3, loss: 1.2 },
            LossPoint { step: 4, loss: 0.8 },
        ];
        // Brute-force adjacent-pair count.
        let mut expected = 0;
        for i in 1..points.len() {
            if points[i].loss > points[i - 1].loss {
                expected += 1;
            }
        }
        assert_eq!(expected, 1);
        let report = analyze_convergence(&points, 1, 0.05).unwrap();
        assert_eq!(report.monotone_violations, expected);
    }

    #[test]
    fn stabilization_respects_window() {
        let points = vec![
            LossPoint { step: 1, loss: 1.0 },
            LossPoint { step: 2, loss: 0.41 },
            LossPoint { step: 3, loss: 0.40 },
        ];
        // A window of 3 cannot be satisfied starting at step 2.
        let report = analyze_convergence(&points, 3, 0.05).unwrap();
        assert_eq!(report.stabilized_step, None);
        let report = analyze_convergence(&points, 2, 0.05).unwrap();
        assert_eq!(report.stabilized_step, Some(2));
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(matches!(
            analyze_convergence(&[LossPoint { step: 1, loss: 1.0 }], 1, 0.1),
            Err(ResourceError::TooFewPoints(1))
        ));
    }

    #[test]
    fn analysis_invariant_under_step_relabeling() {
        let a = vec![
            LossPoint { step: 10, loss: 2.28 },
            LossPoint { step: 50, loss: 0.72 },
            LossPoint { step: 100, loss: 0.40 },
        ];
        let b = vec![
            LossPoint { step: 1, loss: 2.28 },
            LossPoint { step: 2, loss: 0.72 },
            LossPoint { step: 3, loss: 0.40 },
        ];
        let ra = analyze_convergence(&a, 1, 0.1).unwrap();
        let rb = analyze_convergence(&b, 1, 0.1).unwrap();
        assert_eq!(ra.initial, rb.initial);
        assert_eq!(ra.final_loss, rb.final_loss);
        assert_eq!(ra.drop_ratio, rb.drop_ratio);
        assert_eq!(ra.monotone_violations, rb.monotone_violations);
        // Only the step label differs.
        assert_eq!(ra.stabilized_step, Some(100));
        assert_eq!(rb.stabilized_step, Some(3));
    }

    #[test]
    fn loss_csv_round_trip_and_errors() {
        let points = parse_loss_csv("step,loss\n10,2.28\n50,0.72\n100,0.40\n").unwrap();
        assert_eq!(points.len(), 3);
        assert_eq!(points[0], LossPoint { step: 10, loss: 2.28 });

        assert!(matches!(
            parse_loss_csv("loss,step\n1,1.0\n"),
            Err(ResourceError::BadLossLog { line: 1, .. })
        ));
        assert!(matches!(
            parse_loss_csv("step,loss\n10,2.28\n5,1.0\n"),
            Err(ResourceError::BadLossLog { line: 3, .. })
        ));
        assert!(matches!(
            parse_loss_csv("step,loss\nx,1.0\n"),
            Err(ResourceError::BadLossLog { line: 2, .. })
        ));
        assert!(matches!(
            parse_loss_csv("step,loss\n1,-0.5\n"),
            Err(ResourceError::BadLossLog { line: 2, .. })
        ));
    }
}
