//! The 2-state academic system used in the first experiment, nominal and
//! faulty variants.

use std::f64::consts::PI;

use super::OdeSystem;

/// Nominal:
/// `ẋ₁ = −x₁ + x₂ sin(πx₁/2)`, `ẋ₂ = −x₂ + x₁ cos(πx₁/2)`.
///
/// Faulty:
/// `ẋ₁ = −x₁ + 0.9 x₂ sin(πx₁/5)`, `ẋ₂ = −x₂ + 0.8 x₁ cos(πx₂/3)`.
pub fn academic_system(faulty: bool) -> OdeSystem {
    if faulty {
        OdeSystem::new("academic-faulty", 2, 2, |_t, x, dxdt| {
            dxdt[0] = -x[0] + 0.9 * x[1] * (PI * x[0] / 5.0).sin();
            dxdt[1] = -x[1] + 0.8 * x[0] * (PI * x[1] / 3.0).cos();
        })
    } else {
        OdeSystem::new("academic", 2, 2, |_t, x, dxdt| {
            dxdt[0] = -x[0] + x[1] * (PI * x[0] / 2.0).sin();
            dxdt[1] = -x[1] + x[0] * (PI * x[0] / 2.0).cos();
        })
    }
}
