//! Small-angle quadrotor model regulated to a setpoint by three identical
//! PID loops on altitude, pitch, and roll. Coriolis terms are neglected and
//! pitch/roll are assumed small, so translational accelerations are linear
//! in the tilt angles. Actuator faults are simulated by swapping the shared
//! PID gain set; a fixed outer guidance loop (not part of the faulted
//! actuation path) converts position error into commanded tilt.
//!
//! The 12 emitted states are position (x, y, z), velocity (u, v, w), Euler
//! angles (φ, θ, ψ), and body rates (p, q, r). The three PID integrators are
//! internal closed-loop states and are not emitted.

use serde::{Deserialize, Serialize};

use super::OdeSystem;
use crate::error::{Error, Result};

/// PID gains shared by the altitude, pitch, and roll loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self> {
        if kp < 0.0 || ki < 0.0 || kd < 0.0 {
            return Err(Error::Config("PID gains must be nonnegative".into()));
        }
        if kp == 0.0 && ki == 0.0 && kd == 0.0 {
            return Err(Error::Config(
                "at least one PID gain must be positive".into(),
            ));
        }
        Ok(PidGains { kp, ki, kd })
    }
}

/// Physical constants and fixed-loop gains of the stand-in quadrotor,
/// expressed in normalized units (mass and hover thrust are 1). The
/// outer position loop and the yaw loop keep the same gains across normal
/// and faulty runs — only the shared altitude/pitch/roll PID set is swapped
/// to simulate an actuator fault. Defaults are tuned so the nominal closed
/// loop converges from the side-2 initial-condition box within the 15.2 s
/// sampling window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrotorParams {
    pub mass: f64,
    pub gravity: f64,
    /// Outer guidance loop: commanded lateral acceleration per unit of
    /// position error.
    pub position_kp: f64,
    /// Outer guidance loop: commanded lateral acceleration per unit of
    /// velocity.
    pub position_kd: f64,
    /// Fixed heading loop: proportional gain on yaw error.
    pub yaw_kp: f64,
    /// Fixed heading loop: damping gain on yaw rate.
    pub yaw_kd: f64,
    /// Commanded tilt saturation, radians.
    pub max_tilt: f64,
    /// Net vertical force saturation as a multiple of hover thrust. The
    /// saturation is symmetric: the actuator is modeled as able to brake a
    /// descent as strongly as it can climb, which keeps the closed loop
    /// linear across the whole initial-condition box.
    pub max_thrust_factor: f64,
    /// Linear aerodynamic drag coefficient applied to the translational
    /// velocities (per second).
    pub drag: f64,
    /// Moment of inertia about the roll/pitch axes; the attitude PID output
    /// is interpreted as a torque and divided by this to get angular
    /// acceleration.
    pub inertia: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        QuadrotorParams {
            mass: 1.0,
            gravity: 1.0,
            position_kp: 0.5,
            position_kd: 1.6,
            yaw_kp: 8.0,
            yaw_kd: 6.0,
            max_tilt: 10.0,
            max_thrust_factor: 60.0,
            drag: 0.6,
            inertia: 1.0,
        }
    }
}

// state layout: [x y z u v w phi theta psi p q r | i_alt i_roll i_pitch]
const STATE_DIM: usize = 15;
const OUTPUT_DIM: usize = 12;

/// Closed-loop quadrotor vector field. The shared PID gain set drives three
/// loops: altitude error to thrust, roll error to roll torque, and pitch
/// error to pitch torque. The commanded pitch/roll angles come from the
/// fixed outer position loop.
pub fn quadrotor_system(
    gains: &PidGains,
    setpoint: &[f64; OUTPUT_DIM],
    params: &QuadrotorParams,
) -> OdeSystem {
    let g = *gains;
    let p = *params;
    let sp = *setpoint;
    OdeSystem::new("quadrotor", STATE_DIM, OUTPUT_DIM, move |_t, s, ds| {
        let (x, y, z) = (s[0], s[1], s[2]);
        let (u, v, w) = (s[3], s[4], s[5]);
        let (phi, theta, psi) = (s[6], s[7], s[8]);
        let (rate_p, rate_q, rate_r) = (s[9], s[10], s[11]);
        let (i_alt, i_roll, i_pitch) = (s[12], s[13], s[14]);

        // outer guidance: position error to commanded tilt
        // (small angle: u̇ = −g·θ, v̇ = g·φ)
        let accel_x_cmd = p.position_kp * (sp[0] - x) + p.position_kd * (sp[3] - u);
        let accel_y_cmd = p.position_kp * (sp[1] - y) + p.position_kd * (sp[4] - v);
        let theta_cmd = (-accel_x_cmd / p.gravity).clamp(-p.max_tilt, p.max_tilt);
        let phi_cmd = (accel_y_cmd / p.gravity).clamp(-p.max_tilt, p.max_tilt);

        // the three faulted PID loops: altitude to thrust, roll and pitch to
        // angular acceleration
        let e_z = sp[2] - z;
        let accel_z_cmd = g.kp * e_z + g.ki * i_alt + g.kd * (sp[5] - w);
        let hover = p.mass * p.gravity;
        let thrust = (p.mass * (p.gravity + accel_z_cmd))
            .clamp(-p.max_thrust_factor * hover, p.max_thrust_factor * hover);

        let e_roll = phi_cmd - phi;
        let e_pitch = theta_cmd - theta;
        let roll_accel = (g.kp * e_roll + g.ki * i_roll - g.kd * rate_p) / p.inertia;
        let pitch_accel = (g.kp * e_pitch + g.ki * i_pitch - g.kd * rate_q) / p.inertia;
        let yaw_accel = p.yaw_kp * (sp[8] - psi) - p.yaw_kd * rate_r;

        ds[0] = u;
        ds[1] = v;
        ds[2] = w;
        ds[3] = -p.gravity * theta - p.drag * u;
        ds[4] = p.gravity * phi - p.drag * v;
        ds[5] = thrust / p.mass - p.gravity - p.drag * w;
        ds[6] = rate_p;
        ds[7] = rate_q;
        ds[8] = rate_r;
        ds[9] = roll_accel;
        ds[10] = pitch_accel;
        ds[11] = yaw_accel;
        ds[12] = e_z;
        ds[13] = e_roll;
        ds[14] = e_pitch;
    })
}
