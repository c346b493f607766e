//! Rotating magnetic field and magnetic body torque.
//!
//! The lab field rotates in the y-z plane (the tumbling plane):
//! `B(t) = B0 (0, cos(2 pi f t + phase), sin(2 pi f t + phase))` with B0 in
//! tesla. On an inclined substrate the simulation runs in the plane frame,
//! so the lab field is mapped through `field_rotation` along with gravity.
//!
//! The magnetization direction in body frame deviates from the ideal +y
//! axis by a polar error angle `theta1` and an azimuth `theta2`:
//! `u = (sin(theta2) sin(theta1), cos(theta1), cos(theta2) sin(theta1))`.
//! `theta2 = 0` keeps the error in the tumbling plane, which covers the
//! measured in-plane misalignment of the first-generation robots.

use nalgebra::{UnitQuaternion, Vector3};

/// Rotating-field parameters.
#[derive(Debug, Clone, Copy)]
pub struct FieldParams {
    /// Field amplitude, tesla.
    pub amplitude_t: f64,
    /// Rotation frequency, Hz.
    pub frequency_hz: f64,
    /// Phase at t = 0, radians.
    pub phase_rad: f64,
}

impl FieldParams {
    /// Lab-frame field at time `t`, tesla. The field starts along +y and
    /// rotates toward -z, driving the robot toward +y end over end.
    pub fn field_lab(&self, t: f64) -> Vector3<f64> {
        let a = 2.0 * std::f64::consts::PI * self.frequency_hz * t + self.phase_rad;
        Vector3::new(0.0, a.cos(), -a.sin()) * self.amplitude_t
    }
}

/// Body-frame magnetization direction for error angles in radians.
pub fn error_cone_direction(theta1: f64, theta2: f64) -> Vector3<f64> {
    Vector3::new(
        theta2.sin() * theta1.sin(),
        theta1.cos(),
        theta2.cos() * theta1.sin(),
    )
}

/// Magnetic actuation model in internal units: the stored moment magnitude
/// is `V_m * |E| * 1e9` (volume in m^3, magnetization in A/m) so that
/// `moment x B[T]` comes out in g mm^2/s^2.
#[derive(Debug, Clone)]
pub struct MagneticsModel {
    /// Moment magnitude, internal units.
    pub moment: f64,
    /// Unit magnetization direction in body frame.
    pub u_body: Vector3<f64>,
    pub field: FieldParams,
    /// Lab-to-plane rotation applied to the field (identity on flat ground).
    pub field_rotation: UnitQuaternion<f64>,
}

impl MagneticsModel {
    /// Plane-frame field at time `t`, tesla.
    pub fn field_at(&self, t: f64) -> Vector3<f64> {
        self.field_rotation * self.field.field_lab(t)
    }

    /// World-frame magnetic torque at time `t` for body orientation `q`,
    /// internal units (g mm^2/s^2).
    pub fn torque(&self, t: f64, q: &UnitQuaternion<f64>) -> Vector3<f64> {
        let m_world = q * (self.u_body * self.moment);
        m_world.cross(&self.field_at(t))
    }
}
