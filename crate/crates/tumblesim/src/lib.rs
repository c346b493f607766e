//! Rigid-body dynamics for magnetically actuated tumbling microrobots.
//!
//! The robot is driven by a rotating magnetic field and interacts with a
//! planar substrate through a complementarity-based contact model that
//! resolves non-point (face and edge) contact, dry friction on an
//! ellipsoidal limit surface, and surface-area-dependent adhesion.
//!
//! Internal units are grams, millimetres and seconds, which keep the
//! magnitudes of forces (1 g mm/s^2 = 1 uN), lengths and time steps well
//! scaled for the Newton solver. Conversions from SI live in [`units`].

pub mod config;
pub mod contact;
pub mod friction;
pub mod geometry;
pub mod magnetics;
pub mod scenarios;
pub mod solver;
pub mod stepper;

pub use config::{ExecMode, RunConfig};
pub use geometry::{BodyConfiguration, InertiaModel, ShapeKind, ShapeModel};

/// Unit conversions between SI and the internal g/mm/s system.
pub mod units {
    /// Gravitational acceleration, mm/s^2.
    pub const GRAVITY_MM_S2: f64 = 9810.0;

    /// Newtons to internal force units (g mm/s^2, i.e. micronewtons).
    pub fn force_from_newtons(f_n: f64) -> f64 {
        f_n * 1e6
    }

    /// Internal force units to newtons.
    pub fn force_to_newtons(f: f64) -> f64 {
        f * 1e-6
    }

    /// Kilograms to grams.
    pub fn mass_from_kg(m_kg: f64) -> f64 {
        m_kg * 1e3
    }

    /// N m to internal torque units (g mm^2/s^2).
    pub fn torque_from_nm(t_nm: f64) -> f64 {
        t_nm * 1e9
    }

    /// Magnetic moment magnitude in internal units from volume (m^3) and
    /// magnetization (A/m). Internally torque = moment x B with B in tesla,
    /// so the N m -> g mm^2/s^2 factor of 1e9 is folded into the moment.
    pub fn moment_from_si(volume_m3: f64, magnetization_a_per_m: f64) -> f64 {
        volume_m3 * magnetization_a_per_m * 1e9
    }

    /// Adhesion coefficient N/m^2 to internal force per mm^2. The two are
    /// numerically equal: 1 N/m^2 = 1 uN/mm^2.
    pub fn adhesion_from_si(c_n_per_m2: f64) -> f64 {
        c_n_per_m2
    }

    /// Metres per second to mm/s.
    pub fn speed_from_si(v: f64) -> f64 {
        v * 1e3
    }
}
