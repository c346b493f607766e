//! Run configuration: TOML files with named presets, converted into
//! internal-unit simulation parameters.
//!
//! Config values are given in SI (kg, N, m^3, A/m, tesla, degrees); the
//! builder converts everything into the internal g/mm/s system. A config
//! may name a `preset` whose values it selectively overrides.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::friction::FrictionParams;
use crate::geometry::{
    self, default_curve_params, default_spike_params, CurveParams, ShapeKind, ShapeModel,
    SpikeParams,
};
use crate::magnetics::{error_cone_direction, FieldParams, MagneticsModel};
use crate::solver::SolverOptions;
use crate::stepper::SimParams;
use crate::units;
use crate::InertiaModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

/// Whether scenario sweeps fan out over a thread pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecMode {
    Sequential,
    #[cfg_attr(not(feature = "parallel"), doc = "(requires the `parallel` feature)")]
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeConfig {
    pub kind: ShapeKind,
    /// Length scale relative to the 0.8 mm reference robot.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Manufacturing draft angle, degrees.
    #[serde(default)]
    pub draft_deg: f64,
    /// Optional geometry overrides, mm (already at the requested scale).
    #[serde(default)]
    pub slab_height: Option<f64>,
    #[serde(default)]
    pub spike_height: Option<f64>,
    #[serde(default)]
    pub tip_offset: Option<f64>,
    #[serde(default)]
    pub base_half_width: Option<f64>,
    #[serde(default)]
    pub sag: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub mass_kg: f64,
    pub mu: f64,
    /// Adhesion coefficient, N/m^2.
    pub adhesion_n_per_m2: f64,
    /// Electrostatic attraction toward the substrate, N.
    #[serde(default)]
    pub electrostatic_n: f64,
    /// Substrate inclination, degrees; tumbling direction +y runs upslope.
    #[serde(default)]
    pub incline_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticsConfig {
    /// Field amplitude, millitesla.
    pub amplitude_mt: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_deg: f64,
    /// Magnetic volume, m^3.
    pub volume_m3: f64,
    /// Magnetization magnitude, A/m.
    pub magnetization_a_per_m: f64,
    /// Polar magnetization error from the ideal +y axis, degrees.
    #[serde(default)]
    pub theta1_deg: f64,
    /// Azimuth of the error around the ideal axis, degrees; 0 keeps the
    /// error in the tumbling plane (the measured in-plane misalignment).
    #[serde(default)]
    pub theta2_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: 1e-10, max_iterations: 300 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteppingConfig {
    /// Steps per field revolution; h = 1 / (steps_per_cycle * f).
    pub steps_per_cycle: usize,
    pub duration_s: f64,
    pub max_halvings: u32,
}

impl Default for SteppingConfig {
    fn default() -> Self {
        SteppingConfig { steps_per_cycle: 1000, duration_s: 3.0, max_halvings: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Keep every stride-th step in trajectory output.
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { stride: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub shape: ShapeConfig,
    pub environment: EnvironmentConfig,
    pub magnetics: MagneticsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub stepping: SteppingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// First-generation polymer robot on a paper substrate.
pub const PRESET_PAPER_GEN1: &str = r#"
[shape]
kind = "cuboid"
scale = 1.0

[environment]
mass_kg = 3.78e-8
mu = 0.3
adhesion_n_per_m2 = 1.19
electrostatic_n = 6.54e-7

[magnetics]
amplitude_mt = 10.0
frequency_hz = 1.0
volume_m3 = 2.9e-11
magnetization_a_per_m = 15000.0
theta1_deg = 27.0
"#;

/// Second-generation polymer robot on aluminum.
pub const PRESET_ALUMINUM_GEN2: &str = r#"
[shape]
kind = "cuboid"
scale = 1.0

[environment]
mass_kg = 4.44e-8
mu = 0.54
adhesion_n_per_m2 = 26.18
electrostatic_n = 0.0

[magnetics]
amplitude_mt = 20.0
frequency_hz = 1.0
volume_m3 = 3.2e-11
magnetization_a_per_m = 51835.0
theta1_deg = 0.0
"#;

/// Half-scale PDMS robot on aluminum, as used in the manufacturing-error
/// sweeps. Mass scales with volume from the full-scale PDMS spiked robot.
pub const PRESET_PDMS_HALF: &str = r#"
[shape]
kind = "spiked"
scale = 0.5

# The half-scale robot's support rocking (~1 kHz) needs finer stepping
# than the full-scale presets to resolve; speeds are converged at this
# setting (within 0.3% of 2x coarser).
[stepping]
steps_per_cycle = 5000

[environment]
mass_kg = 8.675e-9
mu = 0.54
adhesion_n_per_m2 = 26.18
electrostatic_n = 0.0

[magnetics]
amplitude_mt = 20.0
frequency_hz = 1.0
volume_m3 = 4.0e-12
magnetization_a_per_m = 18661.0
"#;

pub fn preset(name: &str) -> Result<&'static str, ConfigError> {
    match name {
        "paper-gen1" => Ok(PRESET_PAPER_GEN1),
        "aluminum-gen2" => Ok(PRESET_ALUMINUM_GEN2),
        "pdms-half" => Ok(PRESET_PDMS_HALF),
        other => Err(ConfigError::UnknownPreset(other.to_string())),
    }
}

/// Recursively overlay `over` onto `base` (tables merge, scalars replace).
fn merge_toml(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_toml(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<RunConfig, ConfigError> {
        Ok(toml::from_str(preset(name)?)?)
    }

    /// Parse a TOML document. A top-level `preset = "name"` key loads the
    /// named preset first; the document's own values override it.
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        let mut doc: toml::Value = toml::from_str(text)?;
        let preset_name = doc
            .as_table_mut()
            .and_then(|t| t.remove("preset"))
            .map(|v| match v {
                toml::Value::String(s) => Ok(s),
                _ => Err(ConfigError::Invalid("preset must be a string".into())),
            })
            .transpose()?;
        let merged = match preset_name {
            Some(name) => {
                let mut base: toml::Value = toml::from_str(preset(&name)?)?;
                merge_toml(&mut base, doc);
                base
            }
            None => doc,
        };
        Ok(merged.try_into()?)
    }

    pub fn build_shape(&self) -> Result<ShapeModel, ConfigError> {
        let sc = &self.shape;
        if sc.scale <= 0.0 {
            return Err(ConfigError::Invalid("shape.scale must be positive".into()));
        }
        let l = 0.8 * sc.scale;
        let w = 0.4 * sc.scale;
        let base = match sc.kind {
            ShapeKind::Cuboid => {
                let h = sc.slab_height.unwrap_or(0.1 * sc.scale);
                geometry::make_cuboid(l, w, h)?
            }
            ShapeKind::Spiked | ShapeKind::SpikedEnds => {
                let mut p: SpikeParams = default_spike_params(sc.kind, sc.scale);
                if let Some(v) = sc.slab_height {
                    p.slab_height = v;
                }
                if let Some(v) = sc.spike_height {
                    p.spike_height = v;
                }
                if let Some(v) = sc.tip_offset {
                    p.tip_offset = v;
                }
                if let Some(v) = sc.base_half_width {
                    p.base_half_width = v;
                }
                if sc.kind == ShapeKind::Spiked {
                    geometry::make_spiked(l, w, &p)?
                } else {
                    geometry::make_spiked_ends(l, w, &p)?
                }
            }
            ShapeKind::Curved => {
                let mut p: CurveParams = default_curve_params(sc.scale);
                if let Some(v) = sc.slab_height {
                    p.slab_height = v;
                }
                if let Some(v) = sc.sag {
                    p.sag = v;
                }
                geometry::make_curved(l, w, &p)?
            }
        };
        Ok(geometry::apply_draft(&base, sc.draft_deg)?)
    }

    /// Step size in seconds.
    pub fn step_size(&self) -> f64 {
        1.0 / (self.stepping.steps_per_cycle as f64 * self.magnetics.frequency_hz)
    }

    pub fn n_steps(&self) -> usize {
        (self.stepping.duration_s / self.step_size()).round() as usize
    }

    /// Convert to internal-unit simulation parameters.
    pub fn build(&self) -> Result<SimParams, ConfigError> {
        let shape = self.build_shape()?;
        let env = &self.environment;
        let mag = &self.magnetics;
        if env.mass_kg <= 0.0 {
            return Err(ConfigError::Invalid("environment.mass_kg must be positive".into()));
        }
        if mag.frequency_hz <= 0.0 {
            return Err(ConfigError::Invalid("magnetics.frequency_hz must be positive".into()));
        }

        let mass = units::mass_from_kg(env.mass_kg);
        let inertia = InertiaModel::new(mass, &shape);

        let phi = env.incline_deg.to_radians();
        // Plane frame: substrate is z = 0, +y runs upslope. Lab vectors
        // map through a rotation of -phi about x.
        let plane_rot = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), -phi);
        let gravity = plane_rot * Vector3::new(0.0, 0.0, -units::GRAVITY_MM_S2);
        // Electrostatic attraction acts along the substrate normal.
        let electrostatic =
            Vector3::new(0.0, 0.0, -units::force_from_newtons(env.electrostatic_n));

        let u_body =
            error_cone_direction(mag.theta1_deg.to_radians(), mag.theta2_deg.to_radians());
        // At phase 0 the field is aligned with the resting robot's
        // magnetization projected into the rotation plane, so an
        // error-free robot starts torque-free instead of snapping to
        // the field. On an incline the robot rests in the substrate
        // frame while the field rotates in the lab frame, so the
        // alignment offset accounts for the incline angle as well.
        let m_lab = plane_rot.inverse() * u_body;
        let align = (-m_lab.z).atan2(m_lab.y);
        let magnetics = MagneticsModel {
            moment: units::moment_from_si(mag.volume_m3, mag.magnetization_a_per_m),
            u_body,
            field: FieldParams {
                amplitude_t: mag.amplitude_mt * 1e-3,
                frequency_hz: mag.frequency_hz,
                phase_rad: mag.phase_deg.to_radians() + align,
            },
            field_rotation: plane_rot,
        };

        let min_dim = shape.length.min(shape.width).min(shape.height);
        let friction = FrictionParams {
            mu: env.mu,
            e_t: 1.0,
            e_o: 1.0,
            e_r_point: 0.1 * min_dim,
        };

        Ok(SimParams {
            shape,
            inertia,
            magnetics,
            friction,
            adhesion_coeff: units::adhesion_from_si(env.adhesion_n_per_m2),
            gravity,
            electrostatic,
            solver: SolverOptions {
                tolerance: self.solver.tolerance,
                max_iterations: self.solver.max_iterations,
                ..SolverOptions::default()
            },
            h: self.step_size(),
            max_halvings: self.stepping.max_halvings,
        })
    }
}
