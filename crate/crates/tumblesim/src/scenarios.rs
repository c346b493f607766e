//! Experiment harness: locomotion speed, incline climbing, shape
//! comparison and manufacturing-error sweeps, plus CSV output.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExecMode, RunConfig};
use crate::geometry::BodyConfiguration;
use crate::stepper::{simulate, SimParams, StepError, StepRecord};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Initial state used by every scenario: at rest on the substrate.
pub fn rest_state(params: &SimParams) -> BodyConfiguration {
    BodyConfiguration::at_rest(Vector3::new(0.0, 0.0, params.shape.rest_height))
}

/// Rotation of the body width axis out of the substrate's x direction:
/// zero during clean tumbling (which rotates about x), +-90 degrees or
/// more once the robot has fallen onto its side. Rotations about x leave
/// the metric unchanged, so it isolates the out-of-plane twist.
pub fn twist_angle_deg(q: &UnitQuaternion<f64>) -> f64 {
    let xb = q * Vector3::x();
    xb.z.atan2(xb.x).to_degrees()
}

// ---------------------------------------------------------------------------
// Locomotion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LocomotionResult {
    pub frequency_hz: f64,
    /// Mean speed after a one-period transient, mm/s.
    pub measured_speed: f64,
    /// No-slip rolling speed, mm/s.
    pub ideal_speed: f64,
    /// Aggregate contact slip over the measurement window: summed
    /// tangential contact-point speed divided by summed material surface
    /// speed at the contact point.
    pub slip_ratio: f64,
}

/// Measure tumbling speed at the given frequency: one transient period,
/// then the mean advance over `measure_periods` periods.
pub fn locomotion_test(
    cfg: &RunConfig,
    frequency_hz: f64,
    measure_periods: usize,
) -> Result<(LocomotionResult, Vec<StepRecord>), ScenarioError> {
    let mut cfg = cfg.clone();
    cfg.magnetics.frequency_hz = frequency_hz;
    cfg.stepping.duration_s = (1 + measure_periods) as f64 / frequency_hz;
    let params = cfg.build()?;
    let ideal = params.shape.ideal_speed(frequency_hz);
    let initial = rest_state(&params);
    let n = cfg.n_steps();
    let records = simulate(params, initial, n, cfg.output.stride)?;
    let t_start = 1.0 / frequency_hz;
    let y_start = records
        .iter()
        .find(|r| r.t >= t_start)
        .map(|r| r.state.position.y)
        .unwrap_or(0.0);
    let last = records.last().expect("simulation produced no records");
    let speed = (last.state.position.y - y_start) / (last.t - t_start);
    // Slip at the contact point, aggregated over the measurement window.
    let (mut slip_sum, mut surf_sum) = (0.0, 0.0);
    for r in records.iter().filter(|r| r.t >= t_start && r.lambda_n > 1e-6) {
        let arm = r.a1 - r.state.position;
        let u = r.state.linear_velocity + r.state.angular_velocity.cross(&arm);
        slip_sum += (u.x * u.x + u.y * u.y).sqrt();
        surf_sum += r.state.angular_velocity.cross(&arm).norm();
    }
    let slip_ratio = if surf_sum > 0.0 { slip_sum / surf_sum } else { 0.0 };
    Ok((
        LocomotionResult { frequency_hz, measured_speed: speed, ideal_speed: ideal, slip_ratio },
        records,
    ))
}

// ---------------------------------------------------------------------------
// Incline climbing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct InclineResult {
    pub incline_deg: f64,
    pub climbed: bool,
    /// Net upslope advance over the whole run, mm.
    pub net_advance_mm: f64,
    /// Advance during the final field period, mm.
    pub final_period_advance_mm: f64,
}

/// Climb test: the robot climbs if it advances at least one body length
/// upslope within `periods` field periods and is still moving upslope in
/// the final period.
pub fn incline_test(
    cfg: &RunConfig,
    incline_deg: f64,
    periods: usize,
) -> Result<(InclineResult, Vec<StepRecord>), ScenarioError> {
    let mut cfg = cfg.clone();
    cfg.environment.incline_deg = incline_deg;
    let f = cfg.magnetics.frequency_hz;
    cfg.stepping.duration_s = periods as f64 / f;
    let params = cfg.build()?;
    let body_length = params.shape.length;
    let initial = rest_state(&params);
    let n = cfg.n_steps();
    let records = simulate(params, initial, n, cfg.output.stride)?;
    let last = records.last().expect("simulation produced no records");
    let net = last.state.position.y;
    let t_final = last.t - 1.0 / f;
    let y_final_start = records
        .iter()
        .find(|r| r.t >= t_final)
        .map(|r| r.state.position.y)
        .unwrap_or(0.0);
    let final_adv = net - y_final_start;
    let climbed = net >= body_length && final_adv > 0.0;
    Ok((
        InclineResult {
            incline_deg,
            climbed,
            net_advance_mm: net,
            final_period_advance_mm: final_adv,
        },
        records,
    ))
}

// ---------------------------------------------------------------------------
// Shape comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ShapeSpeed {
    pub shape: String,
    pub measured_speed: f64,
    pub ideal_speed: f64,
}

/// Re-target a configuration at a different shape kind. The material is
/// unchanged, so mass and magnetic volume scale with the body volume
/// (constant density and particle loading); inertia follows the new
/// geometry through the builder.
pub fn config_for_shape(
    cfg: &RunConfig,
    kind: crate::geometry::ShapeKind,
) -> Result<RunConfig, ScenarioError> {
    let base_volume = cfg.build_shape()?.volume;
    let mut c = cfg.clone();
    c.shape = crate::config::ShapeConfig {
        kind,
        scale: cfg.shape.scale,
        draft_deg: cfg.shape.draft_deg,
        slab_height: None,
        spike_height: None,
        tip_offset: None,
        base_half_width: None,
        sag: None,
    };
    let ratio = c.build_shape()?.volume / base_volume;
    c.environment.mass_kg *= ratio;
    c.magnetics.volume_m3 *= ratio;
    Ok(c)
}

/// Measure locomotion speed for each shape kind under the same
/// environment and field.
pub fn shape_comparison(
    cfg: &RunConfig,
    kinds: &[crate::geometry::ShapeKind],
    frequency_hz: f64,
    measure_periods: usize,
    mode: ExecMode,
) -> Result<Vec<ShapeSpeed>, ScenarioError> {
    let run = |kind: &crate::geometry::ShapeKind| -> Result<ShapeSpeed, ScenarioError> {
        let c = config_for_shape(cfg, *kind)?;
        let (res, _) = locomotion_test(&c, frequency_hz, measure_periods)?;
        Ok(ShapeSpeed {
            shape: kind.label().to_string(),
            measured_speed: res.measured_speed,
            ideal_speed: res.ideal_speed,
        })
    };
    run_all(kinds, run, mode)
}

// ---------------------------------------------------------------------------
// Manufacturing-error sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepSpec {
    pub theta1_deg: f64,
    pub theta2_deg: f64,
    pub draft_deg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub theta1_deg: f64,
    pub theta2_deg: f64,
    pub draft_deg: f64,
    /// Twist at the end of the run, degrees.
    pub twist_deg: f64,
    /// Largest |twist| seen during the run, degrees.
    pub max_twist_deg: f64,
    /// Net lateral drift, mm.
    pub drift_mm: f64,
    /// Mean forward speed over the run, mm/s.
    pub speed_mm_s: f64,
    /// Whether the twist reached 45 degrees.
    pub flipped: bool,
}

/// The standard magnetization-error grid: the aligned profile plus a
/// 10-degree polar error swept through 36 azimuths.
pub fn standard_profiles() -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0)];
    for i in 1..=36 {
        out.push((10.0, 10.0 * i as f64));
    }
    out
}

/// The standard draft-angle column, 0..=15 degrees.
pub fn standard_drafts() -> Vec<f64> {
    (0..=15).map(|d| d as f64).collect()
}

/// Run one sweep cell: one field period, metrics over the whole run.
pub fn run_sweep_cell(base: &RunConfig, spec: &SweepSpec) -> Result<SweepCell, ScenarioError> {
    let mut cfg = base.clone();
    cfg.magnetics.theta1_deg = spec.theta1_deg;
    cfg.magnetics.theta2_deg = spec.theta2_deg;
    cfg.shape.draft_deg = spec.draft_deg;
    let f = cfg.magnetics.frequency_hz;
    cfg.stepping.duration_s = 1.0 / f;
    let params = cfg.build()?;
    let initial = rest_state(&params);
    let n = cfg.n_steps();
    let records = simulate(params, initial, n, cfg.output.stride)?;
    let last = records.last().expect("simulation produced no records");
    let max_twist = records
        .iter()
        .map(|r| twist_angle_deg(&r.state.orientation).abs())
        .fold(0.0, f64::max);
    let twist = twist_angle_deg(&last.state.orientation);
    Ok(SweepCell {
        theta1_deg: spec.theta1_deg,
        theta2_deg: spec.theta2_deg,
        draft_deg: spec.draft_deg,
        twist_deg: twist,
        max_twist_deg: max_twist,
        drift_mm: last.state.position.x,
        speed_mm_s: last.state.position.y / last.t,
        flipped: max_twist >= 45.0,
    })
}

/// Run a set of sweep cells, optionally fanned out over a thread pool.
/// Results are returned in input order either way, so output is
/// independent of the execution mode.
pub fn error_sweep(
    base: &RunConfig,
    specs: &[SweepSpec],
    mode: ExecMode,
) -> Result<Vec<SweepCell>, ScenarioError> {
    run_all(specs, |s| run_sweep_cell(base, s), mode)
}

fn run_all<T, R, F>(items: &[T], f: F, mode: ExecMode) -> Result<Vec<R>, ScenarioError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, ScenarioError> + Sync,
{
    match mode {
        ExecMode::Sequential => items.iter().map(&f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                items.par_iter().map(&f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.iter().map(&f).collect()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Write a trajectory CSV. An optional comment header (e.g. a manifest
/// hash) is emitted as `# `-prefixed lines before the column header.
pub fn write_trajectory_csv(
    path: &Path,
    records: &[StepRecord],
    comments: &[String],
) -> Result<(), ScenarioError> {
    let mut file = std::fs::File::create(path)?;
    for c in comments {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "t", "x", "y", "z", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz",
        "lambda_n", "lambda_t", "lambda_o", "lambda_r", "adhesion", "piece", "face",
        "iterations", "residual", "min_vertex_z",
    ])?;
    for r in records {
        let q = r.state.orientation;
        w.write_record([
            format!("{:.9}", r.t),
            format!("{:.9}", r.state.position.x),
            format!("{:.9}", r.state.position.y),
            format!("{:.9}", r.state.position.z),
            format!("{:.12}", q.w),
            format!("{:.12}", q.i),
            format!("{:.12}", q.j),
            format!("{:.12}", q.k),
            format!("{:.9}", r.state.linear_velocity.x),
            format!("{:.9}", r.state.linear_velocity.y),
            format!("{:.9}", r.state.linear_velocity.z),
            format!("{:.9}", r.state.angular_velocity.x),
            format!("{:.9}", r.state.angular_velocity.y),
            format!("{:.9}", r.state.angular_velocity.z),
            format!("{:.9e}", r.lambda_n),
            format!("{:.9e}", r.lambda_t),
            format!("{:.9e}", r.lambda_o),
            format!("{:.9e}", r.lambda_r),
            format!("{:.9e}", r.adhesion),
            r.piece.to_string(),
            r.face.map(|f| f.to_string()).unwrap_or_default(),
            r.iterations.to_string(),
            format!("{:.3e}", r.residual),
            format!("{:.9}", r.min_vertex_z),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write sweep metrics, one row per cell.
pub fn write_sweep_csv(
    path: &Path,
    cells: &[SweepCell],
    comments: &[String],
) -> Result<(), ScenarioError> {
    let mut file = std::fs::File::create(path)?;
    for c in comments {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "theta1_deg", "theta2_deg", "draft_deg", "twist_deg", "max_twist_deg", "drift_mm",
        "speed_mm_s", "flipped",
    ])?;
    for c in cells {
        w.write_record([
            format!("{:.3}", c.theta1_deg),
            format!("{:.3}", c.theta2_deg),
            format!("{:.3}", c.draft_deg),
            format!("{:.6}", c.twist_deg),
            format!("{:.6}", c.max_twist_deg),
            format!("{:.9}", c.drift_mm),
            format!("{:.9}", c.speed_mm_s),
            c.flipped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
