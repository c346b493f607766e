//! Contact kinematics between a convex piece and the planar substrate.
//!
//! Contact is resolved through an equivalent-contact-point formulation:
//! a point `a1` on the robot and a point `a2` on the substrate are extra
//! unknowns tied together by normal-cone conditions, so face, edge and
//! vertex contact all emerge from the same smooth equations. The substrate
//! is the halfspace `z <= 0` with constraint `g(p) = p_z` and outward
//! normal +z.
//!
//! The contact frame is fixed by the plane: normal `n = +z`, first tangent
//! `t = +y` (the tumbling direction), second tangent `o = -x`, so that
//! `(n, t, o)` is right-handed.

use nalgebra::{Matrix6x4, UnitQuaternion, Vector3, Vector6};

use crate::geometry::{BodyConfiguration, ConvexPiece, SurfaceTag};

pub const CONTACT_NORMAL: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);
pub const CONTACT_TANGENT: Vector3<f64> = Vector3::new(0.0, 1.0, 0.0);
pub const CONTACT_BINORMAL: Vector3<f64> = Vector3::new(-1.0, 0.0, 0.0);

/// Wrench basis mapping contact loads `[lambda_n, lambda_t, lambda_o,
/// lambda_r]` to a generalized force, for a contact point at offset `rel`
/// from the CM. The last column is the pure drilling torque about `n`.
pub fn wrench_basis(rel: &Vector3<f64>) -> Matrix6x4<f64> {
    let mut w = Matrix6x4::zeros();
    for (col, dir) in [CONTACT_NORMAL, CONTACT_TANGENT, CONTACT_BINORMAL].iter().enumerate() {
        let m = rel.cross(dir);
        for i in 0..3 {
            w[(i, col)] = dir[i];
            w[(i + 3, col)] = m[i];
        }
    }
    for i in 0..3 {
        w[(i + 3, 3)] = CONTACT_NORMAL[i];
    }
    w
}

/// Relative velocity of the contact point along one wrench column.
pub fn wrench_velocity(rel: &Vector3<f64>, dir: &Vector3<f64>, vel: &Vector6<f64>) -> f64 {
    let v = Vector3::new(vel[0], vel[1], vel[2]);
    let w = Vector3::new(vel[3], vel[4], vel[5]);
    dir.dot(&v) + rel.cross(dir).dot(&w)
}

/// Pick the normalization constraint `k` for the ECP equations: among the
/// constraints active at the lowest vertex of the piece, the one whose
/// world gradient points most strongly toward the substrate. Deterministic
/// ties break toward the lowest index.
pub fn select_normalization(piece: &ConvexPiece, config: &BodyConfiguration) -> usize {
    let low_world = piece.lowest_vertex_world(config);
    let evals = piece.eval_world(config, &low_world);
    let mut best = 0usize;
    let mut best_down = f64::INFINITY;
    let active_tol = 1e-6;
    for (i, (f, grad)) in evals.iter().enumerate() {
        if *f > -active_tol {
            let down = grad.z;
            if down < best_down - 1e-12 {
                best_down = down;
                best = i;
            }
        }
    }
    best
}

/// Identification of the face currently flush with the substrate, if any.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlushFace {
    pub constraint: Option<usize>,
    /// Area of the flush face, mm^2 (0 for edge/vertex/curved contact).
    pub area: f64,
}

/// Identification of the active face from the solved normal-cone
/// weights: the constraint with the largest weight is the side carrying
/// the contact (the normalization constraint `k` carries unit weight).
/// A quadratic winner, or no weight above threshold, reports zero area.
pub fn identify_active_face(piece: &ConvexPiece, k: usize, weights: &[f64]) -> FlushFace {
    let mut best = None;
    let mut best_w = 1e-6;
    for (i, c) in piece.constraints.iter().enumerate() {
        let w = if i == k { 1.0 } else { weights[i] };
        if w > best_w {
            best_w = w;
            best = Some((i, c));
        }
    }
    match best {
        Some((i, c)) => match c.surface {
            SurfaceTag::Planar { area } => FlushFace { constraint: Some(i), area },
            SurfaceTag::Quadratic => FlushFace { constraint: None, area: 0.0 },
        },
        None => FlushFace::default(),
    }
}

/// A face is "flush" when its constraint is active at the contact point
/// and its outward world normal is anti-parallel to the substrate normal
/// within about 2.5 degrees. Edge and vertex contact (two or more active
/// constraints, none anti-parallel) report zero area, as does contact on
/// a curved surface.
pub fn identify_flush_face(
    piece: &ConvexPiece,
    orientation: &UnitQuaternion<f64>,
    a1_body: &Vector3<f64>,
) -> FlushFace {
    let active_tol = 1e-6;
    let align_tol = -0.999;
    let mut found = FlushFace::default();
    for (i, c) in piece.constraints.iter().enumerate() {
        if c.value(a1_body).abs() > active_tol {
            continue;
        }
        let n_world = orientation * c.gradient(a1_body);
        if n_world.z < align_tol {
            if let SurfaceTag::Planar { area } = c.surface {
                // A convex piece can have at most one downward face; if
                // numerics ever report two, keep the larger.
                if area > found.area {
                    found = FlushFace { constraint: Some(i), area };
                }
            }
        }
    }
    found
}
