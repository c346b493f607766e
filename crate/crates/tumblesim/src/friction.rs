//! Dry friction on an ellipsoidal limit surface and area-dependent
//! adhesion.
//!
//! The admissible contact loads satisfy
//! `(lt/et)^2 + (lo/eo)^2 + (lr/er)^2 <= (mu ln)^2`, coupling the two
//! tangential forces with the drilling torque about the contact normal.
//! At maximum dissipation the load sits on the ellipsoid boundary aligned
//! against the slip, which the stepper enforces through Fritz-John
//! conditions with a shared multiplier.
//!
//! Adhesion is proportional to the contact area: a face flush with the
//! substrate contributes a pull-off force `C * A`; edge, vertex and
//! curved contact contribute none. Both the adhesion force and the
//! drilling radius `er` depend on the area of the contacting face, which
//! is only known once contact is resolved, so they lag one step behind.

#[derive(Debug, Clone, Copy)]
pub struct FrictionParams {
    /// Coulomb coefficient.
    pub mu: f64,
    /// Tangential semi-axes of the limit ellipsoid (dimensionless).
    pub e_t: f64,
    pub e_o: f64,
    /// Drilling semi-axis (mm) used when no face is flush; a flush face
    /// of area A uses the equivalent disc radius sqrt(A / pi) instead.
    pub e_r_point: f64,
}

impl FrictionParams {
    /// Margin of the load to the friction ellipsoid (>= 0 inside).
    pub fn ellipsoid_margin(&self, e_r: f64, ln: f64, lt: f64, lo: f64, lr: f64) -> f64 {
        (self.mu * ln).powi(2)
            - (lt / self.e_t).powi(2)
            - (lo / self.e_o).powi(2)
            - (lr / e_r).powi(2)
    }
}

/// Contact quantities carried from the previous step.
#[derive(Debug, Clone, Copy)]
pub struct ContactMemory {
    /// Adhesion pull-off force, uN.
    pub adhesion: f64,
    /// Drilling semi-axis, mm.
    pub e_r: f64,
    /// Flush face of the previous step, if any: (piece, constraint).
    pub face: Option<(usize, usize)>,
}

impl ContactMemory {
    pub fn fresh(friction: &FrictionParams) -> Self {
        ContactMemory { adhesion: 0.0, e_r: friction.e_r_point, face: None }
    }

    /// Update from the face identified at the end of a step.
    pub fn update(
        &mut self,
        friction: &FrictionParams,
        adhesion_coeff: f64,
        piece: usize,
        face: Option<usize>,
        area: f64,
    ) {
        match face {
            Some(idx) if area > 0.0 => {
                self.adhesion = adhesion_coeff * area;
                self.e_r = (area / std::f64::consts::PI).sqrt();
                self.face = Some((piece, idx));
            }
            _ => {
                self.adhesion = 0.0;
                self.e_r = friction.e_r_point;
                self.face = None;
            }
        }
    }
}
