//! Robot and substrate geometry as intersections of smooth convex
//! inequality constraints, plus rigid-body configuration state.
//!
//! All lengths are millimetres, masses grams, time seconds. A body is a
//! union of [`ConvexPiece`]s; each piece is the set `{p : f_i(p) <= 0}`
//! for a list of smooth constraints with analytic gradients. Planar
//! constraints carry the face area used by the adhesion model.

use nalgebra::{Matrix3, Matrix6, UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension must be positive: {0}")]
    NonPositiveDimension(&'static str),
    #[error("draft angle {0} deg outside [0, 20]")]
    DraftOutOfRange(f64),
    #[error("rest height {actual:.4} mm deviates more than 5% from target {target:.4} mm")]
    RestHeightMismatch { actual: f64, target: f64 },
    #[error("constraint set is empty or unbounded")]
    DegeneratePiece,
}

/// Rigid-body configuration: CM position, orientation and generalized
/// velocity `V = [v, w]`.
#[derive(Debug, Clone)]
pub struct BodyConfiguration {
    /// CM position, mm.
    pub position: Vector3<f64>,
    /// Body-to-world rotation.
    pub orientation: UnitQuaternion<f64>,
    /// Linear velocity, mm/s.
    pub linear_velocity: Vector3<f64>,
    /// Angular velocity (world frame), rad/s.
    pub angular_velocity: Vector3<f64>,
}

impl BodyConfiguration {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        BodyConfiguration {
            position,
            orientation: UnitQuaternion::identity(),
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
        }
    }

    /// Euler update of the configuration from the end-of-step velocity.
    /// The quaternion is advanced by the exponential map and renormalized.
    pub fn integrate(&mut self, h: f64) {
        self.position += h * self.linear_velocity;
        let dq = UnitQuaternion::from_scaled_axis(h * self.angular_velocity);
        self.orientation = dq * self.orientation;
        self.orientation.renormalize();
    }

    /// Map a world point into body coordinates.
    pub fn to_body(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse() * (p_world - self.position)
    }

    /// Map a body point into world coordinates.
    pub fn to_world(&self, p_body: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * p_body + self.position
    }
}

/// Surface classification of a constraint, with the face area (mm^2)
/// for planar faces. Curved surfaces carry no area: line/point contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceTag {
    Planar { area: f64 },
    Quadratic,
}

/// One smooth scalar constraint `f(p) <= 0` in body frame.
#[derive(Debug, Clone)]
pub enum ConstraintGeom {
    /// `n . p - d <= 0` with `|n| = 1`.
    Halfspace { normal: Vector3<f64>, offset: f64 },
    /// Circular cylinder with axis along body x through `(0, cy, cz)`:
    /// `((y-cy)^2 + (z-cz)^2 - r^2) / (2 r) <= 0` (unit gradient on the surface).
    Cylinder { cy: f64, cz: f64, radius: f64 },
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub geom: ConstraintGeom,
    pub surface: SurfaceTag,
}

impl Constraint {
    pub fn value(&self, p: &Vector3<f64>) -> f64 {
        match &self.geom {
            ConstraintGeom::Halfspace { normal, offset } => normal.dot(p) - offset,
            ConstraintGeom::Cylinder { cy, cz, radius } => {
                let dy = p.y - cy;
                let dz = p.z - cz;
                (dy * dy + dz * dz - radius * radius) / (2.0 * radius)
            }
        }
    }

    pub fn gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        match &self.geom {
            ConstraintGeom::Halfspace { normal, .. } => *normal,
            ConstraintGeom::Cylinder { cy, cz, radius } => {
                Vector3::new(0.0, (p.y - cy) / radius, (p.z - cz) / radius)
            }
        }
    }

    pub fn is_planar(&self) -> bool {
        matches!(self.surface, SurfaceTag::Planar { .. })
    }

    pub fn area(&self) -> f64 {
        match self.surface {
            SurfaceTag::Planar { area } => area,
            SurfaceTag::Quadratic => 0.0,
        }
    }

    fn translated(&self, shift: &Vector3<f64>) -> Constraint {
        let geom = match &self.geom {
            ConstraintGeom::Halfspace { normal, offset } => ConstraintGeom::Halfspace {
                normal: *normal,
                offset: offset - normal.dot(shift),
            },
            ConstraintGeom::Cylinder { cy, cz, radius } => ConstraintGeom::Cylinder {
                cy: cy - shift.y,
                cz: cz - shift.z,
                radius: *radius,
            },
        };
        Constraint { geom, surface: self.surface }
    }
}

/// A bounded intersection of constraints, with a vertex cloud used for
/// gap estimation and sampling.
#[derive(Debug, Clone)]
pub struct ConvexPiece {
    pub constraints: Vec<Constraint>,
    pub vertices: Vec<Vector3<f64>>,
}

impl ConvexPiece {
    /// Evaluate every constraint and world-frame gradient at a world point.
    pub fn eval_world(
        &self,
        config: &BodyConfiguration,
        p_world: &Vector3<f64>,
    ) -> Vec<(f64, Vector3<f64>)> {
        let p_body = config.to_body(p_world);
        self.constraints
            .iter()
            .map(|c| (c.value(&p_body), config.orientation * c.gradient(&p_body)))
            .collect()
    }

    /// Lowest world z over the vertex cloud; used to select the contact
    /// piece of a multi-piece shape.
    pub fn min_world_z(&self, config: &BodyConfiguration) -> f64 {
        self.vertices
            .iter()
            .map(|v| config.to_world(v).z)
            .fold(f64::INFINITY, f64::min)
    }

    /// Vertex with the lowest world z.
    pub fn lowest_vertex_world(&self, config: &BodyConfiguration) -> Vector3<f64> {
        let mut best = self.vertices[0];
        let mut best_z = f64::INFINITY;
        for v in &self.vertices {
            let w = config.to_world(v);
            if w.z < best_z {
                best_z = w.z;
                best = *v;
            }
        }
        config.to_world(&best)
    }

    /// Centroid of the vertices within `tol` of the lowest world z.
    /// A point impulse applied here is symmetric when a whole edge or
    /// face is lowest, where a single arbitrary corner would inject a
    /// spurious lateral torque.
    pub fn lowest_support_world(&self, config: &BodyConfiguration, tol: f64) -> Vector3<f64> {
        let min_z = self.min_world_z(config);
        let mut sum = Vector3::zeros();
        let mut n = 0usize;
        for v in &self.vertices {
            let w = config.to_world(v);
            if w.z <= min_z + tol {
                sum += w;
                n += 1;
            }
        }
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Cuboid,
    Spiked,
    SpikedEnds,
    Curved,
}

impl ShapeKind {
    pub fn label(&self) -> &'static str {
        match self {
            ShapeKind::Cuboid => "cuboid",
            ShapeKind::Spiked => "spiked",
            ShapeKind::SpikedEnds => "spiked-ends",
            ShapeKind::Curved => "curved",
        }
    }
}

/// Spike geometry of the spiked shapes. The published drawings carry no
/// numeric spike dimensions, so these are free parameters whose defaults
/// reproduce the documented rest heights and per-cycle roll distances.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SpikeParams {
    /// Slab height above the spike bases, mm.
    pub slab_height: f64,
    /// Spike height below the slab, mm.
    pub spike_height: f64,
    /// |y| position of the outermost spike tips, mm.
    pub tip_offset: f64,
    /// Half width of each spike base, mm.
    pub base_half_width: f64,
}

/// Curved-underside geometry: slab with a cylindrical cap fitted so the
/// resting CM height matches the published value.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CurveParams {
    pub slab_height: f64,
    /// Depth of the cylindrical sag at mid-span, mm.
    pub sag: f64,
}

/// Full-scale defaults (L = 0.8 mm); all lengths scale linearly.
pub fn default_spike_params(kind: ShapeKind, scale: f64) -> SpikeParams {
    let (h, s, tip, bh) = match kind {
        ShapeKind::Spiked => (0.2, 0.233, 0.168, 0.012),
        ShapeKind::SpikedEnds => (0.3, 0.132, 0.36, 0.04),
        _ => panic!("spike params requested for non-spiked shape"),
    };
    SpikeParams {
        slab_height: h * scale,
        spike_height: s * scale,
        tip_offset: tip * scale,
        base_half_width: bh * scale,
    }
}

pub fn default_curve_params(scale: f64) -> CurveParams {
    CurveParams { slab_height: 0.3 * scale, sag: 0.11 * scale }
}

/// Rigid body built from convex pieces, centred on its CM.
#[derive(Debug, Clone)]
pub struct ShapeModel {
    pub kind: ShapeKind,
    /// Bounding dimensions L, W (the slab height is in the params), mm.
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub pieces: Vec<ConvexPiece>,
    /// CM height above the lowest body point at identity orientation, mm.
    pub rest_height: f64,
    /// Body volume, mm^3.
    pub volume: f64,
    /// Inertia tensor per unit mass about the CM, mm^2.
    pub unit_inertia: Matrix3<f64>,
    /// Perimeter of the tumbling-plane cross-section hull: distance the
    /// body advances per field revolution when rolling without slip, mm.
    pub ideal_cycle_distance: f64,
    /// Draft angle applied to the shape, degrees.
    pub draft_deg: f64,
}

impl ShapeModel {
    /// No-slip translational speed at the given field frequency, mm/s.
    pub fn ideal_speed(&self, f_rot: f64) -> f64 {
        self.ideal_cycle_distance * f_rot
    }

    /// Index of the piece closest to the substrate plane z = 0.
    /// Ties break toward the lowest piece index.
    pub fn contact_piece(&self, config: &BodyConfiguration) -> usize {
        let mut best = 0usize;
        let mut best_z = f64::INFINITY;
        for (i, piece) in self.pieces.iter().enumerate() {
            let z = piece.min_world_z(config);
            if z < best_z - 1e-12 {
                best_z = z;
                best = i;
            }
        }
        best
    }
}

/// Mass and inertia of a shape at a given total mass (grams).
#[derive(Debug, Clone)]
pub struct InertiaModel {
    /// Mass, g.
    pub mass: f64,
    /// Body-frame inertia tensor about the CM, g mm^2.
    pub inertia: Matrix3<f64>,
}

impl InertiaModel {
    pub fn new(mass_g: f64, shape: &ShapeModel) -> Self {
        InertiaModel { mass: mass_g, inertia: shape.unit_inertia * mass_g }
    }

    pub fn world_inertia(&self, q: &UnitQuaternion<f64>) -> Matrix3<f64> {
        let r = q.to_rotation_matrix();
        r * self.inertia * r.transpose()
    }

    /// Generalized 6x6 mass matrix with the inertia block expressed in
    /// the world frame at orientation `q`.
    pub fn generalized(&self, q: &UnitQuaternion<f64>) -> Matrix6<f64> {
        let mut m = Matrix6::zeros();
        for i in 0..3 {
            m[(i, i)] = self.mass;
        }
        let iw = self.world_inertia(q);
        for i in 0..3 {
            for j in 0..3 {
                m[(i + 3, j + 3)] = iw[(i, j)];
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Profile-polygon machinery. Every shape here is (before drafting) an
// extrusion of a y-z profile along body x, so mass properties and face
// areas reduce to slice integrals of clipped 2D polygons.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct SliceLine {
    ny: f64,
    nz: f64,
    nx: f64,
    d: f64,
    /// Constraint index this line came from, or usize::MAX for synthetic
    /// cylinder tangents.
    label: usize,
}

/// Labelled polygon vertex: the edge starting at this vertex carries `label`.
#[derive(Clone, Copy)]
struct LabelledVert {
    y: f64,
    z: f64,
    label: usize,
}

fn clip_labelled(poly: &[LabelledVert], ny: f64, nz: f64, d: f64, clip_label: usize) -> Vec<LabelledVert> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let fa = ny * a.y + nz * a.z - d;
        let fb = ny * b.y + nz * b.z - d;
        let inside_a = fa <= 0.0;
        let inside_b = fb <= 0.0;
        if inside_a {
            out.push(a);
            if !inside_b {
                let t = fa / (fa - fb);
                out.push(LabelledVert {
                    y: a.y + t * (b.y - a.y),
                    z: a.z + t * (b.z - a.z),
                    label: clip_label,
                });
            }
        } else if inside_b {
            let t = fa / (fa - fb);
            out.push(LabelledVert {
                y: a.y + t * (b.y - a.y),
                z: a.z + t * (b.z - a.z),
                label: a.label,
            });
        }
    }
    out
}

#[derive(Default, Clone, Copy)]
struct SliceMoments {
    area: f64,
    /// First moments about the origin.
    my: f64,
    mz: f64,
    /// Second moments about the origin.
    syy: f64,
    szz: f64,
    syz: f64,
}

fn polygon_moments(poly: &[LabelledVert]) -> SliceMoments {
    let mut m = SliceMoments::default();
    let n = poly.len();
    if n < 3 {
        return m;
    }
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        let cross = a.y * b.z - b.y * a.z;
        m.area += cross;
        m.my += (a.y + b.y) * cross;
        m.mz += (a.z + b.z) * cross;
        m.syy += (a.y * a.y + a.y * b.y + b.y * b.y) * cross;
        m.szz += (a.z * a.z + a.z * b.z + b.z * b.z) * cross;
        m.syz += (a.y * b.z + 2.0 * a.y * a.z + 2.0 * b.y * b.z + b.y * a.z) * cross;
    }
    m.area *= 0.5;
    m.my /= 6.0;
    m.mz /= 6.0;
    m.syy /= 12.0;
    m.szz /= 12.0;
    m.syz /= 24.0;
    m
}

fn edge_lengths(poly: &[LabelledVert], n_labels: usize, out: &mut [f64]) {
    let n = poly.len();
    if n < 2 {
        return;
    }
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        if a.label < n_labels {
            out[a.label] += ((b.y - a.y).powi(2) + (b.z - a.z).powi(2)).sqrt();
        }
    }
}

const CYL_TANGENTS: usize = 256;
const SLICES: usize = 256; // Simpson intervals per piece

struct PieceSlicer {
    x0: f64,
    x1: f64,
    lines: Vec<SliceLine>,
}

impl PieceSlicer {
    fn new(constraints: &[Constraint]) -> Self {
        let mut x0 = f64::NEG_INFINITY;
        let mut x1 = f64::INFINITY;
        let mut lines = Vec::new();
        for (idx, c) in constraints.iter().enumerate() {
            match &c.geom {
                ConstraintGeom::Halfspace { normal, offset } => {
                    if normal.x.abs() > 0.999_999 {
                        if normal.x > 0.0 {
                            x1 = x1.min(offset / normal.x);
                        } else {
                            x0 = x0.max(offset / normal.x);
                        }
                    } else {
                        lines.push(SliceLine {
                            ny: normal.y,
                            nz: normal.z,
                            nx: normal.x,
                            d: *offset,
                            label: idx,
                        });
                    }
                }
                ConstraintGeom::Cylinder { cy, cz, radius } => {
                    for k in 0..CYL_TANGENTS {
                        let th = 2.0 * std::f64::consts::PI * (k as f64) / (CYL_TANGENTS as f64);
                        let (s, c0) = th.sin_cos();
                        lines.push(SliceLine {
                            ny: c0,
                            nz: s,
                            nx: 0.0,
                            d: radius + c0 * cy + s * cz,
                            label: idx,
                        });
                    }
                }
            }
        }
        PieceSlicer { x0, x1, lines }
    }

    fn slice(&self, x: f64) -> Vec<LabelledVert> {
        const BIG: f64 = 50.0;
        let seed_label = usize::MAX;
        let mut poly = vec![
            LabelledVert { y: -BIG, z: -BIG, label: seed_label },
            LabelledVert { y: BIG, z: -BIG, label: seed_label },
            LabelledVert { y: BIG, z: BIG, label: seed_label },
            LabelledVert { y: -BIG, z: BIG, label: seed_label },
        ];
        for line in &self.lines {
            poly = clip_labelled(&poly, line.ny, line.nz, line.d - line.nx * x, line.label);
            if poly.len() < 3 {
                return Vec::new();
            }
        }
        poly
    }
}

#[derive(Default)]
struct VolumeMoments {
    v: f64,
    mx: f64,
    my: f64,
    mz: f64,
    sxx: f64,
    syy: f64,
    szz: f64,
    sxy: f64,
    sxz: f64,
    syz: f64,
    /// Per-constraint lateral face areas (profile faces only).
    face_areas: Vec<f64>,
    /// Profile polygon areas at the two x end caps.
    end_cap_lo: f64,
    end_cap_hi: f64,
}

fn integrate_piece(constraints: &[Constraint]) -> VolumeMoments {
    let slicer = PieceSlicer::new(constraints);
    let mut acc = VolumeMoments { face_areas: vec![0.0; constraints.len()], ..Default::default() };
    let (x0, x1) = (slicer.x0, slicer.x1);
    if !(x1 > x0) {
        return acc;
    }
    let n = SLICES;
    let dx = (x1 - x0) / n as f64;
    let mut edge_acc = vec![0.0; constraints.len()];
    for i in 0..=n {
        let x = x0 + dx * i as f64;
        // Simpson weights 1,4,2,...,4,1 scaled by dx/3.
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * dx
            / 3.0;
        let poly = slicer.slice(x);
        let m = polygon_moments(&poly);
        acc.v += w * m.area;
        acc.mx += w * x * m.area;
        acc.my += w * m.my;
        acc.mz += w * m.mz;
        acc.sxx += w * x * x * m.area;
        acc.syy += w * m.syy;
        acc.szz += w * m.szz;
        acc.sxy += w * x * m.my;
        acc.sxz += w * x * m.mz;
        acc.syz += w * m.syz;
        for e in edge_acc.iter_mut() {
            *e = 0.0;
        }
        edge_lengths(&poly, constraints.len(), &mut edge_acc);
        for (j, e) in edge_acc.iter().enumerate() {
            acc.face_areas[j] += w * e;
        }
        if i == 0 {
            acc.end_cap_lo = m.area;
        }
        if i == n {
            acc.end_cap_hi = m.area;
        }
    }
    // Lateral faces are tilted by their x-normal component: correct the
    // slice-projected strip widths to true surface widths.
    for (j, c) in constraints.iter().enumerate() {
        if let ConstraintGeom::Halfspace { normal, .. } = &c.geom {
            if normal.x.abs() <= 0.999_999 {
                let n2 = (1.0 - normal.x * normal.x).sqrt();
                acc.face_areas[j] /= n2;
            }
        }
    }
    acc
}

/// Enumerate vertices of a piece by intersecting halfspace triples; for
/// cylinder constraints the curved boundary is sampled instead.
fn enumerate_vertices(constraints: &[Constraint]) -> Vec<Vector3<f64>> {
    let tol = 1e-9;
    let planes: Vec<(Vector3<f64>, f64)> = constraints
        .iter()
        .filter_map(|c| match &c.geom {
            ConstraintGeom::Halfspace { normal, offset } => Some((*normal, *offset)),
            _ => None,
        })
        .collect();
    let feasible = |p: &Vector3<f64>| constraints.iter().all(|c| c.value(p) <= 1e-7);
    let mut verts: Vec<Vector3<f64>> = Vec::new();
    let mut push = |v: Vector3<f64>| {
        if v.iter().all(|c| c.is_finite())
            && feasible(&v)
            && !verts.iter().any(|u| (u - v).norm() < 1e-7)
        {
            verts.push(v);
        }
    };
    let np = planes.len();
    for i in 0..np {
        for j in i + 1..np {
            for k in j + 1..np {
                let a = Matrix3::from_rows(&[
                    planes[i].0.transpose(),
                    planes[j].0.transpose(),
                    planes[k].0.transpose(),
                ]);
                let b = Vector3::new(planes[i].1, planes[j].1, planes[k].1);
                if let Some(inv) = a.try_inverse() {
                    if a.determinant().abs() > tol {
                        push(inv * b);
                    }
                }
            }
        }
    }
    // Sample cylinder surfaces so the cloud covers the curved underside.
    for c in constraints {
        if let ConstraintGeom::Cylinder { cy, cz, radius } = &c.geom {
            let (mut ymin, mut ymax) = (f64::NEG_INFINITY, f64::INFINITY);
            let (mut xmin, mut xmax) = (f64::NEG_INFINITY, f64::INFINITY);
            for (n, d) in &planes {
                if n.y.abs() > 0.999 {
                    if n.y > 0.0 {
                        ymax = ymax.min(d / n.y);
                    } else {
                        ymin = ymin.max(d / n.y);
                    }
                }
                if n.x.abs() > 0.999 {
                    if n.x > 0.0 {
                        xmax = xmax.min(d / n.x);
                    } else {
                        xmin = xmin.max(d / n.x);
                    }
                }
            }
            if !ymin.is_finite() || !ymax.is_finite() {
                continue;
            }
            for xi in 0..3 {
                let x = xmin + (xmax - xmin) * (xi as f64) / 2.0;
                for k in 0..=64 {
                    let y = ymin + (ymax - ymin) * (k as f64) / 64.0;
                    let dy = y - cy;
                    if dy.abs() < *radius {
                        let z = cz - (radius * radius - dy * dy).sqrt();
                        push(Vector3::new(x, y, z));
                    }
                }
            }
        }
    }
    verts
}

// ---------------------------------------------------------------------------
// Shape builders
// ---------------------------------------------------------------------------

fn halfspace(nx: f64, ny: f64, nz: f64, offset: f64, area: f64) -> Constraint {
    Constraint {
        geom: ConstraintGeom::Halfspace { normal: Vector3::new(nx, ny, nz).normalize(), offset },
        surface: SurfaceTag::Planar { area },
    }
}

/// Box with z in [z0, z1], y in [-l/2, l/2], x in [-w/2, w/2].
/// Face order: bottom, top, +y, -y, +x, -x.
fn slab_constraints(l: f64, w: f64, z0: f64, z1: f64, x_face_area: f64) -> Vec<Constraint> {
    let h = z1 - z0;
    vec![
        halfspace(0.0, 0.0, -1.0, -z0, l * w),
        halfspace(0.0, 0.0, 1.0, z1, l * w),
        halfspace(0.0, 1.0, 0.0, l / 2.0, w * h),
        halfspace(0.0, -1.0, 0.0, l / 2.0, w * h),
        halfspace(1.0, 0.0, 0.0, w / 2.0, x_face_area),
        halfspace(-1.0, 0.0, 0.0, w / 2.0, x_face_area),
    ]
}

/// Triangular spike prism below z = 0: base [yb0, yb1] at z = 0, tip at
/// (yt, -s), extruded over x in [-w/2, w/2].
fn spike_constraints(yb0: f64, yb1: f64, yt: f64, s: f64, w: f64) -> Vec<Constraint> {
    let tri_area = 0.5 * (yb1 - yb0) * s;
    let left_len = ((yt - yb0).powi(2) + s * s).sqrt();
    let right_len = ((yb1 - yt).powi(2) + s * s).sqrt();
    // Outward normals of the two slant faces (y, z components).
    let nl = Vector3::new(0.0, -s, yb0 - yt).normalize();
    let nr = Vector3::new(0.0, s, yt - yb1).normalize();
    vec![
        halfspace(0.0, 0.0, 1.0, 0.0, (yb1 - yb0) * w),
        Constraint {
            geom: ConstraintGeom::Halfspace { normal: nl, offset: nl.dot(&Vector3::new(0.0, yb0, 0.0)) },
            surface: SurfaceTag::Planar { area: left_len * w },
        },
        Constraint {
            geom: ConstraintGeom::Halfspace { normal: nr, offset: nr.dot(&Vector3::new(0.0, yb1, 0.0)) },
            surface: SurfaceTag::Planar { area: right_len * w },
        },
        halfspace(1.0, 0.0, 0.0, w / 2.0, tri_area),
        halfspace(-1.0, 0.0, 0.0, w / 2.0, tri_area),
    ]
}

struct RawShape {
    kind: ShapeKind,
    length: f64,
    width: f64,
    height: f64,
    piece_constraints: Vec<Vec<Constraint>>,
    ideal_cycle_distance: f64,
    rest_target: Option<f64>,
    draft_deg: f64,
}

fn finish_shape(raw: RawShape) -> Result<ShapeModel, GeometryError> {
    // Aggregate mass properties over the (disjoint) pieces.
    let mut tot = VolumeMoments { face_areas: Vec::new(), ..Default::default() };
    let mut piece_moments = Vec::new();
    for cs in &raw.piece_constraints {
        let m = integrate_piece(cs);
        tot.v += m.v;
        tot.mx += m.mx;
        tot.my += m.my;
        tot.mz += m.mz;
        tot.sxx += m.sxx;
        tot.syy += m.syy;
        tot.szz += m.szz;
        tot.sxy += m.sxy;
        tot.sxz += m.sxz;
        tot.syz += m.syz;
        piece_moments.push(m);
    }
    if tot.v <= 0.0 {
        return Err(GeometryError::DegeneratePiece);
    }
    let com = Vector3::new(tot.mx / tot.v, tot.my / tot.v, tot.mz / tot.v);
    // Second moments about the CM, per unit mass.
    let sxx = tot.sxx / tot.v - com.x * com.x;
    let syy = tot.syy / tot.v - com.y * com.y;
    let szz = tot.szz / tot.v - com.z * com.z;
    let sxy = tot.sxy / tot.v - com.x * com.y;
    let sxz = tot.sxz / tot.v - com.x * com.z;
    let syz = tot.syz / tot.v - com.y * com.z;
    let unit_inertia = Matrix3::new(
        syy + szz, -sxy, -sxz,
        -sxy, sxx + szz, -syz,
        -sxz, -syz, sxx + syy,
    );

    // Refresh planar-face area tags from the slice integrals, recentre
    // constraints on the CM and enumerate vertex clouds. Pieces of one
    // body share their end planes, so an x face flush with the substrate
    // presents the whole profile cross-section: x faces carry the summed
    // end-cap area of all pieces.
    let cap_lo: f64 = piece_moments.iter().map(|m| m.end_cap_lo).sum();
    let cap_hi: f64 = piece_moments.iter().map(|m| m.end_cap_hi).sum();
    let mut pieces = Vec::new();
    let mut min_z = f64::INFINITY;
    for (cs, m) in raw.piece_constraints.iter().zip(&piece_moments) {
        let mut constraints = Vec::with_capacity(cs.len());
        for (j, c) in cs.iter().enumerate() {
            let mut c2 = c.translated(&com);
            if let ConstraintGeom::Halfspace { normal, .. } = &c2.geom {
                if c2.is_planar() {
                    let area = if normal.x > 0.999_999 {
                        cap_hi
                    } else if normal.x < -0.999_999 {
                        cap_lo
                    } else {
                        m.face_areas[j]
                    };
                    c2.surface = SurfaceTag::Planar { area };
                }
            }
            constraints.push(c2);
        }
        let vertices = enumerate_vertices(&constraints);
        if vertices.len() < 3 {
            return Err(GeometryError::DegeneratePiece);
        }
        for v in &vertices {
            if v.norm() > 20.0 {
                return Err(GeometryError::DegeneratePiece);
            }
            min_z = min_z.min(v.z);
        }
        pieces.push(ConvexPiece { constraints, vertices });
    }
    let rest_height = -min_z;
    if let Some(target) = raw.rest_target {
        if (rest_height - target).abs() > 0.05 * target {
            return Err(GeometryError::RestHeightMismatch { actual: rest_height, target });
        }
    }
    Ok(ShapeModel {
        kind: raw.kind,
        length: raw.length,
        width: raw.width,
        height: raw.height,
        pieces,
        rest_height,
        volume: tot.v,
        unit_inertia,
        ideal_cycle_distance: raw.ideal_cycle_distance,
        draft_deg: raw.draft_deg,
    })
}

/// Plain cuboid of the given length, width and height (mm).
pub fn make_cuboid(l: f64, w: f64, h: f64) -> Result<ShapeModel, GeometryError> {
    if l <= 0.0 {
        return Err(GeometryError::NonPositiveDimension("length"));
    }
    if w <= 0.0 {
        return Err(GeometryError::NonPositiveDimension("width"));
    }
    if h <= 0.0 {
        return Err(GeometryError::NonPositiveDimension("height"));
    }
    finish_shape(RawShape {
        kind: ShapeKind::Cuboid,
        length: l,
        width: w,
        height: h,
        piece_constraints: vec![slab_constraints(l, w, -h / 2.0, h / 2.0, l * h)],
        ideal_cycle_distance: 2.0 * (l + h),
        rest_target: None,
        draft_deg: 0.0,
    })
}

fn profile_hull_perimeter(l: f64, slab_h: f64, tip_offset: f64, spike_h: f64) -> f64 {
    let slant = ((l / 2.0 - tip_offset).powi(2) + spike_h * spike_h).sqrt();
    l + 2.0 * slab_h + 2.0 * (slant + tip_offset)
}

fn spiked_family(
    kind: ShapeKind,
    l: f64,
    w: f64,
    p: &SpikeParams,
    rest_target: f64,
) -> Result<ShapeModel, GeometryError> {
    if l <= 0.0 || w <= 0.0 {
        return Err(GeometryError::NonPositiveDimension("length/width"));
    }
    if p.slab_height <= 0.0 || p.spike_height <= 0.0 || p.base_half_width <= 0.0 {
        return Err(GeometryError::NonPositiveDimension("spike params"));
    }
    let tips: Vec<f64> = match kind {
        ShapeKind::Spiked => vec![-p.tip_offset, 0.0, p.tip_offset],
        ShapeKind::SpikedEnds => vec![-p.tip_offset, p.tip_offset],
        _ => unreachable!(),
    };
    // Profile cross-section area for the flat x faces: slab plus spikes.
    let profile_area =
        l * p.slab_height + tips.len() as f64 * p.base_half_width * p.spike_height;
    let mut piece_constraints =
        vec![slab_constraints(l, w, 0.0, p.slab_height, profile_area)];
    for yt in tips {
        piece_constraints.push(spike_constraints(
            yt - p.base_half_width,
            yt + p.base_half_width,
            yt,
            p.spike_height,
            w,
        ));
    }
    finish_shape(RawShape {
        kind,
        length: l,
        width: w,
        height: p.slab_height,
        piece_constraints,
        ideal_cycle_distance: profile_hull_perimeter(l, p.slab_height, p.tip_offset, p.spike_height),
        rest_target: Some(rest_target),
        draft_deg: 0.0,
    })
}

/// Spiked-shape robot (spikes along the underside).
pub fn make_spiked(l: f64, w: f64, params: &SpikeParams) -> Result<ShapeModel, GeometryError> {
    let rest_target = 0.325 * (l / 0.8);
    spiked_family(ShapeKind::Spiked, l, w, params, rest_target)
}

/// Spiked-ends robot (one spike under each end).
pub fn make_spiked_ends(l: f64, w: f64, params: &SpikeParams) -> Result<ShapeModel, GeometryError> {
    let rest_target = 0.275 * (l / 0.8);
    spiked_family(ShapeKind::SpikedEnds, l, w, params, rest_target)
}

/// Curved-underside robot: slab with a cylindrical cap.
pub fn make_curved(l: f64, w: f64, params: &CurveParams) -> Result<ShapeModel, GeometryError> {
    if l <= 0.0 || w <= 0.0 || params.slab_height <= 0.0 || params.sag <= 0.0 {
        return Err(GeometryError::NonPositiveDimension("curved params"));
    }
    let rest_target = 0.22 * (l / 0.8);
    let half = l / 2.0;
    let radius = (params.sag * params.sag + half * half) / (2.0 * params.sag);
    let mut constraints = slab_constraints(l, w, 0.0, params.slab_height, 0.0);
    // End caps sized later by the slicer; bottom face replaced by the cylinder.
    constraints.remove(0);
    constraints.push(Constraint {
        geom: ConstraintGeom::Cylinder { cy: 0.0, cz: radius - params.sag, radius },
        surface: SurfaceTag::Quadratic,
    });
    let arc = 2.0 * radius * (half / radius).asin();
    finish_shape(RawShape {
        kind: ShapeKind::Curved,
        length: l,
        width: w,
        height: params.slab_height,
        piece_constraints: vec![constraints],
        ideal_cycle_distance: arc + l + 2.0 * params.slab_height,
        rest_target: Some(rest_target),
        draft_deg: 0.0,
    })
}

/// Apply an inward draft of `phi` degrees: the profile outline shrinks
/// linearly across the width, pivoting on the x = -W/2 outline (the
/// laser-entry side), which truncates spike tips toward x = +W/2.
pub fn apply_draft(shape: &ShapeModel, phi_deg: f64) -> Result<ShapeModel, GeometryError> {
    if !(0.0..=20.0).contains(&phi_deg) {
        return Err(GeometryError::DraftOutOfRange(phi_deg));
    }
    if phi_deg == 0.0 {
        return Ok(shape.clone());
    }
    let t = phi_deg.to_radians().tan();
    let w2 = shape.width / 2.0;
    let piece_constraints: Vec<Vec<Constraint>> = shape
        .pieces
        .iter()
        .map(|piece| {
            piece
                .constraints
                .iter()
                .map(|c| match &c.geom {
                    ConstraintGeom::Halfspace { normal, offset } if normal.x.abs() <= 0.999_999 => {
                        // f'(p) = f(p) + t (p_x + w/2), renormalized.
                        let n_new = Vector3::new(normal.x + t, normal.y, normal.z);
                        let s = n_new.norm();
                        Constraint {
                            geom: ConstraintGeom::Halfspace {
                                normal: n_new / s,
                                offset: (offset - t * w2) / s,
                            },
                            surface: c.surface,
                        }
                    }
                    _ => c.clone(),
                })
                .collect()
        })
        .collect();
    let mut out = finish_shape(RawShape {
        kind: shape.kind,
        length: shape.length,
        width: shape.width,
        height: shape.height,
        piece_constraints,
        ideal_cycle_distance: shape.ideal_cycle_distance,
        rest_target: None,
        draft_deg: phi_deg,
    })?;
    if out.volume >= shape.volume {
        return Err(GeometryError::DegeneratePiece);
    }
    out.draft_deg = phi_deg;
    Ok(out)
}
