//! Geometry oracles: closed-form mass properties, Monte Carlo volume
//! checks, vertex enumeration and draft behaviour.

use approx::assert_relative_eq;
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tumblesim::geometry::{
    apply_draft, default_curve_params, default_spike_params, make_cuboid, make_curved,
    make_spiked, make_spiked_ends, BodyConfiguration, ShapeKind, ShapeModel,
};

const L: f64 = 0.8;
const W: f64 = 0.4;
const H: f64 = 0.1;

fn cuboid() -> ShapeModel {
    make_cuboid(L, W, H).expect("cuboid")
}

fn spiked() -> ShapeModel {
    make_spiked(L, W, &default_spike_params(ShapeKind::Spiked, 1.0)).expect("spiked")
}

fn spiked_ends() -> ShapeModel {
    make_spiked_ends(L, W, &default_spike_params(ShapeKind::SpikedEnds, 1.0)).expect("spiked-ends")
}

fn curved() -> ShapeModel {
    make_curved(L, W, &default_curve_params(1.0)).expect("curved")
}

fn all_shapes() -> Vec<ShapeModel> {
    vec![cuboid(), spiked(), spiked_ends(), curved()]
}

/// Point-in-shape test straight from the constraint definition.
fn contains(shape: &ShapeModel, p: &Vector3<f64>) -> bool {
    shape
        .pieces
        .iter()
        .any(|piece| piece.constraints.iter().all(|c| c.value(p) <= 0.0))
}

/// Monte Carlo volume oracle over the shape's bounding box.
fn mc_volume(shape: &ShapeModel, seed: u64, n: usize) -> f64 {
    let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
    for piece in &shape.pieces {
        for v in &piece.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
    }
    // Curved surfaces bulge past the vertex cloud hull; pad the box.
    let pad = 0.05 * (hi - lo).norm();
    lo.iter_mut().for_each(|c| *c -= pad);
    hi.iter_mut().for_each(|c| *c += pad);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n {
        let p = Vector3::new(
            rng.gen_range(lo.x..hi.x),
            rng.gen_range(lo.y..hi.y),
            rng.gen_range(lo.z..hi.z),
        );
        if contains(shape, &p) {
            hits += 1;
        }
    }
    let box_vol = (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
    box_vol * hits as f64 / n as f64
}

#[test]
fn cuboid_closed_form_properties() {
    let s = cuboid();
    assert_relative_eq!(s.volume, L * W * H, max_relative = 1e-9);
    assert_relative_eq!(s.rest_height, H / 2.0, epsilon = 1e-9);
    assert_relative_eq!(s.ideal_cycle_distance, 2.0 * (L + H), epsilon = 1e-12);
    // Principal inertia of a box, per unit mass; x is the width axis.
    let i = s.unit_inertia;
    assert_relative_eq!(i[(0, 0)], (L * L + H * H) / 12.0, max_relative = 1e-9);
    assert_relative_eq!(i[(1, 1)], (W * W + H * H) / 12.0, max_relative = 1e-9);
    assert_relative_eq!(i[(2, 2)], (L * L + W * W) / 12.0, max_relative = 1e-9);
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                assert!(i[(a, b)].abs() < 1e-12, "off-diagonal inertia {a}{b} = {}", i[(a, b)]);
            }
        }
    }
    // 8 vertices at the corners.
    let piece = &s.pieces[0];
    assert_eq!(piece.vertices.len(), 8);
    for v in &piece.vertices {
        assert_relative_eq!(v.x.abs(), W / 2.0, epsilon = 1e-9);
        assert_relative_eq!(v.y.abs(), L / 2.0, epsilon = 1e-9);
        assert_relative_eq!(v.z.abs(), H / 2.0, epsilon = 1e-9);
    }
    // Face areas: bottom/top L*W, the y faces W*H, the x faces L*H.
    let areas: Vec<f64> = piece.constraints.iter().map(|c| c.area()).collect();
    assert_relative_eq!(areas[0], L * W, max_relative = 1e-6);
    assert_relative_eq!(areas[1], L * W, max_relative = 1e-6);
    assert_relative_eq!(areas[2], W * H, max_relative = 1e-6);
    assert_relative_eq!(areas[3], W * H, max_relative = 1e-6);
    assert_relative_eq!(areas[4], L * H, max_relative = 1e-6);
    assert_relative_eq!(areas[5], L * H, max_relative = 1e-6);
}

#[test]
fn rest_heights_match_published_values() {
    assert_relative_eq!(spiked().rest_height, 0.325, max_relative = 0.01);
    assert_relative_eq!(spiked_ends().rest_height, 0.275, max_relative = 0.01);
    assert_relative_eq!(curved().rest_height, 0.22, max_relative = 0.01);
}

#[test]
fn cycle_distances_match_rolling_targets() {
    // Hull perimeter of the tumbling cross-section, full scale.
    assert_relative_eq!(spiked().ideal_cycle_distance, 2.186, max_relative = 0.01);
    assert_relative_eq!(spiked_ends().ideal_cycle_distance, 2.394, max_relative = 0.01);
    assert_relative_eq!(cuboid().ideal_cycle_distance, 1.8, max_relative = 1e-9);
}

#[test]
fn monte_carlo_volume_agrees() {
    for (i, shape) in all_shapes().into_iter().enumerate() {
        let mc = mc_volume(&shape, 42 + i as u64, 400_000);
        assert_relative_eq!(shape.volume, mc, max_relative = 0.01);
    }
}

#[test]
fn spike_tips_are_lowest_points() {
    let s = spiked();
    let p = default_spike_params(ShapeKind::Spiked, 1.0);
    let state = BodyConfiguration::at_rest(Vector3::new(0.0, 0.0, s.rest_height));
    // Three spike pieces after the slab; all tips touch z = 0 at rest.
    assert_eq!(s.pieces.len(), 4);
    for piece in &s.pieces[1..] {
        let low = piece.lowest_vertex_world(&state);
        assert_relative_eq!(low.z, 0.0, epsilon = 1e-9);
    }
    // The slab sits a spike height above the substrate.
    let slab_low = s.pieces[0].min_world_z(&state);
    assert_relative_eq!(slab_low, p.spike_height, epsilon = 1e-6);
}

#[test]
fn x_faces_carry_full_profile_area() {
    let s = spiked_ends();
    let p = default_spike_params(ShapeKind::SpikedEnds, 1.0);
    let profile = L * p.slab_height + 2.0 * p.base_half_width * p.spike_height;
    // Slab piece, +x/-x faces (indices 4, 5 in construction order).
    let areas: Vec<f64> = s.pieces[0].constraints.iter().map(|c| c.area()).collect();
    assert_relative_eq!(areas[4], profile, max_relative = 1e-3);
    assert_relative_eq!(areas[5], profile, max_relative = 1e-3);
}

#[test]
fn eval_world_matches_body_frame() {
    let s = cuboid();
    let mut state = BodyConfiguration::at_rest(Vector3::new(1.0, -2.0, 0.5));
    state.orientation = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.3);
    let p_body = Vector3::new(0.01, -0.02, 0.03);
    let p_world = state.to_world(&p_body);
    let evals = s.pieces[0].eval_world(&state, &p_world);
    for ((f, g), c) in evals.iter().zip(&s.pieces[0].constraints) {
        assert_relative_eq!(*f, c.value(&p_body), epsilon = 1e-12);
        let g_expected = state.orientation * c.gradient(&p_body);
        assert_relative_eq!((g - g_expected).norm(), 0.0, epsilon = 1e-12);
    }
}

#[test]
fn draft_zero_is_identity() {
    let s = spiked();
    let d = apply_draft(&s, 0.0).expect("draft 0");
    assert_eq!(d.volume, s.volume);
    assert_eq!(d.rest_height, s.rest_height);
}

#[test]
fn draft_volume_strictly_decreases() {
    for shape in all_shapes() {
        let mut prev = shape.volume;
        for phi in [2.0, 5.0, 10.0, 15.0] {
            let d = apply_draft(&shape, phi).expect("draft");
            assert!(
                d.volume < prev,
                "{:?}: volume {} not below {} at {} deg",
                shape.kind,
                d.volume,
                prev,
                phi
            );
            prev = d.volume;
        }
    }
}

#[test]
fn draft_is_continuous_at_zero() {
    let s = cuboid();
    let d = apply_draft(&s, 1e-6).expect("tiny draft");
    assert_relative_eq!(d.volume, s.volume, max_relative = 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let p = Vector3::new(
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.1..0.1),
        );
        for (c0, c1) in s.pieces[0].constraints.iter().zip(&d.pieces[0].constraints) {
            assert!((c0.value(&p) - c1.value(&p)).abs() < 1e-6);
        }
    }
}

#[test]
fn draft_truncates_spikes_asymmetrically() {
    // With enough draft the thin spikes vanish on the +x side: the spike
    // piece must still exist but only span part of the width.
    let s = spiked();
    let d = apply_draft(&s, 10.0).expect("draft");
    let span = |piece: &tumblesim::geometry::ConvexPiece| {
        let min = piece.vertices.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
        let max = piece.vertices.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    };
    let (slab_min, slab_max) = span(&d.pieces[0]);
    let (spike_min, spike_max) = span(&d.pieces[1]);
    let mid = 0.5 * (slab_min + slab_max);
    assert!(
        spike_max - spike_min < 0.5 * (slab_max - slab_min),
        "drafted spike should not span the full width: [{spike_min}, {spike_max}]"
    );
    assert!(spike_max < mid, "spike should cling to the laser-entry side, max_x = {spike_max}");
    // Lowest point shifts off-centre in x: the tip survives only near
    // the entry face, which is what seeds the out-of-plane twist.
    let state = BodyConfiguration::at_rest(Vector3::new(0.0, 0.0, d.rest_height));
    let low = d.pieces[1].lowest_vertex_world(&state);
    assert!(low.x < mid, "lowest point should sit toward the entry side, got {}", low.x);
}

#[test]
fn drafted_inertia_gains_products() {
    let s = spiked();
    let d = apply_draft(&s, 10.0).expect("draft");
    // Undrafted: a symmetric shape with diagonal inertia.
    assert!(s.unit_inertia[(0, 2)].abs() < 1e-10);
    // Drafted: mass asymmetry across x produces an xz product.
    assert!(d.unit_inertia[(0, 2)].abs() > 1e-7, "expected xz product, got {}", d.unit_inertia[(0, 2)]);
}

#[test]
fn contact_piece_tracks_orientation() {
    let s = spiked_ends();
    let mut state = BodyConfiguration::at_rest(Vector3::new(0.0, 0.0, s.rest_height));
    // At rest both spikes touch; ties go to the lower piece index (1).
    assert_eq!(s.contact_piece(&state), 1);
    // Pitched forward about x, one end spike is clearly lowest.
    state.orientation = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.5);
    let idx = s.contact_piece(&state);
    assert!(idx == 1 || idx == 2);
    let low1 = s.pieces[1].min_world_z(&state);
    let low2 = s.pieces[2].min_world_z(&state);
    assert_eq!(idx, if low1 <= low2 { 1 } else { 2 });
}
