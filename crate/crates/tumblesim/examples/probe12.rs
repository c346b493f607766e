use tumblesim::config::RunConfig;
use tumblesim::geometry::ShapeKind;
use tumblesim::scenarios::{config_for_shape, locomotion_test};

fn main() {
    let kind = match std::env::args().nth(1).as_deref() {
        Some("ses") => ShapeKind::SpikedEnds,
        Some("curved") => ShapeKind::Curved,
        Some("cuboid") => ShapeKind::Cuboid,
        _ => ShapeKind::Spiked,
    };
    let spc: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let mut cfg = RunConfig::from_preset("paper-gen1").expect("preset");
    cfg.magnetics.amplitude_mt = 20.0;
    cfg.stepping.steps_per_cycle = spc;
    let c = config_for_shape(&cfg, kind).expect("cfg");
    match locomotion_test(&c, 10.0, 2) {
        Ok((r, _)) => println!("{kind:?}: speed={:.3} ideal={:.3} slip={:.4}", r.measured_speed, r.ideal_speed, r.slip_ratio),
        Err(e) => println!("{kind:?} FAILED: {e}"),
    }
}
