use tumblesim::config::RunConfig;
use tumblesim::geometry::ShapeKind;
use tumblesim::scenarios::{config_for_shape, locomotion_test};

const KINDS: [ShapeKind; 4] =
    [ShapeKind::Cuboid, ShapeKind::Spiked, ShapeKind::SpikedEnds, ShapeKind::Curved];

fn main() {
    let spc: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let mut cfg = RunConfig::from_preset("paper-gen1").expect("preset");
    cfg.magnetics.amplitude_mt = 20.0;
    cfg.stepping.steps_per_cycle = spc;
    for kind in KINDS {
        let c = config_for_shape(&cfg, kind).expect("cfg");
        let t = std::time::Instant::now();
        match locomotion_test(&c, 10.0, 2) {
            Ok((r, _)) => println!(
                "paper 10Hz {:?}: speed={:.3} ideal={:.3} slip={:.4} disp2p={:.4}mm ({:.1}s)",
                kind, r.measured_speed, r.ideal_speed, r.slip_ratio, r.measured_speed * 0.2,
                t.elapsed().as_secs_f64()
            ),
            Err(e) => println!("paper 10Hz {kind:?} FAILED: {e}"),
        }
    }
}
