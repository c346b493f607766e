use tumblesim::config::RunConfig;
use tumblesim::geometry::ShapeKind;
use tumblesim::scenarios::{run_sweep_cell, SweepSpec};

fn main() {
    let spc: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    for kind in [ShapeKind::Spiked, ShapeKind::SpikedEnds] {
        let mut cfg = RunConfig::from_preset("pdms-half").expect("preset");
        cfg.shape.kind = kind;
        cfg.stepping.steps_per_cycle = spc;
        let spec = SweepSpec { theta1_deg: 0.0, theta2_deg: 0.0, draft_deg: 0.0 };
        let start = std::time::Instant::now();
        match run_sweep_cell(&cfg, &spec) {
            Ok(c) => println!(
                "{:?} spc={spc}: speed={:.1} um/s drift={:.2} um twist_end={:.2} max_twist={:.2} flipped={} in {:.1}s",
                kind, c.speed_mm_s * 1000.0, c.drift_mm * 1000.0, c.twist_deg, c.max_twist_deg, c.flipped,
                start.elapsed().as_secs_f64()
            ),
            Err(e) => println!("{kind:?} spc={spc} FAILED: {e}"),
        }
    }
}
