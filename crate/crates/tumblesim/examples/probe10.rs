use tumblesim::config::{ExecMode, RunConfig};
use tumblesim::geometry::ShapeKind;
use tumblesim::scenarios::{config_for_shape, incline_test, shape_comparison};

const KINDS: [ShapeKind; 4] =
    [ShapeKind::Cuboid, ShapeKind::Spiked, ShapeKind::SpikedEnds, ShapeKind::Curved];

fn main() {
    let spc: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);

    let mut cfg = RunConfig::from_preset("paper-gen1").expect("preset");
    cfg.magnetics.amplitude_mt = 20.0;
    cfg.stepping.steps_per_cycle = spc;
    let t = std::time::Instant::now();
    match shape_comparison(&cfg, &KINDS, 10.0, 2, ExecMode::Sequential) {
        Ok(rows) => {
            for r in &rows {
                println!("paper 10Hz {}: speed={:.3} ideal={:.3}", r.shape, r.measured_speed, r.ideal_speed);
            }
        }
        Err(e) => println!("paper comparison FAILED: {e}"),
    }
    println!("  ({:.1}s)", t.elapsed().as_secs_f64());

    let mut alu = RunConfig::from_preset("aluminum-gen2").expect("preset");
    alu.magnetics.amplitude_mt = 20.0;
    alu.magnetics.frequency_hz = 1.0;
    alu.stepping.steps_per_cycle = spc;
    for kind in KINDS {
        let c = config_for_shape(&alu, kind).expect("shape cfg");
        for angle in [20.0, 30.0, 45.0] {
            let t = std::time::Instant::now();
            match incline_test(&c, angle, 5) {
                Ok((res, _)) => println!(
                    "alu {:?} {angle}deg: climbed={} net={:.3}mm final={:.3}mm ({:.1}s)",
                    kind, res.climbed, res.net_advance_mm, res.final_period_advance_mm,
                    t.elapsed().as_secs_f64()
                ),
                Err(e) => println!("alu {kind:?} {angle}deg FAILED: {e}"),
            }
        }
    }
}
