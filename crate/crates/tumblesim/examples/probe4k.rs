use tumblesim::config::RunConfig;
use tumblesim::scenarios::incline_test;

fn main() {
    for (preset, angles) in [
        ("paper-gen1", vec![5.0, 10.0, 15.0, 30.0, 45.0, 60.0]),
        ("aluminum-gen2", vec![30.0, 45.0]),
    ] {
        for a in angles {
            let mut cfg = RunConfig::from_preset(preset).expect("preset");
            cfg.magnetics.amplitude_mt = 20.0;
            cfg.magnetics.frequency_hz = 1.0;
            let start = std::time::Instant::now();
            match incline_test(&cfg, a, 5) {
                Ok((res, _)) => println!(
                    "{preset} {a}deg: climbed={} net={:.3}mm final={:.3}mm in {:.1}s",
                    res.climbed, res.net_advance_mm, res.final_period_advance_mm,
                    start.elapsed().as_secs_f64()
                ),
                Err(e) => println!("{preset} {a}deg FAILED: {e}"),
            }
        }
    }
}
