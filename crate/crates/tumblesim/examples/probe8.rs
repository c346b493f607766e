use tumblesim::config::RunConfig;
use tumblesim::scenarios::locomotion_test;

fn main() {
    for f in [1.0, 2.0, 5.0, 10.0] {
        let mut cfg = RunConfig::from_preset("paper-gen1").expect("preset");
        cfg.magnetics.amplitude_mt = 10.0;
        let start = std::time::Instant::now();
        match locomotion_test(&cfg, f, 5) {
            Ok((res, _)) => println!(
                "f={f}: speed={:.4} mm/s ideal={:.4} ratio={:.4} slip={:.4} in {:.1}s",
                res.measured_speed, res.ideal_speed, res.measured_speed / res.ideal_speed,
                res.slip_ratio, start.elapsed().as_secs_f64()
            ),
            Err(e) => println!("f={f} FAILED: {e}"),
        }
    }
}
