use tumblesim::config::RunConfig;
use tumblesim::scenarios::rest_state;
use tumblesim::stepper::Stepper;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let preset = args.get(1).map(String::as_str).unwrap_or("paper-gen1");
    let angle: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(45.0);
    let t_max: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.3);

    let mut cfg = RunConfig::from_preset(preset).expect("preset");
    cfg.magnetics.amplitude_mt = 20.0;
    cfg.magnetics.frequency_hz = 1.0;
    cfg.environment.incline_deg = angle;
    let params = cfg.build().expect("build");
    let h = params.h;
    let initial = rest_state(&params);
    let mut stepper = Stepper::new(params, initial);
    let n = (t_max / h) as usize;
    let stride = ((0.002 / h) as usize).max(1);
    println!("t,y,z,vy,ang_deg,wx,ln,lt,adh,face,minz");
    for i in 0..n {
        match stepper.step() {
            Ok(rec) => {
                if i % stride == 0 {
                    let q = &rec.state.orientation;
                    let ang = 2.0 * q.coords.x.atan2(q.coords.w) * 180.0 / std::f64::consts::PI;
                    println!(
                        "{:.4},{:.4},{:.4},{:.2},{:.1},{:.1},{:.4},{:.4},{:.4},{:?},{:.5}",
                        rec.t,
                        rec.state.position.y,
                        rec.state.position.z,
                        rec.state.linear_velocity.y,
                        ang,
                        rec.state.angular_velocity.x,
                        rec.lambda_n,
                        rec.lambda_t,
                        rec.adhesion,
                        rec.face,
                        rec.min_vertex_z
                    );
                }
            }
            Err(e) => {
                println!("FAILED: {e}");
                break;
            }
        }
    }
}
