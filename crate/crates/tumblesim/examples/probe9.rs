use tumblesim::config::RunConfig;
use tumblesim::scenarios::rest_state;
use tumblesim::stepper::Stepper;

fn main() {
    let mut cfg = RunConfig::from_preset("paper-gen1").expect("preset");
    cfg.environment.incline_deg = 60.0;
    cfg.magnetics.amplitude_mt = 20.0;
    cfg.magnetics.frequency_hz = 1.0;
    let params = cfg.build().expect("build");
    let h = 1e-3;
    let state = rest_state(&params);
    let mut sim = Stepper::new(params, state);
    loop {
        match sim.step() {
            Ok(r) => {
                if r.t >= 1.35 {
                    let e = sim.state.orientation.euler_angles();
                    println!(
                        "t={:.4} y={:.4} z={:.4} rotx={:.1} vy={:.3} vz={:.3} wx={:.3} ln={:.4} lt={:.4} adh={:.4} face={:?} halv={}",
                        r.t, r.state.position.y, r.state.position.z, e.0.to_degrees(),
                        r.state.linear_velocity.y, r.state.linear_velocity.z,
                        r.state.angular_velocity.x, r.lambda_n, r.lambda_t, r.adhesion,
                        r.face, r.halvings
                    );
                }
                if sim.t >= 1.45 { break; }
            }
            Err(e) => {
                println!("FAILED at t={:.6}: {e}", sim.t);
                break;
            }
        }
    }
}
