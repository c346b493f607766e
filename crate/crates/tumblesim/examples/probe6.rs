use tumblesim::config::RunConfig;
use tumblesim::geometry::ShapeKind;
use tumblesim::scenarios::rest_state;
use tumblesim::stepper::Stepper;

fn main() {
    let mut cfg = RunConfig::from_preset("pdms-half").expect("preset");
    cfg.shape.kind = ShapeKind::Spiked;
    let params = cfg.build().expect("build");
    let h = params.h;
    let initial = rest_state(&params);
    let mut stepper = Stepper::new(params, initial);
    for i in 0..130 {
        match stepper.step() {
            Ok(rec) => {
                if i % 5 == 0 || i >= 100 {
                    let q = &rec.state.orientation;
                    let ang = 2.0 * q.coords.x.atan2(q.coords.w) * 180.0 / std::f64::consts::PI;
                    println!(
                        "{:.4} y={:.5} z={:.5} vz={:.3} ang={:.3} wx={:.3} ln={:.5} piece={} minz={:.6} halv={}",
                        rec.t, rec.state.position.y, rec.state.position.z,
                        rec.state.linear_velocity.z, ang, rec.state.angular_velocity.x,
                        rec.lambda_n, rec.piece, rec.min_vertex_z, rec.halvings
                    );
                }
            }
            Err(e) => { println!("FAILED: {e}"); break; }
        }
    }
}
