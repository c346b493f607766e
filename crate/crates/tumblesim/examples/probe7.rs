use tumblesim::config::RunConfig;
use tumblesim::geometry::ShapeKind;
use tumblesim::scenarios::rest_state;

fn main() {
    for kind in [ShapeKind::Spiked, ShapeKind::SpikedEnds] {
        let mut cfg = RunConfig::from_preset("pdms-half").expect("preset");
        cfg.shape.kind = kind;
        let params = cfg.build().expect("build");
        let s = rest_state(&params);
        println!("{kind:?} rest z={}", s.position.z);
        for (i, p) in params.shape.pieces.iter().enumerate() {
            let mz = p.min_world_z(&s);
            let low = p.lowest_vertex_world(&s);
            println!("  piece {i}: min_z={mz:.8} lowest=({:.4},{:.4},{:.4}) nverts={}", low.x, low.y, low.z, p.vertices.len());
        }
    }
}
