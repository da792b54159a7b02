use lagmesh::experiments::*;
use std::time::Instant;
fn main() {
    let t0 = Instant::now();
    let cfg = StudyConfig {
        h_levels: vec![0.1, 0.05],
        n_random_coeff: 100,
        seed: 7,
        quad_resolution_fraction: 0.1,
        ..Default::default()
    };
    let report = run_stability_study(&cfg).unwrap();
    println!("stability 2 levels both kinds: {:.1}s", t0.elapsed().as_secs_f64());
    for c in report.cells.iter() {
        println!("  h={:.3} {} p={:?} sigma={:?}: [{:.4}, {:.4}]", c.h, c.kind, c.p, c.sigma, c.ratio_min.unwrap_or(f64::NAN), c.ratio_max.unwrap_or(f64::NAN));
    }
}
