use std::time::Instant;
use twogrid::experiments::exp2::{run_experiment2, Experiment2Config};

fn main() {
    let nu: f64 = std::env::args().nth(1).unwrap().parse().unwrap();
    let t0 = Instant::now();
    let config = Experiment2Config::new(nu, "target/oracle-cache");
    let out = run_experiment2(&config).unwrap();
    for c in &out.comparisons {
        println!(
            "{:<16} u_L2 {:.5e}  u_H1 {:.5e}  p_L2 {:.5e}  midline_tv {:.5e}",
            c.method, c.norms.u_l2, c.norms.u_h1, c.norms.p_l2, c.midline_tv
        );
    }
    println!("adequacy ratio: {:.4}", out.adequacy_ratio);
    println!("elapsed: {:?}", t0.elapsed());
}
