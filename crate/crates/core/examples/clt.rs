//! Empirical mean process of the Gaussian baseline against M(z).

use num_complex::Complex64;
use rmt_lab::harness::{run_clt_experiment, ExperimentConfig};

fn main() -> rmt_lab::Result<()> {
    let mut cfg = ExperimentConfig::new(100, 2.0).with_grid(&[Complex64::new(0.0, 2.0), Complex64::new(1.0, 1.0)]);
    cfg.replications = 300;
    let res = run_clt_experiment(&cfg)?;
    for row in &res.rows {
        println!(
            "z = {}: M_hat = {:.4}  M = {:.4}  stderr {:.4}",
            row.z, row.m_hat, row.m_theory, row.stderr
        );
    }
    println!("{:.1} s", res.wall_time_secs);
    Ok(())
}
