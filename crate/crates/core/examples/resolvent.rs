//! Diagonal resolvent entries approach s¹ and s² as n grows.

use num_complex::Complex64;
use rmt_lab::harness::{run_resolvent_diagonal_check, ExperimentConfig};

fn main() -> rmt_lab::Result<()> {
    let mut cfg = ExperimentConfig::new(50, 2.0);
    cfg.replications = 20;
    let rep = run_resolvent_diagonal_check(&cfg, Complex64::new(0.0, 2.0))?;
    for row in &rep.rows {
        println!(
            "n {:>3}, m {:>3}: max|S_ii - s2|^2 {:.3e}  max|S_ii - s1|^2 {:.3e}",
            row.n, row.m, row.m_block, row.n_block
        );
    }
    println!("decreasing: {}", rep.decreasing());
    Ok(())
}
