//! Outliers outside the fattened limit support, per replication.

use rmt_lab::harness::{run_support_experiment, ExperimentConfig};

fn main() -> rmt_lab::Result<()> {
    let mut cfg = ExperimentConfig::new(150, 2.0);
    cfg.replications = 20;
    let rep = run_support_experiment(&cfg)?;
    println!("support {:?}", rep.support.intervals);
    for row in rep.rows.iter().take(5) {
        println!(
            "rep {:>2}: outliers {}, zeros {}, max {:.4}, smallest positive {:.4}",
            row.replication, row.outliers, row.zero_count, row.max_abs, row.min_positive
        );
    }
    println!("total outliers {}, sd of max {:.4}", rep.total_outliers(), rep.max_eigenvalue_sd());
    Ok(())
}
