//! Scaling of quadratic-form errors and linear-statistic variances with n.

use rmt_lab::harness::{run_concentration_suite, ExperimentConfig};

fn main() -> rmt_lab::Result<()> {
    let mut cfg = ExperimentConfig::new(200, 2.0);
    cfg.replications = 40;
    cfg.concentration.sizes = vec![25, 50, 100, 200];
    let rep = run_concentration_suite(&cfg)?;
    for row in &rep.rows {
        println!(
            "n {:>4}: E|XAX - TrA|^2 {:>9.3}  Var Tr f(W) {:.4}  lambda_max {:.4}",
            row.n, row.quad_form_mse, row.trace_variance, row.lambda_max
        );
    }
    println!("slopes: {:.3} and {:.3}", rep.quad_form_slope, rep.trace_variance_slope);
    Ok(())
}
