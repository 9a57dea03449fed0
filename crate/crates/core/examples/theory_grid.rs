//! Closed-form Stieltjes transforms and the mean process at a few points.

use num_complex::Complex64;
use rmt_lab::theory::{ds1, ds2, mean_process, s1_closed, s2_closed, s_closed, TheoryParams};

fn main() -> rmt_lab::Result<()> {
    let params = TheoryParams::new(2.0, 0.0, 3.0, 2.0)?;
    println!("{:>14} {:>24} {:>24} {:>24} {:>24}", "z", "s", "ds1", "ds2", "M");
    for z in [Complex64::new(0.0, 2.0), Complex64::new(1.0, 1.0), Complex64::new(-1.0, 1.5)] {
        let s = s_closed(z, params.c)?;
        println!(
            "{:>14} {:>24.6} {:>24.6} {:>24.6} {:>24.6}",
            format!("{z}"),
            s,
            ds1(z, params.c)?,
            ds2(z, params.c)?,
            mean_process(z, &params)?
        );
        // coupled pair: s¹ = −1/(z + c s²), s² = −1/(z + s¹)
        let (s1, s2) = (s1_closed(z, params.c)?, s2_closed(z, params.c)?);
        assert!((s2 + 1.0 / (z + s1)).norm() < 1e-12);
    }
    Ok(())
}
