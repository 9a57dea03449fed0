//! Spectrum of the block matrix for one Gaussian batch, against the limit
//! support and density.

use rmt_lab::ensemble::{build_data_matrix, eigenvalues_w, spectrum_of};
use rmt_lab::sampler::gaussian_baseline;
use rmt_lab::theory::{density_f, mp_support};

fn main() -> rmt_lab::Result<()> {
    let (n, m) = (300, 600);
    let spec = spectrum_of(&build_data_matrix(&gaussian_baseline(n, m, 1))?)?;
    let eigs = eigenvalues_w(&spec);
    let support = mp_support(m as f64 / n as f64)?;
    println!("support {:?}, atom {:.4}", support.intervals, support.atom_at_zero_mass);
    println!("lambda_max {:.4}, zeros {}", spec.lambda_max(), eigs.iter().filter(|&&l| l == 0.0).count());

    let width = 0.25;
    let mut x = 0.0;
    while x < 2.5 {
        let count = eigs.iter().filter(|&&l| l >= x && l < x + width).count();
        let hist = count as f64 / (eigs.len() as f64 * width);
        let limit = density_f(x + 0.5 * width, 2.0, 1e-9)?;
        println!("[{x:.2}, {:.2})  empirical {hist:.4}  limit {limit:.4}", x + width);
        x += width;
    }
    Ok(())
}
