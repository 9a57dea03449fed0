//! Integrals against the limit law and the mean process through the
//! almost-analytic extension of a smooth bump.

use rmt_lab::theory::hs::{hs_functional, HsSettings, PolyBump, TestFunction};
use rmt_lab::theory::{integrate_against_limit, TheoryParams};

fn main() -> rmt_lab::Result<()> {
    let bump = PolyBump::on_interval(0.2, 1.4, 10)?;
    let params = TheoryParams::gaussian(1.0, 0.0)?;
    let limit = integrate_against_limit(|x| bump.derivative(0, x), 1.0)?;
    println!("int f dF = {limit:.8}");
    for order in [3, 5, 7] {
        let s = HsSettings {
            order,
            ..HsSettings::default()
        };
        println!("K = {order}: int f dM = {:.8}", hs_functional(&bump, &params, &s)?);
    }
    Ok(())
}
