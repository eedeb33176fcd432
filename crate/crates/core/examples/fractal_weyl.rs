//! Box counting for a Hölder one-form: the optimal box shape and exponent.
use ruelle::fractal_count::{alpha_grid, optimal_alpha, synth_holder};
use ruelle::numerics::dyadic;

fn main() -> ruelle::Result<()> {
    for beta0 in [0.5, 0.8, 1.0] {
        let form = synth_holder(beta0, 0, 1)?;
        let opt = optimal_alpha(&form, &dyadic(6, 14), &alpha_grid(0.5, 0.95, 0.025))?;
        println!(
            "beta0 = {beta0}: alpha* = {:.3}, E* = {:.3}, predicted 1/(1+beta0) = {:.3}",
            opt.alpha_star,
            opt.exponent_star,
            1.0 / (1.0 + beta0)
        );
    }
    Ok(())
}
