//! The anisotropic metric g and the Japanese-bracket inequalities.
use ruelle::bracket_metric::{distortion, fuzz_inequality, g_dist, BracketInequality};
use ruelle::{MetricParams, PhasePoint};

fn main() -> ruelle::Result<()> {
    let p = MetricParams::new(1.0, 0.5, 0.25)?;
    for k in [0, 4, 8, 12] {
        let eta = 2f64.powi(k);
        let rho = PhasePoint::new(vec![0.0], 0.0, vec![eta], 0.0)?;
        let step = PhasePoint::new(vec![0.01], 0.0, vec![eta + 1.0], 0.0)?;
        println!(
            "|eta| = {eta:>6}: delta_perp {:.4}, delta_par {:.4}, Delta {:.2e}, g-distance of a fixed step {:.3}",
            p.delta_perp(eta),
            p.delta_par(eta),
            distortion(&rho, &p),
            g_dist(&rho, &step, &p)?
        );
    }
    for ineq in BracketInequality::suite() {
        println!("{:<24} violations in 1e5 samples: {}", ineq.name(), fuzz_inequality(ineq, 100_000, 1));
    }
    Ok(())
}
