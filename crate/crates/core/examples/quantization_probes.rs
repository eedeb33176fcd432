//! Anti-Wick quantization: composition, Egorov and micro-locality residuals.
use ruelle::quantize::{microlocality_probe, standard_probes, FlowModel, WeightedSpace};
use ruelle::wavepackets::{Bargmann, PhaseGrid, TorusGrid};
use ruelle::{MetricParams, PhasePoint};
use std::f64::consts::TAU;

fn main() -> ruelle::Result<()> {
    let p = MetricParams::new(0.5, 0.5, 0.5)?;
    let g = TorusGrid::cube(1, 128, TAU)?;
    let b = Bargmann::new(PhaseGrid::new(&g, 64, 2, 24.0)?, &p)?;
    for r in standard_probes(&b, &WeightedSpace::bracket_omega(1.0), 8)? {
        println!("{:<22} {:<60} {:.2e} <= {:.2e}: {}", r.probe, r.params.to_string(), r.residual, r.bound, r.pass);
    }
    let fine = TorusGrid::cube(1, 256, TAU)?;
    let rho = PhasePoint::new(vec![], 1.0, vec![], 8.0)?;
    let ds: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
    let m = microlocality_probe(&fine, &p, &rho, 0.7, &FlowModel::CircleRotation, &ds, 5.0)?;
    println!("micro-locality: decay exponent N = {:.2}, on/off-graph ratio at distance 5 = {:.0}", m.n_fit, m.ratio);
    Ok(())
}
