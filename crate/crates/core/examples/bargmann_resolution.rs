//! Wave packets and the resolution of identity B*B = Id on a 2-torus.
use ruelle::wavepackets::{band_limited_random, resolution_residual, Bargmann, PhaseGrid, TorusGrid};
use ruelle::MetricParams;
use std::f64::consts::TAU;

fn main() -> ruelle::Result<()> {
    let p = MetricParams::new(0.5, 0.5, 0.0)?;
    let g = TorusGrid::cube(2, 128, TAU)?;
    let u = band_limited_random(&g, 4, 3)?;
    for refine in [1, 2, 4] {
        let b = Bargmann::new(PhaseGrid::new(&g, 64, refine, 14.0)?, &p)?;
        println!("refine {refine}: {} phase points, ||B*Bu - u||/||u|| = {:.3e}", b.phase.len(), resolution_residual(&b, &u)?);
    }
    Ok(())
}
