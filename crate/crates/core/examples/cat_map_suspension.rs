//! Ruelle spectrum of the suspended cat map, with per-orbit norm certificates.
use ruelle::escape::EscapeConfig;
use ruelle::suspension::{full_spectrum, MappingTorus};
use ruelle::MetricParams;

fn main() -> ruelle::Result<()> {
    let torus = MappingTorus::default();
    let p = MetricParams::new(1.0, 0.5, 0.0)?;
    let spec = full_spectrum(&torus, 5, 20, &EscapeConfig::symmetric(8.0, 0.0), &p, (-3f64).exp())?;
    for z in &spec.points {
        println!("z = {:+.3e} {:+.6}i  ({})", z.re, z.im, z.sector);
    }
    let worst = spec.certificates.iter().map(|c| c.norm_bound).fold(0.0, f64::max);
    println!("{} orbit sectors certified, largest norm bound {worst:.3e}", spec.certificates.len());
    Ok(())
}
