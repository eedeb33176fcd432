use num_complex::Complex64;
use ruelle::numerics::loglog_slope;
use ruelle::quantize::{sobolev_norm, WeightedSpace};
use ruelle::wavepackets::{Bargmann, GridFunction, PhaseGrid, TorusGrid};
use ruelle::{jbracket, MetricParams};
use std::f64::consts::TAU;

// A unit plane wave e^{i w0 z} has Bargmann transform concentrated on a
// Gaussian of width 1/delta_par around omega = w0, so its H_W norm for
// W = <omega>^r is <w0>^r up to a relative error O(1/w0).
#[test]
fn plane_wave_norm_grows_like_bracket_power() {
    let p = MetricParams::new(0.5, 0.5, 0.5).unwrap();
    let g = TorusGrid::cube(1, 1024, TAU).unwrap();
    let b = Bargmann::new(PhaseGrid::new(&g, 256, 1, 330.0).unwrap(), &p).unwrap();
    let omegas = [64.0, 128.0, 256.0];
    for r in [0.0, 1.0, 2.0] {
        let sp = WeightedSpace::bracket_omega(r);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &w0 in &omegas {
            let u = GridFunction::from_fn(&g, |y| Complex64::from_polar(1.0 / TAU.sqrt(), w0 * y[0]));
            let norm = sobolev_norm(&b, &u, &sp).unwrap();
            let rel = norm / jbracket(w0).powf(r) - 1.0;
            assert!(rel.abs() < 0.1, "r={r} w0={w0}: ratio off by {rel:.3}");
            xs.push(jbracket(w0));
            ys.push(norm);
        }
        let slope = loglog_slope(&xs, &ys).unwrap();
        assert!((slope - r).abs() <= 0.05, "r={r}: slope {slope:.4}");
    }
}
