//! Acceptance suite: one self-contained check per criterion.
//!
//! Every check returns a [`CriterionResult`] rather than panicking, so the
//! driver can print a complete pass/fail table even when some criteria fail.
//! Frozen constants below were fitted once on calibration runs (different
//! seeds or modes from the ones checked here) and are kept as regression values.

use crate::bracket_metric::{fuzz_inequality, BracketInequality, MetricParams, PhasePoint};
use crate::error::Result;
use crate::escape::{
    fitted_decay_rate, lower_bound_log_c, order_estimate, predicted_order, DirectionKind, DualCoords, DualSplitting,
    EscapeConfig, Variant,
};
use crate::fractal_count::{alpha_grid, lipschitz_unit_scale_test, optimal_alpha, regime_slopes, synth_holder};
use crate::numerics::{dyadic, loglog_slope};
use crate::quantize::{microlocality_probe, FlowModel};
use crate::shift_model::{Membership, ShiftModel};
use crate::suspension::{
    default_probes, full_spectrum, packet_overlap, wavefront_profile, weyl_count, weyl_density_exponent,
    zero_sector_spectrum, MappingTorus, WfProbe,
};
use crate::wavepackets::{band_limited_random, norm_defect_sweep, resolution_residual, Bargmann, PhaseGrid, TorusGrid};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::TAU;
use std::io::Write;
use std::time::Instant;

/// `defect <= C Delta` for the packet norm, fitted on `|eta| = 1` (max ratio 0.33).
pub const NORM_DEFECT_C: f64 = 0.4;
/// `max |B phi_k| <omega - omega0>^N W` for `k = 1`, times 1.25 and rounded up.
pub const WF_C2: f64 = 3.5e3;
pub const WF_C4: f64 = 2.0e4;
/// Unit-scale Lipschitz constant of the straightening map at `alpha_perp = 1/(1+beta0)`,
/// 1.25 times the largest ratio seen on the seed-1 calibration sample.
pub const LIPSCHITZ_C_VARPI: f64 = 2.75;

pub const CRITERIA: u8 = 11;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub summary: String,
    /// Per-case lines, including non-gating diagnostics.
    pub details: Vec<String>,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {} ({:.1} s): {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.seconds,
            self.summary
        )
    }
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "shift-model truth table",
        2 => "resolution of identity",
        3 => "packet norm defect",
        4 => "bracket inequality fuzzing",
        5 => "escape decay rate",
        6 => "order estimates",
        7 => "cat-map suspension",
        8 => "fractal Weyl exponent",
        9 => "micro-locality",
        10 => "wave-front profile",
        11 => "straightening Lipschitz test",
        _ => "unknown",
    }
}

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

/// Runs criterion `id`. Errors inside a check are reported as a failure.
pub fn run(id: u8) -> CriterionResult {
    let start = Instant::now();
    let out = match id {
        1 => shift_truth_table(),
        2 => resolution_of_identity(),
        3 => packet_norm_defect(),
        4 => inequality_fuzzing(),
        5 => escape_decay(),
        6 => order_estimates(),
        7 => suspension(),
        8 => fractal_weyl(),
        9 => microlocality(),
        10 => wavefront(),
        11 => lipschitz(),
        _ => Ok(Outcome { pass: false, summary: format!("no criterion {id}"), details: vec![] }),
    };
    let out = out.unwrap_or_else(|e| Outcome { pass: false, summary: format!("error: {e}"), details: vec![] });
    CriterionResult {
        id,
        title: title(id),
        pass: out.pass,
        summary: out.summary,
        details: out.details,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(ids: &[u8]) -> Vec<CriterionResult> {
    ids.iter().map(|&i| run(i)).collect()
}

pub fn write_report_csv<W: Write>(out: &mut W, results: &[CriterionResult]) -> Result<()> {
    // no timings here: the report must be reproducible byte for byte
    writeln!(out, "criterion,title,pass,summary")?;
    for r in results {
        writeln!(out, "{},{},{},\"{}\"", r.id, r.title, r.pass, r.summary.replace('"', "'"))?;
    }
    Ok(())
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn shift_truth_table() -> Result<Outcome> {
    let mods: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let (mut cases, mut wrong, mut degenerate) = (0, 0, 0);
    let (mut worst_eig, mut worst_inv): (f64, f64) = (0.0, 0.0);
    let mut details = Vec::new();
    for r in -2..=2 {
        let r = r as f64;
        let ess = (-r).exp();
        for &a in &mods {
            for &b in &mods {
                let m = ShiftModel::new(c(a), c(b), r, (-50, 50))?;
                worst_eig = worst_eig
                    .max(m.eigen_residual(&m.eigvec_u(c(1.0)), m.w0)?)
                    .max(m.eigen_residual(&m.eigvec_v(c(1.0)), m.w1)?);
                worst_inv = worst_inv.max(m.inverse_residual());
                if a == b {
                    // U and V are finitely supported: w0 = w1 is an eigenvalue for every r
                    degenerate += 1;
                    if m.membership_w0() != Membership::Member {
                        wrong += 1;
                    }
                    continue;
                }
                cases += 1;
                let w0_ok = (m.membership_w0() == Membership::Member) == (a > ess);
                let w1_ok = (m.membership_w1() == Membership::Member) == (b < ess);
                if !(w0_ok && w1_ok) {
                    wrong += 1;
                    details.push(format!("mismatch at r={r} |w0|={a} |w1|={b}"));
                }
            }
        }
    }
    let pass = wrong == 0 && worst_eig <= 1e-12 && worst_inv <= 1e-14;
    Ok(Outcome {
        pass,
        summary: format!(
            "{cases} cases + {degenerate} w0=w1, {wrong} mismatches; eigen residual {worst_eig:.1e} (<= 1e-12), inverse residual {worst_inv:.1e} (<= 1e-14)"
        ),
        details,
    })
}

fn resolution_of_identity() -> Result<Outcome> {
    let p = MetricParams::new(0.5, 0.5, 0.0)?;
    let g = TorusGrid::cube(2, 128, TAU)?;
    let u = band_limited_random(&g, 4, 3)?;
    let base = Bargmann::new(PhaseGrid::new(&g, 64, 1, 14.0)?, &p)?;
    let mut res = Vec::new();
    for refine in [1, 2, 4] {
        let b = base.with_phase(PhaseGrid::new(&g, 64, refine, 14.0)?)?;
        res.push(resolution_residual(&b, &u)?);
    }
    let decreasing = res.windows(2).all(|w| w[1] < w[0]);
    let pass = res.iter().all(|&r| r <= 1e-3) && decreasing;
    Ok(Outcome {
        pass,
        summary: format!("residuals {:.3e} / {:.3e} / {:.3e} at refinement 1/2/4 (<= 1e-3, decreasing)", res[0], res[1], res[2]),
        details: vec![],
    })
}

fn packet_norm_defect() -> Result<Outcome> {
    let p = MetricParams::new(1.0, 0.5, 0.0)?;
    let sweep = norm_defect_sweep(&p, 2, 0..=10);
    let mut details = Vec::new();
    let mut pass = true;
    let worst = sweep.iter().map(|s| s.1 / s.2).fold(0.0, f64::max);
    if worst > NORM_DEFECT_C {
        pass = false;
    }
    let mut slopes = Vec::new();
    for axis in ["xi", "omega"] {
        let (d, def): (Vec<f64>, Vec<f64>) = sweep.iter().filter(|s| s.3 == axis && s.1 > 0.0).map(|s| (s.2, s.1)).unzip();
        let slope = loglog_slope(&d, &def)?;
        slopes.push(slope);
        pass &= slope >= 0.9;
        details.push(format!("along {axis}: slope {slope:.3}"));
    }
    Ok(Outcome {
        pass,
        summary: format!(
            "max defect/Delta {worst:.3} (C = {NORM_DEFECT_C}); slopes {:.2} (xi), {:.2} (omega) (>= 0.9)",
            slopes[0], slopes[1]
        ),
        details,
    })
}

fn inequality_fuzzing() -> Result<Outcome> {
    let mut bad = Vec::new();
    let suite = BracketInequality::suite();
    for (i, ineq) in suite.iter().enumerate() {
        let v = fuzz_inequality(*ineq, 100_000, 1000 + i as u64);
        if v > 0 {
            bad.push(format!("{}: {v}", ineq.name()));
        }
    }
    Ok(Outcome {
        pass: bad.is_empty(),
        summary: format!("{} inequalities x 1e5 samples, violations: {}", suite.len(), if bad.is_empty() { "none".into() } else { bad.join(", ") }),
        details: bad,
    })
}

fn escape_grid() -> Vec<(f64, f64, f64)> {
    let mut v = Vec::new();
    for gamma in [0.0, 0.5] {
        for ap in [0.5, 0.67] {
            for r in [2.0, 8.0] {
                v.push((gamma, ap, r));
            }
        }
    }
    v
}

fn escape_decay() -> Result<Outcome> {
    let split = DualSplitting::cat_map();
    let mut details = Vec::new();
    let (mut rate_ok, mut bound_ok) = (true, true);
    let mut worst_rel: f64 = 0.0;
    let mut worst_growth: f64 = 0.0;
    for (gamma, ap, r) in escape_grid() {
        let p = MetricParams::new(1.0, ap, 0.0)?;
        let cfg = EscapeConfig::symmetric(r, gamma);
        let lam = cfg.decay_rate(&split, &p);
        for start in [DualCoords::new(1024.0, 0.0, 0.0), DualCoords::new(0.0, 1e6, 0.0)] {
            let fit = fitted_decay_rate(&start, 8.0, &split, &cfg, &p)?;
            let rel = (fit - lam).abs() / lam;
            worst_rel = worst_rel.max(rel);
            rate_ok &= rel <= 0.1;
        }
        // C fixed on |Xi| <= 2^8, then checked on wider samples
        let log_c = lower_bound_log_c(&split, &cfg, &p, 8.0, 2000, 1);
        let wide = lower_bound_log_c(&split, &cfg, &p, 24.0, 2000, 2);
        worst_growth = worst_growth.max(wide - log_c);
        bound_ok &= wide <= log_c + 1e-9;
        details.push(format!(
            "gamma={gamma} alpha_perp={ap} R={r}: Lambda {lam:.4}, lower-bound log C {log_c:.2} on 2^8 vs {wide:.2} on 2^24"
        ));
    }
    Ok(Outcome {
        pass: rate_ok && bound_ok,
        summary: format!(
            "decay fits within {:.1}% of Lambda (<= 10%); Lambda' lower bound {} (log C grows by {worst_growth:.1} from |Xi| <= 2^8 to 2^24)",
            100.0 * worst_rel,
            if bound_ok { "holds" } else { "violated" }
        ),
        details,
    })
}

fn order_estimates() -> Result<Outcome> {
    let split = DualSplitting::cat_map();
    let mut details = Vec::new();
    let mut worst: f64 = 0.0;
    let generic = DualCoords::new(1.0, 0.7, 0.3);
    let dirs = [
        ("E0", DirectionKind::Flow.representative(), DirectionKind::Flow),
        ("Eu", DirectionKind::Unstable.representative(), DirectionKind::Unstable),
        ("Es", DirectionKind::Stable.representative(), DirectionKind::Stable),
        ("diagonal", DirectionKind::Transverse.representative(), DirectionKind::Transverse),
        ("generic", generic, DirectionKind::Transverse),
    ];
    for gamma in [0.0, 0.5] {
        for ap in [0.5, 0.67] {
            let p = MetricParams::new(1.0, ap, 0.0)?;
            for r in [2.0, 8.0] {
                let cfg = EscapeConfig::symmetric(r, gamma);
                for (name, d, kind) in &dirs {
                    let err = (order_estimate(d, &split, &cfg, &p)? - predicted_order(*kind, &cfg, &p)).abs();
                    if r == 2.0 {
                        worst = worst.max(err);
                    } else {
                        details.push(format!("diagnostic gamma={gamma} alpha_perp={ap} R=8 {name}: error {err:.3}"));
                    }
                }
            }
        }
    }
    let p = MetricParams::new(1.0, 0.5, 0.0)?;
    let w2 = EscapeConfig::new(1.0, 1.0, 0.0, 0.0, 1.0, Variant::W2 { r: 1.0, t_avg: 4.0 })?;
    for kind in [DirectionKind::Flow, DirectionKind::Unstable, DirectionKind::Stable] {
        let err = (order_estimate(&kind.representative(), &split, &w2, &p)? - predicted_order(kind, &w2, &p)).abs();
        worst = worst.max(err);
    }
    Ok(Outcome {
        pass: worst <= 0.05,
        summary: format!("worst slope error {worst:.3} over R=2 grid and W2 (r=1) (<= 0.05); R=8 rows are diagnostics"),
        details,
    })
}

fn suspension() -> Result<Outcome> {
    let torus = MappingTorus::default();
    let p = MetricParams::new(1.0, 0.5, 0.0)?;
    let cfg = EscapeConfig::symmetric(8.0, 0.0);
    let spec = full_spectrum(&torus, 5, 20, &cfg, &p, (-3f64).exp());
    let (zero_err, certs) = match &spec {
        Ok(s) => {
            let err = s
                .points
                .iter()
                .zip(-5..=5)
                .map(|(pt, k)| (pt.z() - Complex64::new(0.0, TAU * k as f64)).norm())
                .fold(0.0, f64::max);
            (if s.points.len() == 11 { err } else { f64::INFINITY }, format!("{} certificates pass", s.certificates.len()))
        }
        Err(e) => (f64::INFINITY, format!("{e}")),
    };
    let wide = zero_sector_spectrum(&torus, 17)?;
    let max_count = (0..=100).map(|w| weyl_count(&wide, -1.0, w as f64)).max().unwrap_or(0);
    let exponent = weyl_density_exponent(&wide, -1.0, 100.0, 0.5)?;
    let pass = spec.is_ok() && zero_err <= 1e-10 && max_count <= 1 && exponent.abs() <= 0.05;
    Ok(Outcome {
        pass,
        summary: format!(
            "zero-sector error {zero_err:.1e} (<= 1e-10); {certs}; max window count {max_count} (<= 1); density exponent {exponent:.3} (0 +- 0.05)"
        ),
        details: vec![],
    })
}

fn fractal_weyl() -> Result<Outcome> {
    let omegas = dyadic(6, 14);
    let grid = alpha_grid(0.5, 0.95, 0.025);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut details = Vec::new();
    for beta0 in [0.5, 0.8, 1.0] {
        let form = synth_holder(beta0, 0, 1)?;
        let opt = optimal_alpha(&form, &omegas, &grid)?;
        let target = 1.0 / (1.0 + beta0);
        let (below, above) = regime_slopes(&opt.curve, opt.alpha_star, 0.1);
        pass &= (opt.alpha_star - target).abs() <= 0.05 && (opt.exponent_star - target).abs() <= 0.05;
        if let Some(s) = below {
            pass &= (s + beta0).abs() <= 0.07;
        }
        if let Some(s) = above {
            pass &= (s - 1.0).abs() <= 0.07;
        }
        let fmt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        parts.push(format!(
            "beta0={beta0}: alpha* {:.3}, E* {:.3} (target {target:.3}), slopes {} / {} (expect {:.1} / 1)",
            opt.alpha_star,
            opt.exponent_star,
            fmt(below),
            fmt(above),
            -beta0
        ));
        details.push(format!("beta0={beta0} curve {:?}", opt.curve));
    }
    Ok(Outcome { pass, summary: parts.join("; "), details })
}

fn microlocality() -> Result<Outcome> {
    let p = MetricParams::new(0.5, 0.5, 0.5)?;
    let g = TorusGrid::cube(1, 256, TAU)?;
    let rho = PhasePoint::new(vec![], 1.0, vec![], 8.0)?;
    let ds: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
    let rep = microlocality_probe(&g, &p, &rho, 0.7, &FlowModel::CircleRotation, &ds, 5.0)?;
    Ok(Outcome {
        pass: rep.n_fit >= 4.0 && rep.ratio >= 1e3,
        summary: format!("fitted N {:.2} (>= 4); on/off-graph ratio at distance 5: {:.0} (>= 1000)", rep.n_fit, rep.ratio),
        details: rep.samples.iter().map(|s| format!("d={:.2} |<phi', L phi>|={:.3e}", s.distance, s.magnitude)).collect(),
    })
}

fn wavefront() -> Result<Outcome> {
    let torus = MappingTorus::default();
    let p = MetricParams::new(1.0, 0.5, 0.0)?;
    let cfg = EscapeConfig::symmetric(8.0, 0.0);
    let offsets: Vec<f64> = (-12..=12).map(f64::from).collect();
    let (mut c2, mut c4): (f64, f64) = (0.0, 0.0);
    let mut worst_factor: f64 = 1.0;
    for k in 2..=5 {
        let w0 = TAU * k as f64;
        let probes = default_probes(&torus, w0, &offsets, &[0.0, 1.0, 4.0, 16.0, 64.0]);
        let recs = wavefront_profile(&torus, w0, &probes, &p, &cfg)?;
        c2 = c2.max(crate::suspension::wf_constant(&recs, w0, 2.0));
        c4 = c4.max(crate::suspension::wf_constant(&recs, w0, 4.0));
    }
    for k in 1..=5 {
        let w0 = TAU * k as f64;
        let at = |omega: f64| WfProbe { x: [0.3, 0.6], z: 0.25, xi: [0.0; 2], omega };
        let peak = packet_overlap(&at(w0), w0, &p, 512)?;
        let dpar = p.delta_par(w0);
        for d in [1.0, 2.0, 3.0] {
            let ratio = packet_overlap(&at(w0 + d / dpar), w0, &p, 512)? / peak;
            let q = ratio / (-d * d / 4.0f64).exp();
            worst_factor = worst_factor.max(q.max(1.0 / q));
        }
    }
    let pass = c2 <= WF_C2 && c4 <= WF_C4 && worst_factor <= 2.0;
    Ok(Outcome {
        pass,
        summary: format!(
            "k=2..5: max C_2 {c2:.0} (<= {WF_C2:.0}), max C_4 {c4:.0} (<= {WF_C4:.0}); overlap vs exp(-D^2/4) within factor {worst_factor:.3} (<= 2)"
        ),
        details: vec![],
    })
}

fn lipschitz() -> Result<Outcome> {
    let beta0 = 0.5;
    let form = synth_holder(beta0, 0, 1)?;
    let sharp = 1.0 / (1.0 + beta0);
    let at = |ap: f64| -> Result<_> {
        let p = MetricParams::new(1.0, ap, 0.0)?;
        lipschitz_unit_scale_test(&form, &p, LIPSCHITZ_C_VARPI, 10_000, 30.0, 2)
    };
    let good = at(sharp)?;
    let below = at(sharp - 0.1)?;
    let pass = good.violations == 0 && below.violations > 0 && below.max_violating_omega >= 2f64.powi(10);
    Ok(Outcome {
        pass,
        summary: format!(
            "alpha_perp={sharp:.3}: {} violations (max ratio {:.2}, C = {LIPSCHITZ_C_VARPI}); alpha_perp={:.3}: {} violations up to |omega| = {:.1e} (max ratio {:.1})",
            good.violations,
            good.max_ratio,
            sharp - 0.1,
            below.violations,
            below.max_violating_omega,
            below.max_ratio
        ),
        details: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn titles_cover_all_criteria() {
        for id in 1..=CRITERIA {
            assert_ne!(title(id), "unknown");
        }
        assert!(!run(0).pass);
    }

    #[test]
    fn fast_criteria_pass() {
        for id in [1, 4] {
            let r = run(id);
            assert!(r.pass, "{}", r.line());
        }
    }

    #[test]
    fn report_csv_has_header() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[run(0)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("criterion,title,pass,summary\n"));
    }
}
