//! Box counting for the fractal Weyl heuristic.
//!
//! The trapped set of a flow whose Anosov one-form is `varpi(x) dx + dz` is,
//! at frequency `omega`, the graph `xi = omega varpi(x)`. Covering it with
//! symplectic boxes of size `omega^{-alpha} x omega^{alpha}` needs about
//! `omega^{n max(alpha, 1 - beta0 alpha)}` boxes when `varpi` is
//! `beta0`-Hölder, which is smallest at `alpha = 1/(1 + beta0)`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bracket_metric::{g_dist, jbracket, MetricParams, PhasePoint};
use crate::error::{Error, Result};
use crate::numerics::{ols, seeded_rng};

/// Weierstrass-type one-form `varpi_i(x) = sum_k a^{-beta0 k} cos(a^k x_i + phase_{i,k})`.
#[derive(Debug, Clone, Serialize)]
pub struct HolderForm {
    pub beta0: f64,
    pub seed: u64,
    pub base_freq: u32,
    pub n_terms: usize,
    pub n: usize,
    phases: Vec<Vec<f64>>,
}

/// Terms needed to reach scales far below the finest box used in sweeps.
fn default_terms(a: u32) -> usize {
    (26.0 / (a as f64).log2()).ceil() as usize
}

/// Default form: base frequency 3; a three-term series when `beta0 = 1`.
pub fn synth_holder(beta0: f64, seed: u64, n: usize) -> Result<HolderForm> {
    let terms = if beta0 >= 1.0 { 3 } else { default_terms(3) };
    HolderForm::new(beta0, seed, 3, terms, n)
}

impl HolderForm {
    /// Phases of the `k = 0` terms are zero; the rest are drawn from `seed`.
    pub fn new(beta0: f64, seed: u64, base_freq: u32, n_terms: usize, n: usize) -> Result<Self> {
        if !(beta0 > 0.0 && beta0 <= 1.0) {
            return Err(Error::InvalidParams(format!("beta0 must lie in (0, 1], got {beta0}")));
        }
        if base_freq < 2 || n_terms == 0 || n == 0 {
            return Err(Error::InvalidParams("need base_freq >= 2, n_terms >= 1, n >= 1".into()));
        }
        let mut rng = seeded_rng(seed);
        let phases = (0..n)
            .map(|_| {
                (0..n_terms)
                    .map(|k| if k == 0 { 0.0 } else { rng.random_range(0.0..std::f64::consts::TAU) })
                    .collect()
            })
            .collect();
        Ok(Self { beta0, seed, base_freq, n_terms, n, phases })
    }

    pub fn component(&self, i: usize, x: f64) -> f64 {
        let a = self.base_freq as f64;
        let mut freq = 1.0;
        let mut amp = 1.0;
        let decay = a.powf(-self.beta0);
        let mut s = 0.0;
        for k in 0..self.n_terms {
            s += amp * (freq * x + self.phases[i][k]).cos();
            freq *= a;
            amp *= decay;
        }
        s
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.component(i, x[i])).collect()
    }

    /// `sum_k a^{-beta0 k}`, an upper bound for every component.
    pub fn sup_bound(&self) -> f64 {
        let q = (self.base_freq as f64).powf(-self.beta0);
        (0..self.n_terms).map(|k| q.powi(k as i32)).sum()
    }

    /// Wavelength of the finest term.
    pub fn finest_scale(&self) -> f64 {
        std::f64::consts::TAU * (self.base_freq as f64).powi(-(self.n_terms as i32 - 1))
    }
}

const SAMPLES_PER_AXIS: usize = 16;

/// Number of symplectic boxes of side `omega^{-alpha}` (base) by `omega^alpha`
/// (fiber) covering the graph of `omega varpi` over `[0, 1)^n`.
pub fn box_count(form: &HolderForm, omega: f64, alpha: f64) -> Result<u64> {
    if omega < 4.0 || !(0.5..1.0).contains(&alpha) {
        return Err(Error::InvalidParams(format!("need omega >= 4 and alpha in [1/2, 1), got {omega}, {alpha}")));
    }
    let side = omega.powf(-alpha);
    if form.beta0 < 1.0 && side < form.finest_scale() {
        return Err(Error::Resolution(format!(
            "cell side {side:e} below the form's finest scale {:e}",
            form.finest_scale()
        )));
    }
    let height = omega.powf(alpha);
    let per_axis = (1.0 / side).ceil() as usize;
    let n = form.n;
    let cells = per_axis.pow(n as u32);
    let count: u64 = (0..cells)
        .into_par_iter()
        .map(|cell| {
            let mut idx = vec![0usize; n];
            let mut rem = cell;
            for d in idx.iter_mut() {
                *d = rem % per_axis;
                rem /= per_axis;
            }
            let mut boxes = 1u64;
            for (i, &ci) in idx.iter().enumerate() {
                let lo = ci as f64 * side;
                let hi = ((ci + 1) as f64 * side).min(1.0);
                // components are separable, so the per-axis range only needs 1-D samples
                let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
                for s in 0..SAMPLES_PER_AXIS {
                    let x = lo + (hi - lo) * (s as f64 + 0.5) / SAMPLES_PER_AXIS as f64;
                    let v = omega * form.component(i, x);
                    mn = mn.min(v);
                    mx = mx.max(v);
                }
                boxes *= ((mx - mn).max(height) / height).ceil() as u64;
            }
            boxes
        })
        .sum();
    Ok(count.max(1))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxCoverReport {
    pub omega: f64,
    pub alpha: f64,
    pub box_count: u64,
    pub e_alpha_fit: f64,
}

/// Slope `E(alpha)` of `log N(omega)` against `log omega`.
pub fn exponent_fit(form: &HolderForm, omegas: &[f64], alpha: f64) -> Result<(f64, Vec<u64>)> {
    let counts: Vec<u64> = omegas.iter().map(|&w| box_count(form, w, alpha)).collect::<Result<_>>()?;
    let lx: Vec<f64> = omegas.iter().map(|w| w.ln()).collect();
    let ly: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    Ok((ols(&lx, &ly)?.0, counts))
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalAlpha {
    pub alpha_star: f64,
    pub exponent_star: f64,
    /// `(alpha, E(alpha))` along the grid.
    pub curve: Vec<(f64, f64)>,
    pub reports: Vec<BoxCoverReport>,
}

/// Minimizes the fitted exponent over `alpha_grid`.
pub fn optimal_alpha(form: &HolderForm, omegas: &[f64], alpha_grid: &[f64]) -> Result<OptimalAlpha> {
    if omegas.len() < 6 {
        return Err(Error::DegenerateFit(format!("{} omega values, need at least 6", omegas.len())));
    }
    let fits: Vec<(f64, f64, Vec<u64>)> = alpha_grid
        .par_iter()
        .map(|&a| exponent_fit(form, omegas, a).map(|(e, c)| (a, e, c)))
        .collect::<Result<_>>()?;
    let (alpha_star, exponent_star) = fits
        .iter()
        .map(|(a, e, _)| (*a, *e))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or_else(|| Error::DegenerateFit("empty alpha grid".into()))?;
    let mut reports = Vec::new();
    for (a, e, counts) in &fits {
        for (w, c) in omegas.iter().zip(counts) {
            reports.push(BoxCoverReport { omega: *w, alpha: *a, box_count: *c, e_alpha_fit: *e });
        }
    }
    Ok(OptimalAlpha {
        alpha_star,
        exponent_star,
        curve: fits.iter().map(|(a, e, _)| (*a, *e)).collect(),
        reports,
    })
}

/// Slopes of `E(alpha)` on each side of `alpha_star`, fitted on points at
/// least `band` away from it. `None` when a side has fewer than 3 points.
pub fn regime_slopes(curve: &[(f64, f64)], alpha_star: f64, band: f64) -> (Option<f64>, Option<f64>) {
    let fit = |pts: Vec<(f64, f64)>| {
        if pts.len() < 3 {
            return None;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        ols(&xs, &ys).ok().map(|(s, _)| s)
    };
    let below = curve.iter().copied().filter(|(a, _)| *a <= alpha_star - band + 1e-9).collect();
    let above = curve.iter().copied().filter(|(a, _)| *a >= alpha_star + band - 1e-9).collect();
    (fit(below), fit(above))
}

/// `alpha` grid `[lo, hi]` with step `step`.
pub fn alpha_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

/// The shear `(x, z, xi, omega) -> (x, z, xi - omega varpi(x), omega)`.
pub fn straighten_phi(form: &HolderForm, rho: &PhasePoint) -> Result<PhasePoint> {
    shear(form, rho, -1.0)
}

pub fn straighten_phi_inverse(form: &HolderForm, rho: &PhasePoint) -> Result<PhasePoint> {
    shear(form, rho, 1.0)
}

fn shear(form: &HolderForm, rho: &PhasePoint, sign: f64) -> Result<PhasePoint> {
    if rho.n() != form.n {
        return Err(Error::Dimension { expected: form.n, got: rho.n() });
    }
    let w = form.eval(&rho.x);
    let xi = rho.xi.iter().zip(&w).map(|(a, b)| a + sign * rho.omega * b).collect();
    Ok(PhasePoint { x: rho.x.clone(), z: rho.z, xi, omega: rho.omega })
}

/// One sampled pair of the Lipschitz test.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzSample {
    pub omega: f64,
    /// `<||Phi(rho') - Phi(rho)||_{g_Phi(rho)}> / <||rho' - rho||_{g_rho}>`
    pub ratio: f64,
}

/// Pairs near the graph `xi = omega varpi(x)` with `|omega|` log-uniform in
/// `[1, 2^log2_omega_max]` and `g_rho` displacements log-uniform in `[1e-2, 1e2]`.
pub fn lipschitz_samples(form: &HolderForm, p: &MetricParams, count: usize, log2_omega_max: f64, seed: u64) -> Result<Vec<LipschitzSample>> {
    let mut rng = seeded_rng(seed);
    let n = form.n;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let omega = 2f64.powf(rng.random_range(0.0..log2_omega_max)) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let w = form.eval(&x);
        let spread = omega.abs().powf(p.alpha_perp);
        let xi: Vec<f64> = w.iter().map(|v| omega * v + spread * rng.random_range(-1.0..1.0)).collect();
        let rho = PhasePoint { x, z: rng.random::<f64>(), xi, omega };
        let dist = 10f64.powf(rng.random_range(-2.0..2.0));
        let dir: Vec<f64> = (0..2 * n + 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let unit = crate::bracket_metric::g_norm(&rho, &dir, p)?;
        let step: Vec<f64> = dir.iter().map(|d| d * dist / unit).collect();
        let rho2 = rho.offset(&step)?;
        let a = straighten_phi(form, &rho)?;
        let b = straighten_phi(form, &rho2)?;
        let ratio = jbracket(g_dist(&a, &b, p)?) / jbracket(dist);
        out.push(LipschitzSample { omega, ratio });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub alpha_perp: f64,
    pub c_varpi: f64,
    pub max_ratio: f64,
    pub violations: usize,
    /// Largest `|omega|` among violating samples.
    pub max_violating_omega: f64,
}

pub fn lipschitz_unit_scale_test(form: &HolderForm, p: &MetricParams, c_varpi: f64, count: usize, log2_omega_max: f64, seed: u64) -> Result<LipschitzReport> {
    let samples = lipschitz_samples(form, p, count, log2_omega_max, seed)?;
    let bad: Vec<&LipschitzSample> = samples.iter().filter(|s| s.ratio > c_varpi).collect();
    Ok(LipschitzReport {
        alpha_perp: p.alpha_perp,
        c_varpi,
        max_ratio: samples.iter().map(|s| s.ratio).fold(0.0, f64::max),
        violations: bad.len(),
        max_violating_omega: bad.iter().map(|s| s.omega.abs()).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_term_is_cosine() {
        let f = HolderForm::new(1.0, 7, 3, 1, 1).unwrap();
        for x in [0.0, 0.1, 0.5, 0.99] {
            assert!((f.eval(&[x])[0] - x.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn bounded_by_geometric_sum() {
        let f = synth_holder(0.5, 1, 2).unwrap();
        let b = f.sup_bound();
        assert!((b - (1.0 - 3f64.powf(-0.5 * 17.0)) / (1.0 - 3f64.powf(-0.5))).abs() < 1e-12);
        for k in 0..1000 {
            let x = k as f64 / 1000.0;
            assert!(f.eval(&[x, 1.0 - x]).iter().all(|v| v.abs() <= b));
        }
    }

    #[test]
    fn shear_roundtrip() {
        let f = synth_holder(0.5, 3, 1).unwrap();
        let rho = PhasePoint::new(vec![0.3], 0.1, vec![2.0], 123.0).unwrap();
        let back = straighten_phi_inverse(&f, &straighten_phi(&f, &rho).unwrap()).unwrap();
        assert!((back.xi[0] - 2.0).abs() < 1e-12);
        let zero = PhasePoint::new(vec![0.3], 0.1, vec![2.0], 0.0).unwrap();
        assert_eq!(straighten_phi(&f, &zero).unwrap(), zero);
        let on_graph = PhasePoint::new(vec![0.3], 0.0, vec![123.0 * f.eval(&[0.3])[0]], 123.0).unwrap();
        assert!(straighten_phi(&f, &on_graph).unwrap().xi[0].abs() < 1e-12);
    }

    #[test]
    fn box_count_rejects_bad_input() {
        let f = synth_holder(0.5, 1, 1).unwrap();
        assert!(box_count(&f, 2.0, 0.6).is_err());
        assert!(box_count(&f, 64.0, 1.0).is_err());
        assert!(box_count(&f, 64.0, 0.6).unwrap() >= 1);
    }
}
