//! Anti-Wick quantization `Op(a) = B^* a B` on a phase grid, weighted Sobolev
//! norms, and residual probes for composition, Egorov and micro-locality.
//!
//! Probes work on band-limited functions: every operator is sandwiched
//! between projections onto the Fourier modes `|k_i| <= band`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::bracket_metric::{g_dist, jbracket, MetricParams, PhasePoint};
use crate::error::{Error, Result};
use crate::numerics::{loglog_slope, seeded_rng, smooth_step};
use crate::wavepackets::{make_packet, Bargmann, GridFunction, PacketKind, TorusGrid};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub type SymbolFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;
pub type RealFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Certificate `|a(rho') - a(rho)| <= h(rho) <||rho' - rho||_{g_rho}>^{n0}`.
#[derive(Clone)]
pub struct SlowVariation {
    pub h: RealFn,
    pub n0: f64,
}

/// A symbol `a(y, eta)` with an optional slow-variation certificate.
#[derive(Clone)]
pub struct Symbol {
    pub name: String,
    eval: SymbolFn,
    pub slow: Option<SlowVariation>,
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Symbol({})", self.name)
    }
}

impl Symbol {
    pub fn new(name: &str, f: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), eval: Arc::new(f), slow: None }
    }

    /// Constant symbol, certified with `h = 0`.
    pub fn constant(c: Complex64) -> Self {
        Self::new("constant", move |_, _| c).with_certificate(|_, _| 0.0, 0.0)
    }

    pub fn with_certificate(mut self, h: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static, n0: f64) -> Self {
        self.slow = Some(SlowVariation { h: Arc::new(h), n0 });
        self
    }

    pub fn eval(&self, y: &[f64], eta: &[f64]) -> Complex64 {
        (self.eval)(y, eta)
    }

    pub fn eval_point(&self, rho: &PhasePoint) -> Complex64 {
        let (y, eta) = split(rho);
        self.eval(&y, &eta)
    }

    pub fn conj(&self) -> Self {
        let f = self.eval.clone();
        Self { name: format!("conj({})", self.name), eval: Arc::new(move |y, e| f(y, e).conj()), slow: self.slow.clone() }
    }

    pub fn product(a: &Symbol, b: &Symbol) -> Self {
        let (f, g) = (a.eval.clone(), b.eval.clone());
        Self::new(&format!("{}*{}", a.name, b.name), move |y, e| f(y, e) * g(y, e))
    }

    /// `a o phi~^t` for a translation flow `y -> y + t v`.
    pub fn pull_back(&self, flow: &FlowModel, t: f64) -> Self {
        let f = self.eval.clone();
        let v = flow.velocity();
        let mut out = Self::new(&format!("{}o flow({t})", self.name), move |y, e| {
            let moved: Vec<f64> = y.iter().zip(v.iter().cycle()).map(|(a, b)| a + t * b).collect();
            f(&moved, e)
        });
        out.slow = self.slow.clone();
        out
    }

    /// Sup of `|a h|` over the phase grid, the scale in the composition bound.
    pub fn sup_times(&self, h: &RealFn, b: &Bargmann) -> f64 {
        let base = &b.phase.base;
        let mut m: f64 = 0.0;
        for eta in b.phase.etas() {
            for j in 0..base.len() {
                let y = base.point(j);
                m = m.max(self.eval(&y, &eta).norm() * h(&y, &eta));
            }
        }
        m
    }

    pub fn sup(&self, b: &Bargmann) -> f64 {
        let one: RealFn = Arc::new(|_, _| 1.0);
        self.sup_times(&one, b)
    }
}

fn split(rho: &PhasePoint) -> (Vec<f64>, Vec<f64>) {
    let mut y = rho.x.clone();
    y.push(rho.z);
    let mut eta = rho.xi.clone();
    eta.push(rho.omega);
    (y, eta)
}

/// Samples random pairs and counts violations of the slow-variation certificate.
pub fn check_certificate(a: &Symbol, p: &MetricParams, n: usize, eta_max: f64, pairs: usize, seed: u64) -> Result<usize> {
    let slow = a.slow.as_ref().ok_or_else(|| Error::InvalidParams(format!("{} has no certificate", a.name)))?;
    let mut rng = seeded_rng(seed);
    let mut bad = 0;
    for _ in 0..pairs {
        let v: Vec<f64> = (0..2 * n + 2)
            .map(|i| if i <= n { rng.random_range(0.0..std::f64::consts::TAU) } else { rng.random_range(-eta_max..eta_max) })
            .collect();
        let rho = PhasePoint::from_slice(n, &v)?;
        let step: Vec<f64> = (0..2 * n + 2).map(|_| rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-2.0..1.0))).collect();
        let rho2 = rho.offset(&step)?;
        let (y, eta) = split(&rho);
        let lhs = (a.eval_point(&rho2) - a.eval_point(&rho)).norm();
        let rhs = (slow.h)(&y, &eta) * jbracket(g_dist(&rho, &rho2, p)?).powf(slow.n0);
        if lhs > rhs * (1.0 + 1e-12) + 1e-14 {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Weight `W` defining `||u||_W = ||W B u||`.
#[derive(Clone)]
pub struct WeightedSpace {
    pub weight: RealFn,
}

impl WeightedSpace {
    pub fn unit() -> Self {
        Self { weight: Arc::new(|_, _| 1.0) }
    }

    /// `W = <omega>^r`.
    pub fn bracket_omega(r: f64) -> Self {
        Self { weight: Arc::new(move |_, e| jbracket(e[e.len() - 1]).powf(r)) }
    }
}

pub fn op_apply(b: &Bargmann, a: &Symbol, u: &GridFunction) -> Result<GridFunction> {
    b.apply_symbol(u, |y, e| a.eval(y, e))
}

pub fn sobolev_norm(b: &Bargmann, u: &GridFunction, sp: &WeightedSpace) -> Result<f64> {
    Ok(b.weighted_norm_sq(u, |y, e| (sp.weight)(y, e))?.sqrt())
}

/// Projection onto Fourier modes `|k_i| <= band`.
pub fn band_project(u: &GridFunction, band: i64) -> GridFunction {
    let g = &u.grid;
    let mut hat = u.spectrum();
    for (k, h) in hat.iter_mut().enumerate() {
        if g.unravel(k).iter().enumerate().any(|(a, &i)| g.mode(a, i).abs() > band) {
            *h = ZERO;
        }
    }
    GridFunction::from_spectrum(g, &hat)
}

fn random_band(grid: &TorusGrid, band: i64, rng: &mut impl Rng) -> GridFunction {
    let mut hat = vec![ZERO; grid.len()];
    for (k, h) in hat.iter_mut().enumerate() {
        if grid.unravel(k).iter().enumerate().all(|(a, &i)| grid.mode(a, i).abs() <= band) {
            *h = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    GridFunction::from_spectrum(grid, &hat)
}

type Apply<'a> = dyn Fn(&GridFunction) -> Result<GridFunction> + 'a;

/// `L^2` operator norm of `P T P` by power iteration on `T^* T`.
pub fn power_norm(t: &Apply, t_adj: &Apply, grid: &TorusGrid, band: i64, steps: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded_rng(seed);
    let mut v = random_band(grid, band, &mut rng);
    let mut est = 0.0;
    for _ in 0..steps {
        let nv = v.norm();
        if nv == 0.0 {
            return Ok(0.0);
        }
        v = v.scale(Complex64::new(1.0 / nv, 0.0));
        let tv = band_project(&t(&v)?, band);
        est = tv.norm();
        v = band_project(&t_adj(&tv)?, band);
    }
    Ok(est)
}

/// Conjugate gradients for a Hermitian positive operator restricted to the band.
pub fn cg_solve(a: &Apply, rhs: &GridFunction, band: i64, tol: f64, max_iter: usize) -> Result<GridFunction> {
    let rhs = band_project(rhs, band);
    let mut x = GridFunction::zeros(&rhs.grid);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.inner(&r)?.re;
    // absolute floor: right-hand sides at roundoff level are solved by zero
    let target = (tol * rhs.norm()).max(1e-14);
    for _ in 0..max_iter {
        if rr.sqrt() <= target {
            break;
        }
        let ap = band_project(&a(&p)?, band);
        let alpha = rr / p.inner(&ap)?.re;
        x.data.iter_mut().zip(&p.data).for_each(|(xi, pi)| *xi += pi * alpha);
        r.data.iter_mut().zip(&ap.data).for_each(|(ri, ai)| *ri -= ai * alpha);
        let rr_new = r.inner(&r)?.re;
        let beta = rr_new / rr;
        p.data.iter_mut().zip(&r.data).for_each(|(pi, ri)| *pi = ri + *pi * beta);
        rr = rr_new;
    }
    if rr.sqrt() > 10.0 * target {
        return Err(Error::Resolution(format!("CG stalled at residual {:e}", rr.sqrt())));
    }
    Ok(x)
}

/// `H_W` operator norm of `P T P`: power iteration on `T^dagger T` with
/// `T^dagger = Op(W^2)^{-1} T^* Op(W^2)`.
pub fn weighted_power_norm(b: &Bargmann, sp: &WeightedSpace, t: &Apply, t_adj: &Apply, band: i64, steps: usize, seed: u64) -> Result<f64> {
    let w2 = |u: &GridFunction| b.apply_symbol(u, |y, e| Complex64::new((sp.weight)(y, e).powi(2), 0.0));
    let grid = &b.phase.grid;
    let mut rng = seeded_rng(seed);
    let mut v = random_band(grid, band, &mut rng);
    let mut est = 0.0;
    for _ in 0..steps {
        let nv = sobolev_norm(b, &v, sp)?;
        if nv == 0.0 {
            return Ok(0.0);
        }
        v = v.scale(Complex64::new(1.0 / nv, 0.0));
        let tv = band_project(&t(&v)?, band);
        est = sobolev_norm(b, &tv, sp)?;
        let g_tv = w2(&tv)?;
        let back = band_project(&t_adj(&g_tv)?, band);
        v = cg_solve(&w2, &back, band, 1e-10, 500)?;
    }
    Ok(est)
}

/// Dense matrix of `P T P` in the orthonormal Fourier basis of the band.
pub fn dense_matrix(t: &Apply, grid: &TorusGrid, band: i64) -> Result<DMatrix<Complex64>> {
    let modes = band_modes(grid, band);
    let vol = grid.volume();
    let mut m = DMatrix::zeros(modes.len(), modes.len());
    for (c, &k) in modes.iter().enumerate() {
        let mut hat = vec![ZERO; grid.len()];
        hat[k] = Complex64::new(vol.sqrt(), 0.0);
        let e = GridFunction::from_spectrum(grid, &hat);
        let out = t(&e)?.spectrum();
        for (r, &k2) in modes.iter().enumerate() {
            m[(r, c)] = out[k2] / vol.sqrt();
        }
    }
    Ok(m)
}

fn band_modes(grid: &TorusGrid, band: i64) -> Vec<usize> {
    (0..grid.len())
        .filter(|&k| grid.unravel(k).iter().enumerate().all(|(a, &i)| grid.mode(a, i).abs() <= band))
        .collect()
}

pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().singular_values().max()
}

/// Translation flows with an explicit lift `(y, eta) -> (y + t v, eta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowModel {
    /// `z -> z + t` on the circle.
    CircleRotation,
    /// `y -> y + t v` on a torus.
    LinearTorus { velocity: Vec<f64> },
}

impl FlowModel {
    fn velocity(&self) -> Vec<f64> {
        match self {
            FlowModel::CircleRotation => vec![1.0],
            FlowModel::LinearTorus { velocity } => velocity.clone(),
        }
    }

    fn check(&self, grid: &TorusGrid) -> Result<Vec<f64>> {
        let v = self.velocity();
        if v.len() != grid.dim() {
            return Err(Error::Unsupported(format!("{self:?} on a {}-dimensional grid", grid.dim())));
        }
        Ok(v)
    }

    /// `e^{-tX} u = u o phi^{-t}` by spectral interpolation.
    pub fn transfer(&self, u: &GridFunction, t: f64) -> Result<GridFunction> {
        let v = self.check(&u.grid)?;
        let g = &u.grid;
        let hat: Vec<Complex64> = u
            .spectrum()
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let ph: f64 = g.kappa(k).iter().zip(&v).map(|(a, b)| a * b).sum();
                h * Complex64::from_polar(1.0, -ph * t)
            })
            .collect();
        Ok(GridFunction::from_spectrum(g, &hat))
    }

    /// Lifted flow on phase space.
    pub fn lift(&self, rho: &PhasePoint, t: f64) -> Result<PhasePoint> {
        let v = self.velocity();
        if v.len() != rho.n() + 1 {
            return Err(Error::Dimension { expected: v.len() - 1, got: rho.n() });
        }
        let mut out = rho.clone();
        for (x, dv) in out.x.iter_mut().zip(&v) {
            *x += t * dv;
        }
        out.z += t * v[rho.n()];
        Ok(out)
    }
}

/// JSON record of one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub params: serde_json::Value,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
}

impl ProbeReport {
    pub fn new(probe: &str, params: serde_json::Value, residual: f64, bound: f64) -> Self {
        Self { probe: probe.into(), params, residual, bound, pass: residual <= bound }
    }
}

/// `||Op(a) Op(b) - Op(ab)||_{H_W}` against `c_frozen ||a h||_inf + floor`.
pub fn composition_residual(bg: &Bargmann, sp: &WeightedSpace, a: &Symbol, b: &Symbol, band: i64, c_frozen: f64, floor: f64) -> Result<ProbeReport> {
    let slow = b.slow.as_ref().ok_or_else(|| Error::InvalidParams(format!("{} lacks a slow-variation certificate", b.name)))?;
    let ab = Symbol::product(a, b);
    let (ac, bc, abc) = (a.conj(), b.conj(), ab.conj());
    let t = |u: &GridFunction| -> Result<GridFunction> {
        let lhs = op_apply(bg, a, &band_project(&op_apply(bg, b, u)?, band))?;
        lhs.sub(&op_apply(bg, &ab, u)?)
    };
    let t_adj = |u: &GridFunction| -> Result<GridFunction> {
        let lhs = op_apply(bg, &bc, &band_project(&op_apply(bg, &ac, u)?, band))?;
        lhs.sub(&op_apply(bg, &abc, u)?)
    };
    let residual = weighted_power_norm(bg, sp, &t, &t_adj, band, 50, 11)?;
    let bound = c_frozen * a.sup_times(&slow.h, bg) + floor;
    Ok(ProbeReport::new(
        "composition",
        serde_json::json!({"a": a.name, "b": b.name, "c": c_frozen, "floor": floor}),
        residual,
        bound,
    ))
}

/// `||e^{-tX} Op(a o phi~^t) - Op(a) e^{-tX}||_{H_W}` against
/// `c_frozen ||(W o phi~^t / W) h||_inf + floor`.
pub fn egorov_residual(bg: &Bargmann, sp: &WeightedSpace, a: &Symbol, t: f64, flow: &FlowModel, band: i64, c_frozen: f64, floor: f64) -> Result<ProbeReport> {
    flow.check(&bg.phase.grid)?;
    let slow = a.slow.as_ref().ok_or_else(|| Error::InvalidParams(format!("{} lacks a slow-variation certificate", a.name)))?;
    let moved = a.pull_back(flow, t);
    let (ac, mc) = (a.conj(), moved.conj());
    let op = |u: &GridFunction| -> Result<GridFunction> {
        let lhs = flow.transfer(&op_apply(bg, &moved, u)?, t)?;
        lhs.sub(&op_apply(bg, a, &flow.transfer(u, t)?)?)
    };
    let op_adj = |u: &GridFunction| -> Result<GridFunction> {
        let lhs = op_apply(bg, &mc, &flow.transfer(u, -t)?)?;
        lhs.sub(&flow.transfer(&op_apply(bg, &ac, u)?, -t)?)
    };
    let residual = weighted_power_norm(bg, sp, &op, &op_adj, band, 50, 13)?;
    // translation flows leave eta fixed, so W o phi~^t / W = 1 for weights of eta alone
    let v = flow.velocity();
    let ratio_h: RealFn = {
        let w = sp.weight.clone();
        let h = slow.h.clone();
        Arc::new(move |y: &[f64], e: &[f64]| {
            let moved: Vec<f64> = y.iter().zip(v.iter().cycle()).map(|(a, b)| a + t * b).collect();
            w(&moved, e) / w(y, e) * h(y, e)
        })
    };
    let one = Symbol::constant(ONE);
    let bound = c_frozen * one.sup_times(&ratio_h, bg) + floor;
    Ok(ProbeReport::new(
        "egorov",
        serde_json::json!({"a": a.name, "t": t, "flow": flow, "c": c_frozen, "floor": floor}),
        residual,
        bound,
    ))
}

/// Frozen constant and resolution floor of the standard probe suite.
pub const PROBE_C: f64 = 1.0;
pub const PROBE_FLOOR: f64 = 1e-3;

/// Gaussian bump in `omega`, certified with `h = 0.61 / (sigma delta_par)`.
pub fn omega_bump(center: f64, sigma: f64, p: &MetricParams) -> Symbol {
    let p = *p;
    Symbol::new(&format!("bump({center},{sigma})"), move |_, e| {
        let w = e[e.len() - 1];
        Complex64::new((-(w - center).powi(2) / (2.0 * sigma * sigma)).exp(), 0.0)
    })
    .with_certificate(move |_, e| 0.61 / (sigma * p.delta_par(e[e.len() - 1].abs())), 1.0)
}

/// Smooth indicator of `|omega| <= radius`, falling to 0 over `[radius, radius + width]`.
pub fn omega_indicator(radius: f64, width: f64) -> Symbol {
    Symbol::new(&format!("indicator({radius})"), move |_, e| {
        Complex64::new(1.0 - smooth_step((e[e.len() - 1].abs() - radius) / width), 0.0)
    })
}

/// Symbol equal to 1 on `|omega| <= edge` and falling to 0 over `[edge, edge + 2]`.
///
/// Certified with `h = <D>^{-2}`, `n0 = 2`, where `D = delta_par (edge - |omega|)`
/// is the `g`-distance to the start of the fall-off: `b` differs from 1 only at
/// points at least that far away, and `|b' - b| <= 1` everywhere.
pub fn omega_plateau(edge: f64, p: &MetricParams) -> Symbol {
    let p = *p;
    Symbol::new(&format!("plateau({edge:.2})"), move |_, e| {
        Complex64::new(1.0 - smooth_step((e[e.len() - 1].abs() - edge) / 2.0), 0.0)
    })
    .with_certificate(
        move |_, e| {
            let w = e[e.len() - 1].abs();
            let d = (edge - w).max(0.0) * p.delta_par(e.iter().map(|x| x * x).sum::<f64>().sqrt());
            jbracket(d).powi(-2)
        },
        2.0,
    )
}

/// The probe suite reported by `quantize-probes`: composition with a constant,
/// with a second bump, the plateau sweep `C in {2, 4, 8}` and Egorov for the
/// circle rotation.
pub fn standard_probes(bg: &Bargmann, sp: &WeightedSpace, band: i64) -> Result<Vec<ProbeReport>> {
    let p = bg.params;
    let a = omega_bump(2.0, 3.0, &p);
    let one = Symbol::constant(ONE);
    let mut out = vec![composition_residual(bg, sp, &a, &one, band, PROBE_C, PROBE_FLOOR)?];
    let b = omega_bump(-1.0, 4.0, &p);
    let mut bumps = composition_residual(bg, sp, &a, &b, band, PROBE_C, PROBE_FLOOR)?;
    out.push(bumps.clone());
    // the residual should sit an order of magnitude below ||Op(a)|| ||Op(b)||
    bumps.probe = "composition_vs_norms".into();
    bumps.bound = 0.1 * a.sup(bg) * b.sup(bg);
    bumps.pass = bumps.residual <= bumps.bound;
    out.push(bumps);

    let ball = omega_indicator(3.0, 1.0);
    let mut sweep = Vec::new();
    for c in [2.0, 4.0, 8.0] {
        // g-distance C beyond the support of the indicator, measured at its edge
        let edge = 4.0 + c / p.delta_par(4.0);
        let mut r = composition_residual(bg, sp, &ball, &omega_plateau(edge, &p), band, PROBE_C, PROBE_FLOOR)?;
        r.probe = "composition_plateau".into();
        r.params["C"] = serde_json::json!(c);
        sweep.push(r);
    }
    let growth = sweep.windows(2).map(|w| (w[1].residual - w[0].residual).max(0.0)).fold(0.0, f64::max);
    out.extend(sweep.iter().cloned());
    out.push(ProbeReport::new(
        "plateau_monotone",
        serde_json::json!({"C": [2.0, 4.0, 8.0]}),
        growth / sweep[0].residual,
        1e-6,
    ));

    for t in [0.0, 0.5, 1.0, 2.0] {
        out.push(egorov_residual(bg, sp, &a, t, &FlowModel::CircleRotation, band, PROBE_C, PROBE_FLOOR)?);
    }
    out.push(egorov_residual(bg, sp, &one, 1.0, &FlowModel::CircleRotation, band, PROBE_C, PROBE_FLOOR)?);
    Ok(out)
}

/// Writes probe reports as CSV with the parameters as an embedded JSON column.
pub fn write_probes_csv<W: std::io::Write>(out: &mut W, reports: &[ProbeReport]) -> Result<()> {
    writeln!(out, "probe,params,residual,bound,pass")?;
    for r in reports {
        let params = r.params.to_string().replace('"', "\"\"");
        writeln!(out, "{},\"{}\",{:e},{:e},{}", r.probe, params, r.residual, r.bound, r.pass)?;
    }
    Ok(())
}

/// One sample of the micro-locality probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroSample {
    pub distance: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrolocalityReport {
    /// Fitted decay exponent `N` over distances in `[fit_lo, fit_hi]`.
    pub n_fit: f64,
    /// `|<phi_rho', L^t phi_rho>|` at `rho' = phi~^t(rho)`.
    pub on_graph: f64,
    /// The same at `g`-distance `off_distance`, averaged over the two probe directions.
    pub off_graph: f64,
    pub off_distance: f64,
    pub ratio: f64,
    pub samples: Vec<MicroSample>,
}

/// `|<phi_rho', L^t phi_rho>|` for exact packets, with `rho'` displaced from
/// `phi~^t(rho)` by `g`-distances `distances` along `z` and along `omega`.
pub fn microlocality_probe(grid: &TorusGrid, p: &MetricParams, rho: &PhasePoint, t: f64, flow: &FlowModel, distances: &[f64], off_distance: f64) -> Result<MicrolocalityReport> {
    if distances.iter().all(|&d| d < 1.0) {
        return Err(Error::DegenerateFit("probe grid lies entirely within distance 1".into()));
    }
    let moved = flow.transfer(&make_packet(rho, PacketKind::Exact, p, grid)?.samples, t)?;
    let target = flow.lift(rho, t)?;
    let overlap = |r: &PhasePoint| -> Result<f64> {
        let pk = make_packet(r, PacketKind::Exact, p, grid)?;
        Ok(pk.samples.inner(&moved)?.norm())
    };
    let on_graph = overlap(&target)?;
    let n = rho.n();
    let displaced = |d: f64, along_omega: bool| -> Result<PhasePoint> {
        let mut step = vec![0.0; 2 * n + 2];
        let eta = target.eta_norm();
        if along_omega {
            step[2 * n + 1] = d / p.delta_par(eta);
        } else {
            step[n] = d * p.delta_par(eta);
        }
        let r = target.offset(&step)?;
        // distances are measured in the metric at the probe point
        let scale = d / g_dist(&r, &target, p)?.max(f64::MIN_POSITIVE);
        let mut fixed = step.clone();
        fixed.iter_mut().for_each(|s| *s *= scale);
        target.offset(&fixed)
    };
    let mut samples = Vec::new();
    for &d in distances {
        for along in [false, true] {
            let r = displaced(d, along)?;
            samples.push(MicroSample { distance: g_dist(&r, &target, p)?, magnitude: overlap(&r)? });
        }
    }
    let off_graph = 0.5 * (overlap(&displaced(off_distance, false)?)? + overlap(&displaced(off_distance, true)?)?);
    let fit: Vec<&MicroSample> = samples.iter().filter(|s| s.distance >= 3.0 && s.distance <= 10.0).collect();
    let xs: Vec<f64> = fit.iter().map(|s| jbracket(s.distance)).collect();
    let ys: Vec<f64> = fit.iter().map(|s| s.magnitude).collect();
    let n_fit = -loglog_slope(&xs, &ys)?;
    Ok(MicrolocalityReport { n_fit, on_graph, off_graph, off_distance, ratio: on_graph / off_graph, samples })
}

/// Largest `|<T u, v>_W - <u, T^dagger v>_W|` over random pairs, relative to
/// `||T u||_W ||v||_W`, with `T^dagger = G^{-1} T^* G` and `G = Op(W^2)`.
pub fn adjoint_identity_residual(bg: &Bargmann, sp: &WeightedSpace, t: &Apply, t_adj: &Apply, band: i64, pairs: usize, seed: u64) -> Result<f64> {
    let w2 = |u: &GridFunction| bg.apply_symbol(u, |y, e| Complex64::new((sp.weight)(y, e).powi(2), 0.0));
    let inner_w = |u: &GridFunction, v: &GridFunction| -> Result<Complex64> { u.inner(&band_project(&w2(v)?, band)) };
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let u = random_band(&bg.phase.grid, band, &mut rng);
        let v = random_band(&bg.phase.grid, band, &mut rng);
        let tu = band_project(&t(&u)?, band);
        let dag = cg_solve(&w2, &band_project(&t_adj(&band_project(&w2(&v)?, band))?, band), band, 1e-13, 1000)?;
        let lhs = inner_w(&tu, &v)?;
        let rhs = inner_w(&u, &dag)?;
        let scale = sobolev_norm(bg, &tu, sp)? * sobolev_norm(bg, &v, sp)?;
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok(worst)
}

/// `(trace of the dense matrix of Op(a) over all modes, sum_rho a(rho) ||phi_rho||^2 cell / (2 pi)^d)`.
pub fn trace_pair(bg: &Bargmann, a: &Symbol) -> Result<(Complex64, Complex64)> {
    let g = &bg.phase.grid;
    let full = g.shape.iter().map(|&s| s as i64 / 2).max().unwrap_or(0);
    let m = dense_matrix(&|u| op_apply(bg, a, u), g, full)?;
    let d = g.dim() as f64;
    let base = &bg.phase.base;
    let cell = bg.phase.cell() / std::f64::consts::TAU.powf(d);
    let mut sum = ZERO;
    for eta in bg.phase.etas() {
        let tr = bg.torus_packet_norm_sq(&eta);
        for j in 0..base.len() {
            sum += a.eval(&base.point(j), &eta) * tr * cell;
        }
    }
    Ok((m.trace(), sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavepackets::{band_limited_random, PhaseGrid};
    use std::f64::consts::TAU;

    fn setup() -> Bargmann {
        let p = MetricParams::new(0.5, 0.5, 0.5).unwrap();
        let g = TorusGrid::cube(1, 128, TAU).unwrap();
        Bargmann::new(PhaseGrid::new(&g, 64, 2, 24.0).unwrap(), &p).unwrap()
    }

    #[test]
    fn op_of_constants() {
        let b = setup();
        let u = band_limited_random(&b.phase.grid, 8, 2).unwrap();
        let one = op_apply(&b, &Symbol::constant(ONE), &u).unwrap();
        // the floor comes from Gauss-Hermite error in m across the kink of delta
        let floor = one.sub(&u).unwrap().norm();
        assert!(floor < 1e-3, "{floor}");
        let c = Complex64::new(0.3, -2.0);
        let oc = op_apply(&b, &Symbol::constant(c), &u).unwrap();
        assert!(oc.sub(&u.scale(c)).unwrap().norm() <= floor * c.norm() * (1.0 + 1e-9));
        assert!((sobolev_norm(&b, &u, &WeightedSpace::unit()).unwrap() - 1.0).abs() < 1e-3);
        assert_eq!(sobolev_norm(&b, &GridFunction::zeros(&b.phase.grid), &WeightedSpace::unit()).unwrap(), 0.0);
    }

    #[test]
    fn power_iteration_matches_dense() {
        let b = setup();
        let a = Symbol::new("bump", |_, e| Complex64::new((-(e[0] - 3.0).powi(2) / 8.0).exp(), 0.0));
        let t = |u: &GridFunction| op_apply(&b, &a, u);
        let est = power_norm(&t, &t, &b.phase.grid, 8, 50, 1).unwrap();
        let dense = spectral_norm(&dense_matrix(&t, &b.phase.grid, 8).unwrap());
        assert!((est - dense).abs() < 1e-3 * dense, "{est} {dense}");
        assert!(est <= a.sup(&b) + 1e-3);
    }

    #[test]
    fn cg_inverts_weight_operator() {
        let b = setup();
        let sp = WeightedSpace::bracket_omega(1.0);
        let w2 = |u: &GridFunction| b.apply_symbol(u, |y, e| Complex64::new((sp.weight)(y, e).powi(2), 0.0));
        let u = band_limited_random(&b.phase.grid, 8, 5).unwrap();
        let x = cg_solve(&w2, &u, 8, 1e-12, 500).unwrap();
        assert!(band_project(&w2(&x).unwrap(), 8).sub(&u).unwrap().norm() < 1e-9);
    }

    #[test]
    fn certificates_for_standard_symbols() {
        let p = MetricParams::new(0.5, 0.5, 0.5).unwrap();
        assert_eq!(check_certificate(&omega_bump(3.0, 2.0, &p), &p, 0, 20.0, 20000, 3).unwrap(), 0);
        assert_eq!(check_certificate(&omega_plateau(6.0, &p), &p, 0, 20.0, 20000, 4).unwrap(), 0);
        assert!(check_certificate(&Symbol::new("x", |_, _| ONE), &p, 0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn standard_probes_hold() {
        let b = setup();
        let reports = standard_probes(&b, &WeightedSpace::bracket_omega(1.0), 8).unwrap();
        assert_eq!(reports.len(), 12);
        for r in &reports {
            assert!(r.pass, "{} {} {:e} > {:e}", r.probe, r.params, r.residual, r.bound);
        }
        let mut csv = Vec::new();
        write_probes_csv(&mut csv, &reports).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("probe,params,residual,bound,pass\n"));
        assert_eq!(text.lines().count(), 13);
    }

    #[test]
    fn translation_transfer_is_exact() {
        let g = TorusGrid::cube(1, 64, TAU).unwrap();
        let u = GridFunction::from_fn(&g, |y| Complex64::from_polar(1.0, 3.0 * y[0]));
        let moved = FlowModel::CircleRotation.transfer(&u, 0.37).unwrap();
        let expect = GridFunction::from_fn(&g, |y| Complex64::from_polar(1.0, 3.0 * (y[0] - 0.37)));
        assert!(moved.sub(&expect).unwrap().sup() < 1e-12);
        assert!(FlowModel::LinearTorus { velocity: vec![1.0, 2.0] }.transfer(&u, 1.0).is_err());
    }
}
