//! Suspension of a hyperbolic toral automorphism with constant roof.
//!
//! `M = T^2 x R / (x, z) ~ (f x, z + 1)` with the flow `(x, z) -> (x, z + t)`.
//! A Fourier mode `e^{2 pi i nu.x}` is sent by the time-one transfer operator
//! to `e^{2 pi i (f^T nu).x}`, so every nonzero frequency lies on an infinite
//! `f^T`-orbit and the operator acts on each orbit as a shift. Only the zero
//! sector carries resonances: `z_k = i 2 pi k` with eigenfunctions
//! `e^{-i 2 pi k z}`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::{PI, SQRT_2, TAU};
use std::io::Write;

use crate::bracket_metric::{jbracket, MetricParams};
use crate::error::{Error, Result};
use crate::escape::{log_weight, DualSplitting, EscapeConfig};
use crate::numerics::ols;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Roof {
    Constant { tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingTorus {
    pub f: [[i64; 2]; 2],
    pub roof: Roof,
    pub potential: Complex64,
}

impl Default for MappingTorus {
    fn default() -> Self {
        Self::new([[2, 1], [1, 1]]).expect("cat map is hyperbolic")
    }
}

impl MappingTorus {
    pub fn new(f: [[i64; 2]; 2]) -> Result<Self> {
        let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
        let tr = f[0][0] + f[1][1];
        if det != 1 || tr.abs() <= 2 {
            return Err(Error::InvalidParams(format!("{f:?} must have det 1 and |trace| > 2")));
        }
        Ok(Self { f, roof: Roof::Constant { tau: 1.0 }, potential: Complex64::new(0.0, 0.0) })
    }

    pub fn lambda(&self) -> f64 {
        let tr = (self.f[0][0] + self.f[1][1]).abs() as f64;
        ((tr + (tr * tr - 4.0).sqrt()) / 2.0).ln()
    }

    pub fn splitting(&self) -> DualSplitting {
        DualSplitting::from_matrix(self.f).expect("validated at construction")
    }

    /// `f^T nu`
    pub fn dual_step(&self, nu: [i64; 2]) -> [i64; 2] {
        let f = self.f;
        [f[0][0] * nu[0] + f[1][0] * nu[1], f[0][1] * nu[0] + f[1][1] * nu[1]]
    }

    /// `(f^T)^{-1} nu`, exact since `det f = 1`.
    pub fn dual_step_back(&self, nu: [i64; 2]) -> [i64; 2] {
        let f = self.f;
        [f[1][1] * nu[0] - f[1][0] * nu[1], -f[0][1] * nu[0] + f[0][0] * nu[1]]
    }

    /// `f x mod 1` on integer grid coordinates modulo `n`.
    fn map_grid(&self, i: usize, j: usize, n: usize) -> (usize, usize) {
        let f = self.f;
        let m = n as i64;
        let a = (f[0][0] * i as i64 + f[0][1] * j as i64).rem_euclid(m);
        let b = (f[1][0] * i as i64 + f[1][1] * j as i64).rem_euclid(m);
        (a as usize, b as usize)
    }

    /// Backward flow `phi^{-t}(x, z)`, returned in the fundamental domain `z in [0, 1)`.
    pub fn flow_back(&self, x: [f64; 2], z: f64, t: f64) -> ([f64; 2], f64) {
        let Roof::Constant { tau } = self.roof;
        let mut z = (z - t) / tau;
        let mut x = x;
        let f = self.f;
        // (x, w) ~ (f x, w + 1)
        while z < 0.0 {
            x = [
                (f[0][0] as f64 * x[0] + f[0][1] as f64 * x[1]).rem_euclid(1.0),
                (f[1][0] as f64 * x[0] + f[1][1] as f64 * x[1]).rem_euclid(1.0),
            ];
            z += 1.0;
        }
        while z >= 1.0 {
            x = [
                (f[1][1] as f64 * x[0] - f[0][1] as f64 * x[1]).rem_euclid(1.0),
                (-f[1][0] as f64 * x[0] + f[0][0] as f64 * x[1]).rem_euclid(1.0),
            ];
            z -= 1.0;
        }
        (x, z * tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub re: f64,
    pub im: f64,
    pub sector: String,
    pub multiplicity: usize,
}

impl SpectrumPoint {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCertificate {
    pub nu: [i64; 2],
    pub norm_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub points: Vec<SpectrumPoint>,
    pub certificates: Vec<OrbitCertificate>,
    /// Largest `|z_numeric - z_exact|` over the zero sector.
    pub max_recovery_error: f64,
}

impl SpectrumResult {
    /// JSON array `[{re, im, sector}]`.
    pub fn spectrum_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            re: f64,
            im: f64,
            sector: &'a str,
        }
        let rows: Vec<Row> = self.points.iter().map(|p| Row { re: p.re, im: p.im, sector: &p.sector }).collect();
        Ok(serde_json::to_string_pretty(&rows)?)
    }

    pub fn write_certificates_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "nu1,nu2,norm_bound,pass")?;
        for c in &self.certificates {
            writeln!(out, "{},{},{:e},{}", c.nu[0], c.nu[1], c.norm_bound, c.pass)?;
        }
        Ok(())
    }
}

const Z_SAMPLES: usize = 64;

/// `z_k = i 2 pi k + V`, `|k| <= k_max`, each recovered as the Rayleigh quotient of
/// the spectrally differentiated eigenfunction `e^{-i 2 pi k z}` under `A = -d/dz + V`.
pub fn zero_sector_spectrum(torus: &MappingTorus, k_max: usize) -> Result<SpectrumResult> {
    if 2 * k_max + 1 >= Z_SAMPLES {
        return Err(Error::Resolution(format!("k_max {k_max} above the {Z_SAMPLES}-point z grid")));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(Z_SAMPLES);
    let inv = planner.plan_fft_inverse(Z_SAMPLES);
    let mut points = Vec::new();
    let mut worst: f64 = 0.0;
    for k in -(k_max as i64)..=(k_max as i64) {
        let phi: Vec<Complex64> = (0..Z_SAMPLES)
            .map(|j| Complex64::from_polar(1.0, -TAU * k as f64 * j as f64 / Z_SAMPLES as f64))
            .collect();
        let a_phi = apply_generator(&phi, torus.potential, &*fwd, &*inv);
        let num: Complex64 = phi.iter().zip(&a_phi).map(|(p, q)| p.conj() * q).sum();
        let den: f64 = phi.iter().map(|p| p.norm_sqr()).sum();
        let z = num / den;
        let exact = Complex64::new(0.0, TAU * k as f64) + torus.potential;
        worst = worst.max((z - exact).norm());
        points.push(SpectrumPoint { re: z.re, im: z.im, sector: "zero".into(), multiplicity: 1 });
    }
    points.sort_by(|a, b| a.im.total_cmp(&b.im));
    Ok(SpectrumResult { points, certificates: Vec::new(), max_recovery_error: worst })
}

/// `(-d/dz + V) u` for `u` sampled on the `z` circle.
fn apply_generator(u: &[Complex64], v: Complex64, fwd: &dyn rustfft::Fft<f64>, inv: &dyn rustfft::Fft<f64>) -> Vec<Complex64> {
    let n = u.len();
    let mut buf = u.to_vec();
    fwd.process(&mut buf);
    for (m, c) in buf.iter_mut().enumerate() {
        let freq = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        *c *= Complex64::new(0.0, -TAU * freq) / n as f64;
    }
    inv.process(&mut buf);
    buf.iter().zip(u).map(|(d, x)| d + v * x).collect()
}

/// `sup |L^t phi - e^{z t} phi|` for the zero-sector eigenfunction `e^{-i 2 pi k z}`
/// over a grid of `M`, where `L^t u = u o phi^{-t}`.
pub fn eigenfunction_residual(torus: &MappingTorus, k: i64, t: f64) -> f64 {
    let phi = |z: f64| Complex64::from_polar(1.0, -TAU * k as f64 * z);
    let ev = (Complex64::new(0.0, TAU * k as f64) * t).exp();
    let mut worst: f64 = 0.0;
    for a in 0..8 {
        for b in 0..8 {
            for c in 0..16 {
                let x = [a as f64 / 8.0 + 0.01, b as f64 / 8.0 + 0.03];
                let z = c as f64 / 16.0;
                let (_, zb) = torus.flow_back(x, z, t);
                worst = worst.max((phi(zb) - ev * phi(z)).norm());
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierOrbit {
    pub representative: [i64; 2],
    /// `(j, (f^T)^j nu)` for `j` in the window.
    pub points: Vec<(i64, [i64; 2])>,
}

fn norm2(v: [i64; 2]) -> f64 {
    (v[0] as f64).hypot(v[1] as f64)
}

impl FourierOrbit {
    /// Orbit point of least Euclidean norm, ties broken lexicographically.
    pub fn canonical(torus: &MappingTorus, nu: [i64; 2]) -> Result<[i64; 2]> {
        if nu == [0, 0] {
            return Err(Error::InvalidParams("the zero frequency has no orbit".into()));
        }
        let mut best = nu;
        for step in [MappingTorus::dual_step as fn(&MappingTorus, [i64; 2]) -> [i64; 2], MappingTorus::dual_step_back] {
            let mut cur = nu;
            loop {
                let next = step(torus, cur);
                if norm2(next) > norm2(cur) + 1e-9 {
                    break;
                }
                cur = next;
                if norm2(cur) < norm2(best) - 1e-9 || (norm2(cur) - norm2(best)).abs() <= 1e-9 && cur < best {
                    best = cur;
                }
                if norm2(cur) > 1e15 {
                    break;
                }
            }
        }
        Ok(best)
    }

    pub fn with_window(torus: &MappingTorus, nu: [i64; 2], j_lo: i64, j_hi: i64) -> Result<Self> {
        if nu == [0, 0] || j_lo > 0 || j_hi < 0 {
            return Err(Error::InvalidParams("need nu != 0 and j_lo <= 0 <= j_hi".into()));
        }
        let mut points = vec![(0, nu)];
        let mut cur = nu;
        for j in 1..=j_hi {
            cur = torus.dual_step(cur);
            points.push((j, cur));
        }
        cur = nu;
        for j in (j_lo..0).rev() {
            cur = torus.dual_step_back(cur);
            points.insert(0, (j, cur));
        }
        Ok(Self { representative: nu, points })
    }

    /// Extends both ends by at least one step and until `||Xi_*||_g > g_min`.
    pub fn auto(torus: &MappingTorus, nu: [i64; 2], p: &MetricParams, g_min: f64) -> Result<Self> {
        let rep = Self::canonical(torus, nu)?;
        let (mut lo, mut hi) = (0i64, 0i64);
        let mut cur = rep;
        loop {
            cur = torus.dual_step(cur);
            hi += 1;
            if g_xi_norm(cur, p) > g_min {
                break;
            }
        }
        cur = rep;
        loop {
            cur = torus.dual_step_back(cur);
            lo -= 1;
            if g_xi_norm(cur, p) > g_min {
                break;
            }
        }
        Self::with_window(torus, rep, lo, hi)
    }
}

/// `||Xi_*||_g` both window ends must exceed.
pub const DECAY_REGIME: f64 = 10.0;

/// `||Xi_*||_g = delta_perp |xi|` at `xi = 2 pi nu`, `omega = 0`.
fn g_xi_norm(nu: [i64; 2], p: &MetricParams) -> f64 {
    let r = TAU * norm2(nu);
    p.delta_perp(r) * r
}

fn log_w_at(nu: [i64; 2], split: &DualSplitting, cfg: &EscapeConfig, p: &MetricParams) -> f64 {
    let c = split.decompose([TAU * nu[0] as f64, TAU * nu[1] as f64], 0.0);
    log_weight(&c, split, cfg, p)
}

/// Weighted shift `W L W^{-1}` on one orbit: entry `j` is `W(nu_{j+1}) / W(nu_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitOperator {
    pub nu: [i64; 2],
    pub entries: Vec<f64>,
    /// Limit of the entries at both ends of the infinite orbit.
    pub tail_limit: f64,
}

impl OrbitOperator {
    /// Norm of the infinite shift, assuming the entries are monotone beyond the window.
    pub fn norm_bound(&self) -> f64 {
        self.entries.iter().copied().fold(self.tail_limit, f64::max)
    }

    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.entries.len() + 1;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (j, e) in self.entries.iter().enumerate() {
            m[(j + 1, j)] = *e;
        }
        m
    }
}

pub fn orbit_sector_operator(torus: &MappingTorus, orbit: &FourierOrbit, cfg: &EscapeConfig, p: &MetricParams) -> Result<OrbitOperator> {
    let first = orbit.points.first().map(|q| q.1).unwrap_or([0, 0]);
    let last = orbit.points.last().map(|q| q.1).unwrap_or([0, 0]);
    if orbit.points.len() < 2 || g_xi_norm(first, p) <= DECAY_REGIME || g_xi_norm(last, p) <= DECAY_REGIME {
        return Err(Error::Resolution(format!(
            "orbit window of {:?} too small to reach the decay regime",
            orbit.representative
        )));
    }
    let split = torus.splitting();
    let logs: Vec<f64> = orbit.points.iter().map(|(_, nu)| log_w_at(*nu, &split, cfg, p)).collect();
    let entries = logs.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
    let lam = split.lambda * (1.0 - cfg.gamma) * (1.0 - p.alpha_perp);
    let tail_limit = (-lam * cfg.r_u).exp().max((-lam * cfg.r_s).exp());
    Ok(OrbitOperator { nu: orbit.representative, entries, tail_limit })
}

/// Canonical representatives of every orbit meeting `max(|nu_1|, |nu_2|) <= nu_max`.
pub fn orbit_representatives(torus: &MappingTorus, nu_max: i64) -> Result<Vec<[i64; 2]>> {
    let mut reps = BTreeSet::new();
    for a in -nu_max..=nu_max {
        for b in -nu_max..=nu_max {
            if (a, b) != (0, 0) {
                reps.insert(FourierOrbit::canonical(torus, [a, b])?);
            }
        }
    }
    Ok(reps.into_iter().collect())
}

pub fn certify_orbits(torus: &MappingTorus, nu_max: i64, cfg: &EscapeConfig, p: &MetricParams, threshold: f64) -> Result<Vec<OrbitCertificate>> {
    let reps = orbit_representatives(torus, nu_max)?;
    reps.par_iter()
        .map(|&nu| {
            let orbit = FourierOrbit::auto(torus, nu, p, DECAY_REGIME)?;
            let op = orbit_sector_operator(torus, &orbit, cfg, p)?;
            let norm_bound = op.norm_bound();
            Ok(OrbitCertificate { nu, norm_bound, pass: norm_bound < threshold })
        })
        .collect()
}

/// Zero-sector spectrum plus one certificate per nonzero orbit; fails listing the
/// orbits whose weighted shift norm reaches `threshold`.
pub fn full_spectrum(torus: &MappingTorus, k_max: usize, nu_max: i64, cfg: &EscapeConfig, p: &MetricParams, threshold: f64) -> Result<SpectrumResult> {
    let mut res = zero_sector_spectrum(torus, k_max)?;
    res.certificates = certify_orbits(torus, nu_max, cfg, p, threshold)?;
    let bad: Vec<(i64, i64)> = res.certificates.iter().filter(|c| !c.pass).map(|c| (c.nu[0], c.nu[1])).collect();
    if !bad.is_empty() {
        return Err(Error::Certification(bad));
    }
    Ok(res)
}

/// Largest coefficient outside the expected image after applying `L^1` to a
/// superposition of modes on an `n x n` grid, relative to the largest inside.
pub fn sector_leakage(torus: &MappingTorus, modes: &[([i64; 2], Complex64)], n: usize) -> Result<f64> {
    let half = (n / 2) as i64;
    for (nu, _) in modes {
        let img = torus.dual_step(*nu);
        if nu.iter().chain(img.iter()).any(|c| c.abs() >= half) {
            return Err(Error::Resolution(format!("mode {nu:?} or its image exceeds the {n}-point grid")));
        }
    }
    let u = |i: usize, j: usize| -> Complex64 {
        modes
            .iter()
            .map(|(nu, c)| c * Complex64::from_polar(1.0, TAU * (nu[0] * i as i64 + nu[1] * j as i64) as f64 / n as f64))
            .sum()
    };
    // L^1 u (x) = u(f x)
    let mut grid: Vec<Complex64> = (0..n * n)
        .map(|idx| {
            let (a, b) = torus.map_grid(idx / n, idx % n, n);
            u(a, b)
        })
        .collect();
    fft2(&mut grid, n);
    let wrap = |v: i64| v.rem_euclid(n as i64) as usize;
    let expected: BTreeSet<usize> = modes
        .iter()
        .map(|(nu, _)| {
            let m = torus.dual_step(*nu);
            wrap(m[0]) * n + wrap(m[1])
        })
        .collect();
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for (idx, c) in grid.iter().enumerate() {
        let a = c.norm() / (n * n) as f64;
        if expected.contains(&idx) {
            inside = inside.max(a);
        } else {
            outside = outside.max(a);
        }
    }
    Ok(outside / inside.max(f64::MIN_POSITIVE))
}

fn fft2(data: &mut [Complex64], n: usize) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

/// Points with `Re z > gamma_re` and `Im z in [omega, omega + 1)`.
pub fn weyl_count(spec: &SpectrumResult, gamma_re: f64, omega: f64) -> usize {
    spec.points
        .iter()
        .filter(|p| p.re > gamma_re && p.im >= omega && p.im < omega + 1.0)
        .map(|p| p.multiplicity)
        .sum()
}

/// Least-squares slope of `log max_{omega' <= omega} count(omega')` against `log omega`.
pub fn weyl_density_exponent(spec: &SpectrumResult, gamma_re: f64, omega_max: f64, step: f64) -> Result<f64> {
    let mut running = 0usize;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let steps = (omega_max / step).floor() as usize;
    for i in 0..=steps {
        let w = i as f64 * step;
        running = running.max(weyl_count(spec, gamma_re, w));
        if w >= 1.0 && running > 0 {
            xs.push(w.ln());
            ys.push((running as f64).ln());
        }
    }
    Ok(ols(&xs, &ys)?.0)
}

/// Probe point of a wave-front profile in `(x, z, xi, omega)` coordinates over a flow box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WfProbe {
    pub x: [f64; 2],
    pub z: f64,
    pub xi: [f64; 2],
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfRecord {
    pub probe: WfProbe,
    pub magnitude: f64,
    pub oracle: f64,
    pub weight: f64,
    pub in_vicinity: bool,
}

/// Unit-norm Gaussian packet `exp(i eta.(y'-y) - |x'-x|^2/dperp^2 - (z'-z)^2/dpar^2)`.
///
/// Returned as standard deviations, i.e. the metric widths divided by `sqrt 2`.
fn packet_widths(probe: &WfProbe, p: &MetricParams) -> (f64, f64) {
    let eta = probe.xi[0].hypot(probe.xi[1]).hypot(probe.omega);
    (p.delta_perp(eta) / SQRT_2, p.delta_par(eta) / SQRT_2)
}

fn packet_amp(dperp: f64, dpar: f64) -> f64 {
    ((PI * dperp * dperp).powi(2) * PI * dpar * dpar).powf(-0.25)
}

/// `int exp(-i a s - s^2/(2 d^2)) ds` by the trapezoid rule on `|s| <= 10 d`.
fn gauss_fourier_1d(a: f64, d: f64, cells: usize) -> Complex64 {
    let h = 20.0 * d / cells as f64;
    (0..=cells)
        .map(|i| {
            let s = -10.0 * d + h * i as f64;
            let w = if i == 0 || i == cells { 0.5 } else { 1.0 };
            w * h * (-s * s / (2.0 * d * d)).exp() * Complex64::from_polar(1.0, -a * s)
        })
        .sum()
}

/// `|<Phi_rho, e^{i omega0 z}>|` by quadrature over a window of the packet.
///
/// The integrand is a product over the three coordinates, so the grid sum
/// factorizes into one-dimensional sums.
pub fn packet_overlap(probe: &WfProbe, omega0: f64, p: &MetricParams, cells: usize) -> Result<f64> {
    let (dperp, dpar) = packet_widths(probe, p);
    let h_par = 20.0 * dpar / cells as f64;
    if (probe.omega - omega0).abs() * h_par > PI || probe.xi.iter().any(|x| x.abs() * 20.0 * dperp / cells as f64 > PI) {
        return Err(Error::Resolution("probe frequency above the quadrature Nyquist limit".into()));
    }
    let ix = gauss_fourier_1d(probe.xi[0], dperp, cells) * gauss_fourier_1d(probe.xi[1], dperp, cells);
    let iz = gauss_fourier_1d(probe.omega - omega0, dpar, cells);
    Ok(packet_amp(dperp, dpar) * (ix * iz).norm())
}

/// Closed form of [`packet_overlap`].
pub fn packet_overlap_oracle(probe: &WfProbe, omega0: f64, p: &MetricParams) -> f64 {
    let (dperp, dpar) = packet_widths(probe, p);
    let xi2 = probe.xi[0].powi(2) + probe.xi[1].powi(2);
    let dw = probe.omega - omega0;
    packet_amp(dperp, dpar)
        * TAU
        * dperp
        * dperp
        * (TAU.sqrt() * dpar)
        * (-(dperp * dperp * xi2 + dpar * dpar * dw * dw) / 2.0).exp()
}

/// Parabolic vicinity `<omega - omega0> <= |Xi|^eps` and `<|Xi|^{alpha_perp} |Xi_s|> <= |Xi|^eps`.
pub fn in_parabolic_vicinity(probe: &WfProbe, omega0: f64, split: &DualSplitting, p: &MetricParams, eps: f64) -> bool {
    let c = split.decompose(probe.xi, probe.omega);
    let big = split.eta_norm(&c).max(1.0);
    jbracket(probe.omega - omega0) <= big.powf(eps) && jbracket(big.powf(p.alpha_perp) * c.s.abs()) <= big.powf(eps)
}

/// `|B_g phi|` at each probe for the eigenfunction with frequency `omega0` in `z`.
pub fn wavefront_profile(torus: &MappingTorus, omega0: f64, probes: &[WfProbe], p: &MetricParams, cfg: &EscapeConfig) -> Result<Vec<WfRecord>> {
    let split = torus.splitting();
    probes
        .iter()
        .map(|pr| {
            let c = split.decompose(pr.xi, pr.omega);
            Ok(WfRecord {
                probe: *pr,
                magnitude: packet_overlap(pr, omega0, p, 512)?,
                oracle: packet_overlap_oracle(pr, omega0, p),
                weight: log_weight(&c, &split, cfg, p).exp(),
                in_vicinity: in_parabolic_vicinity(pr, omega0, &split, p, 0.5),
            })
        })
        .collect()
}

/// `max |B_g phi| <omega - omega0>^N W` over the records.
pub fn wf_constant(records: &[WfRecord], omega0: f64, n_exp: f64) -> f64 {
    records
        .iter()
        .map(|r| r.magnitude * jbracket(r.probe.omega - omega0).powf(n_exp) * r.weight)
        .fold(0.0, f64::max)
}

/// Probes on a grid of `omega - omega0` and transverse frequencies along `E*_u`, `E*_s`.
pub fn default_probes(torus: &MappingTorus, omega0: f64, offsets: &[f64], transverse: &[f64]) -> Vec<WfProbe> {
    let split = torus.splitting();
    let mut out = Vec::new();
    for &d in offsets {
        for &t in transverse {
            for dir in [split.e_u, split.e_s] {
                out.push(WfProbe { x: [0.3, 0.6], z: 0.25, xi: [t * dir[0], t * dir[1]], omega: omega0 + d });
            }
        }
    }
    out
}

pub fn write_profile_csv<W: Write>(out: &mut W, records: &[WfRecord]) -> Result<()> {
    writeln!(out, "x1,x2,z,xi1,xi2,omega,abs,oracle,weight,in_vicinity")?;
    for r in records {
        let p = &r.probe;
        writeln!(
            out,
            "{},{},{},{},{},{},{:e},{:e},{:e},{}",
            p.x[0], p.x[1], p.z, p.xi[0], p.xi[1], p.omega, r.magnitude, r.oracle, r.weight, r.in_vicinity
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric() -> MetricParams {
        MetricParams::new(1.0, 0.5, 0.0).unwrap()
    }

    #[test]
    fn cat_map_lambda() {
        let t = MappingTorus::default();
        assert!((t.lambda() - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-15);
        assert!((t.lambda() - 0.9624236501192069).abs() < 1e-12);
        assert!(MappingTorus::new([[1, 1], [0, 1]]).is_err());
    }

    #[test]
    fn zero_sector_examples() {
        let t = MappingTorus::default();
        let s0 = zero_sector_spectrum(&t, 0).unwrap();
        assert_eq!(s0.points.len(), 1);
        assert!(s0.points[0].z().norm() < 1e-12);
        let s3 = zero_sector_spectrum(&t, 3).unwrap();
        let ims: Vec<f64> = s3.points.iter().map(|p| p.im).collect();
        for (k, im) in (-3..=3).zip(ims) {
            assert!((im - TAU * k as f64).abs() < 1e-10);
        }
        for k in -3..=3 {
            for tt in [0.1, 0.37] {
                assert!(eigenfunction_residual(&t, k, tt) <= 1e-12);
            }
        }
    }

    #[test]
    fn dual_steps_invert() {
        let t = MappingTorus::default();
        for nu in [[1, 0], [3, -7], [-2, 5]] {
            assert_eq!(t.dual_step_back(t.dual_step(nu)), nu);
        }
        let c = FourierOrbit::canonical(&t, [5, 3]).unwrap();
        assert_eq!(c, FourierOrbit::canonical(&t, t.dual_step([5, 3])).unwrap());
    }

    #[test]
    fn unweighted_shift_has_norm_one() {
        let t = MappingTorus::default();
        let p = metric();
        let orbit = FourierOrbit::auto(&t, [1, 0], &p, 10.0).unwrap();
        let op = orbit_sector_operator(&t, &orbit, &EscapeConfig::symmetric(0.0, 0.0), &p).unwrap();
        assert!(op.entries.iter().all(|e| (e - 1.0).abs() < 1e-15));
        assert_eq!(op.norm_bound(), 1.0);
    }

    #[test]
    fn unstable_end_ratio_matches_rate() {
        let t = MappingTorus::default();
        let p = metric();
        let cfg = EscapeConfig::symmetric(2.0, 0.0);
        let orbit = FourierOrbit::with_window(&t, [1, 0], -4, 25).unwrap();
        let op = orbit_sector_operator(&t, &orbit, &cfg, &p).unwrap();
        let expect = (-t.lambda() * 0.5 * 2.0).exp();
        let last = *op.entries.last().unwrap();
        assert!((last / expect - 1.0).abs() < 1e-3, "{last} vs {expect}");
    }

    #[test]
    fn small_window_rejected() {
        let t = MappingTorus::default();
        let orbit = FourierOrbit::with_window(&t, [1, 0], 0, 1).unwrap();
        assert!(orbit_sector_operator(&t, &orbit, &EscapeConfig::symmetric(8.0, 0.0), &metric()).is_err());
    }

    #[test]
    fn certification_threshold_semantics() {
        let t = MappingTorus::default();
        let p = metric();
        let cfg = EscapeConfig::symmetric(8.0, 0.0);
        let ok = full_spectrum(&t, 5, 20, &cfg, &p, (-3f64).exp()).unwrap();
        assert_eq!(ok.points.len(), 11);
        assert!(ok.certificates.iter().all(|c| c.pass));
        assert!(matches!(full_spectrum(&t, 5, 20, &cfg, &p, 1e-3), Err(Error::Certification(_))));
        assert!(full_spectrum(&t, 5, 0, &cfg, &p, 1e-3).unwrap().certificates.is_empty());
    }

    #[test]
    fn no_cross_orbit_leakage() {
        let t = MappingTorus::default();
        let modes = [([1, 0], Complex64::new(0.7, 0.2)), ([0, 2], Complex64::new(-0.3, 1.1)), ([1, -1], Complex64::new(0.5, 0.0))];
        assert!(sector_leakage(&t, &modes, 64).unwrap() <= 1e-12);
    }

    #[test]
    fn weyl_examples() {
        let t = MappingTorus::default();
        let s = zero_sector_spectrum(&t, 3).unwrap();
        assert_eq!(weyl_count(&s, -1.0, TAU - 0.5), 1);
        assert_eq!(weyl_count(&SpectrumResult::default(), -1.0, 3.0), 0);
    }

    #[test]
    fn overlap_matches_closed_form() {
        let p = metric();
        let t = MappingTorus::default();
        for pr in default_probes(&t, TAU, &[-3.0, 0.0, 2.0], &[0.0, 1.5]) {
            let q = packet_overlap(&pr, TAU, &p, 512).unwrap();
            let o = packet_overlap_oracle(&pr, TAU, &p);
            assert!((q - o).abs() <= 1e-10 * o.max(1e-300) + 1e-300, "{q} {o}");
        }
        let peak = WfProbe { x: [0.0; 2], z: 0.0, xi: [0.0; 2], omega: TAU };
        assert!(packet_overlap_oracle(&peak, TAU, &p) > 0.0);
    }
}
