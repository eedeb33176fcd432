//! Wave packets and the Bargmann transform on flat tori.
//!
//! Space is a torus `T^{n+1}` with coordinates `y = (x, z)`, sampled on a
//! uniform grid; the last axis is the flow direction `z`. Functions are
//! expanded as `u(y) = V^{-1} sum_k u_k e^{i kappa_k . y}` with
//! `u_k = h^d sum_y u(y) e^{-i kappa_k . y}`. A packet centered at
//! `rho = (y, eta)` is the periodization of `(F^{-1} phi_eta)(. - y)`, so its
//! Fourier coefficients are `(2 pi)^{d/2} phi_eta(kappa_k) e^{-i kappa_k . y}`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::bracket_metric::{MetricParams, PhasePoint};
use crate::error::{Error, Result};
use crate::numerics::{gauss_hermite, seeded_rng, smooth_step};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Packets must span at least this many grid cells.
pub const MIN_CELLS: f64 = 4.0;
/// Frequency-side packets are truncated at `delta |eta' - eta| <= WINDOW`.
pub const WINDOW: f64 = 6.0;
/// Gauss-Hermite nodes per axis for `m(eta')`.
pub const GH_NODES: usize = 32;

/// Uniform periodic grid on `prod_i [0, L_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub shape: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl TorusGrid {
    pub fn new(shape: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() != lengths.len() {
            return Err(Error::Dimension { expected: shape.len().max(1), got: lengths.len() });
        }
        if shape.iter().any(|&s| s < 2 || s % 2 != 0) || lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidParams("grid needs even sizes >= 2 and positive lengths".into()));
        }
        Ok(Self { shape, lengths })
    }

    /// `points^d` grid on the cube of side `length`.
    pub fn cube(dim: usize, points: usize, length: f64) -> Result<Self> {
        Self::new(vec![points; dim], vec![length; dim])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Transverse dimension `n = d - 1`.
    pub fn n(&self) -> usize {
        self.dim() - 1
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.shape[axis] as f64
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn cell(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).product()
    }

    /// Row-major multi-index, last axis fastest.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat).iter().enumerate().map(|(a, &i)| i as f64 * self.spacing(a)).collect()
    }

    /// Signed integer mode of FFT bin `i` on `axis`, in `(-N/2, N/2]`.
    pub fn mode(&self, axis: usize, i: usize) -> i64 {
        let n = self.shape[axis];
        if i <= n / 2 { i as i64 } else { i as i64 - n as i64 }
    }

    /// Wavenumber `2 pi k / L` of FFT bin `i` on `axis`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> f64 {
        TAU * self.mode(axis, i) as f64 / self.lengths[axis]
    }

    pub fn kappa(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat).iter().enumerate().map(|(a, &i)| self.wavenumber(a, i)).collect()
    }

    /// Largest resolved wavenumber on `axis`.
    pub fn nyquist(&self, axis: usize) -> f64 {
        PI / self.spacing(axis)
    }

    /// FFT bin of the signed mode `k`.
    pub fn bin(&self, axis: usize, k: i64) -> usize {
        k.rem_euclid(self.shape[axis] as i64) as usize
    }
}

/// Complex samples on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: TorusGrid,
    pub data: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self { grid: grid.clone(), data: vec![ZERO; grid.len()] }
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let data = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid: grid.clone(), data }
    }

    pub fn norm(&self) -> f64 {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell()).sqrt()
    }

    pub fn sup(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `<self, other> = int conj(self) other`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum::<Complex64>() * self.grid.cell())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { grid: self.grid.clone(), data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { grid: self.grid.clone(), data: self.data.iter().map(|a| a * c).collect() }
    }

    pub fn check(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Resolution("grid mismatch".into()));
        }
        Ok(())
    }

    /// Fourier coefficients `u_k = h^d sum_y u(y) e^{-i kappa_k . y}`.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.data.clone();
        fftn(&mut buf, &self.grid.shape, false);
        let c = self.grid.cell();
        buf.iter_mut().for_each(|v| *v *= c);
        buf
    }

    pub fn from_spectrum(grid: &TorusGrid, hat: &[Complex64]) -> Self {
        let mut buf = hat.to_vec();
        fftn(&mut buf, &grid.shape, true);
        let c = 1.0 / grid.volume();
        buf.iter_mut().for_each(|v| *v *= c);
        Self { grid: grid.clone(), data: buf }
    }
}

/// In-place unnormalized multidimensional FFT, row-major layout.
pub fn fftn(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    let mut stride = 1;
    for a in (0..shape.len()).rev() {
        let n = shape[a];
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        if stride == 1 {
            for chunk in data.chunks_mut(n) {
                fft.process(chunk);
            }
        } else {
            let mut line = vec![ZERO; n];
            let block = n * stride;
            for start in (0..total).step_by(block) {
                for off in 0..stride {
                    for i in 0..n {
                        line[i] = data[start + off + i * stride];
                    }
                    fft.process(&mut line);
                    for i in 0..n {
                        data[start + off + i * stride] = line[i];
                    }
                }
            }
        }
        stride *= n;
    }
}

/// Random trigonometric polynomial with modes `|k_i| <= kmax`, unit `L^2` norm.
pub fn band_limited_random(grid: &TorusGrid, kmax: i64, seed: u64) -> Result<GridFunction> {
    if (0..grid.dim()).any(|a| 2 * kmax >= grid.shape[a] as i64) {
        return Err(Error::Resolution(format!("band {kmax} exceeds the grid Nyquist limit")));
    }
    let mut rng = seeded_rng(seed);
    let mut hat = vec![ZERO; grid.len()];
    for (flat, h) in hat.iter_mut().enumerate() {
        let idx = grid.unravel(flat);
        if idx.iter().enumerate().all(|(a, &i)| grid.mode(a, i).abs() <= kmax) {
            *h = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let u = GridFunction::from_spectrum(grid, &hat);
    let nrm = u.norm();
    Ok(u.scale(Complex64::new(1.0 / nrm, 0.0)))
}

/// One flow-box chart: a grid translation `kappa_j^{-1}(y) = y + shift` and
/// the cutoff `chi_j o kappa_j` sampled on the torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub shift: Vec<usize>,
    pub cutoff: Vec<f64>,
}

/// Charts with a quadratic partition `sum_j (chi_j o kappa_j)^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartAtlas {
    pub grid: TorusGrid,
    pub charts: Vec<Chart>,
}

impl ChartAtlas {
    pub fn single(grid: &TorusGrid) -> Self {
        Self {
            grid: grid.clone(),
            charts: vec![Chart { shift: vec![0; grid.dim()], cutoff: vec![1.0; grid.len()] }],
        }
    }

    /// Two charts on the circle `R / L Z`: one centered at 0, the other at `L/2`.
    /// `chi_1 = cos(pi s / 2)`, `chi_2 = sin(pi s / 2)` with `s` a smooth step
    /// switching over `[0.2, 0.3] L` and back over `[0.7, 0.8] L`.
    pub fn circle_two_chart(points: usize, length: f64) -> Result<Self> {
        let grid = TorusGrid::new(vec![points], vec![length])?;
        let s = |y: f64| {
            let t = y / length;
            let up = smooth_step((t - 0.2) / 0.1);
            let down = smooth_step((0.8 - t) / 0.1);
            up.min(down)
        };
        let mut c1 = Vec::with_capacity(points);
        let mut c2 = Vec::with_capacity(points);
        for i in 0..points {
            let v = s(grid.point(i)[0]);
            c1.push((FRAC_PI_2 * v).cos());
            c2.push((FRAC_PI_2 * v).sin());
        }
        Ok(Self {
            grid,
            charts: vec![Chart { shift: vec![0], cutoff: c1 }, Chart { shift: vec![points / 2], cutoff: c2 }],
        })
    }

    /// `max |sum_j (chi_j o kappa_j)^2 |det D kappa_j| - 1|`; translations have unit Jacobian.
    pub fn partition_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| (self.charts.iter().map(|c| c.cutoff[i].powi(2)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn shifted(&self, flat: usize, shift: &[usize], sign: i64) -> usize {
        let idx: Vec<usize> = self
            .grid
            .unravel(flat)
            .iter()
            .zip(shift)
            .zip(&self.grid.shape)
            .map(|((&i, &s), &n)| (i as i64 + sign * s as i64).rem_euclid(n as i64) as usize)
            .collect();
        self.grid.ravel(&idx)
    }

    /// `v_j(y) = chi_j(kappa_j^{-1} y) u(kappa_j^{-1} y)` in chart coordinates.
    pub fn decompose(&self, u: &GridFunction) -> Result<Vec<GridFunction>> {
        if u.grid != self.grid {
            return Err(Error::Resolution("grid mismatch".into()));
        }
        Ok(self
            .charts
            .iter()
            .map(|c| {
                let data = (0..self.grid.len())
                    .map(|y| {
                        let m = self.shifted(y, &c.shift, 1);
                        c.cutoff[m] * u.data[m]
                    })
                    .collect();
                GridFunction { grid: self.grid.clone(), data }
            })
            .collect())
    }

    /// `u(m) = sum_j chi_j(m) v_j(kappa_j(m))`.
    pub fn recompose(&self, vs: &[GridFunction]) -> Result<GridFunction> {
        if vs.len() != self.charts.len() || vs.iter().any(|v| v.grid != self.grid) {
            return Err(Error::Resolution("grid mismatch".into()));
        }
        let data = (0..self.grid.len())
            .map(|m| {
                self.charts
                    .iter()
                    .zip(vs)
                    .map(|(c, v)| c.cutoff[m] * v.data[self.shifted(m, &c.shift, -1)])
                    .sum()
            })
            .collect();
        Ok(GridFunction { grid: self.grid.clone(), data })
    }
}

use std::f64::consts::FRAC_PI_2;

/// Per-axis widths `(delta_perp, ..., delta_perp, delta_par)` at frequency `eta`.
pub fn widths(eta: &[f64], p: &MetricParams) -> Vec<f64> {
    let e = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = eta.len();
    (0..d).map(|a| if a + 1 == d { p.delta_par(e) } else { p.delta_perp(e) }).collect()
}

/// Tensor Gauss-Hermite rule in `d` dimensions for the weight `exp(-|t|^2)`.
struct TensorGh {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorGh {
    fn new() -> Self {
        let (nodes, weights) = gauss_hermite(GH_NODES);
        Self { nodes, weights }
    }

    /// `int f(c + t / s) dt` over `R^d` with `f` given relative to the Gaussian weight.
    fn integrate(&self, center: &[f64], scale: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
        let d = center.len();
        let n = self.nodes.len();
        let total = n.pow(d as u32);
        let mut pt = vec![0.0; d];
        let mut acc = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            let mut t2 = 0.0;
            for a in (0..d).rev() {
                let i = rem % n;
                rem /= n;
                let t = self.nodes[i];
                pt[a] = center[a] + t / scale[a];
                w *= self.weights[i];
                t2 += t * t;
            }
            acc += w * t2.exp() * f(&pt);
        }
        acc / scale.iter().product::<f64>()
    }
}

fn gaussian_exponent(eta: &[f64], eta_prime: &[f64], w: &[f64]) -> f64 {
    eta.iter().zip(eta_prime).zip(w).map(|((a, b), d)| (d * (b - a)).powi(2)).sum()
}

/// `m(eta') = int |phi^(0)_eta(eta')|^2 d eta` by Gauss-Hermite around `eta'`.
pub fn m_weight(eta_prime: &[f64], p: &MetricParams) -> f64 {
    m_weight_with(&TensorGh::new(), eta_prime, p)
}

fn m_weight_with(gh: &TensorGh, eta_prime: &[f64], p: &MetricParams) -> f64 {
    let scale = widths(eta_prime, p);
    gh.integrate(eta_prime, &scale, |eta| (-gaussian_exponent(eta, eta_prime, &widths(eta, p))).exp())
}

/// `||phi_rho||^2_{L^2(R^{n+1})} = int |phi_eta(eta')|^2 d eta'`.
pub fn packet_norm_sq(eta: &[f64], p: &MetricParams) -> f64 {
    let gh = TensorGh::new();
    let w = widths(eta, p);
    gh.integrate(eta, &w, |ep| (-gaussian_exponent(eta, ep, &w)).exp() / m_weight_with(&gh, ep, p))
}

/// `m(eta')` in the constant-metric case.
pub fn m_constant(d: usize, p: &MetricParams) -> f64 {
    PI.powf(d as f64 / 2.0) / (p.delta0.powi(d as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    Gaussian,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub center: PhasePoint,
    pub kind: PacketKind,
    pub params: MetricParams,
    pub samples: GridFunction,
}

fn split_rho(rho: &PhasePoint) -> (Vec<f64>, Vec<f64>) {
    let mut y = rho.x.clone();
    y.push(rho.z);
    let mut eta = rho.xi.clone();
    eta.push(rho.omega);
    (y, eta)
}

/// Errors unless every packet width spans [`MIN_CELLS`] cells and the frequency
/// window stays below Nyquist.
pub fn check_resolution(grid: &TorusGrid, eta: &[f64], p: &MetricParams) -> Result<()> {
    let w = widths(eta, p);
    for a in 0..grid.dim() {
        if w[a] < MIN_CELLS * grid.spacing(a) {
            return Err(Error::Resolution(format!(
                "packet width {:.4} on axis {a} spans fewer than {MIN_CELLS} cells of {:.4}",
                w[a],
                grid.spacing(a)
            )));
        }
        if eta[a].abs() + WINDOW / w[a] > grid.nyquist(a) {
            return Err(Error::Resolution(format!(
                "frequency window around {:.3} on axis {a} exceeds Nyquist {:.3}",
                eta[a],
                grid.nyquist(a)
            )));
        }
    }
    Ok(())
}

/// Exact packet via the inverse FFT of `m^{-1/2} phi^(0)_eta`, or the Gaussian
/// `exp(i eta.(y'-y) - |x'-x|^2/(2 dperp^2) - (z'-z)^2/(2 dpar^2))` with cutoff
/// and numerical unit normalization.
pub fn make_packet(rho: &PhasePoint, kind: PacketKind, p: &MetricParams, grid: &TorusGrid) -> Result<WavePacket> {
    if rho.n() != grid.n() {
        return Err(Error::Dimension { expected: grid.n(), got: rho.n() });
    }
    let (y, eta) = split_rho(rho);
    check_resolution(grid, &eta, p)?;
    let samples = match kind {
        PacketKind::Exact => {
            let gh = TensorGh::new();
            let w = widths(&eta, p);
            let scale = TAU.powf(grid.dim() as f64 / 2.0);
            let hat: Vec<Complex64> = (0..grid.len())
                .map(|k| {
                    let kap = grid.kappa(k);
                    let e = gaussian_exponent(&eta, &kap, &w);
                    if e > 2.0 * WINDOW * WINDOW {
                        return ZERO;
                    }
                    let phase: f64 = kap.iter().zip(&y).map(|(a, b)| a * b).sum();
                    Complex64::from_polar(scale * (-e / 2.0).exp() / m_weight_with(&gh, &kap, p).sqrt(), -phase)
                })
                .collect();
            GridFunction::from_spectrum(grid, &hat)
        }
        PacketKind::Gaussian => {
            let w = widths(&eta, p);
            let raw = GridFunction::from_fn(grid, |yp| {
                let mut q = 0.0;
                let mut r2 = 0.0;
                let mut ph = 0.0;
                for a in 0..grid.dim() {
                    let l = grid.lengths[a];
                    let dy = (yp[a] - y[a] + l / 2.0).rem_euclid(l) - l / 2.0;
                    q += (dy / w[a]).powi(2) / 2.0;
                    r2 += (dy / (l / 2.0)).powi(2);
                    ph += eta[a] * dy;
                }
                let chi = 1.0 - smooth_step((r2.sqrt() - 0.5) / 0.5);
                Complex64::from_polar(chi * (-q).exp(), ph)
            });
            let nrm = raw.norm();
            raw.scale(Complex64::new(1.0 / nrm, 0.0))
        }
    };
    Ok(WavePacket { center: rho.clone(), kind, params: *p, samples })
}

/// Phase-space grid: base points on a subsampled spatial grid times a frequency
/// lattice of spacing `2 pi / (L refine)` covering `|eta_i| <= eta_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub grid: TorusGrid,
    pub base: TorusGrid,
    pub refine: usize,
    pub freq_axes: Vec<Vec<f64>>,
}

impl PhaseGrid {
    pub fn new(grid: &TorusGrid, base_points: usize, refine: usize, eta_max: f64) -> Result<Self> {
        if refine == 0 || grid.shape.iter().any(|&s| s % base_points != 0) {
            return Err(Error::InvalidParams("base points must divide the grid and refine >= 1".into()));
        }
        let base = TorusGrid::new(vec![base_points; grid.dim()], grid.lengths.clone())?;
        let freq_axes = (0..grid.dim())
            .map(|a| {
                let s = TAU / (grid.lengths[a] * refine as f64);
                let m = (eta_max / s).floor() as i64;
                (-m..=m).map(|j| j as f64 * s).collect()
            })
            .collect();
        Ok(Self { grid: grid.clone(), base, refine, freq_axes })
    }

    pub fn etas(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for ax in &self.freq_axes {
            out = out.into_iter().flat_map(|p| ax.iter().map(move |v| {
                let mut q = p.clone();
                q.push(*v);
                q
            })).collect();
        }
        out
    }

    /// Phase-space cell volume of one grid point.
    pub fn cell(&self) -> f64 {
        (0..self.grid.dim())
            .map(|a| self.base.spacing(a) * TAU / (self.grid.lengths[a] * self.refine as f64))
            .product()
    }

    pub fn len(&self) -> usize {
        self.base.len() * self.freq_axes.iter().map(|a| a.len()).product::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values of a transform on a [`PhaseGrid`]: `values[e][j]` at `(base point j, etas[e])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub etas: Vec<Vec<f64>>,
    pub values: Vec<Vec<Complex64>>,
}

impl PhaseField {
    /// CSV with columns `x, z, xi, omega, re, im, abs` (indexed `x1, xi1, ...` when `n > 1`).
    pub fn write_csv<W: Write>(&self, base: &TorusGrid, out: &mut W) -> Result<()> {
        let n = base.n();
        let names = |s: &str| if n == 1 { vec![s.to_string()] } else { (1..=n).map(|i| format!("{s}{i}")).collect() };
        let mut head = names("x");
        head.push("z".into());
        head.extend(names("xi"));
        head.extend(["omega", "re", "im", "abs"].map(String::from));
        writeln!(out, "{}", head.join(","))?;
        for (eta, vals) in self.etas.iter().zip(&self.values) {
            for (j, v) in vals.iter().enumerate() {
                let y = base.point(j);
                let cols: Vec<String> = y.iter().chain(eta.iter()).map(|c| format!("{c}")).collect();
                writeln!(out, "{},{:e},{:e},{:e}", cols.join(","), v.re, v.im, v.norm())?;
            }
        }
        Ok(())
    }
}

/// Packet resolution on the spatial grid, plus a frequency window narrower than
/// the base grid so that no two window modes fold onto the same base bin.
fn check_phase_resolution(phase: &PhaseGrid, eta: &[f64], p: &MetricParams) -> Result<()> {
    check_resolution(&phase.grid, eta, p)?;
    let w = widths(eta, p);
    for a in 0..phase.grid.dim() {
        let span = 2.0 * WINDOW / w[a] * phase.grid.lengths[a] / TAU + 1.0;
        if span >= phase.base.shape[a] as f64 {
            return Err(Error::Resolution(format!(
                "frequency window of {span:.0} modes on axis {a} aliases on {} base points",
                phase.base.shape[a]
            )));
        }
    }
    Ok(())
}

/// Sparse frequency-side packet `phi_eta(kappa_k)` as `(spectral index, value)`.
type Window = Vec<(usize, f64)>;

/// Bargmann transform on a phase grid, with `m(kappa_k)` tabulated per mode.
#[derive(Debug, Clone)]
pub struct Bargmann {
    pub phase: PhaseGrid,
    pub params: MetricParams,
    m_inv_sqrt: Vec<f64>,
}

impl Bargmann {
    pub fn new(phase: PhaseGrid, p: &MetricParams) -> Result<Self> {
        let g = &phase.grid;
        for eta in phase.etas() {
            check_phase_resolution(&phase, &eta, p)?;
        }
        let gh = TensorGh::new();
        let m_inv_sqrt = (0..g.len()).into_par_iter().map(|k| 1.0 / m_weight_with(&gh, &g.kappa(k), p).sqrt()).collect();
        Ok(Self { phase, params: *p, m_inv_sqrt })
    }

    /// Reuses the `m` table for another phase grid over the same spatial grid.
    pub fn with_phase(&self, phase: PhaseGrid) -> Result<Self> {
        if phase.grid != self.phase.grid {
            return Err(Error::Resolution("grid mismatch".into()));
        }
        for eta in phase.etas() {
            check_phase_resolution(&phase, &eta, &self.params)?;
        }
        Ok(Self { phase, params: self.params, m_inv_sqrt: self.m_inv_sqrt.clone() })
    }

    fn window(&self, eta: &[f64]) -> Window {
        let g = &self.phase.grid;
        let w = widths(eta, &self.params);
        let d = g.dim();
        // per-axis modes and 1-D Gaussian factors
        let axes: Vec<Vec<(usize, f64)>> = (0..d)
            .map(|a| {
                let dk = TAU / g.lengths[a];
                let lo = ((eta[a] - WINDOW / w[a]) / dk).ceil() as i64;
                let hi = ((eta[a] + WINDOW / w[a]) / dk).floor() as i64;
                (lo..=hi)
                    .map(|k| (g.bin(a, k), (-0.5 * (w[a] * (k as f64 * dk - eta[a])).powi(2)).exp()))
                    .collect()
            })
            .collect();
        let mut out: Window = vec![(0, 1.0)];
        for (a, ax) in axes.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * ax.len());
            for &(flat, v) in &out {
                for &(bin, f) in ax {
                    next.push((flat * g.shape[a] + bin, v * f));
                }
            }
            out = next;
        }
        out.into_iter().map(|(k, v)| (k, v * self.m_inv_sqrt[k])).collect()
    }

    /// Base-grid bin that the spectral index `k` folds onto.
    fn fold(&self, k: usize) -> usize {
        let g = &self.phase.grid;
        let b = &self.phase.base;
        let idx: Vec<usize> = g.unravel(k).iter().enumerate().map(|(a, &i)| b.bin(a, g.mode(a, i))).collect();
        b.ravel(&idx)
    }

    fn forward_eta(&self, uhat: &[Complex64], win: &Window) -> Vec<Complex64> {
        let b = &self.phase.base;
        let mut buf = vec![ZERO; b.len()];
        for &(k, v) in win {
            buf[self.fold(k)] += uhat[k] * v;
        }
        fftn(&mut buf, &b.shape, true);
        let c = TAU.powf(b.dim() as f64 / 2.0) / b.volume();
        buf.iter_mut().for_each(|x| *x *= c);
        buf
    }

    fn adjoint_eta(&self, v: &[Complex64], win: &Window, out: &mut [Complex64]) {
        let b = &self.phase.base;
        let mut buf = v.to_vec();
        fftn(&mut buf, &b.shape, false);
        let d = b.dim() as f64;
        let c = TAU.powf(d / 2.0) * self.phase.cell() / TAU.powf(d);
        for &(k, f) in win {
            out[k] += buf[self.fold(k)] * (f * c);
        }
    }

    /// `(B u)(y_j, eta) = <phi_{(y_j, eta)}, u>` on the whole phase grid.
    pub fn forward(&self, u: &GridFunction) -> Result<PhaseField> {
        self.check(u)?;
        let uhat = u.spectrum();
        let etas = self.phase.etas();
        let values = etas.par_iter().map(|eta| self.forward_eta(&uhat, &self.window(eta))).collect();
        Ok(PhaseField { etas, values })
    }

    /// `B^* v = sum_rho v(rho) phi_rho cell / (2 pi)^d`.
    pub fn adjoint(&self, field: &PhaseField) -> Result<GridFunction> {
        let g = &self.phase.grid;
        let hat = field
            .etas
            .par_iter()
            .zip(&field.values)
            .fold(
                || vec![ZERO; g.len()],
                |mut acc, (eta, v)| {
                    self.adjoint_eta(v, &self.window(eta), &mut acc);
                    acc
                },
            )
            .reduce(|| vec![ZERO; g.len()], add_into);
        Ok(GridFunction::from_spectrum(g, &hat))
    }

    /// `Op(a) u = B^* (a B u)`, streamed over frequency points.
    pub fn apply_symbol<F>(&self, u: &GridFunction, a: F) -> Result<GridFunction>
    where
        F: Fn(&[f64], &[f64]) -> Complex64 + Sync,
    {
        self.check(u)?;
        let g = &self.phase.grid;
        let b = &self.phase.base;
        let uhat = u.spectrum();
        let points: Vec<Vec<f64>> = (0..b.len()).map(|j| b.point(j)).collect();
        let hat = self
            .phase
            .etas()
            .par_iter()
            .fold(
                || vec![ZERO; g.len()],
                |mut acc, eta| {
                    let win = self.window(eta);
                    let mut v = self.forward_eta(&uhat, &win);
                    for (vj, y) in v.iter_mut().zip(&points) {
                        *vj *= a(y, eta);
                    }
                    self.adjoint_eta(&v, &win, &mut acc);
                    acc
                },
            )
            .reduce(|| vec![ZERO; g.len()], add_into);
        Ok(GridFunction::from_spectrum(g, &hat))
    }

    /// `sum |w(rho) (B u)(rho)|^2 cell / (2 pi)^d`.
    pub fn weighted_norm_sq<F>(&self, u: &GridFunction, w: F) -> Result<f64>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Sync,
    {
        self.check(u)?;
        let uhat = u.spectrum();
        let b = &self.phase.base;
        let points: Vec<Vec<f64>> = (0..b.len()).map(|j| b.point(j)).collect();
        let d = b.dim() as f64;
        let s: f64 = self
            .phase
            .etas()
            .par_iter()
            .map(|eta| {
                let v = self.forward_eta(&uhat, &self.window(eta));
                v.iter().zip(&points).map(|(x, y)| (w(y, eta) * x.norm()).powi(2)).sum::<f64>()
            })
            .sum();
        Ok(s * self.phase.cell() / TAU.powf(d))
    }

    /// Fourier multiplier of `B^* B`: `sum_eta phi_eta(kappa_k)^2 s^d`.
    pub fn multiplier(&self) -> Vec<f64> {
        let g = &self.phase.grid;
        // frequency cell s^d
        let c = self.phase.cell() * self.phase.base.len() as f64 / g.volume();
        let mut out = vec![0.0; g.len()];
        for eta in self.phase.etas() {
            for (k, v) in self.window(&eta) {
                out[k] += v * v * c;
            }
        }
        out
    }

    /// `(B u)(rho)` at arbitrary phase points by direct summation over modes.
    pub fn forward_points(&self, u: &GridFunction, rhos: &[PhasePoint]) -> Result<Vec<Complex64>> {
        self.check(u)?;
        let g = &self.phase.grid;
        let uhat = u.spectrum();
        let c = TAU.powf(g.dim() as f64 / 2.0) / g.volume();
        rhos.par_iter()
            .map(|rho| {
                if rho.n() != g.n() {
                    return Err(Error::Dimension { expected: g.n(), got: rho.n() });
                }
                let (y, eta) = split_rho(rho);
                check_resolution(g, &eta, &self.params)?;
                Ok(self
                    .window(&eta)
                    .iter()
                    .map(|&(k, v)| {
                        let ph: f64 = g.kappa(k).iter().zip(&y).map(|(a, b)| a * b).sum();
                        uhat[k] * Complex64::from_polar(v, ph)
                    })
                    .sum::<Complex64>()
                    * c)
            })
            .collect()
    }

    /// `||phi_eta||^2` on the torus by discrete Parseval.
    pub fn torus_packet_norm_sq(&self, eta: &[f64]) -> f64 {
        let g = &self.phase.grid;
        let c = TAU.powf(g.dim() as f64) / g.volume();
        self.window(eta).iter().map(|(_, v)| v * v).sum::<f64>() * c
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if u.grid != self.phase.grid {
            return Err(Error::Resolution("grid mismatch".into()));
        }
        Ok(())
    }
}

fn add_into(mut a: Vec<Complex64>, b: Vec<Complex64>) -> Vec<Complex64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

/// `||B^* B u - u|| / ||u||`.
pub fn resolution_residual(b: &Bargmann, u: &GridFunction) -> Result<f64> {
    let back = b.apply_symbol(u, |_, _| Complex64::new(1.0, 0.0))?;
    Ok(back.sub(u)?.norm() / u.norm())
}

/// Trapezoid weight of a lattice point in the box `|v_i| <= band`: 1/2 per coordinate on a face.
fn band_weight(v: &[f64], band: f64) -> f64 {
    v.iter()
        .map(|c| {
            let r = c.abs() - band;
            if r > 1e-9 {
                0.0
            } else if r.abs() <= 1e-9 {
                0.5
            } else {
                1.0
            }
        })
        .product()
}

/// `(sum over the band of ||phi_rho||^2 cell / (2 pi)^d, number of modes in the band)`
/// for the box `|eta_i| <= band`, both sides counted with trapezoid weights on its faces.
pub fn trace_check(b: &Bargmann, band: f64) -> (f64, f64) {
    let g = &b.phase.grid;
    let d = g.dim() as f64;
    let cells = b.phase.cell() * b.phase.base.len() as f64 / TAU.powf(d);
    let sum: f64 = b
        .phase
        .etas()
        .iter()
        .map(|e| band_weight(e, band) * b.torus_packet_norm_sq(e) * cells)
        .sum();
    let modes = (0..g.len()).map(|k| band_weight(&g.kappa(k), band)).sum();
    (sum, modes)
}

/// `(|eta|, defect, Delta)` for `||phi_rho||^2` along the `xi_1` and `omega` axes.
pub fn norm_defect_sweep(p: &MetricParams, dim: usize, exponents: std::ops::RangeInclusive<i32>) -> Vec<(f64, f64, f64, &'static str)> {
    exponents
        .flat_map(|k| {
            let e = 2f64.powi(k);
            let mut along_xi = vec![0.0; dim];
            along_xi[0] = e;
            let mut along_om = vec![0.0; dim];
            along_om[dim - 1] = e;
            [(along_xi, "xi"), (along_om, "omega")]
                .into_iter()
                .map(move |(eta, lab)| (e, eta, lab))
        })
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(e, eta, lab)| {
            let defect = (packet_norm_sq(&eta, p) - 1.0).abs();
            (e, defect, crate::bracket_metric::distortion_at(e, p), lab)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_roundtrip_and_spectrum() {
        let g = TorusGrid::new(vec![8, 6], vec![2.0, 3.0]).unwrap();
        let u = band_limited_random(&g, 2, 4).unwrap();
        let back = GridFunction::from_spectrum(&g, &u.spectrum());
        assert!(back.sub(&u).unwrap().sup() < 1e-13);
        // brute-force coefficient at one mode
        let k = g.ravel(&[1, 5]);
        let kap = g.kappa(k);
        let brute: Complex64 = (0..g.len())
            .map(|j| {
                let y = g.point(j);
                u.data[j] * Complex64::from_polar(g.cell(), -(kap[0] * y[0] + kap[1] * y[1]))
            })
            .sum();
        assert!((brute - u.spectrum()[k]).norm() < 1e-12);
    }

    #[test]
    fn charts() {
        let g = TorusGrid::new(vec![64], vec![1.0]).unwrap();
        let one = ChartAtlas::single(&g);
        let u = band_limited_random(&g, 5, 1).unwrap();
        assert_eq!(one.decompose(&u).unwrap()[0], u);
        let two = ChartAtlas::circle_two_chart(64, 1.0).unwrap();
        assert!(two.partition_defect() <= 1e-12);
        let c = GridFunction::from_fn(&two.grid, |_| Complex64::new(1.0, 0.0));
        let rc = two.recompose(&two.decompose(&c).unwrap()).unwrap();
        assert!(rc.sub(&c).unwrap().sup() <= 1e-12);
        let r = two.recompose(&two.decompose(&u).unwrap()).unwrap();
        assert!(r.sub(&u).unwrap().sup() <= 1e-12);
        let other = TorusGrid::new(vec![32], vec![1.0]).unwrap();
        assert!(two.decompose(&GridFunction::zeros(&other)).is_err());
    }

    #[test]
    fn gauss_hermite_m_matches_constant_metric() {
        let p = MetricParams::new(0.05, 0.5, 0.5).unwrap();
        let exact = m_constant(2, &p);
        assert!((m_weight(&[0.1, -0.2], &p) / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn m_weight_against_dense_trapezoid() {
        let p = MetricParams::new(0.5, 0.5, 0.25).unwrap();
        let ep = [9.0, -5.0];
        let h = 0.02;
        let mut acc = 0.0;
        for i in -2500..=2500 {
            for j in -2500..=2500 {
                let eta = [ep[0] + i as f64 * h, ep[1] + j as f64 * h];
                acc += (-gaussian_exponent(&eta, &ep, &widths(&eta, &p))).exp();
            }
        }
        acc *= h * h;
        assert!((m_weight(&ep, &p) / acc - 1.0).abs() < 1e-4, "{} {}", m_weight(&ep, &p), acc);
    }

    #[test]
    fn constant_metric_packets_agree() {
        let p = MetricParams::new(0.125, 0.5, 0.5).unwrap();
        let g = TorusGrid::cube(2, 256, TAU).unwrap();
        let rho = PhasePoint::new(vec![1.0], 2.0, vec![0.0], 0.0).unwrap();
        let ex = make_packet(&rho, PacketKind::Exact, &p, &g).unwrap();
        let ga = make_packet(&rho, PacketKind::Gaussian, &p, &g).unwrap();
        assert!(ex.samples.sub(&ga.samples).unwrap().norm() < 1e-8);
        assert!((ga.samples.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = MetricParams::new(0.5, 0.5, 0.0).unwrap();
        let g = TorusGrid::cube(2, 16, TAU).unwrap();
        let rho = PhasePoint::new(vec![0.0], 0.0, vec![0.0], 0.0).unwrap();
        assert!(matches!(make_packet(&rho, PacketKind::Exact, &p, &g), Err(Error::Resolution(_))));
    }

    #[test]
    fn transform_of_zero_and_plane_wave() {
        let p = MetricParams::new(0.5, 0.5, 0.0).unwrap();
        let g = TorusGrid::cube(2, 128, TAU).unwrap();
        let ph = PhaseGrid::new(&g, 64, 1, 6.0).unwrap();
        let b = Bargmann::new(ph, &p).unwrap();
        let zero = GridFunction::zeros(&g);
        assert!(b.forward(&zero).unwrap().values.iter().flatten().all(|v| v.norm() == 0.0));
        assert!(b.adjoint(&b.forward(&zero).unwrap()).unwrap().sup() == 0.0);
        let w0 = 3.0;
        let wave = GridFunction::from_fn(&g, |y| Complex64::from_polar(1.0, w0 * y[1]));
        let rhos: Vec<PhasePoint> = (-4..=10)
            .map(|j| PhasePoint::new(vec![0.5], 1.0, vec![0.0], j as f64 * 0.5).unwrap())
            .collect();
        let v = b.forward_points(&wave, &rhos).unwrap();
        let peak = v.iter().map(|c| c.norm()).enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(rhos[peak].omega, w0);
        for (rho, val) in rhos.iter().zip(&v) {
            let oracle = TAU * (-(0.5 * (rho.omega - w0)).powi(2) / 2.0).exp() / m_weight(&[0.0, w0], &p).sqrt();
            assert!((val.norm() - oracle).abs() < 1e-10 * oracle.max(1.0), "{} {}", val.norm(), oracle);
        }
    }

    #[test]
    fn multiplier_matches_streamed_identity() {
        let p = MetricParams::new(0.5, 0.5, 0.0).unwrap();
        let g = TorusGrid::cube(2, 128, TAU).unwrap();
        let ph = PhaseGrid::new(&g, 64, 2, 14.0).unwrap();
        assert!(Bargmann::new(PhaseGrid::new(&g, 16, 2, 14.0).unwrap(), &p).is_err());
        let b = Bargmann::new(ph, &p).unwrap();
        let u = band_limited_random(&g, 3, 9).unwrap();
        let via_field = b.adjoint(&b.forward(&u).unwrap()).unwrap();
        let streamed = b.apply_symbol(&u, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        assert!(via_field.sub(&streamed).unwrap().norm() < 1e-12);
        let mult = b.multiplier();
        let hat: Vec<Complex64> = u.spectrum().iter().zip(&mult).map(|(c, m)| c * m).collect();
        let direct = GridFunction::from_spectrum(&g, &hat);
        assert!(direct.sub(&streamed).unwrap().norm() < 1e-12);
    }
}
