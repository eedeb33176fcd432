//! Escape functions over linear hyperbolic models.
//!
//! A covector `Xi = (xi, omega)` over a flow box splits as
//! `Xi_u e_u + Xi_s e_s + omega A` with `A = dz`. The lifted flow of a linear
//! model scales the components by `e^{lambda t}`, `e^{-lambda t}` and `1`.
//! The weight `W` grows along the stable dual direction and decays along the
//! unstable one, so it decreases along the lifted flow away from the trapped
//! set `{Xi_* = 0}`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::bracket_metric::{jbracket, MetricParams};
use crate::error::{Error, Result};
use crate::numerics::{dyadic, loglog_slope, ols, seeded_rng, smooth_step};

/// Stable/unstable dual directions of a linear model with `n = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSplitting {
    pub e_u: [f64; 2],
    pub e_s: [f64; 2],
    /// `A = dz` in flow-box coordinates.
    pub anosov_form: [f64; 3],
    pub lambda: f64,
    pub lambda_max: f64,
}

/// Components `(Xi_u, Xi_s, omega)` of a covector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualCoords {
    pub u: f64,
    pub s: f64,
    pub omega: f64,
}

impl DualCoords {
    pub fn new(u: f64, s: f64, omega: f64) -> Self {
        Self { u, s, omega }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { u: a * self.u, s: a * self.s, omega: a * self.omega }
    }
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let r = v[0].hypot(v[1]);
    let sgn = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) { -1.0 } else { 1.0 };
    [sgn * v[0] / r, sgn * v[1] / r]
}

impl DualSplitting {
    /// Splitting for the covector action `f^T` of a hyperbolic integer matrix.
    ///
    /// Unit eigencovectors are normalized to a positive first coordinate.
    pub fn from_matrix(f: [[i64; 2]; 2]) -> Result<Self> {
        let (a, b, c, d) = (f[0][0] as f64, f[0][1] as f64, f[1][0] as f64, f[1][1] as f64);
        let tr = a + d;
        let det = a * d - b * c;
        if (det.abs() - 1.0).abs() > 0.0 || tr.abs() <= 2.0 {
            return Err(Error::InvalidParams(format!(
                "matrix {f:?} is not hyperbolic with |det| = 1"
            )));
        }
        let disc = (tr * tr - 4.0 * det).sqrt();
        let (mu_big, mu_small) = if tr > 0.0 {
            ((tr + disc) / 2.0, (tr - disc) / 2.0)
        } else {
            ((tr - disc) / 2.0, (tr + disc) / 2.0)
        };
        // eigenvectors of f^T = [[a, c], [b, d]]
        let eig = |mu: f64| -> [f64; 2] {
            if c.abs() > 1e-300 {
                unit([c, mu - a])
            } else {
                unit([mu - d, b])
            }
        };
        let lambda = mu_big.abs().ln();
        Ok(Self {
            e_u: eig(mu_big),
            e_s: eig(mu_small),
            anosov_form: [0.0, 0.0, 1.0],
            lambda,
            lambda_max: lambda,
        })
    }

    pub fn cat_map() -> Self {
        Self::from_matrix([[2, 1], [1, 1]]).expect("cat map is hyperbolic")
    }

    /// Splits a transverse covector `xi` into `(Xi_u, Xi_s)`.
    pub fn decompose(&self, xi: [f64; 2], omega: f64) -> DualCoords {
        let det = self.e_u[0] * self.e_s[1] - self.e_u[1] * self.e_s[0];
        let u = (xi[0] * self.e_s[1] - xi[1] * self.e_s[0]) / det;
        let s = (self.e_u[0] * xi[1] - self.e_u[1] * xi[0]) / det;
        DualCoords { u, s, omega }
    }

    pub fn recompose(&self, c: &DualCoords) -> ([f64; 2], f64) {
        (
            [c.u * self.e_u[0] + c.s * self.e_s[0], c.u * self.e_u[1] + c.s * self.e_s[1]],
            c.omega,
        )
    }

    /// Euclidean `|Xi_*|`, the transverse part.
    pub fn xi_star_norm(&self, c: &DualCoords) -> f64 {
        let (xi, _) = self.recompose(c);
        xi[0].hypot(xi[1])
    }

    /// Euclidean `|eta|` of the full covector.
    pub fn eta_norm(&self, c: &DualCoords) -> f64 {
        self.xi_star_norm(c).hypot(c.omega)
    }

    /// The lifted linear flow at time `t`.
    pub fn flow(&self, c: &DualCoords, t: f64) -> DualCoords {
        DualCoords {
            u: c.u * (self.lambda * t).exp(),
            s: c.s * (-self.lambda * t).exp(),
            omega: c.omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// `<h ||Xi_s||_g>^{R_s} / <h ||Xi_u||_g>^{R_u}`
    Lemma42,
    /// `<||Xi_*||_g>^{(r / (1 - alpha_perp)) a(Xi_*)}` with time average over `[-t_avg, t_avg]`
    W2 { r: f64, t_avg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeConfig {
    pub r_u: f64,
    pub r_s: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub h0: f64,
    pub variant: Variant,
}

impl EscapeConfig {
    pub fn new(r_u: f64, r_s: f64, gamma: f64, gamma_prime: f64, h0: f64, variant: Variant) -> Result<Self> {
        if !(r_u >= 0.0 && r_s >= 0.0) {
            return Err(Error::InvalidParams("R_u and R_s must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParams(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if !(0.0..=gamma).contains(&gamma_prime) {
            return Err(Error::InvalidParams(format!(
                "gamma_prime must lie in [0, gamma], got {gamma_prime}"
            )));
        }
        if !(h0 > 0.0 && h0 <= 1.0) {
            return Err(Error::InvalidParams(format!("h0 must lie in (0, 1], got {h0}")));
        }
        if let Variant::W2 { t_avg, .. } = variant {
            if !(t_avg > 0.0) {
                return Err(Error::InvalidParams("t_avg must be positive".into()));
            }
        }
        Ok(Self { r_u, r_s, gamma, gamma_prime, h0, variant })
    }

    /// The `W_lemma42` weight with `R_u = R_s = r`.
    pub fn symmetric(r: f64, gamma: f64) -> Self {
        Self::new(r, r, gamma, 0.0, 1.0, Variant::Lemma42).expect("valid escape config")
    }

    /// Decay rate `lambda (1-gamma)(1-alpha_perp) min(R_s, R_u)`.
    pub fn decay_rate(&self, split: &DualSplitting, p: &MetricParams) -> f64 {
        split.lambda * (1.0 - self.gamma) * (1.0 - p.alpha_perp) * self.r_s.min(self.r_u)
    }

    /// Lower-bound rate `lambda_max (1-gamma)(1-alpha_perp)(R_s + R_u)`.
    pub fn lower_rate(&self, split: &DualSplitting, p: &MetricParams) -> f64 {
        split.lambda_max * (1.0 - self.gamma) * (1.0 - p.alpha_perp) * (self.r_s + self.r_u)
    }
}

/// `h0 <||Xi_*||_g>^{-gamma}` with `gamma` chosen by the caller.
pub fn h_perp(c: &DualCoords, split: &DualSplitting, h0: f64, gamma: f64, p: &MetricParams) -> f64 {
    let dp = p.delta_perp(split.eta_norm(c));
    h0 * jbracket(dp * split.xi_star_norm(c)).powf(-gamma)
}

pub fn h_gamma_perp(c: &DualCoords, split: &DualSplitting, cfg: &EscapeConfig, p: &MetricParams) -> f64 {
    h_perp(c, split, cfg.h0, cfg.gamma, p)
}

/// Projective angle of `[Xi_*]` measured from `E*_u` in dual coordinates, in `[0, pi/2]`.
pub fn projective_angle(c: &DualCoords) -> f64 {
    c.s.abs().atan2(c.u.abs())
}

/// Smoothed step on the projective circle: `-1` near `[E*_u]`, `+1` near
/// `[E*_s]`, switching across a band of width 0.2 rad around `pi/4`.
pub fn a0(theta: f64) -> f64 {
    const WIDTH: f64 = 0.2;
    let start = std::f64::consts::FRAC_PI_4 - WIDTH / 2.0;
    -1.0 + 2.0 * smooth_step((theta - start) / WIDTH)
}

/// Time average of `a0` along the projective flow, 64-node trapezoid on `[-T, T]`.
pub fn a_average(c: &DualCoords, split: &DualSplitting, t_avg: f64) -> f64 {
    if c.u == 0.0 && c.s == 0.0 {
        return 0.0;
    }
    const NODES: usize = 64;
    let h = 2.0 * t_avg / (NODES - 1) as f64;
    let (mut acc, mut total) = (0.0, 0.0);
    for k in 0..NODES {
        let t = -t_avg + h * k as f64;
        let w = if k == 0 || k == NODES - 1 { 0.5 } else { 1.0 };
        acc += w * a0(projective_angle(&split.flow(c, t)));
        total += w;
    }
    // an average of values in [-1, 1]; the clamp only removes rounding
    (acc / total).clamp(-1.0, 1.0)
}

/// The escape weight `W(rho)` of the configured variant.
pub fn weight(c: &DualCoords, split: &DualSplitting, cfg: &EscapeConfig, p: &MetricParams) -> f64 {
    log_weight(c, split, cfg, p).exp()
}

/// `log W`, evaluated without forming the (possibly huge) ratio.
pub fn log_weight(c: &DualCoords, split: &DualSplitting, cfg: &EscapeConfig, p: &MetricParams) -> f64 {
    let dp = p.delta_perp(split.eta_norm(c));
    match cfg.variant {
        Variant::Lemma42 => {
            let h = h_gamma_perp(c, split, cfg, p);
            cfg.r_s * jbracket(h * dp * c.s.abs()).ln() - cfg.r_u * jbracket(h * dp * c.u.abs()).ln()
        }
        Variant::W2 { r, t_avg } => {
            let a = a_average(c, split, t_avg);
            (r / (1.0 - p.alpha_perp)) * a * jbracket(dp * split.xi_star_norm(c)).ln()
        }
    }
}

/// `W(phi~^t rho) / W(rho)`.
pub fn decay_ratio(c: &DualCoords, t: f64, split: &DualSplitting, cfg: &EscapeConfig, p: &MetricParams) -> f64 {
    (log_weight(&split.flow(c, t), split, cfg, p) - log_weight(c, split, cfg, p)).exp()
}

/// Least-squares slope of `log W(alpha Xi)` against `log alpha` over `alpha in 2^4..2^12`.
pub fn order_estimate(direction: &DualCoords, split: &DualSplitting, cfg: &EscapeConfig, p: &MetricParams) -> Result<f64> {
    if direction.u == 0.0 && direction.s == 0.0 && direction.omega == 0.0 {
        return Err(Error::InvalidParams("direction must be nonzero".into()));
    }
    let alphas = dyadic(4, 12);
    let w: Vec<f64> = alphas
        .iter()
        .map(|&a| weight(&direction.scale(a), split, cfg, p))
        .collect();
    loglog_slope(&alphas, &w)
}

/// Orders predicted for `W_lemma42` (or `W2`) along the model directions.
pub fn predicted_order(kind: DirectionKind, cfg: &EscapeConfig, p: &MetricParams) -> f64 {
    match cfg.variant {
        Variant::Lemma42 => {
            let k = (1.0 - cfg.gamma) * (1.0 - p.alpha_perp);
            match kind {
                DirectionKind::Flow => 0.0,
                DirectionKind::Unstable => -k * cfg.r_u,
                DirectionKind::Stable => k * cfg.r_s,
                DirectionKind::Transverse => k * (cfg.r_s - cfg.r_u),
            }
        }
        Variant::W2 { r, .. } => match kind {
            DirectionKind::Flow => 0.0,
            DirectionKind::Unstable => -r,
            DirectionKind::Stable => r,
            DirectionKind::Transverse => f64::NAN,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    Flow,
    Unstable,
    Stable,
    Transverse,
}

impl DirectionKind {
    pub fn representative(&self) -> DualCoords {
        match self {
            Self::Flow => DualCoords::new(0.0, 0.0, 1.0),
            Self::Unstable => DualCoords::new(1.0, 0.0, 0.0),
            Self::Stable => DualCoords::new(0.0, 1.0, 0.0),
            Self::Transverse => DualCoords::new(1.0, 1.0, 0.0),
        }
    }
}

/// Fitted decay exponent of `W(phi~^t rho)/W(rho)` over `t in [0, t_max]`.
pub fn fitted_decay_rate(c: &DualCoords, t_max: f64, split: &DualSplitting, cfg: &EscapeConfig, p: &MetricParams) -> Result<f64> {
    let ts: Vec<f64> = (0..=32).map(|k| t_max * k as f64 / 32.0).collect();
    let logs: Vec<f64> = ts.iter().map(|&t| decay_ratio(c, t, split, cfg, p).ln()).collect();
    Ok(-ols(&ts, &logs)?.0)
}

/// Smallest `log C` making `ratio >= C^{-1} e^{-Lambda' t}` hold over samples.
///
/// Samples have `|Xi_u|, |Xi_s| <= 2^top` (log-uniform magnitudes, a quarter
/// of them pure flow-direction-free), `|omega| <= 2^top` and `t in [0, 12]`.
pub fn lower_bound_log_c(split: &DualSplitting, cfg: &EscapeConfig, p: &MetricParams, top: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let lp = cfg.lower_rate(split, p);
    let ts: Vec<f64> = (0..=48).map(|k| 12.0 * k as f64 / 48.0).collect();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let mag = |rng: &mut rand_chacha::ChaCha8Rng| 2f64.powf(rng.random_range(0.0..top));
        let c = DualCoords {
            u: mag(&mut rng) * if rng.random::<bool>() { 1.0 } else { -1.0 },
            s: mag(&mut rng) * if rng.random::<bool>() { 1.0 } else { -1.0 },
            omega: if rng.random::<f64>() < 0.25 { 0.0 } else { mag(&mut rng) },
        };
        let base = log_weight(&c, split, cfg, p);
        for &t in &ts {
            let r = log_weight(&split.flow(&c, t), split, cfg, p) - base;
            worst = worst.max(-lp * t - r);
        }
    }
    worst
}

/// Temperate-property samples `(W(rho')/W(rho), <h_{gamma'}(rho) ||rho'-rho||_g>)`.
pub fn temperate_samples(split: &DualSplitting, cfg: &EscapeConfig, p: &MetricParams, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let e = 2f64.powf(rng.random_range(0.0..16.0));
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let ph = rng.random_range(-1.0..1.0f64);
            let c = DualCoords {
                u: e * th.cos() * (1.0 - ph.abs()),
                s: e * th.sin() * (1.0 - ph.abs()),
                omega: e * ph,
            };
            let (xi, om) = split.recompose(&c);
            let eta = split.eta_norm(&c);
            let dp = p.delta_perp(eta);
            let dz = p.delta_par(eta);
            // frequency displacement with g-length `dist`
            let dist = 10f64.powf(rng.random_range(-2.0..3.0));
            let dir: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let g_len = ((dp * dir[0]).powi(2) + (dp * dir[1]).powi(2) + (dz * dir[2]).powi(2)).sqrt();
            let k = dist / g_len;
            let moved = split.decompose([xi[0] + k * dir[0], xi[1] + k * dir[1]], om + k * dir[2]);
            let ratio = (log_weight(&moved, split, cfg, p) - log_weight(&c, split, cfg, p)).exp();
            let h = h_perp(&c, split, cfg.h0, cfg.gamma_prime, p);
            (ratio, jbracket(h * dist))
        })
        .collect()
}

/// Writes `(xi_u, xi_s, omega, W)` rows.
pub fn write_weight_csv<W: Write>(out: &mut W, rows: &[(DualCoords, f64)]) -> Result<()> {
    writeln!(out, "xi_u,xi_s,omega,W")?;
    for (c, w) in rows {
        writeln!(out, "{:e},{:e},{:e},{:e}", c.u, c.s, c.omega, w)?;
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
    fn cat_map_splitting() {
        let s = DualSplitting::cat_map();
        assert!((s.lambda - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-15);
        assert!((s.lambda - 0.9624236501192069).abs() < 1e-12);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let r = (1.0 + phi * phi).sqrt();
        assert!((s.e_u[0] - phi / r).abs() < 1e-14 && (s.e_u[1] - 1.0 / r).abs() < 1e-14);
        assert!(s.e_s[0] > 0.0 && (s.e_s[0] * s.e_u[0] + s.e_s[1] * s.e_u[1]).abs() < 1e-14);
    }

    #[test]
    fn decompose_roundtrip() {
        let s = DualSplitting::from_matrix([[3, 2], [1, 1]]).unwrap();
        for xi in [[1.0, 0.0], [0.3, -7.0], [1e6, 3.0]] {
            let c = s.decompose(xi, 2.0);
            let (back, om) = s.recompose(&c);
            assert!((back[0] - xi[0]).abs() <= 1e-12 * (1.0 + xi[0].abs()));
            assert!((back[1] - xi[1]).abs() <= 1e-12 * (1.0 + xi[1].abs()));
            assert_eq!(om, 2.0);
        }
        assert!(DualSplitting::from_matrix([[1, 1], [0, 1]]).is_err());
    }

    #[test]
    fn h_examples() {
        let s = DualSplitting::cat_map();
        let p = metric();
        let cfg = EscapeConfig::new(1.0, 1.0, 0.5, 0.0, 1.0, Variant::Lemma42).unwrap();
        let on = DualCoords::new(0.0, 0.0, 50.0);
        assert_eq!(h_gamma_perp(&on, &s, &cfg, &p), 1.0);
        let zero_gamma = EscapeConfig { gamma: 0.0, ..cfg };
        assert_eq!(h_gamma_perp(&DualCoords::new(40.0, 3.0, 2.0), &s, &zero_gamma, &p), 1.0);
        // |Xi| = 3 on E*_u with omega = 0: delta = 3^{-1/2}, ||Xi_*||_g = sqrt(3)
        let c = DualCoords::new(3.0, 0.0, 0.0);
        let h = h_gamma_perp(&c, &s, &cfg, &p);
        assert!((p.delta_perp(s.eta_norm(&c)) * s.xi_star_norm(&c) - 3f64.sqrt()).abs() < 1e-12);
        assert!((h - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trapped_set_weight_is_one() {
        let s = DualSplitting::cat_map();
        let cfg = EscapeConfig::symmetric(8.0, 0.5);
        for om in [0.0, 3.0, 1e6] {
            let c = DualCoords::new(0.0, 0.0, om);
            assert_eq!(weight(&c, &s, &cfg, &metric()), 1.0);
            assert_eq!(decay_ratio(&c, 5.0, &s, &cfg, &metric()), 1.0);
        }
    }

    #[test]
    fn unstable_weight_decreases() {
        let s = DualSplitting::cat_map();
        let cfg = EscapeConfig::symmetric(2.0, 0.0);
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let w = weight(&DualCoords::new(2f64.powi(k), 0.0, 0.0), &s, &cfg, &metric());
            assert!(w < last);
            last = w;
        }
    }

    #[test]
    fn stable_order_slope() {
        let s = DualSplitting::cat_map();
        let p = metric();
        let cfg = EscapeConfig::symmetric(1.0, 0.0);
        let r = order_estimate(&DirectionKind::Stable.representative(), &s, &cfg, &p).unwrap();
        assert!((r - 0.5).abs() < 0.03, "{r}");
    }

    #[test]
    fn a0_profile() {
        assert_eq!(a0(0.0), -1.0);
        assert_eq!(a0(std::f64::consts::FRAC_PI_2), 1.0);
        assert!(a0(std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(EscapeConfig::new(1.0, 1.0, 1.0, 0.0, 1.0, Variant::Lemma42).is_err());
        assert!(EscapeConfig::new(1.0, 1.0, 0.3, 0.5, 1.0, Variant::Lemma42).is_err());
        assert!(EscapeConfig::new(1.0, 1.0, 0.3, 0.1, 2.0, Variant::Lemma42).is_err());
        assert!(EscapeConfig::new(1.0, 1.0, 0.3, 0.1, 1.0, Variant::W2 { r: 1.0, t_avg: 0.0 }).is_err());
    }
}
