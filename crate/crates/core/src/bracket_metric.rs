//! Japanese bracket arithmetic and the anisotropic phase-space metric `g`.
//!
//! Phase points are `((x, z), (xi, omega))` in flow-box coordinates: `x` and
//! `xi` are transverse (length `n`), `z` and `omega` run along the flow. The
//! metric shrinks transverse position scales like `|eta|^(-alpha_perp)` and
//! flow scales like `|eta|^(-alpha_par)`, both capped by `delta0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::seeded_rng;

/// `<s> = (1 + s^2)^(1/2)`.
#[inline]
pub fn jbracket(s: f64) -> f64 {
    s.hypot(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub delta0: f64,
    pub alpha_perp: f64,
    pub alpha_par: f64,
}

impl MetricParams {
    pub fn new(delta0: f64, alpha_perp: f64, alpha_par: f64) -> Result<Self> {
        if !(delta0 > 0.0 && delta0.is_finite()) {
            return Err(Error::InvalidParams(format!("delta0 must be positive, got {delta0}")));
        }
        if !(0.5..1.0).contains(&alpha_perp) {
            return Err(Error::InvalidParams(format!(
                "alpha_perp must lie in [1/2, 1), got {alpha_perp}"
            )));
        }
        if !(0.0..=alpha_perp).contains(&alpha_par) {
            return Err(Error::InvalidParams(format!(
                "alpha_par must lie in [0, alpha_perp], got {alpha_par}"
            )));
        }
        Ok(Self { delta0, alpha_perp, alpha_par })
    }

    pub fn delta_perp(&self, eta_norm: f64) -> f64 {
        capped_power(self.delta0, eta_norm, self.alpha_perp)
    }

    pub fn delta_par(&self, eta_norm: f64) -> f64 {
        capped_power(self.delta0, eta_norm, self.alpha_par)
    }
}

fn capped_power(delta0: f64, eta_norm: f64, alpha: f64) -> f64 {
    if eta_norm <= 0.0 {
        delta0
    } else {
        delta0.min(eta_norm.powf(-alpha))
    }
}

/// A point `((x, z), (xi, omega))` of phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub z: f64,
    pub xi: Vec<f64>,
    pub omega: f64,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, z: f64, xi: Vec<f64>, omega: f64) -> Result<Self> {
        if x.len() != xi.len() {
            return Err(Error::Dimension { expected: x.len(), got: xi.len() });
        }
        Ok(Self { x, z, xi, omega })
    }

    /// The point with all coordinates zero in dimension `n`.
    pub fn origin(n: usize) -> Self {
        Self { x: vec![0.0; n], z: 0.0, xi: vec![0.0; n], omega: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Euclidean norm of `(xi, omega)`.
    pub fn eta_norm(&self) -> f64 {
        (self.xi.iter().map(|v| v * v).sum::<f64>() + self.omega * self.omega).sqrt()
    }

    /// Coordinates flattened as `(x, z, xi, omega)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.n() + 2);
        v.extend_from_slice(&self.x);
        v.push(self.z);
        v.extend_from_slice(&self.xi);
        v.push(self.omega);
        v
    }

    pub fn from_slice(n: usize, v: &[f64]) -> Result<Self> {
        if v.len() != 2 * n + 2 {
            return Err(Error::Dimension { expected: 2 * n + 2, got: v.len() });
        }
        Ok(Self {
            x: v[..n].to_vec(),
            z: v[n],
            xi: v[n + 1..2 * n + 1].to_vec(),
            omega: v[2 * n + 1],
        })
    }

    /// `self + v` with `v` laid out as in [`PhasePoint::to_vec`].
    pub fn offset(&self, v: &[f64]) -> Result<Self> {
        let n = self.n();
        if v.len() != 2 * n + 2 {
            return Err(Error::Dimension { expected: 2 * n + 2, got: v.len() });
        }
        let base = self.to_vec();
        let sum: Vec<f64> = base.iter().zip(v).map(|(a, b)| a + b).collect();
        Self::from_slice(n, &sum)
    }
}

/// The `g_rho` norm of a tangent vector `v = (v_x, v_z, v_xi, v_omega)`.
pub fn g_norm(rho: &PhasePoint, v: &[f64], p: &MetricParams) -> Result<f64> {
    let n = rho.n();
    if v.len() != 2 * n + 2 {
        return Err(Error::Dimension { expected: 2 * n + 2, got: v.len() });
    }
    let e = rho.eta_norm();
    let dp = p.delta_perp(e);
    let dz = p.delta_par(e);
    let vx2: f64 = v[..n].iter().map(|a| a * a).sum();
    let vxi2: f64 = v[n + 1..2 * n + 1].iter().map(|a| a * a).sum();
    let vz = v[n];
    let vw = v[2 * n + 1];
    Ok((vx2 / (dp * dp) + dp * dp * vxi2 + vz * vz / (dz * dz) + dz * dz * vw * vw).sqrt())
}

/// `||rho1 - rho0||_{g_rho0}`; not symmetric in its arguments.
pub fn g_dist(rho0: &PhasePoint, rho1: &PhasePoint, p: &MetricParams) -> Result<f64> {
    if rho0.n() != rho1.n() {
        return Err(Error::Dimension { expected: rho0.n(), got: rho1.n() });
    }
    let d: Vec<f64> = rho1.to_vec().iter().zip(rho0.to_vec()).map(|(a, b)| a - b).collect();
    g_norm(rho0, &d, p)
}

/// Distortion `min(delta0^(1/alpha_perp), |eta|^-1)^(1 - alpha_perp)`.
pub fn distortion(rho: &PhasePoint, p: &MetricParams) -> f64 {
    distortion_at(rho.eta_norm(), p)
}

pub fn distortion_at(eta_norm: f64, p: &MetricParams) -> f64 {
    let cap = p.delta0.powf(1.0 / p.alpha_perp);
    let m = if eta_norm > 0.0 { cap.min(1.0 / eta_norm) } else { cap };
    m.powf(1.0 - p.alpha_perp)
}

/// The Appendix-C bracket inequalities, each read as `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BracketInequality {
    /// `<s+t> <= <s> + <t>`
    Sum,
    /// `<s t> <= <s><t>`
    Prod,
    /// `<s>^-1 <t> <= <s^-1 t>` for `s != 0`
    Prod2,
    /// `<s>^theta <= <|s|^theta>`
    PowerLower(f64),
    /// `<|s|^theta> <= sqrt(2) <s>^theta`
    PowerUpper(f64),
    /// `<s'>/<s> <= 2 <(s'-s)/<s>>`
    Jb1Sharp,
    /// `<s'>/<s> <= 2 <s'-s>`
    Jb1,
    /// `<s'>/<s> <= 4^(1/(1-theta)) <|s'-s| / <s'>^theta>^(1/(1-theta))`
    Jb2(f64),
}

impl BracketInequality {
    /// Both sides evaluated at `(s, t)`; for the jb family `t` plays `s'`.
    pub fn sides(&self, s: f64, t: f64) -> (f64, f64) {
        match *self {
            Self::Sum => (jbracket(s + t), jbracket(s) + jbracket(t)),
            Self::Prod => (jbracket(s * t), jbracket(s) * jbracket(t)),
            Self::Prod2 => (jbracket(t) / jbracket(s), jbracket(t / s)),
            Self::PowerLower(th) => (jbracket(s).powf(th), jbracket(s.abs().powf(th))),
            Self::PowerUpper(th) => {
                (jbracket(s.abs().powf(th)), std::f64::consts::SQRT_2 * jbracket(s).powf(th))
            }
            Self::Jb1Sharp => (jbracket(t) / jbracket(s), 2.0 * jbracket((t - s) / jbracket(s))),
            Self::Jb1 => (jbracket(t) / jbracket(s), 2.0 * jbracket(t - s)),
            Self::Jb2(th) => {
                let e = 1.0 / (1.0 - th);
                let rhs = 4f64.powf(e) * jbracket((t - s).abs() / jbracket(t).powf(th)).powf(e);
                (jbracket(t) / jbracket(s), rhs)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Sum => "sum".into(),
            Self::Prod => "prod".into(),
            Self::Prod2 => "prod2".into(),
            Self::PowerLower(t) => format!("power_lower(theta={t})"),
            Self::PowerUpper(t) => format!("power_upper(theta={t})"),
            Self::Jb1Sharp => "jb1_sharp".into(),
            Self::Jb1 => "jb1".into(),
            Self::Jb2(t) => format!("jb2(theta={t})"),
        }
    }

    /// The full suite with the thetas used in the acceptance runs.
    pub fn suite() -> Vec<Self> {
        let mut v = vec![Self::Sum, Self::Prod, Self::Prod2, Self::Jb1Sharp, Self::Jb1];
        for th in [0.0, 0.3, 0.7, 0.9] {
            v.push(Self::PowerLower(th));
            v.push(Self::PowerUpper(th));
            v.push(Self::Jb2(th));
        }
        v
    }
}

/// Draws a real whose magnitude is log-uniform over `[1e-6, 1e6]`, with a
/// random sign and an occasional exact zero.
pub fn sample_scalar<R: Rng>(rng: &mut R) -> f64 {
    if rng.random::<f64>() < 0.01 {
        return 0.0;
    }
    let mag = 10f64.powf(rng.random_range(-6.0..6.0));
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

/// Counts violations of `ineq` over `samples` random pairs. A relative slack
/// of a few ulps absorbs rounding at equality cases such as `theta = 0`.
pub fn fuzz_inequality(ineq: BracketInequality, samples: usize, seed: u64) -> usize {
    let mut rng = seeded_rng(seed);
    let mut bad = 0;
    for _ in 0..samples {
        let s = sample_scalar(&mut rng);
        let mut t = sample_scalar(&mut rng);
        if rng.random::<f64>() < 0.2 {
            // near-diagonal pairs exercise the jb inequalities hardest
            t = s * (1.0 + 1e-3 * rng.random_range(-1.0..1.0));
        }
        if matches!(ineq, BracketInequality::Prod2) && s == 0.0 {
            continue;
        }
        let (lhs, rhs) = ineq.sides(s, t);
        if lhs > rhs * (1.0 + 8.0 * f64::EPSILON) {
            bad += 1;
        }
    }
    bad
}

/// One draw for the moderate/temperate metric test.
#[derive(Debug, Clone)]
pub struct TemperateSample {
    /// `<Delta(rho1)^gamma ||rho2 - rho1||_{g_rho1}>`
    pub bracket: f64,
    /// `||v||_{g_rho2} / ||v||_{g_rho1}`
    pub ratio: f64,
}

fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.into_iter().map(|a| a / r).collect();
        }
    }
}

/// Samples `(rho1, rho2, v)` with `|eta1|` log-uniform in `[1, 2^16]` and
/// `g_rho1` displacements log-uniform in `[1e-2, 1e3]`.
pub fn temperate_samples(p: &MetricParams, n: usize, gamma: f64, count: usize, seed: u64) -> Vec<TemperateSample> {
    let mut rng = seeded_rng(seed);
    let dim = 2 * n + 2;
    (0..count)
        .map(|_| {
            let e = 2f64.powf(rng.random_range(0.0..16.0));
            let dir = random_unit(&mut rng, n + 1);
            let rho1 = PhasePoint {
                x: (0..n).map(|_| rng.random::<f64>()).collect(),
                z: rng.random::<f64>(),
                xi: dir[..n].iter().map(|d| d * e).collect(),
                omega: dir[n] * e,
            };
            let dist = 10f64.powf(rng.random_range(-2.0..3.0));
            let u = random_unit(&mut rng, dim);
            let unit = g_norm(&rho1, &u, p).expect("dimension");
            let step: Vec<f64> = u.iter().map(|a| a * dist / unit).collect();
            let rho2 = rho1.offset(&step).expect("dimension");
            let v = random_unit(&mut rng, dim);
            let ratio = g_norm(&rho2, &v, p).expect("dimension") / g_norm(&rho1, &v, p).expect("dimension");
            let bracket = jbracket(distortion(&rho1, p).powf(gamma) * dist);
            TemperateSample { bracket, ratio }
        })
        .collect()
}

/// Smallest `C` making `ratio <= C <bracket>^N` hold on every sample.
pub fn temperate_constant(samples: &[TemperateSample], n_exp: f64) -> f64 {
    samples
        .iter()
        .map(|s| s.ratio / s.bracket.powf(n_exp))
        .fold(0.0, f64::max)
}

/// Empirical `(C, N)`: the smallest `N` on a quarter-step grid in `[0, 8]`
/// whose sufficient constant is at most 2.
pub fn fit_temperate(samples: &[TemperateSample]) -> (f64, f64) {
    for k in 0..=32 {
        let n_exp = 0.25 * k as f64;
        let c = temperate_constant(samples, n_exp);
        if c <= 2.0 {
            return (c, n_exp);
        }
    }
    (temperate_constant(samples, 8.0), 8.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: f64, a: f64, b: f64) -> MetricParams {
        MetricParams::new(d, a, b).unwrap()
    }

    #[test]
    fn bracket_values() {
        assert_eq!(jbracket(0.0), 1.0);
        assert_eq!(jbracket(1.0), std::f64::consts::SQRT_2);
        assert!((jbracket(1e6) - 1e6).abs() / 1e6 < 1e-6);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(p(0.5, 0.5, 0.0).delta_perp(0.0), 0.5);
        assert_eq!(p(1.0, 0.5, 0.0).delta_perp(4.0), 0.5);
        let q = p(1.0, 0.5, 0.25);
        let mut last = q.delta_perp(1.0);
        for k in 1..40 {
            let d = q.delta_perp(2f64.powi(k));
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn params_rejected() {
        assert!(MetricParams::new(1.0, 0.4, 0.0).is_err());
        assert!(MetricParams::new(1.0, 1.0, 0.0).is_err());
        assert!(MetricParams::new(1.0, 0.6, 0.7).is_err());
        assert!(MetricParams::new(1.0, 0.6, -0.1).is_err());
        assert!(MetricParams::new(0.0, 0.6, 0.1).is_err());
    }

    #[test]
    fn g_norm_examples() {
        let q = p(1.0, 0.5, 0.0);
        let rho = PhasePoint::new(vec![0.0], 0.0, vec![0.0], 16.0).unwrap();
        assert_eq!(g_norm(&rho, &[0.0; 4], &q).unwrap(), 0.0);
        assert!((g_norm(&rho, &[1.0, 0.0, 0.0, 0.0], &q).unwrap() - 4.0).abs() < 1e-14);
        let flat = PhasePoint::origin(1);
        assert!((g_norm(&flat, &[1.0, 0.0, 0.0, 0.0], &q).unwrap() - 1.0).abs() < 1e-14);
        assert!(g_norm(&flat, &[1.0, 0.0], &q).is_err());
    }

    #[test]
    fn g_dist_z_shift() {
        let q = p(1.0, 0.6, 0.3);
        let a = PhasePoint::new(vec![0.1], 0.2, vec![3.0], 40.0).unwrap();
        let dz = q.delta_par(a.eta_norm());
        let mut b = a.clone();
        b.z += dz;
        assert!((g_dist(&a, &b, &q).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(g_dist(&a, &a, &q).unwrap(), 0.0);
    }

    #[test]
    fn distortion_examples() {
        let q = p(1.0, 0.5, 0.0);
        assert_eq!(distortion(&PhasePoint::origin(1), &q), 1.0);
        let r = PhasePoint::new(vec![0.0], 0.0, vec![0.0], 256.0).unwrap();
        assert!((distortion(&r, &q) - 0.0625).abs() < 1e-15);
        let mid = PhasePoint::new(vec![0.0], 0.0, vec![0.0], 0.5).unwrap();
        assert!(distortion(&mid, &p(0.5, 0.5, 0.0)) < distortion(&mid, &q));
    }
}
