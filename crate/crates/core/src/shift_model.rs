//! The bi-infinite weighted shift resonance model.
//!
//! `L` is the shift `L_{j+1,j} = 1` perturbed at column 0 by `L_{0,0} = w0`
//! and `L_{2,0} = -1/w1`. In the weighted space `sum |e^{-rj} u_j|^2` the
//! essential spectrum is the circle of radius `e^{-r}`; `w0` is an eigenvalue
//! when `|w0| > e^{-r}` and `w1` when `|w1| < e^{-r}`.
//!
//! Everything that decides spectral membership here is analytic (explicit
//! eigenvectors and tail ratios). Finite sections are reported only as a
//! diagnostic: a truncated shift is nilpotent and its computed spectrum says
//! more about pseudospectra than about the operator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftModel {
    pub w0: C,
    pub w1: C,
    pub r: f64,
    pub window: (i64, i64),
}

/// A complex sequence on the index window `[jmin, jmin + len)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq {
    pub jmin: i64,
    pub vals: Vec<C>,
}

impl Seq {
    pub fn zeros(window: (i64, i64)) -> Self {
        Self { jmin: window.0, vals: vec![C::new(0.0, 0.0); (window.1 - window.0 + 1) as usize] }
    }

    pub fn delta(window: (i64, i64), j: i64) -> Self {
        let mut s = Self::zeros(window);
        s.set(j, C::new(1.0, 0.0));
        s
    }

    pub fn jmax(&self) -> i64 {
        self.jmin + self.vals.len() as i64 - 1
    }

    pub fn contains(&self, j: i64) -> bool {
        j >= self.jmin && j <= self.jmax()
    }

    /// Value at `j`; zero outside the window.
    pub fn get(&self, j: i64) -> C {
        if self.contains(j) {
            self.vals[(j - self.jmin) as usize]
        } else {
            C::new(0.0, 0.0)
        }
    }

    pub fn set(&mut self, j: i64, v: C) {
        assert!(self.contains(j), "index {j} outside window");
        let k = (j - self.jmin) as usize;
        self.vals[k] = v;
    }

    fn add(&mut self, j: i64, v: C) {
        if self.contains(j) {
            let k = (j - self.jmin) as usize;
            self.vals[k] += v;
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.jmin..=self.jmax()
    }
}

/// Output of a windowed operator: rows whose value depends on entries outside
/// the window are flagged invalid.
#[derive(Debug, Clone)]
pub struct Windowed {
    pub seq: Seq,
    pub valid: Vec<bool>,
}

impl Windowed {
    pub fn is_valid(&self, j: i64) -> bool {
        self.seq.contains(j) && self.valid[(j - self.seq.jmin) as usize]
    }
}

/// Verdict of the weighted-space membership test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NotMember,
    /// A weighted tail ratio equals 1; the lemma's strict inequality does not decide.
    Boundary,
}

/// Geometric tail behavior of a sequence. `forward` is the limit ratio
/// `u_{j+1}/u_j` as `j -> +inf`, `backward` the ratio `u_{j-1}/u_j` as
/// `j -> -inf`; `None` means the sequence vanishes on that side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricTails {
    pub forward: Option<C>,
    pub backward: Option<C>,
}

const BOUNDARY_TOL: f64 = 1e-12;

/// Membership in `H_W(Z)` with `W(j) = e^{-rj}` via the exact ratio test.
pub fn hw_membership(tails: GeometricTails, r: f64) -> Membership {
    let fwd = tails.forward.map(|q| (-r).exp() * q.norm());
    let bwd = tails.backward.map(|q| r.exp() * q.norm());
    let ratios: Vec<f64> = [fwd, bwd].into_iter().flatten().collect();
    if ratios.iter().any(|&q| (q - 1.0).abs() <= BOUNDARY_TOL) {
        Membership::Boundary
    } else if ratios.iter().all(|&q| q < 1.0) {
        Membership::Member
    } else {
        Membership::NotMember
    }
}

impl ShiftModel {
    pub fn new(w0: C, w1: C, r: f64, window: (i64, i64)) -> Result<Self> {
        if w0.norm() == 0.0 || w1.norm() == 0.0 {
            return Err(Error::InvalidParams("w0 and w1 must be nonzero".into()));
        }
        if window.0 > -2 || window.1 < 2 {
            return Err(Error::InvalidParams(format!(
                "window {window:?} must contain [-2, 2]"
            )));
        }
        if !r.is_finite() {
            return Err(Error::InvalidParams("r must be finite".into()));
        }
        Ok(Self { w0, w1, r, window })
    }

    fn check(&self, u: &Seq) -> Result<()> {
        if u.jmin != self.window.0 || u.jmax() != self.window.1 {
            return Err(Error::Dimension {
                expected: (self.window.1 - self.window.0 + 1) as usize,
                got: u.vals.len(),
            });
        }
        Ok(())
    }

    /// `L u` on the window. Row `jmin` would need `u_{jmin-1}` and is invalid.
    pub fn apply_l(&self, u: &Seq) -> Result<Windowed> {
        self.check(u)?;
        let mut out = Seq::zeros(self.window);
        for j in u.indices() {
            out.add(j + 1, u.get(j));
        }
        let u0 = u.get(0);
        out.add(0, self.w0 * u0);
        out.add(2, -u0 / self.w1);
        let mut valid = vec![true; u.vals.len()];
        valid[0] = false;
        Ok(Windowed { seq: out, valid })
    }

    /// `L^{-1} u`; row `jmax` would need `u_{jmax+1}` and is invalid.
    pub fn apply_l_inv(&self, u: &Seq) -> Result<Windowed> {
        self.check(u)?;
        let mut out = Seq::zeros(self.window);
        for j in u.indices() {
            out.add(j - 1, u.get(j));
        }
        let u1 = u.get(1);
        out.add(1, u1 / self.w1);
        out.add(-1, -self.w0 * u1);
        let mut valid = vec![true; u.vals.len()];
        let last = valid.len() - 1;
        valid[last] = false;
        Ok(Windowed { seq: out, valid })
    }

    /// Eigenvector of `L` for `w0`: zero left of 0, `U_1 = U_0/w0`,
    /// `U_j = w0^{-j} (1 - w0/w1) U_0` for `j >= 2`.
    pub fn eigvec_u(&self, u0: C) -> Seq {
        let mut s = Seq::zeros(self.window);
        let tail = C::new(1.0, 0.0) - self.w0 / self.w1;
        for j in s.indices().collect::<Vec<_>>() {
            let v = match j {
                j if j < 0 => C::new(0.0, 0.0),
                0 => u0,
                1 => u0 / self.w0,
                j => self.w0.powi(-(j as i32)) * tail * u0,
            };
            s.set(j, v);
        }
        s
    }

    /// Eigenvector of `L` for `w1`: zero right of 1, `V_0 = w1 V_1`,
    /// `V_j = w1^{|j|+1} (1 - w0/w1) V_1` for `j <= -1`.
    ///
    /// The exponent `|j| + 1` is what `(LV)_0 = w1 V_0` forces; with `|j|`
    /// the eigen-equation fails at row 0 whenever `w0 != w1`.
    pub fn eigvec_v(&self, v1: C) -> Seq {
        let mut s = Seq::zeros(self.window);
        let tail = C::new(1.0, 0.0) - self.w0 / self.w1;
        for j in s.indices().collect::<Vec<_>>() {
            let v = match j {
                j if j >= 2 => C::new(0.0, 0.0),
                1 => v1,
                0 => self.w1 * v1,
                j => self.w1.powi((-j + 1) as i32) * tail * v1,
            };
            s.set(j, v);
        }
        s
    }

    pub fn tails_u(&self) -> GeometricTails {
        let degenerate = (self.w0 - self.w1).norm() == 0.0;
        GeometricTails {
            forward: if degenerate { None } else { Some(self.w0.inv()) },
            backward: None,
        }
    }

    pub fn tails_v(&self) -> GeometricTails {
        let degenerate = (self.w0 - self.w1).norm() == 0.0;
        GeometricTails { forward: None, backward: if degenerate { None } else { Some(self.w1) } }
    }

    pub fn membership_w0(&self) -> Membership {
        hw_membership(self.tails_u(), self.r)
    }

    pub fn membership_w1(&self) -> Membership {
        hw_membership(self.tails_v(), self.r)
    }

    /// Componentwise relative residual of `L v = lambda v` on valid rows.
    ///
    /// Each row is scaled by the sum of magnitudes of the terms that enter it,
    /// so geometric growth across the window does not mask cancellation error.
    pub fn eigen_residual(&self, v: &Seq, lambda: C) -> Result<f64> {
        let lv = self.apply_l(v)?;
        let mut worst: f64 = 0.0;
        for j in v.indices() {
            if !lv.is_valid(j) {
                continue;
            }
            let diff = (lv.seq.get(j) - lambda * v.get(j)).norm();
            let mut scale = v.get(j - 1).norm() + (lambda * v.get(j)).norm();
            if j == 0 {
                scale += (self.w0 * v.get(0)).norm();
            }
            if j == 2 {
                scale += (v.get(0) / self.w1).norm();
            }
            if scale > 0.0 {
                worst = worst.max(diff / scale);
            } else if diff > 0.0 {
                worst = f64::INFINITY;
            }
        }
        Ok(worst)
    }

    fn index(&self, j: i64) -> usize {
        (j - self.window.0) as usize
    }

    fn size(&self) -> usize {
        (self.window.1 - self.window.0 + 1) as usize
    }

    /// Dense window matrix of `L`.
    pub fn l_matrix(&self) -> DMatrix<C> {
        let n = self.size();
        let mut m = DMatrix::<C>::zeros(n, n);
        for j in self.window.0..self.window.1 {
            m[(self.index(j + 1), self.index(j))] = C::new(1.0, 0.0);
        }
        m[(self.index(0), self.index(0))] += self.w0;
        m[(self.index(2), self.index(0))] += -self.w1.inv();
        m
    }

    /// Dense window matrix of `L^{-1}`.
    pub fn l_inv_matrix(&self) -> DMatrix<C> {
        let n = self.size();
        let mut m = DMatrix::<C>::zeros(n, n);
        for j in self.window.0..self.window.1 {
            m[(self.index(j), self.index(j + 1))] = C::new(1.0, 0.0);
        }
        m[(self.index(1), self.index(1))] += self.w1.inv();
        m[(self.index(-1), self.index(1))] += -self.w0;
        m
    }

    /// `max |L L^{-1} - I|` over rows and columns away from the window edges.
    pub fn inverse_residual(&self) -> f64 {
        let prod = self.l_matrix() * self.l_inv_matrix();
        let n = self.size();
        let mut worst: f64 = 0.0;
        for i in 1..n - 1 {
            for k in 1..n - 1 {
                let id = if i == k { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, k)] - C::new(id, 0.0)).norm());
            }
        }
        worst
    }

    /// `Diag(W) L Diag(W)^{-1}` on the window, `W(j) = e^{-rj}`.
    pub fn conjugated_lw(&self) -> DMatrix<C> {
        let l = self.l_matrix();
        let mut m = l.clone();
        for i in self.window.0..=self.window.1 {
            for j in self.window.0..=self.window.1 {
                let (a, b) = (self.index(i), self.index(j));
                if l[(a, b)].norm() != 0.0 {
                    m[(a, b)] = l[(a, b)] * (-self.r * (i - j) as f64).exp();
                }
            }
        }
        m
    }
}

/// Sparse lower-triangular matrix: diagonal plus a few strictly lower entries.
struct SparseLower {
    diag: Vec<C>,
    /// `lower[i]` lists `(col, value)` with `col < i`.
    lower: Vec<Vec<(usize, C)>>,
}

impl SparseLower {
    fn from_dense(m: &DMatrix<C>) -> Option<Self> {
        let n = m.nrows();
        let mut lower = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if m[(i, j)].norm() != 0.0 {
                    return None;
                }
            }
            for j in 0..i {
                if m[(i, j)].norm() != 0.0 {
                    lower[i].push((j, m[(i, j)]));
                }
            }
        }
        Some(Self { diag: (0..n).map(|i| m[(i, i)]).collect(), lower })
    }

    /// Solves `T x = b`.
    fn solve(&self, b: &[C]) -> Vec<C> {
        let mut x = b.to_vec();
        for i in 0..x.len() {
            let mut s = x[i];
            for &(j, v) in &self.lower[i] {
                s -= v * x[j];
            }
            x[i] = s / self.diag[i];
        }
        x
    }

    /// Solves `T^* x = b`.
    fn solve_adjoint(&self, b: &[C]) -> Vec<C> {
        let mut x = b.to_vec();
        for i in (0..x.len()).rev() {
            x[i] /= self.diag[i].conj();
            let xi = x[i];
            for &(j, v) in &self.lower[i] {
                x[j] -= v.conj() * xi;
            }
        }
        x
    }
}

fn norm2(v: &[C]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `||(z - A)^{-1}||_2` for lower-triangular `A`, by power iteration on
/// `T^{-*} T^{-1}` with `T = z - A`.
fn resolvent_norm(a: &DMatrix<C>, z: C) -> f64 {
    let n = a.nrows();
    let t = DMatrix::<C>::identity(n, n) * z - a;
    let t = SparseLower::from_dense(&t).expect("finite sections are lower triangular");
    if t.diag.iter().any(|d| d.norm() < 1e-300) {
        return f64::INFINITY;
    }
    let mut x: Vec<C> = (0..n).map(|i| C::new(1.0 + (i % 7) as f64 * 0.1, 0.0)).collect();
    let mut sigma = 0.0;
    for _ in 0..300 {
        let nx = norm2(&x);
        x.iter_mut().for_each(|c| *c /= nx);
        let y = t.solve(&x);
        let w = t.solve_adjoint(&y);
        let est = norm2(&y);
        x = w;
        if (est - sigma).abs() <= 1e-12 * est {
            sigma = est;
            break;
        }
        sigma = est;
    }
    sigma
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventSample {
    pub radius: f64,
    pub max_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiniteSectionReport {
    pub n: usize,
    pub essential_radius: f64,
    pub eigenvalues: Vec<(f64, f64)>,
    /// Computed eigenvalues with modulus above `e^{-r} + 0.1`.
    pub isolated: Vec<(f64, f64)>,
    /// `|w0| > e^{-r} + 0.1`, the regime where the section should show `w0`.
    pub w0_expected: bool,
    /// Distance from `w0` to the nearest computed eigenvalue.
    pub w0_distance: f64,
    pub w0_found: bool,
    pub resolvent: Vec<ResolventSample>,
}

/// Diagnostic eigen/resolvent report for the `N`-truncation of `L~_W` on
/// indices `[-N/2, N - N/2)`.
pub fn finite_section_report(model: &ShiftModel, n: usize) -> Result<FiniteSectionReport> {
    if n < 10 {
        return Err(Error::InvalidParams(format!("section size {n} below 10")));
    }
    let lo = -((n / 2) as i64);
    let section = ShiftModel { window: (lo, lo + n as i64 - 1), ..*model };
    let a = section.conjugated_lw();
    let eig = a
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Unsupported("Schur form did not converge".into()))?;
    let ess = (-model.r).exp();
    let mut eigenvalues: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    eigenvalues.sort_by(|a, b| C::new(b.0, b.1).norm().total_cmp(&C::new(a.0, a.1).norm()));
    let isolated: Vec<(f64, f64)> = eigenvalues
        .iter()
        .copied()
        .filter(|&(re, im)| C::new(re, im).norm() > ess + 0.1)
        .collect();
    let w0_distance = eig.iter().map(|c| (c - model.w0).norm()).fold(f64::INFINITY, f64::min);
    let mut resolvent = Vec::new();
    for dr in [0.2, 0.1, -0.05, -0.1] {
        let radius = ess + dr;
        if radius <= 0.0 {
            continue;
        }
        let max_norm = (0..16)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 16.0;
                resolvent_norm(&a, C::from_polar(radius, th))
            })
            .fold(0.0, f64::max);
        resolvent.push(ResolventSample { radius, max_norm });
    }
    Ok(FiniteSectionReport {
        n,
        essential_radius: ess,
        eigenvalues,
        isolated,
        w0_expected: model.w0.norm() > ess + 0.1,
        w0_distance,
        w0_found: w0_distance <= 1e-6,
        resolvent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    fn model(w0: f64, w1: f64, r: f64) -> ShiftModel {
        ShiftModel::new(c(w0), c(w1), r, (-50, 50)).unwrap()
    }

    #[test]
    fn shift_away_from_perturbation() {
        let m = model(0.5, 0.25, 1.0);
        let out = m.apply_l(&Seq::delta(m.window, 5)).unwrap();
        assert_eq!(out.seq, Seq::delta(m.window, 6));
    }

    #[test]
    fn column_zero() {
        let m = model(0.5, 0.25, 1.0);
        let out = m.apply_l(&Seq::delta(m.window, 0)).unwrap().seq;
        assert_eq!(out.get(0), c(0.5));
        assert_eq!(out.get(1), c(1.0));
        assert_eq!(out.get(2), c(-4.0));
        assert_eq!(out.get(3), c(0.0));
    }

    #[test]
    fn u_hand_values() {
        let m = model(0.5, 0.25, 1.0);
        let u = m.eigvec_u(c(1.0));
        assert_eq!(u.get(1), c(2.0));
        assert_eq!(u.get(2), c(-4.0));
        assert_eq!(u.get(3), c(-8.0));
        assert!((-50..0).all(|j| u.get(j) == c(0.0)));
        assert!(m.eigen_residual(&u, m.w0).unwrap() < 1e-15);
    }

    #[test]
    fn equal_weights_give_finite_support() {
        let m = model(0.5, 0.5, 1.0);
        let u = m.eigvec_u(c(1.0));
        assert!((2..=50).all(|j| u.get(j) == c(0.0)));
        assert_eq!(m.tails_u().forward, None);
        // finitely supported eigenvectors live in every weighted space
        assert_eq!(hw_membership(m.tails_u(), -2.0), Membership::Member);
    }

    #[test]
    fn membership_examples() {
        assert_eq!(model(0.5, 0.5001, 1.0).membership_w0(), Membership::Member);
        assert_eq!(model(0.5, 0.5001, -1.0).membership_w0(), Membership::NotMember);
        assert_eq!(model(0.3, 0.5, 1.0).membership_w1(), Membership::NotMember);
        assert_eq!(model(0.3, 0.5, -1.0).membership_w1(), Membership::Member);
        let t = GeometricTails { forward: Some(c((1.0f64).exp())), backward: None };
        assert_eq!(hw_membership(t, 1.0), Membership::Boundary);
    }

    #[test]
    fn conjugation() {
        let m = ShiftModel::new(c(0.5), c(0.25), 0.0, (-5, 5)).unwrap();
        assert_eq!(m.conjugated_lw(), m.l_matrix());
        let m = ShiftModel { r: 1.0, ..m };
        let lw = m.conjugated_lw();
        let e = (-1.0f64).exp();
        for j in -5..5 {
            let v = lw[((j + 6) as usize, (j + 5) as usize)];
            assert!((v.re - e).abs() < 1e-15, "{v}");
        }
        assert_eq!(lw[(5, 5)], c(0.5));
        assert!((lw[(7, 5)] - c(-4.0 * (-2.0f64).exp())).norm() < 1e-15);
        // Diag(W) U is an eigenvector of L~_W on interior rows
        let u = m.eigvec_u(c(1.0));
        let wu: Vec<C> = u.indices().map(|j| u.get(j) * (-(j as f64)).exp()).collect();
        let wu = nalgebra::DVector::from_vec(wu);
        let out = &lw * &wu;
        for i in 1..11 {
            assert!((out[i] - m.w0 * wu[i]).norm() <= 1e-12 * (1.0 + wu[i].norm()));
        }
    }

    #[test]
    fn inverse() {
        let m = ShiftModel::new(C::new(0.3, 0.4), C::new(-0.7, 0.2), 1.0, (-50, 50)).unwrap();
        assert!(m.inverse_residual() <= 1e-14);
        let u = Seq::delta(m.window, 1);
        let back = m.apply_l(&m.apply_l_inv(&u).unwrap().seq).unwrap();
        for j in -49..49 {
            assert!((back.seq.get(j) - u.get(j)).norm() < 1e-15);
        }
    }

    #[test]
    fn window_validation() {
        assert!(ShiftModel::new(c(0.5), c(0.5), 1.0, (-1, 5)).is_err());
        assert!(ShiftModel::new(c(0.0), c(0.5), 1.0, (-5, 5)).is_err());
    }
}
