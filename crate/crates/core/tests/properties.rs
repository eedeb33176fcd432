use num_complex::Complex64;
use proptest::prelude::*;
use ruelle::bracket_metric::{g_dist, jbracket, MetricParams, PhasePoint};
use ruelle::escape::{a_average, DualCoords, DualSplitting};
use ruelle::fractal_count::{straighten_phi, straighten_phi_inverse, synth_holder};
use ruelle::quantize::{op_apply, Symbol};
use ruelle::shift_model::{Membership, ShiftModel};
use ruelle::suspension::{sector_leakage, MappingTorus};
use ruelle::wavepackets::{band_limited_random, Bargmann, GridFunction, PhaseGrid, TorusGrid};
use std::f64::consts::{SQRT_2, TAU};
use std::sync::OnceLock;

fn bracket(s: f64) -> f64 {
    (1.0 + s * s).sqrt()
}

// signed magnitude, log-uniform over 1e-6..1e6
fn scalar() -> impl Strategy<Value = f64> {
    (-6.0..6.0f64, any::<bool>()).prop_map(|(e, neg)| if neg { -(10f64.powf(e)) } else { 10f64.powf(e) })
}

const SLACK: f64 = 1.0 + 1e-12;

proptest! {
    #[test]
    fn bracket_matches_definition(s in scalar()) {
        prop_assert!((jbracket(s) - bracket(s)).abs() <= 1e-14 * bracket(s));
    }

    #[test]
    fn bracket_sum_and_products(s in scalar(), t in scalar()) {
        prop_assert!(bracket(s + t) <= (bracket(s) + bracket(t)) * SLACK);
        prop_assert!(bracket(s * t) <= bracket(s) * bracket(t) * SLACK);
        prop_assert!(bracket(t) / bracket(s) <= bracket(t / s) * SLACK);
    }

    #[test]
    fn bracket_powers(s in scalar(), th in 0.0..0.999f64) {
        let lo = bracket(s).powf(th);
        let mid = bracket(s.abs().powf(th));
        prop_assert!(lo <= mid * SLACK);
        prop_assert!(mid <= SQRT_2 * lo * SLACK);
    }

    #[test]
    fn bracket_jb1_jb2(s in scalar(), t in scalar(), k in 0usize..4) {
        let ratio = bracket(t) / bracket(s);
        prop_assert!(ratio <= 2.0 * bracket(t - s) * SLACK);
        let th = [0.0, 0.3, 0.7, 0.9][k];
        let e = 1.0 / (1.0 - th);
        prop_assert!(ratio <= 4f64.powf(e) * bracket((t - s).abs() / bracket(t).powf(th)).powf(e) * SLACK);
    }

    #[test]
    fn metric_params_admissibility(d in 0.1..4.0f64, ap in -0.5..1.5f64, az in -0.5..1.5f64) {
        let ok = (0.5..1.0).contains(&ap) && (0.0..=ap).contains(&az);
        prop_assert_eq!(MetricParams::new(d, ap, az).is_ok(), ok);
    }

    #[test]
    fn g_dist_vanishes_on_the_diagonal(x in 0.0..1.0f64, z in 0.0..1.0f64, xi in scalar(), w in scalar()) {
        let p = MetricParams::new(1.0, 0.6, 0.3).unwrap();
        let rho = PhasePoint::new(vec![x], z, vec![xi], w).unwrap();
        prop_assert_eq!(g_dist(&rho, &rho, &p).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn shift_eigen_equations_hold(
        a0 in 0.1..0.95f64, p0 in 0.0..TAU, a1 in 0.1..0.95f64, p1 in 0.0..TAU, r in -2.0..2.0f64,
    ) {
        let (w0, w1) = (Complex64::from_polar(a0, p0), Complex64::from_polar(a1, p1));
        let m = ShiftModel::new(w0, w1, r, (-50, 50)).unwrap();
        prop_assert!(m.eigen_residual(&m.eigvec_u(Complex64::new(1.0, 0.0)), w0).unwrap() <= 1e-12);
        prop_assert!(m.eigen_residual(&m.eigvec_v(Complex64::new(1.0, 0.0)), w1).unwrap() <= 1e-12);
        prop_assert!(m.inverse_residual() <= 1e-14);
    }

    #[test]
    fn shift_membership_is_the_strict_inequality(
        a0 in 0.05..0.95f64, a1 in 0.05..0.95f64, p0 in 0.0..TAU, r in -2.0..2.0f64,
    ) {
        prop_assume!((a0 - a1).abs() > 1e-6);
        let ess = (-r).exp();
        let m = ShiftModel::new(Complex64::from_polar(a0, p0), Complex64::new(a1, 0.0), r, (-50, 50)).unwrap();
        if (a0 - ess).abs() > 1e-9 {
            prop_assert_eq!(m.membership_w0() == Membership::Member, a0 > ess);
        }
        if (a1 - ess).abs() > 1e-9 {
            prop_assert_eq!(m.membership_w1() == Membership::Member, a1 < ess);
        }
    }

    #[test]
    fn straightening_is_a_bijection(x in 0.0..1.0f64, z in 0.0..1.0f64, xi in scalar(), w in scalar()) {
        let form = synth_holder(0.5, 0, 1).unwrap();
        let rho = PhasePoint::new(vec![x], z, vec![xi], w).unwrap();
        let back = straighten_phi_inverse(&form, &straighten_phi(&form, &rho).unwrap()).unwrap();
        let scale = 1.0 + xi.abs() + w.abs() * form.sup_bound();
        prop_assert!((back.xi[0] - xi).abs() <= 1e-12 * scale);
        prop_assert_eq!(back.x, rho.x);
        prop_assert_eq!(back.omega, w);
        // omega = 0 leaves every point fixed
        let flat = PhasePoint::new(vec![x], z, vec![xi], 0.0).unwrap();
        prop_assert_eq!(straighten_phi(&form, &flat).unwrap(), flat);
    }

    #[test]
    fn w2_average_stays_in_unit_interval(u in scalar(), s in scalar(), w in scalar(), t in 0.1..8.0f64) {
        let a = a_average(&DualCoords::new(u, s, w), &DualSplitting::cat_map(), t);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn suspension_sectors_do_not_leak(
        n1 in -6i64..=6, n2 in -6i64..=6, m1 in -6i64..=6, m2 in -6i64..=6, c in 0.0..TAU,
    ) {
        prop_assume!((n1, n2) != (0, 0) && (m1, m2) != (0, 0));
        let modes = [([n1, n2], Complex64::new(1.0, 0.0)), ([m1, m2], Complex64::from_polar(0.7, c))];
        prop_assert!(sector_leakage(&MappingTorus::default(), &modes, 64).unwrap() <= 1e-12);
    }
}

fn bargmann() -> &'static Bargmann {
    static B: OnceLock<Bargmann> = OnceLock::new();
    B.get_or_init(|| {
        let p = MetricParams::new(0.5, 0.5, 0.5).unwrap();
        let g = TorusGrid::cube(1, 128, TAU).unwrap();
        Bargmann::new(PhaseGrid::new(&g, 64, 1, 24.0).unwrap(), &p).unwrap()
    })
}

fn bump(c: f64, s: f64) -> Symbol {
    Symbol::new("bump", move |_, e| Complex64::new((-(e[0] - c).powi(2) / (2.0 * s * s)).exp(), 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn op_is_linear_in_the_symbol(c1 in -6.0..6.0f64, c2 in -6.0..6.0f64, re in -2.0..2.0f64, im in -2.0..2.0f64, seed in 0u64..1000) {
        let b = bargmann();
        let u = band_limited_random(&b.phase.grid, 8, seed).unwrap();
        let k = Complex64::new(re, im);
        let (a, c) = (bump(c1, 2.0), bump(c2, 3.0));
        let (a2, c2s) = (a.clone(), c.clone());
        let sum = Symbol::new("sum", move |y, e| a2.eval(y, e) + k * c2s.eval(y, e));
        let lhs = op_apply(b, &sum, &u).unwrap();
        let rhs = op_apply(b, &a, &u).unwrap();
        let rhs = GridFunction { data: rhs.data.iter().zip(&op_apply(b, &c, &u).unwrap().data).map(|(x, y)| x + k * y).collect(), ..rhs };
        prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-10 * (1.0 + k.norm()));
    }

    #[test]
    fn op_adjoint_is_op_of_conjugate(c1 in -6.0..6.0f64, ph in 0.0..TAU, s1 in 0u64..1000, s2 in 0u64..1000) {
        let b = bargmann();
        let u = band_limited_random(&b.phase.grid, 8, s1).unwrap();
        let v = band_limited_random(&b.phase.grid, 8, s2 + 1000).unwrap();
        let rot = Complex64::from_polar(1.0, ph);
        let base = bump(c1, 2.5);
        let a = Symbol::new("a", move |y, e| rot * base.eval(y, e));
        let lhs = op_apply(b, &a, &u).unwrap().inner(&v).unwrap();
        let rhs = u.inner(&op_apply(b, &a.conj(), &v).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10);
    }
}
