use num_complex::Complex;
use proptest::prelude::*;
use sgsov_core::laurent::{self, LaurentPoly, Parity};
use sgsov_core::C64;

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

fn coeff_strategy() -> impl Strategy<Value = C64> {
    // bounded away from zero so window trimming never kicks in
    (0.2f64..1.0, 0.0f64..std::f64::consts::TAU)
        .prop_map(|(r, th)| c(r * th.cos(), r * th.sin()))
}

fn poly_strategy() -> impl Strategy<Value = LaurentPoly> {
    (-3i64..=0, proptest::collection::vec(coeff_strategy(), 1..=5))
        .prop_map(|(k_min, coeffs)| LaurentPoly::new(k_min, coeffs))
}

fn poly_diff_scale(a: &LaurentPoly, b: &LaurentPoly) -> f64 {
    let d = a.sub(b);
    d.max_coeff_norm() / (1.0 + a.max_coeff_norm().max(b.max_coeff_norm()))
}

proptest! {
    #[test]
    fn orbit_product_is_multiplicative(f in poly_strategy(), g in poly_strategy(), p in prop_oneof![Just(3i64), Just(5i64)]) {
        let lhs = f.mul(&g).average(p).unwrap();
        let rhs = f.average(p).unwrap().mul(&g.average(p).unwrap());
        prop_assert!(poly_diff_scale(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn orbit_product_keeps_the_window(f in poly_strategy(), p in prop_oneof![Just(3i64), Just(5i64)]) {
        let g = f.average(p).unwrap();
        prop_assert_eq!(g.window(), f.window());
    }

    #[test]
    fn fit_then_roots_round_trip(
        rs in proptest::collection::vec((0.5f64..2.0, 0.0f64..std::f64::consts::TAU), 2..=4),
        k_min in -2i64..=1,
    ) {
        let roots: Vec<C64> = rs.iter().map(|&(m, th)| c(m * th.cos(), m * th.sin())).collect();
        // require separation so clustering cannot merge distinct roots
        for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                prop_assume!((roots[i] - roots[j]).norm() > 1e-2);
            }
        }
        let mut f = LaurentPoly::monomial(k_min, c(1.0, 0.0));
        for &r in &roots {
            f = f.mul(&LaurentPoly::from_pairs(&[(1, c(1.0, 0.0)), (0, -r)]));
        }
        let ncoef = (f.k_max() - f.k_min() + 1) as usize;
        let xs = laurent::interpolation_grid(ncoef, 1, 1.1, 0.37);
        let ys: Vec<C64> = xs.iter().map(|&x| f.eval(x)).collect();
        let fit = laurent::from_samples(&xs, &ys, f.window(), Parity::None).unwrap();
        prop_assert!(fit.residual < 1e-9);
        let found = laurent::roots(&fit.poly).unwrap();
        prop_assert_eq!(found.zero_order, k_min);
        prop_assert_eq!(found.total_multiplicity(), roots.len());
        let mut got = found.flatten();
        let mut want = roots.clone();
        got.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        want.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        for (a, b) in got.iter().zip(want.iter()) {
            prop_assert!((a - b).norm() < 1e-6);
        }
    }
}
