use futaki_core::jet::{layout, Jet};
use proptest::prelude::*;

const ORDER: usize = 5;

fn jet(nv: usize, shift: f64) -> impl Strategy<Value = Jet> {
    let n = layout(nv, ORDER).len();
    prop::collection::vec(-1.0f64..1.0, n).prop_map(move |mut c| {
        c[0] += shift;
        Jet::from_coeffs(nv, ORDER, c).unwrap()
    })
}

fn max_diff(a: &Jet, b: &Jet) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn scale(a: &Jet) -> f64 {
    1.0 + a.max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn multiplication_is_a_commutative_ring(a in jet(3, 0.0), b in jet(3, 0.0), c in jet(3, 0.0)) {
        prop_assert!(max_diff(&(&a * &b), &(&b * &a)) < 1e-14 * scale(&a) * scale(&b));
        let lhs = &(&a * &b) * &c;
        let rhs = &a * &(&b * &c);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12 * scale(&lhs));
        let lhs = &a * &(&b + &c);
        let rhs = &(&a * &b) + &(&a * &c);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12 * scale(&lhs));
    }

    #[test]
    fn division_inverts_multiplication(a in jet(2, 0.0), b in jet(2, 3.0)) {
        let back = (&a * &b).try_div(&b).unwrap();
        prop_assert!(max_diff(&back, &a) < 1e-10 * scale(&a));
        let one = &b * &b.recip().unwrap();
        prop_assert!(max_diff(&one, &Jet::constant(2, ORDER, 1.0)) < 1e-12);
    }

    #[test]
    fn log_inverts_exp(a in jet(2, 0.0), b in jet(2, 3.0)) {
        prop_assert!(max_diff(&a.exp().ln().unwrap(), &a) < 1e-10 * scale(&a));
        let s = b.sqrt().unwrap();
        prop_assert!(max_diff(&(&s * &s), &b) < 1e-10 * scale(&b));
        let p = b.powf(1.5).unwrap();
        prop_assert!(max_diff(&p, &(&b * &s)) < 1e-10 * scale(&p));
    }

    #[test]
    fn derivative_obeys_leibniz(a in jet(3, 0.0), b in jet(3, 0.0), v in 0usize..3) {
        let lhs = (&a * &b).derivative(v).unwrap();
        let rhs = &(&a.derivative(v).unwrap() * &b.truncate(ORDER - 1))
            + &(&a.truncate(ORDER - 1) * &b.derivative(v).unwrap());
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12 * scale(&lhs));
    }

    #[test]
    fn exp_jet_reproduces_taylor_expansion(x in -1.0f64..1.0, y in -1.0f64..1.0, h in -0.05f64..0.05) {
        let v = Jet::variables(&[x, y], ORDER);
        let f = (&v[0] * &v[1]).exp();
        let approx = f.eval_offset(&[h, -h]);
        let exact = ((x + h) * (y - h)).exp();
        prop_assert!((approx - exact).abs() < 1e-8 * exact);
    }
}
