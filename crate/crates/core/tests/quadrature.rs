use std::f64::consts::PI;

use futaki_core::manifolds::builtin;
use futaki_core::quadrature::{gauss_legendre, Execution, QuadratureAtlas};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1(n in 2usize..24, k in 0usize..8) {
        let k = k.min(2 * n - 1);
        let rule = gauss_legendre(n);
        let (x, w) = (&rule.0, &rule.1);
        let got: f64 = x.iter().zip(w.iter()).map(|(x, w)| w * x.powi(k as i32)).sum();
        let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
        prop_assert!((got - exact).abs() < 1e-13);
    }
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let m = builtin("cp2_bump").unwrap();
    let seq = QuadratureAtlas::with_nodes(m.chart.compactification.clone(), 6)
        .with_execution(Execution::Sequential);
    let par = seq.clone().with_execution(Execution::default());
    assert_eq!(seq.volume(&m.chart).unwrap(), par.volume(&m.chart).unwrap());
}

#[test]
fn volumes_converge_to_closed_forms() {
    for (name, exact) in [
        ("cp1", 4.0 * PI),
        ("cp2", 8.0 * PI * PI),
        ("cp1xcp1", 16.0 * PI * PI),
    ] {
        let m = builtin(name).unwrap();
        let v = QuadratureAtlas::for_chart(&m.chart)
            .volume(&m.chart)
            .unwrap();
        assert!((v.value - exact).abs() < 1e-9 * exact, "{name}: {v:?}");
        assert!(v.error_estimate < 1e-6 * exact, "{name}: {v:?}");
    }
}

#[test]
fn bump_deformation_preserves_volume() {
    let m = builtin("cp2").unwrap();
    let d = m.deformed(0.05).unwrap();
    let a = QuadratureAtlas::for_chart(&m.chart);
    let (v0, v1) = (a.volume(&m.chart).unwrap(), a.volume(&d.chart).unwrap());
    assert!((v0.value - v1.value).abs() < 10.0 * (v0.error_estimate + v1.error_estimate) + 1e-9);
}
