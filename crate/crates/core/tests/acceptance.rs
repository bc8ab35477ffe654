//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use futaki_core::chart::{Bump, KahlerChart};
use futaki_core::chern::{chern_forms, pontryagin_identity_residual};
use futaki_core::geometry::{BumpCubic, ChartPoint, CurvatureBundle};
use futaki_core::invariants::{
    character_check, class_invariance_check, integrate_invariants, moment_statistics,
    trace_identity, Needs,
};
use futaki_core::jet::Jet;
use futaki_core::manifolds::{builtin, Manifold};
use futaki_core::moment::{moment_map_direct, moment_map_kahler, moment_property_check, Frame};
use futaki_core::quadrature::QuadratureAtlas;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(20_240_917)
}

fn random_points(rng: &mut ChaCha8Rng, dim: usize, count: usize, reach: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-reach..reach)).collect())
        .collect()
}

fn sci(m: &BTreeMap<&str, f64>) -> String {
    let parts: Vec<String> = m.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn manifold(name: &str) -> Manifold {
    builtin(name).expect("built-in manifold")
}

fn atlas(chart: &KahlerChart) -> QuadratureAtlas {
    QuadratureAtlas::for_chart(chart)
}

// 1
fn bianchi() -> Outcome {
    let mut rng = rng();
    let mut worst = BTreeMap::new();
    for name in ["cp1", "cp2", "cp1xcp1", "cp2_bump"] {
        let m = manifold(name);
        let d = m.chart.real_dim();
        let mut pts = random_points(&mut rng, d, 100, 2.5);
        if let Some(b) = &m.bump_template {
            // Dense sampling where the perturbation lives.
            let s = &b.support.as_ref().expect("bump support");
            pts.extend(
                random_points(&mut rng, d, 100, s.radius / 2.0_f64.sqrt())
                    .into_iter()
                    .map(|v| {
                        v.iter()
                            .zip(&s.center)
                            .map(|(x, c)| x + c)
                            .collect::<Vec<f64>>()
                    }),
            );
        }
        let mut w = 0.0f64;
        for p in &pts {
            let cp = ChartPoint::new(&m.chart, p, 6).unwrap();
            let conn = cp.geom.levi_civita().unwrap();
            let k = moment_map_kahler(&cp.geom, &conn, 0.0).unwrap().mu_raw;
            for frame in [Frame::Coordinate, Frame::Darboux] {
                let direct = moment_map_direct(&cp.geom, &conn, 0.0, frame)
                    .unwrap()
                    .mu_raw;
                w = w.max((direct - k).abs());
            }
        }
        worst.insert(name, w);
    }
    let max = worst.values().cloned().fold(0.0, f64::max);
    outcome(
        max < 1e-7,
        format!("max |direct - kahler| = {max:.2e} {}", sci(&worst)),
    )
}

// 2
fn moment_property() -> Outcome {
    let m = manifold("cp1");
    let a = atlas(&m.chart);
    let mut rng = rng();
    let mut errs = Vec::new();
    for _ in 0..3 {
        let fc = vec![rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)];
        let f = Bump::new(fc, rng.gen_range(0.8..1.4));
        let ac = vec![rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)];
        let raw: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cubic = BumpCubic::new(ac, rng.gen_range(0.5..0.9), &raw);
        let r = moment_property_check(&m.chart, &f, &cubic, 1e-4, &a).unwrap();
        assert!(r.lhs.abs() > 1e-6, "degenerate pair {r:?}");
        errs.push(r.rel_err);
    }
    let max = errs.iter().cloned().fold(0.0, f64::max);
    outcome(
        max < 1e-3,
        format!(
            "relative errors [{}]",
            errs.iter()
                .map(|e| format!("{e:.2e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

// 3
fn moment_vanishes() -> Outcome {
    let mut worst = BTreeMap::new();
    for name in ["cp1", "cp2", "cp1xcp1"] {
        let m = manifold(name);
        let s = moment_statistics(&m.chart, &atlas(&m.chart)).unwrap();
        worst.insert(name, s.max_abs);
    }
    let max = worst.values().cloned().fold(0.0, f64::max);
    outcome(max < 1e-6, format!("max |mu| over nodes {}", sci(&worst)))
}

/// `(α ∧ β)_{0123}` for two 2-forms given as antisymmetric 4×4 arrays.
fn wedge_top<T>(a: &[T], b: &[T]) -> T
where
    T: Copy + std::ops::Mul<Output = T> + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let c = |f: &[T], k: usize, l: usize| f[k * 4 + l];
    c(a, 0, 1) * c(b, 2, 3) - c(a, 0, 2) * c(b, 1, 3)
        + c(a, 0, 3) * c(b, 1, 2)
        + c(a, 1, 2) * c(b, 0, 3)
        - c(a, 1, 3) * c(b, 0, 2)
        + c(a, 2, 3) * c(b, 0, 1)
}

/// `tr(R∘∧R) − 16π²(c₂ − ½c₁²)` from the Riemann components, with `c₂`
/// taken from the determinant of the complex curvature matrix.
fn chern_weil_oracle(curv: &CurvatureBundle) -> f64 {
    let d = 4;
    let real = |i: usize, j: usize| -> Vec<f64> {
        (0..16)
            .map(|kl| curv.riemann_at(i, j, kl / d, kl % d))
            .collect()
    };
    let mut lhs = 0.0;
    for i in 0..d {
        for j in 0..d {
            lhs += wedge_top(&real(i, j), &real(j, i));
        }
    }
    // Complex-linear endomorphisms: column ∂x_b maps to Re ∂x_a + Im ∂y_a.
    let omega = |a: usize, b: usize| -> Vec<Complex64> {
        (0..16)
            .map(|kl| {
                Complex64::new(
                    curv.riemann_at(2 * a, 2 * b, kl / d, kl % d),
                    curv.riemann_at(2 * a + 1, 2 * b, kl / d, kl % d),
                )
            })
            .collect()
    };
    let s = Complex64::new(0.0, 1.0 / (2.0 * PI));
    let tr: Vec<Complex64> = (0..16).map(|k| omega(0, 0)[k] + omega(1, 1)[k]).collect();
    let c1 = wedge_top(&tr, &tr) * s * s;
    let det = wedge_top(&omega(0, 0), &omega(1, 1)) - wedge_top(&omega(0, 1), &omega(1, 0));
    let c2 = det * s * s;
    let rhs = (c2 - c1 * 0.5) * (16.0 * PI * PI);
    (Complex64::new(lhs, 0.0) - rhs).norm()
}

// 4
fn chern_identity() -> Outcome {
    let m = manifold("cp2");
    let mut rng = rng();
    let (mut oracle, mut library) = (0.0f64, 0.0f64);
    let mut scale = 0.0f64;
    for p in random_points(&mut rng, 4, 100, 2.5) {
        let cp = ChartPoint::new(&m.chart, &p, 4).unwrap();
        let curv = cp
            .geom
            .levi_civita()
            .unwrap()
            .curvature(&cp.geom.g_inv)
            .unwrap();
        oracle = oracle.max(chern_weil_oracle(&curv));
        library = library.max(pontryagin_identity_residual(&curv));
        scale = scale.max(chern_forms(&curv).c2.max_abs());
    }
    let flat = manifold("flat2");
    let cp = ChartPoint::new(&flat.chart, &[0.1, 0.2, -0.3, 0.4], 4).unwrap();
    let flat_res = pontryagin_identity_residual(
        &cp.geom
            .levi_civita()
            .unwrap()
            .curvature(&cp.geom.g_inv)
            .unwrap(),
    );
    let ok = oracle < 1e-8 && library < 1e-8 && flat_res == 0.0 && scale > 1e-3;
    outcome(
        ok,
        format!("oracle residual {oracle:.2e}, library residual {library:.2e}, flat {flat_res:.1e}, |c2| up to {scale:.2e}"),
    )
}

// 5
fn trace() -> Outcome {
    let mut rng = rng();
    let pts = random_points(&mut rng, 4, 100, 1.5);
    let cp1 = manifold("cp1");
    let rot = cp1.field("rot").unwrap();
    let (mut ident, mut closed) = (0.0f64, 0.0f64);
    for p in &pts {
        let p = &p[..2];
        let t = trace_identity(&cp1.chart, rot.as_ref(), p).unwrap();
        ident = ident.max(t.residual);
        // For Z = −z∂z on the Fubini–Study line, L = −∇Z is multiplication
        // by (1 − |z|²)/(1 + |z|²).
        let r2 = p[0] * p[0] + p[1] * p[1];
        let expect = Complex64::new((1.0 - r2) / (1.0 + r2), 0.0);
        closed = closed.max((Complex64::from(t.trace) - expect).norm());
    }
    let cp2 = manifold("cp2");
    let mut cp2_res = 0.0f64;
    for name in ["rot1", "e12"] {
        let f = cp2.field(name).unwrap();
        for p in &pts {
            cp2_res = cp2_res.max(trace_identity(&cp2.chart, f.as_ref(), p).unwrap().residual);
        }
    }
    let max = ident.max(closed).max(cp2_res);
    outcome(
        max < 1e-7,
        format!(
            "cp1 identity {ident:.2e}, cp1 closed form {closed:.2e}, cp2 rot1/e12 {cp2_res:.2e}"
        ),
    )
}

// 6
fn class_invariance() -> Outcome {
    let amps = [0.0, 1e-2, 5e-2];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, field) in [("cp1", "rot"), ("cp2", "e12"), ("cp2", "rot1")] {
        let m = manifold(name);
        let f = m.field(field).unwrap();
        let t = m.bump_template.as_ref().unwrap();
        let rows =
            class_invariance_check(&m.chart, f.as_ref(), t, &amps, &atlas(&m.chart)).unwrap();
        let base = &rows[0];
        let mut ratio = 0.0f64;
        for r in &rows[1..] {
            let bound = 10.0 * r.error_estimate.max(base.error_estimate);
            let drift = (r.f_omega - base.f_omega).abs();
            ok &= drift <= bound;
            ratio = ratio.max(drift / bound);
        }
        let vals: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.1e}±{:.0e}", r.f_omega, r.error_estimate))
            .collect();
        parts.push(format!(
            "{name}/{field} [{}] drift/bound {ratio:.2}",
            vals.join(", ")
        ));
    }
    outcome(ok, parts.join("; "))
}

// 7
fn prop41() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["cp2", "cp2_bump"] {
        let m = manifold(name);
        let f = m.field("e12").unwrap();
        let ints = integrate_invariants(
            &m.chart,
            f.as_ref(),
            &atlas(&m.chart),
            Needs { chern: true },
        )
        .unwrap();
        let fw = ints.f_omega();
        let q = ints.scaled_pontryagin_invariant().unwrap();
        let diff = (fw.value - q.value.im).abs();
        let bound = fw.error_estimate + q.error_estimate;
        ok &= diff <= bound;
        parts.push(format!(
            "{name}: F = {:.2e}, Im F_q = {:.2e}, |diff| {diff:.1e} <= {bound:.1e}",
            fw.value, q.value.im
        ));
    }
    outcome(ok, parts.join("; "))
}

// 8
fn character() -> Outcome {
    let m = manifold("cp2_bump");
    let y = m.field("e12").unwrap();
    let z = m.field("e21").unwrap();
    let (y, z) = (y.as_linear().unwrap(), z.as_linear().unwrap());
    assert!(!y.bracket(z).is_zero());
    let r = character_check(y, z, &m.chart, &atlas(&m.chart)).unwrap();
    outcome(
        r.value.abs() < 10.0 * r.error_estimate,
        format!("F([e12, e21]) = {:.2e} ± {:.1e}", r.value, r.error_estimate),
    )
}

// 9
fn topology() -> Outcome {
    let cp1 = manifold("cp1");
    let a1 = atlas(&cp1.chart);
    let c1 = a1
        .integrate_densities(&cp1.chart, 1, |c, x| {
            let cp = ChartPoint::new(c, x, 4)?;
            let curv = cp.geom.levi_civita()?.curvature(&cp.geom.g_inv)?;
            Ok(vec![chern_forms(&curv).c1.top().re * cp.jacobian])
        })
        .unwrap()[0];
    let mut ok = (c1.value - 2.0).abs() < 1e-6;
    let mut parts = vec![format!("int c1 = {:.12}", c1.value)];
    // ωⁿ/n! = 4ⁿ (1 + |z|²)^{−n−1} dλ, so vol = 4ⁿ |S^{2n−1}| ∫₀^∞ r^{2n−1}(1+r²)^{−n−1} dr
    // with the radial integral equal to 1/(2n).
    for (name, n) in [("cp1", 1i32), ("cp2", 2)] {
        let m = manifold(name);
        let sphere = 2.0 * PI.powi(n) / (1..n).product::<i32>() as f64;
        let oracle = 4f64.powi(n) * sphere / (2 * n) as f64;
        let v = atlas(&m.chart).volume(&m.chart).unwrap();
        let diff = (v.value - oracle).abs();
        ok &= diff <= v.error_estimate;
        parts.push(format!(
            "vol {name} {:.12} vs {oracle:.12} (|diff| {diff:.1e} <= {:.1e})",
            v.value, v.error_estimate
        ));
    }
    outcome(ok, parts.join("; "))
}

/// Sparse polynomial: exponent vector to coefficient.
#[derive(Clone, Debug)]
struct Poly {
    nv: usize,
    terms: BTreeMap<Vec<u8>, f64>,
}

impl Poly {
    fn random(rng: &mut ChaCha8Rng, nv: usize, degree: usize, terms: usize) -> Poly {
        let mut t = BTreeMap::new();
        t.insert(vec![0; nv], rng.gen_range(0.5..2.0));
        for _ in 0..terms {
            let mut e = vec![0u8; nv];
            let deg = rng.gen_range(1..=degree);
            for _ in 0..deg {
                e[rng.gen_range(0..nv)] += 1;
            }
            *t.entry(e).or_insert(0.0) += rng.gen_range(-1.0..1.0);
        }
        Poly { nv, terms: t }
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut t = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                let e: Vec<u8> = a.iter().zip(b).map(|(i, j)| i + j).collect();
                *t.entry(e).or_insert(0.0) += x * y;
            }
        }
        Poly {
            nv: self.nv,
            terms: t,
        }
    }

    fn diff(&self, v: usize) -> Poly {
        let mut t = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[v] > 0 {
                let mut e2 = e.clone();
                e2[v] -= 1;
                *t.entry(e2).or_insert(0.0) += c * e[v] as f64;
            }
        }
        Poly {
            nv: self.nv,
            terms: t,
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    fn jet(&self, vars: &[Jet]) -> Jet {
        let mut acc = Jet::zero(self.nv, vars[0].order());
        for (e, c) in &self.terms {
            let mut m = Jet::constant(self.nv, vars[0].order(), *c);
            for (v, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    m = &m * &vars[v];
                }
            }
            acc += &m;
        }
        acc
    }

    /// Taylor coefficient `∂^α p(x)/α!` by repeated symbolic differentiation.
    fn taylor(&self, x: &[f64], alpha: &[u8]) -> f64 {
        let mut p = self.clone();
        let mut fact = 1.0;
        for (v, &k) in alpha.iter().enumerate() {
            for i in 1..=k {
                p = p.diff(v);
                fact *= i as f64;
            }
        }
        p.eval(x) / fact
    }
}

/// Largest coefficient mismatch of `j` against `p`, relative to the largest
/// symbolic coefficient.
fn mismatch(j: &Jet, p: &Poly, x: &[f64]) -> f64 {
    let layout = j.layout();
    let mut num = 0.0f64;
    let mut scale = 0.0f64;
    for idx in 0..layout.len() {
        let alpha = layout.multi_index(idx);
        let s = p.taylor(x, alpha);
        num = num.max((j.coeffs()[idx] - s).abs());
        scale = scale.max(s.abs());
    }
    num / scale.max(f64::MIN_POSITIVE)
}

// 10
fn jets() -> Outcome {
    let mut rng = rng();
    let mut worst = BTreeMap::new();
    let mut note = |k: &'static str, v: f64| {
        let e = worst.entry(k).or_insert(0.0f64);
        *e = e.max(v);
    };
    for trial in 0..40 {
        let nv = 1 + trial % 4;
        let p = Poly::random(&mut rng, nv, 6, 8);
        let q = Poly::random(&mut rng, nv, 3, 4);
        let x: Vec<f64> = (0..nv).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let vars = Jet::variables(&x, 6);
        let (jp, jq) = (p.jet(&vars), q.jet(&vars));
        note("arith", mismatch(&jp, &p, &x));
        note("mul", mismatch(&(&jp * &jq), &p.mul(&q), &x));
        note("sub", mismatch(&(&(&jp + &jq) - &jq), &p, &x));
        note(
            "scale",
            mismatch(
                &jp.scale(-2.5),
                &Poly {
                    nv,
                    terms: p.terms.iter().map(|(e, c)| (e.clone(), -2.5 * c)).collect(),
                },
                &x,
            ),
        );
        note(
            "powi",
            mismatch(&jq.powi(3).unwrap(), &q.mul(&q).mul(&q), &x),
        );
        let pq = p.mul(&q);
        if q.eval(&x).abs() > 0.2 {
            note(
                "div",
                mismatch(&pq.jet(&vars).try_div(&jq).unwrap(), &p, &x),
            );
        }
        let sq = p.mul(&p);
        if p.eval(&x) > 0.2 {
            note("sqrt", mismatch(&sq.jet(&vars).sqrt().unwrap(), &p, &x));
            note("ln_exp", mismatch(&jp.ln().unwrap().exp(), &p, &x));
        }
        for v in 0..nv {
            note(
                "derivative",
                mismatch(&jp.derivative(v).unwrap(), &p.diff(v), &x),
            );
        }
    }
    let max = worst.values().cloned().fold(0.0, f64::max);
    outcome(
        max < 1e-12,
        format!("max relative mismatch {max:.2e} {}", sci(&worst)),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let minute = Duration::from_secs(60);
    let criteria: [Criterion; 10] = [
        ("bianchi equivalence", bianchi, minute),
        ("moment-map property", moment_property, 5 * minute),
        (
            "moment map vanishes on homogeneous examples",
            moment_vanishes,
            minute,
        ),
        ("chern-weil identity", chern_identity, minute),
        ("trace identity", trace, minute),
        ("kahler class invariance", class_invariance, 10 * minute),
        (
            "moment and pontryagin invariants agree",
            prop41,
            10 * minute,
        ),
        ("character property", character, 10 * minute),
        ("topological sanity", topology, minute),
        ("jet oracle equivalence", jets, minute),
    ];
    // ACCEPTANCE_ONLY=3,9 runs a subset.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && elapsed <= *budget, o.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({:.1}s, budget {}s) {}",
            i + 1,
            name,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            detail
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
