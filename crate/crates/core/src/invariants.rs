//! Futaki-type invariants `F^ω`, `F_{c_k}`, `F_q` and the harnesses for
//! Kähler-class invariance and the character property.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::{Deformation, KahlerChart};
use crate::chern::{
    chern_forms, endo_l, generalized_futaki_integrand, omega_form, ChernPolynomial,
};
use crate::error::{GeomError, Result};
use crate::fields::{
    field_potentials, pushforward_components, validate_field, FieldResiduals, HolomorphicField,
    LinearField,
};
use crate::forms::omega_power;
use crate::geometry::{ChartPoint, PointGeometry};
use crate::jet::DEFAULT_ORDER;
use crate::moment::{moment_map_direct, moment_map_kahler, pontryagin_density, Frame};
use crate::quadrature::{Integral, QuadratureAtlas};

/// Default residual threshold for field validation.
pub const FIELD_THRESHOLD: f64 = 1e-8;

/// A complex number serialized as `{re, im}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(c: Complex64) -> Self {
        ComplexValue { re: c.re, im: c.im }
    }
}

impl From<ComplexValue> for Complex64 {
    fn from(c: ComplexValue) -> Self {
        Complex64::new(c.re, c.im)
    }
}

/// A complex quadrature value with an error estimate for its modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexIntegral {
    pub value: ComplexValue,
    pub error_estimate: f64,
}

impl ComplexIntegral {
    pub fn complex(&self) -> Complex64 {
        self.value.into()
    }
}

// Slot layout of the per-node integrand vector.
const VOL: usize = 0;
const F: usize = 1;
const H: usize = 2;
const M: usize = 3;
const HM: usize = 4;
const P: usize = 5;
const C1: usize = 6; // ρ, Fρ, Hρ as complex pairs
const C2: usize = 12;
const Q0: usize = 18; // per polynomial: σ, Fσ, Hσ, τ as complex pairs
const SLOTS_BASIC: usize = 6;
const SLOTS_ALL: usize = Q0 + 8 * 4;

/// What to compute at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Needs {
    pub chern: bool,
}

fn push_c(v: &mut [f64], at: usize, c: Complex64) {
    v[at] = c.re;
    v[at + 1] = c.im;
}

/// Integrand values at one node, premultiplied by the volume density.
fn node_integrand(
    chart: &KahlerChart,
    field: &dyn HolomorphicField,
    x: &[f64],
    needs: Needs,
) -> Result<Vec<f64>> {
    let cp = ChartPoint::new(chart, x, DEFAULT_ORDER)?;
    let geom = &cp.geom;
    let conn = geom.levi_civita()?;
    let curv = conn.curvature(&geom.g_inv)?;
    let lap = geom.laplacian(&curv.scal)?;
    let p = pontryagin_density(geom, &curv)?;
    let m = -0.5 * lap + p;
    let (fj, hj) = field_potentials(field, chart, x, 1)?;
    let (f, h) = (fj.value(), hj.value());
    let vol = cp.volume_density();
    let mut out = vec![0.0; if needs.chern { SLOTS_ALL } else { SLOTS_BASIC }];
    out[VOL] = 1.0;
    out[F] = f;
    out[H] = h;
    out[M] = m;
    out[HM] = h * m;
    out[P] = p;
    if needs.chern {
        let n = geom.complex_dim;
        let omega = omega_form(geom);
        let volf = omega_power(&omega, n);
        let ch = chern_forms(&curv);
        let rho1 = ch.c1.wedge(&omega.power(n - 1)).ratio_to(&volf)?;
        let rho2 = if n >= 2 {
            ch.c2.wedge(&omega.power(n - 2)).ratio_to(&volf)?
        } else {
            Complex64::new(0.0, 0.0)
        };
        for (base, rho) in [(C1, rho1), (C2, rho2)] {
            push_c(&mut out, base, rho);
            push_c(&mut out, base + 2, rho * f);
            push_c(&mut out, base + 4, rho * h);
        }
        let z = match &cp.map {
            None => field.components(x, 1)?,
            Some(map) => pushforward_components(field, map, &geom.point, 1)?,
        };
        let l = endo_l(geom, &conn.gamma, &z, 1e-6)?;
        for (qi, q) in ChernPolynomial::ALL.into_iter().enumerate() {
            let t = generalized_futaki_integrand(q, geom, &curv, &l, Complex64::new(1.0, 0.0))?;
            let base = Q0 + 8 * qi;
            push_c(&mut out, base, t.term1);
            push_c(&mut out, base + 2, t.term1 * f);
            push_c(&mut out, base + 4, t.term1 * h);
            push_c(&mut out, base + 6, t.term2);
        }
    }
    for v in &mut out {
        *v *= vol;
    }
    Ok(out)
}

/// Raw integrals of all node quantities for one chart and field.
#[derive(Debug, Clone)]
pub struct InvariantIntegrals {
    pub complex_dim: usize,
    pub slots: Vec<Integral>,
}

/// Real and imaginary parts as separate two-level integrals.
#[derive(Debug, Clone, Copy)]
struct CInt {
    re: Integral,
    im: Integral,
}

impl CInt {
    fn finish(self) -> ComplexIntegral {
        ComplexIntegral {
            value: Complex64::new(self.re.value, self.im.value).into(),
            error_estimate: self.re.error_estimate + self.im.error_estimate,
        }
    }

    fn scale(self, s: f64) -> CInt {
        CInt {
            re: self.re.scale(s),
            im: self.im.scale(s),
        }
    }

    fn add(self, o: CInt) -> CInt {
        CInt {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
}

impl InvariantIntegrals {
    fn get(&self, i: usize) -> Integral {
        self.slots[i]
    }

    fn complex(&self, i: usize) -> CInt {
        CInt {
            re: self.slots[i],
            im: self.slots[i + 1],
        }
    }

    pub fn volume(&self) -> Integral {
        self.get(VOL)
    }

    /// `μ₀`: the mean of `P`.
    pub fn mu0(&self) -> Integral {
        Integral::combine(&[self.get(P), self.get(VOL)], |v| v[0] / v[1])
    }

    /// `F^ω(Z) = ∫ (H − H̄) μ ωⁿ/n!`.
    pub fn f_omega(&self) -> Integral {
        let parts = [self.get(VOL), self.get(H), self.get(M), self.get(HM)];
        Integral::combine(&parts, |v| v[3] - v[1] * v[2] / v[0])
    }

    fn chern_available(&self) -> Result<()> {
        if self.slots.len() < SLOTS_ALL {
            return Err(GeomError::Unsupported(
                "Chern integrals were not computed".into(),
            ));
        }
        Ok(())
    }

    /// `∫ (u − ū) ρ` for the density block starting at `base`, where
    /// `u = F + iH` and `ρ` is complex.
    fn u_weighted(&self, base: usize) -> CInt {
        let rho = self.complex(base);
        let frho = self.complex(base + 2);
        let hrho = self.complex(base + 4);
        let parts = [
            self.get(VOL),
            self.get(F),
            self.get(H),
            rho.re,
            rho.im,
            frho.re,
            frho.im,
            hrho.re,
            hrho.im,
        ];
        let eval = |v: &[f64]| -> Complex64 {
            let ubar = Complex64::new(v[1], v[2]) / v[0];
            let rho = Complex64::new(v[3], v[4]);
            Complex64::new(v[5], v[6]) + Complex64::i() * Complex64::new(v[7], v[8]) - ubar * rho
        };
        CInt {
            re: Integral::combine(&parts, |v| eval(v).re),
            im: Integral::combine(&parts, |v| eval(v).im),
        }
    }

    /// `F_{c_k}(Z) = (n−k+1) ∫ u c_k ∧ ω^{n−k}`.
    pub fn f_chern(&self, k: usize) -> Result<ComplexIntegral> {
        self.chern_available()?;
        let n = self.complex_dim;
        if k == 0 || k > n || k > 2 {
            return Err(GeomError::Dimension(format!(
                "Chern index {k} not available in complex dimension {n}"
            )));
        }
        let base = if k == 1 { C1 } else { C2 };
        Ok(self.u_weighted(base).scale((n - k + 1) as f64).finish())
    }

    fn f_q_parts(&self, q: ChernPolynomial) -> Result<(CInt, CInt)> {
        self.chern_available()?;
        let qi = ChernPolynomial::ALL.iter().position(|p| *p == q).unwrap();
        let base = Q0 + 8 * qi;
        Ok((self.u_weighted(base), self.complex(base + 6)))
    }

    /// `F_q(Z)` as its two terms.
    pub fn f_q(&self, q: ChernPolynomial) -> Result<(ComplexIntegral, ComplexIntegral)> {
        let (a, b) = self.f_q_parts(q)?;
        Ok((a.finish(), b.finish()))
    }

    pub fn f_q_total(&self, q: ChernPolynomial) -> Result<ComplexIntegral> {
        let (a, b) = self.f_q_parts(q)?;
        Ok(a.add(b).finish())
    }

    /// `(8π²/(n−1)!) F_{c₂ − ½c₁c₁}(Z)`, whose imaginary part is compared with `F^ω`.
    pub fn scaled_pontryagin_invariant(&self) -> Result<ComplexIntegral> {
        let s = 8.0 * PI * PI / factorial(self.complex_dim - 1);
        let (a, b) = self.f_q_parts(ChernPolynomial::C2MinusHalfC1C1)?;
        Ok(a.add(b).scale(s).finish())
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Integrates every node quantity for `field` on `chart`.
pub fn integrate_invariants(
    chart: &KahlerChart,
    field: &dyn HolomorphicField,
    atlas: &QuadratureAtlas,
    needs: Needs,
) -> Result<InvariantIntegrals> {
    let slots = if needs.chern { SLOTS_ALL } else { SLOTS_BASIC };
    let r = atlas.integrate_densities(chart, slots, |c, x| node_integrand(c, field, x, needs))?;
    Ok(InvariantIntegrals {
        complex_dim: chart.complex_dim,
        slots: r,
    })
}

/// `F^ω(Z)`, after validating the field's residuals on `chart`.
pub fn futaki_moment(
    field: &dyn HolomorphicField,
    chart: &KahlerChart,
    atlas: &QuadratureAtlas,
) -> Result<Integral> {
    validate_field(field, chart, FIELD_THRESHOLD)?;
    Ok(integrate_invariants(chart, field, atlas, Needs { chern: false })?.f_omega())
}

pub fn futaki_chern(
    field: &dyn HolomorphicField,
    chart: &KahlerChart,
    atlas: &QuadratureAtlas,
    k: usize,
) -> Result<ComplexIntegral> {
    if k == 0 || k > chart.complex_dim {
        return Err(GeomError::Dimension(format!(
            "k = {k} exceeds complex dimension {}",
            chart.complex_dim
        )));
    }
    validate_field(field, chart, FIELD_THRESHOLD)?;
    integrate_invariants(chart, field, atlas, Needs { chern: true })?.f_chern(k)
}

pub fn futaki_generalized(
    field: &dyn HolomorphicField,
    chart: &KahlerChart,
    atlas: &QuadratureAtlas,
    q: ChernPolynomial,
) -> Result<(ComplexIntegral, ComplexIntegral)> {
    validate_field(field, chart, FIELD_THRESHOLD)?;
    integrate_invariants(chart, field, atlas, Needs { chern: true })?.f_q(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub manifold: String,
    pub field: String,
    pub nodes_per_axis: Vec<usize>,
    #[serde(rename = "F_omega")]
    pub f_omega: f64,
    #[serde(rename = "F_omega_error")]
    pub f_omega_error: f64,
    #[serde(rename = "F_ck")]
    pub f_ck: BTreeMap<String, ComplexIntegral>,
    #[serde(rename = "F_q")]
    pub f_q: BTreeMap<String, ComplexIntegral>,
    pub f_q_terms: BTreeMap<String, [ComplexIntegral; 2]>,
    pub pontryagin_invariant: ComplexIntegral,
    pub vol: f64,
    pub vol_error: f64,
    pub mu0: f64,
    pub quad_error_estimate: f64,
    pub residuals: FieldResiduals,
}

/// All invariants for one field in a single quadrature pass. Fields whose
/// holomorphy residuals exceed `threshold` are rejected.
pub fn compute_report(
    chart: &KahlerChart,
    field: &dyn HolomorphicField,
    atlas: &QuadratureAtlas,
    threshold: f64,
) -> Result<InvariantReport> {
    let residuals = validate_field(field, chart, threshold)?;
    let ints = integrate_invariants(chart, field, atlas, Needs { chern: true })?;
    let f_omega = ints.f_omega();
    let mut f_ck = BTreeMap::new();
    for k in 1..=chart.complex_dim.min(2) {
        f_ck.insert(k.to_string(), ints.f_chern(k)?);
    }
    let mut f_q = BTreeMap::new();
    let mut f_q_terms = BTreeMap::new();
    let mut worst = f_omega.error_estimate;
    for q in ChernPolynomial::ALL {
        let (a, b) = ints.f_q(q)?;
        let t = ints.f_q_total(q)?;
        worst = worst.max(t.error_estimate);
        f_q.insert(q.name().to_string(), t);
        f_q_terms.insert(q.name().to_string(), [a, b]);
    }
    let pont = ints.scaled_pontryagin_invariant()?;
    Ok(InvariantReport {
        manifold: chart.name.clone(),
        field: field.name().to_string(),
        nodes_per_axis: atlas.nodes_per_axis.clone(),
        f_omega: f_omega.value,
        f_omega_error: f_omega.error_estimate,
        f_ck,
        f_q,
        f_q_terms,
        pontryagin_invariant: pont,
        vol: ints.volume().value,
        vol_error: ints.volume().error_estimate,
        mu0: ints.mu0().value,
        quad_error_estimate: worst,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInvarianceRow {
    pub amplitude: f64,
    pub f_omega: f64,
    pub error_estimate: f64,
}

/// `F^{ω_φ}(Z)` for `φ = amplitude · template` over the given amplitudes.
pub fn class_invariance_check(
    chart: &KahlerChart,
    field: &dyn HolomorphicField,
    template: &Deformation,
    amplitudes: &[f64],
    atlas: &QuadratureAtlas,
) -> Result<Vec<ClassInvarianceRow>> {
    let mut rows = Vec::with_capacity(amplitudes.len());
    for &a in amplitudes {
        let mut d = template.clone();
        d.amplitude = a;
        let deformed = chart.with_deformation(d)?;
        let f = futaki_moment(field, &deformed, atlas).map_err(|e| match e {
            GeomError::NotKahler(p) => GeomError::RejectedAmplitude {
                amplitude: a,
                reason: format!("metric not positive definite at {p:?}"),
            },
            other => other,
        })?;
        rows.push(ClassInvarianceRow {
            amplitude: a,
            f_omega: f.value,
            error_estimate: f.error_estimate,
        });
    }
    Ok(rows)
}

/// `F^ω([Y, Z])`, expected to vanish.
pub fn character_check(
    y: &LinearField,
    z: &LinearField,
    chart: &KahlerChart,
    atlas: &QuadratureAtlas,
) -> Result<Integral> {
    let b = y.bracket(z);
    if b.is_zero() {
        return Ok(Integral::zero());
    }
    futaki_moment(&b, chart, atlas)
}

/// Statistics of `μ` over the global quadrature nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentStatistics {
    pub mu0: f64,
    pub max_abs: f64,
    pub mean: f64,
    pub l2: f64,
    /// Largest `|direct − Kähler|` difference seen.
    pub bianchi_max: f64,
}

/// `μ` at every node of the global rule of an undeformed chart.
pub fn moment_statistics(chart: &KahlerChart, atlas: &QuadratureAtlas) -> Result<MomentStatistics> {
    let vals = atlas.map_nodes(|x| {
        let cp = ChartPoint::new(chart, x, DEFAULT_ORDER)?;
        let conn = cp.geom.levi_civita()?;
        let d = moment_map_direct(&cp.geom, &conn, 0.0, Frame::Coordinate)?;
        let k = moment_map_kahler(&cp.geom, &conn, 0.0)?;
        Ok((
            d.mu_raw,
            d.p_density,
            (d.mu_raw - k.mu_raw).abs(),
            cp.volume_density(),
        ))
    })?;
    let nodes = atlas.nodes();
    let weights: Vec<f64> = nodes.iter().zip(&vals).map(|((_, w), v)| w * v.3).collect();
    type NodeValues = (f64, f64, f64, f64);
    let sum = |f: &dyn Fn(&NodeValues) -> f64| -> f64 {
        crate::quadrature::compensated_sum(vals.iter().zip(&weights).map(|(v, w)| f(v) * w))
    };
    let vol = sum(&|_| 1.0);
    let mu0 = sum(&|v| v.1) / vol;
    let mean = sum(&|v| v.0 - mu0) / vol;
    let l2 = sum(&|v| (v.0 - mu0).powi(2)).sqrt();
    let max_abs = vals.iter().fold(0.0f64, |m, v| m.max((v.0 - mu0).abs()));
    let bianchi_max = vals.iter().fold(0.0f64, |m, v| m.max(v.2));
    Ok(MomentStatistics {
        mu0,
        max_abs,
        mean,
        l2,
        bianchi_max,
    })
}

/// Both sides of `tr L(Z^{1,0}) = −(i/2)(ΔF + iΔH)` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceIdentity {
    pub trace: ComplexValue,
    pub expected: ComplexValue,
    pub residual: f64,
}

pub fn trace_identity(
    chart: &KahlerChart,
    field: &dyn HolomorphicField,
    p: &[f64],
) -> Result<TraceIdentity> {
    let geom = PointGeometry::new(chart, p, 4)?;
    let conn = geom.levi_civita()?;
    let l = endo_l(&geom, &conn.gamma, &field.components(p, 1)?, 1e-6)?;
    let (f, h) = field_potentials(field, chart, p, 2)?;
    let (lf, lh) = (geom.laplacian(&f)?, geom.laplacian(&h)?);
    let expected = Complex64::new(0.0, -0.5) * Complex64::new(lf, lh);
    let trace = l.trace();
    Ok(TraceIdentity {
        trace: trace.into(),
        expected: expected.into(),
        residual: (trace - expected).norm(),
    })
}
