//! Chern–Weil forms of the holomorphic tangent bundle and the integrands of
//! generalized Futaki invariants.
//!
//! A real endomorphism `E` commuting with `J` acts on `T^{1,0}` through the
//! complex matrix `E_{ab} = E^{x_a}_{x_b} + i E^{y_a}_{x_b}` in the basis
//! `∂_{z_b} ↔ ∂_{x_b}`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::forms::{omega_power, FormValue};
use crate::geometry::{values, CurvatureBundle, PointGeometry};
use crate::jet::Jet;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn i_over_2pi() -> Complex64 {
    Complex64::new(0.0, 1.0 / (2.0 * PI))
}

/// Real 2-form `R^i_j` of the curvature endomorphism.
fn real_curvature_form(curv: &CurvatureBundle, i: usize, j: usize) -> FormValue {
    let d = curv.dim;
    let comps: Vec<f64> = (0..d * d)
        .map(|kl| curv.riemann_at(i, j, kl / d, kl % d))
        .collect();
    FormValue::real_two_form(d, &comps)
}

/// `n × n` matrix of complex 2-forms representing `R` on `T^{1,0}`.
pub fn complex_curvature(curv: &CurvatureBundle) -> Vec<FormValue> {
    let d = curv.dim;
    let n = d / 2;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let comps: Vec<Complex64> = (0..d * d)
                .map(|kl| {
                    let (k, l) = (kl / d, kl % d);
                    Complex64::new(
                        curv.riemann_at(2 * a, 2 * b, k, l),
                        curv.riemann_at(2 * a + 1, 2 * b, k, l),
                    )
                })
                .collect();
            out.push(FormValue::two_form(d, &comps));
        }
    }
    out
}

/// `ω` as a form from the geometry's base-point values.
pub fn omega_form(geom: &PointGeometry) -> FormValue {
    FormValue::real_two_form(geom.dim, &values(&geom.omega))
}

#[derive(Debug, Clone)]
pub struct ChernForms {
    pub c1: FormValue,
    pub c2: FormValue,
}

/// `c₁ = (i/2π) tr M`, `c₂ = ½((tr A)² − tr A²)` with `A = (i/2π) M`.
pub fn chern_forms(curv: &CurvatureBundle) -> ChernForms {
    let d = curv.dim;
    let n = d / 2;
    let m = complex_curvature(curv);
    let s = i_over_2pi();
    let mut tr = FormValue::zero(d, 2);
    for a in 0..n {
        tr = tr.add(&m[a * n + a]);
    }
    let mut tr_sq = FormValue::zero(d, 4);
    for a in 0..n {
        for b in 0..n {
            tr_sq = tr_sq.add(&m[a * n + b].wedge(&m[b * n + a]));
        }
    }
    let c2 = tr
        .wedge(&tr)
        .add(&tr_sq.scale_real(-1.0))
        .scale(s * s * 0.5);
    ChernForms {
        c1: tr.scale(s),
        c2,
    }
}

/// `tr(R ∘∧ R) = Σ R^i_j ∧ R^j_i` as a real 4-form.
pub fn trace_curvature_square(curv: &CurvatureBundle) -> FormValue {
    let d = curv.dim;
    let forms: Vec<FormValue> = (0..d * d)
        .map(|ij| real_curvature_form(curv, ij / d, ij % d))
        .collect();
    let mut acc = FormValue::zero(d, 4);
    for i in 0..d {
        for j in 0..d {
            acc = acc.add(&forms[i * d + j].wedge(&forms[j * d + i]));
        }
    }
    acc
}

/// Largest component of `tr(R∘∧R) − 16π²(c₂ − ½c₁∧c₁)`.
pub fn pontryagin_identity_residual(curv: &CurvatureBundle) -> f64 {
    let lhs = trace_curvature_square(curv);
    let ch = chern_forms(curv);
    let rhs = ch
        .c2
        .add(&ch.c1.wedge(&ch.c1).scale_real(-0.5))
        .scale_real(16.0 * PI * PI);
    lhs.max_abs_diff(&rhs)
}

/// Ricci form `ρ(X, Y) = Ric(JX, Y)`.
pub fn ricci_form(geom: &PointGeometry, curv: &CurvatureBundle) -> FormValue {
    let d = geom.dim;
    let ric = values(&curv.ricci);
    let mut comps = vec![0.0; d * d];
    for k in 0..d {
        for l in 0..d {
            comps[k * d + l] = (0..d).map(|m| geom.j[m * d + k] * ric[m * d + l]).sum();
        }
    }
    FormValue::real_two_form(d, &comps)
}

/// `L(Z^{1,0})` on `T^{1,0}`, stored as `W ↦ −∇_W Z`.
///
/// With the curvature convention `R(X,Y) = [∇_X, ∇_Y] − ∇_{[X,Y]}` this is
/// the sign for which `F_q` does not depend on the metric in its class and
/// `tr L = −(i/2)(ΔF + iΔH)` holds with the same Laplacian as in `μ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndoL {
    pub n: usize,
    pub matrix: Vec<Complex64>,
    /// Largest component of `[∇Z, J]`; zero for holomorphic `Z`.
    pub holomorphy_residual: f64,
}

impl EndoL {
    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|a| self.matrix[a * self.n + a]).sum()
    }
}

/// Builds `L(Z^{1,0})` from the real field `z` (jets of order ≥ 1) and the
/// connection at the geometry's point. Rejects fields whose covariant
/// derivative is not complex linear beyond `threshold`.
pub fn endo_l(geom: &PointGeometry, gamma: &[Jet], z: &[Jet], threshold: f64) -> Result<EndoL> {
    let d = geom.dim;
    let n = geom.complex_dim;
    if z.len() != d {
        return Err(GeomError::Dimension(format!(
            "field has {} components, expected {d}",
            z.len()
        )));
    }
    // (∇Z)^i_b = ∂_b Z^i + Γ^i_{bm} Z^m
    let mut nz = vec![0.0; d * d];
    for i in 0..d {
        let dz = z[i].gradient()?;
        for b in 0..d {
            let mut s = dz[b].value();
            for m in 0..d {
                s += gamma[(i * d + b) * d + m].value() * z[m].value();
            }
            nz[i * d + b] = s;
        }
    }
    let mut residual = 0.0f64;
    for i in 0..d {
        for b in 0..d {
            let mut s = 0.0;
            for m in 0..d {
                s += nz[i * d + m] * geom.j[m * d + b] - geom.j[i * d + m] * nz[m * d + b];
            }
            residual = residual.max(s.abs());
        }
    }
    let scale = nz.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if residual > threshold * scale {
        return Err(GeomError::InvalidField {
            name: "L(Z)".into(),
            residual,
            threshold,
        });
    }
    let mut matrix = vec![ZERO; n * n];
    for a in 0..n {
        for b in 0..n {
            matrix[a * n + b] =
                -Complex64::new(nz[(2 * a) * d + 2 * b], nz[(2 * a + 1) * d + 2 * b]);
        }
    }
    Ok(EndoL {
        n,
        matrix,
        holomorphy_residual: residual,
    })
}

/// Degree-two invariant polynomials on `gl(n, ℂ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernPolynomial {
    C1C1,
    C2,
    C2MinusHalfC1C1,
    Td2,
}

impl ChernPolynomial {
    pub const ALL: [ChernPolynomial; 4] = [
        ChernPolynomial::C1C1,
        ChernPolynomial::C2,
        ChernPolynomial::C2MinusHalfC1C1,
        ChernPolynomial::Td2,
    ];

    /// Coefficients `(a, b)` with `q = a·c₁c₁ + b·c₂`.
    pub fn coefficients(self) -> (f64, f64) {
        match self {
            ChernPolynomial::C1C1 => (1.0, 0.0),
            ChernPolynomial::C2 => (0.0, 1.0),
            ChernPolynomial::C2MinusHalfC1C1 => (-0.5, 1.0),
            // Td₂ = c₂ + c₁·c₁, normalization kept as stated by the source.
            ChernPolynomial::Td2 => (1.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChernPolynomial::C1C1 => "c1c1",
            ChernPolynomial::C2 => "c2",
            ChernPolynomial::C2MinusHalfC1C1 => "c2_minus_half_c1c1",
            ChernPolynomial::Td2 => "td2",
        }
    }
}

impl fmt::Display for ChernPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChernPolynomial {
    type Err = GeomError;
    fn from_str(s: &str) -> Result<Self> {
        ChernPolynomial::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| GeomError::Unsupported(format!("invariant polynomial `{s}`")))
    }
}

/// Pointwise densities (relative to `ωⁿ/n!`) of the two terms of `F_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FutakiIntegrand {
    pub term1: Complex64,
    pub term2: Complex64,
}

/// `term1 = (n−1) u q(R)∧ω^{n−2}`; `term2` is the part of `q(L+R)∧ω^{n−1}`
/// linear in `L`, i.e. the polarization `2 q(L, R)` wedged with `ω^{n−1}`.
/// Powers of `ω` are plain wedge powers.
pub fn generalized_futaki_integrand(
    q: ChernPolynomial,
    geom: &PointGeometry,
    curv: &CurvatureBundle,
    l: &EndoL,
    u: Complex64,
) -> Result<FutakiIntegrand> {
    let n = geom.complex_dim;
    let d = geom.dim;
    let omega = omega_form(geom);
    let vol = omega_power(&omega, n);
    let (a, b) = q.coefficients();
    let s = i_over_2pi();
    let m = complex_curvature(curv);

    let term1 = if n >= 2 {
        let ch = chern_forms(curv);
        let qr = ch.c1.wedge(&ch.c1).scale_real(a).add(&ch.c2.scale_real(b));
        let top = qr.wedge(&omega.power(n - 2));
        top.ratio_to(&vol)? * u * (n as f64 - 1.0)
    } else {
        ZERO
    };

    // c₁c₁ → 2 (i/2π)² tr L tr R;   c₂ → (i/2π)² (tr L tr R − tr(LR)).
    let tr_l = l.trace();
    let mut tr_r = FormValue::zero(d, 2);
    let mut tr_lr = FormValue::zero(d, 2);
    for i in 0..n {
        tr_r = tr_r.add(&m[i * n + i]);
        for k in 0..n {
            tr_lr = tr_lr.add(&m[k * n + i].scale(l.matrix[i * n + k]));
        }
    }
    let pol = tr_r
        .scale(tr_l * (2.0 * a + b))
        .add(&tr_lr.scale_real(-b))
        .scale(s * s);
    let term2 = pol.wedge(&omega.power(n - 1)).ratio_to(&vol)?;
    Ok(FutakiIntegrand { term1, term2 })
}
