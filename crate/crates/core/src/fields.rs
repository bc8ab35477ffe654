//! Holomorphic vector fields `Z = X_F + J X_H` and their Hamiltonian
//! potentials on Kähler charts.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::{ChartMap, ExprField, KahlerChart, ScalarField};
use crate::error::{GeomError, Result};
use crate::geometry::{invert_jet_matrix, truncate_all, values, PointGeometry};
use crate::jet::Jet;

/// A real holomorphic vector field on a chart together with its potentials
/// `(F, H)` with respect to the undeformed form of the chart.
pub trait HolomorphicField: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn real_dim(&self) -> usize;
    /// Components `Z^a` composed with the coordinate jets `vars`.
    fn components_of(&self, vars: &[Jet]) -> Result<Vec<Jet>>;

    /// Components `Z^a` as jets of the given order at `p`.
    fn components(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.components_of(&Jet::variables(p, order))
    }
    /// `(F, H)` for the base (undeformed) potential of `chart`, unnormalized.
    fn base_potentials(&self, chart: &KahlerChart, p: &[f64], order: usize) -> Result<(Jet, Jet)>;
    /// The affine form of the field, when it has one; used for brackets.
    fn as_linear(&self) -> Option<&LinearField> {
        None
    }
}

/// `Z^{1,0} = (A z + b)·∂_z` for a complex matrix `A` and vector `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub name: String,
    pub n: usize,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

impl LinearField {
    pub fn new(name: &str, n: usize, a: Vec<Complex64>, b: Vec<Complex64>) -> LinearField {
        assert_eq!(a.len(), n * n);
        assert_eq!(b.len(), n);
        LinearField {
            name: name.to_string(),
            n,
            a,
            b,
        }
    }

    pub fn from_matrix(name: &str, n: usize, a: Vec<Complex64>) -> LinearField {
        LinearField::new(name, n, a, vec![Complex64::new(0.0, 0.0); n])
    }

    /// `(a + i b)-th` multiple of the unit matrix entry `E_{ij}`.
    pub fn elementary(name: &str, n: usize, i: usize, j: usize, c: Complex64) -> LinearField {
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        a[i * n + j] = c;
        LinearField::from_matrix(name, n, a)
    }

    /// Real bracket `[Y, Z]`; for linear fields `[Z_A, Z_B] = Z_{BA − AB}`.
    pub fn bracket(&self, other: &LinearField) -> LinearField {
        let n = self.n;
        let mut c = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c[i * n + j] += other.a[i * n + k] * self.a[k * n + j]
                        - self.a[i * n + k] * other.a[k * n + j];
                }
            }
        }
        // Constant parts: [A z + a, B z + b] = (BA − AB) z + (B a − A b).
        let mut d = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for k in 0..n {
                d[i] += other.a[i * n + k] * self.b[k] - self.a[i * n + k] * other.b[k];
            }
        }
        LinearField::new(&format!("[{},{}]", self.name, other.name), n, c, d)
    }

    pub fn combine(&self, s: f64, other: &LinearField, t: f64, name: &str) -> LinearField {
        let a = self
            .a
            .iter()
            .zip(&other.a)
            .map(|(x, y)| x * s + y * t)
            .collect();
        let b = self
            .b
            .iter()
            .zip(&other.b)
            .map(|(x, y)| x * s + y * t)
            .collect();
        LinearField::new(name, self.n, a, b)
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(&self.b).all(|c| c.norm() == 0.0)
    }
}

impl HolomorphicField for LinearField {
    fn name(&self) -> &str {
        &self.name
    }
    fn as_linear(&self) -> Option<&LinearField> {
        Some(self)
    }

    fn real_dim(&self) -> usize {
        2 * self.n
    }

    fn components_of(&self, v: &[Jet]) -> Result<Vec<Jet>> {
        let n = self.n;
        if v.len() != 2 * n {
            return Err(GeomError::Dimension(format!(
                "point has {} coordinates, field expects {}",
                v.len(),
                2 * n
            )));
        }
        let (nv, order) = (v[0].num_vars(), v[0].order());
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut re = Jet::constant(nv, order, self.b[i].re);
            let mut im = Jet::constant(nv, order, self.b[i].im);
            for j in 0..n {
                let c = self.a[i * n + j];
                let (x, y) = (&v[2 * j], &v[2 * j + 1]);
                re.axpy(c.re, x);
                re.axpy(-c.im, y);
                im.axpy(c.im, x);
                im.axpy(c.re, y);
            }
            out.push(re);
            out.push(im);
        }
        Ok(out)
    }

    /// `F = (JZ)K`, `H = Z K` for the base potential `K`; this solves
    /// `i(Z)ω = dF + d^cH` wherever `K` is a global potential.
    fn base_potentials(&self, chart: &KahlerChart, p: &[f64], order: usize) -> Result<(Jet, Jet)> {
        let k = chart.base.jet(p, order + 1)?;
        directional_potentials(self, &k, p, order)
    }
}

/// `((JZ)k, Z k)` truncated to `order`.
fn directional_potentials(
    field: &dyn HolomorphicField,
    k: &Jet,
    p: &[f64],
    order: usize,
) -> Result<(Jet, Jet)> {
    let dim = field.real_dim();
    let dk = truncate_all(&k.gradient()?, order);
    let z = field.components(p, order)?;
    let mut f = Jet::zero(dim, order);
    let mut h = Jet::zero(dim, order);
    for c in 0..dim / 2 {
        let (zx, zy) = (&z[2 * c], &z[2 * c + 1]);
        let (kx, ky) = (&dk[2 * c], &dk[2 * c + 1]);
        h.add_product(1.0, zx, kx);
        h.add_product(1.0, zy, ky);
        // JZ = (−Z^y, Z^x) per coordinate pair.
        f.add_product(-1.0, zy, kx);
        f.add_product(1.0, zx, ky);
    }
    Ok((f, h))
}

/// Field given by component expressions and explicit potentials.
#[derive(Debug, Clone)]
pub struct ExprVectorField {
    pub name: String,
    pub components: Vec<ExprField>,
    pub f: ExprField,
    pub h: ExprField,
}

impl ExprVectorField {
    pub fn parse(name: &str, components: &[String], f: &str, h: &str) -> Result<ExprVectorField> {
        let d = components.len();
        if d == 0 || !d.is_multiple_of(2) {
            return Err(GeomError::Parse(format!(
                "field `{name}`: expected an even number of components, got {d}"
            )));
        }
        let comps = components
            .iter()
            .enumerate()
            .map(|(i, s)| {
                ExprField::parse(s, d).map_err(|e| {
                    GeomError::Parse(format!("field `{name}` component {}: {e}", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let f = ExprField::parse(f, d)
            .map_err(|e| GeomError::Parse(format!("field `{name}` F: {e}")))?;
        let h = ExprField::parse(h, d)
            .map_err(|e| GeomError::Parse(format!("field `{name}` H: {e}")))?;
        Ok(ExprVectorField {
            name: name.to_string(),
            components: comps,
            f,
            h,
        })
    }
}

impl HolomorphicField for ExprVectorField {
    fn name(&self) -> &str {
        &self.name
    }

    fn real_dim(&self) -> usize {
        self.components.len()
    }

    fn components_of(&self, vars: &[Jet]) -> Result<Vec<Jet>> {
        self.components.iter().map(|c| c.jet_of(vars)).collect()
    }

    fn base_potentials(&self, _chart: &KahlerChart, p: &[f64], order: usize) -> Result<(Jet, Jet)> {
        Ok((self.f.jet(p, order)?, self.h.jet(p, order)?))
    }
}

/// `(F^φ, H^φ) = (F + (JZ)φ, H + Zφ)` for the chart's deformation `φ`,
/// unnormalized, as jets of `order`.
pub fn field_potentials(
    field: &dyn HolomorphicField,
    chart: &KahlerChart,
    p: &[f64],
    order: usize,
) -> Result<(Jet, Jet)> {
    if field.real_dim() != chart.real_dim() {
        return Err(GeomError::Dimension(format!(
            "field `{}` has dimension {}, chart `{}` has {}",
            field.name(),
            field.real_dim(),
            chart.name,
            chart.real_dim()
        )));
    }
    let (mut f, mut h) = field.base_potentials(chart, p, order)?;
    if chart.is_deformed() {
        let phi = chart.deformation_jet(p, order + 1)?;
        let (df, dh) = directional_potentials(field, &phi, p, order)?;
        f += &df;
        h += &dh;
    }
    Ok((f, h))
}

/// Components of `Φ_*Z` at `w = Φ(z)` as jets of `order` in the chart of `map`.
pub fn pushforward_components(
    field: &dyn HolomorphicField,
    map: &ChartMap,
    w: &[f64],
    order: usize,
) -> Result<Vec<Jet>> {
    let d = w.len();
    let z = map.inverse_of(&Jet::variables(w, order + 1))?;
    // ∂z/∂w, then ∂w/∂z along z(w).
    let mut dz = Vec::with_capacity(d * d);
    for zi in &z {
        dz.extend(zi.gradient()?);
    }
    let dw = invert_jet_matrix(&dz, d)
        .ok_or_else(|| GeomError::Singular("chart transition Jacobian".into()))?;
    let zc = field.components_of(&truncate_all(&z, order))?;
    let mut out = vec![Jet::zero(d, order); d];
    for (a, o) in out.iter_mut().enumerate() {
        for (i, c) in zc.iter().enumerate() {
            o.add_product(1.0, &dw[a * d + i], c);
        }
    }
    Ok(out)
}

/// Pointwise residuals of the defining equations of a holomorphic field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldResiduals {
    /// `max |i(Z)ω − dF − d^cH|`.
    pub decomposition: f64,
    /// `max |ℒ_Z J|`.
    pub holomorphy: f64,
    /// `max |i(Z^{1,0})ω − ∂̄u|` with `u = F + iH`.
    pub u_equation: f64,
    /// `max |Z^a|`, for scaling.
    pub field_norm: f64,
}

impl FieldResiduals {
    pub fn max(&self) -> f64 {
        self.decomposition.max(self.holomorphy).max(self.u_equation)
    }

    pub fn merge(&self, other: &FieldResiduals) -> FieldResiduals {
        FieldResiduals {
            decomposition: self.decomposition.max(other.decomposition),
            holomorphy: self.holomorphy.max(other.holomorphy),
            u_equation: self.u_equation.max(other.u_equation),
            field_norm: self.field_norm.max(other.field_norm),
        }
    }
}

/// Residuals at one point, from the potentials `(f, h)` (order ≥ 1).
pub fn residuals_with(geom: &PointGeometry, z: &[Jet], f: &Jet, h: &Jet) -> Result<FieldResiduals> {
    let d = geom.dim;
    let w = values(&geom.omega);
    let j = &geom.j;
    let zv = values(z);
    let df = values(&f.gradient()?);
    let dh = values(&h.gradient()?);
    // (d^cH)_b = −∂_m H J^m_b
    let dch: Vec<f64> = (0..d)
        .map(|b| -(0..d).map(|m| dh[m] * j[m * d + b]).sum::<f64>())
        .collect();
    let iz: Vec<f64> = (0..d)
        .map(|b| (0..d).map(|a| zv[a] * w[a * d + b]).sum())
        .collect();
    let decomposition = (0..d).fold(0.0f64, |m, b| m.max((iz[b] - df[b] - dch[b]).abs()));

    let mut dz = vec![0.0; d * d];
    for i in 0..d {
        let g = z[i].gradient()?;
        for b in 0..d {
            dz[i * d + b] = g[b].value();
        }
    }
    let mut holomorphy = 0.0f64;
    for i in 0..d {
        for jj in 0..d {
            // (ℒ_Z J)^i_j = −J^a_j ∂_a Z^i + J^i_a ∂_j Z^a
            let s: f64 = (0..d)
                .map(|a| -j[a * d + jj] * dz[i * d + a] + j[i * d + a] * dz[a * d + jj])
                .sum();
            holomorphy = holomorphy.max(s.abs());
        }
    }

    // i(Z^{1,0})ω = ½(i_Zω − i·i_{JZ}ω);  ∂̄u = ½(du + i du∘J).
    let jz: Vec<f64> = (0..d)
        .map(|m| (0..d).map(|l| j[m * d + l] * zv[l]).sum())
        .collect();
    let ijz: Vec<f64> = (0..d)
        .map(|b| (0..d).map(|a| jz[a] * w[a * d + b]).sum())
        .collect();
    let mut u_equation = 0.0f64;
    for b in 0..d {
        let lhs = Complex64::new(0.5 * iz[b], -0.5 * ijz[b]);
        let du = Complex64::new(df[b], dh[b]);
        let du_j: Complex64 = (0..d)
            .map(|m| Complex64::new(df[m], dh[m]) * j[m * d + b])
            .sum();
        let rhs = (du + Complex64::i() * du_j) * 0.5;
        u_equation = u_equation.max((lhs - rhs).norm());
    }
    Ok(FieldResiduals {
        decomposition,
        holomorphy,
        u_equation,
        field_norm: zv.iter().fold(0.0f64, |m, x| m.max(x.abs())),
    })
}

/// Residuals of `field` on `chart` at `p`, with the deformation-corrected potentials.
pub fn holomorphic_residuals(
    field: &dyn HolomorphicField,
    chart: &KahlerChart,
    p: &[f64],
) -> Result<FieldResiduals> {
    let geom = PointGeometry::new(chart, p, 2)?;
    let z = field.components(p, 1)?;
    let (f, h) = field_potentials(field, chart, p, 1)?;
    residuals_with(&geom, &z, &f, &h)
}

/// Deterministic sample points in the unit-ish region of a chart.
pub fn sample_points(dim: usize, count: usize) -> Vec<Vec<f64>> {
    // Low-discrepancy additive recurrence.
    let alphas: Vec<f64> = (0..dim).map(|k| ((k + 2) as f64).sqrt().fract()).collect();
    (1..=count)
        .map(|i| {
            alphas
                .iter()
                .map(|a| 2.4 * ((i as f64 * a).fract() - 0.5))
                .collect()
        })
        .collect()
}

/// Checks residuals at sample points; fails with an invalid-field error if
/// any exceeds `threshold` (relative to `1 + |Z|`).
pub fn validate_field(
    field: &dyn HolomorphicField,
    chart: &KahlerChart,
    threshold: f64,
) -> Result<FieldResiduals> {
    let mut pts = sample_points(chart.real_dim(), 12);
    if let Some(supports) = chart.local_supports() {
        for s in supports {
            pts.push(s.center.clone());
            let mut q = s.center.clone();
            q[0] += 0.5 * s.radius;
            pts.push(q);
        }
    }
    let mut acc = FieldResiduals::default();
    for p in pts {
        if !chart.domain.contains(&p) {
            continue;
        }
        acc = acc.merge(&holomorphic_residuals(field, chart, &p)?);
    }
    if acc.max() > threshold * (1.0 + acc.field_norm) {
        return Err(GeomError::InvalidField {
            name: field.name().to_string(),
            residual: acc.max(),
            threshold,
        });
    }
    Ok(acc)
}

pub type FieldRef = Arc<dyn HolomorphicField>;
