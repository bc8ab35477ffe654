//! Holomorphic charts carrying a Kähler potential.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::quadrature::Compactification;

/// A scalar function of the real chart coordinates that can be expanded as a jet.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn num_vars(&self) -> usize;

    /// The function composed with `vars`, one jet per chart coordinate.
    fn jet_of(&self, vars: &[Jet]) -> Result<Jet>;

    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        self.jet_of(&Jet::variables(p, order))
    }

    fn value(&self, p: &[f64]) -> Result<f64> {
        Ok(self.jet(p, 0)?.value())
    }
}

fn squared_norm(vars: &[Jet]) -> Jet {
    let mut acc = Jet::zero(vars[0].num_vars(), vars[0].order());
    for v in vars {
        acc += &(v * v);
    }
    acc
}

/// `log(1 + |z|²)` on the affine chart of CPⁿ.
#[derive(Debug, Clone)]
pub struct FubiniStudy {
    pub complex_dim: usize,
}

impl ScalarField for FubiniStudy {
    fn num_vars(&self) -> usize {
        2 * self.complex_dim
    }

    fn jet_of(&self, vars: &[Jet]) -> Result<Jet> {
        squared_norm(vars).add_scalar(1.0).ln()
    }
}

/// Sum of one-dimensional Fubini–Study potentials, one per complex coordinate.
#[derive(Debug, Clone)]
pub struct ProductFubiniStudy {
    pub factors: usize,
}

impl ScalarField for ProductFubiniStudy {
    fn num_vars(&self) -> usize {
        2 * self.factors
    }

    fn jet_of(&self, vars: &[Jet]) -> Result<Jet> {
        let mut acc = Jet::zero(vars[0].num_vars(), vars[0].order());
        for a in 0..self.factors {
            let r2 = squared_norm(&vars[2 * a..2 * a + 2]);
            acc += &r2.add_scalar(1.0).ln()?;
        }
        Ok(acc)
    }
}

/// `¼|x|²`, the flat potential with `ω = Σ dx_a ∧ dy_a` and Euclidean `g`.
#[derive(Debug, Clone)]
pub struct FlatPotential {
    pub complex_dim: usize,
}

impl ScalarField for FlatPotential {
    fn num_vars(&self) -> usize {
        2 * self.complex_dim
    }

    fn jet_of(&self, vars: &[Jet]) -> Result<Jet> {
        Ok(squared_norm(vars).scale(0.25))
    }
}

#[derive(Debug, Clone)]
pub struct ExprField {
    pub expr: Expr,
    pub num_vars: usize,
}

impl ExprField {
    pub fn parse(src: &str, num_vars: usize) -> Result<ExprField> {
        Ok(ExprField {
            expr: Expr::parse(src, num_vars)?,
            num_vars,
        })
    }
}

impl ScalarField for ExprField {
    fn num_vars(&self) -> usize {
        self.num_vars
    }

    fn jet_of(&self, vars: &[Jet]) -> Result<Jet> {
        self.expr.jet(vars)
    }
}

/// A closed ball in chart coordinates of any dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Support {
    pub fn contains(&self, p: &[f64]) -> bool {
        self.normalized_r2(p) < 1.0
    }

    pub fn normalized_r2(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum::<f64>()
            / (self.radius * self.radius)
    }

    pub fn overlaps(&self, other: &Support) -> bool {
        let d2: f64 = self
            .center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        d2.sqrt() < self.radius + other.radius
    }
}

/// Radial bump profile `(1 − |x−c|²/ρ²)⁶` inside the ball, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub support: Support,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64) -> Bump {
        Bump {
            support: Support { center, radius },
        }
    }

    pub fn jet_at(&self, p: &[f64], order: usize) -> Jet {
        self.compose(&Jet::variables(p, order))
    }

    /// The bump composed with `vars`; zero when their value lies outside.
    pub fn compose(&self, vars: &[Jet]) -> Jet {
        let (nv, order) = (vars[0].num_vars(), vars[0].order());
        let p: Vec<f64> = vars.iter().map(Jet::value).collect();
        if !self.support.contains(&p) {
            return Jet::zero(nv, order);
        }
        let inv = 1.0 / (self.support.radius * self.support.radius);
        let mut s = Jet::zero(nv, order);
        for (v, c) in vars.iter().zip(&self.support.center) {
            let d = v.add_scalar(-c);
            s.axpy(inv, &(&d * &d));
        }
        let one_minus = (-&s).add_scalar(1.0);
        one_minus.powi(6).expect("nonnegative integer power")
    }
}

impl ScalarField for Bump {
    fn num_vars(&self) -> usize {
        self.support.center.len()
    }

    fn jet_of(&self, vars: &[Jet]) -> Result<Jet> {
        Ok(self.compose(vars))
    }
}

/// A term `amplitude · field` added to the base potential. When `support`
/// is set, the field vanishes identically outside that ball.
#[derive(Debug, Clone)]
pub struct Deformation {
    pub field: Arc<dyn ScalarField>,
    pub amplitude: f64,
    pub support: Option<Support>,
}

impl Deformation {
    pub fn bump(center: Vec<f64>, radius: f64, amplitude: f64) -> Deformation {
        let bump = Bump::new(center, radius);
        let support = Some(bump.support.clone());
        Deformation {
            field: Arc::new(bump),
            amplitude,
            support,
        }
    }

    pub fn global(field: Arc<dyn ScalarField>, amplitude: f64) -> Deformation {
        Deformation {
            field,
            amplitude,
            support: None,
        }
    }
}

/// Region of ℝ^{2n} on which the chart is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartDomain {
    Whole,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl ChartDomain {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            ChartDomain::Whole => true,
            ChartDomain::Box { lo, hi } => p
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (a, b))| *x >= *a && *x <= *b),
            ChartDomain::Ball { center, radius } => {
                p.iter()
                    .zip(center)
                    .map(|(x, c)| (x - c) * (x - c))
                    .sum::<f64>()
                    <= radius * radius
            }
        }
    }
}

/// A Kähler manifold presented by one holomorphic chart: `ω = dd^c(base + Σ deformations)`.
#[derive(Debug, Clone)]
pub struct KahlerChart {
    pub name: String,
    pub complex_dim: usize,
    pub base: Arc<dyn ScalarField>,
    pub deformations: Vec<Deformation>,
    pub domain: ChartDomain,
    pub compactification: Compactification,
    /// Second chart for points far out in this one.
    pub transition: Option<Transition>,
}

impl KahlerChart {
    pub fn new(
        name: impl Into<String>,
        complex_dim: usize,
        base: Arc<dyn ScalarField>,
        domain: ChartDomain,
        compactification: Compactification,
    ) -> Result<KahlerChart> {
        if complex_dim == 0 || 2 * complex_dim > crate::jet::MAX_VARS {
            return Err(GeomError::Dimension(format!(
                "complex dimension {complex_dim} outside 1..={}",
                crate::jet::MAX_VARS / 2
            )));
        }
        if base.num_vars() != 2 * complex_dim {
            return Err(GeomError::Dimension(format!(
                "potential uses {} variables, chart needs {}",
                base.num_vars(),
                2 * complex_dim
            )));
        }
        Ok(KahlerChart {
            name: name.into(),
            complex_dim,
            base,
            deformations: Vec::new(),
            domain,
            compactification,
            transition: None,
        })
    }

    /// Declares a second chart in which the base potential has the same form.
    pub fn with_transition(mut self, transition: Transition) -> KahlerChart {
        self.transition = Some(transition);
        self
    }

    /// The chart map to use at `p`, when `p` is better handled in the second chart.
    pub fn far_map(&self, p: &[f64]) -> Option<ChartMap> {
        self.transition?.map_at(p)
    }

    /// This manifold in the coordinates of `map`: the base potential is
    /// reused and deformations are pulled back.
    pub fn far_chart(&self, map: &ChartMap) -> KahlerChart {
        let deformations = self
            .deformations
            .iter()
            .filter(|d| d.amplitude != 0.0)
            .map(|d| Deformation {
                field: Arc::new(Pullback {
                    field: d.field.clone(),
                    map: map.clone(),
                }),
                amplitude: d.amplitude,
                support: None,
            })
            .collect();
        KahlerChart {
            name: self.name.clone(),
            complex_dim: self.complex_dim,
            base: self.base.clone(),
            deformations,
            domain: ChartDomain::Whole,
            compactification: self.compactification.clone(),
            transition: None,
        }
    }

    pub fn real_dim(&self) -> usize {
        2 * self.complex_dim
    }

    /// Same chart with one more deformation term.
    pub fn with_deformation(&self, deformation: Deformation) -> Result<KahlerChart> {
        if deformation.field.num_vars() != self.real_dim() {
            return Err(GeomError::Dimension(
                "deformation arity differs from chart dimension".into(),
            ));
        }
        let mut out = self.clone();
        out.deformations.push(deformation);
        Ok(out)
    }

    /// Chart with every deformation amplitude multiplied by `s`.
    pub fn scaled_deformations(&self, s: f64) -> KahlerChart {
        let mut out = self.clone();
        for d in &mut out.deformations {
            d.amplitude *= s;
        }
        out
    }

    /// The undeformed chart.
    pub fn base_chart(&self) -> KahlerChart {
        let mut out = self.clone();
        out.deformations.clear();
        out
    }

    pub fn is_deformed(&self) -> bool {
        self.deformations.iter().any(|d| d.amplitude != 0.0)
    }

    /// Balls outside of which the deformed potential equals the base one,
    /// or `None` when some deformation is global.
    pub fn local_supports(&self) -> Option<Vec<Support>> {
        self.deformations
            .iter()
            .filter(|d| d.amplitude != 0.0)
            .map(|d| d.support.clone())
            .collect()
    }

    pub fn potential_jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        let mut k = self.base.jet(p, order)?;
        for d in &self.deformations {
            if d.amplitude == 0.0 {
                continue;
            }
            if let Some(s) = &d.support {
                if !s.contains(p) {
                    continue;
                }
            }
            k.axpy(d.amplitude, &d.field.jet(p, order)?);
        }
        if !k.is_finite() {
            return Err(GeomError::Domain(format!(
                "potential is not finite at {p:?}"
            )));
        }
        Ok(k)
    }

    /// Total deformation `φ = Σ amplitude · field` as a jet.
    pub fn deformation_jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        let mut phi = Jet::zero(p.len(), order);
        for d in &self.deformations {
            if d.amplitude == 0.0 {
                continue;
            }
            if let Some(s) = &d.support {
                if !s.contains(p) {
                    continue;
                }
            }
            phi.axpy(d.amplitude, &d.field.jet(p, order)?);
        }
        Ok(phi)
    }
}

/// Kinds of second chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// Affine charts of CPⁿ: divide by the dominant homogeneous coordinate.
    /// The Fubini–Study potential keeps its form up to a pluriharmonic term.
    Projective,
    /// `z_a ↦ 1/z_a` on each factor with `|z_a| > 1`.
    FactorInversion,
}

impl Transition {
    pub fn map_at(self, p: &[f64]) -> Option<ChartMap> {
        let n = p.len() / 2;
        let abs2 = |a: usize| p[2 * a] * p[2 * a] + p[2 * a + 1] * p[2 * a + 1];
        match self {
            Transition::Projective => {
                let pivot = (0..n).max_by(|&a, &b| abs2(a).total_cmp(&abs2(b)))?;
                (abs2(pivot) > 1.0).then_some(ChartMap::Projective { pivot })
            }
            Transition::FactorInversion => {
                let mask: Vec<bool> = (0..n).map(|a| abs2(a) > 1.0).collect();
                mask.iter()
                    .any(|&m| m)
                    .then_some(ChartMap::FactorInversion { mask })
            }
        }
    }
}

/// A holomorphic coordinate change `w = Φ(z)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChartMap {
    /// `w_pivot = 1/z_pivot`, `w_j = z_j/z_pivot` otherwise.
    Projective {
        pivot: usize,
    },
    FactorInversion {
        mask: Vec<bool>,
    },
}

fn c_mul(a: (&Jet, &Jet), b: (&Jet, &Jet)) -> (Jet, Jet) {
    let mut re = a.0 * b.0;
    re.add_product(-1.0, a.1, b.1);
    let mut im = a.0 * b.1;
    im.add_product(1.0, a.1, b.0);
    (re, im)
}

fn c_recip(a: (&Jet, &Jet)) -> Result<(Jet, Jet)> {
    let mut n = a.0 * a.0;
    n.add_product(1.0, a.1, a.1);
    let inv = n.recip()?;
    Ok((a.0 * &inv, -&(a.1 * &inv)))
}

impl ChartMap {
    /// `z = Φ⁻¹(w)` composed with jets `w`. Each map here is an involution
    /// up to the choice of pivot slot, so this also gives `Φ` on points.
    pub fn inverse_of(&self, w: &[Jet]) -> Result<Vec<Jet>> {
        let n = w.len() / 2;
        let mut out = w.to_vec();
        match self {
            ChartMap::Projective { pivot } => {
                let (ir, ii) = c_recip((&w[2 * pivot], &w[2 * pivot + 1]))?;
                for a in 0..n {
                    if a == *pivot {
                        continue;
                    }
                    let (r, i) = c_mul((&w[2 * a], &w[2 * a + 1]), (&ir, &ii));
                    out[2 * a] = r;
                    out[2 * a + 1] = i;
                }
                out[2 * pivot] = ir;
                out[2 * pivot + 1] = ii;
            }
            ChartMap::FactorInversion { mask } => {
                for a in 0..n {
                    if mask[a] {
                        let (r, i) = c_recip((&w[2 * a], &w[2 * a + 1]))?;
                        out[2 * a] = r;
                        out[2 * a + 1] = i;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `w = Φ(z)` at a point.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        let v = self.inverse_of(&Jet::variables(z, 0))?;
        Ok(v.iter().map(Jet::value).collect())
    }
}

/// A scalar field written in the coordinates of a second chart.
#[derive(Debug, Clone)]
pub struct Pullback {
    pub field: Arc<dyn ScalarField>,
    pub map: ChartMap,
}

impl ScalarField for Pullback {
    fn num_vars(&self) -> usize {
        self.field.num_vars()
    }

    fn jet_of(&self, vars: &[Jet]) -> Result<Jet> {
        self.field.jet_of(&self.map.inverse_of(vars)?)
    }
}

/// Standard complex structure on ℝ^{2n}: `J ∂x_a = ∂y_a`, `J ∂y_a = −∂x_a`,
/// coordinates ordered `(x_1, y_1, x_2, y_2, ...)`. Entry `[m * dim + l]` is `J^m_l`.
pub fn complex_structure(complex_dim: usize) -> Vec<f64> {
    let dim = 2 * complex_dim;
    let mut j = vec![0.0; dim * dim];
    for a in 0..complex_dim {
        let x = 2 * a;
        let y = 2 * a + 1;
        j[y * dim + x] = 1.0;
        j[x * dim + y] = -1.0;
    }
    j
}
