//! Tensor Gauss–Legendre quadrature over a compactified chart.
//!
//! The global rule lives on a parameter box mapped onto the chart. When the
//! integrand of a deformed manifold differs from its base only inside a few
//! balls, the integral is split as `∫ f_base` over the global rule plus
//! `∫ (f − f_base)` over ball-adapted polar rules, whose radial axis is
//! aligned with the edge of the support.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::chart::{KahlerChart, Support};
use crate::error::{GeomError, Result};
use crate::geometry::ChartPoint;

/// Nodes and weights of a one-dimensional rule.
pub type Rule = Arc<(Vec<f64>, Vec<f64>)>;

/// Parameter point to (chart point, Jacobian).
type ParamMap<'a> = &'a dyn Fn(&[f64]) -> (Vec<f64>, f64);

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(compute_gauss_legendre(n)))
        .clone()
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Equispaced midpoint nodes on `[−1, 1]`, exact for trigonometric
/// polynomials of degree `< n` after mapping to a period.
fn trapezoid(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    let h = 2.0 / n as f64;
    let x = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
    Arc::new((x, vec![h; n]))
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// One parameter axis; periodic axes use the equispaced trapezoid rule,
/// the others Gauss–Legendre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

fn interval(lo: f64, hi: f64) -> Axis {
    Axis {
        lo,
        hi,
        periodic: false,
    }
}

fn angle() -> Axis {
    Axis {
        lo: 0.0,
        hi: 2.0 * PI,
        periodic: true,
    }
}

/// Map from a finite parameter box onto a chart (minus a null set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Compactification {
    /// `ℂ`: `x + iy = tan(s) e^{iθ}`, `s ∈ [0, π/2]`.
    PolarTan,
    /// `ℂ²`: `|z| = tan s`, `(|z₁|, |z₂|) = |z| (cos ψ, sin ψ)`, phases `θ₁, θ₂`.
    HopfTan,
    /// `ℂ^k` as a product of `PolarTan` factors.
    ProductPolarTan { factors: usize },
    /// Identity on a coordinate box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Compactification {
    pub fn real_dim(&self) -> usize {
        match self {
            Compactification::PolarTan => 2,
            Compactification::HopfTan => 4,
            Compactification::ProductPolarTan { factors } => 2 * factors,
            Compactification::Box { lo, .. } => lo.len(),
        }
    }

    pub fn param_box(&self) -> Vec<Axis> {
        match self {
            Compactification::PolarTan => vec![interval(0.0, FRAC_PI_2), angle()],
            Compactification::HopfTan => vec![
                interval(0.0, FRAC_PI_2),
                interval(0.0, FRAC_PI_2),
                angle(),
                angle(),
            ],
            Compactification::ProductPolarTan { factors } => (0..*factors)
                .flat_map(|_| [interval(0.0, FRAC_PI_2), angle()])
                .collect(),
            Compactification::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(&a, &b)| interval(a, b)).collect()
            }
        }
    }

    /// Chart point and Jacobian `|det ∂x/∂u|` for parameters `u`.
    pub fn map(&self, u: &[f64]) -> (Vec<f64>, f64) {
        match self {
            Compactification::PolarTan => {
                let (r, dr) = (u[0].tan(), 1.0 / u[0].cos().powi(2));
                (vec![r * u[1].cos(), r * u[1].sin()], r * dr)
            }
            Compactification::HopfTan => {
                let rho = u[0].tan();
                let drho = 1.0 / u[0].cos().powi(2);
                let (c, s) = (u[1].cos(), u[1].sin());
                let x = vec![
                    rho * c * u[2].cos(),
                    rho * c * u[2].sin(),
                    rho * s * u[3].cos(),
                    rho * s * u[3].sin(),
                ];
                (x, rho.powi(3) * c * s * drho)
            }
            Compactification::ProductPolarTan { factors } => {
                let mut x = Vec::with_capacity(2 * factors);
                let mut jac = 1.0;
                for f in 0..*factors {
                    let r = u[2 * f].tan();
                    jac *= r / u[2 * f].cos().powi(2);
                    x.push(r * u[2 * f + 1].cos());
                    x.push(r * u[2 * f + 1].sin());
                }
                (x, jac)
            }
            Compactification::Box { .. } => (u.to_vec(), 1.0),
        }
    }

    pub fn from_name(name: &str, complex_dim: usize) -> Result<Compactification> {
        match (name, complex_dim) {
            ("polar_tan", 1) | ("fs", 1) => Ok(Compactification::PolarTan),
            ("hopf_tan", 2) | ("fs", 2) => Ok(Compactification::HopfTan),
            ("product_polar_tan", k) | ("product", k) => {
                Ok(Compactification::ProductPolarTan { factors: k })
            }
            _ => Err(GeomError::Parse(format!(
                "unknown compactification preset `{name}` for complex dimension {complex_dim}"
            ))),
        }
    }
}

/// Polar rule adapted to a ball: radial axis `[0, ρ]` and sphere angles.
fn ball_map(support: &Support, u: &[f64]) -> (Vec<f64>, f64) {
    let c = &support.center;
    match c.len() {
        2 => {
            let r = u[0];
            (vec![c[0] + r * u[1].cos(), c[1] + r * u[1].sin()], r)
        }
        4 => {
            let r = u[0];
            let (cs, sn) = (u[1].cos(), u[1].sin());
            (
                vec![
                    c[0] + r * cs * u[2].cos(),
                    c[1] + r * cs * u[2].sin(),
                    c[2] + r * sn * u[3].cos(),
                    c[3] + r * sn * u[3].sin(),
                ],
                r.powi(3) * cs * sn,
            )
        }
        _ => (u.to_vec(), 1.0),
    }
}

fn ball_box(support: &Support) -> Vec<Axis> {
    let rho = support.radius;
    match support.center.len() {
        2 => vec![interval(0.0, rho), angle()],
        4 => vec![
            interval(0.0, rho),
            interval(0.0, FRAC_PI_2),
            angle(),
            angle(),
        ],
        _ => support
            .center
            .iter()
            .map(|c| interval(c - rho, c + rho))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// Which integrand a node evaluates: the full (deformed/perturbed) one, or the base.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    Base,
}

/// A quadrature value together with the value of the coarser companion rule
/// and a rounding floor; `error_estimate = |value − coarse| + floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    #[serde(skip)]
    pub coarse: f64,
    #[serde(skip)]
    pub floor: f64,
}

impl Integral {
    pub fn new(value: f64, coarse: f64, floor: f64) -> Integral {
        Integral {
            value,
            error_estimate: (value - coarse).abs() + floor,
            coarse,
            floor,
        }
    }

    /// An exact value (no quadrature error).
    pub fn exact(value: f64) -> Integral {
        Integral::new(value, value, 0.0)
    }

    pub fn zero() -> Integral {
        Integral::exact(0.0)
    }

    pub fn scale(self, s: f64) -> Integral {
        Integral::new(self.value * s, self.coarse * s, self.floor * s.abs())
    }

    /// Applies `f` to the fine and coarse values of `parts` alike, so the
    /// estimate of a nonlinear combination reflects the same rule pair.
    /// Rounding floors are propagated through numerical partial derivatives.
    pub fn combine(parts: &[Integral], f: impl Fn(&[f64]) -> f64) -> Integral {
        let fine: Vec<f64> = parts.iter().map(|p| p.value).collect();
        let coarse: Vec<f64> = parts.iter().map(|p| p.coarse).collect();
        let value = f(&fine);
        let mut floor = 0.0;
        let mut probe = fine.clone();
        for (i, p) in parts.iter().enumerate() {
            if p.floor == 0.0 {
                continue;
            }
            let h = p.floor.max(1e-8 * p.value.abs().max(1.0));
            probe[i] = fine[i] + h;
            let d = (f(&probe) - value) / h;
            probe[i] = fine[i];
            floor += d.abs() * p.floor;
        }
        Integral::new(value, f(&coarse), floor)
    }
}

impl std::ops::Add for Integral {
    type Output = Integral;
    fn add(self, rhs: Integral) -> Integral {
        Integral::new(
            self.value + rhs.value,
            self.coarse + rhs.coarse,
            self.floor + rhs.floor,
        )
    }
}

impl std::ops::Sub for Integral {
    type Output = Integral;
    fn sub(self, rhs: Integral) -> Integral {
        Integral::new(
            self.value - rhs.value,
            self.coarse - rhs.coarse,
            self.floor + rhs.floor,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureAtlas {
    pub compactification: Compactification,
    pub nodes_per_axis: Vec<usize>,
    pub local_nodes_per_axis: Vec<usize>,
    pub execution: Execution,
}

/// Node count of the companion rule used for error estimates.
pub fn coarse_count(n: usize) -> usize {
    n.saturating_sub(4).max(n.div_ceil(2)).max(1)
}

pub const DEFAULT_NODES_2D: usize = 48;
pub const DEFAULT_NODES_4D: usize = 10;

impl QuadratureAtlas {
    /// Atlas with the default node counts for the chart's dimension.
    pub fn for_chart(chart: &KahlerChart) -> QuadratureAtlas {
        let d = chart.compactification.real_dim();
        let n = if d <= 2 {
            DEFAULT_NODES_2D
        } else {
            DEFAULT_NODES_4D
        };
        QuadratureAtlas::with_nodes(chart.compactification.clone(), n)
    }

    pub fn with_nodes(compactification: Compactification, nodes: usize) -> QuadratureAtlas {
        let d = compactification.real_dim();
        // Ball rules: the radial (and, in 4D, the Hopf ψ) axes carry the
        // steep profile of a bump; the periodic phase axes need fewer nodes.
        let n = nodes.max(8);
        let local = match d {
            2 => vec![n, n / 2],
            4 => vec![2 * n, 2 * n, n, n],
            _ => vec![n; d],
        };
        QuadratureAtlas {
            nodes_per_axis: vec![nodes.max(2); d],
            local_nodes_per_axis: local,
            compactification,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> QuadratureAtlas {
        self.execution = execution;
        self
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.iter().product()
    }

    fn tensor_nodes(bounds: &[Axis], counts: &[usize], map: ParamMap) -> Vec<(Vec<f64>, f64)> {
        // Rules on [−1, 1].
        let rules: Vec<Arc<(Vec<f64>, Vec<f64>)>> = counts
            .iter()
            .zip(bounds)
            .map(|(&n, axis)| {
                if axis.periodic {
                    trapezoid(n)
                } else {
                    gauss_legendre(n)
                }
            })
            .collect();
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; counts.len()];
        for _ in 0..total {
            let mut u = Vec::with_capacity(counts.len());
            let mut w = 1.0;
            for (axis, &i) in idx.iter().enumerate() {
                let (a, b) = (bounds[axis].lo, bounds[axis].hi);
                let half = 0.5 * (b - a);
                u.push(a + half * (rules[axis].0[i] + 1.0));
                w *= half * rules[axis].1[i];
            }
            let (x, jac) = map(&u);
            out.push((x, w * jac));
            for axis in (0..counts.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < counts[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        out
    }

    fn evaluate<F>(
        &self,
        nodes: &[(Vec<f64>, f64)],
        n_out: usize,
        f: &F,
    ) -> Result<(Vec<f64>, Vec<f64>)>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        let eval_one = |(i, (x, w)): (usize, &(Vec<f64>, f64))| -> Result<Vec<f64>> {
            if *w == 0.0 {
                return Ok(vec![0.0; n_out]);
            }
            let v = f(x)?;
            if v.len() != n_out || v.iter().any(|y| !y.is_finite()) {
                return Err(GeomError::Evaluation {
                    index: i,
                    point: x.clone(),
                });
            }
            Ok(v.into_iter().map(|y| y * w).collect())
        };
        let per_node: Vec<Result<Vec<f64>>> = match self.execution {
            Execution::Sequential => nodes.iter().enumerate().map(eval_one).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                nodes.par_iter().enumerate().map(eval_one).collect()
            }
        };
        let per_node: Vec<Vec<f64>> = per_node.into_iter().collect::<Result<_>>()?;
        let sums = (0..n_out)
            .map(|k| compensated_sum(per_node.iter().map(|v| v[k])))
            .collect();
        let abs = (0..n_out)
            .map(|k| per_node.iter().map(|v| v[k].abs()).sum())
            .collect();
        Ok((sums, abs))
    }

    fn rule_integral<F>(
        &self,
        bounds: &[Axis],
        counts: &[usize],
        map: ParamMap,
        n_out: usize,
        f: &F,
    ) -> Result<Vec<Integral>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        let full = Self::tensor_nodes(bounds, counts, map);
        let half_counts: Vec<usize> = counts.iter().map(|&n| coarse_count(n)).collect();
        let half = Self::tensor_nodes(bounds, &half_counts, map);
        let (v_full, abs) = self.evaluate(&full, n_out, f)?;
        let (v_half, _) = self.evaluate(&half, n_out, f)?;
        Ok((0..n_out)
            .map(|k| Integral::new(v_full[k], v_half[k], 64.0 * f64::EPSILON * abs[k]))
            .collect())
    }

    /// Mapped nodes `(x, weight · Jacobian)` of the global rule.
    pub fn nodes(&self) -> Vec<(Vec<f64>, f64)> {
        let bounds = self.compactification.param_box();
        let map = |u: &[f64]| self.compactification.map(u);
        Self::tensor_nodes(&bounds, &self.nodes_per_axis, &map)
    }

    /// Evaluates `f` at every global node, in node order.
    pub fn map_nodes<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[f64]) -> Result<T> + Sync,
    {
        let nodes = self.nodes();
        let out: Vec<Result<T>> = match self.execution {
            Execution::Sequential => nodes.iter().map(|(x, _)| f(x)).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                nodes.par_iter().map(|(x, _)| f(x)).collect()
            }
        };
        out.into_iter().collect()
    }

    /// Integrates coordinate top-form coefficients. `f(variant, x)` returns
    /// `n_out` values; the full integrand must equal the base one outside
    /// `supports` (pass `None` when there is no such locality).
    pub fn integrate_with_supports<F>(
        &self,
        supports: Option<&[Support]>,
        n_out: usize,
        f: F,
    ) -> Result<Vec<Integral>>
    where
        F: Fn(Variant, &[f64]) -> Result<Vec<f64>> + Sync,
    {
        let bounds = self.compactification.param_box();
        let map = |u: &[f64]| self.compactification.map(u);
        let supports = supports.unwrap_or(&[]);
        for (i, a) in supports.iter().enumerate() {
            for b in &supports[i + 1..] {
                if a.overlaps(b) {
                    return Err(GeomError::Unsupported("overlapping local supports".into()));
                }
            }
        }
        let global_variant = if supports.is_empty() {
            Variant::Full
        } else {
            Variant::Base
        };
        let global = |x: &[f64]| f(global_variant, x);
        let mut total = self.rule_integral(&bounds, &self.nodes_per_axis, &map, n_out, &global)?;
        for s in supports {
            let local_bounds = ball_box(s);
            let local_map = |u: &[f64]| ball_map(s, u);
            let diff = |x: &[f64]| -> Result<Vec<f64>> {
                let a = f(Variant::Full, x)?;
                let b = f(Variant::Base, x)?;
                Ok(a.iter().zip(&b).map(|(p, q)| p - q).collect())
            };
            let counts: Vec<usize> = self.local_nodes_per_axis.clone();
            let part = self.rule_integral(&local_bounds, &counts, &local_map, n_out, &diff)?;
            for (t, p) in total.iter_mut().zip(part) {
                *t = *t + p;
            }
        }
        Ok(total)
    }

    /// Integrates `f(chart_variant, x) · ωⁿ/n!`, where `f` returns `n_out`
    /// scalar functions; deformations with compact support are integrated
    /// by the local rules.
    pub fn integrate_scalars<F>(
        &self,
        chart: &KahlerChart,
        n_out: usize,
        f: F,
    ) -> Result<Vec<Integral>>
    where
        F: Fn(&KahlerChart, &[f64]) -> Result<Vec<f64>> + Sync,
    {
        self.integrate_densities(chart, n_out, |c, x| {
            let vol = ChartPoint::new(c, x, 2)?.volume_density();
            Ok(f(c, x)?.into_iter().map(|v| v * vol).collect())
        })
    }

    /// Like [`integrate_scalars`](Self::integrate_scalars) but `f` already
    /// returns coordinate top-form coefficients.
    pub fn integrate_densities<F>(
        &self,
        chart: &KahlerChart,
        n_out: usize,
        f: F,
    ) -> Result<Vec<Integral>>
    where
        F: Fn(&KahlerChart, &[f64]) -> Result<Vec<f64>> + Sync,
    {
        let base = chart.base_chart();
        let supports = chart.local_supports();
        self.integrate_with_supports(supports.as_deref(), n_out, |variant, x| match variant {
            Variant::Full => f(chart, x),
            Variant::Base => f(&base, x),
        })
    }

    /// Riemannian volume `∫ ωⁿ/n!`.
    pub fn volume(&self, chart: &KahlerChart) -> Result<Integral> {
        Ok(self.integrate_scalars(chart, 1, |_, _| Ok(vec![1.0]))?[0])
    }

    pub fn integrate(
        &self,
        chart: &KahlerChart,
        density: impl Fn(&KahlerChart, &[f64]) -> Result<f64> + Sync,
    ) -> Result<Integral> {
        Ok(self.integrate_scalars(chart, 1, |c, x| Ok(vec![density(c, x)?]))?[0])
    }

    /// Average of `f` with respect to `ωⁿ/n!`.
    pub fn mean(
        &self,
        chart: &KahlerChart,
        f: impl Fn(&KahlerChart, &[f64]) -> Result<f64> + Sync,
    ) -> Result<f64> {
        let r = self.integrate_scalars(chart, 2, |c, x| Ok(vec![f(c, x)?, 1.0]))?;
        Ok(r[0].value / r[1].value)
    }

    /// `f − mean(f)` as an evaluator on the same chart.
    pub fn mean_zero_project<F>(&self, chart: &KahlerChart, f: F) -> Result<MeanZero<F>>
    where
        F: Fn(&KahlerChart, &[f64]) -> Result<f64> + Sync,
    {
        let mean = self.mean(chart, &f)?;
        Ok(MeanZero { f, mean })
    }
}

/// A function with its atlas mean subtracted.
pub struct MeanZero<F> {
    f: F,
    pub mean: f64,
}

impl<F> MeanZero<F>
where
    F: Fn(&KahlerChart, &[f64]) -> Result<f64> + Sync,
{
    pub fn eval(&self, chart: &KahlerChart, x: &[f64]) -> Result<f64> {
        Ok((self.f)(chart, x)? - self.mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 12, 48] {
            let rule = gauss_legendre(n);
            for deg in 0..2 * n {
                let s: f64 = rule
                    .0
                    .iter()
                    .zip(&rule.1)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((s - exact).abs() < 1e-13, "n={n} deg={deg} {s} {exact}");
            }
        }
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn hopf_jacobian_matches_finite_differences() {
        let c = Compactification::HopfTan;
        let u = [0.7, 0.4, 1.1, 2.3];
        let (_, jac) = c.map(&u);
        let h = 1e-6;
        let mut m = vec![0.0; 16];
        for k in 0..4 {
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let (xp, _) = c.map(&up);
            let (xm, _) = c.map(&dn);
            for i in 0..4 {
                m[i * 4 + k] = (xp[i] - xm[i]) / (2.0 * h);
            }
        }
        let det = crate::geometry::determinant(&m, 4).abs();
        assert!((det - jac).abs() < 1e-6 * jac);
    }

    #[test]
    fn box_rule_is_linear_and_monotone() {
        let atlas = QuadratureAtlas::with_nodes(
            Compactification::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 2.0],
            },
            6,
        );
        let r = atlas
            .integrate_with_supports(None, 3, |_, x| {
                Ok(vec![x[0] * x[1], 2.0 * x[0] * x[1] + 1.0, 0.0])
            })
            .unwrap();
        assert!((r[0].value - 1.0).abs() < 1e-14);
        assert!((r[1].value - (2.0 * r[0].value + 2.0)).abs() < 1e-14);
        assert_eq!(r[2].value, 0.0);
    }

    #[test]
    fn nan_is_reported_with_node() {
        let atlas = QuadratureAtlas::with_nodes(Compactification::PolarTan, 4);
        let err = atlas
            .integrate_with_supports(None, 1, |_, x| {
                Ok(vec![if x[0] > 0.0 { f64::NAN } else { 1.0 }])
            })
            .unwrap_err();
        assert!(matches!(err, GeomError::Evaluation { .. }));
    }
}
