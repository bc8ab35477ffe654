//! Truncated multivariate Taylor series.
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f(p) / α!` of a scalar
//! function at a base point, for every multi-index with `|α| ≤ order`.
//! Coefficients are kept densely in graded order (all degree-0 terms, then
//! degree 1, ...), so the layout of a lower-order jet over the same variables
//! is a prefix of the higher-order one. Truncating is slicing and every
//! derivative lands directly in the next-lower layout.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use crate::error::{GeomError, Result};

/// Default truncation order. Six derivatives of the potential reach the
/// second covariant derivative of the Ricci tensor.
pub const DEFAULT_ORDER: usize = 6;
pub const MAX_ORDER: usize = 8;
pub const MAX_VARS: usize = 8;

/// Shared multi-index bookkeeping for one `(num_vars, order)` pair.
pub struct Layout {
    num_vars: usize,
    order: usize,
    indices: Vec<Vec<u8>>,
    degrees: Vec<usize>,
    lookup: HashMap<Vec<u8>, u32>,
    // (i, j, k): coefficient k of a product receives a[i] * b[j].
    mul_table: Vec<(u32, u32, u32)>,
    // succ[idx * num_vars + v] = index of α + e_v, or u32::MAX past the order.
    succ: Vec<u32>,
}

impl Layout {
    fn build(num_vars: usize, order: usize) -> Layout {
        let mut indices = Vec::new();
        let mut degrees = Vec::new();
        for d in 0..=order {
            let mut current = vec![0u8; num_vars];
            push_degree(&mut indices, &mut current, 0, d);
            degrees.extend(std::iter::repeat_n(d, indices.len() - degrees.len()));
        }
        let lookup: HashMap<Vec<u8>, u32> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i as u32))
            .collect();

        let mut succ = vec![u32::MAX; indices.len() * num_vars];
        for (i, a) in indices.iter().enumerate() {
            for v in 0..num_vars {
                let mut b = a.clone();
                b[v] += 1;
                if let Some(&j) = lookup.get(&b) {
                    succ[i * num_vars + v] = j;
                }
            }
        }

        let mut mul_table = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if degrees[i] + degrees[j] > order {
                    continue;
                }
                let c: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul_table.push((i as u32, j as u32, lookup[&c]));
            }
        }
        mul_table.sort_by_key(|&(_, _, k)| k);

        Layout {
            num_vars,
            order,
            indices,
            degrees,
            lookup,
            mul_table,
            succ,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn multi_index(&self, idx: usize) -> &[u8] {
        &self.indices[idx]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.degrees[idx]
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.lookup.get(alpha).map(|&i| i as usize)
    }

    /// Number of coefficients with total degree at most `order`.
    pub fn prefix_len(&self, order: usize) -> usize {
        self.degrees.partition_point(|&d| d <= order)
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, current: &mut [u8], var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.to_vec());
        current[var] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[var] = k as u8;
        push_degree(out, current, var + 1, remaining - k);
    }
    current[var] = 0;
}

/// Returns the cached layout for `(num_vars, order)`. Layouts live for the
/// whole process; there are at most a few dozen distinct shapes.
pub fn layout(num_vars: usize, order: usize) -> &'static Layout {
    const SLOTS: usize = (MAX_VARS + 1) * (MAX_ORDER + 1);
    static FAST: [OnceLock<&'static Layout>; SLOTS] = [const { OnceLock::new() }; SLOTS];
    let build = || -> &'static Layout { Box::leak(Box::new(Layout::build(num_vars, order))) };
    if num_vars <= MAX_VARS && order <= MAX_ORDER {
        return FAST[num_vars * (MAX_ORDER + 1) + order].get_or_init(build);
    }
    static SLOW: OnceLock<Mutex<HashMap<(usize, usize), &'static Layout>>> = OnceLock::new();
    let cache = SLOW.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("layout cache poisoned");
    guard.entry((num_vars, order)).or_insert_with(build)
}

#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("num_vars", &self.num_vars())
            .field("order", &self.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other) && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn constant(num_vars: usize, order: usize, value: f64) -> Jet {
        let layout = layout(num_vars, order);
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    pub fn zero(num_vars: usize, order: usize) -> Jet {
        Jet::constant(num_vars, order, 0.0)
    }

    /// The coordinate function `x_var` expanded at a base point whose
    /// `var`-th coordinate is `value`.
    pub fn variable(num_vars: usize, order: usize, var: usize, value: f64) -> Jet {
        let mut jet = Jet::constant(num_vars, order, value);
        if order >= 1 {
            let mut alpha = vec![0u8; num_vars];
            alpha[var] = 1;
            let idx = jet.layout.index_of(&alpha).expect("degree-1 index");
            jet.coeffs[idx] = 1.0;
        }
        jet
    }

    /// All coordinate jets at the point `p`.
    pub fn variables(p: &[f64], order: usize) -> Vec<Jet> {
        (0..p.len())
            .map(|v| Jet::variable(p.len(), order, v, p[v]))
            .collect()
    }

    pub fn from_coeffs(num_vars: usize, order: usize, coeffs: Vec<f64>) -> Result<Jet> {
        let layout = layout(num_vars, order);
        if coeffs.len() != layout.len() {
            return Err(GeomError::Shape(num_vars, order, coeffs.len(), 0));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(GeomError::Domain("non-finite jet coefficient".into()));
        }
        Ok(Jet { layout, coeffs })
    }

    pub fn num_vars(&self) -> usize {
        self.layout.num_vars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn layout(&self) -> &Layout {
        self.layout
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn same_shape(&self, other: &Jet) -> bool {
        std::ptr::eq(self.layout, other.layout)
            || (self.num_vars() == other.num_vars() && self.order() == other.order())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_shape(&self, other: &Jet) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(GeomError::Shape(
                self.num_vars(),
                self.order(),
                other.num_vars(),
                other.order(),
            ))
        }
    }

    /// Taylor coefficient `∂^α f / α!`.
    pub fn coeff(&self, alpha: &[u8]) -> Result<f64> {
        let deg: usize = alpha.iter().map(|&a| a as usize).sum();
        if deg > self.order() {
            return Err(GeomError::Order {
                requested: deg,
                available: self.order(),
            });
        }
        let idx = self
            .layout
            .index_of(alpha)
            .ok_or_else(|| GeomError::Shape(alpha.len(), deg, self.num_vars(), self.order()))?;
        Ok(self.coeffs[idx])
    }

    /// Raw partial derivative `∂^α f` at the base point.
    pub fn extract(&self, alpha: &[u8]) -> Result<f64> {
        let factorial: f64 = alpha
            .iter()
            .map(|&a| (1..=a as u64).product::<u64>() as f64)
            .product();
        Ok(self.coeff(alpha)? * factorial)
    }

    /// First partial derivative in `var`, one order lower.
    pub fn derivative(&self, var: usize) -> Result<Jet> {
        if self.order() == 0 {
            return Err(GeomError::Order {
                requested: 1,
                available: 0,
            });
        }
        let out_layout = layout(self.num_vars(), self.order() - 1);
        let n = self.num_vars();
        let coeffs = (0..out_layout.len())
            .map(|i| {
                let j = self.layout.succ[i * n + var] as usize;
                let power = self.layout.indices[i][var] as f64 + 1.0;
                power * self.coeffs[j]
            })
            .collect();
        Ok(Jet {
            layout: out_layout,
            coeffs,
        })
    }

    /// Gradient: one jet per variable, each one order lower.
    pub fn gradient(&self) -> Result<Vec<Jet>> {
        (0..self.num_vars()).map(|v| self.derivative(v)).collect()
    }

    /// Drops every coefficient above `order`. Never raises the order.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let out_layout = layout(self.num_vars(), order);
        let coeffs = self.coeffs[..out_layout.len()].to_vec();
        Jet {
            layout: out_layout,
            coeffs,
        }
    }

    /// Evaluates the truncated Taylor polynomial at `base + h`.
    pub fn eval_offset(&self, h: &[f64]) -> f64 {
        self.layout
            .indices
            .iter()
            .zip(&self.coeffs)
            .map(|(alpha, c)| {
                c * alpha
                    .iter()
                    .zip(h)
                    .map(|(&a, &x)| x.powi(a as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            layout: self.layout,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        assert!(self.same_shape(other), "jet shape mismatch in axpy");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// `self += s * a * b` without allocating.
    pub fn add_product(&mut self, s: f64, a: &Jet, b: &Jet) {
        assert!(
            self.same_shape(a) && self.same_shape(b),
            "jet shape mismatch in add_product"
        );
        let (x, y) = (&a.coeffs, &b.coeffs);
        for &(i, j, k) in &self.layout.mul_table {
            self.coeffs[k as usize] += s * x[i as usize] * y[j as usize];
        }
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        Ok(self.mul_unchecked(&other.recip()?))
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        Jet {
            layout: self.layout,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    fn mul_unchecked(&self, other: &Jet) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        let a = &self.coeffs;
        let b = &other.coeffs;
        for &(i, j, k) in &self.layout.mul_table {
            coeffs[k as usize] += a[i as usize] * b[j as usize];
        }
        Jet {
            layout: self.layout,
            coeffs,
        }
    }

    /// Composes the univariate series `Σ s_k t^k` with the nonconstant part
    /// of `self`, using Horner's scheme on the nilpotent remainder.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut u = self.clone();
        u.coeffs[0] = 0.0;
        let mut acc = Jet::constant(self.num_vars(), self.order(), series[self.order()]);
        for k in (0..self.order()).rev() {
            acc = acc.mul_unchecked(&u);
            acc.coeffs[0] += series[k];
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0 == 0.0 || !a0.is_finite() {
            return Err(GeomError::Singular(
                "reciprocal of a jet with zero constant term".into(),
            ));
        }
        let series: Vec<f64> = (0..=self.order())
            .map(|k| (-1.0f64).powi(k as i32) / a0.powi(k as i32 + 1))
            .collect();
        Ok(self.compose(&series))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut fact = 1.0;
        let series: Vec<f64> = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                e / fact
            })
            .collect();
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(GeomError::Domain(format!(
                "log of a jet with constant term {a0}"
            )));
        }
        let series: Vec<f64> = (0..=self.order())
            .map(|k| {
                if k == 0 {
                    a0.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * a0.powi(k as i32))
                }
            })
            .collect();
        Ok(self.compose(&series))
    }

    /// Real power with a positive base.
    pub fn powf(&self, r: f64) -> Result<Jet> {
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(GeomError::Domain(format!(
                "real power of a jet with constant term {a0}"
            )));
        }
        let mut binom = 1.0;
        let series: Vec<f64> = (0..=self.order())
            .map(|k| {
                if k > 0 {
                    binom *= (r - (k as f64 - 1.0)) / k as f64;
                }
                binom * a0.powf(r - k as f64)
            })
            .collect();
        Ok(self.compose(&series))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        self.powf(0.5)
    }

    /// Integer power by repeated squaring; negative exponents go through `recip`.
    pub fn powi(&self, n: i32) -> Result<Jet> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Jet::constant(self.num_vars(), self.order(), 1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_unchecked(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_unchecked(&base);
            }
        }
        Ok(result)
    }

    /// `self^other` for jet exponents, `exp(other · ln self)`.
    pub fn pow(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        Ok(self.ln()?.mul_unchecked(other).exp())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.try_add(rhs).expect("jet shape mismatch in add")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.try_sub(rhs).expect("jet shape mismatch in sub")
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.try_mul(rhs).expect("jet shape mismatch in mul")
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.axpy(-1.0, rhs);
    }
}
