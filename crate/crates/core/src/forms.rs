//! Exterior algebra at a point with complex coefficients, indexed by bitmask.

use num_complex::Complex64;

use crate::error::{GeomError, Result};

/// A homogeneous form `Σ_I c_I dx^I` on `ℝ^dim` (`dim ≤ 16`).
#[derive(Debug, Clone, PartialEq)]
pub struct FormValue {
    dim: usize,
    degree: usize,
    coeffs: Vec<Complex64>,
}

fn shuffle_sign(a: u32, b: u32) -> f64 {
    // Number of pairs (i ∈ a, j ∈ b) with i > j.
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl FormValue {
    pub fn zero(dim: usize, degree: usize) -> FormValue {
        FormValue {
            dim,
            degree,
            coeffs: vec![Complex64::new(0.0, 0.0); 1 << dim],
        }
    }

    pub fn scalar(dim: usize, c: Complex64) -> FormValue {
        let mut f = FormValue::zero(dim, 0);
        f.coeffs[0] = c;
        f
    }

    /// `Σ_{k<l} F_{kl} dx^k∧dx^l` from an antisymmetric matrix.
    pub fn two_form(dim: usize, f: &[Complex64]) -> FormValue {
        let mut out = FormValue::zero(dim, 2);
        for k in 0..dim {
            for l in k + 1..dim {
                out.coeffs[(1 << k) | (1 << l)] = f[k * dim + l];
            }
        }
        out
    }

    pub fn real_two_form(dim: usize, f: &[f64]) -> FormValue {
        let c: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        FormValue::two_form(dim, &c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficient of `dx^{i₁}∧…∧dx^{i_k}` for increasing indices.
    pub fn coeff(&self, indices: &[usize]) -> Complex64 {
        let mask = indices.iter().fold(0usize, |m, &i| m | (1 << i));
        self.coeffs[mask]
    }

    /// Component `F_{kl}` of a 2-form (antisymmetric in `k, l`).
    pub fn component2(&self, k: usize, l: usize) -> Complex64 {
        if k == l {
            return Complex64::new(0.0, 0.0);
        }
        let c = self.coeffs[(1 << k) | (1 << l)];
        if k < l {
            c
        } else {
            -c
        }
    }

    pub fn wedge(&self, other: &FormValue) -> FormValue {
        let mut out = FormValue::zero(self.dim, self.degree + other.degree);
        if out.degree > self.dim {
            return out;
        }
        for (a, ca) in self.coeffs.iter().enumerate() {
            if ca.re == 0.0 && ca.im == 0.0 {
                continue;
            }
            for (b, cb) in other.coeffs.iter().enumerate() {
                if a & b != 0 || (cb.re == 0.0 && cb.im == 0.0) {
                    continue;
                }
                out.coeffs[a | b] += ca * cb * shuffle_sign(a as u32, b as u32);
            }
        }
        out
    }

    pub fn try_add(&self, other: &FormValue) -> Result<FormValue> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(GeomError::Shape(
                self.dim,
                self.degree,
                other.dim,
                other.degree,
            ));
        }
        let mut out = self.clone();
        for (x, y) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y;
        }
        Ok(out)
    }

    pub fn add(&self, other: &FormValue) -> FormValue {
        self.try_add(other).expect("form shape mismatch")
    }

    pub fn scale(&self, s: Complex64) -> FormValue {
        let mut out = self.clone();
        for x in &mut out.coeffs {
            *x *= s;
        }
        out
    }

    pub fn scale_real(&self, s: f64) -> FormValue {
        self.scale(Complex64::new(s, 0.0))
    }

    /// `self^k` (plain wedge power, no factorial).
    pub fn power(&self, k: usize) -> FormValue {
        let mut out = FormValue::scalar(self.dim, Complex64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.wedge(self);
        }
        out
    }

    /// Coefficient of `dx^1∧…∧dx^dim`.
    pub fn top(&self) -> Complex64 {
        self.coeffs[(1 << self.dim) - 1]
    }

    /// Ratio of a top-degree form to a nonzero reference top form.
    pub fn ratio_to(&self, reference: &FormValue) -> Result<Complex64> {
        if self.degree != self.dim || reference.degree != self.dim {
            return Err(GeomError::Dimension(format!(
                "top-form ratio needs degree {} forms, got {} and {}",
                self.dim, self.degree, reference.degree
            )));
        }
        let r = reference.top();
        if r.norm() == 0.0 {
            return Err(GeomError::Singular("reference volume form vanishes".into()));
        }
        Ok(self.top() / r)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn max_abs_diff(&self, other: &FormValue) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

/// `ωᵏ/k!`.
pub fn omega_power(omega: &FormValue, k: usize) -> FormValue {
    let f: f64 = (1..=k).map(|i| i as f64).product();
    omega.power(k).scale_real(1.0 / f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn one_form(dim: usize, v: &[f64]) -> FormValue {
        let mut f = FormValue::zero(dim, 1);
        for (i, x) in v.iter().enumerate() {
            f.coeffs[1 << i] = c(*x);
        }
        f
    }

    #[test]
    fn dx_wedge_dy_is_antisymmetric() {
        let dx = one_form(2, &[1.0, 0.0]);
        let dy = one_form(2, &[0.0, 1.0]);
        assert_eq!(dx.wedge(&dy).top(), c(1.0));
        assert_eq!(dy.wedge(&dx).top(), c(-1.0));
        assert_eq!(dx.wedge(&dx).max_abs(), 0.0);
    }

    #[test]
    fn standard_symplectic_volume() {
        let mut w = vec![0.0; 16];
        w[1] = 1.0;
        w[4] = -1.0;
        w[2 * 4 + 3] = 1.0;
        w[3 * 4 + 2] = -1.0;
        let omega = FormValue::real_two_form(4, &w);
        assert_eq!(omega_power(&omega, 2).top(), c(1.0));
        assert_eq!(omega.component2(1, 0), c(-1.0));
    }

    fn arb_form(dim: usize, degree: usize) -> impl Strategy<Value = FormValue> {
        proptest::collection::vec(-1.0f64..1.0, 1 << dim).prop_map(move |v| {
            let mut f = FormValue::zero(dim, degree);
            for (mask, x) in v.into_iter().enumerate() {
                if (mask as u32).count_ones() as usize == degree {
                    f.coeffs[mask] = c(x);
                }
            }
            f
        })
    }

    proptest! {
        #[test]
        fn wedge_is_graded_commutative(a in arb_form(5, 1), b in arb_form(5, 2), e in arb_form(5, 3)) {
            let ab = a.wedge(&b);
            let ba = b.wedge(&a);
            prop_assert!(ab.max_abs_diff(&ba) < 1e-14);
            let ae = a.wedge(&e);
            let ea = e.wedge(&a).scale_real(-1.0);
            prop_assert!(ae.max_abs_diff(&ea) < 1e-14);
            let a1 = a.wedge(&a);
            prop_assert!(a1.max_abs() < 1e-14);
        }

        #[test]
        fn wedge_is_associative(a in arb_form(6, 1), b in arb_form(6, 2), e in arb_form(6, 2)) {
            let l = a.wedge(&b).wedge(&e);
            let r = a.wedge(&b.wedge(&e));
            prop_assert!(l.max_abs_diff(&r) < 1e-12);
        }
    }
}
