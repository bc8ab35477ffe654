//! Pointwise Kähler geometry on a holomorphic chart, carried by jets.
//!
//! Index conventions (real coordinates `x_0..x_{2n-1}`, `dim = 2n`):
//!
//! * matrices are row-major, `m[a * dim + b]`;
//! * `ω_{kl} = ω(∂_k, ∂_l)` and `Λ = ω⁻¹`, so `Λ^{kl} ω_{lt} = δ^k_t`;
//! * `Γ^i_{jk}` is stored at `(i * dim + j) * dim + k` with `∇_{∂_j} ∂_k = Γ^i_{jk} ∂_i`;
//! * `R^i_{jkl}` is stored at `((i * dim + j) * dim + k) * dim + l` with
//!   `R(∂_k, ∂_l) ∂_j = R^i_{jkl} ∂_i` and `R(U,V) = [∇_U, ∇_V] − ∇_{[U,V]}`;
//! * `Ric_{jk} = tr(V ↦ R(V, ∂_j) ∂_k) = R^i_{kij}`.

use std::sync::Arc;

use crate::chart::{complex_structure, Bump, ChartMap, KahlerChart, Support};
use crate::error::{GeomError, Result};
use crate::jet::Jet;

/// Sign applied to `g^{ij} ∇_i ∇_j f`. With `-1` the Laplacian is the
/// nonnegative operator `d*d`; this is the sign under which the contracted
/// second Bianchi identity reads `(∇²Ric)(e^p, e^q) = −½ Δ Scal`.
pub const LAPLACIAN_SIGN: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Upper,
    Lower,
}

pub fn values(jets: &[Jet]) -> Vec<f64> {
    jets.iter().map(Jet::value).collect()
}

pub fn truncate_all(jets: &[Jet], order: usize) -> Vec<Jet> {
    jets.iter().map(|j| j.truncate(order)).collect()
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert_matrix(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap();
        if m[pivot * n + col].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let p = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                m[r * n + k] -= f * m[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

/// Cholesky test for symmetric positive definiteness.
pub fn is_positive_definite(a: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

pub fn determinant(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap();
        if m[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
        }
    }
    det
}

#[cfg(test)]
fn jet_matmul(a: &[Jet], b: &[Jet], n: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::zero(a[0].num_vars(), a[0].order());
            for k in 0..n {
                acc.add_product(1.0, &a[i * n + k], &b[k * n + j]);
            }
            out.push(acc);
        }
    }
    out
}

/// Inverse of a matrix of jets by Gauss–Jordan elimination, pivoting on
/// the constant parts.
pub fn invert_jet_matrix(m: &[Jet], n: usize) -> Option<Vec<Jet>> {
    let nv = m[0].num_vars();
    let order = m[0].order();
    invert_matrix(&values(m), n)?;
    let mut a: Vec<Jet> = m.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|idx| Jet::constant(nv, order, if idx / n == idx % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &q| {
            a[r * n + col]
                .value()
                .abs()
                .total_cmp(&a[q * n + col].value().abs())
        })?;
        if a[piv * n + col].value() == 0.0 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
                inv.swap(piv * n + c, col * n + c);
            }
        }
        let r = a[col * n + col].recip().ok()?;
        for c in 0..n {
            a[col * n + c] = &a[col * n + c] * &r;
            inv[col * n + c] = &inv[col * n + c] * &r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col].clone();
            if f.max_abs() == 0.0 {
                continue;
            }
            for c in 0..n {
                let (pa, pi) = (a[col * n + c].clone(), inv[col * n + c].clone());
                a[row * n + c].add_product(-1.0, &f, &pa);
                inv[row * n + c].add_product(-1.0, &f, &pi);
            }
        }
    }
    Some(inv)
}

/// Geometry at a chart point, computed in the second chart when the point
/// lies far out (where high derivatives of the potential lose precision).
#[derive(Debug, Clone)]
pub struct ChartPoint {
    pub geom: PointGeometry,
    /// The chart map used, with `geom` in its target coordinates.
    pub map: Option<ChartMap>,
    /// `|det ∂w/∂z|`, so that densities convert back to the first chart.
    pub jacobian: f64,
}

impl ChartPoint {
    pub fn new(chart: &KahlerChart, p: &[f64], order: usize) -> Result<ChartPoint> {
        match chart.far_map(p) {
            None => Ok(ChartPoint {
                geom: PointGeometry::new(chart, p, order)?,
                map: None,
                jacobian: 1.0,
            }),
            Some(map) => {
                let w = map.forward(p)?;
                let z = map.inverse_of(&Jet::variables(&w, 1))?;
                let mut dz = Vec::with_capacity(p.len() * p.len());
                for zi in &z {
                    dz.extend(zi.gradient()?.iter().map(Jet::value));
                }
                let det = determinant(&dz, p.len()).abs();
                let far = chart.far_chart(&map);
                Ok(ChartPoint {
                    geom: PointGeometry::new(&far, &w, order)?,
                    map: Some(map),
                    jacobian: 1.0 / det,
                })
            }
        }
    }

    /// `ωⁿ/n!` as a coefficient of `dx¹∧…∧dx^{2n}` in the first chart.
    pub fn volume_density(&self) -> f64 {
        self.geom.volume_density() * self.jacobian
    }
}

/// Metric, symplectic form and Levi-Civita data at one point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub point: Vec<f64>,
    pub complex_dim: usize,
    pub dim: usize,
    pub potential_order: usize,
    pub omega: Vec<Jet>,
    pub lambda: Vec<Jet>,
    pub g: Vec<Jet>,
    pub g_inv: Vec<Jet>,
    pub j: Vec<f64>,
    /// Levi-Civita Christoffel symbols; empty when `potential_order < 3`.
    pub gamma: Vec<Jet>,
}

impl PointGeometry {
    /// Geometry of `chart` at `p` from the potential's jet of order `order` (≥ 2).
    pub fn new(chart: &KahlerChart, p: &[f64], order: usize) -> Result<PointGeometry> {
        if !chart.domain.contains(p) {
            return Err(GeomError::Domain(format!("{p:?} outside chart domain")));
        }
        let k = chart.potential_jet(p, order)?;
        PointGeometry::from_potential(&k, chart.complex_dim, p)
    }

    /// Geometry from the potential's jet `k` expanded at `p`.
    pub fn from_potential(k: &Jet, complex_dim: usize, p: &[f64]) -> Result<PointGeometry> {
        let order = k.order();
        if order < 2 {
            return Err(GeomError::Order {
                requested: 2,
                available: order,
            });
        }
        let dim = 2 * complex_dim;
        let point_err = || p.to_vec();
        let j = complex_structure(complex_dim);
        let grad = k.gradient()?;
        let mut hess = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                hess.push(grad[a].derivative(b)?);
            }
        }
        // ω = d(d^cK), d^cK = −dK∘J; J is constant and has one entry per column.
        let jcol = |l: usize| -> (usize, f64) {
            (0..dim)
                .find(|&m| j[m * dim + l] != 0.0)
                .map(|m| (m, j[m * dim + l]))
                .unwrap()
        };
        let mut omega = Vec::with_capacity(dim * dim);
        for kk in 0..dim {
            for l in 0..dim {
                let (ml, sl) = jcol(l);
                let (mk, sk) = jcol(kk);
                let mut w = hess[kk * dim + ml].scale(-sl);
                w.axpy(sk, &hess[l * dim + mk]);
                omega.push(w);
            }
        }
        // g_{kl} = ω(∂_k, J∂_l) = ω_{km} J^m_l.
        let mut g = Vec::with_capacity(dim * dim);
        for kk in 0..dim {
            for l in 0..dim {
                let (ml, sl) = jcol(l);
                g.push(omega[kk * dim + ml].scale(sl));
            }
        }
        let g0 = values(&g);
        if !is_positive_definite(&g0, dim) {
            return Err(GeomError::NotKahler(point_err()));
        }
        let g_inv = invert_jet_matrix(&g, dim).ok_or_else(|| GeomError::Degenerate(point_err()))?;
        // ω = −gJ, so Λ = ω⁻¹ = J g⁻¹.
        let lambda: Vec<Jet> = (0..dim * dim)
            .map(|kl| {
                let (kk, l) = (kl / dim, kl % dim);
                let (m, sgn) = (0..dim)
                    .find(|&m| j[kk * dim + m] != 0.0)
                    .map(|m| (m, j[kk * dim + m]))
                    .unwrap();
                g_inv[m * dim + l].scale(sgn)
            })
            .collect();

        let gamma = if order >= 3 {
            let q = order - 3;
            let dg: Vec<Vec<Jet>> = g.iter().map(|e| e.gradient()).collect::<Result<_>>()?;
            let ginv_q = truncate_all(&g_inv, q);
            let mut gamma = Vec::with_capacity(dim * dim * dim);
            for i in 0..dim {
                for a in 0..dim {
                    for b in 0..dim {
                        let mut acc = Jet::zero(dim, q);
                        for l in 0..dim {
                            // ∂_a g_{lb} + ∂_b g_{la} − ∂_l g_{ab}
                            let mut s = dg[l * dim + b][a].clone();
                            s += &dg[l * dim + a][b];
                            s -= &dg[a * dim + b][l];
                            acc.add_product(1.0, &ginv_q[i * dim + l], &s);
                        }
                        gamma.push(acc.scale(0.5));
                    }
                }
            }
            gamma
        } else {
            Vec::new()
        };

        Ok(PointGeometry {
            point: p.to_vec(),
            complex_dim,
            dim,
            potential_order: order,
            omega,
            lambda,
            g,
            g_inv,
            j,
            gamma,
        })
    }

    /// `√det g`, which equals the Pfaffian of ω, i.e. the density of `ωⁿ/n!`.
    pub fn volume_density(&self) -> f64 {
        determinant(&values(&self.g), self.dim).sqrt()
    }

    pub fn levi_civita(&self) -> Result<Connection> {
        if self.gamma.is_empty() {
            return Err(GeomError::Order {
                requested: 3,
                available: self.potential_order,
            });
        }
        Ok(Connection {
            dim: self.dim,
            gamma: self.gamma.clone(),
            perturbed: false,
        })
    }

    /// `∇ + t A` where `A^m_{jk} = A̲_{jkl} Λ^{lm}` for the lowered field `A̲`.
    pub fn perturbed(&self, field: &dyn CubicField, t: f64) -> Result<Connection> {
        let mut conn = self.levi_civita()?;
        if t == 0.0 {
            return Ok(conn);
        }
        let q = conn.order();
        let dim = self.dim;
        let lowered = field.lowered(&self.point, q)?;
        let lam = truncate_all(&self.lambda, q);
        for m in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    for l in 0..dim {
                        conn.gamma[(m * dim + a) * dim + b].add_product(
                            t,
                            &lowered[(a * dim + b) * dim + l],
                            &lam[l * dim + m],
                        );
                    }
                }
            }
        }
        conn.perturbed = true;
        Ok(conn)
    }

    /// Laplacian `LAPLACIAN_SIGN · g^{ij} ∇_i ∇_j f` at the base point.
    pub fn laplacian(&self, f: &Jet) -> Result<f64> {
        self.laplacian_with_sign(f, LAPLACIAN_SIGN)
    }

    pub fn laplacian_with_sign(&self, f: &Jet, sign: f64) -> Result<f64> {
        let conn = self.levi_civita()?;
        let h = conn.hessian(f)?;
        let dim = self.dim;
        let mut s = 0.0;
        for i in 0..dim {
            for k in 0..dim {
                s += self.g_inv[i * dim + k].value() * h[i * dim + k].value();
            }
        }
        Ok(sign * s)
    }

    /// Laplacian as a jet (one order lower than `f` minus one).
    pub fn laplacian_jet(&self, f: &Jet) -> Result<Jet> {
        let conn = self.levi_civita()?;
        let h = conn.hessian(f)?;
        let q = h[0].order();
        let gi = truncate_all(&self.g_inv, q);
        let mut acc = Jet::zero(self.dim, q);
        for (a, b) in gi.iter().zip(&h) {
            acc += &(a * b);
        }
        Ok(acc.scale(LAPLACIAN_SIGN))
    }

    /// Hamiltonian vector field `X_K` with `i(X_K)ω = dK`: `X^a = ∂_b K Λ^{ba}`.
    pub fn hamiltonian_field(&self, k: &Jet) -> Result<Vec<Jet>> {
        let dk = k.gradient()?;
        let q = dk[0].order().min(self.lambda[0].order());
        let lam = truncate_all(&self.lambda, q);
        let dk = truncate_all(&dk, q);
        Ok((0..self.dim)
            .map(|a| {
                let mut acc = Jet::zero(self.dim, q);
                for b in 0..self.dim {
                    acc += &(&dk[b] * &lam[b * self.dim + a]);
                }
                acc
            })
            .collect())
    }

    /// Applies the constant complex structure to a vector field.
    pub fn apply_j(&self, v: &[Jet]) -> Vec<Jet> {
        let dim = self.dim;
        (0..dim)
            .map(|m| {
                let mut acc = Jet::zero(dim, v[0].order());
                for l in 0..dim {
                    let c = self.j[m * dim + l];
                    if c != 0.0 {
                        acc.axpy(c, &v[l]);
                    }
                }
                acc
            })
            .collect()
    }
}

/// Symmetric 3-tensor fields `A̲_{jkl} = ω(A(∂_j)∂_k, ∂_l)` used to move
/// inside the affine space of symplectic connections.
pub trait CubicField: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;
    fn lowered(&self, p: &[f64], order: usize) -> Result<Vec<Jet>>;
    fn support(&self) -> Option<Support> {
        None
    }
}

/// Completely symmetrizes a `dim³` array.
pub fn symmetrize3(raw: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                let idx = |i: usize, j: usize, k: usize| (i * dim + j) * dim + k;
                out[idx(a, b, c)] = (raw[idx(a, b, c)]
                    + raw[idx(a, c, b)]
                    + raw[idx(b, a, c)]
                    + raw[idx(b, c, a)]
                    + raw[idx(c, a, b)]
                    + raw[idx(c, b, a)])
                    / 6.0;
            }
        }
    }
    out
}

/// `A̲ = bump(x) · S` for a constant symmetric tensor `S`.
#[derive(Debug, Clone)]
pub struct BumpCubic {
    pub bump: Bump,
    pub tensor: Vec<f64>,
}

impl BumpCubic {
    pub fn new(center: Vec<f64>, radius: f64, raw: &[f64]) -> BumpCubic {
        let dim = center.len();
        BumpCubic {
            bump: Bump::new(center, radius),
            tensor: symmetrize3(raw, dim),
        }
    }
}

impl CubicField for BumpCubic {
    fn dim(&self) -> usize {
        self.bump.support.center.len()
    }

    fn lowered(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let b = self.bump.jet_at(p, order);
        Ok(self.tensor.iter().map(|&s| b.scale(s)).collect())
    }

    fn support(&self) -> Option<Support> {
        Some(self.bump.support.clone())
    }
}

impl<T: CubicField> CubicField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn lowered(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        (**self).lowered(p, order)
    }
    fn support(&self) -> Option<Support> {
        (**self).support()
    }
}

/// Christoffel coefficients of a torsion-free connection at a point.
#[derive(Debug, Clone)]
pub struct Connection {
    pub dim: usize,
    pub gamma: Vec<Jet>,
    pub perturbed: bool,
}

impl Connection {
    pub fn order(&self) -> usize {
        self.gamma[0].order()
    }

    pub fn gamma_at(&self, i: usize, j: usize, k: usize) -> &Jet {
        &self.gamma[(i * self.dim + j) * self.dim + k]
    }

    /// Covariant derivative of a tensor with the given index variances.
    /// The new derivative index is prepended: `(∇T)_{a, I} = (∇_{∂_a} T)_I`.
    pub fn covariant_derivative(&self, t: &[Jet], slots: &[Slot]) -> Result<Vec<Jet>> {
        let dim = self.dim;
        let rank = slots.len();
        let size = dim.pow(rank as u32);
        if t.len() != size {
            return Err(GeomError::Dimension(format!(
                "tensor has {} components, expected {size}",
                t.len()
            )));
        }
        let q_in = t[0].order();
        if q_in == 0 {
            return Err(GeomError::Order {
                requested: 1,
                available: 0,
            });
        }
        let q = q_in - 1;
        if self.order() < q {
            return Err(GeomError::Order {
                requested: q,
                available: self.order(),
            });
        }
        let gam = truncate_all(&self.gamma, q);
        let tq = truncate_all(t, q);
        let dt: Vec<Vec<Jet>> = t.iter().map(|e| e.gradient()).collect::<Result<_>>()?;
        let strides: Vec<usize> = (0..rank).map(|s| dim.pow((rank - 1 - s) as u32)).collect();
        let mut out = Vec::with_capacity(dim * size);
        for a in 0..dim {
            for flat in 0..size {
                let mut acc = dt[flat][a].clone();
                for (s, slot) in slots.iter().enumerate() {
                    let is = (flat / strides[s]) % dim;
                    let base = flat - is * strides[s];
                    for m in 0..dim {
                        let other = &tq[base + m * strides[s]];
                        match slot {
                            Slot::Upper => {
                                acc.add_product(1.0, &gam[(is * dim + a) * dim + m], other);
                            }
                            Slot::Lower => {
                                acc.add_product(-1.0, &gam[(m * dim + a) * dim + is], other);
                            }
                        }
                    }
                }
                out.push(acc);
            }
        }
        Ok(out)
    }

    /// `∇∇f` with components `(∇²f)_{ij} = ∂_i∂_j f − Γ^k_{ij} ∂_k f`.
    pub fn hessian(&self, f: &Jet) -> Result<Vec<Jet>> {
        let df = f.gradient()?;
        self.covariant_derivative(&df, &[Slot::Lower])
    }

    /// Riemann, Ricci and scalar curvature. The scalar curvature uses `g_inv`.
    pub fn curvature(&self, g_inv: &[Jet]) -> Result<CurvatureBundle> {
        let dim = self.dim;
        let c = self.order();
        if c == 0 {
            return Err(GeomError::Order {
                requested: 1,
                available: 0,
            });
        }
        let q = c - 1;
        let dgam: Vec<Vec<Jet>> = self
            .gamma
            .iter()
            .map(|e| e.gradient())
            .collect::<Result<_>>()?;
        let gam = truncate_all(&self.gamma, q);
        let idx3 = |i: usize, j: usize, k: usize| (i * dim + j) * dim + k;
        let idx4 = |i: usize, j: usize, k: usize, l: usize| ((i * dim + j) * dim + k) * dim + l;
        let mut riemann = vec![Jet::zero(dim, q); dim.pow(4)];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in k + 1..dim {
                        // ∂_kΓ^i_{lj} − ∂_lΓ^i_{kj} + Γ^i_{km}Γ^m_{lj} − Γ^i_{lm}Γ^m_{kj}
                        let mut acc = dgam[idx3(i, l, j)][k].clone();
                        acc -= &dgam[idx3(i, k, j)][l];
                        for m in 0..dim {
                            acc.add_product(1.0, &gam[idx3(i, k, m)], &gam[idx3(m, l, j)]);
                            acc.add_product(-1.0, &gam[idx3(i, l, m)], &gam[idx3(m, k, j)]);
                        }
                        riemann[idx4(i, j, l, k)] = acc.scale(-1.0);
                        riemann[idx4(i, j, k, l)] = acc;
                    }
                }
            }
        }
        let mut ricci = Vec::with_capacity(dim * dim);
        for j in 0..dim {
            for k in 0..dim {
                let mut acc = Jet::zero(dim, q);
                for i in 0..dim {
                    acc += &riemann[idx4(i, k, i, j)];
                }
                ricci.push(acc);
            }
        }
        let gi = truncate_all(g_inv, q);
        let mut scal = Jet::zero(dim, q);
        for (a, b) in gi.iter().zip(&ricci) {
            scal.add_product(1.0, a, b);
        }
        Ok(CurvatureBundle {
            dim,
            riemann,
            ricci,
            scal,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub dim: usize,
    pub riemann: Vec<Jet>,
    pub ricci: Vec<Jet>,
    pub scal: Jet,
}

impl CurvatureBundle {
    pub fn order(&self) -> usize {
        self.scal.order()
    }

    pub fn riemann_at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.dim;
        self.riemann[((i * d + j) * d + k) * d + l].value()
    }

    /// `(∇²_{(∂_a,∂_b)} Ric)(∂_j, ∂_k)` at the base point, index `((a·d+b)·d+j)·d+k`.
    pub fn second_covariant_ricci(&self, conn: &Connection) -> Result<Vec<f64>> {
        let lower2 = [Slot::Lower, Slot::Lower];
        let d1 = conn.covariant_derivative(&self.ricci, &lower2)?;
        let d2 = conn.covariant_derivative(&d1, &[Slot::Lower, Slot::Lower, Slot::Lower])?;
        Ok(values(&d2))
    }
}

/// Largest first-Bianchi residual `|R(X,Y)Z + R(Y,Z)X + R(Z,X)Y|` over coordinate triples.
pub fn first_bianchi_residual(curv: &CurvatureBundle) -> f64 {
    let d = curv.dim;
    let mut worst = 0.0f64;
    for i in 0..d {
        for x in 0..d {
            for y in 0..d {
                for z in 0..d {
                    // R(∂x,∂y)∂z + R(∂y,∂z)∂x + R(∂z,∂x)∂y
                    let s = curv.riemann_at(i, z, x, y)
                        + curv.riemann_at(i, x, y, z)
                        + curv.riemann_at(i, y, z, x);
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst
}

/// Largest component of `∇ω` and `∇g` for the given connection.
pub fn compatibility_residuals(geom: &PointGeometry, conn: &Connection) -> Result<(f64, f64)> {
    let lower2 = [Slot::Lower, Slot::Lower];
    let q = conn.order() + 1;
    let w = conn.covariant_derivative(&truncate_all(&geom.omega, q), &lower2)?;
    let g = conn.covariant_derivative(&truncate_all(&geom.g, q), &lower2)?;
    let max = |v: &[Jet]| v.iter().fold(0.0f64, |m, j| m.max(j.value().abs()));
    Ok((max(&w), max(&g)))
}
