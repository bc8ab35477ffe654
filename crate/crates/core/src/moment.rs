//! The Cahen–Gutt moment map `μ(∇) = (∇²Ric)(e^p, e^q)(e_p, e_q) + P(∇) − μ₀`
//! on symplectic connections, its Kähler form `−½ΔScal + P − μ₀`, the
//! symplectic pairing on the space of connections, and the moment-map
//! property check.

use serde::{Deserialize, Serialize};

use crate::chart::{KahlerChart, ScalarField, Support};
use crate::chern::{omega_form, trace_curvature_square};
use crate::error::{GeomError, Result};
use crate::forms::omega_power;
use crate::geometry::{
    invert_matrix, values, ChartPoint, Connection, CubicField, CurvatureBundle, PointGeometry,
};
use crate::jet::{Jet, DEFAULT_ORDER};
use crate::quadrature::{Integral, QuadratureAtlas, Variant};

/// Frame used for the symplectic dual-frame contraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    #[default]
    Coordinate,
    /// A Darboux frame at the point: `ω(e_{2a}, e_{2a+1}) = 1`.
    Darboux,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentComponents {
    pub div_div_ric: f64,
    pub pontryagin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentDensity {
    pub point: Vec<f64>,
    /// `div_div_ric + pontryagin`, before subtracting `μ₀`.
    pub mu_raw: f64,
    pub p_density: f64,
    pub mu: f64,
    pub components: MomentComponents,
}

/// `P(∇)` with `P ωⁿ/n! = ½ tr(R∘∧R) ∧ ω^{n−2}/(n−2)!`.
pub fn pontryagin_density(geom: &PointGeometry, curv: &CurvatureBundle) -> Result<f64> {
    let n = geom.complex_dim;
    if n < 2 {
        return Ok(0.0);
    }
    let omega = omega_form(geom);
    let top = trace_curvature_square(curv).wedge(&omega_power(&omega, n - 2));
    Ok(0.5 * top.ratio_to(&omega_power(&omega, n))?.re)
}

/// Columns of a frame `E` (`e_k = E[·][k]`) and its symplectic dual
/// `e^l` with `ω(e_k, e^l) = δ_k^l`, as row-major `dim × dim` matrices.
pub fn symplectic_dual_frame(omega: &[f64], frame: &[f64], dim: usize) -> Result<Vec<f64>> {
    // Eᵀ ω E' = I  ⇒  E' = ω⁻¹ E⁻ᵀ.
    let w_inv = invert_matrix(omega, dim).ok_or_else(|| GeomError::Singular("ω".into()))?;
    let e_inv = invert_matrix(frame, dim).ok_or_else(|| GeomError::Singular("frame".into()))?;
    let mut out = vec![0.0; dim * dim];
    for a in 0..dim {
        for l in 0..dim {
            out[a * dim + l] = (0..dim)
                .map(|m| w_inv[a * dim + m] * e_inv[l * dim + m])
                .sum();
        }
    }
    Ok(out)
}

/// Symplectic Gram–Schmidt of the coordinate basis.
pub fn darboux_frame(omega: &[f64], dim: usize) -> Result<Vec<f64>> {
    let w = |u: &[f64], v: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                s += u[i] * omega[i * dim + j] * v[j];
            }
        }
        s
    };
    let mut pool: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while !pool.is_empty() {
        let e = pool.remove(0);
        let (pos, val) = pool
            .iter()
            .enumerate()
            .map(|(i, f)| (i, w(&e, f)))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .ok_or_else(|| GeomError::Degenerate(omega.to_vec()))?;
        if val.abs() < 1e-14 {
            return Err(GeomError::Degenerate(omega.to_vec()));
        }
        let f: Vec<f64> = pool.remove(pos).iter().map(|x| x / val).collect();
        // Remove the span of (e, f) from the rest: v ← v − ω(v, f) e + ω(v, e) f.
        for v in pool.iter_mut() {
            let a = w(v, &f);
            let b = w(v, &e);
            for i in 0..dim {
                v[i] += -a * e[i] + b * f[i];
            }
        }
        cols.push(e);
        cols.push(f);
    }
    let mut out = vec![0.0; dim * dim];
    for (k, c) in cols.iter().enumerate() {
        for i in 0..dim {
            out[i * dim + k] = c[i];
        }
    }
    Ok(out)
}

/// `Σ_{p,q} D(e_p, e_q, e^p, e^q)` for a 4-tensor `D` in coordinates.
pub fn dual_frame_contraction(d4: &[f64], omega: &[f64], dim: usize, frame: Frame) -> Result<f64> {
    let e = match frame {
        Frame::Coordinate => {
            let mut id = vec![0.0; dim * dim];
            for i in 0..dim {
                id[i * dim + i] = 1.0;
            }
            id
        }
        Frame::Darboux => darboux_frame(omega, dim)?,
    };
    let ed = symplectic_dual_frame(omega, &e, dim)?;
    // Change of basis on each slot, then contract.
    let mut s = 0.0;
    for p in 0..dim {
        for q in 0..dim {
            let mut acc = 0.0;
            for i in 0..dim {
                let ei = e[i * dim + p];
                if ei == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    let ej = e[j * dim + q];
                    if ej == 0.0 {
                        continue;
                    }
                    for a in 0..dim {
                        for b in 0..dim {
                            acc += d4[((i * dim + j) * dim + a) * dim + b]
                                * ei
                                * ej
                                * ed[a * dim + p]
                                * ed[b * dim + q];
                        }
                    }
                }
            }
            s += acc;
        }
    }
    Ok(s)
}

fn check_order(geom: &PointGeometry) -> Result<()> {
    if geom.potential_order < DEFAULT_ORDER {
        return Err(GeomError::Order {
            requested: DEFAULT_ORDER,
            available: geom.potential_order,
        });
    }
    Ok(())
}

/// `μ` from the second covariant derivative of the Ricci tensor of `conn`.
pub fn moment_map_direct(
    geom: &PointGeometry,
    conn: &Connection,
    mu0: f64,
    frame: Frame,
) -> Result<MomentDensity> {
    check_order(geom)?;
    let curv = conn.curvature(&geom.g_inv)?;
    let d2 = curv.second_covariant_ricci(conn)?;
    let ddr = dual_frame_contraction(&d2, &values(&geom.omega), geom.dim, frame)?;
    let p = pontryagin_density(geom, &curv)?;
    Ok(density(geom, ddr, p, mu0))
}

fn density(geom: &PointGeometry, ddr: f64, p: f64, mu0: f64) -> MomentDensity {
    MomentDensity {
        point: geom.point.clone(),
        mu_raw: ddr + p,
        p_density: p,
        mu: ddr + p - mu0,
        components: MomentComponents {
            div_div_ric: ddr,
            pontryagin: p,
        },
    }
}

/// `μ = −½ΔScal + P − μ₀` for the Levi-Civita connection.
pub fn moment_map_kahler(
    geom: &PointGeometry,
    conn: &Connection,
    mu0: f64,
) -> Result<MomentDensity> {
    check_order(geom)?;
    if conn.perturbed {
        return Err(GeomError::Unsupported(
            "Kähler simplification requires the Levi-Civita connection".into(),
        ));
    }
    let curv = conn.curvature(&geom.g_inv)?;
    let lap = geom.laplacian(&curv.scal)?;
    let p = pontryagin_density(geom, &curv)?;
    Ok(density(geom, -0.5 * lap, p, mu0))
}

/// Pointwise `μ` on a chart, optionally for `∇ + tA`.
pub fn moment_at(
    chart: &KahlerChart,
    p: &[f64],
    perturbation: Option<(&dyn CubicField, f64)>,
    mu0: f64,
) -> Result<MomentDensity> {
    let geom = match perturbation {
        // Perturbations are given in first-chart coordinates.
        Some(_) => PointGeometry::new(chart, p, DEFAULT_ORDER)?,
        None => ChartPoint::new(chart, p, DEFAULT_ORDER)?.geom,
    };
    let conn = match perturbation {
        Some((a, t)) => geom.perturbed(a, t)?,
        None => geom.levi_civita()?,
    };
    moment_map_direct(&geom, &conn, mu0, Frame::Coordinate)
}

/// `μ₀ = ∫P ωⁿ/n! / ∫ωⁿ/n!` for the Levi-Civita connection, which makes
/// `μ` integrate to zero.
pub fn mu_zero(atlas: &QuadratureAtlas, chart: &KahlerChart) -> Result<(Integral, Integral)> {
    if chart.complex_dim < 2 {
        let vol = atlas.volume(chart)?;
        return Ok((Integral::zero(), vol));
    }
    let r = atlas.integrate_densities(chart, 2, |c, x| {
        let cp = ChartPoint::new(c, x, 4)?;
        let conn = cp.geom.levi_civita()?;
        let curv = conn.curvature(&cp.geom.g_inv)?;
        let vol = cp.volume_density();
        Ok(vec![pontryagin_density(&cp.geom, &curv)? * vol, vol])
    })?;
    let mean = Integral::combine(&r, |v| v[0] / v[1]);
    Ok((mean, r[1]))
}

/// `(ℒ_{X_F}∇)(∂_j)∂_k = ∇²_{(∂_j,∂_k)} X_F + R(X_F, ∂_j)∂_k`, lowered with `ω`:
/// index `(j·d + k)·d + l`.
pub fn lie_derivative_connection(
    geom: &PointGeometry,
    conn: &Connection,
    f: &Jet,
) -> Result<Vec<f64>> {
    use crate::geometry::Slot;
    let d = geom.dim;
    if f.order() < 3 {
        return Err(GeomError::Order {
            requested: 3,
            available: f.order(),
        });
    }
    let x = geom.hamiltonian_field(f)?;
    let x = crate::geometry::truncate_all(&x, 2);
    let dx = conn.covariant_derivative(&x, &[Slot::Upper])?;
    let d2x = conn.covariant_derivative(&dx, &[Slot::Lower, Slot::Upper])?;
    let curv = conn.curvature(&geom.g_inv)?;
    let xv = values(&x);
    let w = values(&geom.omega);
    let mut upper = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = d2x[(j * d + k) * d + i].value();
                for a in 0..d {
                    s += xv[a] * curv.riemann_at(i, k, a, j);
                }
                upper[(i * d + j) * d + k] = s;
            }
        }
    }
    let mut lowered = vec![0.0; d * d * d];
    for j in 0..d {
        for k in 0..d {
            for l in 0..d {
                lowered[(j * d + k) * d + l] = (0..d)
                    .map(|i| upper[(i * d + j) * d + k] * w[i * d + l])
                    .sum();
            }
        }
    }
    Ok(lowered)
}

/// Largest deviation of a lowered 3-tensor from complete symmetry.
pub fn symmetry_residual(t: &[f64], dim: usize) -> f64 {
    let idx = |a: usize, b: usize, c: usize| (a * dim + b) * dim + c;
    let mut worst = 0.0f64;
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                let v = t[idx(a, b, c)];
                for w in [t[idx(b, a, c)], t[idx(a, c, b)], t[idx(c, b, a)]] {
                    worst = worst.max((v - w).abs());
                }
            }
        }
    }
    worst
}

/// `Λ^{i₁j₁}Λ^{i₂j₂}Λ^{i₃j₃} A̲_{i₁i₂i₃} B̲_{j₁j₂j₃}`.
pub fn lambda_triple_density(lambda: &[f64], a: &[f64], b: &[f64], dim: usize) -> f64 {
    // Raise all indices of B first: B^{i₁i₂i₃}.
    let mut t1 = vec![0.0; dim * dim * dim];
    for i in 0..dim {
        for j2 in 0..dim {
            for j3 in 0..dim {
                t1[(i * dim + j2) * dim + j3] = (0..dim)
                    .map(|j1| lambda[i * dim + j1] * b[(j1 * dim + j2) * dim + j3])
                    .sum();
            }
        }
    }
    let mut t2 = vec![0.0; dim * dim * dim];
    for i1 in 0..dim {
        for i2 in 0..dim {
            for j3 in 0..dim {
                t2[(i1 * dim + i2) * dim + j3] = (0..dim)
                    .map(|j2| lambda[i2 * dim + j2] * t1[(i1 * dim + j2) * dim + j3])
                    .sum();
            }
        }
    }
    let mut s = 0.0;
    for i1 in 0..dim {
        for i2 in 0..dim {
            for i3 in 0..dim {
                let raised: f64 = (0..dim)
                    .map(|j3| lambda[i3 * dim + j3] * t2[(i1 * dim + i2) * dim + j3])
                    .sum();
                s += a[(i1 * dim + i2) * dim + i3] * raised;
            }
        }
    }
    s
}

/// `−Λ^{kl} tr(A(e_k) B(e_l))` with `A(∂_k)^i_j = A̲_{kjm} Λ^{mi}`.
pub fn endo_wedge_density(lambda: &[f64], a: &[f64], b: &[f64], dim: usize) -> f64 {
    let raise = |t: &[f64]| -> Vec<f64> {
        // E[k][i][j] = A^i_{kj}
        let mut out = vec![0.0; dim * dim * dim];
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    out[(k * dim + i) * dim + j] = (0..dim)
                        .map(|m| t[(k * dim + j) * dim + m] * lambda[m * dim + i])
                        .sum();
                }
            }
        }
        out
    };
    let ea = raise(a);
    let eb = raise(b);
    let mut s = 0.0;
    for k in 0..dim {
        for l in 0..dim {
            let lam = lambda[k * dim + l];
            if lam == 0.0 {
                continue;
            }
            let mut tr = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    tr += ea[(k * dim + i) * dim + j] * eb[(l * dim + j) * dim + i];
                }
            }
            s -= lam * tr;
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingFormula {
    EndoWedge,
    LambdaTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaEPairing {
    pub value: f64,
    pub formula_used: PairingFormula,
    pub endo_wedge: Integral,
    pub lambda_triple: Integral,
}

/// Lowered 3-tensor field evaluated on a chart point.
pub type TensorField<'a> = dyn Fn(&PointGeometry) -> Result<Vec<f64>> + Sync + 'a;

/// `Ω^E(A, B)` by both formulas. `support` restricts integration to a ball
/// containing the support of the product (e.g. that of a bump field).
pub fn omega_e_pair(
    chart: &KahlerChart,
    a: &TensorField<'_>,
    b: &TensorField<'_>,
    support: Option<&Support>,
    atlas: &QuadratureAtlas,
) -> Result<OmegaEPairing> {
    let eval = |x: &[f64]| -> Result<Vec<f64>> {
        let geom = PointGeometry::new(chart, x, DEFAULT_ORDER.min(5))?;
        let lam = values(&geom.lambda);
        let (ta, tb) = (a(&geom)?, b(&geom)?);
        let vol = geom.volume_density();
        Ok(vec![
            endo_wedge_density(&lam, &ta, &tb, geom.dim) * vol,
            lambda_triple_density(&lam, &ta, &tb, geom.dim) * vol,
        ])
    };
    let r = match support {
        Some(s) => {
            atlas.integrate_with_supports(Some(std::slice::from_ref(s)), 2, |v, x| match v {
                Variant::Full => eval(x),
                Variant::Base => Ok(vec![0.0, 0.0]),
            })?
        }
        None => atlas.integrate_with_supports(None, 2, |_, x| eval(x))?,
    };
    let (ew, lt) = (r[0], r[1]);
    let scale = ew.value.abs().max(lt.value.abs());
    if (ew.value - lt.value).abs() > 1e-6 * scale + ew.error_estimate + lt.error_estimate {
        return Err(GeomError::Consistency(format!(
            "pairing formulas disagree: {} vs {}",
            ew.value, lt.value
        )));
    }
    Ok(OmegaEPairing {
        value: lt.value,
        formula_used: PairingFormula::LambdaTriple,
        endo_wedge: ew,
        lambda_triple: lt,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPropertyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    pub lhs_error_estimate: f64,
    pub rhs_error_estimate: f64,
    pub t_step: f64,
}

/// Compares `d/dt|₀ ∫ μ(∇+tA) F ωⁿ/n!` with `Ω^E(ℒ_{X_F}∇, A)`.
///
/// `F` should have zero mean; the `t`-dependence of `μ₀` then drops out.
/// Both integrals are taken over the ball supporting `A`, where the
/// integrands are supported.
pub fn moment_property_check(
    chart: &KahlerChart,
    f: &dyn ScalarField,
    a: &dyn CubicField,
    t_step: f64,
    atlas: &QuadratureAtlas,
) -> Result<MomentPropertyReport> {
    let support = a
        .support()
        .ok_or_else(|| GeomError::Unsupported("perturbation needs compact support".into()))?;
    let mu_diff = |x: &[f64], h: f64| -> Result<f64> {
        let geom = PointGeometry::new(chart, x, DEFAULT_ORDER)?;
        let plus = moment_map_direct(&geom, &geom.perturbed(a, h)?, 0.0, Frame::Coordinate)?;
        let minus = moment_map_direct(&geom, &geom.perturbed(a, -h)?, 0.0, Frame::Coordinate)?;
        Ok((plus.mu_raw - minus.mu_raw) / (2.0 * h))
    };
    let sup = std::slice::from_ref(&support);
    let r = atlas.integrate_with_supports(Some(sup), 3, |v, x| {
        if v == Variant::Base {
            return Ok(vec![0.0; 3]);
        }
        let geom = PointGeometry::new(chart, x, 4)?;
        let fv = f.value(x)?;
        let vol = geom.volume_density();
        let d1 = mu_diff(x, t_step)?;
        let d2 = mu_diff(x, 0.5 * t_step)?;
        // Pairing integrand.
        let fj = f.jet(x, 3)?;
        let conn = geom.levi_civita()?;
        let lie = lie_derivative_connection(&geom, &conn, &fj)?;
        let av = values(&a.lowered(x, 0)?);
        let lam = values(&geom.lambda);
        let pair = lambda_triple_density(&lam, &lie, &av, geom.dim);
        Ok(vec![d1 * fv * vol, d2 * fv * vol, pair * vol])
    })?;
    let lhs = (4.0 * r[1].value - r[0].value) / 3.0;
    let lhs_err = (4.0 * r[1].error_estimate + r[0].error_estimate) / 3.0;
    let rhs = r[2].value;
    let denom = lhs.abs().max(rhs.abs());
    let rel_err = if denom == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / denom
    };
    Ok(MomentPropertyReport {
        lhs,
        rhs,
        rel_err,
        lhs_error_estimate: lhs_err,
        rhs_error_estimate: r[2].error_estimate,
        t_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Bump, ChartDomain, FlatPotential, FubiniStudy};
    use crate::geometry::BumpCubic;
    use crate::quadrature::Compactification;
    use std::sync::Arc;

    fn cp(n: usize) -> KahlerChart {
        let comp = if n == 1 {
            Compactification::PolarTan
        } else {
            Compactification::HopfTan
        };
        KahlerChart::new(
            "cp",
            n,
            Arc::new(FubiniStudy { complex_dim: n }),
            ChartDomain::Whole,
            comp,
        )
        .unwrap()
    }

    fn cubic() -> BumpCubic {
        BumpCubic::new(
            vec![0.1, 0.3],
            0.7,
            &[0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.7, -0.3],
        )
    }

    #[test]
    fn flat_chart_has_zero_moment() {
        let flat = KahlerChart::new(
            "flat",
            2,
            Arc::new(FlatPotential { complex_dim: 2 }),
            ChartDomain::Whole,
            Compactification::HopfTan,
        )
        .unwrap();
        let m = moment_at(&flat, &[0.1, 0.2, -0.3, 0.4], None, 0.0).unwrap();
        assert_eq!(m.mu, 0.0);
    }

    #[test]
    fn fubini_study_moment_is_constant_pontryagin() {
        let chart = cp(2);
        for p in [[0.0, 0.0, 0.0, 0.0], [0.4, -0.7, 1.3, 0.2]] {
            let m = moment_at(&chart, &p, None, -1.5).unwrap();
            assert!((m.p_density + 1.5).abs() < 1e-10, "{}", m.p_density);
            assert!(m.mu.abs() < 1e-9, "{}", m.mu);
        }
    }

    #[test]
    fn frames_agree_for_perturbed_connection() {
        let chart = cp(1);
        let a = cubic();
        let p = [0.2, 0.25];
        let geom = PointGeometry::new(&chart, &p, DEFAULT_ORDER).unwrap();
        let conn = geom.perturbed(&a, 0.3).unwrap();
        let c = moment_map_direct(&geom, &conn, 0.0, Frame::Coordinate).unwrap();
        let d = moment_map_direct(&geom, &conn, 0.0, Frame::Darboux).unwrap();
        assert!((c.mu - d.mu).abs() < 1e-9 * (1.0 + c.mu.abs()));
        assert!(moment_map_kahler(&geom, &conn, 0.0).is_err());
    }

    #[test]
    fn lie_derivative_of_connection_is_symmetric() {
        let chart = cp(2);
        let p = [0.3, -0.2, 0.5, 0.1];
        let geom = PointGeometry::new(&chart, &p, 5).unwrap();
        let conn = geom.levi_civita().unwrap();
        let f = Bump::new(vec![0.0; 4], 2.0).jet_at(&p, 3);
        let lie = lie_derivative_connection(&geom, &conn, &f).unwrap();
        let scale = lie.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(scale > 1e-3);
        assert!(symmetry_residual(&lie, 4) < 1e-10 * scale);
    }

    #[test]
    fn pairing_is_antisymmetric_and_local() {
        let chart = cp(1);
        let atlas = QuadratureAtlas::with_nodes(Compactification::PolarTan, 24);
        let a1 = cubic();
        let a2 = BumpCubic::new(
            vec![0.3, 0.1],
            0.6,
            &[0.1, 0.4, -0.2, 0.3, 0.2, -0.5, 0.1, 0.6],
        );
        let ta = |g: &PointGeometry| Ok(values(&a1.lowered(&g.point, 0)?));
        let tb = |g: &PointGeometry| Ok(values(&a2.lowered(&g.point, 0)?));
        let s = a1.support();
        let ab = omega_e_pair(&chart, &ta, &tb, s.as_ref(), &atlas).unwrap();
        let ba = omega_e_pair(&chart, &tb, &ta, s.as_ref(), &atlas).unwrap();
        assert!(ab.value.abs() > 1e-6);
        assert!((ab.value + ba.value).abs() < 1e-12);
        let far = BumpCubic::new(vec![3.0, 3.0], 0.5, &[1.0; 8]);
        let tf = |g: &PointGeometry| Ok(values(&far.lowered(&g.point, 0)?));
        let zero = omega_e_pair(&chart, &ta, &tf, s.as_ref(), &atlas).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn moment_property_on_cp1() {
        let chart = cp(1);
        let atlas = QuadratureAtlas::with_nodes(Compactification::PolarTan, 24);
        let f = Bump::new(vec![0.2, -0.1], 1.2);
        let r = moment_property_check(&chart, &f, &cubic(), 1e-4, &atlas).unwrap();
        assert!(r.rel_err < 1e-6, "{r:?}");
    }
}
