//! Built-in manifolds with their holomorphic fields, and the JSON spec format.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::{
    ChartDomain, Deformation, ExprField, FlatPotential, FubiniStudy, KahlerChart,
    ProductFubiniStudy, Transition,
};
use crate::error::{GeomError, Result};
use crate::fields::{ExprVectorField, FieldRef, LinearField};
use crate::quadrature::Compactification;

/// A chart together with its registered fields and a bump template used by
/// the class-invariance harness.
#[derive(Debug, Clone)]
pub struct Manifold {
    pub chart: KahlerChart,
    pub fields: Vec<FieldRef>,
    pub bump_template: Option<Deformation>,
    pub description: String,
}

impl Manifold {
    pub fn name(&self) -> &str {
        &self.chart.name
    }

    /// Looks up a field by name; `all` is handled by callers.
    pub fn field(&self, name: &str) -> Result<FieldRef> {
        self.fields
            .iter()
            .find(|f| f.name() == name)
            .cloned()
            .ok_or_else(|| {
                let known: Vec<&str> = self.fields.iter().map(|f| f.name()).collect();
                GeomError::Parse(format!(
                    "unknown field `{name}` on `{}` (known: {})",
                    self.name(),
                    known.join(", ")
                ))
            })
    }

    /// Fields selected by a comma-separated list, or all of them.
    pub fn select_fields(&self, spec: &str) -> Result<Vec<FieldRef>> {
        if spec == "all" {
            return Ok(self.fields.clone());
        }
        spec.split(',').map(|s| self.field(s.trim())).collect()
    }

    /// The same manifold with its bump template applied at `amplitude`.
    pub fn deformed(&self, amplitude: f64) -> Result<Manifold> {
        let template = self.bump_template.clone().ok_or_else(|| {
            GeomError::Unsupported(format!("`{}` has no deformation template", self.name()))
        })?;
        let mut d = template;
        d.amplitude = amplitude;
        let mut out = self.clone();
        out.chart = self.chart.with_deformation(d)?;
        Ok(out)
    }
}

pub const BUILTIN: [&str; 7] = [
    "cp1", "cp2", "cp1xcp1", "flat1", "flat2", "cp1_bump", "cp2_bump",
];

/// Bump amplitude of the `_bump` presets.
pub const PRESET_AMPLITUDE: f64 = 0.05;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn diag(name: &str, d: &[f64]) -> FieldRef {
    let n = d.len();
    let mut a = vec![c(0.0, 0.0); n * n];
    for (i, &v) in d.iter().enumerate() {
        a[i * n + i] = c(v, 0.0);
    }
    Arc::new(LinearField::from_matrix(name, n, a))
}

/// Built-in linear fields for a chart of complex dimension `n`.
pub fn linear_fields(n: usize, product: bool) -> Vec<LinearField> {
    let z = c(0.0, 0.0);
    match (n, product) {
        (1, _) => vec![LinearField::from_matrix("rot", 1, vec![c(-1.0, 0.0)])],
        (2, false) => vec![
            LinearField::from_matrix("rot1", 2, vec![c(-1.0, 0.0), z, z, z]),
            LinearField::from_matrix("rot2", 2, vec![z, z, z, c(-1.0, 0.0)]),
            LinearField::elementary("e12", 2, 0, 1, c(1.0, 0.0)),
            LinearField::elementary("e21", 2, 1, 0, c(1.0, 0.0)),
        ],
        (2, true) => vec![
            LinearField::from_matrix("rot1", 2, vec![c(-1.0, 0.0), z, z, z]),
            LinearField::from_matrix("rot2", 2, vec![z, z, z, c(-1.0, 0.0)]),
        ],
        _ => Vec::new(),
    }
}

fn fs_fields(n: usize, product: bool) -> Vec<FieldRef> {
    linear_fields(n, product)
        .into_iter()
        .map(|f| Arc::new(f) as FieldRef)
        .collect()
}

/// Bump template centred off the origin, amplitude zero.
pub fn bump_template(complex_dim: usize) -> Deformation {
    let center = match complex_dim {
        1 => vec![0.2, -0.1],
        _ => vec![0.3, 0.1, -0.2, 0.2],
    };
    Deformation::bump(center, 1.0, 0.0)
}

pub fn builtin(name: &str) -> Result<Manifold> {
    let m = match name {
        "cp1" => Manifold {
            chart: KahlerChart::new(
                "cp1",
                1,
                Arc::new(FubiniStudy { complex_dim: 1 }),
                ChartDomain::Whole,
                Compactification::PolarTan,
            )?
            .with_transition(Transition::Projective),
            fields: fs_fields(1, false),
            bump_template: Some(bump_template(1)),
            description: "projective line, Fubini-Study potential log(1+|z|^2)".into(),
        },
        "cp2" => Manifold {
            chart: KahlerChart::new(
                "cp2",
                2,
                Arc::new(FubiniStudy { complex_dim: 2 }),
                ChartDomain::Whole,
                Compactification::HopfTan,
            )?
            .with_transition(Transition::Projective),
            fields: fs_fields(2, false),
            bump_template: Some(bump_template(2)),
            description: "projective plane, Fubini-Study potential log(1+|z|^2)".into(),
        },
        "cp1xcp1" => Manifold {
            chart: KahlerChart::new(
                "cp1xcp1",
                2,
                Arc::new(ProductFubiniStudy { factors: 2 }),
                ChartDomain::Whole,
                Compactification::ProductPolarTan { factors: 2 },
            )?
            .with_transition(Transition::FactorInversion),
            fields: fs_fields(2, true),
            bump_template: Some(bump_template(2)),
            description: "product of two projective lines".into(),
        },
        "flat1" | "flat2" => {
            let n = if name == "flat1" { 1 } else { 2 };
            let fields = if n == 1 {
                vec![diag("scale", &[1.0])]
            } else {
                vec![diag("scale", &[1.0, 1.0])]
            };
            Manifold {
                chart: KahlerChart::new(
                    name,
                    n,
                    Arc::new(FlatPotential { complex_dim: n }),
                    ChartDomain::Box {
                        lo: vec![-1.0; 2 * n],
                        hi: vec![1.0; 2 * n],
                    },
                    Compactification::Box {
                        lo: vec![-1.0; 2 * n],
                        hi: vec![1.0; 2 * n],
                    },
                )?,
                fields,
                bump_template: None,
                description: "flat chart on a box (local computations only)".into(),
            }
        }
        "cp1_bump" | "cp2_bump" => {
            let base = builtin(name.trim_end_matches("_bump"))?;
            let mut m = base.deformed(PRESET_AMPLITUDE)?;
            m.chart.name = name.to_string();
            m.description = format!(
                "{} plus a bump of amplitude {PRESET_AMPLITUDE}",
                base.description
            );
            m
        }
        _ => {
            return Err(GeomError::Parse(format!(
                "unknown manifold `{name}` (known: {})",
                BUILTIN.join(", ")
            )))
        }
    };
    Ok(m)
}

/// Declarative manifold description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub name: String,
    pub complex_dim: usize,
    /// Expression over `x1..x{2n}`.
    pub potential: String,
    #[serde(default = "whole")]
    pub chart_domain: ChartDomain,
    /// Named preset: `fs`, `polar_tan`, `hopf_tan`, `product`.
    pub compactification: String,
    /// Second chart for nodes far from the origin. Only valid when the
    /// potential has Fubini–Study form: `projective` for CPⁿ,
    /// `factor_inversion` for products of projective lines.
    #[serde(default)]
    pub transition: Option<Transition>,
    #[serde(default)]
    pub deformations: Vec<DeformationSpec>,
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
}

fn whole() -> ChartDomain {
    ChartDomain::Whole
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeformationSpec {
    Bump {
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
    },
    Global {
        expression: String,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    #[serde(rename = "Z")]
    pub z: Vec<String>,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(rename = "H")]
    pub h: String,
}

/// Parses a JSON spec; syntax and schema errors carry line and column.
pub fn parse_spec(text: &str) -> Result<ManifoldSpec> {
    serde_json::from_str(text).map_err(|e| {
        // serde_json appends its own position; keep one copy, in front.
        let msg = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        let msg = msg.strip_suffix(&suffix).unwrap_or(&msg);
        GeomError::Parse(format!("line {}, column {}: {msg}", e.line(), e.column()))
    })
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<Manifold> {
        let n = self.complex_dim;
        let d = 2 * n;
        let ctx = |what: &str, e: GeomError| GeomError::Parse(format!("field `{what}`: {e}"));
        let potential = ExprField::parse(&self.potential, d).map_err(|e| ctx("potential", e))?;
        let compactification = Compactification::from_name(&self.compactification, n)
            .map_err(|e| ctx("compactification", e))?;
        let mut chart = KahlerChart::new(
            self.name.clone(),
            n,
            Arc::new(potential),
            self.chart_domain.clone(),
            compactification,
        )
        .map_err(|e| ctx("complex_dim", e))?;
        if let Some(t) = self.transition {
            if self.chart_domain != ChartDomain::Whole {
                return Err(ctx(
                    "transition",
                    GeomError::Unsupported("a second chart needs the whole chart domain".into()),
                ));
            }
            chart = chart.with_transition(t);
        }
        for (i, def) in self.deformations.iter().enumerate() {
            let deformation = match def {
                DeformationSpec::Bump {
                    center,
                    radius,
                    amplitude,
                } => {
                    if center.len() != d || *radius <= 0.0 {
                        return Err(ctx(
                            &format!("deformations[{i}]"),
                            GeomError::Dimension(
                                "bump needs a centre in the chart and a positive radius".into(),
                            ),
                        ));
                    }
                    Deformation::bump(center.clone(), *radius, *amplitude)
                }
                DeformationSpec::Global {
                    expression,
                    amplitude,
                } => {
                    let f = ExprField::parse(expression, d)
                        .map_err(|e| ctx(&format!("deformations[{i}].expression"), e))?;
                    Deformation::global(Arc::new(f), *amplitude)
                }
            };
            chart = chart.with_deformation(deformation)?;
        }
        let fields = self
            .fields
            .iter()
            .map(|f| {
                if f.z.len() != d {
                    return Err(ctx(
                        &format!("fields.{}.Z", f.name),
                        GeomError::Dimension(format!("expected {d} components, got {}", f.z.len())),
                    ));
                }
                ExprVectorField::parse(&f.name, &f.z, &f.f, &f.h).map(|v| Arc::new(v) as FieldRef)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Manifold {
            chart,
            fields,
            bump_template: (n <= 2).then(|| bump_template(n)),
            description: format!("loaded from spec `{}`", self.name),
        })
    }
}

/// Loads either a built-in name or a JSON spec document.
pub fn load_spec_text(text: &str) -> Result<Manifold> {
    parse_spec(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_construct() {
        for name in BUILTIN {
            let m = builtin(name).unwrap();
            assert_eq!(m.name(), name);
            assert!(!m.fields.is_empty());
        }
        assert!(builtin("cp3").is_err());
    }

    fn scalar_curvature(geom: &crate::geometry::PointGeometry) -> f64 {
        let conn = geom.levi_civita().unwrap();
        conn.curvature(&geom.g_inv).unwrap().scal.value()
    }

    #[test]
    fn second_chart_reproduces_first_chart_scalars() {
        use crate::geometry::{ChartPoint, PointGeometry};
        let cases = [
            ("cp1_bump", vec![1.1, 0.4]),
            ("cp2_bump", vec![1.2, 0.3, -0.4, 0.5]),
            ("cp2", vec![0.2, 0.9, 1.3, -0.1]),
            ("cp1xcp1", vec![1.4, 0.2, 0.3, -0.2]),
        ];
        for (name, p) in cases {
            let m = builtin(name).unwrap();
            let cp = ChartPoint::new(&m.chart, &p, 4).unwrap();
            assert!(cp.map.is_some(), "{name} should switch charts");
            let direct = PointGeometry::new(&m.chart, &p, 4).unwrap();
            let (a, b) = (scalar_curvature(&cp.geom), scalar_curvature(&direct));
            assert!((a - b).abs() < 1e-8, "{name}: scal {a} vs {b}");
            let (va, vb) = (cp.volume_density(), direct.volume_density());
            assert!(
                (va - vb).abs() < 1e-10 * vb.abs().max(1.0),
                "{name}: vol {va} vs {vb}"
            );
        }
    }

    #[test]
    fn spec_roundtrip_and_diagnostics() {
        let text = r#"{
  "name": "cp1_expr",
  "complex_dim": 1,
  "potential": "log(1 + x1^2 + x2^2)",
  "compactification": "fs",
  "fields": [{"name": "rot", "Z": ["-x1", "-x2"], "F": "0", "H": "(1 - x1^2 - x2^2)/(1 + x1^2 + x2^2)"}]
}"#;
        let m = load_spec_text(text).unwrap();
        assert_eq!(m.chart.complex_dim, 1);
        assert_eq!(m.fields.len(), 1);
        assert!(m.chart.transition.is_none());

        let with_chart = text.replace("\"fs\"", "\"fs\",\n  \"transition\": \"projective\"");
        let m = load_spec_text(&with_chart).unwrap();
        assert_eq!(m.chart.transition, Some(Transition::Projective));
        let bad = with_chart.replace("\"projective\"", "\"sideways\"");
        assert!(matches!(load_spec_text(&bad), Err(GeomError::Parse(_))));

        let bad = text.replace("\"fs\"", "\"fs\",\n  \"bogus\": 1");
        match load_spec_text(&bad) {
            Err(GeomError::Parse(msg)) => assert!(msg.contains("line 6"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let bad = text.replace("log(1 + x1^2 + x2^2)", "log(1 + x1^2 +)");
        match load_spec_text(&bad) {
            Err(GeomError::Parse(msg)) => assert!(msg.contains("potential"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
