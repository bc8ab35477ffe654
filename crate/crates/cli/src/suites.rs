//! Verification suites. Each suite produces a list of checks, every check a
//! residual against a bound; the suite passes when all checks do.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use futaki_core::chart::{Bump, ChartDomain, KahlerChart};
use futaki_core::chern::pontryagin_identity_residual;
use futaki_core::geometry::{BumpCubic, ChartPoint};
use futaki_core::invariants::{
    character_check, class_invariance_check, compute_report, trace_identity, FIELD_THRESHOLD,
};
use futaki_core::jet::DEFAULT_ORDER;
use futaki_core::moment::{moment_map_direct, moment_map_kahler, moment_property_check, Frame};

use crate::{CliError, RunConfig, Suite};

const SEED: u64 = 0x5eed;
const POINTS: usize = 100;
const PAIRS: usize = 3;
const T_STEP: f64 = 1e-4;
const AMPLITUDES: [f64; 3] = [0.0, 1e-2, 5e-2];

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    residual: f64,
    bound: f64,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<serde_json::Value>,
}

impl Check {
    fn new(name: impl Into<String>, residual: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            residual,
            bound,
            passed: residual.is_finite() && residual <= bound,
            detail: None,
        }
    }

    fn with_detail<T: Serialize>(mut self, d: &T) -> Check {
        self.detail = serde_json::to_value(d).ok();
        self
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    suite: Suite,
    manifold: &'a str,
    jet_order: usize,
    nodes_per_axis: Vec<usize>,
    /// Absolute or relative bound, or a multiple of the quadrature error
    /// estimate, depending on the suite.
    tolerance: f64,
    passed: bool,
    checks: Vec<Check>,
}

/// `a / b`, with `0 / 0 = 0`.
fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn default_tol(suite: Suite) -> f64 {
    match suite {
        Suite::Bianchi => 1e-7,
        Suite::MomentProperty => 1e-3,
        Suite::ChernIdentity => 1e-8,
        Suite::TraceIdentity => 1e-7,
        Suite::ClassInvariance | Suite::Character => 10.0,
        Suite::Prop41 => 1.0,
    }
}

/// A point in the chart domain. On whole charts the box reaches past the
/// unit polydisc so that both coordinate charts get exercised.
fn random_point(domain: &ChartDomain, dim: usize, reach: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match domain {
        ChartDomain::Whole => (0..dim).map(|_| rng.gen_range(-reach..reach)).collect(),
        ChartDomain::Box { lo, hi } => lo
            .iter()
            .zip(hi)
            .map(|(l, h)| l + (h - l) * rng.gen_range(0.02..0.98))
            .collect(),
        ChartDomain::Ball { center, radius } => loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() < 0.9 {
                break center.iter().zip(&v).map(|(c, x)| c + radius * x).collect();
            }
        },
    }
}

fn points(chart: &KahlerChart, reach: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..POINTS)
        .map(|_| random_point(&chart.domain, chart.real_dim(), reach, &mut rng))
        .collect()
}

fn bianchi(cfg: &RunConfig, tol: f64) -> Result<Vec<Check>, CliError> {
    let chart = &cfg.manifold.chart;
    let mut worst = 0.0f64;
    for p in points(chart, 2.5) {
        let cp = ChartPoint::new(chart, &p, DEFAULT_ORDER)?;
        let conn = cp.geom.levi_civita()?;
        let k = moment_map_kahler(&cp.geom, &conn, 0.0)?.mu_raw;
        for frame in [Frame::Coordinate, Frame::Darboux] {
            let d = moment_map_direct(&cp.geom, &conn, 0.0, frame)?.mu_raw;
            worst = worst.max((d - k).abs());
        }
    }
    Ok(vec![Check::new(
        format!("direct vs kahler at {POINTS} points"),
        worst,
        tol,
    )])
}

fn chern_identity(cfg: &RunConfig, tol: f64) -> Result<Vec<Check>, CliError> {
    let chart = &cfg.manifold.chart;
    let mut worst = 0.0f64;
    for p in points(chart, 2.5) {
        let cp = ChartPoint::new(chart, &p, 4)?;
        let curv = cp.geom.levi_civita()?.curvature(&cp.geom.g_inv)?;
        worst = worst.max(pontryagin_identity_residual(&curv));
    }
    Ok(vec![Check::new(
        format!("componentwise residual at {POINTS} points"),
        worst,
        tol,
    )])
}

fn trace(cfg: &RunConfig, tol: f64) -> Result<Vec<Check>, CliError> {
    let m = &cfg.manifold;
    let mut checks = Vec::new();
    for f in m.select_fields(&cfg.field)? {
        let mut worst = 0.0f64;
        for p in points(&m.chart, 1.5) {
            worst = worst.max(trace_identity(&m.chart, f.as_ref(), &p)?.residual);
        }
        checks.push(Check::new(f.name(), worst, tol));
    }
    Ok(checks)
}

fn moment_property(cfg: &RunConfig, tol: f64) -> Result<Vec<Check>, CliError> {
    let chart = &cfg.manifold.chart;
    let d = chart.real_dim();
    let atlas = cfg.atlas();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut checks = Vec::new();
    for i in 0..PAIRS {
        let fc: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let f = Bump::new(fc, rng.gen_range(0.8..1.3));
        let ac: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let raw: Vec<f64> = (0..d * d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = BumpCubic::new(ac, rng.gen_range(0.5..0.9), &raw);
        let r = moment_property_check(chart, &f, &a, T_STEP, &atlas)?;
        checks.push(Check::new(format!("pair {i}"), r.rel_err, tol).with_detail(&r));
    }
    Ok(checks)
}

fn class_invariance(cfg: &RunConfig, tol: f64) -> Result<Vec<Check>, CliError> {
    let m = &cfg.manifold;
    let template = m
        .bump_template
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("`{}` has no deformation template", m.name())))?;
    let atlas = cfg.atlas();
    let mut checks = Vec::new();
    for f in m.select_fields(&cfg.field)? {
        let rows = class_invariance_check(&m.chart, f.as_ref(), template, &AMPLITUDES, &atlas)?;
        let base = &rows[0];
        // Ratio of the drift to the larger of the two error estimates.
        let mut worst = 0.0f64;
        for r in &rows[1..] {
            let err = r.error_estimate.max(base.error_estimate);
            worst = worst.max(ratio((r.f_omega - base.f_omega).abs(), err));
        }
        checks.push(Check::new(f.name(), worst, tol).with_detail(&rows));
    }
    Ok(checks)
}

fn character(cfg: &RunConfig, tol: f64) -> Result<Vec<Check>, CliError> {
    let m = &cfg.manifold;
    let atlas = cfg.atlas();
    let fields = m.select_fields(&cfg.field)?;
    let mut checks = Vec::new();
    for (i, y) in fields.iter().enumerate() {
        for z in &fields[i + 1..] {
            let (Some(ly), Some(lz)) = (y.as_linear(), z.as_linear()) else {
                continue;
            };
            if ly.bracket(lz).is_zero() {
                continue;
            }
            let r = character_check(ly, lz, &m.chart, &atlas)?;
            #[derive(Serialize)]
            struct Detail {
                f_omega: f64,
                error_estimate: f64,
            }
            let name = format!("[{}, {}]", y.name(), z.name());
            checks.push(
                Check::new(name, ratio(r.value.abs(), r.error_estimate), tol).with_detail(
                    &Detail {
                        f_omega: r.value,
                        error_estimate: r.error_estimate,
                    },
                ),
            );
        }
    }
    if checks.is_empty() {
        return Err(CliError::Usage(format!(
            "no non-commuting pair of linear fields among `{}` on `{}`",
            cfg.field,
            m.name()
        )));
    }
    Ok(checks)
}

fn prop41(cfg: &RunConfig, tol: f64) -> Result<Vec<Check>, CliError> {
    let m = &cfg.manifold;
    let atlas = cfg.atlas();
    let mut checks = Vec::new();
    for f in m.select_fields(&cfg.field)? {
        let r = compute_report(&m.chart, f.as_ref(), &atlas, FIELD_THRESHOLD)?;
        let p = &r.pontryagin_invariant;
        let combined = r.f_omega_error + p.error_estimate;
        #[derive(Serialize)]
        struct Detail {
            f_omega: f64,
            im_pontryagin: f64,
            combined_error: f64,
        }
        let detail = Detail {
            f_omega: r.f_omega,
            im_pontryagin: p.value.im,
            combined_error: combined,
        };
        checks.push(
            Check::new(
                f.name(),
                ratio((r.f_omega - p.value.im).abs(), combined),
                tol,
            )
            .with_detail(&detail),
        );
    }
    Ok(checks)
}

/// Runs `suite`; returns whether every check passed.
pub fn verify(cfg: &RunConfig, suite: Suite) -> Result<bool, CliError> {
    let tol = cfg.tol.unwrap_or_else(|| default_tol(suite));
    let checks = match suite {
        Suite::Bianchi => bianchi(cfg, tol)?,
        Suite::MomentProperty => moment_property(cfg, tol)?,
        Suite::ChernIdentity => chern_identity(cfg, tol)?,
        Suite::TraceIdentity => trace(cfg, tol)?,
        Suite::ClassInvariance => class_invariance(cfg, tol)?,
        Suite::Character => character(cfg, tol)?,
        Suite::Prop41 => prop41(cfg, tol)?,
    };
    let passed = checks.iter().all(|c| c.passed);
    let mut summary = String::new();
    for c in &checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        let _ = writeln!(
            summary,
            "{mark}  {}: {:.3e} (bound {:.1e})",
            c.name, c.residual, c.bound
        );
    }
    let _ = writeln!(
        summary,
        "{} on {}: {}",
        suite.name(),
        cfg.manifold.name(),
        if passed { "pass" } else { "FAIL" }
    );
    let report = VerifyReport {
        suite,
        manifold: cfg.manifold.name(),
        jet_order: cfg.jet_order,
        nodes_per_axis: cfg.atlas().nodes_per_axis,
        tolerance: tol,
        passed,
        checks,
    };
    cfg.emit(&report, &summary)?;
    Ok(passed)
}
