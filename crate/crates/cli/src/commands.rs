use std::fmt::Write;

use serde::Serialize;

use futaki_core::invariants::{compute_report, InvariantReport, FIELD_THRESHOLD};

use crate::{CliError, RunConfig};

#[derive(Serialize)]
struct ComputeOutput<'a> {
    manifold: &'a str,
    complex_dim: usize,
    jet_order: usize,
    field_threshold: f64,
    reports: Vec<InvariantReport>,
}

/// `compute`: one invariant report per selected field. `--tol` is the
/// holomorphy residual threshold for accepting a field.
pub fn compute(cfg: &RunConfig) -> Result<(), CliError> {
    let m = &cfg.manifold;
    let fields = m.select_fields(&cfg.field)?;
    let atlas = cfg.atlas();
    let threshold = cfg.tol.unwrap_or(FIELD_THRESHOLD);
    let mut reports = Vec::with_capacity(fields.len());
    for f in &fields {
        reports.push(compute_report(&m.chart, f.as_ref(), &atlas, threshold)?);
    }
    let mut summary = String::new();
    for r in &reports {
        let _ = writeln!(
            summary,
            "{} {}: F_omega = {:.6e} ± {:.1e}  vol = {:.10}  mu0 = {:.10}",
            r.manifold, r.field, r.f_omega, r.f_omega_error, r.vol, r.mu0
        );
        for (k, v) in &r.f_ck {
            let _ = writeln!(
                summary,
                "  F_c{k} = {:.6e} {:+.6e}i ± {:.1e}",
                v.value.re, v.value.im, v.error_estimate
            );
        }
        for (k, v) in &r.f_q {
            let _ = writeln!(
                summary,
                "  F_q[{k}] = {:.6e} {:+.6e}i ± {:.1e}",
                v.value.re, v.value.im, v.error_estimate
            );
        }
    }
    let out = ComputeOutput {
        manifold: m.name(),
        complex_dim: m.chart.complex_dim,
        jet_order: cfg.jet_order,
        field_threshold: threshold,
        reports,
    };
    cfg.emit(&out, &summary)
}
