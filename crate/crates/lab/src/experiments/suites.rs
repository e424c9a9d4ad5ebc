use dgbo_core::stein::{
    dstein_asymptotics, expansion_check, pointwise_phase_bound, DsteinReport, ExpansionReport,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::output::{Report, Verdict};

fn dstein_verdicts(r: &DsteinReport, tol: f64) -> Vec<Verdict> {
    let tag = format!("alpha={},theta={}", r.alpha, r.theta);
    let mut out = Vec::new();
    if let Some(s) = r.small_eta_slope {
        out.push(Verdict::at_most(
            format!("small_eta_slope[{tag}]"),
            (s - (r.alpha - r.theta)).abs(),
            tol,
        ));
    }
    out.push(Verdict::at_most(
        format!("tail_slope[{tag}]"),
        (r.tail_slope + 0.5 + r.theta).abs(),
        tol,
    ));
    // finite exactly below theta = alpha + 1/2: the increment exponent must
    // be positive there and non-positive above
    let e = r.ladder.increment_exponent;
    let name = format!("l2_ladder[{tag}]");
    out.push(if r.theta < r.alpha + 0.5 {
        Verdict::at_least(name, e, 0.0).with_note("expect finite")
    } else {
        Verdict::at_most(name, e, 0.0).with_note("expect divergent")
    });
    out
}

/// Slope table of `D^theta(|xi|^alpha chi)` over the configured
/// `(alpha, theta)` grid, and the phase bound when times and points are
/// given. An empty grid yields an empty report.
pub fn run_stein_suite(cfg: &ExperimentConfig) -> LabResult<Report> {
    let s = &cfg.stein;
    let jobs: Vec<(f64, f64)> = s
        .alphas
        .iter()
        .flat_map(|&a| s.thetas.iter().map(move |&t| (a, t)))
        .collect();
    let reports: Vec<DsteinReport> = jobs
        .par_iter()
        .map(|&(a, t)| dstein_asymptotics(a, t, s.signed))
        .collect::<Result<_, _>>()?;
    let mut verdicts: Vec<Verdict> = reports
        .iter()
        .flat_map(|r| dstein_verdicts(r, s.slope_tolerance))
        .collect();
    let phase = if s.phase.times.is_empty() || s.phase.points.is_empty() {
        None
    } else {
        let r = pointwise_phase_bound(&s.phase.times, &s.phase.points, cfg.a, s.phase.b)?;
        verdicts.push(Verdict::recorded("phase_bound_constant", r.constant));
        Some(r)
    };
    Ok(Report {
        series: None,
        verdicts,
        details: json!({ "dstein": reports, "phase": phase }),
        attachments: vec![],
    })
}

/// Residuals of the `xi`-derivative expansions of `psi f^` over
/// orders x times x exponents, on the configured datum.
pub fn run_expansion_suite(cfg: &ExperimentConfig) -> LabResult<Report> {
    let e = &cfg.expansion;
    let profile = cfg
        .data
        .as_ref()
        .ok_or_else(|| LabError::config("expansion-suite needs [data]"))?;
    let f = profile.sample(cfg.grid.build()?)?;
    let exponents = if e.exponents.is_empty() {
        vec![cfg.a]
    } else {
        e.exponents.clone()
    };
    let mut jobs = Vec::new();
    for &a in &exponents {
        for &t in &e.times {
            for &k in &e.orders {
                jobs.push((k, t, a));
            }
        }
    }
    let reports: Vec<ExpansionReport> = jobs
        .iter()
        .map(|&(k, t, a)| expansion_check(&f, t, a, k))
        .collect::<Result<_, _>>()?;
    let verdicts = reports
        .iter()
        .map(|r| {
            let tol = if r.k >= 5 {
                e.tolerance_top
            } else {
                e.tolerance
            };
            Verdict::at_most(
                format!("expansion[k={},t={},a={}]", r.k, r.t, r.a),
                r.residual,
                tol,
            )
        })
        .collect();
    Ok(Report {
        series: None,
        verdicts,
        details: json!({ "expansion": reports }),
        attachments: vec![],
    })
}
