use dgbo_core::evolution::evolve_observed;
use dgbo_core::functionals::{functional_i, moment, Conserved, Probe, WeightSpec};
use dgbo_core::pairs::make_zero_mean;
use dgbo_core::Field;
use serde_json::json;

use super::{max_abs, regularity_indicator};
use crate::config::{ExperimentConfig, Shape};
use crate::error::{LabError, LabResult};
use crate::output::{Report, Series, Verdict};

/// Below this `|int x phi|` the special time is undefined.
pub const FIRST_MOMENT_FLOOR: f64 = 1e-8;
pub const CLOSED_FORM_TOL: f64 = 1e-6;

/// `t* = -4 int x phi / ||phi||^2`.
pub fn tstar_of(phi: &Field) -> LabResult<f64> {
    let m1 = moment(phi, 1, false, &WeightSpec::default())?.value;
    if m1.abs() < FIRST_MOMENT_FLOOR {
        return Err(LabError::config(format!(
            "t* undefined: |int x phi| = {:.3e} < {FIRST_MOMENT_FLOOR:e}",
            m1.abs()
        )));
    }
    Ok(-4.0 * m1 / phi.l2_norm_sq())
}

/// Value of `probe` for `u(x) = v(-x)` given its value for `v`.
fn reflect(probe: Probe, value: f64) -> f64 {
    match probe {
        Probe::M1 | Probe::XMSq => -value,
        _ => value,
    }
}

/// First `t` after the start where the linear interpolant of `values`
/// changes sign.
fn first_crossing(times: &[f64], values: &[f64]) -> Option<f64> {
    (1..values.len() - 1).find_map(|i| {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 {
            Some(times[i])
        } else if a * b < 0.0 {
            Some(times[i] + (times[i + 1] - times[i]) * a / (a - b))
        } else {
            None
        }
    })
}

/// Cumulative trapezoid integral from the first sample.
fn antiderivative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; times.len()];
    for i in 1..times.len() {
        acc[i] = acc[i - 1] + 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
    }
    acc
}

/// Evolves a mean-zero datum through its special time `t*` and checks the
/// first-moment law, the zero of `G(t) = int_0^t M1` at `t*` and the zero
/// of `M1` at `t*/2`. Negative `t*` runs the reflected datum forward;
/// the `t` column then holds physical (negative) times.
pub fn run_tstar(cfg: &ExperimentConfig) -> LabResult<Report> {
    let profile = cfg
        .data
        .as_ref()
        .ok_or_else(|| LabError::config("tstar needs [data]"))?;
    let phi = make_zero_mean(&profile.sample(cfg.grid.build()?)?, false)?;
    let tstar = tstar_of(&phi)?;
    let sign = tstar.signum();
    let start = if sign < 0.0 {
        phi.reflected()
    } else {
        phi.clone()
    };

    let mut solver = cfg.solver.clone();
    solver.t_final = cfg.tstar.extend * tstar.abs();
    let (_, h) = solver.steps();
    let probes = cfg.probes_with(&[Probe::M1, Probe::I2, Probe::BoundaryMass]);
    let marks: Vec<f64> = [0.5, 1.0, 1.5]
        .into_iter()
        .filter(|m| *m <= cfg.tstar.extend + 1e-12)
        .collect();
    // nearest recorded state to each of |t*|/2, |t*|, 3|t*|/2
    let mut nearest: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NAN); marks.len()];
    let rec = evolve_observed(&start, &cfg.params()?, &solver, &probes, |tau, v| {
        for (slot, m) in nearest.iter_mut().zip(&marks) {
            let gap = (tau - m * tstar.abs()).abs();
            if gap < slot.0 {
                *slot = (gap, regularity_indicator(v));
            }
        }
    })?;

    let times: Vec<f64> = rec.times.iter().map(|tau| sign * tau).collect();
    let mut series = Series::new(times.clone());
    for (p, s) in rec.probes.iter().zip(&rec.series) {
        let vals = if sign < 0.0 {
            s.iter().map(|v| reflect(*p, *v)).collect()
        } else {
            s.clone()
        };
        series.push(p.to_string(), vals);
    }
    let m1 = series.column("M1").expect("M1 recorded").to_vec();
    let norm_sq = functional_i(&phi, Conserved::I2);
    let g = antiderivative(&times, &m1);
    series.push("G", g.clone());

    let mut verdicts = Vec::new();
    if profile.shape == Shape::OddGaussian && !profile.zero_first_moment {
        let exact = -8.0 * 2f64.sqrt() * profile.width / profile.amplitude;
        verdicts.push(Verdict::at_most(
            "tstar_closed_form",
            (tstar - exact).abs(),
            CLOSED_FORM_TOL,
        ));
    }
    let law = max_abs(
        times
            .iter()
            .zip(&m1)
            .map(|(t, m)| m - m1[0] - 0.5 * t * norm_sq),
    ) / (1.0 + m1[0].abs());
    verdicts.push(Verdict::at_most(
        "first_moment_law",
        law,
        cfg.tstar.law_tolerance,
    ));
    let window = cfg.tstar.crossing_steps * h;
    let miss = |c: Option<f64>, target: f64| c.map_or(f64::INFINITY, |c| (c - target).abs());
    let g_cross = first_crossing(&times, &g);
    let m_cross = first_crossing(&times, &m1);
    verdicts.push(Verdict::at_most(
        "G_zero_at_tstar",
        miss(g_cross, tstar),
        window,
    ));
    verdicts.push(Verdict::at_most(
        "M1_zero_at_half_tstar",
        miss(m_cross, 0.5 * tstar),
        window,
    ));
    let indicators: Vec<_> = marks
        .iter()
        .zip(&nearest)
        .map(|(m, (_, rho))| json!({ "t": m * tstar, "rho4": rho }))
        .collect();
    for (m, (_, rho)) in marks.iter().zip(&nearest) {
        verdicts.push(Verdict::recorded(format!("rho4_at_{m}tstar"), *rho));
    }
    Ok(Report {
        series: Some(series),
        verdicts,
        details: json!({
            "tstar": tstar,
            "step": h,
            "G_crossing": g_cross,
            "M1_crossing": m_cross,
            "indicators": indicators,
            "run": rec.manifest,
            "warnings": rec.warnings,
        }),
        attachments: vec![],
    })
}
