use std::sync::mpsc;

use dgbo_core::evolution::{evolve_observed, RunRecord, SolverConfig};
use dgbo_core::functionals::{bracket_norm, Probe, WeightSpec};
use dgbo_core::{DispersionParams, Field};
use serde_json::json;

use super::{build_pair, max_abs, regularity_indicator};
use crate::config::{ExperimentConfig, GridSpec, Preset};
use crate::error::{LabError, LabResult};
use crate::output::{Report, Series, Verdict};

/// Per-record diagnostics of `w = u1 - u2`.
#[derive(Debug, Clone, Default)]
struct Diagnostics {
    times: Vec<f64>,
    weighted4: Vec<f64>,
    weighted5: Vec<f64>,
    rho_w: Vec<f64>,
    rho_u1: Vec<f64>,
}

impl Diagnostics {
    /// Index of the record closest to `t`.
    fn nearest(&self, t: f64) -> usize {
        let gap = |i: usize| (self.times[i] - t).abs();
        (0..self.times.len())
            .min_by(|&i, &j| gap(i).total_cmp(&gap(j)))
            .expect("at least one record")
    }
}

/// Runs `u1` here and `u2` on a scoped thread; the second run hands each
/// recorded state over a rendezvous channel so `w` is formed without
/// storing either history.
fn co_evolve(
    u1: &Field,
    u2: &Field,
    p: &DispersionParams,
    solver: &SolverConfig,
    probes: &[Probe],
    bo: bool,
) -> LabResult<(RunRecord, RunRecord, Diagnostics)> {
    let mut diag = Diagnostics::default();
    let (r1, r2) = std::thread::scope(|s| {
        let (tx, rx) = mpsc::sync_channel::<(f64, Field)>(0);
        let second = s.spawn(move || {
            evolve_observed(u2, p, solver, probes, |t, v| {
                // a closed receiver means the first run failed; finish quietly
                let _ = tx.send((t, v.clone()));
            })
        });
        let first = evolve_observed(u1, p, solver, probes, |t, v| {
            let Ok((t2, v2)) = rx.recv() else { return };
            debug_assert_eq!(t, t2);
            let w = v.sub(&v2).expect("same grid");
            diag.times.push(t);
            let norm = |r: f64| bracket_norm(&w, &WeightSpec::new(r)).map_or(f64::NAN, |m| m.value);
            diag.weighted4.push(norm(4.0));
            if bo {
                diag.weighted5.push(norm(5.0));
            }
            diag.rho_w.push(regularity_indicator(&w));
            diag.rho_u1.push(regularity_indicator(v));
        });
        drop(rx);
        (first, second.join().expect("second run panicked"))
    });
    Ok((r1?, r2?, diag))
}

fn relative_change(coarse: f64, fine: f64) -> f64 {
    (fine - coarse).abs() / coarse.abs()
}

/// Co-evolves a moment-matched pair and checks that `w^(0, t)` and
/// `d/dxi w^(0, t)` stay at zero. Records `||<x>^4 w||` (and `r = 5` for
/// the six-constraint preset) with the low-frequency indicator `rho_4`
/// of `w` and `u1`, and contrasts both under `n -> 2n, L -> 2L`.
pub fn run_diff_decay(cfg: &ExperimentConfig) -> LabResult<Report> {
    let pair = build_pair(cfg)?;
    let p = cfg.params()?;
    let bo = pair.file.preset == Preset::Bo;
    let probes = cfg.probes_with(&[Probe::I1, Probe::M1]);
    let (r1, r2, diag) = co_evolve(&pair.phi, &pair.varphi, &p, &cfg.solver, &probes, bo)?;
    if diag.times.len() != r1.times.len() {
        return Err(LabError::Encode(
            "paired runs recorded different times".into(),
        ));
    }

    let diff = |name: &str| -> Vec<f64> {
        let a = r1.series(name).expect("probe recorded");
        let b = r2.series(name).expect("probe recorded");
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    };
    // w^(0) = int w, and d/dxi w^(0) = -i int x w
    let z0 = diff("I1");
    let dz0 = diff("M1");
    let tol = cfg.diff_decay.moment_tolerance;
    let mut verdicts = vec![
        Verdict::at_most("z_hat_0", max_abs(z0.iter().copied()), tol),
        Verdict::at_most("dxi_z_hat_0", max_abs(dz0.iter().copied()), tol),
    ];

    let mut series = Series::new(r1.times.clone());
    for (pr, s) in r1.probes.iter().zip(&r1.series) {
        series.push(pr.to_string(), s.clone());
    }
    series.push("z_hat_0", z0);
    series.push("dxi_z_hat_0_im", dz0.iter().map(|v| -v).collect());
    series.push("weighted4_w", diag.weighted4.clone());
    if bo {
        series.push("weighted5_w", diag.weighted5.clone());
    }
    series.push("rho4_w", diag.rho_w.clone());
    series.push("rho4_u1", diag.rho_u1.clone());

    let mut details = json!({
        "certificate": pair.file,
        "run": r1.manifest,
        "warnings": [r1.warnings, r2.warnings],
    });

    if let Some(t_ref) = cfg.diff_decay.refinement_time {
        let i = diag.nearest(t_ref);
        let fine_grid: GridSpec = cfg.grid.doubled();
        let (f1, f2) = pair.on(fine_grid)?;
        let mut solver = cfg.solver.clone();
        solver.t_final = diag.times[i];
        let (_, _, fine) = co_evolve(&f1, &f2, &p, &solver, &[], bo)?;
        let j = fine.times.len() - 1;
        let w_change = relative_change(diag.weighted4[i], fine.weighted4[j]);
        let u_change = relative_change(diag.rho_u1[i], fine.rho_u1[j]);
        let rw_change = relative_change(diag.rho_w[i], fine.rho_w[j]);
        verdicts.push(Verdict::at_most(
            "weighted4_w_refinement",
            w_change,
            cfg.diff_decay.weight_change_max,
        ));
        verdicts.push(Verdict::at_least(
            "rho4_u1_refinement",
            u_change,
            cfg.diff_decay.rho_change_min,
        ));
        verdicts.push(Verdict::recorded("rho4_w_refinement", rw_change));
        details["refinement"] = json!({
            "t": diag.times[i],
            "coarse": cfg.grid,
            "fine": fine_grid,
            "weighted4_w": [diag.weighted4[i], fine.weighted4[j]],
            "rho4_u1": [diag.rho_u1[i], fine.rho_u1[j]],
            "rho4_w": [diag.rho_w[i], fine.rho_w[j]],
        });
    }
    Ok(Report {
        series: Some(series),
        verdicts,
        details,
        attachments: vec![],
    })
}
