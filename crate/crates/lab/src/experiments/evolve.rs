use dgbo_core::evolution::evolve;
use dgbo_core::functionals::Probe;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::output::{Report, Series, Verdict};

/// Plain run: the configured probes (default `I1, I2, I3`) as a series.
/// Warnings are recorded, never judged.
pub fn run_evolve(cfg: &ExperimentConfig) -> LabResult<Report> {
    let profile = cfg
        .data
        .as_ref()
        .ok_or_else(|| LabError::config("evolve needs [data]"))?;
    let u0 = profile.sample(cfg.grid.build()?)?;
    let probes = if cfg.probes.is_empty() {
        vec![Probe::I1, Probe::I2, Probe::I3]
    } else {
        cfg.probes.clone()
    };
    let rec = evolve(&u0, &cfg.params()?, &cfg.solver, &probes)?;
    let mut series = Series::new(rec.times.clone());
    for (p, s) in rec.probes.iter().zip(&rec.series) {
        series.push(p.to_string(), s.clone());
    }
    let verdicts = rec
        .warnings
        .iter()
        .map(|w| {
            Verdict::recorded(format!("warning:{}", w.probe), w.time)
                .with_note(w.warning.to_string())
        })
        .collect();
    Ok(Report {
        series: Some(series),
        verdicts,
        details: json!({ "run": rec.manifest, "steps": rec.steps, "warnings": rec.warnings }),
        attachments: vec![],
    })
}
