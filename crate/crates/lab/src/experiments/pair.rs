use std::path::Path;

use dgbo_core::pairs::{
    independent_residuals, match_pair, Certificate, MomentConstraints, PerturbationFamily,
};
use dgbo_core::Field;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ExperimentConfig, GridSpec, PairSpec, Preset, Profile};
use crate::error::{LabError, LabResult};
use crate::output::{Report, Verdict};

/// Residual ceiling for certificates loaded from disk.
pub const CERTIFICATE_ACCEPT: f64 = 1e-8;
/// Independent Fourier-side recheck tolerance.
pub const INDEPENDENT_TOL: f64 = 1e-12;
pub const DISTANCE_TOL: f64 = 1e-10;

/// Self-contained record of a matched pair: enough to rebuild both data
/// on any grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub grid: GridSpec,
    pub base: Profile,
    pub preset: Preset,
    pub basis_size: usize,
    pub basis_width: f64,
    pub certificate: Certificate,
}

impl PairFile {
    pub fn load(path: &Path) -> LabResult<PairFile> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| LabError::config(format!("{}: {e}", path.display())))
    }

    /// `(phi, varphi)` on `grid`.
    pub fn rebuild(&self, grid: GridSpec) -> LabResult<(Field, Field)> {
        let base = self.base.sample(grid.build()?)?;
        let fam = PerturbationFamily::hermite(base, self.basis_size, self.basis_width)?
            .with_coefficients(self.certificate.coefficients.clone())?;
        Ok((fam.phi(), fam.base))
    }
}

#[derive(Debug, Clone)]
pub struct PairData {
    pub phi: Field,
    pub varphi: Field,
    pub constraints: MomentConstraints,
    pub file: PairFile,
}

impl PairData {
    pub fn on(&self, grid: GridSpec) -> LabResult<(Field, Field)> {
        self.file.rebuild(grid)
    }
}

/// Solves for the configured pair, or loads it from `pair.certificate`
/// after checking its residuals on the configured grid.
pub fn build_pair(cfg: &ExperimentConfig) -> LabResult<PairData> {
    let spec: &PairSpec = cfg
        .pair
        .as_ref()
        .ok_or_else(|| LabError::config("missing [pair] table"))?;
    if let Some(path) = &spec.certificate {
        let file = PairFile::load(path)?;
        let (phi, varphi) = file.rebuild(cfg.grid)?;
        let constraints = file.preset.constraints();
        let worst = independent_residuals(&phi, &varphi, &constraints)?
            .iter()
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max);
        if !(worst <= CERTIFICATE_ACCEPT) {
            return Err(LabError::config(format!(
                "certificate {} has residual {worst:.3e} > {CERTIFICATE_ACCEPT:e} on this grid; refusing to run",
                path.display()
            )));
        }
        return Ok(PairData {
            phi,
            varphi,
            constraints,
            file,
        });
    }
    let profile = cfg
        .data
        .clone()
        .ok_or_else(|| LabError::config("[pair] needs a [data] base profile"))?;
    let base = profile.sample(cfg.grid.build()?)?;
    let fam = PerturbationFamily::hermite(base, spec.basis_size, spec.basis_width)?;
    let constraints = spec.preset.constraints();
    let (phi, varphi, certificate) = match_pair(&fam, &constraints, &spec.options())?;
    Ok(PairData {
        phi,
        varphi,
        constraints,
        file: PairFile {
            grid: cfg.grid,
            base: profile,
            preset: spec.preset,
            basis_size: spec.basis_size,
            basis_width: spec.basis_width,
            certificate,
        },
    })
}

/// Solves the pair and certifies it twice: the solver's own residuals and
/// an independent Fourier-side recomputation.
pub fn run_pair_match(cfg: &ExperimentConfig) -> LabResult<Report> {
    let pair = build_pair(cfg)?;
    let cert = &pair.file.certificate;
    let mut verdicts: Vec<Verdict> = cert
        .residuals
        .iter()
        .map(|r| {
            Verdict::at_most(
                format!("certificate:{}", r.name),
                r.residual.abs(),
                cert.tol,
            )
        })
        .collect();
    verdicts.push(Verdict::at_most(
        "distance",
        (cert.distance - cert.delta).abs(),
        DISTANCE_TOL,
    ));
    let independent = independent_residuals(&pair.phi, &pair.varphi, &pair.constraints)?;
    verdicts.extend(independent.iter().map(|r| {
        Verdict::at_most(
            format!("independent:{}", r.name),
            r.residual.abs(),
            INDEPENDENT_TOL,
        )
    }));
    let file = serde_json::to_value(&pair.file).map_err(|e| LabError::Encode(e.to_string()))?;
    Ok(Report {
        series: None,
        verdicts,
        details: json!({
            "iterations": cert.iterations,
            "history": cert.history,
            "quadratic_rates": cert.quadratic_rates(),
            "independent": independent,
        }),
        attachments: vec![("certificate.json".into(), file)],
    })
}
