//! TOML experiment configuration.
//!
//! ```toml
//! kind = "identities"
//! a = 0.0
//! probes = ["I2", "M1"]
//!
//! [grid]
//! n = 1024
//! length = 100.0
//!
//! [solver]
//! dt = 1e-3
//! t_final = 1.0
//!
//! [data]
//! shape = "gaussian"
//! width = 1.0
//! ```
//!
//! Every table except `grid` is optional. Relative paths are resolved
//! against the directory of the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dgbo_core::evolution::SolverConfig;
use dgbo_core::functionals::Probe;
use dgbo_core::pairs::{make_zero_mean, MatchOptions, MomentConstraints};
use dgbo_core::{make_grid, DispersionParams, Field, Grid};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Evolve,
    Identities,
    Tstar,
    PairMatch,
    DiffDecay,
    SteinSuite,
    ExpansionSuite,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Identities => "identities",
            ExperimentKind::Tstar => "tstar",
            ExperimentKind::PairMatch => "pair-match",
            ExperimentKind::DiffDecay => "diff-decay",
            ExperimentKind::SteinSuite => "stein-suite",
            ExperimentKind::ExpansionSuite => "expansion-suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub length: f64,
}

impl GridSpec {
    pub fn build(&self) -> LabResult<Arc<Grid>> {
        Ok(make_grid(self.n, self.length)?)
    }

    /// Twice the nodes on twice the box: same spacing, half the `xi` spacing.
    pub fn doubled(&self) -> GridSpec {
        GridSpec {
            n: 2 * self.n,
            length: 2.0 * self.length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `A exp(-s^2)`, `s = (x - shift) / width`.
    Gaussian,
    /// `A s exp(-s^2)`.
    OddGaussian,
    /// `A sech^2(s)`.
    Sech2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    pub shape: Shape,
    pub amplitude: f64,
    pub width: f64,
    pub shift: f64,
    /// Remove the mass with a Gaussian.
    pub zero_mean: bool,
    /// Also remove the first moment with `x exp(-x^2)`.
    pub zero_first_moment: bool,
}

impl Default for Profile {
    fn default() -> Self {
        Profile {
            shape: Shape::Gaussian,
            amplitude: 1.0,
            width: 1.0,
            shift: 0.0,
            zero_mean: false,
            zero_first_moment: false,
        }
    }
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.shift) / self.width;
        self.amplitude
            * match self.shape {
                Shape::Gaussian => (-s * s).exp(),
                Shape::OddGaussian => s * (-s * s).exp(),
                Shape::Sech2 => 1.0 / s.cosh().powi(2),
            }
    }

    pub fn validate(&self) -> LabResult<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(LabError::config(format!(
                "profile width must be positive, got {}",
                self.width
            )));
        }
        if !self.amplitude.is_finite() || !self.shift.is_finite() {
            return Err(LabError::config(
                "profile amplitude and shift must be finite",
            ));
        }
        if self.zero_first_moment && !self.zero_mean {
            return Err(LabError::config("zero_first_moment requires zero_mean"));
        }
        Ok(())
    }

    pub fn sample(&self, grid: Arc<Grid>) -> LabResult<Field> {
        let f = Field::from_fn(grid, |x| self.eval(x))?;
        Ok(if self.zero_mean {
            make_zero_mean(&f, self.zero_first_moment)?
        } else {
            f
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Equal L2 norm, mass and first moment.
    Dgbo,
    /// Adds second moment, `int x u^2` and `I3`.
    Bo,
}

impl Preset {
    pub fn constraints(self) -> MomentConstraints {
        match self {
            Preset::Dgbo => MomentConstraints::dgbo(),
            Preset::Bo => MomentConstraints::bo(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairSpec {
    pub preset: Preset,
    pub basis_size: usize,
    pub basis_width: f64,
    pub delta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub restarts: usize,
    /// A `certificate.json` written by `pair-match`; replaces the solve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<PathBuf>,
}

impl Default for PairSpec {
    fn default() -> Self {
        let m = MatchOptions::default();
        PairSpec {
            preset: Preset::Dgbo,
            basis_size: 5,
            basis_width: 1.0,
            delta: m.delta,
            tol: m.tol,
            max_iter: m.max_iter,
            seed: m.seed,
            restarts: m.restarts,
            certificate: None,
        }
    }
}

impl PairSpec {
    pub fn options(&self) -> MatchOptions {
        MatchOptions {
            delta: self.delta,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            restarts: self.restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TstarSpec {
    /// Integrate to `extend * |t*|`.
    pub extend: f64,
    pub law_tolerance: f64,
    /// Crossing tolerance in units of the time step.
    pub crossing_steps: f64,
}

impl Default for TstarSpec {
    fn default() -> Self {
        TstarSpec {
            extend: 1.5,
            law_tolerance: 1e-6,
            crossing_steps: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffDecaySpec {
    pub moment_tolerance: f64,
    /// Time of the refinement study; unset skips it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement_time: Option<f64>,
    pub weight_change_max: f64,
    pub rho_change_min: f64,
}

impl Default for DiffDecaySpec {
    fn default() -> Self {
        DiffDecaySpec {
            moment_tolerance: 1e-8,
            refinement_time: None,
            weight_change_max: 0.05,
            rho_change_min: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSpec {
    pub b: f64,
    pub times: Vec<f64>,
    pub points: Vec<f64>,
}

impl Default for PhaseSpec {
    fn default() -> Self {
        PhaseSpec {
            b: 0.5,
            times: vec![],
            points: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteinSuiteSpec {
    pub alphas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub signed: bool,
    pub slope_tolerance: f64,
    pub phase: PhaseSpec,
}

impl Default for SteinSuiteSpec {
    fn default() -> Self {
        SteinSuiteSpec {
            alphas: vec![],
            thetas: vec![],
            signed: false,
            slope_tolerance: 0.05,
            phase: PhaseSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSuiteSpec {
    pub orders: Vec<usize>,
    pub times: Vec<f64>,
    /// Dispersion exponents; empty means the top-level `a`.
    pub exponents: Vec<f64>,
    pub tolerance: f64,
    /// Tolerance for the fifth derivative.
    pub tolerance_top: f64,
}

impl Default for ExpansionSuiteSpec {
    fn default() -> Self {
        ExpansionSuiteSpec {
            orders: vec![],
            times: vec![],
            exponents: vec![],
            tolerance: 1e-6,
            tolerance_top: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub grid: GridSpec,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Profile>,
    /// Second datum of an unconstrained pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<Profile>,
    /// Moment-matched pair built on `data`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairSpec>,
    #[serde(default)]
    pub probes: Vec<Probe>,
    #[serde(default)]
    pub tstar: TstarSpec,
    #[serde(default)]
    pub diff_decay: DiffDecaySpec,
    #[serde(default)]
    pub stein: SteinSuiteSpec,
    #[serde(default)]
    pub expansion: ExpansionSuiteSpec,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, grid: GridSpec) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            grid,
            a: 0.0,
            solver: SolverConfig::default(),
            data: None,
            partner: None,
            pair: None,
            probes: vec![],
            tstar: TstarSpec::default(),
            diff_decay: DiffDecaySpec::default(),
            stein: SteinSuiteSpec::default(),
            expansion: ExpansionSuiteSpec::default(),
            output: None,
        }
    }

    pub fn parse(text: &str) -> LabResult<ExperimentConfig> {
        toml::from_str(text).map_err(|e| LabError::config(e.to_string()))
    }

    pub fn to_toml(&self) -> LabResult<String> {
        toml::to_string(self).map_err(|e| LabError::Encode(e.to_string()))
    }

    /// Reads, resolves relative paths and validates.
    pub fn load(path: &Path) -> LabResult<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let mut cfg = ExperimentConfig::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if let Some(pair) = cfg.pair.as_mut() {
            if let Some(c) = pair.certificate.as_mut() {
                if c.is_relative() {
                    *c = base.join(&*c);
                }
            }
        }
        if let Some(out) = cfg.output.as_mut() {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> LabResult<()> {
        self.grid.build()?;
        self.params()?;
        self.solver.validate()?;
        for p in [&self.data, &self.partner].into_iter().flatten() {
            p.validate()?;
        }
        if let Some(pair) = &self.pair {
            if pair.basis_size == 0 || !(pair.basis_width > 0.0) {
                return Err(LabError::config(
                    "pair basis needs a positive size and width",
                ));
            }
            if let Some(c) = &pair.certificate {
                if !c.is_file() {
                    return Err(LabError::config(format!(
                        "certificate {} does not exist",
                        c.display()
                    )));
                }
            }
        }
        if self.partner.is_some() && self.pair.is_some() {
            return Err(LabError::config(
                "`partner` and `pair` are mutually exclusive",
            ));
        }
        let needs_data = !matches!(self.kind, ExperimentKind::SteinSuite)
            && !(self.kind == ExperimentKind::DiffDecay
                && self.pair.as_ref().is_some_and(|p| p.certificate.is_some()));
        if needs_data && self.data.is_none() {
            return Err(LabError::config(format!(
                "`{}` needs a [data] table",
                self.kind.name()
            )));
        }
        if self.kind == ExperimentKind::DiffDecay && self.pair.is_none() {
            return Err(LabError::config("`diff-decay` needs a [pair] table"));
        }
        if self.tstar.extend <= 0.0 {
            return Err(LabError::config("tstar.extend must be positive"));
        }
        if let (ExperimentKind::DiffDecay, Some(t)) = (self.kind, self.diff_decay.refinement_time) {
            if !(t > 0.0 && t <= self.solver.t_final) {
                return Err(LabError::config(
                    "diff_decay.refinement_time must lie in (0, t_final]",
                ));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> LabResult<DispersionParams> {
        Ok(DispersionParams::new(self.a)?)
    }

    /// The configured probes followed by `required` ones not yet listed.
    pub fn probes_with(&self, required: &[Probe]) -> Vec<Probe> {
        let mut out = self.probes.clone();
        for p in required {
            if !out.contains(p) {
                out.push(*p);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            ExperimentKind::Identities,
            GridSpec {
                n: 256,
                length: 40.0,
            },
        );
        c.a = 0.5;
        c.data = Some(Profile::default());
        c.partner = Some(Profile {
            amplitude: 0.9,
            shift: 0.3,
            ..Profile::default()
        });
        c.probes = vec![Probe::I2, Probe::Zr(2.0), Probe::ZrN(1.0, 5.0)];
        c.expansion.orders = vec![1, 2];
        c.stein.alphas = vec![0.3];
        c.solver.t_final = 0.25;
        c
    }

    #[test]
    fn toml_round_trip() {
        let c = full();
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn json_round_trip() {
        let c = full();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), c);
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c =
            ExperimentConfig::parse("kind = \"evolve\"\n[grid]\nn = 64\nlength = 20.0\n[data]\n")
                .unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.data, Some(Profile::default()));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_kinds() {
        assert!(ExperimentConfig::parse(
            "kind = \"evolve\"\ncolour = 1\n[grid]\nn = 64\nlength = 20.0\n"
        )
        .is_err());
        assert!(
            ExperimentConfig::parse("kind = \"simulate\"\n[grid]\nn = 64\nlength = 20.0\n")
                .is_err()
        );
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = full();
        c.a = 1.5;
        assert!(c.validate().is_err());
        let mut c = full();
        c.grid.n = 15;
        assert!(c.validate().is_err());
        let mut c = full();
        c.data = None;
        assert!(c.validate().is_err());
        let mut c = full();
        c.partner = None;
        c.pair = Some(PairSpec {
            certificate: Some("/nonexistent/certificate.json".into()),
            ..PairSpec::default()
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn profiles_sample_as_documented() {
        let g = GridSpec {
            n: 512,
            length: 40.0,
        }
        .build()
        .unwrap();
        let p = Profile {
            shape: Shape::OddGaussian,
            zero_mean: true,
            ..Profile::default()
        };
        let f = p.sample(g).unwrap();
        let x = f.grid().nodes()[300];
        assert!((f.samples()[300] - x * (-x * x).exp()).abs() < 1e-12);
    }

    #[test]
    fn probes_are_merged_in_order() {
        let c = full();
        let p = c.probes_with(&[Probe::M1, Probe::I2]);
        assert_eq!(
            p,
            vec![Probe::I2, Probe::Zr(2.0), Probe::ZrN(1.0, 5.0), Probe::M1]
        );
    }
}
