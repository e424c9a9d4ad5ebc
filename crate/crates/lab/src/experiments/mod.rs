//! One module per subcommand. Each experiment turns a validated config into
//! a [`Report`].

mod decay;
mod evolve;
mod identities;
mod pair;
mod suites;
mod tstar;

use dgbo_core::evolution::RunRecord;
use dgbo_core::warning::WarningKind;
use dgbo_core::Field;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::LabResult;
use crate::output::Report;

pub use decay::run_diff_decay;
pub use evolve::run_evolve;
pub use identities::run_identities;
pub use pair::{build_pair, run_pair_match, PairData, PairFile};
pub use suites::{run_expansion_suite, run_stein_suite};
pub use tstar::{run_tstar, tstar_of};

pub fn run(cfg: &ExperimentConfig) -> LabResult<Report> {
    match cfg.kind {
        ExperimentKind::Evolve => run_evolve(cfg),
        ExperimentKind::Identities => run_identities(cfg),
        ExperimentKind::Tstar => run_tstar(cfg),
        ExperimentKind::PairMatch => run_pair_match(cfg),
        ExperimentKind::DiffDecay => run_diff_decay(cfg),
        ExperimentKind::SteinSuite => run_stein_suite(cfg),
        ExperimentKind::ExpansionSuite => run_expansion_suite(cfg),
    }
}

/// `|Delta^4 v^(0)| / dxi^4`, the centered fourth difference of the
/// transform at the origin.
pub fn regularity_indicator(v: &Field) -> f64 {
    let g = v.grid();
    let s = v.spectrum();
    let at = |m: i64| s[g.index_of_mode(m)];
    let diff = at(-2) - at(-1) * 4.0 + at(0) * 6.0 - at(1) * 4.0 + at(2);
    diff.norm() / g.xi_spacing().powi(4)
}

fn boundary_warned(rec: &RunRecord) -> bool {
    rec.warnings
        .iter()
        .any(|w| w.warning.kind == WarningKind::BoundaryMass)
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// `|measured - expected| / |expected|`, or the plain difference when the
/// expected value is below `floor`.
fn relative_or_absolute(measured: f64, expected: f64, floor: f64) -> f64 {
    let d = (measured - expected).abs();
    if expected.abs() > floor {
        d / expected.abs()
    } else {
        d
    }
}
