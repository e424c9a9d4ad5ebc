//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero
//! exit if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use dgbo_core::evolution::{evolve, picard_oracle, Integrator, SolverConfig};
use dgbo_core::DispersionParams;
use dgbo_lab::config::{PairSpec, Preset};
use dgbo_lab::output::Status;
use dgbo_lab::{run, ExperimentConfig, ExperimentKind, GridSpec, Profile, Report, Shape};
use rayon::prelude::*;

const DESK: GridSpec = GridSpec {
    n: 1024,
    length: 100.0,
};
/// Box for the moment laws and the run through t*: large enough that
/// radiation stays inside over the horizon.
const WIDE: GridSpec = GridSpec {
    n: 4096,
    length: 400.0,
};
/// Box for the paired run to t = 2 at a = 0.5.
const WIDER: GridSpec = GridSpec {
    n: 8192,
    length: 800.0,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn config(kind: ExperimentKind, grid: GridSpec, a: f64, t_final: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind, grid);
    c.a = a;
    c.solver.t_final = t_final;
    c.data = Some(Profile::default());
    c
}

fn must_run(cfg: &ExperimentConfig) -> Report {
    run(cfg).unwrap_or_else(|e| panic!("{} failed: {e}", cfg.kind.name()))
}

/// Pass iff every named verdict exists and passed outright.
fn require(reports: &[(String, Report)], names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (tag, r) in reports {
        for n in names {
            match r.verdict(n) {
                Some(v) => {
                    passed &= v.status == Status::Pass;
                    parts.push(format!(
                        "{tag}{n}={:.2e}{}",
                        v.value,
                        if v.status == Status::Pass { "" } else { "(!)" }
                    ));
                }
                None => {
                    passed = false;
                    parts.push(format!("{tag}{n}=missing"));
                }
            }
        }
    }
    Outcome {
        passed,
        detail: parts.join(" "),
    }
}

fn identities(grid: GridSpec, a: f64, width: f64) -> (String, Report) {
    let mut c = config(ExperimentKind::Identities, grid, a, 1.0);
    c.data = Some(Profile {
        width,
        ..Profile::default()
    });
    (format!("a={a}:"), must_run(&c))
}

fn criterion_1() -> Outcome {
    let r: Vec<_> = [0.0, 0.5, 1.0]
        .into_par_iter()
        .map(|a| identities(DESK, a, 1.0))
        .collect();
    require(&r, &["I2_conservation"])
}

fn criterion_2() -> Outcome {
    require(&[identities(DESK, 0.0, 1.0)], &["I3_conservation"])
}

fn criterion_3() -> Outcome {
    let r: Vec<_> = [0.0, 0.5, 1.0]
        .into_par_iter()
        .map(|a| identities(WIDE, a, 2.0))
        .collect();
    require(&r, &["first_moment_law"])
}

fn criterion_4() -> Outcome {
    require(&[identities(DESK, 0.0, 1.0)], &["Ic", "IIc"])
}

fn criterion_5() -> Outcome {
    let mut c = config(ExperimentKind::Identities, DESK, 0.0, 1.0);
    c.partner = Some(Profile {
        amplitude: 0.9,
        width: 1.2f64.sqrt(),
        shift: 0.3,
        ..Profile::default()
    });
    require(
        &[(String::new(), must_run(&c))],
        &["x2w_quadratic", "x2w_linear"],
    )
}

fn criterion_6() -> Outcome {
    let mut c = config(ExperimentKind::Tstar, WIDE, 0.0, 0.0);
    c.data = Some(Profile {
        shape: Shape::OddGaussian,
        ..Profile::default()
    });
    let r = must_run(&c);
    let mut o = require(
        &[(String::new(), r.clone())],
        &[
            "tstar_closed_form",
            "G_zero_at_tstar",
            "M1_zero_at_half_tstar",
        ],
    );
    o.detail = format!(
        "t*={:.10} {}",
        r.details["tstar"].as_f64().unwrap_or(f64::NAN),
        o.detail
    );
    o
}

fn criterion_7() -> Outcome {
    let mut c = config(ExperimentKind::ExpansionSuite, DESK, 0.5, 1.0);
    c.data = Some(Profile {
        shift: 0.3,
        zero_mean: true,
        zero_first_moment: true,
        ..Profile::default()
    });
    c.expansion.orders = (1..=5).collect();
    c.expansion.times = vec![0.0, 1.0];
    c.expansion.exponents = vec![0.25, 0.5, 0.75];
    let r = must_run(&c);
    let worst = |top: bool| {
        r.verdicts
            .iter()
            .filter(|v| v.name.starts_with("expansion[k=5") == top)
            .map(|v| v.value)
            .fold(0.0, f64::max)
    };
    Outcome {
        passed: r.verdicts.len() == 30 && r.passed(),
        detail: format!(
            "checks={} worst(k<=4)={:.2e} worst(k=5)={:.2e}",
            r.verdicts.len(),
            worst(false),
            worst(true)
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut c = config(ExperimentKind::SteinSuite, DESK, 0.0, 1.0);
    c.stein.alphas = vec![0.3];
    c.stein.thetas = vec![0.25, 0.7, 0.75, 0.85];
    let r = must_run(&c);
    let names = [
        "small_eta_slope[alpha=0.3,theta=0.7]",
        "tail_slope[alpha=0.3,theta=0.25]",
        "tail_slope[alpha=0.3,theta=0.7]",
        "l2_ladder[alpha=0.3,theta=0.75]",
        "l2_ladder[alpha=0.3,theta=0.85]",
    ];
    let mut o = require(&[(String::new(), r.clone())], &names);
    o.passed &= r.passed();
    o
}

fn pair_config(preset: Preset, m: usize, delta: f64) -> ExperimentConfig {
    let mut c = config(ExperimentKind::PairMatch, DESK, 0.0, 1.0);
    c.pair = Some(PairSpec {
        preset,
        basis_size: m,
        delta,
        ..PairSpec::default()
    });
    c
}

fn criterion_9() -> Outcome {
    let runs = [
        ("dgbo:", pair_config(Preset::Dgbo, 5, 0.1)),
        ("bo:", pair_config(Preset::Bo, 8, 0.05)),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (tag, c) in runs {
        let r = must_run(&c);
        let cert = r
            .verdicts
            .iter()
            .filter(|v| v.name.starts_with("certificate:"));
        let indep = r
            .verdicts
            .iter()
            .filter(|v| v.name.starts_with("independent:"));
        let worst = |it: &mut dyn Iterator<Item = &dgbo_lab::Verdict>| {
            it.map(|v| v.value).fold(0.0, f64::max)
        };
        let count = r
            .verdicts
            .iter()
            .filter(|v| v.name.starts_with("certificate:"))
            .count();
        passed &= r.passed() && count == c.pair.as_ref().unwrap().preset.constraints().count();
        parts.push(format!(
            "{tag} constraints={count} residual={:.2e} distance_error={:.2e} independent={:.2e}",
            worst(&mut cert.into_iter()),
            r.verdict("distance").map_or(f64::NAN, |v| v.value),
            worst(&mut indep.into_iter()),
        ));
    }
    Outcome {
        passed,
        detail: parts.join(" "),
    }
}

fn decay_report() -> Report {
    let mut c = config(ExperimentKind::DiffDecay, WIDER, 0.5, 2.0);
    c.solver.record_every = 10;
    c.pair = Some(PairSpec::default());
    c.diff_decay.refinement_time = Some(1.0);
    must_run(&c)
}

fn criterion_10(r: &Report) -> Outcome {
    require(&[(String::new(), r.clone())], &["z_hat_0", "dxi_z_hat_0"])
}

/// `if_rk4` against both forms of the Picard oracle: the fixed point on
/// all of `[0, t]` and the `picard_oracle` integrator stepping by `dt`.
fn criterion_11() -> Outcome {
    let grid = DESK.build().unwrap();
    let u0 = Profile::default().sample(grid).unwrap();
    let results: Vec<(f64, f64, f64)> = [0.0, 0.5, 1.0]
        .into_par_iter()
        .map(|a| {
            let p = DispersionParams::new(a).unwrap();
            let cfg = SolverConfig {
                t_final: 0.05,
                ..SolverConfig::default()
            };
            let stepped = SolverConfig {
                integrator: Integrator::PicardOracle,
                ..cfg.clone()
            };
            let rk = evolve(&u0, &p, &cfg, &[]).unwrap().final_field;
            let whole = picard_oracle(&u0, &p, &cfg, 0.05).unwrap().field;
            let steps = evolve(&u0, &p, &stepped, &[]).unwrap().final_field;
            (
                a,
                rk.sub(&whole).unwrap().l2_norm(),
                rk.sub(&steps).unwrap().l2_norm(),
            )
        })
        .collect();
    Outcome {
        passed: results.iter().all(|(_, d1, d2)| *d1 <= 1e-7 && *d2 <= 1e-7),
        detail: results
            .iter()
            .map(|(a, d1, d2)| format!("a={a}:oracle={d1:.2e},stepped={d2:.2e}"))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

fn criterion_12(r: &Report) -> Outcome {
    let refinement = &r.details["refinement"];
    let pick = |k: &str| -> Vec<f64> {
        refinement[k]
            .as_array()
            .map(|v| v.iter().filter_map(|x| x.as_f64()).collect())
            .unwrap_or_default()
    };
    let (w, u, rw) = (pick("weighted4_w"), pick("rho4_u1"), pick("rho4_w"));
    let recorded = [&w, &u, &rw]
        .iter()
        .all(|v| v.len() == 2 && v.iter().all(|x| x.is_finite()));
    let change = |v: &[f64]| {
        if v.len() == 2 {
            (v[1] - v[0]).abs() / v[0].abs()
        } else {
            f64::NAN
        }
    };
    Outcome {
        passed: recorded,
        detail: format!(
            "recorded only: ||<x>^4 w|| change={:.2e} rho4(u1) change={:.2e} rho4(w) change={:.2e} (n,L)->(2n,2L)",
            change(&w),
            change(&u),
            change(&rw)
        ),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    type Job = fn() -> Outcome;
    let jobs: Vec<(usize, Job)> = vec![
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (11, criterion_11),
    ];
    let mut outcomes: Vec<(usize, Outcome)> = jobs.into_par_iter().map(|(n, f)| (n, f())).collect();
    let decay = decay_report();
    outcomes.push((10, criterion_10(&decay)));
    outcomes.push((12, criterion_12(&decay)));
    outcomes.sort_by_key(|(n, _)| *n);

    let mut all = true;
    for (n, o) in &outcomes {
        all &= o.passed;
        println!(
            "criterion {n:>2}: {} {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance finished in {:.1} s",
        started.elapsed().as_secs_f64()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
