//! Time integration of `u_t + D^{a+1} u_x + u u_x = 0`.
//!
//! The production scheme is integrating-factor RK4 on the spectrum: the
//! linear part is carried exactly by `exp(-i h omega)`, classical RK4
//! handles `-(1/2) d/dx (u^2)`. The oracle is a Picard iteration on the
//! Duhamel formula in the interaction picture, collocated at the 8
//! Gauss-Legendre nodes of the step.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::functionals::{FlowReference, Probe};
use crate::grid::{Grid, GridDescription};
use crate::quad::legendre8;
use crate::spectral::DispersionParams;
use crate::warning::Warning;

/// Samples above this magnitude abort the run.
pub const BLOW_UP_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    IfRk4,
    PicardOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub dealias_fraction: f64,
    pub integrator: Integrator,
    pub picard_max_iter: usize,
    pub picard_tol: f64,
    pub record_every: usize,
    /// Test hook: integrate the linear part only.
    pub disable_nonlinearity: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            t_final: 1.0,
            dealias_fraction: 2.0 / 3.0,
            integrator: Integrator::IfRk4,
            picard_max_iter: 60,
            picard_tol: 1e-12,
            record_every: 1,
            disable_nonlinearity: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid(
                "t_final",
                format!(
                    "must be >= 0 (evolve reflected data for negative times), got {}",
                    self.t_final
                ),
            ));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(invalid(
                "dealias_fraction",
                format!("must lie in (0, 1], got {}", self.dealias_fraction),
            ));
        }
        if self.picard_max_iter == 0 {
            return Err(invalid("picard_max_iter", "must be positive"));
        }
        if !(self.picard_tol > 0.0) {
            return Err(invalid("picard_tol", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be positive"));
        }
        Ok(())
    }

    /// Number of steps and the step actually used (`<= dt`).
    pub fn steps(&self) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, 0.0);
        }
        let n = ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedWarning {
    pub time: f64,
    pub probe: String,
    pub warning: Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub grid: GridDescription,
    pub dispersion: DispersionParams,
    pub solver: SolverConfig,
    pub probes: Vec<Probe>,
}

/// Diagnostics of one run. Every series has one entry per recorded time.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub probes: Vec<Probe>,
    pub series: Vec<Vec<f64>>,
    /// First occurrence of each (probe, warning kind) pair.
    pub warnings: Vec<RecordedWarning>,
    pub manifest: RunManifest,
    pub final_field: Field,
    pub steps: usize,
}

impl RunRecord {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.probes
            .iter()
            .position(|p| p.to_string() == name)
            .map(|i| self.series[i].as_slice())
    }

    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Pseudo-spectral machinery shared by both integrators.
struct Kernel {
    grid: Arc<Grid>,
    keep: Vec<bool>,
    half_ixi: Vec<Complex64>,
    omega: Vec<f64>,
    nonlinear: bool,
}

impl Kernel {
    fn new(grid: &Arc<Grid>, p: &DispersionParams, cfg: &SolverConfig) -> Kernel {
        let n = grid.n_points();
        let cutoff = cfg.dealias_fraction * (n / 2) as f64;
        let nyq = grid.nyquist_index();
        let keep = (0..n)
            .map(|k| (grid.mode(k).abs() as f64) <= cutoff + 1e-9)
            .collect();
        let half_ixi = grid
            .wavenumbers()
            .iter()
            .enumerate()
            .map(|(k, &xi)| {
                if k == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -0.5 * xi)
                }
            })
            .collect();
        Kernel {
            grid: grid.clone(),
            keep,
            half_ixi,
            omega: p.omega_table(grid),
            nonlinear: !cfg.disable_nonlinearity,
        }
    }

    /// Spectrum of `-(1/2) d/dx (u^2)` and `max |u|` of the dealiased input.
    fn rhs(&self, uh: &[Complex64]) -> (Vec<Complex64>, f64) {
        let zero = Complex64::new(0.0, 0.0);
        if !self.nonlinear {
            return (vec![zero; uh.len()], f64::NAN);
        }
        let masked: Vec<Complex64> = uh
            .iter()
            .zip(&self.keep)
            .map(|(c, &k)| if k { *c } else { zero })
            .collect();
        let u = self.grid.inverse(&masked);
        let mut peak: f64 = 0.0;
        let sq: Vec<Complex64> = u
            .iter()
            .map(|c| {
                let v = c.re;
                peak = if v.is_finite() {
                    peak.max(v.abs())
                } else {
                    f64::INFINITY
                };
                Complex64::new(v * v, 0.0)
            })
            .collect();
        let w = self.grid.forward(&sq);
        let out = w
            .iter()
            .zip(&self.half_ixi)
            .zip(&self.keep)
            .map(|((w, m), &k)| if k { w * m } else { zero })
            .collect();
        (out, peak)
    }

    fn phase(&self, t: f64) -> Vec<Complex64> {
        self.omega
            .iter()
            .map(|w| Complex64::from_polar(1.0, -t * w))
            .collect()
    }

    fn guard(&self, peak: f64, h: f64, time: f64) -> Result<()> {
        if !peak.is_finite() || peak > BLOW_UP_LIMIT {
            return Err(Error::BlowUp {
                time,
                limit: BLOW_UP_LIMIT,
            });
        }
        let number = h.abs() * peak * self.grid.xi_max();
        if number >= 1.0 {
            return Err(Error::Cfl { time, number });
        }
        Ok(())
    }

    fn if_rk4_step(
        &self,
        uh: &[Complex64],
        h: f64,
        e: &[Complex64],
        e2: &[Complex64],
        time: f64,
    ) -> Result<Vec<Complex64>> {
        let n = uh.len();
        let (na, peak) = self.rhs(uh);
        if self.nonlinear {
            self.guard(peak, h, time)?;
        } else {
            return Ok(uh.iter().zip(e).map(|(u, e)| u * e).collect());
        }
        let a: Vec<Complex64> = na.iter().map(|c| c * h).collect();
        let sb: Vec<Complex64> = (0..n).map(|k| e2[k] * (uh[k] + 0.5 * a[k])).collect();
        let b: Vec<Complex64> = self.rhs(&sb).0.iter().map(|c| c * h).collect();
        let sc: Vec<Complex64> = (0..n).map(|k| e2[k] * uh[k] + 0.5 * b[k]).collect();
        let c: Vec<Complex64> = self.rhs(&sc).0.iter().map(|c| c * h).collect();
        let sd: Vec<Complex64> = (0..n).map(|k| e[k] * uh[k] + e2[k] * c[k]).collect();
        let d: Vec<Complex64> = self.rhs(&sd).0.iter().map(|c| c * h).collect();
        Ok((0..n)
            .map(|k| e[k] * uh[k] + (e[k] * a[k] + 2.0 * e2[k] * (b[k] + c[k]) + d[k]) / 6.0)
            .collect())
    }

    fn l2_of_spectrum(&self, s: &[Complex64]) -> f64 {
        (s.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.grid.box_length()).sqrt()
    }

    /// Picard iteration for the Duhamel formula on `[0, h]` from `uh0`,
    /// with the time integral by composite 8-point Gauss-Legendre on
    /// `panels` equal panels. The whole interval is one fixed point: every
    /// sweep updates all nodes from the previous iterate.
    fn picard(
        &self,
        uh0: &[Complex64],
        h: f64,
        panels: usize,
        cfg: &SolverConfig,
        time: f64,
    ) -> Result<PicardSolve> {
        let rule = legendre8();
        let q = rule.len();
        let s = integration_matrix();
        let hp = h / panels as f64;
        let taus: Vec<f64> = (0..panels)
            .flat_map(|p| {
                rule.iter()
                    .map(move |(x, _)| hp * (p as f64 + 0.5 * (1.0 + x)))
            })
            .collect();
        let end_phase = self.phase(h);

        // interaction-picture values U(-tau) u(tau) at every node
        let mut nodes: Vec<Vec<Complex64>> = vec![uh0.to_vec(); taus.len()];
        let mut previous: Option<Vec<Complex64>> = None;
        let mut residuals = Vec::new();
        #[cfg(test)]
        let mut first_sweep = Vec::new();
        for _ in 0..cfg.picard_max_iter {
            let mut g: Vec<Vec<Complex64>> = Vec::with_capacity(taus.len());
            for (node, &tau) in nodes.iter().zip(&taus) {
                let fwd = self.phase(tau);
                let u: Vec<Complex64> = node.iter().zip(&fwd).map(|(v, e)| v * e).collect();
                let (n, peak) = self.rhs(&u);
                if self.nonlinear {
                    self.guard(peak, 0.0, time + tau)?;
                }
                g.push(n.iter().zip(&fwd).map(|(n, e)| n * e.conj()).collect());
            }
            let mut start = uh0.to_vec();
            for p in 0..panels {
                let gp = &g[p * q..(p + 1) * q];
                for i in 0..q {
                    let node = &mut nodes[p * q + i];
                    for (k, slot) in node.iter_mut().enumerate() {
                        let mut acc = start[k];
                        for j in 0..q {
                            acc += 0.5 * hp * s[i][j] * gp[j][k];
                        }
                        *slot = acc;
                    }
                }
                for (k, slot) in start.iter_mut().enumerate() {
                    for j in 0..q {
                        *slot += 0.5 * hp * rule[j].1 * gp[j][k];
                    }
                }
            }
            let end: Vec<Complex64> = start.iter().zip(&end_phase).map(|(a, e)| a * e).collect();
            #[cfg(test)]
            if previous.is_none() {
                first_sweep = end.clone();
            }
            if let Some(prev) = &previous {
                let diff: Vec<Complex64> = end.iter().zip(prev).map(|(a, b)| a - b).collect();
                let residual = self.l2_of_spectrum(&diff);
                residuals.push(residual);
                if residual < cfg.picard_tol {
                    return Ok(PicardSolve {
                        end,
                        iterations: residuals.len() + 1,
                        residuals,
                        #[cfg(test)]
                        first_sweep,
                    });
                }
                let len = residuals.len();
                if len >= 4 && (len - 3..len).all(|i| residuals[i] > residuals[i - 1]) {
                    return Err(Error::PicardDiverged { residuals });
                }
            } else if !self.nonlinear {
                return Ok(PicardSolve {
                    #[cfg(test)]
                    first_sweep: end.clone(),
                    end,
                    iterations: 1,
                    residuals,
                });
            }
            previous = Some(end);
        }
        Err(Error::NoConvergence {
            iterations: cfg.picard_max_iter,
            residual: residuals.last().copied().unwrap_or(f64::NAN),
        })
    }
}

struct PicardSolve {
    end: Vec<Complex64>,
    #[cfg(test)]
    first_sweep: Vec<Complex64>,
    iterations: usize,
    residuals: Vec<f64>,
}

/// `S[q][j] = int_{-1}^{x_q} l_j(x) dx` for the Lagrange basis on the
/// 8 Gauss-Legendre nodes.
fn integration_matrix() -> &'static Vec<Vec<f64>> {
    static S: std::sync::OnceLock<Vec<Vec<f64>>> = std::sync::OnceLock::new();
    S.get_or_init(|| {
        let rule = legendre8();
        let xs: Vec<f64> = rule.iter().map(|r| r.0).collect();
        let lagrange = |j: usize, x: f64| -> f64 {
            xs.iter()
                .enumerate()
                .filter(|(m, _)| *m != j)
                .map(|(_, &xm)| (x - xm) / (xs[j] - xm))
                .product()
        };
        xs.iter()
            .map(|&xq| {
                (0..xs.len())
                    .map(|j| {
                        let (mid, rad) = (0.5 * (xq - 1.0), 0.5 * (xq + 1.0));
                        rule.iter()
                            .map(|&(y, w)| w * lagrange(j, mid + rad * y))
                            .sum::<f64>()
                            * rad
                    })
                    .collect()
            })
            .collect()
    })
}

/// `-(1/2) d/dx (u^2)` with dealiasing before and after the square.
pub fn nonlinear_rhs(u: &Field, cfg: &SolverConfig) -> Result<Field> {
    cfg.validate()?;
    let p = DispersionParams::benjamin_ono();
    let kernel = Kernel::new(
        u.grid(),
        &p,
        &SolverConfig {
            disable_nonlinearity: false,
            ..cfg.clone()
        },
    );
    let (spec, _) = kernel.rhs(u.spectrum());
    Field::from_spectrum(u.grid().clone(), &spec)
}

/// Integrates to `cfg.t_final`, recording `probes` every `record_every`
/// steps and at the final time.
pub fn evolve(
    u0: &Field,
    p: &DispersionParams,
    cfg: &SolverConfig,
    probes: &[Probe],
) -> Result<RunRecord> {
    evolve_observed(u0, p, cfg, probes, |_, _| {})
}

/// As [`evolve`], also handing every recorded state to `observer`.
pub fn evolve_observed(
    u0: &Field,
    p: &DispersionParams,
    cfg: &SolverConfig,
    probes: &[Probe],
    mut observer: impl FnMut(f64, &Field),
) -> Result<RunRecord> {
    cfg.validate()?;
    let grid = u0.grid().clone();
    let kernel = Kernel::new(&grid, p, cfg);
    let (n_steps, h) = cfg.steps();
    let flow = FlowReference::new(u0, *p);

    let mut record = RunRecord {
        times: Vec::new(),
        probes: probes.to_vec(),
        series: vec![Vec::new(); probes.len()],
        warnings: Vec::new(),
        manifest: RunManifest {
            grid: grid.describe(),
            dispersion: *p,
            solver: cfg.clone(),
            probes: probes.to_vec(),
        },
        final_field: u0.clone(),
        steps: n_steps,
    };
    let mut take = |t: f64, u: &Field, rec: &mut RunRecord| -> Result<()> {
        rec.times.push(t);
        for (i, probe) in probes.iter().enumerate() {
            let m = probe.evaluate(u, Some((&flow, t)))?;
            rec.series[i].push(m.value);
            if let Some(w) = m.warning {
                let name = probe.to_string();
                if !rec
                    .warnings
                    .iter()
                    .any(|r| r.probe == name && r.warning.kind == w.kind)
                {
                    rec.warnings.push(RecordedWarning {
                        time: t,
                        probe: name,
                        warning: w,
                    });
                }
            }
        }
        observer(t, u);
        Ok(())
    };

    take(0.0, u0, &mut record)?;
    let e = kernel.phase(h);
    let e2 = kernel.phase(0.5 * h);
    let mut uh = u0.spectrum().to_vec();
    for step in 1..=n_steps {
        let t0 = (step - 1) as f64 * h;
        uh = match cfg.integrator {
            Integrator::IfRk4 => kernel.if_rk4_step(&uh, h, &e, &e2, t0)?,
            Integrator::PicardOracle => kernel.picard(&uh, h, 1, cfg, t0)?.end,
        };
        if step % cfg.record_every == 0 || step == n_steps {
            let t = if step == n_steps {
                cfg.t_final
            } else {
                step as f64 * h
            };
            let u = Field::from_spectrum(grid.clone(), &uh).map_err(|_| Error::BlowUp {
                time: t,
                limit: BLOW_UP_LIMIT,
            })?;
            if u.max_abs() > BLOW_UP_LIMIT {
                return Err(Error::BlowUp {
                    time: t,
                    limit: BLOW_UP_LIMIT,
                });
            }
            take(t, &u, &mut record)?;
            if step == n_steps {
                record.final_field = u;
            }
        }
    }
    Ok(record)
}

/// Result of [`picard_oracle`].
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub field: Field,
    pub iterations: usize,
    /// L2 distance between successive iterates of `u(t)`.
    pub residuals: Vec<f64>,
}

/// `u(t)` from the Duhamel formula by Picard iteration over the whole
/// interval `[0, t]`, starting from `u^(0)(tau) = U(tau) u0`. The time
/// integral uses `ceil(t / cfg.dt)` Gauss-Legendre panels.
pub fn picard_oracle(
    u0: &Field,
    p: &DispersionParams,
    cfg: &SolverConfig,
    t: f64,
) -> Result<PicardOutcome> {
    cfg.validate()?;
    if !t.is_finite() {
        return Err(invalid("t", "must be finite"));
    }
    let kernel = Kernel::new(u0.grid(), p, cfg);
    let solve = kernel.picard(u0.spectrum(), t, panel_count(t, cfg), cfg, 0.0)?;
    Ok(PicardOutcome {
        field: Field::from_spectrum(u0.grid().clone(), &solve.end)?,
        iterations: solve.iterations,
        residuals: solve.residuals,
    })
}

fn panel_count(t: f64, cfg: &SolverConfig) -> usize {
    ((t.abs() / cfg.dt) - 1e-9).ceil().max(1.0) as usize
}

/// One Picard correction `U(t) u0 + int_0^t U(t - s) N(U(s) u0) ds`, with
/// the time integral on the same panels as [`picard_oracle`].
pub fn first_picard_correction(
    u0: &Field,
    p: &DispersionParams,
    cfg: &SolverConfig,
    t: f64,
) -> Result<Field> {
    cfg.validate()?;
    let kernel = Kernel::new(u0.grid(), p, cfg);
    let uh = u0.spectrum();
    let end = kernel.phase(t);
    let mut total: Vec<Complex64> = uh.iter().zip(&end).map(|(a, b)| a * b).collect();
    let panels = panel_count(t, cfg);
    let hp = t / panels as f64;
    for p in 0..panels {
        for &(x, w) in legendre8() {
            let s = hp * (p as f64 + 0.5 * (1.0 + x));
            let free: Vec<Complex64> = uh.iter().zip(kernel.phase(s)).map(|(a, b)| a * b).collect();
            let (ns, _) = kernel.rhs(&free);
            for ((acc, n), b) in total.iter_mut().zip(&ns).zip(kernel.phase(t - s)) {
                *acc += 0.5 * hp * w * b * n;
            }
        }
    }
    Field::from_spectrum(u0.grid().clone(), &total)
}
