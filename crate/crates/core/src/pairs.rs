//! Distinct initial data `phi != varphi` sharing prescribed moments.
//!
//! `phi = varphi + sum_i c_i g_i` with `g_i` Hermite functions; the
//! coefficients solve `residual(c) = 0` together with `||phi - varphi|| = delta`
//! by damped minimum-norm Newton.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::functionals::{functional_i, moment, Conserved, WeightSpec};
use crate::grid::Grid;
use crate::spectral::xi_derivative;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    #[serde(rename = "equal_L2")]
    EqualL2,
    #[serde(rename = "equal_mass")]
    EqualMass,
    #[serde(rename = "equal_first_moment")]
    EqualFirstMoment,
    #[serde(rename = "equal_second_moment")]
    EqualSecondMoment,
    #[serde(rename = "equal_x_square_moment")]
    EqualXSquareMoment,
    #[serde(rename = "equal_I3")]
    EqualI3,
}

impl Constraint {
    pub fn name(&self) -> &'static str {
        match self {
            Constraint::EqualL2 => "equal_L2",
            Constraint::EqualMass => "equal_mass",
            Constraint::EqualFirstMoment => "equal_first_moment",
            Constraint::EqualSecondMoment => "equal_second_moment",
            Constraint::EqualXSquareMoment => "equal_x_square_moment",
            Constraint::EqualI3 => "equal_I3",
        }
    }

    /// The functional whose values on the two profiles must agree.
    fn functional(&self, u: &Field) -> Result<f64> {
        let w = WeightSpec::default();
        Ok(match self {
            Constraint::EqualL2 => functional_i(u, Conserved::I2),
            Constraint::EqualMass => functional_i(u, Conserved::I1),
            Constraint::EqualFirstMoment => moment(u, 1, false, &w)?.value,
            Constraint::EqualSecondMoment => moment(u, 2, false, &w)?.value,
            Constraint::EqualXSquareMoment => moment(u, 1, true, &w)?.value,
            Constraint::EqualI3 => functional_i(u, Conserved::I3),
        })
    }

    /// Derivative of [`Constraint::functional`] at `u` along `g`. The
    /// functionals are at most cubic, so the symmetric difference with unit
    /// step is exact once the cubic remainder `int g^3 / 3` is removed.
    fn derivative(&self, u: &Field, g: &Field) -> Result<f64> {
        let plus = self.functional(&u.add(g)?)?;
        let minus = self.functional(&u.sub(g)?)?;
        let mut d = 0.5 * (plus - minus);
        if *self == Constraint::EqualI3 {
            d -= g.grid().spacing() * g.samples().iter().map(|v| v * v * v).sum::<f64>() / 3.0;
        }
        Ok(d)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraints {
    pub tags: Vec<Constraint>,
    /// Also require `int phi = 0`.
    #[serde(default)]
    pub zero_mean: bool,
    /// Also require `int x phi = 0`.
    #[serde(default)]
    pub zero_first_moment: bool,
}

impl MomentConstraints {
    pub fn new(tags: Vec<Constraint>) -> Result<MomentConstraints> {
        let c = MomentConstraints {
            tags,
            zero_mean: false,
            zero_first_moment: false,
        };
        c.validate()?;
        Ok(c)
    }

    /// Equal norm, mass and first moment.
    pub fn dgbo() -> MomentConstraints {
        MomentConstraints::new(vec![
            Constraint::EqualL2,
            Constraint::EqualMass,
            Constraint::EqualFirstMoment,
        ])
        .expect("distinct tags")
    }

    /// [`MomentConstraints::dgbo`] plus second moment, `int x u^2` and `I3`.
    pub fn bo() -> MomentConstraints {
        MomentConstraints::new(vec![
            Constraint::EqualL2,
            Constraint::EqualMass,
            Constraint::EqualFirstMoment,
            Constraint::EqualSecondMoment,
            Constraint::EqualXSquareMoment,
            Constraint::EqualI3,
        ])
        .expect("distinct tags")
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.tags.iter().enumerate() {
            if self.tags[..i].contains(t) {
                return Err(invalid("tags", format!("{t} listed twice")));
            }
        }
        Ok(())
    }

    /// Number of scalar equations excluding distinctness.
    pub fn count(&self) -> usize {
        self.tags.len() + self.zero_mean as usize + self.zero_first_moment as usize
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.tags.iter().map(|t| t.name().to_string()).collect();
        if self.zero_mean {
            v.push("zero_mean".into());
        }
        if self.zero_first_moment {
            v.push("zero_first_moment".into());
        }
        v
    }
}

/// Hermite function of degree `n` in `x / width`, unit L2 norm on the line.
pub fn hermite_function(n: usize, width: f64, x: f64) -> f64 {
    let s = x / width;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * s * s).exp();
    for k in 0..n {
        let next =
            (2.0 / (k + 1) as f64).sqrt() * s * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur / width.sqrt()
}

#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    pub base: Field,
    pub basis: Vec<Field>,
    pub coefficients: Vec<f64>,
}

impl PerturbationFamily {
    pub fn new(base: Field, basis: Vec<Field>) -> Result<PerturbationFamily> {
        if basis.is_empty() {
            return Err(invalid("basis", "must not be empty"));
        }
        if basis.iter().any(|g| !g.grid().same_as(base.grid())) {
            return Err(Error::GridMismatch);
        }
        let m = basis.len();
        Ok(PerturbationFamily {
            base,
            basis,
            coefficients: vec![0.0; m],
        })
    }

    /// Hermite functions of degrees `0..m` with the given width.
    pub fn hermite(base: Field, m: usize, width: f64) -> Result<PerturbationFamily> {
        if !(width > 0.0) {
            return Err(invalid("width", "must be positive"));
        }
        let grid: Arc<Grid> = base.grid().clone();
        let basis = (0..m)
            .map(|n| Field::from_fn(grid.clone(), |x| hermite_function(n, width, x)))
            .collect::<Result<Vec<_>>>()?;
        PerturbationFamily::new(base, basis)
    }

    pub fn with_coefficients(mut self, c: Vec<f64>) -> Result<PerturbationFamily> {
        if c.len() != self.basis.len() {
            return Err(invalid(
                "coefficients",
                format!("need {} values, got {}", self.basis.len(), c.len()),
            ));
        }
        self.coefficients = c;
        Ok(self)
    }

    /// `sum_i c_i g_i`.
    pub fn perturbation(&self, c: &[f64]) -> Field {
        let mut acc = vec![0.0; self.base.grid().n_points()];
        for (ci, g) in c.iter().zip(&self.basis) {
            for (a, v) in acc.iter_mut().zip(g.samples()) {
                *a += ci * v;
            }
        }
        Field::from_samples(self.base.grid().clone(), acc).expect("finite combination")
    }

    pub fn phi(&self) -> Field {
        self.base
            .add(&self.perturbation(&self.coefficients))
            .expect("same grid")
    }
}

fn residuals_at(base: &Field, phi: &Field, cons: &MomentConstraints) -> Result<Vec<f64>> {
    let mut r = Vec::with_capacity(cons.count());
    for t in &cons.tags {
        r.push(t.functional(phi)? - t.functional(base)?);
    }
    if cons.zero_mean {
        r.push(functional_i(phi, Conserved::I1));
    }
    if cons.zero_first_moment {
        r.push(moment(phi, 1, false, &WeightSpec::default())?.value);
    }
    Ok(r)
}

/// One residual per constraint, `F(phi) - F(varphi)` (or `F(phi)` for the
/// single-profile flags), in the order of [`MomentConstraints::names`].
pub fn constraint_residual(fam: &PerturbationFamily, cons: &MomentConstraints) -> Result<Vec<f64>> {
    cons.validate()?;
    residuals_at(&fam.base, &fam.phi(), cons)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub delta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Fresh random starts tried after a failed Newton run.
    pub restarts: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            delta: 0.1,
            tol: 1e-12,
            max_iter: 100,
            seed: 0,
            restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedResidual {
    pub name: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub residuals: Vec<NamedResidual>,
    /// `||phi - varphi||`.
    pub distance: f64,
    pub delta: f64,
    pub tol: f64,
    pub iterations: usize,
    /// Max-norm of the full residual (constraints and distinctness) per iterate.
    pub history: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub seed: u64,
}

impl Certificate {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max)
    }

    /// `r_{k+1} / r_k^2` over the last three iterates, when defined.
    pub fn quadratic_rates(&self) -> Vec<f64> {
        let h = &self.history;
        let start = h.len().saturating_sub(3);
        h[start..]
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / (w[0] * w[0]))
            .collect()
    }
}

/// Newton system value: constraint residuals plus the scaled sphere equation.
fn system(
    fam: &PerturbationFamily,
    cons: &MomentConstraints,
    c: &[f64],
    delta: f64,
) -> Result<(Vec<f64>, Field)> {
    let d = fam.perturbation(c);
    let phi = fam.base.add(&d)?;
    let mut f = residuals_at(&fam.base, &phi, cons)?;
    f.push((d.l2_norm_sq() - delta * delta) / (2.0 * delta));
    Ok((f, phi))
}

fn jacobian(
    fam: &PerturbationFamily,
    cons: &MomentConstraints,
    phi: &Field,
    c: &[f64],
    delta: f64,
) -> Result<DMatrix<f64>> {
    let m = fam.basis.len();
    let rows = cons.count() + 1;
    let d = fam.perturbation(c);
    let dx = phi.grid().spacing();
    let mut j = DMatrix::zeros(rows, m);
    for (col, g) in fam.basis.iter().enumerate() {
        let mut row = 0;
        for t in &cons.tags {
            j[(row, col)] = t.derivative(phi, g)?;
            row += 1;
        }
        if cons.zero_mean {
            j[(row, col)] = functional_i(g, Conserved::I1);
            row += 1;
        }
        if cons.zero_first_moment {
            j[(row, col)] = moment(g, 1, false, &WeightSpec::default())?.value;
            row += 1;
        }
        let inner: f64 = d
            .samples()
            .iter()
            .zip(g.samples())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * dx;
        j[(row, col)] = inner / delta;
    }
    Ok(j)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn newton(
    fam: &PerturbationFamily,
    cons: &MomentConstraints,
    opts: &MatchOptions,
    start: Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut c = start;
    let (mut f, mut phi) = system(fam, cons, &c, opts.delta)?;
    let mut history = vec![max_abs(&f)];
    for _ in 0..opts.max_iter {
        if max_abs(&f) <= opts.tol {
            return Ok((c, history));
        }
        let jac = jacobian(fam, cons, &phi, &c, opts.delta)?;
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > 1e-10 * smax)
            .count();
        if rank < cons.count() {
            return Err(Error::DegenerateJacobian {
                rank,
                needed: cons.count(),
            });
        }
        let rhs = DVector::from_vec(f.iter().map(|v| -v).collect());
        let step = svd
            .solve(&rhs, 1e-10 * smax)
            .map_err(|e| invalid("jacobian", e.to_string()))?;
        let current = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = c
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a + lambda * s)
                .collect();
            let (ft, pt) = system(fam, cons, &trial, opts.delta)?;
            let norm = ft.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < (1.0 - 1e-4 * lambda) * current || lambda < 1e-3 || norm <= opts.tol {
                c = trial;
                f = ft;
                phi = pt;
                break;
            }
            lambda *= 0.5;
        }
        history.push(max_abs(&f));
    }
    if max_abs(&f) <= opts.tol {
        return Ok((c, history));
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: max_abs(&f),
    })
}

/// Random unit direction in coefficient space scaled onto the sphere.
fn random_start(fam: &PerturbationFamily, delta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c: Vec<f64> = (0..fam.basis.len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let norm = fam.perturbation(&c).l2_norm();
    c.iter().map(|v| v * delta / norm).collect()
}

/// Solves for `phi = varphi + sum c_i g_i` meeting `cons` with
/// `||phi - varphi|| = delta`. Nonzero coefficients in `fam` are used as
/// the first starting point; otherwise, and after every failed run, the
/// start is a seeded random point on the sphere.
pub fn match_pair(
    fam: &PerturbationFamily,
    cons: &MomentConstraints,
    opts: &MatchOptions,
) -> Result<(Field, Field, Certificate)> {
    cons.validate()?;
    if !(opts.delta > 0.0) {
        return Err(invalid("delta", "must be positive"));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut last_err = None;
    for attempt in 0..=opts.restarts {
        let start = if attempt == 0 && fam.coefficients.iter().any(|c| *c != 0.0) {
            fam.coefficients.clone()
        } else {
            random_start(fam, opts.delta, &mut rng)
        };
        match newton(fam, cons, opts, start) {
            Ok((c, history)) => {
                let phi = fam.base.add(&fam.perturbation(&c))?;
                let residuals = residuals_at(&fam.base, &phi, cons)?
                    .into_iter()
                    .zip(cons.names())
                    .map(|(residual, name)| NamedResidual { name, residual })
                    .collect();
                let cert = Certificate {
                    residuals,
                    distance: phi.sub(&fam.base)?.l2_norm(),
                    delta: opts.delta,
                    tol: opts.tol,
                    iterations: history.len() - 1,
                    history,
                    coefficients: c,
                    seed: opts.seed,
                };
                return Ok((phi, fam.base.clone(), cert));
            }
            Err(e @ Error::DegenerateJacobian { .. }) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Recomputes every constrained functional through the Fourier side:
/// moments from `xi`-derivatives of the transform at 0, norms by Parseval,
/// `I3` from the `|xi|` multiplier directly.
pub fn independent_residuals(
    phi: &Field,
    varphi: &Field,
    cons: &MomentConstraints,
) -> Result<Vec<NamedResidual>> {
    let spectral = |u: &Field, t: Constraint| -> Result<f64> {
        let l = u.grid().box_length();
        Ok(match t {
            Constraint::EqualMass => u.spectrum()[0].re,
            Constraint::EqualL2 => u.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>() / l,
            // d/dxi u^(0) = -i int x u
            Constraint::EqualFirstMoment => -xi_derivative(u, 1)?[0].im,
            Constraint::EqualSecondMoment => -xi_derivative(u, 2)?[0].re,
            Constraint::EqualXSquareMoment => -xi_derivative(&u.map(|v| v * v), 1)?[0].im,
            Constraint::EqualI3 => {
                let g = u.grid();
                let kinetic: f64 = g
                    .wavenumbers()
                    .iter()
                    .zip(u.spectrum())
                    .enumerate()
                    .filter(|(k, _)| *k != g.nyquist_index())
                    .map(|(_, (xi, c))| xi.abs() * c.norm_sqr())
                    .sum::<f64>()
                    / l;
                let cube = u.map(|v| v * v * v).spectrum()[0].re / 3.0;
                let mass = u.spectrum()[0].re;
                kinetic + cube + std::f64::consts::PI * mass * mass / (3.0 * l * l)
            }
        })
    };
    let mut out = Vec::new();
    for t in &cons.tags {
        out.push(NamedResidual {
            name: t.name().into(),
            residual: spectral(phi, *t)? - spectral(varphi, *t)?,
        });
    }
    if cons.zero_mean {
        out.push(NamedResidual {
            name: "zero_mean".into(),
            residual: spectral(phi, Constraint::EqualMass)?,
        });
    }
    if cons.zero_first_moment {
        out.push(NamedResidual {
            name: "zero_first_moment".into(),
            residual: spectral(phi, Constraint::EqualFirstMoment)?,
        });
    }
    Ok(out)
}

/// Removes the mass of `f` with a multiple of `e^{-x^2}` and, if asked,
/// its first moment with a multiple of `x e^{-x^2}`. The two corrections
/// have opposite parity, so each leaves the other moment untouched.
pub fn make_zero_mean(f: &Field, also_first_moment: bool) -> Result<Field> {
    let grid = f.grid().clone();
    let even = Field::from_fn(grid.clone(), |x| (-x * x).exp())?;
    let mass = functional_i(f, Conserved::I1) / functional_i(&even, Conserved::I1);
    let mut out = f.add_scaled(-mass, &even)?;
    if also_first_moment {
        let odd = Field::from_fn(grid, |x| x * (-x * x).exp())?;
        let w = WeightSpec::default();
        let m1 = moment(&out, 1, false, &w)?.value / moment(&odd, 1, false, &w)?.value;
        out = out.add_scaled(-m1, &odd)?;
    }
    Ok(out)
}
