//! Stein fractional derivative
//!
//! ```text
//! D^b f(x) = ( int |f(x) - f(y)|^2 / |x - y|^{1 + 2b} dy )^{1/2},   0 < b < 1,
//! ```
//!
//! on uniformly sampled data ([`stein_derivative`]) and for functions given
//! in closed form ([`stein_derivative_at`]), plus the diagnostics built on it.

mod asymptotics;
mod expansion;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::Field;
use crate::functionals::Measured;
use crate::quad::{gauss8, tanh_sinh};
use crate::spectral::xi_derivative;

pub use asymptotics::{
    chi, dstein_asymptotics, l2_ladder, phase_envelope, pointwise_phase_bound, DsteinReport,
    L2Ladder, PhaseBoundReport, PhaseSample,
};
pub use expansion::{expansion_check, psi_derivatives, ExpansionReport};

/// How `|f(x) - f(y)|^2` is modelled beyond the integration range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailModel {
    /// Drop everything past the reach.
    None,
    /// `f` is frozen at its value where the reach ends (or at the last sample).
    #[default]
    ConstantExtension,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinParams {
    pub b: f64,
    /// Radius of the ball around `y = x` handled by the Taylor model.
    pub inner_cutoff: f64,
    /// Largest `|x - y|` integrated from the samples; infinite means the whole grid.
    pub outer_limit: f64,
    #[serde(default)]
    pub tail: TailModel,
}

impl SteinParams {
    pub fn new(b: f64, inner_cutoff: f64, outer_limit: f64) -> Result<SteinParams> {
        let p = SteinParams {
            b,
            inner_cutoff,
            outer_limit,
            tail: TailModel::default(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Cutoff at half the spacing, reach unlimited.
    pub fn for_spacing(b: f64, spacing: f64) -> Result<SteinParams> {
        SteinParams::new(b, 0.5 * spacing, f64::INFINITY)
    }

    pub fn with_tail(mut self, tail: TailModel) -> SteinParams {
        self.tail = tail;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.b)?;
        if !(self.inner_cutoff > 0.0 && self.inner_cutoff.is_finite()) {
            return Err(invalid("inner_cutoff", "must be positive"));
        }
        if !(self.outer_limit > self.inner_cutoff) {
            return Err(invalid("outer_limit", "must exceed inner_cutoff"));
        }
        Ok(())
    }
}

fn check_order(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(invalid("b", format!("must lie in (0, 1), got {b}")))
    }
}

/// Values `values[j]` at `origin + j * spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub origin: f64,
    pub spacing: f64,
    pub values: Vec<Complex64>,
}

impl Samples {
    pub fn new(origin: f64, spacing: f64, values: Vec<Complex64>) -> Result<Samples> {
        if !(spacing > 0.0) {
            return Err(invalid("spacing", "must be positive"));
        }
        if values.len() < 2 {
            return Err(invalid("values", "need at least two samples"));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(invalid("values", "must be finite"));
        }
        Ok(Samples {
            origin,
            spacing,
            values,
        })
    }

    pub fn from_real(origin: f64, spacing: f64, values: &[f64]) -> Result<Samples> {
        Samples::new(
            origin,
            spacing,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn from_fn(origin: f64, spacing: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Samples> {
        let v: Vec<f64> = (0..n).map(|j| f(origin + j as f64 * spacing)).collect();
        Samples::from_real(origin, spacing, &v)
    }

    pub fn position(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing
    }

    /// Samples of a field's spectrum on the ascending wavenumber grid.
    pub fn from_spectrum(f: &Field, spectrum: &[Complex64]) -> Samples {
        let g = f.grid();
        let n = g.n_points() as i64;
        let values = (-n / 2..n / 2)
            .map(|m| spectrum[g.index_of_mode(m)])
            .collect();
        Samples {
            origin: -(n / 2) as f64 * g.xi_spacing(),
            spacing: g.xi_spacing(),
            values,
        }
    }
}

/// `int_{r0}^{r1} r^{m - 1 - 2b} dr`.
fn power_integral(r0: f64, r1: f64, m: i32, b: f64) -> f64 {
    let s = m as f64 - 2.0 * b;
    if s.abs() < 1e-12 {
        (r1 / r0).ln()
    } else {
        (r1.powf(s) - r0.powf(s)) / s
    }
}

/// Pointwise `D^b f` at every sample.
///
/// `f` is read as its piecewise-linear interpolant. Inside `|y - x| <
/// inner_cutoff` the integrand is replaced by `|f'(x)|^2 |x - y|^{1 - 2b}`;
/// cells within four spacings are integrated in closed form, farther cells
/// by 8-point Gauss-Legendre. Past the reach the [`TailModel`] applies.
pub fn stein_derivative(f: &Samples, p: &SteinParams) -> Result<Vec<f64>> {
    p.validate()?;
    if p.inner_cutoff > f.spacing {
        return Err(invalid(
            "inner_cutoff",
            "must not exceed the sample spacing",
        ));
    }
    let v = &f.values;
    let n = v.len();
    let h = f.spacing;
    let (b, eps) = (p.b, p.inner_cutoff);
    let slope: Vec<Complex64> = (0..n)
        .map(|i| match i {
            0 => (v[1] - v[0]) / h,
            _ if i == n - 1 => (v[n - 1] - v[n - 2]) / h,
            _ => (v[i + 1] - v[i - 1]) / (2.0 * h),
        })
        .collect();
    let ball_power = 2.0 - 2.0 * b;

    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let fi = v[i];
            let mut sum = 0.0;
            for side in [1i64, -1] {
                let avail = if side > 0 { n - 1 - i } else { i };
                if avail == 0 {
                    continue;
                }
                let reach = p.outer_limit.min(avail as f64 * h);
                sum += slope[i].norm_sqr() * eps.powf(ball_power) / ball_power;
                let at = |m: usize| v[(i as i64 + side * m as i64) as usize];
                for m in 0..avail {
                    let r0 = m as f64 * h;
                    if r0 >= reach {
                        break;
                    }
                    let r1 = ((m + 1) as f64 * h).min(reach);
                    let (fj, fj1) = (at(m), at(m + 1));
                    let q = -(fj1 - fj) / h;
                    if m == 0 {
                        if r1 > eps {
                            sum += q.norm_sqr() * (r1.powf(ball_power) - eps.powf(ball_power))
                                / ball_power;
                        }
                    } else if m < 4 {
                        let pc = (fi - fj) - q * r0;
                        sum += pc.norm_sqr() * power_integral(r0, r1, 0, b)
                            + 2.0 * (pc.conj() * q).re * power_integral(r0, r1, 1, b)
                            + q.norm_sqr() * power_integral(r0, r1, 2, b);
                    } else {
                        let d0 = fi - fj;
                        sum += gauss8(r0, r1, |r| {
                            (d0 + q * (r - r0)).norm_sqr() * r.powf(-1.0 - 2.0 * b)
                        });
                    }
                }
                if p.tail == TailModel::ConstantExtension {
                    let m = ((reach / h).floor() as usize).min(avail);
                    let far = if m == avail {
                        at(avail)
                    } else {
                        let s = reach / h - m as f64;
                        at(m) * (1.0 - s) + at(m + 1) * s
                    };
                    sum += (fi - far).norm_sqr() * reach.powf(-2.0 * b) / (2.0 * b);
                }
            }
            sum.sqrt()
        })
        .collect();
    Ok(values)
}

/// Model of `|f(x) - f(y)|^2` outside the numerically integrated window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarField {
    /// `f` is constant on each side of the window.
    Constant { left: Complex64, right: Complex64 },
    /// `|f(x) - f(y)|^2` averages to the given value (fast oscillation).
    MeanSquare(f64),
}

/// Options for [`stein_derivative_at`].
pub struct PointwiseQuadrature<'a> {
    /// Points where `f` is not smooth.
    pub breaks: &'a [f64],
    /// Range of `y` integrated numerically; must contain `x`.
    pub window: (f64, f64),
    pub far: FarField,
    /// Longest subinterval allowed near `y`, to follow oscillation.
    pub max_piece: &'a (dyn Fn(f64) -> f64 + Sync),
}

/// `D^b f(x)` for `f` given in closed form. Subintervals touching a break
/// or the diagonal use double-exponential quadrature, the rest 8-point
/// Gauss-Legendre.
pub fn stein_derivative_at(
    f: &(dyn Fn(f64) -> Complex64 + Sync),
    x: f64,
    b: f64,
    q: &PointwiseQuadrature,
) -> Result<f64> {
    check_order(b)?;
    let (lo, hi) = q.window;
    if !(lo < x && x < hi) {
        return Err(invalid(
            "window",
            format!("({lo}, {hi}) must contain x = {x} in its interior"),
        ));
    }
    let nearest = q
        .breaks
        .iter()
        .map(|p| (p - x).abs())
        .filter(|d| *d > 0.0)
        .fold(1.0f64, f64::min)
        .min(x - lo)
        .min(hi - x);
    let eps = 1e-6 * nearest;
    let fx = f(x);
    let slope = (f(x + eps) - f(x - eps)) / (2.0 * eps);
    let ball_power = 2.0 - 2.0 * b;
    let mut total = 2.0 * slope.norm_sqr() * eps.powf(ball_power) / ball_power;

    let mut singular: Vec<f64> = vec![x - eps, x + eps];
    singular.extend(
        q.breaks
            .iter()
            .copied()
            .filter(|p| *p > lo && *p < hi && (p - x).abs() > eps),
    );
    let mut cuts = singular.clone();
    cuts.extend([lo, hi]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let integrand = |y: f64| (fx - f(y)).norm_sqr() * (x - y).abs().powf(-1.0 - 2.0 * b);
    let is_singular = |y: f64| singular.iter().any(|s| *s == y);

    for w in cuts.windows(2) {
        let (p0, p1) = (w[0], w[1]);
        if p0 == x - eps && p1 == x + eps {
            continue;
        }
        let mut s = p0;
        while s < p1 {
            let len = (q.max_piece)(s).max(1e-12 * (1.0 + s.abs()));
            let e = (s + len).min(p1);
            total += if (s == p0 && is_singular(p0)) || (e == p1 && is_singular(p1)) {
                tanh_sinh(s, e, integrand)
            } else {
                gauss8(s, e, integrand)
            };
            s = e;
        }
    }

    let side = |d: f64| d.powf(-2.0 * b) / (2.0 * b);
    total += match q.far {
        FarField::Constant { left, right } => {
            (fx - left).norm_sqr() * side(x - lo) + (fx - right).norm_sqr() * side(hi - x)
        }
        FarField::MeanSquare(m) => m * (side(x - lo) + side(hi - x)),
    };
    Ok(total.sqrt())
}

/// `int |D^theta g|^2 = 2 pi C_theta int |x|^{2 theta} |g^v|^2` when `g` is
/// the transform of `g^v`, with `C_theta = 2 pi / (Gamma(1 + 2 theta) sin(pi theta))`.
fn plancherel_constant(theta: f64) -> f64 {
    4.0 * PI * PI / (statrs::function::gamma::gamma(1.0 + 2.0 * theta) * (PI * theta).sin())
}

/// `|| |x|^{k + theta} u ||`, computed on the Fourier side as
/// `|| D^theta_xi d^k_xi u^ ||` and normalised by the Plancherel constant.
/// `p.b` is replaced by `theta`.
pub fn fractional_weighted_norm(
    u: &Field,
    k: usize,
    theta: f64,
    p: &SteinParams,
) -> Result<Measured> {
    check_order(theta)?;
    let spec = xi_derivative(u, k)?;
    let samples = Samples::from_spectrum(u, &spec);
    let params = SteinParams { b: theta, ..*p };
    let d = stein_derivative(&samples, &params)?;
    let sq = samples.spacing * d.iter().map(|v| v * v).sum::<f64>();
    Ok(Measured::checked(
        u,
        (sq / plancherel_constant(theta)).sqrt(),
    ))
}
