//! Integral functionals: conserved quantities, polynomial moments,
//! windowed and truncated weighted norms.
//!
//! Every integral is `dx * sum` over nodes. Polynomial weights are not
//! periodic, so weighted quantities are restricted to a window
//! `|x| <= W` (default `0.4 L`) and hard-zeroed outside it.
//!
//! Two weight conventions appear: the `Z`-norm `(int (1 + x^{2r}) u^2)^{1/2}`
//! ([`weighted_norm`]) and the bracket norm `||<x>^r u||` with
//! `<x> = (1 + x^2)^{1/2}` ([`bracket_norm`]). They are equivalent,
//! `2^{-1/2} Z <= ||<x>^r u|| <= 2^{r/2} Z` for `r >= 0`, but not equal.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::quad::gauss5;
use crate::spectral::{linear_propagator, riesz_derivative, DispersionParams};
use crate::warning::{Warning, WarningKind};

/// Boundary mass above this fraction of `||u||^2` raises a warning.
pub const BOUNDARY_MASS_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conserved {
    I1,
    I2,
    I3,
}

/// `I1 = int u`, `I2 = int u^2`, `I3 = int |D^{1/2} u|^2 + u^3/3`.
///
/// The `u^3` sign is the one conserved by `u_t + H u_xx + u u_x = 0` with
/// `H` of symbol `-i sgn`; with it, `d/dt int x u^2 = 2 I3`.
///
/// The spectral sum for `int |xi| |u^|^2` is a trapezoid rule whose
/// integrand has a kink at `xi = 0`; the leading Euler-Maclaurin term
/// `pi u^(0)^2 / (3 L^2)` is added so the value approximates the
/// real-line integral. It is itself conserved (it depends on the mass only).
pub fn functional_i(u: &Field, which: Conserved) -> f64 {
    match which {
        Conserved::I1 => u.grid().spacing() * u.samples().iter().sum::<f64>(),
        Conserved::I2 => u.l2_norm_sq(),
        Conserved::I3 => {
            let (half, _) = riesz_derivative(u, 0.5).expect("order 1/2 is valid");
            let dx = u.grid().spacing();
            let cubic: f64 = u.samples().iter().map(|v| v * v * v).sum::<f64>() * dx / 3.0;
            let l = u.grid().box_length();
            let mass = u.mean_mode();
            half.l2_norm_sq() + cubic + PI * mass * mass / (3.0 * l * l)
        }
    }
}

/// A value together with the validity warning attached to it, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub warning: Option<Warning>,
}

impl Measured {
    pub(crate) fn checked(u: &Field, value: f64) -> Measured {
        Measured {
            value,
            warning: boundary_warning(u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub r: f64,
    /// Half-width `W` of the window; `None` means `0.4 L`.
    pub window_half_width: Option<f64>,
    /// `N` of the truncated weight `<x>_N`.
    pub truncation_n: Option<f64>,
}

impl WeightSpec {
    pub fn new(r: f64) -> WeightSpec {
        WeightSpec {
            r,
            window_half_width: None,
            truncation_n: None,
        }
    }

    pub fn with_window(mut self, w: f64) -> WeightSpec {
        self.window_half_width = Some(w);
        self
    }

    pub fn truncated(mut self, n: f64) -> WeightSpec {
        self.truncation_n = Some(n);
        self
    }

    fn window(&self, u: &Field) -> Result<f64> {
        let half = 0.5 * u.grid().box_length();
        let w = self
            .window_half_width
            .unwrap_or(0.4 * u.grid().box_length());
        if !(w > 0.0 && w <= half) {
            return Err(invalid(
                "window_half_width",
                format!("must lie in (0, L/2], got {w}"),
            ));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(invalid("r", format!("must be >= 0, got {}", self.r)));
        }
        if let Some(n) = self.truncation_n {
            if !(n >= 1.0) {
                return Err(invalid("truncation_n", format!("must be >= 1, got {n}")));
            }
        }
        Ok(w)
    }
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::new(0.0)
    }
}

/// `dx * sum_{|x_j| <= W} g(x_j) * u_j^p`.
fn window_sum(u: &Field, w: f64, square: bool, g: impl Fn(f64) -> f64) -> f64 {
    let dx = u.grid().spacing();
    u.grid()
        .nodes()
        .iter()
        .zip(u.samples())
        .filter(|(x, _)| x.abs() <= w)
        .map(|(&x, &v)| g(x) * if square { v * v } else { v })
        .sum::<f64>()
        * dx
}

/// `int x^k u` or `int x^k u^2` over the window. For `k = 0` the weight is
/// constant and the whole box is used, so the result coincides with `I1`/`I2`.
pub fn moment(u: &Field, k: u32, of_square: bool, w: &WeightSpec) -> Result<Measured> {
    if k > 2 {
        return Err(invalid("k", format!("must be 0, 1 or 2, got {k}")));
    }
    let win = w.window(u)?;
    let value = if k == 0 {
        functional_i(
            u,
            if of_square {
                Conserved::I2
            } else {
                Conserved::I1
            },
        )
    } else {
        window_sum(u, win, of_square, |x| x.powi(k as i32))
    };
    Ok(Measured::checked(u, value))
}

/// `<x> = (1 + x^2)^{1/2}`.
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Truncated weight `<x>_N`: equal to `<x>` for `|x| <= N` and to `2N`
/// for `|x| >= 3N`.
///
/// In between, the slope is `<x>' (1 - S((|x| - N) / (2 N theta)))` with
/// `S` the C^2 smoothstep `6s^5 - 15s^4 + 10s^3`, so the weight is C^2,
/// non-decreasing and has slope at most `<x>' < 1`. The plateau onset
/// `theta` in `(0, 1]` is solved for so the weight reaches exactly `2N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedWeight {
    n: f64,
    ramp: f64,
}

fn smootherstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

impl TruncatedWeight {
    pub fn new(n: f64) -> Result<TruncatedWeight> {
        if !(n >= 1.0 && n.is_finite()) {
            return Err(invalid("truncation_n", format!("must be >= 1, got {n}")));
        }
        let target = 2.0 * n - bracket(n);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let probe = TruncatedWeight {
                n,
                ramp: 2.0 * n * mid,
            };
            if probe.rise(n + probe.ramp) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(TruncatedWeight {
            n,
            ramp: 2.0 * n * 0.5 * (lo + hi),
        })
    }

    fn slope(&self, y: f64) -> f64 {
        y / bracket(y) * (1.0 - smootherstep((y - self.n) / self.ramp))
    }

    /// `int_N^y` of the slope, by composite Gauss-Legendre.
    fn rise(&self, y: f64) -> f64 {
        let end = y.min(self.n + self.ramp);
        if end <= self.n {
            return 0.0;
        }
        let panels = 16;
        let h = (end - self.n) / panels as f64;
        (0..panels)
            .map(|i| {
                let a = self.n + i as f64 * h;
                gauss5(a, a + h, |z| self.slope(z))
            })
            .sum()
    }

    pub fn value(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax <= self.n {
            bracket(ax)
        } else if ax >= 3.0 * self.n {
            2.0 * self.n
        } else {
            bracket(self.n) + self.rise(ax)
        }
    }

    /// Derivative in `|x|`.
    pub fn derivative(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax <= self.n {
            ax / bracket(ax)
        } else {
            self.slope(ax).max(0.0)
        }
    }
}

/// `<x>_N` at a single point; see [`TruncatedWeight`].
pub fn truncated_weight(x: f64, n: f64) -> Result<f64> {
    Ok(TruncatedWeight::new(n)?.value(x))
}

/// `(int_{|x|<=W} (1 + x^{2r}) u^2)^{1/2}`, or `||<x>_N^r u||` on the window
/// when `truncation_n` is set.
pub fn weighted_norm(u: &Field, w: &WeightSpec) -> Result<Measured> {
    let win = w.window(u)?;
    let r = w.r;
    let sq = match w.truncation_n {
        Some(n) => {
            let tw = TruncatedWeight::new(n)?;
            window_sum(u, win, true, |x| tw.value(x).powf(2.0 * r))
        }
        None => window_sum(u, win, true, |x| 1.0 + x.abs().powf(2.0 * r)),
    };
    Ok(Measured::checked(u, sq.sqrt()))
}

/// `||<x>^r u||` on the window (truncation ignored).
pub fn bracket_norm(u: &Field, w: &WeightSpec) -> Result<Measured> {
    let win = w.window(u)?;
    let r = w.r;
    let sq = window_sum(u, win, true, |x| (1.0 + x * x).powf(r));
    Ok(Measured::checked(u, sq.sqrt()))
}

/// `int_{|x| > 0.45 L} u^2`.
pub fn boundary_mass(u: &Field) -> f64 {
    let edge = 0.45 * u.grid().box_length();
    let dx = u.grid().spacing();
    u.grid()
        .nodes()
        .iter()
        .zip(u.samples())
        .filter(|(x, _)| x.abs() > edge)
        .map(|(_, v)| v * v)
        .sum::<f64>()
        * dx
}

fn boundary_warning(u: &Field) -> Option<Warning> {
    let bm = boundary_mass(u);
    let total = u.l2_norm_sq();
    (bm > BOUNDARY_MASS_FRACTION * total).then(|| {
        Warning::new(
            WarningKind::BoundaryMass,
            format!(
                "boundary mass {bm:.3e} exceeds {BOUNDARY_MASS_FRACTION:e} * ||u||^2 = {:.3e}",
                BOUNDARY_MASS_FRACTION * total
            ),
        )
    })
}

/// Real-line moments of a solution of the flow started from `initial`.
///
/// Under the periodic flow a solution with nonzero mean grows algebraic
/// tails (`|x|^{-3-a}` for `a < 1`) that a box sum of `x u` or `x^2 u`
/// cannot capture. These estimators take the free part `U(t) phi` exactly,
/// using `int x U(t)phi = int x phi` and `int x^2 U(t)phi = int x^2 phi`
/// (principal value when `a = 0`), and box-sum only the nonlinear
/// remainder. For the second moment the remainder's leading non-smooth
/// spectral term `-(t^2/4) ||phi||^2 |xi|^{3+a}` is removed first; its own
/// second moment is zero.
#[derive(Debug, Clone)]
pub struct FlowReference {
    initial: Field,
    params: DispersionParams,
    m1: f64,
    m2: f64,
    mass_sq: f64,
}

impl FlowReference {
    pub fn new(initial: &Field, params: DispersionParams) -> FlowReference {
        let dx = initial.grid().spacing();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (&x, &v) in initial.grid().nodes().iter().zip(initial.samples()) {
            m1 += x * v;
            m2 += x * x * v;
        }
        FlowReference {
            initial: initial.clone(),
            params,
            m1: m1 * dx,
            m2: m2 * dx,
            mass_sq: initial.l2_norm_sq(),
        }
    }

    pub fn initial(&self) -> &Field {
        &self.initial
    }

    pub fn params(&self) -> &DispersionParams {
        &self.params
    }

    /// `int x u(t)`.
    pub fn first_moment(&self, u: &Field, t: f64) -> Result<f64> {
        let rest = u.sub(&linear_propagator(&self.initial, t, &self.params))?;
        Ok(self.m1 + box_moment(&rest, 1))
    }

    /// `int x^2 u(t)`.
    pub fn second_moment(&self, u: &Field, t: f64) -> Result<f64> {
        let free = linear_propagator(&self.initial, t, &self.params);
        let beta = 3.0 + self.params.a();
        let c = -0.25 * t * t * self.mass_sq;
        let model: Vec<Complex64> = u
            .grid()
            .wavenumbers()
            .iter()
            .map(|&xi| Complex64::new(c * xi.abs().powf(beta) * (-xi * xi).exp(), 0.0))
            .collect();
        let model = Field::from_spectrum(u.grid().clone(), &model)?;
        let rest = u.sub(&free)?.sub(&model)?;
        Ok(self.m2 + box_moment(&rest, 2))
    }
}

fn box_moment(u: &Field, k: i32) -> f64 {
    u.grid()
        .nodes()
        .iter()
        .zip(u.samples())
        .map(|(&x, &v)| x.powi(k) * v)
        .sum::<f64>()
        * u.grid().spacing()
}

/// Named diagnostics accepted by the solver and used as CSV columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    I1,
    I2,
    I3,
    /// `int x u`
    M1,
    /// `int x^2 u`
    M2,
    /// `int x u^2`
    XMSq,
    /// `Z`-norm with exponent `r` on the default window.
    Zr(f64),
    /// `||<x>_N^r u||` on the default window.
    ZrN(f64, f64),
    BoundaryMass,
}

impl Probe {
    /// Evaluates the probe. When `flow` carries the run's initial datum and
    /// current time, `M1`/`M2` use the real-line estimators of
    /// [`FlowReference`]; otherwise they are plain window moments.
    pub fn evaluate(&self, u: &Field, flow: Option<(&FlowReference, f64)>) -> Result<Measured> {
        let plain = |v: f64| {
            Ok(Measured {
                value: v,
                warning: None,
            })
        };
        match *self {
            Probe::I1 => plain(functional_i(u, Conserved::I1)),
            Probe::I2 => plain(functional_i(u, Conserved::I2)),
            Probe::I3 => plain(functional_i(u, Conserved::I3)),
            Probe::M1 => match flow {
                Some((f, t)) => Ok(Measured::checked(u, f.first_moment(u, t)?)),
                None => moment(u, 1, false, &WeightSpec::default()),
            },
            Probe::M2 => match flow {
                Some((f, t)) => Ok(Measured::checked(u, f.second_moment(u, t)?)),
                None => moment(u, 2, false, &WeightSpec::default()),
            },
            Probe::XMSq => moment(u, 1, true, &WeightSpec::default()),
            Probe::Zr(r) => weighted_norm(u, &WeightSpec::new(r)),
            Probe::ZrN(r, n) => weighted_norm(u, &WeightSpec::new(r).truncated(n)),
            Probe::BoundaryMass => plain(boundary_mass(u)),
        }
    }
}

impl fmt::Display for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probe::I1 => write!(f, "I1"),
            Probe::I2 => write!(f, "I2"),
            Probe::I3 => write!(f, "I3"),
            Probe::M1 => write!(f, "M1"),
            Probe::M2 => write!(f, "M2"),
            Probe::XMSq => write!(f, "xM_sq"),
            Probe::Zr(r) => write!(f, "Zr:{r}"),
            Probe::ZrN(r, n) => write!(f, "ZrN:{r},{n}"),
            Probe::BoundaryMass => write!(f, "boundary_mass"),
        }
    }
}

impl FromStr for Probe {
    type Err = Error;
    fn from_str(s: &str) -> Result<Probe> {
        let bad = || Error::UnknownProbe(s.to_string());
        let number = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(bad)
        };
        Ok(match s.trim() {
            "I1" => Probe::I1,
            "I2" => Probe::I2,
            "I3" => Probe::I3,
            "M1" => Probe::M1,
            "M2" => Probe::M2,
            "xM_sq" => Probe::XMSq,
            "boundary_mass" => Probe::BoundaryMass,
            other => {
                if let Some(rest) = other.strip_prefix("ZrN:") {
                    let (r, n) = rest.split_once(',').ok_or_else(bad)?;
                    let n = number(n)?;
                    if n < 1.0 {
                        return Err(bad());
                    }
                    Probe::ZrN(number(r)?, n)
                } else if let Some(rest) = other.strip_prefix("Zr:") {
                    Probe::Zr(number(rest)?)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

impl Serialize for Probe {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Probe {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Probe, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::spectral::bessel_potential;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desk(f: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(make_grid(1024, 100.0).unwrap(), f).unwrap()
    }

    #[test]
    fn conserved_functionals_of_zero() {
        let z = desk(|_| 0.0);
        for w in [Conserved::I1, Conserved::I2, Conserved::I3] {
            assert_eq!(functional_i(&z, w), 0.0);
        }
    }

    #[test]
    fn single_mode_values() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        let c = Field::from_fn(g, |x| (2.0 * x).cos()).unwrap();
        assert_relative_eq!(functional_i(&c, Conserved::I2), PI, epsilon = 1e-13);
        assert_relative_eq!(functional_i(&c, Conserved::I3), 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_mass() {
        let g = desk(|x| (-x * x).exp());
        assert_relative_eq!(functional_i(&g, Conserved::I1), PI.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn i3_approximates_real_line_integral() {
        // int |xi| |f^|^2 dxi / 2pi for f = e^{-x^2}: f^ = sqrt(pi) e^{-xi^2/4}
        // gives pi * 2 * int_0^inf xi e^{-xi^2/2} / 2pi = 1; cubic term
        // int e^{-3x^2}/3 = sqrt(pi/3)/3.
        let g = desk(|x| (-x * x).exp());
        let exact = 1.0 + (PI / 3.0).sqrt() / 3.0;
        assert_relative_eq!(functional_i(&g, Conserved::I3), exact, epsilon = 1e-6);
    }

    #[test]
    fn moment_examples() {
        let w = WeightSpec::default();
        let even = desk(|x| (-x * x).exp());
        assert!(moment(&even, 1, false, &w).unwrap().value.abs() < 1e-15);
        let odd = desk(|x| x * (-x * x).exp());
        assert_relative_eq!(
            moment(&odd, 1, false, &w).unwrap().value,
            PI.sqrt() / 2.0,
            epsilon = 1e-13
        );
        let m2 = moment(&even, 2, true, &w).unwrap();
        assert_relative_eq!(m2.value, 0.25 * (PI / 2.0).sqrt(), epsilon = 1e-13);
        assert!(m2.warning.is_none());
        assert!(moment(&even, 3, false, &w).is_err());
    }

    #[test]
    fn zeroth_moments_are_i1_i2() {
        let u = desk(|x| (1.0 + x) * (-(x - 1.0) * (x - 1.0)).exp());
        let w = WeightSpec::default().with_window(10.0);
        assert_eq!(
            moment(&u, 0, false, &w).unwrap().value,
            functional_i(&u, Conserved::I1)
        );
        assert_eq!(
            moment(&u, 0, true, &w).unwrap().value,
            functional_i(&u, Conserved::I2)
        );
    }

    #[test]
    fn weighted_norm_examples() {
        let z = desk(|_| 0.0);
        assert_eq!(weighted_norm(&z, &WeightSpec::new(2.0)).unwrap().value, 0.0);
        let g = desk(|x| (-x * x).exp());
        let r0 = weighted_norm(&g, &WeightSpec::new(0.0)).unwrap().value;
        assert_relative_eq!(r0, 2f64.sqrt() * g.l2_norm(), epsilon = 1e-14);
        let w = WeightSpec::new(1.0).with_window(50.0);
        let exact = ((PI / 2.0).sqrt() * 1.25).sqrt();
        assert_relative_eq!(weighted_norm(&g, &w).unwrap().value, exact, epsilon = 1e-12);
        assert_relative_eq!(exact, 1.251_656, epsilon = 1e-6);
    }

    #[test]
    fn boundary_mass_examples() {
        assert_eq!(boundary_mass(&desk(|_| 0.0)), 0.0);
        assert_eq!(boundary_mass(&desk(|x| (-x * x).exp())), 0.0);
        let one = desk(|_| 1.0);
        assert_relative_eq!(boundary_mass(&one), 10.0, epsilon = 0.1);
        let w = moment(&one, 1, false, &WeightSpec::default()).unwrap();
        assert_eq!(w.warning.unwrap().kind, WarningKind::BoundaryMass);
    }

    #[test]
    fn truncated_weight_shape() {
        for n in [1.0, 2.0, 5.0, 17.0, 60.0] {
            let tw = TruncatedWeight::new(n).unwrap();
            let step = n / 2000.0;
            let mut prev = tw.value(0.0);
            let mut x = step;
            while x < 4.0 * n {
                let v = tw.value(x);
                let slope = (v - prev) / step;
                assert!(slope >= -1e-12, "decreasing at x = {x}, N = {n}");
                assert!(slope <= 1.0, "slope {slope} > 1 at x = {x}, N = {n}");
                assert!(tw.derivative(x) <= 1.0);
                assert_eq!(tw.value(-x), v);
                prev = v;
                x += step;
            }
            assert_relative_eq!(tw.value(0.5 * n), bracket(0.5 * n), epsilon = 1e-14);
            assert_relative_eq!(tw.value(3.0 * n - 1e-9), 2.0 * n, max_relative = 1e-12);
            assert_relative_eq!(tw.value(n + 1e-9), bracket(n), epsilon = 1e-8);
            // slope and curvature continuous at x = N
            let h = 1e-4;
            let left = (tw.value(n) - tw.value(n - h)) / h;
            let right = (tw.value(n + h) - tw.value(n)) / h;
            assert!((left - right).abs() < 1e-3);
        }
        assert!(truncated_weight(1.0, 0.5).is_err());
    }

    #[test]
    fn truncated_norm_matches_bracket_norm_when_n_covers_window() {
        let u = desk(|x| (1.0 + x * x) * (-x * x / 8.0).exp());
        let w = WeightSpec::new(3.0).with_window(30.0);
        let full = bracket_norm(&u, &w).unwrap().value;
        let trunc = weighted_norm(&u, &w.truncated(30.0)).unwrap().value;
        assert_relative_eq!(trunc, full, max_relative = 1e-12);
    }

    #[test]
    fn weighted_norm_monotone_in_r_away_from_origin() {
        let v = desk(|x| {
            if x.abs() < 1.0 {
                0.0
            } else {
                (-(x - 4.0).powi(2)).exp() + (-0.5 * (x + 6.0).powi(2)).exp()
            }
        });
        let mut prev = 0.0;
        for r in [0.0, 0.5, 1.0, 2.0, 3.5] {
            let n = weighted_norm(&v, &WeightSpec::new(r)).unwrap().value;
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn probe_names_round_trip() {
        for s in [
            "I1",
            "I2",
            "I3",
            "M1",
            "M2",
            "xM_sq",
            "Zr:2",
            "ZrN:4,10",
            "boundary_mass",
            "Zr:0.5",
        ] {
            let p: Probe = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        for s in ["I4", "Zr:", "Zr:-1", "ZrN:2", "ZrN:2,0.5", "m1"] {
            assert!(s.parse::<Probe>().is_err(), "{s}");
        }
    }

    #[test]
    fn flow_moments_reduce_to_box_moments_at_time_zero() {
        let u = desk(|x| (1.0 + x) * (-(x - 1.0) * (x - 1.0)).exp());
        let fr = FlowReference::new(&u, DispersionParams::new(0.5).unwrap());
        let w = WeightSpec::default();
        assert_relative_eq!(
            fr.first_moment(&u, 0.0).unwrap(),
            moment(&u, 1, false, &w).unwrap().value,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            fr.second_moment(&u, 0.0).unwrap(),
            moment(&u, 2, false, &w).unwrap().value,
            max_relative = 1e-12
        );
        // the free flow does not move either moment
        for a in [0.0, 0.5, 1.0] {
            let p = DispersionParams::new(a).unwrap();
            let fr = FlowReference::new(&u, p);
            let moved = linear_propagator(&u, 2.0, &p);
            assert_relative_eq!(
                fr.first_moment(&moved, 2.0).unwrap(),
                fr.first_moment(&u, 0.0).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    /// Interpolation inequality on weights and derivatives:
    /// `||J^{2}(<x>^2 f)|| <= c ||<x>^4 f||^{1/2} ||J^4 f||^{1/2}`.
    #[test]
    fn weight_derivative_interpolation_has_uniform_constant() {
        let g = make_grid(1024, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let width = rng.gen_range(0.7..2.0);
            let shift = rng.gen_range(-3.0..3.0);
            let f = Field::from_fn(g.clone(), |x| {
                let y = (x - shift) / width;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c) * (-y * y).exp()
            })
            .unwrap();
            let weighted = Field::from_samples(
                g.clone(),
                g.nodes()
                    .iter()
                    .zip(f.samples())
                    .map(|(x, v)| (1.0 + x * x) * v)
                    .collect(),
            )
            .unwrap();
            let lhs = bessel_potential(&weighted, 2.0).l2_norm();
            let w4 = bracket_norm(&f, &WeightSpec::new(4.0).with_window(50.0))
                .unwrap()
                .value;
            let j4 = bessel_potential(&f, 4.0).l2_norm();
            worst = worst.max(lhs / (w4 * j4).sqrt());
        }
        assert!(worst <= 10.0, "fitted constant {worst}");
    }
}
