//! Fourier multipliers: Riesz and Bessel potentials, the Hilbert transform,
//! derivatives and the free group `U(t)`.
//!
//! Odd symbols (`sgn`, `i xi`, `xi |xi|^{1+a}`) are set to zero on the
//! Nyquist mode, which has no conjugate partner.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::warning::{Warning, WarningKind};

/// Mean-mode magnitude above which negative-order potentials warn.
pub const ZERO_MODE_TOLERANCE: f64 = 1e-10;

/// Dispersion exponent `a` of `u_t + D^{a+1} u_x + u u_x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDispersion")]
pub struct DispersionParams {
    a: f64,
}

#[derive(Deserialize)]
struct RawDispersion {
    a: f64,
}

impl TryFrom<RawDispersion> for DispersionParams {
    type Error = Error;
    fn try_from(raw: RawDispersion) -> Result<Self> {
        DispersionParams::new(raw.a)
    }
}

impl DispersionParams {
    pub fn new(a: f64) -> Result<DispersionParams> {
        if !(0.0..=1.0).contains(&a) {
            return Err(invalid("a", format!("must lie in [0, 1], got {a}")));
        }
        Ok(DispersionParams { a })
    }

    pub fn benjamin_ono() -> DispersionParams {
        DispersionParams { a: 0.0 }
    }

    pub fn kdv() -> DispersionParams {
        DispersionParams { a: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Linear frequency `omega(xi) = xi |xi|^{1+a}`.
    pub fn omega(&self, xi: f64) -> f64 {
        xi * xi.abs().powf(1.0 + self.a)
    }

    /// `omega` at every grid wavenumber, Nyquist zeroed.
    pub fn omega_table(&self, grid: &Grid) -> Vec<f64> {
        let nyq = grid.nyquist_index();
        grid.wavenumbers()
            .iter()
            .enumerate()
            .map(|(k, &xi)| if k == nyq { 0.0 } else { self.omega(xi) })
            .collect()
    }

    /// `exp(-i t omega_k)`.
    pub fn propagator_table(&self, grid: &Grid, t: f64) -> Vec<Complex64> {
        self.omega_table(grid)
            .into_iter()
            .map(|w| Complex64::from_polar(1.0, -t * w))
            .collect()
    }

    /// Dispersion symbol of `D^{a+1} d/dx`, i.e. `i omega_k`.
    pub fn dispersion_symbol(&self, grid: &Grid) -> Vec<Complex64> {
        self.omega_table(grid)
            .into_iter()
            .map(|w| Complex64::new(0.0, w))
            .collect()
    }
}

/// `D^s f`, symbol `|xi|^s`, with the zero mode set to 0.
pub fn riesz_derivative(f: &Field, s: f64) -> Result<(Field, Option<Warning>)> {
    if !(s >= -1.0 && s.is_finite()) {
        return Err(invalid("s", format!("must be >= -1, got {s}")));
    }
    let mean = f.spectrum()[0].norm();
    let warning = (s < 0.0 && mean > ZERO_MODE_TOLERANCE).then(|| {
        Warning::new(
            WarningKind::NonzeroMean,
            format!("D^{s} applied to a field with |f^(0)| = {mean:.3e}; zero mode dropped"),
        )
    });
    let out = f.apply_symbol(|xi, k| {
        if k == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(xi.abs().powf(s), 0.0)
        }
    });
    Ok((out, warning))
}

/// `J^s f`, symbol `(1 + xi^2)^{s/2}`.
pub fn bessel_potential(f: &Field, s: f64) -> Field {
    f.apply_symbol(|xi, _| Complex64::new((1.0 + xi * xi).powf(0.5 * s), 0.0))
}

/// `H f`, symbol `-i sgn(xi)`, so that `H d/dx` has symbol `|xi|`.
pub fn hilbert_transform(f: &Field) -> Field {
    let nyq = f.grid().nyquist_index();
    f.apply_symbol(|xi, k| {
        if k == nyq || xi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -xi.signum())
        }
    })
}

/// `d^m f / dx^m`, symbol `(i xi)^m`.
pub fn derivative(f: &Field, m: u32) -> Field {
    let nyq = f.grid().nyquist_index();
    f.apply_symbol(|xi, k| {
        if k == nyq && m % 2 == 1 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, xi).powu(m)
        }
    })
}

/// `U(t) f`, symbol `exp(-i t xi |xi|^{1+a})`.
pub fn linear_propagator(f: &Field, t: f64, p: &DispersionParams) -> Field {
    let table = p.propagator_table(f.grid(), t);
    f.apply_symbol(|_, k| table[k])
}

/// Highest order accepted by [`xi_derivative`].
pub const MAX_XI_DERIVATIVE: usize = 5;

/// `d^k/dxi^k f^` at the grid wavenumbers, computed as the transform of
/// `(-i x)^k f` restricted to the default window `|x| <= 0.4 L`.
pub fn xi_derivative(f: &Field, k: usize) -> Result<Vec<Complex64>> {
    xi_derivative_windowed(f, k, 0.4 * f.grid().box_length())
}

pub fn xi_derivative_windowed(f: &Field, k: usize, window: f64) -> Result<Vec<Complex64>> {
    let values: Vec<Complex64> = f
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    xi_derivative_of_values(f.grid(), &values, k, window)
}

/// As [`xi_derivative_windowed`] for complex nodal values.
pub fn xi_derivative_of_values(
    grid: &Grid,
    values: &[Complex64],
    k: usize,
    window: f64,
) -> Result<Vec<Complex64>> {
    if k > MAX_XI_DERIVATIVE {
        return Err(invalid("k", format!("must be in 0..=5, got {k}")));
    }
    if !(window > 0.0 && window <= 0.5 * grid.box_length()) {
        return Err(invalid(
            "window",
            format!("must lie in (0, L/2], got {window}"),
        ));
    }
    if k == 0 && window >= 0.5 * grid.box_length() {
        return Ok(grid.forward(values));
    }
    let weighted: Vec<Complex64> = grid
        .nodes()
        .iter()
        .zip(values)
        .map(|(&x, &v)| {
            if x.abs() <= window {
                Complex64::new(0.0, -x).powu(k as u32) * v
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(grid.forward(&weighted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.samples()
            .iter()
            .zip(b.samples())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    fn two_pi(n: usize) -> std::sync::Arc<Grid> {
        make_grid(n, 2.0 * PI).unwrap()
    }

    fn bump(n: usize, l: f64) -> Field {
        let g = make_grid(n, l).unwrap();
        Field::from_fn(g, |x| (1.0 + 0.5 * x - 0.2 * x * x) * (-x * x / 2.0).exp()).unwrap()
    }

    #[test]
    fn riesz_on_single_modes() {
        let g = two_pi(64);
        let f = Field::from_fn(g.clone(), |x| (3.0 * x).sin()).unwrap();
        let (d, w) = riesz_derivative(&f, 0.7).unwrap();
        assert!(w.is_none());
        let expect = Field::from_fn(g.clone(), |x| 3f64.powf(0.7) * (3.0 * x).sin()).unwrap();
        assert!(max_diff(&d, &expect) < 1e-13);

        let c = Field::from_fn(g.clone(), |x| (2.0 * x).cos()).unwrap();
        let (d, _) = riesz_derivative(&c, 0.5).unwrap();
        let expect = Field::from_fn(g, |x| 2f64.sqrt() * (2.0 * x).cos()).unwrap();
        assert!(max_diff(&d, &expect) < 1e-13);
    }

    #[test]
    fn riesz_zero_order_removes_mean() {
        let g = two_pi(32);
        let f = Field::from_fn(g.clone(), |x| 1.5 + x.cos()).unwrap();
        let (d, w) = riesz_derivative(&f, 0.0).unwrap();
        assert!(w.is_none());
        let expect = Field::from_fn(g, |x| x.cos()).unwrap();
        assert!(max_diff(&d, &expect) < 1e-14);
    }

    #[test]
    fn negative_order_on_massive_field_warns() {
        let f = bump(256, 40.0);
        let (_, w) = riesz_derivative(&f, -0.5).unwrap();
        assert_eq!(w.unwrap().kind, WarningKind::NonzeroMean);
        assert!(riesz_derivative(&f, -1.5).is_err());
    }

    #[test]
    fn bessel_examples() {
        let g = two_pi(32);
        let f = Field::from_fn(g.clone(), |x| x.sin()).unwrap();
        let expect = Field::from_fn(g, |x| 2.0 * x.sin()).unwrap();
        assert!(max_diff(&bessel_potential(&f, 2.0), &expect) < 1e-13);
        let b = bump(256, 40.0);
        assert!(max_diff(&bessel_potential(&b, 0.0), &b) < 1e-15);
        let back = bessel_potential(&bessel_potential(&b, 2.0), -2.0);
        assert!(back.relative_distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn hilbert_examples() {
        let g = two_pi(64);
        for k in 1..5 {
            let kf = k as f64;
            let f = Field::from_fn(g.clone(), |x| (kf * x).cos()).unwrap();
            let expect = Field::from_fn(g.clone(), |x| (kf * x).sin()).unwrap();
            assert!(max_diff(&hilbert_transform(&f), &expect) < 1e-14);
        }
        let c = Field::from_fn(g.clone(), |x| (2.0 * x).cos()).unwrap();
        let hd = hilbert_transform(&derivative(&c, 1));
        let expect = Field::from_fn(g, |x| 2.0 * (2.0 * x).cos()).unwrap();
        assert!(max_diff(&hd, &expect) < 1e-13);
    }

    #[test]
    fn hilbert_squares_to_minus_identity_on_mean_zero() {
        let b = bump(256, 40.0);
        let (mz, _) = riesz_derivative(&b, 0.0).unwrap();
        let hh = hilbert_transform(&hilbert_transform(&mz));
        assert!(hh.add(&mz).unwrap().l2_norm() < 1e-12 * mz.l2_norm());
    }

    #[test]
    fn hilbert_derivative_is_riesz_one() {
        let b = bump(512, 40.0);
        let (d1, _) = riesz_derivative(&b, 1.0).unwrap();
        let hd = hilbert_transform(&derivative(&b, 1));
        assert!(hd.relative_distance(&d1).unwrap() < 1e-12);
    }

    #[test]
    fn propagator_examples() {
        let f = bump(256, 40.0);
        let p = DispersionParams::new(0.5).unwrap();
        assert!(max_diff(&linear_propagator(&f, 0.0, &p), &f) < 1e-15);
        let moved = linear_propagator(&f, 5.0, &p);
        assert_relative_eq!(moved.l2_norm() / f.l2_norm(), 1.0, epsilon = 1e-12);

        // a = 1 on e^{3ix}: real and imaginary parts evolve separately
        let g = two_pi(64);
        let t = 0.37;
        let kdv = DispersionParams::kdv();
        let c = Field::from_fn(g.clone(), |x| (3.0 * x).cos()).unwrap();
        let s = Field::from_fn(g.clone(), |x| (3.0 * x).sin()).unwrap();
        let ec = Field::from_fn(g.clone(), |x| (3.0 * x - 27.0 * t).cos()).unwrap();
        let es = Field::from_fn(g, |x| (3.0 * x - 27.0 * t).sin()).unwrap();
        assert!(max_diff(&linear_propagator(&c, t, &kdv), &ec) < 1e-13);
        assert!(max_diff(&linear_propagator(&s, t, &kdv), &es) < 1e-13);
    }

    #[test]
    fn propagator_symbol_has_unit_modulus() {
        let g = make_grid(1024, 100.0).unwrap();
        for a in [0.0, 0.3, 1.0] {
            let p = DispersionParams::new(a).unwrap();
            for c in p.propagator_table(&g, 3.3) {
                assert_relative_eq!(c.norm(), 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn dispersion_params_validate() {
        assert!(DispersionParams::new(-0.1).is_err());
        assert!(DispersionParams::new(1.1).is_err());
        let p: DispersionParams = serde_json::from_str(r#"{"a":0.25}"#).unwrap();
        assert_eq!(p.a(), 0.25);
        assert!(serde_json::from_str::<DispersionParams>(r#"{"a":2.0}"#).is_err());
    }

    #[test]
    fn xi_derivative_examples() {
        let g = make_grid(1024, 100.0).unwrap();
        let gauss = Field::from_fn(g.clone(), |x| (-x * x).exp()).unwrap();
        let d0 = xi_derivative(&gauss, 0).unwrap();
        for (a, b) in d0.iter().zip(gauss.spectrum()) {
            assert!((a - b).norm() < 1e-15);
        }
        let d1 = xi_derivative(&gauss, 1).unwrap();
        for (c, &xi) in d1.iter().zip(g.wavenumbers()) {
            let exact = -(xi / 2.0) * PI.sqrt() * (-xi * xi / 4.0).exp();
            assert!((c - Complex64::new(exact, 0.0)).norm() < 1e-13);
        }
        let odd = Field::from_fn(g.clone(), |x| x * (-x * x).exp()).unwrap();
        let o0 = xi_derivative(&odd, 0).unwrap();
        let o1 = xi_derivative(&odd, 1).unwrap();
        assert!(o0[0].norm() < 1e-15);
        assert!(o1[0].re.abs() < 1e-15 && o1[0].im.abs() > 0.1);
        assert!(xi_derivative(&odd, 6).is_err());
    }

    proptest! {
        #[test]
        fn riesz_orders_compose(s1 in 0.0f64..1.5, s2 in 0.0f64..1.5) {
            let b = bump(512, 40.0);
            let (mz, _) = riesz_derivative(&b, 0.0).unwrap();
            let (a, _) = riesz_derivative(&mz, s1).unwrap();
            let (ab, _) = riesz_derivative(&a, s2).unwrap();
            let (c, _) = riesz_derivative(&mz, s1 + s2).unwrap();
            prop_assert!(ab.relative_distance(&c).unwrap() < 1e-12);
        }

        #[test]
        fn propagator_group_law(t1 in -3.0f64..3.0, t2 in -3.0f64..3.0, a in 0.0f64..1.0) {
            let b = bump(256, 40.0);
            let p = DispersionParams::new(a).unwrap();
            let two = linear_propagator(&linear_propagator(&b, t1, &p), t2, &p);
            let one = linear_propagator(&b, t1 + t2, &p);
            prop_assert!(two.relative_distance(&one).unwrap() < 1e-12);
            let back = linear_propagator(&linear_propagator(&b, t1, &p), -t1, &p);
            prop_assert!(back.relative_distance(&b).unwrap() < 1e-12);
        }
    }
}
