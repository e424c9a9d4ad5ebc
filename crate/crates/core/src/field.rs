//! Real fields sampled on a [`Grid`], with a lazily computed spectrum.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone)]
pub struct Field {
    grid: Arc<Grid>,
    samples: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Field {
    pub fn from_samples(grid: Arc<Grid>, samples: Vec<f64>) -> Result<Field> {
        if samples.len() != grid.n_points() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                samples.len()
            )));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(j));
        }
        Ok(Field {
            grid,
            samples,
            spectrum: OnceLock::new(),
        })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Field> {
        let samples = grid.nodes().iter().map(|&x| f(x)).collect();
        Field::from_samples(grid, samples)
    }

    pub fn zeros(grid: Arc<Grid>) -> Field {
        let n = grid.n_points();
        Field {
            grid,
            samples: vec![0.0; n],
            spectrum: OnceLock::new(),
        }
    }

    /// Builds a real field from spectrum samples. The conjugate-symmetric
    /// part is kept; the Nyquist coefficient keeps only its real part.
    pub fn from_spectrum(grid: Arc<Grid>, spectrum: &[Complex64]) -> Result<Field> {
        let n = grid.n_points();
        if spectrum.len() != n {
            return Err(Error::InvalidGrid(format!(
                "expected {n} coefficients, got {}",
                spectrum.len()
            )));
        }
        let sym: Vec<Complex64> = (0..n)
            .map(|k| {
                let partner = (n - k) % n;
                0.5 * (spectrum[k] + spectrum[partner].conj())
            })
            .collect();
        let samples: Vec<f64> = grid.inverse(&sym).iter().map(|c| c.re).collect();
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(j));
        }
        let spectrum = OnceLock::new();
        let _ = spectrum.set(sym);
        Ok(Field {
            grid,
            samples,
            spectrum,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Spectrum in FFT ordering, normalized as documented on [`Grid`].
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let values: Vec<Complex64> = self
                .samples
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            self.grid.forward(&values)
        })
    }

    /// `f^(0)`, i.e. the integral of the field.
    pub fn mean_mode(&self) -> f64 {
        self.spectrum()[0].re
    }

    /// Integral of the square.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.spacing() * self.samples.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Multiplies the spectrum by `symbol(xi_k, k)`.
    pub fn apply_symbol(&self, symbol: impl Fn(f64, usize) -> Complex64) -> Field {
        let spec: Vec<Complex64> = self
            .spectrum()
            .iter()
            .zip(self.grid.wavenumbers())
            .enumerate()
            .map(|(k, (c, &xi))| c * symbol(xi, k))
            .collect();
        Field::from_spectrum(self.grid.clone(), &spec).expect("finite symbol keeps field finite")
    }

    /// `x -> f(-x)`. Node `j` maps to node `n - j`; node 0 sits on the
    /// periodic seam and maps to itself.
    pub fn reflected(&self) -> Field {
        let n = self.samples.len();
        let samples = (0..n).map(|j| self.samples[(n - j) % n]).collect();
        Field {
            grid: self.grid.clone(),
            samples,
            spectrum: OnceLock::new(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Field {
        self.map(|v| factor * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|&v| f(v)).collect(),
            spectrum: OnceLock::new(),
        }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &Field) -> Result<Field> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + factor * b)
            .collect();
        Field::from_samples(self.grid.clone(), samples)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.add_scaled(-1.0, other)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.add_scaled(1.0, other)
    }

    /// Relative L2 distance `||self - other|| / max(||other||, tiny)`.
    pub fn relative_distance(&self, other: &Field) -> Result<f64> {
        let d = self.sub(other)?.l2_norm();
        Ok(d / other.l2_norm().max(f64::MIN_POSITIVE))
    }
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("l2_norm", &self.l2_norm())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_non_finite_samples() {
        let g = make_grid(16, 1.0).unwrap();
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert_eq!(Field::from_samples(g, v).unwrap_err(), Error::NonFinite(3));
    }

    #[test]
    fn gaussian_spectrum_matches_closed_form() {
        let g = make_grid(256, 40.0).unwrap();
        let f = Field::from_fn(g.clone(), |x| (-x * x).exp()).unwrap();
        for (c, &xi) in f.spectrum().iter().zip(g.wavenumbers()) {
            let exact = PI.sqrt() * (-xi * xi / 4.0).exp();
            assert!((c - Complex64::new(exact, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn reflection_of_odd_function_negates() {
        let g = make_grid(64, 20.0).unwrap();
        let f = Field::from_fn(g, |x| x * (-x * x).exp()).unwrap();
        let r = f.reflected();
        for (a, b) in f.samples().iter().zip(r.samples()) {
            assert!((a + b).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn parseval_and_round_trip(
            coeffs in prop::collection::vec(-1.0f64..1.0, 6),
            shift in -3.0f64..3.0,
            width in 0.5f64..2.0,
        ) {
            let g = make_grid(512, 60.0).unwrap();
            let f = Field::from_fn(g.clone(), |x| {
                let y = (x - shift) / width;
                let poly: f64 = coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c);
                poly * (-y * y).exp()
            }).unwrap();
            let spec_energy: f64 =
                f.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>() / g.box_length();
            let energy = f.l2_norm_sq();
            prop_assert!((spec_energy - energy).abs() <= 1e-12 * energy.max(1e-300));
            let back = Field::from_spectrum(g.clone(), f.spectrum()).unwrap();
            let err = back.sub(&f).unwrap().l2_norm();
            prop_assert!(err <= 1e-12 * f.l2_norm().max(1e-300));
        }
    }

    #[test]
    fn spectrum_is_conjugate_symmetric() {
        let g = make_grid(64, 10.0).unwrap();
        let f = Field::from_fn(g.clone(), |x| (x + 0.3).sin() * (-x * x / 4.0).exp()).unwrap();
        let s = f.spectrum();
        for k in 1..32 {
            assert_relative_eq!(s[k].re, s[64 - k].re, epsilon = 1e-14);
            assert_relative_eq!(s[k].im, -s[64 - k].im, epsilon = 1e-14);
        }
    }
}
