//! Periodic grid on `[-L/2, L/2)` and its matched wavenumber set.
//!
//! The real line is approximated by a periodic box. Spectra are stored as
//! samples of the continuous Fourier transform
//!
//! ```text
//! f^(xi_k) ~ dx * sum_j f_j exp(-i xi_k x_j)
//! ```
//!
//! in FFT ordering: index `k < n/2` holds mode `k`, index `k >= n/2` holds
//! mode `k - n`. With this normalization Plancherel reads
//! `dx * sum |f_j|^2 = (1/L) * sum |f^_k|^2`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub struct Grid {
    n_points: usize,
    box_length: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Serializable echo of a grid, written into run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescription {
    pub n_points: usize,
    pub box_length: f64,
    pub spacing: f64,
    pub xi_spacing: f64,
    pub xi_max: f64,
    pub wavenumber_ordering: String,
    pub spectrum_normalization: String,
}

/// Builds the grid with `n_points` nodes on a box of length `box_length`.
pub fn make_grid(n_points: usize, box_length: f64) -> Result<Arc<Grid>> {
    if n_points < 16 || n_points % 2 != 0 {
        return Err(Error::InvalidGrid(format!(
            "n_points must be even and >= 16, got {n_points}"
        )));
    }
    if !(box_length.is_finite() && box_length > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "box_length must be positive, got {box_length}"
        )));
    }
    let dx = box_length / n_points as f64;
    let nodes = (0..n_points)
        .map(|j| -0.5 * box_length + j as f64 * dx)
        .collect();
    let dxi = 2.0 * PI / box_length;
    let wavenumbers = (0..n_points)
        .map(|k| signed_mode(k, n_points) as f64 * dxi)
        .collect();
    let mut planner = FftPlanner::new();
    Ok(Arc::new(Grid {
        n_points,
        box_length,
        nodes,
        wavenumbers,
        forward: planner.plan_fft_forward(n_points),
        inverse: planner.plan_fft_inverse(n_points),
    }))
}

fn signed_mode(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

impl Grid {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n_points as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Wavenumbers in FFT ordering.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn xi_spacing(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Magnitude of the Nyquist wavenumber, the largest |xi| on the grid.
    pub fn xi_max(&self) -> f64 {
        PI * self.n_points as f64 / self.box_length
    }

    pub fn nyquist_index(&self) -> usize {
        self.n_points / 2
    }

    /// Signed mode number of FFT index `k`.
    pub fn mode(&self, k: usize) -> i64 {
        signed_mode(k, self.n_points)
    }

    /// FFT index holding signed mode `m`.
    pub fn index_of_mode(&self, m: i64) -> usize {
        m.rem_euclid(self.n_points as i64) as usize
    }

    /// Same box, twice the nodes.
    pub fn refined(&self) -> Result<Arc<Grid>> {
        make_grid(2 * self.n_points, self.box_length)
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n_points == other.n_points && self.box_length == other.box_length
    }

    pub fn describe(&self) -> GridDescription {
        GridDescription {
            n_points: self.n_points,
            box_length: self.box_length,
            spacing: self.spacing(),
            xi_spacing: self.xi_spacing(),
            xi_max: self.xi_max(),
            wavenumber_ordering:
                "fft: index k<n/2 is mode k, index k>=n/2 is mode k-n; xi_k = 2*pi*mode/L"
                    .to_string(),
            spectrum_normalization: "F_k = dx * sum_j f_j exp(-i xi_k x_j), x_j = -L/2 + j*dx"
                .to_string(),
        }
    }

    /// Continuous-transform samples of complex nodal values.
    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n_points);
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        let dx = self.spacing();
        for (k, c) in buf.iter_mut().enumerate() {
            // exp(i xi_k L/2) = (-1)^k on an even grid
            let sign = if k % 2 == 0 { dx } else { -dx };
            *c *= sign;
        }
        buf
    }

    /// Inverse of [`Grid::forward`].
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(spectrum.len(), self.n_points);
        let inv_len = 1.0 / self.box_length;
        let mut buf: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k % 2 == 0 {
                    *c * inv_len
                } else {
                    -*c * inv_len
                }
            })
            .collect();
        self.inverse.process(&mut buf);
        buf
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_points", &self.n_points)
            .field("box_length", &self.box_length)
            .finish()
    }
}
