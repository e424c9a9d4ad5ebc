//! `d^k/dxi^k (psi f^)` two ways: the Leibniz / Faa di Bruno expansion in
//! `xi_derivative(f, j)` and closed-form derivatives of
//! `psi = exp(-i t xi |xi|^{1+a})`, against a Cauchy-integral evaluation of
//! the analytic continuation of `psi f^` off the real axis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::Field;
use crate::spectral::{xi_derivative, MAX_XI_DERIVATIVE};

const CONTOUR_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub k: usize,
    pub t: f64,
    pub a: f64,
    /// `max |lhs - rhs| / max |lhs|` over the tested wavenumbers.
    pub residual: f64,
    pub worst_xi: f64,
    pub points: usize,
}

/// `omega^{(j)}(xi)` for `omega = xi |xi|^{1+a} = sgn(xi) |xi|^{2+a}`.
fn omega_derivative(xi: f64, a: f64, j: usize) -> f64 {
    let falling: f64 = (0..j).map(|i| 2.0 + a - i as f64).product();
    let sign = if j % 2 == 0 { xi.signum() } else { 1.0 };
    falling * sign * xi.abs().powf(2.0 + a - j as f64)
}

/// `psi, psi', ..., psi^{(m)}` at `xi != 0`, through complete Bell
/// polynomials in the derivatives of `-i t omega`.
pub fn psi_derivatives(xi: f64, t: f64, a: f64, m: usize) -> Vec<Complex64> {
    let psi = Complex64::from_polar(1.0, -t * omega_derivative(xi, a, 0));
    let phase: Vec<Complex64> = (1..=m)
        .map(|j| Complex64::new(0.0, -t * omega_derivative(xi, a, j)))
        .collect();
    let mut bell = vec![Complex64::new(1.0, 0.0)];
    for n in 0..m {
        let mut next = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            next += binomial(n, i) * bell[n - i] * phase[i];
        }
        bell.push(next);
    }
    bell.into_iter().map(|y| psi * y).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Residual of the expansion of `d^k (psi f^)` on `4 dxi <= |xi| <= (2/3) xi_max`.
pub fn expansion_check(f: &Field, t: f64, a: f64, k: usize) -> Result<ExpansionReport> {
    if !(1..=MAX_XI_DERIVATIVE).contains(&k) {
        return Err(invalid("k", format!("must be in 1..=5, got {k}")));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(invalid("a", format!("must lie in [0, 1], got {a}")));
    }
    if !t.is_finite() {
        return Err(invalid("t", "must be finite"));
    }
    let g = f.grid();
    let derivs: Vec<Vec<Complex64>> = (0..=k)
        .map(|j| xi_derivative(f, j))
        .collect::<Result<_>>()?;
    let dxi = g.xi_spacing();
    let (lo, hi) = (4.0 * dxi, 2.0 / 3.0 * g.xi_max());
    let terms: Vec<(f64, f64)> = g
        .nodes()
        .iter()
        .zip(f.samples())
        .filter(|(_, v)| **v != 0.0)
        .map(|(x, v)| (*x, g.spacing() * v))
        .collect();
    let indices: Vec<usize> = (0..g.n_points())
        .filter(|&i| {
            let xi = g.wavenumbers()[i].abs();
            xi >= lo - 1e-12 && xi <= hi
        })
        .collect();

    let pairs: Vec<(f64, Complex64, Complex64)> = indices
        .par_iter()
        .map(|&i| {
            let xi = g.wavenumbers()[i];
            let psi = psi_derivatives(xi, t, a, k);
            let rhs: Complex64 = (0..=k)
                .map(|j| binomial(k, j) * psi[k - j] * derivs[j][i])
                .sum();
            (xi, contour_derivative(&terms, xi, t, a, k), rhs)
        })
        .collect();
    let scale = pairs.iter().map(|p| p.1.norm()).fold(0.0, f64::max);
    let (worst_xi, worst) = pairs
        .iter()
        .map(|(xi, l, r)| (*xi, (l - r).norm()))
        .fold((0.0, 0.0), |acc, p| if p.1 > acc.1 { p } else { acc });
    Ok(ExpansionReport {
        k,
        t,
        a,
        residual: if scale > 0.0 { worst / scale } else { worst },
        worst_xi,
        points: pairs.len(),
    })
}

/// `k`-th derivative at `xi0` of `psi(z) sum_j c_j exp(-i x_j z)` by the
/// trapezoid rule on a circle. The radius stays below `|xi0| / 2` (branch
/// point of `|xi|^{1+a}` at 0) and below the local phase scale so that
/// `|psi|` stays O(1) on the contour.
fn contour_derivative(terms: &[(f64, f64)], xi0: f64, t: f64, a: f64, k: usize) -> Complex64 {
    let speed = t.abs() * (2.0 + a) * xi0.abs().powf(1.0 + a);
    let extent = terms
        .iter()
        .map(|(x, _)| x.abs())
        .fold(0.0, f64::max)
        .min(8.0);
    let rho = (0.5 * xi0.abs())
        .min(1.0 / (1.0 + speed))
        .min(1.0 / (1.0 + extent));
    let sign = xi0.signum();
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..CONTOUR_NODES {
        let angle = 2.0 * PI * m as f64 / CONTOUR_NODES as f64;
        let dz = Complex64::from_polar(rho, angle);
        let z = xi0 + dz;
        // omega(z) = sgn * (sgn z)^{2+a} on the half plane of xi0
        let omega = sign * (sign * z).powf(2.0 + a);
        let psi = (Complex64::new(0.0, -t) * omega).exp();
        let fhat: Complex64 = terms
            .iter()
            .map(|(x, c)| c * (Complex64::new(0.0, -x) * z).exp())
            .sum();
        acc += psi * fhat * Complex64::from_polar(1.0, -(k as f64) * angle);
    }
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    acc * factorial / (CONTOUR_NODES as f64 * rho.powi(k as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;

    #[test]
    fn psi_derivatives_match_finite_differences() {
        let (t, a) = (0.7, 0.5);
        for xi in [-1.3, 0.4, 2.0] {
            let d = psi_derivatives(xi, t, a, 2);
            let p = |x: f64| psi_derivatives(x, t, a, 0)[0];
            let h = 1e-4;
            let d1 = (p(xi + h) - p(xi - h)) / (2.0 * h);
            let h = 1e-3;
            let d2 = (p(xi + h) - 2.0 * p(xi) + p(xi - h)) / (h * h);
            assert!((d[1] - d1).norm() < 1e-6 * (1.0 + d[1].norm()));
            assert!((d[2] - d2).norm() < 1e-4 * (1.0 + d[2].norm()));
        }
    }

    #[test]
    fn omega_derivatives_carry_signs() {
        let a = 0.25;
        assert_relative_eq!(omega_derivative(-2.0, a, 0), -(2.0f64).powf(2.25));
        assert_relative_eq!(omega_derivative(-2.0, a, 1), 2.25 * 2.0f64.powf(1.25));
        assert_relative_eq!(
            omega_derivative(-2.0, a, 2),
            -2.25 * 1.25 * 2.0f64.powf(0.25)
        );
    }

    #[test]
    fn rejects_out_of_range_order() {
        let u = Field::from_fn(make_grid(64, 20.0).unwrap(), |x| (-x * x).exp()).unwrap();
        assert!(expansion_check(&u, 1.0, 0.5, 0).is_err());
        assert!(expansion_check(&u, 1.0, 0.5, 6).is_err());
    }

    #[test]
    fn zero_time_collapses_to_xi_derivatives() {
        let u = Field::from_fn(make_grid(512, 60.0).unwrap(), |x| (-x * x).exp()).unwrap();
        for k in 1..=5 {
            let r = expansion_check(&u, 0.0, 0.5, k).unwrap();
            assert!(r.residual <= 1e-8, "k={k}: {}", r.residual);
        }
    }

    #[test]
    fn second_derivative_at_unit_time() {
        let u = Field::from_fn(make_grid(512, 60.0).unwrap(), |x| (-x * x).exp()).unwrap();
        let r = expansion_check(&u, 1.0, 0.5, 2).unwrap();
        assert!(r.residual <= 1e-6, "{}", r.residual);
    }
}
