//! Behaviour of `D^theta(|xi|^alpha chi)` near zero and at infinity, its
//! L2 membership, and the pointwise bound for `D^b` of the free phase.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_order, stein_derivative_at, FarField, PointwiseQuadrature};
use crate::error::{invalid, Result};
use crate::quad::tanh_sinh;

const SMALL_WINDOW: (f64, f64) = (1e-3, 1e-2);
const TAIL_WINDOW: (f64, f64) = (1e2, 1e3);
const FIT_POINTS: usize = 9;
/// Innermost cutoff of the L2 refinement ladder.
const LADDER_START: f64 = 1e-4;

/// Cutoff equal to 1 on `|xi| <= 1`, 0 on `|xi| >= 2`, C2 quintic in between.
pub fn chi(xi: f64) -> f64 {
    let s = (xi.abs() - 1.0).clamp(0.0, 1.0);
    1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn profile(alpha: f64, signed: bool) -> impl Fn(f64) -> Complex64 + Sync {
    move |xi: f64| {
        if xi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let s = if signed { xi.signum() } else { 1.0 };
        Complex64::new(s * xi.abs().powf(alpha) * chi(xi), 0.0)
    }
}

/// `D^theta(|xi|^alpha chi)(eta)`, optionally with an extra `sgn(xi)`.
fn dstein_point(alpha: f64, theta: f64, signed: bool, eta: f64) -> Result<f64> {
    let f = profile(alpha, signed);
    let zero = Complex64::new(0.0, 0.0);
    let reach = 2.5f64.max(eta.abs() + 1.0);
    let q = PointwiseQuadrature {
        breaks: &[-2.0, -1.0, 0.0, 1.0, 2.0],
        window: (-reach, reach),
        far: FarField::Constant {
            left: zero,
            right: zero,
        },
        max_piece: &|_| f64::INFINITY,
    };
    stein_derivative_at(&f, eta, theta, &q)
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |a, (x, y)| (a.0 + x, a.1 + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |a, (x, y)| {
        (a.0 + (x - mx) * (y - my), a.1 + (x - mx) * (x - mx))
    });
    num / den
}

fn log_slope(alpha: f64, theta: f64, signed: bool, window: (f64, f64)) -> Result<f64> {
    let (l0, l1) = (window.0.ln(), window.1.ln());
    let pts = (0..FIT_POINTS)
        .into_par_iter()
        .map(|i| {
            let eta = (l0 + (l1 - l0) * i as f64 / (FIT_POINTS - 1) as f64).exp();
            Ok((eta.ln(), dstein_point(alpha, theta, signed, eta)?.ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_slope(&pts))
}

/// Squared L2 norm of `D^theta(|xi|^alpha chi)` on `|eta| >= delta`,
/// approximated on three cutoffs `delta, delta/2, delta/4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Ladder {
    pub cutoffs: [f64; 3],
    pub norms_sq: [f64; 3],
    /// `log2` of the ratio of successive increments; finite iff positive.
    pub increment_exponent: f64,
    pub finite: bool,
    /// Extrapolated `||D^theta(...)||` when finite.
    pub norm: Option<f64>,
}

fn squared_integral(alpha: f64, theta: f64, signed: bool, lo: f64, hi: f64) -> f64 {
    let g = |eta: f64| {
        dstein_point(alpha, theta, signed, eta)
            .map(|d| d * d)
            .unwrap_or(f64::NAN)
    };
    2.0 * tanh_sinh(lo, hi, g)
}

pub fn l2_ladder(alpha: f64, theta: f64, signed: bool, delta: f64) -> Result<L2Ladder> {
    check_order(theta)?;
    if !(alpha > -0.5) {
        return Err(invalid(
            "alpha",
            "must exceed -1/2 for a locally square-integrable profile",
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", "must lie in (0, 1)"));
    }
    let pieces = [(delta, 1.0), (1.0, 2.0), (2.0, 4.0)];
    let outer = pieces
        .par_iter()
        .map(|&(lo, hi)| squared_integral(alpha, theta, signed, lo, hi))
        .collect::<Vec<f64>>()
        .iter()
        .sum::<f64>();
    // [4, inf) through eta = 4 / s
    let far = 2.0
        * tanh_sinh(0.0, 1.0, |s: f64| {
            let eta = 4.0 / s;
            dstein_point(alpha, theta, signed, eta)
                .map(|d| d * d * 4.0 / (s * s))
                .unwrap_or(f64::NAN)
        });
    let inc1 = squared_integral(alpha, theta, signed, 0.5 * delta, delta);
    let inc2 = squared_integral(alpha, theta, signed, 0.25 * delta, 0.5 * delta);
    let n0 = outer + far;
    let norms_sq = [n0, n0 + inc1, n0 + inc1 + inc2];
    let exponent = (inc1 / inc2).log2();
    let finite = exponent > 0.0;
    let norm = finite.then(|| {
        let r = 2f64.powf(-exponent);
        (norms_sq[2] + inc2 * r / (1.0 - r)).sqrt()
    });
    Ok(L2Ladder {
        cutoffs: [delta, 0.5 * delta, 0.25 * delta],
        norms_sq,
        increment_exponent: exponent,
        finite,
        norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsteinReport {
    pub alpha: f64,
    pub theta: f64,
    pub signed: bool,
    /// Log-log slope on `|eta| in [1e-3, 1e-2]`; only fitted when `alpha < theta`.
    pub small_eta_slope: Option<f64>,
    /// Log-log slope on `|eta| in [1e2, 1e3]`.
    pub tail_slope: f64,
    pub ladder: L2Ladder,
}

pub fn dstein_asymptotics(alpha: f64, theta: f64, signed: bool) -> Result<DsteinReport> {
    check_order(theta)?;
    let small_eta_slope = if alpha < theta {
        Some(log_slope(alpha, theta, signed, SMALL_WINDOW)?)
    } else {
        None
    };
    Ok(DsteinReport {
        alpha,
        theta,
        signed,
        small_eta_slope,
        tail_slope: log_slope(alpha, theta, signed, TAIL_WINDOW)?,
        ladder: l2_ladder(alpha, theta, signed, LADDER_START)?,
    })
}

/// `t^{b/(2+a)} + t^b |x|^{(1+a) b}`.
pub fn phase_envelope(t: f64, x: f64, a: f64, b: f64) -> f64 {
    t.powf(b / (2.0 + a)) + t.powf(b) * x.abs().powf((1.0 + a) * b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub t: f64,
    pub x: f64,
    pub value: f64,
    pub envelope: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundReport {
    pub a: f64,
    pub b: f64,
    pub samples: Vec<PhaseSample>,
    /// Smallest constant bounding every sampled ratio.
    pub constant: f64,
}

/// Distance beyond which `|e^{i phi(x)} - e^{i phi(y)}|^2` is replaced by
/// its mean 2: at least 40, and far enough that the phase has turned ~1000 times.
fn phase_reach(t: f64, a: f64) -> f64 {
    40f64.max((1000.0 / t).powf(1.0 / (2.0 + a)))
}

/// `D^b(exp(-i t x |x|^{1+a}))` over the sampled `(t, x)` set, against
/// [`phase_envelope`].
pub fn pointwise_phase_bound(ts: &[f64], xs: &[f64], a: f64, b: f64) -> Result<PhaseBoundReport> {
    check_order(b)?;
    if !(0.0..=1.0).contains(&a) {
        return Err(invalid("a", format!("must lie in [0, 1], got {a}")));
    }
    if ts.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("t", "all times must be positive"));
    }
    let jobs: Vec<(f64, f64)> = ts
        .iter()
        .flat_map(|&t| xs.iter().map(move |&x| (t, x)))
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(t, x)| {
            let phase = move |y: f64| Complex64::from_polar(1.0, -t * y * y.abs().powf(1.0 + a));
            let piece = move |y: f64| 1.0 / (1.0 + t * (2.0 + a) * y.abs().powf(1.0 + a));
            let q = PointwiseQuadrature {
                breaks: &[0.0],
                window: (x - phase_reach(t, a), x + phase_reach(t, a)),
                far: FarField::MeanSquare(2.0),
                max_piece: &piece,
            };
            let value = stein_derivative_at(&phase, x, b, &q)?;
            let envelope = phase_envelope(t, x, a, b);
            Ok(PhaseSample {
                t,
                x,
                value,
                envelope,
                ratio: value / envelope,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let constant = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(PhaseBoundReport {
        a,
        b,
        samples,
        constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_shape() {
        assert_eq!(chi(0.3), 1.0);
        assert_eq!(chi(-1.0), 1.0);
        assert_eq!(chi(2.0), 0.0);
        assert_eq!(chi(-7.0), 0.0);
        assert!((chi(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_eta_slope_is_alpha_minus_theta() {
        let s = log_slope(0.3, 0.7, false, SMALL_WINDOW).unwrap();
        assert!((s + 0.4).abs() < 0.05, "{s}");
        let s = log_slope(0.3, 0.7, true, SMALL_WINDOW).unwrap();
        assert!((s + 0.4).abs() < 0.05, "{s}");
    }

    #[test]
    fn tail_slope() {
        for theta in [0.25, 0.4, 0.7] {
            let s = log_slope(0.3, theta, false, TAIL_WINDOW).unwrap();
            assert!((s + 0.5 + theta).abs() < 0.05, "theta {theta}: {s}");
        }
    }

    #[test]
    fn l2_membership_flips_at_alpha_plus_half() {
        let below = l2_ladder(0.3, 0.75, false, LADDER_START).unwrap();
        let above = l2_ladder(0.3, 0.85, false, LADDER_START).unwrap();
        assert!(below.finite && below.norm.is_some(), "{below:?}");
        assert!(!above.finite, "{above:?}");
    }

    #[test]
    fn endpoint_example_is_stable_under_refinement() {
        let coarse = l2_ladder(-0.1, 0.3, false, LADDER_START).unwrap();
        let fine = l2_ladder(-0.1, 0.3, false, 0.5 * LADDER_START).unwrap();
        let (c, f) = (coarse.norm.unwrap(), fine.norm.unwrap());
        assert!((c - f).abs() / f < 0.05, "{c} vs {f}");
    }

    #[test]
    fn envelope_scaling_at_origin() {
        let (a, b) = (0.5, 0.5);
        let r = phase_envelope(2.0, 0.0, a, b) / phase_envelope(1.0, 0.0, a, b);
        assert!((r - 2f64.powf(b / (2.0 + a))).abs() < 1e-14);
    }

    #[test]
    fn phase_derivative_vanishes_as_time_shrinks() {
        let r = pointwise_phase_bound(&[1e-4, 1e-8], &[0.0], 0.5, 0.5).unwrap();
        let (big, small) = (r.samples[0].value, r.samples[1].value);
        assert!(small < big / 5.0 && small < 0.1, "{big} {small}");
    }

    #[test]
    fn phase_ratio_is_scale_free_at_origin() {
        let r = pointwise_phase_bound(&[0.1, 1.0, 10.0], &[0.0], 0.5, 0.5).unwrap();
        let ratios: Vec<f64> = r.samples.iter().map(|s| s.ratio).collect();
        for w in ratios.windows(2) {
            assert!((w[0] - w[1]).abs() / w[1] < 0.02, "{ratios:?}");
        }
    }
}
