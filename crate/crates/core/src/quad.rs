//! Cached Gauss-Legendre rules on `[-1, 1]`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

fn rule(n: usize) -> Vec<(f64, f64)> {
    let mut pairs = GaussLegendre::new(NonZeroUsize::new(n).expect("positive order"))
        .as_node_weight_pairs()
        .to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Sorted `(node, weight)` pairs of the 5-point rule.
pub(crate) fn legendre5() -> &'static [(f64, f64)] {
    static R: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    R.get_or_init(|| rule(5))
}

/// Sorted `(node, weight)` pairs of the 8-point rule.
pub(crate) fn legendre8() -> &'static [(f64, f64)] {
    static R: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    R.get_or_init(|| rule(8))
}

/// Integral of `f` over `[lo, hi]` with the 5-point rule.
pub(crate) fn gauss5(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (m, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    legendre5()
        .iter()
        .map(|&(x, w)| w * f(m + r * x))
        .sum::<f64>()
        * r
}

/// Integral of `f` over `[lo, hi]` with the 8-point rule.
pub(crate) fn gauss8(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (m, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    legendre8()
        .iter()
        .map(|&(x, w)| w * f(m + r * x))
        .sum::<f64>()
        * r
}

/// Double-exponential quadrature; tolerates integrable endpoint singularities.
pub(crate) fn tanh_sinh(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    quadrature::double_exponential::integrate(f, lo, hi, 1e-15).integral
}
