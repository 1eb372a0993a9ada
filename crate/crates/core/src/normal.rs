//! Univariate and bivariate normal helpers used by the diffusion likelihood.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::{erfc, erfc_inv};

use crate::quad;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Relative tolerance of the quadrature behind [`quadrant_prob`].
pub const RECTANGLE_REL_TOL: f64 = 1e-8;

/// Standard normal density.
pub fn std_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
pub fn std_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn ln_std_cdf(z: f64) -> f64 {
    if z > -30.0 {
        return std_cdf(z).ln();
    }
    // Asymptotic series of the Mills ratio.
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    -0.5 * z2 - (-z).ln() - LN_SQRT_2PI + series.ln()
}

/// Standard normal quantile function.
pub fn std_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Log density of `N(mean, var)` at `x`.
pub fn ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
}

/// Log density of a bivariate normal. Returns `None` when the covariance
/// is not positive definite.
pub fn ln_pdf_bivariate(x: [f64; 2], mean: [f64; 2], cov: [[f64; 2]; 2]) -> Option<f64> {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    if !(det > 0.0) || !(cov[0][0] > 0.0) {
        return None;
    }
    let d0 = x[0] - mean[0];
    let d1 = x[1] - mean[1];
    let quad = (cov[1][1] * d0 * d0 - 2.0 * cov[0][1] * d0 * d1 + cov[0][0] * d1 * d1) / det;
    Some(-0.5 * quad - 0.5 * det.ln() - 2.0 * LN_SQRT_2PI)
}

/// A censoring half-line: `(-∞, at]` or `[at, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfLine {
    Below(f64),
    Above(f64),
}

impl HalfLine {
    /// Standardized upper limit `z` such that the probability of the half-line
    /// under `N(mean, sd²)` equals `Φ(z)`.
    fn z(self, mean: f64, sd: f64) -> f64 {
        match self {
            HalfLine::Below(at) => (at - mean) / sd,
            HalfLine::Above(at) => (mean - at) / sd,
        }
    }

    /// Probability of the half-line under `N(mean, var)`.
    pub fn prob(self, mean: f64, var: f64) -> f64 {
        std_cdf(self.z(mean, var.sqrt()))
    }

    /// Log probability of the half-line under `N(mean, var)`.
    pub fn ln_prob(self, mean: f64, var: f64) -> f64 {
        ln_std_cdf(self.z(mean, var.sqrt()))
    }
}

/// Probability that a bivariate normal falls in `first × second`, where both
/// factors are half-lines.
///
/// The outer coordinate is integrated in probability space: substituting
/// `x = μ + σ Φ⁻¹(u)` turns the outer integral into a bounded integrand on a
/// finite `u`-interval whose length is the outer marginal probability. The
/// inner factor is the conditional normal tail.
pub fn quadrant_prob(
    first: HalfLine,
    second: HalfLine,
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
) -> Option<f64> {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    if !(det > 0.0) {
        return None;
    }
    // Integrate over the coordinate with the smaller marginal mass.
    let p_first = first.prob(mean[0], cov[0][0]);
    let p_second = second.prob(mean[1], cov[1][1]);
    let (outer, inner, mo, mi, vo, vi, c) = if p_first <= p_second {
        (first, second, mean[0], mean[1], cov[0][0], cov[1][1], cov[0][1])
    } else {
        (second, first, mean[1], mean[0], cov[1][1], cov[0][0], cov[0][1])
    };
    let p_outer = p_first.min(p_second);
    if p_outer == 0.0 {
        return Some(0.0);
    }
    let sd_o = vo.sqrt();
    let slope = c / vo;
    let cond_var = vi - c * c / vo;
    let integrand = |u: f64| {
        let x = mo + sd_o * std_quantile(u);
        inner.prob(mi + slope * (x - mo), cond_var.max(0.0)).min(1.0)
    };
    let (a, b) = match outer {
        HalfLine::Below(at) => (0.0, std_cdf((at - mo) / sd_o)),
        HalfLine::Above(at) => (std_cdf((at - mo) / sd_o), 1.0),
    };
    Some(quad::integrate(integrand, a, b, RECTANGLE_REL_TOL).clamp(0.0, 1.0))
}
