//! Clamped B-spline bases and spline functions for the infection rate.
//!
//! A basis of degree `d` with `k` interior knots on `[a, b]` has `k + d + 1`
//! functions. Basis indices are zero-based throughout. The extended knot
//! vector repeats each boundary `d + 1` times; degree-0 pieces are half-open
//! `[τᵢ, τᵢ₊₁)` except the last non-empty piece, which also contains `b`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sir::InfectionRate;

/// Boundary and interior knots of a clamped B-spline basis.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    domain: (f64, f64),
    interior: Vec<f64>,
    degree: usize,
    extended: Vec<f64>,
}

impl KnotVector {
    pub fn new(domain: (f64, f64), interior: Vec<f64>, degree: usize) -> Result<Self> {
        let (a, b) = domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid(format!("invalid spline domain [{a}, {b}]")));
        }
        let mut prev = a;
        for &k in &interior {
            if !(k > prev) {
                return Err(invalid("interior knots must be strictly increasing inside the domain"));
            }
            prev = k;
        }
        if !(prev < b) {
            return Err(invalid("interior knots must be strictly inside the domain"));
        }
        let mut extended = vec![a; degree + 1];
        extended.extend_from_slice(&interior);
        extended.extend(std::iter::repeat(b).take(degree + 1));
        Ok(Self {
            domain,
            interior,
            degree,
            extended,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions, `k + d + 1`.
    pub fn num_basis(&self) -> usize {
        self.interior.len() + self.degree + 1
    }

    /// The extended knot vector τ (length `k + 2d + 2`).
    pub fn extended(&self) -> &[f64] {
        &self.extended
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let (a, b) = self.domain;
        if t >= a && t <= b {
            Ok(())
        } else {
            Err(invalid(format!("t = {t} outside spline domain [{a}, {b}]")))
        }
    }

    /// Index `μ` of the degree-0 piece containing `t`: `τ_μ ≤ t < τ_{μ+1}`,
    /// with the right boundary assigned to the last non-empty piece.
    fn span(&self, t: f64) -> usize {
        let d = self.degree;
        let last = self.num_basis() - 1;
        if t >= self.domain.1 {
            return last;
        }
        // Pieces d..=last are the non-empty ones.
        let knots = &self.extended[d + 1..=last];
        d + knots.partition_point(|&k| k <= t)
    }

    fn indicator(&self, i: usize, t: f64) -> f64 {
        let tau = &self.extended;
        if tau[i] <= t && t < tau[i + 1] {
            return 1.0;
        }
        // Closed right end: the last non-empty piece owns `b`.
        if t == self.domain.1 && i == self.num_basis() - 1 {
            return 1.0;
        }
        0.0
    }

    fn cox_de_boor(&self, i: usize, d: usize, t: f64) -> f64 {
        if d == 0 {
            return self.indicator(i, t);
        }
        let tau = &self.extended;
        let left_den = tau[i + d] - tau[i];
        let right_den = tau[i + d + 1] - tau[i + 1];
        let left = if left_den > 0.0 {
            (t - tau[i]) / left_den * self.cox_de_boor(i, d - 1, t)
        } else {
            0.0
        };
        let right = if right_den > 0.0 {
            (tau[i + d + 1] - t) / right_den * self.cox_de_boor(i + 1, d - 1, t)
        } else {
            0.0
        };
        left + right
    }

    /// Value of basis function `index` at `t` via the Cox–de Boor recursion.
    /// Terms with a zero denominator contribute zero.
    pub fn basis_value(&self, index: usize, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        if index >= self.num_basis() {
            return Err(invalid(format!(
                "basis index {index} out of range (basis has {} functions)",
                self.num_basis()
            )));
        }
        Ok(self.cox_de_boor(index, self.degree, t))
    }

    /// The `d + 1` possibly non-zero basis values at `t` and the index of the
    /// first one.
    pub fn local_basis(&self, t: f64) -> Result<(usize, Vec<f64>)> {
        self.check_domain(t)?;
        Ok(self.local_basis_unchecked(t))
    }

    fn local_basis_unchecked(&self, t: f64) -> (usize, Vec<f64>) {
        let d = self.degree;
        let tau = &self.extended;
        let mu = self.span(t);
        let mut values = vec![0.0; d + 1];
        values[0] = 1.0;
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        for j in 1..=d {
            left[j] = t - tau[mu + 1 - j];
            right[j] = tau[mu + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { values[r] / denom } else { 0.0 };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        (mu - d, values)
    }

    /// Basis rows for a fixed set of evaluation times.
    pub fn rows(&self, times: &[f64]) -> Result<BasisRows> {
        let rows = times
            .iter()
            .map(|&t| self.local_basis(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(BasisRows { rows })
    }
}

#[inline]
fn combine(first: usize, values: &[f64], coefficients: &[f64]) -> f64 {
    values
        .iter()
        .zip(&coefficients[first..])
        .fold(0.0, |acc, (v, c)| acc + v * c)
}

/// Precomputed local basis values at fixed times.
///
/// Evaluating a spline through cached rows performs the same arithmetic as
/// [`SplineModel::value`], so both routes agree bit for bit.
#[derive(Debug, Clone)]
pub struct BasisRows {
    rows: Vec<(usize, Vec<f64>)>,
}

impl BasisRows {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn evaluate(&self, coefficients: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(first, v)| combine(*first, v, coefficients))
            .collect()
    }

    /// Dense design matrix, one row per time.
    pub fn dense(&self, num_basis: usize) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|(first, v)| {
                let mut row = vec![0.0; num_basis];
                row[*first..*first + v.len()].copy_from_slice(v);
                row
            })
            .collect()
    }
}

/// A spline function `Σ cᵢ φᵢ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineJson", into = "SplineJson")]
pub struct SplineModel {
    knots: KnotVector,
    coefficients: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SplineJson {
    degree: usize,
    domain: [f64; 2],
    interior_knots: Vec<f64>,
    coefficients: Vec<f64>,
}

impl TryFrom<SplineJson> for SplineModel {
    type Error = crate::Error;

    fn try_from(j: SplineJson) -> Result<Self> {
        let knots = KnotVector::new((j.domain[0], j.domain[1]), j.interior_knots, j.degree)?;
        SplineModel::new(knots, j.coefficients)
    }
}

impl From<SplineModel> for SplineJson {
    fn from(m: SplineModel) -> Self {
        SplineJson {
            degree: m.knots.degree,
            domain: [m.knots.domain.0, m.knots.domain.1],
            interior_knots: m.knots.interior,
            coefficients: m.coefficients,
        }
    }
}

impl SplineModel {
    pub fn new(knots: KnotVector, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != knots.num_basis() {
            return Err(invalid(format!(
                "expected {} coefficients, got {}",
                knots.num_basis(),
                coefficients.len()
            )));
        }
        Ok(Self {
            knots,
            coefficients,
        })
    }

    /// A spline equal to `value` everywhere.
    pub fn constant(knots: KnotVector, value: f64) -> Self {
        let coefficients = vec![value; knots.num_basis()];
        Self {
            knots,
            coefficients,
        }
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Result<Self> {
        SplineModel::new(self.knots.clone(), coefficients)
    }

    /// Spline value at `t`; only the `d + 1` active basis functions are summed.
    pub fn value(&self, t: f64) -> Result<f64> {
        let (first, v) = self.knots.local_basis(t)?;
        Ok(combine(first, &v, &self.coefficients))
    }

    fn value_clamped(&self, t: f64) -> f64 {
        let (a, b) = self.knots.domain;
        let (first, v) = self.knots.local_basis_unchecked(t.clamp(a, b));
        combine(first, &v, &self.coefficients)
    }
}

/// Outside its domain the spline is extended by its boundary values.
impl InfectionRate for SplineModel {
    fn value(&self, t: f64) -> f64 {
        self.value_clamped(t)
    }

    /// Maximum coefficient over the basis functions active on `[a, b]`; a
    /// bound because the basis is a nonnegative partition of unity.
    fn upper_bound(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.knots.domain;
        let first = self.knots.span(a.clamp(lo, hi)) - self.knots.degree;
        let last = self.knots.span(b.clamp(lo, hi));
        self.coefficients[first..=last]
            .iter()
            .fold(f64::NEG_INFINITY, |m, &c| m.max(c))
    }
}
