//! Information functionals over grid densities.
//!
//! Entropy and divergence are plain quadratures of the usual integrands
//! (`0 log 0 = 0` throughout). Fisher information comes in two grades:
//! [`fisher_matrix`] differentiates the density itself with the chart
//! finite-difference engine, while [`fisher_from_scores`] accepts
//! externally computed score fields (analytic or spectral) and is exact
//! up to quadrature. The matrix is always taken with respect to the
//! generator basis on the requested side:
//! `F_ij = INT f (X_i log f)(X_j log f)`.

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::group::Side;
use crate::util::neumaier_sum;
use nalgebra::DMatrix;

/// Relative floor under which a density sample counts as zero support.
const SUPPORT_FLOOR: f64 = 1e-12;

/// Mass of the first argument allowed outside the second's support before
/// a divergence is declared undefined.
const SUPPORT_MASS_LIMIT: f64 = 1e-9;

/// Differential entropy `-INT f log f` against the grid measure.
pub fn entropy(f: &DensityField) -> f64 {
    let w = f.grid().weights();
    neumaier_sum(f.values().iter().zip(w).map(|(&v, &wi)| {
        if v > 0.0 {
            -wi * v * v.ln()
        } else {
            0.0
        }
    }))
}

/// Kullback-Leibler divergence `INT f log(f/g)`.
///
/// `g` is floored at a tiny fraction of its peak to keep the integrand
/// finite; if more than [`SUPPORT_MASS_LIMIT`] of `f`-mass sits where `g`
/// is below that floor, the divergence is reported as a support violation
/// instead of a number.
pub fn kl_divergence(f: &DensityField, g: &DensityField) -> Result<f64> {
    if f.grid().spec() != g.grid().spec() {
        return Err(Error::GridMismatch {
            what: "divergence needs a shared grid",
        });
    }
    let w = f.grid().weights();
    let gpeak = g.values().iter().fold(0.0f64, |a, &v| a.max(v));
    let floor = SUPPORT_FLOOR * gpeak;
    let mut violation = 0.0;
    let mut terms = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let (fv, gv) = (f.values()[i], g.values()[i]);
        if fv <= 0.0 {
            continue;
        }
        if gv < floor {
            violation += w[i] * fv;
        }
        terms.push(w[i] * fv * (fv / gv.max(floor)).ln());
    }
    if violation > SUPPORT_MASS_LIMIT {
        return Err(Error::SupportViolation { mass: violation });
    }
    Ok(neumaier_sum(terms.into_iter()))
}

/// Fisher information matrix by finite differences of the density:
/// scores are `(X_i f)/f` from the chart-space derivative engine.
/// Engine-grade accuracy; use [`fisher_from_scores`] with exact scores
/// when the family provides them.
pub fn fisher_matrix(f: &DensityField, side: Side) -> Result<DMatrix<f64>> {
    let dim = f.grid().group().dim();
    let mut scores = Vec::with_capacity(dim);
    let peak = f.values().iter().fold(0.0f64, |a, &v| a.max(v));
    let floor = SUPPORT_FLOOR * peak;
    for i in 0..dim {
        let df = f.lie_derivative(i, side)?;
        let s: Vec<f64> = df
            .values()
            .iter()
            .zip(f.values())
            .map(|(&d, &v)| if v > floor { d / v } else { 0.0 })
            .collect();
        scores.push(s);
    }
    fisher_from_scores(f, &scores)
}

/// Fisher information matrix from caller-supplied score fields
/// `s_i = X_i log f` sampled on the grid: `F_ij = SUM w f s_i s_j`.
pub fn fisher_from_scores(f: &DensityField, scores: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let dim = f.grid().group().dim();
    if scores.len() != dim || scores.iter().any(|s| s.len() != f.grid().len()) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: scores.len(),
        });
    }
    let w = f.grid().weights();
    let mut out = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = neumaier_sum(
                (0..w.len()).map(|k| w[k] * f.values()[k] * scores[i][k] * scores[j][k]),
            );
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Fisher matrix under an orthogonal change of the generator basis,
/// `F -> A F A^T`. Non-orthogonal changes would silently rescale the
/// information and break every trace comparison, so they are rejected.
pub fn fisher_basis_change(f: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.nrows(),
        });
    }
    let residual = (a * a.transpose() - DMatrix::identity(n, n)).norm();
    const TOL: f64 = 1e-10;
    if residual > TOL {
        return Err(Error::NotOrthogonal { residual, tol: TOL });
    }
    Ok(a * f * a.transpose())
}

/// Entropy power `exp(2 S / n) / (2 pi e)` for an `n`-dimensional group,
/// with the Euclidean constant: the unit Gaussian on the line has power
/// one. This is the version the log-Sobolev bound on the line uses.
pub fn entropy_power(entropy: f64, dim: usize) -> f64 {
    (2.0 * entropy / dim as f64).exp() / (2.0 * std::f64::consts::PI * std::f64::consts::E)
}

/// Entropy power normalized so the uniform density on a compact group has
/// power one: `exp(2 S / n)`. Differs from [`entropy_power`] by the
/// constant `2 pi e`; the convolution counterexample on the rotation
/// group is stated in this normalization.
pub fn compact_entropy_power(entropy: f64, dim: usize) -> f64 {
    (2.0 * entropy / dim as f64).exp()
}

/// Mass of `f` sitting at or below the support floor `1e-12 * max f` —
/// the share of the density a score computation had to clamp. Large
/// values mean Fisher/divergence outputs are dominated by the floor, not
/// the data; the suite attaches a warning above 1% of mass.
pub fn low_support_mass(f: &DensityField) -> f64 {
    let peak = f.values().iter().fold(0.0f64, |a, &v| a.max(v));
    let floor = SUPPORT_FLOOR * peak;
    neumaier_sum(
        f.values()
            .iter()
            .zip(f.grid().weights())
            .filter(|(&v, _)| v <= floor)
            .map(|(&v, &w)| w * v.max(0.0)),
    )
}

/// Fisher-information distance `INT ||s1 - s2||^2 f1 dg` between the
/// right-derivative score fields of two densities on one grid. Not
/// symmetric in its arguments: `f1` is the averaging measure. Against the
/// uniform density the second score vanishes and the distance collapses
/// to `tr F^r(f1)`.
pub fn fisher_distance(f1: &DensityField, f2: &DensityField) -> Result<f64> {
    if f1.grid().spec() != f2.grid().spec() {
        return Err(Error::GridMismatch {
            what: "score comparison needs a shared grid",
        });
    }
    let dim = f1.grid().group().dim();
    let score_fields = |f: &DensityField| -> Result<Vec<Vec<f64>>> {
        let peak = f.values().iter().fold(0.0f64, |a, &v| a.max(v));
        let floor = SUPPORT_FLOOR * peak;
        (0..dim)
            .map(|i| {
                let df = f.lie_derivative(i, Side::Right)?;
                Ok(df
                    .values()
                    .iter()
                    .zip(f.values())
                    .map(|(&d, &v)| if v > floor { d / v } else { 0.0 })
                    .collect())
            })
            .collect()
    };
    let s1 = score_fields(f1)?;
    let s2 = score_fields(f2)?;
    let w = f1.grid().weights();
    Ok(neumaier_sum((0..w.len()).map(|k| {
        let mut q = 0.0;
        for i in 0..dim {
            let d = s1[i][k] - s2[i][k];
            q += d * d;
        }
        w[k] * f1.values()[k] * q
    })))
}
