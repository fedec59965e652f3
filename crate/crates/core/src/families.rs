//! Deterministic density families used by the verification suite.
//!
//! Every stochastic construction takes an explicit seed and draws from a
//! counter-based generator, so a given `(family, seed)` pair produces the
//! same density on every platform and every run.
//!
//! The rotation-group families come in two exactness grades:
//!
//! - *Band-limited*: `1 + u` with `u` a random mean-zero field supported
//!   on levels `1..=l_band`, scaled so a rigorous sup bound keeps the
//!   density positive. These transform exactly on any grid that resolves
//!   their bandwidth, which is what makes strict spectral identity checks
//!   possible.
//! - *Heat kernels*: spectra are diagonal-exponential in each level and
//!   truncated where the propagator falls below the spectral floor; the
//!   synthesized samples carry only that truncation error.

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::harmonic::{
    convolve_spectra, heat_spectrum, DiffusionParams, So3Harmonics, So3Spectrum, MAX_BANDWIDTH,
};
use crate::quadrature::{AxisKind, Grid};
use crate::util::wrap_pi;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Random real band-limited density `1 + u`, `u` supported on levels
/// `1..=l_band`, together with its exact spectrum. `amplitude` (in
/// `(0, 1)`) bounds the sup-norm of `u` through the Frobenius inequality
/// `|u| <= SUM (2l+1)^{3/2} |u_l|_F`, so positivity is guaranteed, not
/// sampled.
pub fn band_limited_rotation_density(
    grid: &Arc<Grid>,
    l_band: usize,
    amplitude: f64,
    seed: u64,
) -> Result<(DensityField, So3Spectrum)> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::Config(format!(
            "amplitude {amplitude} outside (0, 1)"
        )));
    }
    if l_band == 0 || l_band > MAX_BANDWIDTH {
        return Err(Error::BandwidthExceeded {
            requested: l_band,
            max: MAX_BANDWIDTH,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = So3Spectrum::zeros(l_band);
    for l in 1..=l_band {
        let dim = 2 * l + 1;
        let sigma = 1.0 / (dim as f64 * (l + 1) as f64);
        let block = spec.block_mut(l);
        for a in 0..dim {
            for b in 0..dim {
                block[(a, b)] = C64::new(
                    sigma * rng.gen_range(-1.0..1.0),
                    sigma * rng.gen_range(-1.0..1.0),
                );
            }
        }
        // Reality of the synthesized field: u_{mn} = (-1)^{m-n}
        // conj(u_{-m,-n}); indices mirror through the block center.
        for a in 0..dim {
            for b in 0..dim {
                let (pa, pb) = (dim - 1 - a, dim - 1 - b);
                let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                if (a, b) == (pa, pb) {
                    let v = block[(a, b)];
                    block[(a, b)] = C64::new(v.re, 0.0);
                } else if (a, b) < (pa, pb) {
                    block[(pa, pb)] = sign * block[(a, b)].conj();
                }
            }
        }
    }
    let mut bound = 0.0;
    for l in 1..=l_band {
        let dim = (2 * l + 1) as f64;
        bound += dim.powf(1.5) * spec.block(l).norm();
    }
    spec.scale(amplitude / bound);
    spec.block_mut(0)[(0, 0)] = C64::new(1.0, 0.0);
    let ctx = So3Harmonics::new(grid.clone(), l_band)?;
    let field = DensityField::new(grid.clone(), ctx.synthesize(&spec)?)?;
    Ok((field, spec))
}

/// Diffusion density for the given coefficients, with its truncated
/// spectrum. Bandwidth is chosen by the decay of the slowest mode, so
/// small times fail rather than silently truncating.
pub fn rotation_heat_density(
    grid: &Arc<Grid>,
    params: &DiffusionParams,
) -> Result<(DensityField, So3Spectrum)> {
    let spec = heat_spectrum(params)?;
    let ctx = So3Harmonics::new(grid.clone(), spec.l_max())?;
    let field = DensityField::new(grid.clone(), ctx.synthesize(&spec)?)?;
    Ok((field, spec))
}

/// Inversion-symmetric band-limited density `q * q^inv` built from a
/// random band-limited `q`. Its spectrum is `q_l^dagger q_l` per level:
/// Hermitian positive semidefinite blocks, pointwise nonnegative samples,
/// unit mass — all structural, not numerical.
pub fn symmetric_rotation_density(
    grid: &Arc<Grid>,
    l_band: usize,
    amplitude: f64,
    seed: u64,
) -> Result<(DensityField, So3Spectrum)> {
    let (_, qspec) = band_limited_rotation_density(grid, l_band, amplitude, seed)?;
    let spec = convolve_spectra(&qspec, &qspec.inverted());
    let ctx = So3Harmonics::new(grid.clone(), l_band)?;
    let field = DensityField::new(grid.clone(), ctx.synthesize(&spec)?)?;
    Ok((field, spec))
}

/// Heat-kernel density on the circle, sampled from its character series
/// `1 + 2 SUM_k exp(-k^2 t / 2) cos(k theta)` (unit mass against
/// `d theta / 2 pi`). The series is summed until the coefficients fall
/// below 1e-16, so even very small times are representable as long as
/// the grid resolves the resulting width.
pub fn circle_heat_density(grid: &Arc<Grid>, t: f64) -> Result<DensityField> {
    if grid.group() != crate::group::GroupId::So2 {
        return Err(Error::GroupMismatch {
            expected: crate::group::GroupId::So2,
            got: grid.group(),
        });
    }
    if !(t > 0.0) {
        return Err(Error::Config(format!("diffusion time {t} must be positive")));
    }
    DensityField::from_chart_fn(grid.clone(), |q| {
        let mut acc = 1.0;
        let mut k = 1.0f64;
        loop {
            let c = (-k * k * t / 2.0).exp();
            if c < 1e-16 {
                break;
            }
            acc += 2.0 * c * (k * q[0]).cos();
            k += 1.0;
        }
        acc
    })
}

/// Truncated chart-space Gaussian, normalized on the grid. Periodic
/// coordinates use the wrapped difference, so the factor is a smooth
/// circle density as long as `sigma` is well under the half-period.
pub fn chart_gaussian(grid: &Arc<Grid>, center: &[f64], sigma: &[f64]) -> Result<DensityField> {
    let dim = grid.shape().len();
    if center.len() != dim || sigma.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: center.len().max(sigma.len()),
        });
    }
    if sigma.iter().any(|&s| s <= 0.0) {
        return Err(Error::Config("gaussian width must be positive".into()));
    }
    let periodic: Vec<bool> = grid
        .axes()
        .iter()
        .map(|a| a.kind == AxisKind::PeriodicUniform)
        .collect();
    let mut field = DensityField::from_chart_fn(grid.clone(), |q| {
        let mut e = 0.0;
        for i in 0..dim {
            let d = if periodic[i] {
                wrap_pi(q[i] - center[i])
            } else {
                q[i] - center[i]
            };
            e += d * d / (2.0 * sigma[i] * sigma[i]);
        }
        (-e).exp()
    })?;
    field.normalize()?;
    Ok(field)
}

/// Gaussian mixture on the line with closed-form density, score, and
/// convolution — the analytic reference for entropy-power and Fisher
/// checks.
#[derive(Debug, Clone)]
pub struct LineMixture {
    /// `(weight, mean, sigma)` per component; weights sum to 1.
    components: Vec<(f64, f64, f64)>,
}

impl LineMixture {
    pub fn new(mut components: Vec<(f64, f64, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if !(total.is_finite() && total > 0.0)
            || components.iter().any(|&(w, _, s)| w < 0.0 || s <= 0.0)
        {
            return Err(Error::Config("mixture weights/widths invalid".into()));
        }
        for c in &mut components {
            c.0 /= total;
        }
        Ok(Self { components })
    }

    /// Deterministic random mixture: means within `[-1.5, 1.5]`, widths
    /// within `[0.6, 1.3]`.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let components = (0..n.max(1))
            .map(|_| {
                (
                    rng.gen_range(0.2..1.0),
                    rng.gen_range(-1.5..1.5),
                    rng.gen_range(0.6..1.3),
                )
            })
            .collect();
        Self::new(components)
    }

    pub fn components(&self) -> &[(f64, f64, f64)] {
        &self.components
    }

    pub fn density(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, m, s)| {
                let z = (x - m) / s;
                w * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            })
            .sum()
    }

    /// Score `(log f)' = f' / f`, in closed form.
    pub fn score(&self, x: f64) -> f64 {
        let mut f = 0.0;
        let mut fp = 0.0;
        for &(w, m, s) in &self.components {
            let z = (x - m) / s;
            let phi = w * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            f += phi;
            fp += -phi * z / s;
        }
        fp / f
    }

    /// Exact convolution: the componentwise product mixture with summed
    /// means and variances.
    pub fn convolve(&self, other: &LineMixture) -> LineMixture {
        let mut components = Vec::with_capacity(self.components.len() * other.components.len());
        for &(w1, m1, s1) in &self.components {
            for &(w2, m2, s2) in &other.components {
                components.push((w1 * w2, m1 + m2, (s1 * s1 + s2 * s2).sqrt()));
            }
        }
        LineMixture { components }
    }

    /// Sample onto a line grid (not renormalized; tail truncation is the
    /// caller's business via the truncation gate).
    pub fn field(&self, grid: &Arc<Grid>) -> Result<DensityField> {
        DensityField::from_chart_fn(grid.clone(), |q| self.density(q[0]))
    }
}
