//! Noncommutative Fourier analysis on the rotation group.
//!
//! Representation convention, fixed operationally and enforced by tests:
//! with `(a, b, c)` the z-y-z angles of `g`,
//!
//! `U(g, l)_{mn} = e^{i m a} d^l_{mn}(b) e^{i n c}`,  `m, n = -l .. l`,
//!
//! so `U(R_z(t), 1) = diag(e^{-it}, 1, e^{it})` and `U` is a unitary
//! homomorphism. Coefficients are `fhat(l) = INT f(g) U(g^-1, l) dg`,
//! synthesis is `f(g) = SUM_l (2l+1) tr(fhat(l) U(g, l))`. z-x-z chart
//! nodes convert exactly: `(a, b, c) = (alpha - pi/2, beta, gamma + pi/2)`.
//!
//! Identities the rest of the crate leans on (each one pinned by a test):
//!
//! - shift:      `f(h^-1 g)  <->  fhat U(h^-1)`,   `f(g h) <-> U(h) fhat`
//! - inversion:  `f(g^-1)    <->  fhat^H`
//! - derivative: right `u(X_i) fhat`, left `-fhat u(X_i)`
//! - convolution `(f1 * f2)^ = fhat_2 fhat_1` (note the order swap)
//! - Plancherel: `INT |f|^2 = SUM_l (2l+1) ||fhat(l)||_F^2`
//!
//! The forward transform on an `n_a x n_b x n_a` grid is exact for
//! band-limited inputs up to `min(n_a/2 - 1, n_b - 1)`; requesting more
//! is refused rather than silently aliased. Synthesis has no such limit
//! (it is plain evaluation), which is how heat kernels with wider spectra
//! are still rendered exactly on coarse grids.

pub mod wigner;

pub use wigner::{d_matrices, k_generator, MAX_BANDWIDTH};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupId};
use crate::quadrature::Grid;
use crate::util::{expm_c, neumaier_sum};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::sync::Arc;

/// Spectral tail below this is treated as numerically absent (band
/// occupancy, heat-kernel truncation).
pub const SPECTRAL_FLOOR: f64 = 1e-12;

/// A spectrum block is counted as occupied when its Frobenius norm
/// exceeds this. The dispersion functionals sum `-log` of block norms,
/// which diverges on exact zeros; the floor stands in for the exact
/// step function the discretization cannot honor.
pub const BLOCK_OCCUPANCY_FLOOR: f64 = 1e-13;

/// Synthesized samples whose imaginary residue exceeds this (relative to
/// the field scale) indicate a spectrum that is not the transform of a
/// real function; synthesis refuses instead of silently projecting.
pub const SYNTHESIS_IMAG_TOL: f64 = 1e-9;

/// Matrix Fourier coefficients `fhat(0..=l_max)` of a function on the
/// rotation group.
#[derive(Debug, Clone, PartialEq)]
pub struct So3Spectrum {
    blocks: Vec<DMatrix<C64>>,
}

impl So3Spectrum {
    pub fn zeros(l_max: usize) -> Self {
        Self {
            blocks: (0..=l_max)
                .map(|l| DMatrix::zeros(2 * l + 1, 2 * l + 1))
                .collect(),
        }
    }

    pub fn l_max(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn block(&self, l: usize) -> &DMatrix<C64> {
        &self.blocks[l]
    }

    pub fn block_mut(&mut self, l: usize) -> &mut DMatrix<C64> {
        &mut self.blocks[l]
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    /// Entry `fhat(l)_{mn}` with signed indices.
    pub fn entry(&self, l: usize, m: i64, n: i64) -> C64 {
        let li = l as i64;
        self.blocks[l][((m + li) as usize, (n + li) as usize)]
    }

    /// Total mass `INT f dg` (the trivial-block coefficient).
    pub fn mass(&self) -> C64 {
        self.blocks[0][(0, 0)]
    }

    /// Plancherel power `SUM_l (2l+1) ||fhat(l)||_F^2`.
    pub fn power(&self) -> f64 {
        neumaier_sum(self.blocks.iter().enumerate().map(|(l, b)| {
            (2 * l + 1) as f64 * b.iter().map(|z| z.norm_sqr()).sum::<f64>()
        }))
    }

    /// Frobenius norm squared of one block.
    pub fn block_power(&self, l: usize) -> f64 {
        self.blocks[l].iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.blocks {
            *b *= C64::new(s, 0.0);
        }
    }

    /// Spectrum of `g -> f(g^-1)`.
    pub fn inverted(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    /// Copy truncated or zero-padded to a new bandwidth.
    pub fn resized(&self, l_max: usize) -> Self {
        let mut out = Self::zeros(l_max);
        for l in 0..=l_max.min(self.l_max()) {
            out.blocks[l] = self.blocks[l].clone();
        }
        out
    }

    /// Max deviation from the symmetry satisfied by spectra of real
    /// functions: `fhat_{mn} = (-1)^{m-n} conj(fhat_{-m,-n})`.
    pub fn reality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (l, b) in self.blocks.iter().enumerate() {
            let li = l as i64;
            for m in -li..=li {
                for n in -li..=li {
                    let a = b[((m + li) as usize, (n + li) as usize)];
                    let c = b[((li - m) as usize, (li - n) as usize)].conj();
                    let sign = if (m - n) % 2 == 0 { 1.0 } else { -1.0 };
                    worst = worst.max((a - c * sign).norm());
                }
            }
        }
        worst
    }
}

/// z-y-z angles of a rotation, `b` in `[0, pi]`; at gimbal configurations
/// the free combination is stored in `a`.
pub fn zyz_angles(g: &GroupElement) -> (f64, f64, f64) {
    let m = g.matrix();
    let sb = (m[(0, 2)] * m[(0, 2)] + m[(1, 2)] * m[(1, 2)]).sqrt();
    if sb < 1e-12 {
        if m[(2, 2)] > 0.0 {
            (m[(1, 0)].atan2(m[(0, 0)]), 0.0, 0.0)
        } else {
            // R = Rz(a) Ry(pi) Rz(c) = Rz(a - c) Ry(pi).
            let p = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]);
            let r = m * p; // Ry(pi)^-1 = Ry(pi) = diag(-1, 1, -1)
            (r[(1, 0)].atan2(r[(0, 0)]), std::f64::consts::PI, 0.0)
        }
    } else {
        (
            m[(1, 2)].atan2(m[(0, 2)]),
            sb.atan2(m[(2, 2)]),
            m[(2, 1)].atan2(-m[(2, 0)]),
        )
    }
}

/// Representation matrices `U(g, l)` for `l = 0..=l_max`.
pub fn wigner_u(l_max: usize, g: &GroupElement) -> Vec<DMatrix<C64>> {
    assert_eq!(g.group(), GroupId::So3);
    let (a, b, c) = zyz_angles(g);
    let ds = d_matrices(l_max, b);
    (0..=l_max)
        .map(|l| {
            let li = l as i64;
            DMatrix::from_fn(2 * l + 1, 2 * l + 1, |r, s| {
                let m = r as i64 - li;
                let n = s as i64 - li;
                C64::from_polar(1.0, m as f64 * a + n as f64 * c) * ds[l][(r, s)]
            })
        })
        .collect()
}

/// Representation derivatives `u(X_i) = d/dt U(exp(t X_i))` at `t = 0`,
/// for the three rotation generators. Skew-Hermitian; their squares sum
/// to `-l(l+1) I` (the Casimir).
pub fn u_generators(l: usize) -> [DMatrix<C64>; 3] {
    let sz = 2 * l + 1;
    let li = l as i64;
    let mut u1 = DMatrix::<C64>::zeros(sz, sz);
    let mut u2 = DMatrix::<C64>::zeros(sz, sz);
    let mut u3 = DMatrix::<C64>::zeros(sz, sz);
    for m in -li..=li {
        let r = (m + li) as usize;
        u3[(r, r)] = C64::new(0.0, m as f64);
        if m < li {
            let cp = (((li - m) * (li + m + 1)) as f64).sqrt();
            // Raising entry (m+1 <- m) and its transpose partner.
            u1[(r + 1, r)] = C64::new(0.0, cp / 2.0);
            u1[(r, r + 1)] = C64::new(0.0, cp / 2.0);
            u2[(r + 1, r)] = C64::new(-cp / 2.0, 0.0);
            u2[(r, r + 1)] = C64::new(cp / 2.0, 0.0);
        }
    }
    [u1, u2, u3]
}

/// Largest degree a forward transform on this grid recovers exactly for
/// band-limited input: `min(n_azimuthal / 2 - 1, n_polar - 1)`, capped.
pub fn grid_bandwidth(grid: &Grid) -> usize {
    let s = grid.shape();
    ((s[0] / 2).saturating_sub(1))
        .min(s[1].saturating_sub(1))
        .min(MAX_BANDWIDTH)
}

/// Cached transform context for one rotation grid: little-d tables at the
/// polar nodes plus azimuthal phase tables.
pub struct So3Harmonics {
    grid: Arc<Grid>,
    l_max: usize,
    /// d[j][l] at polar node j.
    d: Vec<Vec<DMatrix<f64>>>,
    /// ea[i][n + l_max] = exp(-i n a_i), z-y-z first angle at node i.
    ea: Vec<Vec<C64>>,
    /// eg[k][m + l_max] = exp(-i m c_k).
    eg: Vec<Vec<C64>>,
}

impl So3Harmonics {
    /// `l_max` bounds the spectra this context can synthesize; forward
    /// transforms additionally require `l_max <= grid_bandwidth(grid)`.
    pub fn new(grid: Arc<Grid>, l_max: usize) -> Result<Self> {
        if grid.group() != GroupId::So3 {
            return Err(Error::GridMismatch { what: "rotation-group grid required" });
        }
        if l_max > MAX_BANDWIDTH {
            return Err(Error::BandwidthExceeded {
                requested: l_max,
                max: MAX_BANDWIDTH,
            });
        }
        let axes = grid.axes();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let phases = |nodes: &[f64], shift: f64| -> Vec<Vec<C64>> {
            nodes
                .iter()
                .map(|&x| {
                    let t = x + shift;
                    (-(l_max as i64)..=l_max as i64)
                        .map(|n| C64::from_polar(1.0, -(n as f64) * t))
                        .collect()
                })
                .collect()
        };
        Ok(Self {
            grid: grid.clone(),
            l_max,
            d: axes[1]
                .nodes
                .iter()
                .map(|&b| d_matrices(l_max, b))
                .collect(),
            ea: phases(&axes[0].nodes, -half_pi),
            eg: phases(&axes[2].nodes, half_pi),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Forward transform of grid samples. Exact (to rounding) for inputs
    /// band-limited within `grid_bandwidth`.
    pub fn forward(&self, values: &[f64]) -> Result<So3Spectrum> {
        let cap = grid_bandwidth(&self.grid);
        if self.l_max > cap {
            return Err(Error::BandwidthExceeded {
                requested: self.l_max,
                max: cap,
            });
        }
        if values.len() != self.grid.len() {
            return Err(Error::GridMismatch {
                what: "sample count differs from grid size",
            });
        }
        let [na, nb, ng] = [
            self.grid.shape()[0],
            self.grid.shape()[1],
            self.grid.shape()[2],
        ];
        let axes = self.grid.axes();
        let nm = 2 * self.l_max + 1;
        // Stage 1: contract the first azimuthal axis.
        // g1[(n, j, k)] = SUM_i w_i f_{ijk} exp(-i n a_i)
        let mut g1 = vec![C64::new(0.0, 0.0); nm * nb * ng];
        for i in 0..na {
            let wa = axes[0].weights[i];
            let pha = &self.ea[i];
            for j in 0..nb {
                for k in 0..ng {
                    let v = wa * values[(i * nb + j) * ng + k];
                    if v == 0.0 {
                        continue;
                    }
                    for (nn, ph) in pha.iter().enumerate() {
                        g1[(nn * nb + j) * ng + k] += ph * v;
                    }
                }
            }
        }
        // Stage 2: contract the second azimuthal axis.
        // g2[(n, j, m)] = SUM_k w_k g1[(n, j, k)] exp(-i m c_k)
        let mut g2 = vec![C64::new(0.0, 0.0); nm * nb * nm];
        for k in 0..ng {
            let wc = axes[2].weights[k];
            let phc = &self.eg[k];
            for nn in 0..nm {
                for j in 0..nb {
                    let v = g1[(nn * nb + j) * ng + k] * wc;
                    for (mm, ph) in phc.iter().enumerate() {
                        g2[(nn * nb + j) * nm + mm] += ph * v;
                    }
                }
            }
        }
        // Stage 3: contract the polar axis against the little-d tables.
        // fhat(l)_{mn} = SUM_j w_j d^l_{nm}(b_j) g2[(n, j, m)]
        let mut out = So3Spectrum::zeros(self.l_max);
        let lc = self.l_max as i64;
        for j in 0..nb {
            let wb = axes[1].weights[j];
            let dj = &self.d[j];
            for l in 0..=self.l_max {
                let li = l as i64;
                let b = out.block_mut(l);
                for m in -li..=li {
                    for n in -li..=li {
                        let dv = dj[l][((n + li) as usize, (m + li) as usize)];
                        b[((m + li) as usize, (n + li) as usize)] += g2
                            [(((n + lc) as usize) * nb + j) * (2 * self.l_max + 1)
                                + (m + lc) as usize]
                            * (wb * dv);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Evaluate a spectrum at every grid node (inverse transform). No
    /// bandwidth restriction: this is a plain finite sum per node.
    pub fn synthesize(&self, spec: &So3Spectrum) -> Result<Vec<f64>> {
        if spec.l_max() > self.l_max {
            return Err(Error::BandwidthExceeded {
                requested: spec.l_max(),
                max: self.l_max,
            });
        }
        let [na, nb, ng] = [
            self.grid.shape()[0],
            self.grid.shape()[1],
            self.grid.shape()[2],
        ];
        let lt = spec.l_max();
        let nm = 2 * lt + 1;
        // Stage 1: h[(n, j, m)] = SUM_l (2l+1) d^l_{nm}(b_j) fhat(l)_{mn}
        let mut h = vec![C64::new(0.0, 0.0); nm * nb * nm];
        for j in 0..nb {
            let dj = &self.d[j];
            for l in 0..=lt {
                let li = l as i64;
                let w = (2 * l + 1) as f64;
                let b = spec.block(l);
                for n in -li..=li {
                    for m in -li..=li {
                        let dv = dj[l][((n + li) as usize, (m + li) as usize)];
                        h[(((n + lt as i64) as usize) * nb + j) * nm
                            + (m + lt as i64) as usize] +=
                            b[((m + li) as usize, (n + li) as usize)] * (w * dv);
                    }
                }
            }
        }
        // Stage 2: h2[(n, j, k)] = SUM_m h[(n, j, m)] exp(+i m c_k)
        let mut h2 = vec![C64::new(0.0, 0.0); nm * nb * ng];
        for k in 0..ng {
            let phc = &self.eg[k];
            for nn in 0..nm {
                for j in 0..nb {
                    let mut acc = C64::new(0.0, 0.0);
                    for mm in 0..nm {
                        // eg holds exp(-i m c); conjugate for synthesis.
                        acc += h[(nn * nb + j) * nm + mm]
                            * phc[mm + (self.l_max - lt)].conj();
                    }
                    h2[(nn * nb + j) * ng + k] = acc;
                }
            }
        }
        // Stage 3: f_{ijk} = Re SUM_n h2[(n, j, k)] exp(+i n a_i)
        let mut out = vec![0.0; na * nb * ng];
        let mut re_max = 0.0f64;
        let mut im_max = 0.0f64;
        for i in 0..na {
            let pha = &self.ea[i];
            for j in 0..nb {
                for k in 0..ng {
                    let mut acc = C64::new(0.0, 0.0);
                    for nn in 0..nm {
                        acc += h2[(nn * nb + j) * ng + k]
                            * pha[nn + (self.l_max - lt)].conj();
                    }
                    re_max = re_max.max(acc.re.abs());
                    im_max = im_max.max(acc.im.abs());
                    out[(i * nb + j) * ng + k] = acc.re;
                }
            }
        }
        // A spectrum of a real function leaves residue at rounding level;
        // anything larger means the input was not such a spectrum.
        if im_max > SYNTHESIS_IMAG_TOL * re_max.max(1.0) {
            return Err(Error::InvariantViolated {
                what: "imaginary residue in synthesized samples",
                residual: im_max,
            });
        }
        Ok(out)
    }

    /// Evaluate a spectrum at one arbitrary group element.
    pub fn evaluate(spec: &So3Spectrum, g: &GroupElement) -> f64 {
        let us = wigner_u(spec.l_max(), g);
        let mut acc = C64::new(0.0, 0.0);
        for (l, u) in us.iter().enumerate() {
            let b = spec.block(l);
            let mut tr = C64::new(0.0, 0.0);
            for r in 0..u.nrows() {
                for s in 0..u.ncols() {
                    tr += b[(r, s)] * u[(s, r)];
                }
            }
            acc += tr * (2 * l + 1) as f64;
        }
        acc.re
    }
}

/// Spectrum of the left shift `g -> f(h^-1 g)`.
pub fn left_shift_spectrum(spec: &So3Spectrum, h: &GroupElement) -> So3Spectrum {
    let us = wigner_u(spec.l_max(), &crate::group::inverse(h));
    So3Spectrum {
        blocks: spec
            .blocks
            .iter()
            .zip(us.iter())
            .map(|(b, u)| b * u)
            .collect(),
    }
}

/// Spectrum of the right shift `g -> f(g h)`.
pub fn right_shift_spectrum(spec: &So3Spectrum, h: &GroupElement) -> So3Spectrum {
    let us = wigner_u(spec.l_max(), h);
    So3Spectrum {
        blocks: us
            .iter()
            .zip(spec.blocks.iter())
            .map(|(u, b)| u * b)
            .collect(),
    }
}

/// Spectrum of the group convolution
/// `(f1 * f2)(g) = INT f1(h) f2(h^-1 g) dh`; blocks multiply in swapped
/// order.
pub fn convolve_spectra(f1: &So3Spectrum, f2: &So3Spectrum) -> So3Spectrum {
    let l = f1.l_max().min(f2.l_max());
    So3Spectrum {
        blocks: (0..=l).map(|k| f2.block(k) * f1.block(k)).collect(),
    }
}

impl std::ops::Add for &So3Spectrum {
    type Output = So3Spectrum;

    fn add(self, rhs: &So3Spectrum) -> So3Spectrum {
        let l = self.l_max().max(rhs.l_max());
        let mut out = self.resized(l);
        for k in 0..=rhs.l_max() {
            out.blocks[k] += rhs.block(k);
        }
        out
    }
}

/// Quadrature evaluation of the defining convolution integral: the
/// returned spectrum is `SUM_h w_h f1(h) fhat_2 U(h^-1)`, each grid node
/// contributing its left-shifted copy of `f2`. Exact when `f1` is
/// band-limited within the grid and `f2` within its spectrum. Shares no
/// arithmetic with `convolve_spectra` (per-node representation stacks
/// instead of a forward transform of `f1`), which makes it the
/// independent cross-check for the convolution theorem.
pub fn direct_convolution(grid: &Grid, f1: &[f64], f2: &So3Spectrum) -> Result<So3Spectrum> {
    if grid.group() != GroupId::So3 {
        return Err(Error::GridMismatch { what: "rotation-group grid required" });
    }
    if f1.len() != grid.len() {
        return Err(Error::GridMismatch {
            what: "sample count differs from grid size",
        });
    }
    let l_max = f2.l_max();
    let mut out = So3Spectrum::zeros(l_max);
    for (idx, (h, &w)) in grid.elements().iter().zip(grid.weights()).enumerate() {
        let v = w * f1[idx];
        if v == 0.0 {
            continue;
        }
        let us = wigner_u(l_max, &crate::group::inverse(h));
        for l in 0..=l_max {
            out.blocks[l].gemm(C64::new(v, 0.0), f2.block(l), &us[l], C64::new(1.0, 0.0));
        }
    }
    Ok(out)
}

/// Spectral spread functionals of a density's coefficients, all built
/// from per-level block norms weighted by the level dimension `2l+1`.
/// Blocks below [`BLOCK_OCCUPANCY_FLOOR`] are skipped in the `-log` sums
/// (they would diverge) and excluded from the band weight `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersions {
    /// `-SUM (2l+1) log ||fhat(l)||_2^2` over occupied blocks (operator
    /// norm). The largest of the three spread measures.
    pub d2: f64,
    /// `-SUM (2l+1) log ||fhat(l)||_F^2` over occupied blocks.
    pub d: f64,
    /// `-log` of the total Plancherel power; bounded above by entropy.
    pub tilde_d: f64,
    /// Occupied band weight `SUM (2l+1)`.
    pub b: f64,
}

/// Compute all dispersion functionals of a spectrum in one pass.
pub fn dispersions(spec: &So3Spectrum) -> Dispersions {
    let mut d2 = 0.0;
    let mut d = 0.0;
    let mut b = 0.0;
    for (l, blk) in spec.blocks.iter().enumerate() {
        let w = (2 * l + 1) as f64;
        let fro2 = spec.block_power(l);
        if fro2.sqrt() <= BLOCK_OCCUPANCY_FLOOR {
            continue;
        }
        let op = blk
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        d2 -= w * (op * op).ln();
        d -= w * fro2.ln();
        b += w;
    }
    Dispersions {
        d2,
        d,
        tilde_d: -spec.power().ln(),
        b,
    }
}

/// Spectrum of the right (`side = Right`) or left (`Left`) derivative
/// along generator `i`: `u_i fhat` resp. `-fhat u_i`.
pub fn derivative_spectrum(
    spec: &So3Spectrum,
    i: usize,
    side: crate::group::Side,
) -> So3Spectrum {
    let blocks = spec
        .blocks
        .iter()
        .enumerate()
        .map(|(l, b)| {
            let u = &u_generators(l)[i];
            match side {
                crate::group::Side::Right => u * b,
                crate::group::Side::Left => -(b * u),
            }
        })
        .collect();
    So3Spectrum { blocks }
}

/// Coefficients of a drift-diffusion evolution on the rotation group:
/// symmetric positive-semidefinite diffusion matrix `d`, constant drift
/// vector `h`, elapsed time `t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionParams {
    d: DMatrix<f64>,
    h: DVector<f64>,
    t: f64,
}

impl DiffusionParams {
    pub fn new(d: DMatrix<f64>, h: DVector<f64>, t: f64) -> Result<Self> {
        if d.nrows() != 3 || d.ncols() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: d.nrows().max(d.ncols()),
            });
        }
        if h.len() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: h.len() });
        }
        let asym = (&d - d.transpose()).norm();
        if asym > 1e-12 {
            return Err(Error::InvariantViolated {
                what: "diffusion matrix not symmetric",
                residual: asym,
            });
        }
        let lo = min_eigenvalue(&d);
        if lo < -1e-12 {
            return Err(Error::InvariantViolated {
                what: "diffusion matrix not positive semidefinite",
                residual: -lo,
            });
        }
        if !(t >= 0.0) {
            return Err(Error::Config(format!("diffusion time must be >= 0, got {t}")));
        }
        Ok(Self { d, h, t })
    }

    /// Unit isotropic diffusion, no drift.
    pub fn isotropic(t: f64) -> Result<Self> {
        Self::new(DMatrix::identity(3, 3), DVector::zeros(3), t)
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Same coefficients at a different time.
    pub fn at_time(&self, t: f64) -> Result<Self> {
        Self::new(self.d.clone(), self.h.clone(), t)
    }

    /// Same diffusion and time with the drift removed.
    pub fn with_no_drift(&self) -> Self {
        Self {
            d: self.d.clone(),
            h: DVector::zeros(3),
            t: self.t,
        }
    }

    /// Slowest spectral decay rate: the smallest eigenvalue of `d`. The
    /// drift term is skew-Hermitian in every level and does not slow the
    /// norm decay, so this alone controls truncation safety.
    pub fn decay_rate(&self) -> f64 {
        min_eigenvalue(&self.d)
    }
}

fn min_eigenvalue(d: &DMatrix<f64>) -> f64 {
    let sym = (d + d.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Block generators `B_l = (1/2) SUM_ij D_ij u_i u_j - SUM_i h_i u_i` of
/// the drift-diffusion semigroup.
pub fn diffusion_generator(l_max: usize, p: &DiffusionParams) -> Vec<DMatrix<C64>> {
    let mut out = Vec::with_capacity(l_max + 1);
    for l in 0..=l_max {
        let u = u_generators(l);
        let mut b = DMatrix::<C64>::zeros(2 * l + 1, 2 * l + 1);
        for i in 0..3 {
            for j in 0..3 {
                if p.d[(i, j)] != 0.0 {
                    b += (&u[i] * &u[j]) * C64::new(0.5 * p.d[(i, j)], 0.0);
                }
            }
            if p.h[i] != 0.0 {
                b -= &u[i] * C64::new(p.h[i], 0.0);
            }
        }
        out.push(b);
    }
    out
}

/// Propagator blocks `exp(t B_l)` for `l = 0..=l_max`; `t = 0` gives
/// identity blocks (the spectrum of the identity-centered delta).
pub fn heat_propagator(l_max: usize, p: &DiffusionParams) -> Vec<DMatrix<C64>> {
    diffusion_generator(l_max, p)
        .into_iter()
        .map(|b| expm_c(&(b * C64::new(p.t, 0.0))))
        .collect()
}

/// Spectrum of the drift-diffusion kernel started from the identity
/// delta: the propagator itself, truncated where the decay bound falls
/// below the spectral floor. Errors if that requires more than the
/// bandwidth cap (time too small to truncate honestly).
pub fn heat_spectrum(p: &DiffusionParams) -> Result<So3Spectrum> {
    let l_max = required_bandwidth(p.t, p.decay_rate())?;
    Ok(So3Spectrum {
        blocks: heat_propagator(l_max, p),
    })
}

/// Smallest degree `L` with `exp(-rate L(L+1) t / 2)` below the spectral
/// floor; the truncation bandwidth for a diffusion run for time `t`.
pub fn required_bandwidth(t: f64, rate: f64) -> Result<usize> {
    if !(t > 0.0) || !(rate > 0.0) {
        return Err(Error::Config(format!(
            "diffusion needs positive time and rate, got t = {t}, rate = {rate}"
        )));
    }
    for l in 0..=MAX_BANDWIDTH {
        let lf = l as f64;
        if (-rate * lf * (lf + 1.0) * t / 2.0).exp() < SPECTRAL_FLOOR {
            return Ok(l);
        }
    }
    Err(Error::TimeBelowTruncationSafe {
        t,
        bandwidth: MAX_BANDWIDTH,
        required: {
            // First L beyond the cap that would have sufficed.
            let mut l = MAX_BANDWIDTH + 1;
            while (-rate * (l as f64) * (l as f64 + 1.0) * t / 2.0).exp() >= SPECTRAL_FLOOR {
                l += 1;
            }
            l
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{
        chart_to_element, compose, exp_map, inverse, AlgebraVector, ChartId, ChartPoint, Side,
    };
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> GroupElement {
        loop {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let v = AlgebraVector::new(GroupId::So3, x).unwrap();
            if v.norm() < 3.0 {
                return exp_map(&v);
            }
        }
    }

    /// Random spectrum obeying the real-function symmetry, supported on
    /// l <= l_max.
    fn random_real_spectrum(l_max: usize, rng: &mut ChaCha8Rng) -> So3Spectrum {
        let mut s = So3Spectrum::zeros(l_max);
        for l in 0..=l_max {
            let li = l as i64;
            for m in -li..=li {
                for n in -li..=li {
                    if (m, n) < (-m, -n) {
                        continue;
                    }
                    let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let z = z * 0.3f64.powi(l as i32);
                    let sign = if (m - n) % 2 == 0 { 1.0 } else { -1.0 };
                    let b = s.block_mut(l);
                    b[((m + li) as usize, (n + li) as usize)] = z;
                    b[((li - m) as usize, (li - n) as usize)] = z.conj() * sign;
                }
            }
            // Diagonal-pair overlap (m, n) = (-m, -n) means m = n = 0: force
            // the symmetry there (real value).
            let b = s.block_mut(l);
            let c = b[(l, l)];
            b[(l, l)] = C64::new(c.re, 0.0);
        }
        s
    }

    #[test]
    fn z_rotation_representation_is_diagonal_phase() {
        let g = chart_to_element(
            &ChartPoint::new(GroupId::So3, ChartId::EulerZxz, vec![0.8, 0.0, 0.0]).unwrap(),
        )
        .unwrap();
        let u = wigner_u(1, &g);
        let expect = [
            C64::from_polar(1.0, -0.8),
            C64::new(1.0, 0.0),
            C64::from_polar(1.0, 0.8),
        ];
        for (i, e) in expect.iter().enumerate() {
            assert!((u[1][(i, i)] - e).norm() < 1e-14);
            for j in 0..3 {
                if j != i {
                    assert!(u[1][(i, j)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn representation_is_a_unitary_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let g1 = random_rotation(&mut rng);
            let g2 = random_rotation(&mut rng);
            let prod = compose(&g1, &g2).unwrap();
            let (ua, ub, up) = (wigner_u(4, &g1), wigner_u(4, &g2), wigner_u(4, &prod));
            for l in 0..=4usize {
                let err = (&ua[l] * &ub[l] - &up[l]).norm();
                assert!(err < 1e-12, "l = {l}: {err}");
                let sz = 2 * l + 1;
                let unit = (&ua[l] * ua[l].adjoint() - DMatrix::<C64>::identity(sz, sz)).norm();
                assert!(unit < 1e-13);
            }
        }
    }

    #[test]
    fn generators_are_derivatives_of_the_representation() {
        let h = 1e-5;
        for l in 1..=3usize {
            let us = u_generators(l);
            for i in 0..3 {
                let mut x = vec![0.0; 3];
                x[i] = 1.0;
                let xv = AlgebraVector::new(GroupId::So3, x).unwrap();
                let up = wigner_u(
                    l,
                    &exp_map(&AlgebraVector::new(
                        GroupId::So3,
                        xv.coords.iter().map(|v| v * h).collect(),
                    )
                    .unwrap()),
                );
                let um = wigner_u(
                    l,
                    &exp_map(&AlgebraVector::new(
                        GroupId::So3,
                        xv.coords.iter().map(|v| -v * h).collect(),
                    )
                    .unwrap()),
                );
                let fd = (&up[l] - &um[l]) / C64::new(2.0 * h, 0.0);
                assert!(
                    (&fd - &us[i]).norm() < 1e-9,
                    "generator {i} at l = {l}"
                );
                // Skew-Hermitian.
                assert!((&us[i] + us[i].adjoint()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn casimir_is_minus_l_l_plus_one() {
        for l in 0..=5usize {
            let us = u_generators(l);
            let sz = 2 * l + 1;
            let mut acc = DMatrix::<C64>::zeros(sz, sz);
            for u in &us {
                acc += u * u;
            }
            let expect =
                DMatrix::<C64>::identity(sz, sz) * C64::new(-((l * (l + 1)) as f64), 0.0);
            assert!((acc - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn grid_satisfies_representation_orthogonality() {
        // INT U^l_{mn} conj(U^l'_{m'n'}) dg = delta / (2l+1) within the
        // grid band.
        let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
        let us_per_node: Vec<Vec<DMatrix<C64>>> = grid
            .elements()
            .iter()
            .map(|g| wigner_u(3, g))
            .collect();
        let w = grid.weights();
        let cases = [
            ((1usize, 0i64, 0i64), (1usize, 0i64, 0i64)),
            ((1, 1, -1), (1, 1, -1)),
            ((2, 1, -2), (2, 1, -2)),
            ((1, 0, 0), (2, 0, 0)),
            ((2, 1, 1), (2, 1, -1)),
            ((3, 2, 0), (3, 2, 0)),
            ((1, 1, 0), (3, 1, 0)),
        ];
        for ((l1, m1, n1), (l2, m2, n2)) in cases {
            let acc: C64 = us_per_node
                .iter()
                .zip(w.iter())
                .map(|(us, &wi)| {
                    let a = us[l1][((m1 + l1 as i64) as usize, (n1 + l1 as i64) as usize)];
                    let b = us[l2][((m2 + l2 as i64) as usize, (n2 + l2 as i64) as usize)];
                    a * b.conj() * wi
                })
                .sum();
            let expect = if (l1, m1, n1) == (l2, m2, n2) {
                1.0 / (2.0 * l1 as f64 + 1.0)
            } else {
                0.0
            };
            assert!(
                (acc - C64::new(expect, 0.0)).norm() < 1e-12,
                "({l1},{m1},{n1}) vs ({l2},{m2},{n2}): {acc}"
            );
        }
    }

    #[test]
    fn forward_inverts_synthesis_within_the_band() {
        let grid = Grid::build(GroupId::So3, &[16, 10, 16], None).unwrap();
        let ctx = So3Harmonics::new(grid, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = random_real_spectrum(6, &mut rng);
        let vals = ctx.synthesize(&spec).unwrap();
        // Synthesized field is real by construction of the spectrum.
        let back = ctx.forward(&vals).unwrap();
        for l in 0..=6usize {
            let err = (back.block(l) - spec.block(l)).norm();
            assert!(err < 1e-12, "l = {l}: {err}");
        }
        // Plancherel on the same pair.
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        assert_relative_eq!(
            ctx.grid().integrate(&sq),
            spec.power(),
            max_relative = 1e-11
        );
        // Reality symmetry of the forward output.
        assert!(back.reality_residual() < 1e-12);
    }

    #[test]
    fn forward_rejects_bandwidth_beyond_grid_support() {
        let grid = Grid::build(GroupId::So3, &[8, 10, 8], None).unwrap();
        // Cap is min(8/2 - 1, 9) = 3.
        assert_eq!(grid_bandwidth(&grid), 3);
        let ctx = So3Harmonics::new(grid, 5).unwrap();
        let vals = vec![1.0; ctx.grid().len()];
        assert!(matches!(
            ctx.forward(&vals),
            Err(Error::BandwidthExceeded { .. })
        ));
        // Synthesis at l_max above the forward cap still works.
        let spec = So3Spectrum::zeros(5);
        assert!(ctx.synthesize(&spec).is_ok());
    }

    #[test]
    fn shift_theorems_hold_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = random_real_spectrum(4, &mut rng);
        let h = random_rotation(&mut rng);
        for _ in 0..4 {
            let g = random_rotation(&mut rng);
            let lv = So3Harmonics::evaluate(
                &left_shift_spectrum(&spec, &h),
                &g,
            );
            let direct = So3Harmonics::evaluate(&spec, &compose(&inverse(&h), &g).unwrap());
            assert_relative_eq!(lv, direct, epsilon = 1e-10);
            let rv = So3Harmonics::evaluate(&right_shift_spectrum(&spec, &h), &g);
            let direct = So3Harmonics::evaluate(&spec, &compose(&g, &h).unwrap());
            assert_relative_eq!(rv, direct, epsilon = 1e-10);
            // Inversion.
            let iv = So3Harmonics::evaluate(&spec.inverted(), &g);
            let direct = So3Harmonics::evaluate(&spec, &inverse(&g));
            assert_relative_eq!(iv, direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn derivative_theorem_matches_flow_differentiation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = random_real_spectrum(4, &mut rng);
        let g = random_rotation(&mut rng);
        let h = 1e-5;
        for i in 0..3 {
            let step = |t: f64, side: Side| {
                let mut x = vec![0.0; 3];
                x[i] = t;
                let e = exp_map(&AlgebraVector::new(GroupId::So3, x).unwrap());
                match side {
                    Side::Right => compose(&g, &e).unwrap(),
                    Side::Left => compose(&inverse(&e), &g).unwrap(),
                }
            };
            for side in [Side::Right, Side::Left] {
                let fd = (So3Harmonics::evaluate(&spec, &step(h, side))
                    - So3Harmonics::evaluate(&spec, &step(-h, side)))
                    / (2.0 * h);
                let spectral =
                    So3Harmonics::evaluate(&derivative_spectrum(&spec, i, side), &g);
                assert_relative_eq!(fd, spectral, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn convolution_theorem_matches_quadrature() {
        // Compare the block-product spectrum against the defining integral
        // evaluated by grid quadrature at a few probe points.
        let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
        let ctx = So3Harmonics::new(grid.clone(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s1 = random_real_spectrum(3, &mut rng);
        let s2 = random_real_spectrum(3, &mut rng);
        let f1 = ctx.synthesize(&s1).unwrap();
        let conv = convolve_spectra(&s1, &s2);
        for _ in 0..3 {
            let g = random_rotation(&mut rng);
            let direct: f64 = neumaier_sum(
                grid.elements()
                    .iter()
                    .zip(grid.weights().iter())
                    .zip(f1.iter())
                    .map(|((h, &w), &f1h)| {
                        let arg = compose(&inverse(h), &g).unwrap();
                        w * f1h * So3Harmonics::evaluate(&s2, &arg)
                    }),
            );
            let spectral = So3Harmonics::evaluate(&conv, &g);
            assert_relative_eq!(direct, spectral, epsilon = 1e-10);
        }
    }

    fn drift_free(scale: f64, t: f64) -> DiffusionParams {
        DiffusionParams::new(DMatrix::identity(3, 3) * scale, DVector::zeros(3), t).unwrap()
    }

    #[test]
    fn heat_propagator_isotropic_closed_form() {
        let blocks = heat_propagator(4, &drift_free(0.7, 0.5));
        for (l, b) in blocks.iter().enumerate() {
            let lam = (-0.7 * 0.5 * (l * (l + 1)) as f64 / 2.0).exp();
            let expect = DMatrix::<C64>::identity(2 * l + 1, 2 * l + 1) * C64::new(lam, 0.0);
            assert!((b - expect).norm() < 1e-12, "l = {l}");
        }
        // Zero elapsed time leaves the delta spectrum: identity blocks.
        for (l, b) in heat_propagator(3, &drift_free(0.7, 0.0)).iter().enumerate() {
            let sz = 2 * l + 1;
            assert!((b - DMatrix::<C64>::identity(sz, sz)).norm() < 1e-14);
        }
    }

    #[test]
    fn diffusion_params_validate_inputs() {
        let skew = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, -0.5, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            DiffusionParams::new(skew, DVector::zeros(3), 0.1),
            Err(Error::InvariantViolated { .. })
        ));
        let indef = DMatrix::from_partial_diagonal(3, 3, &[1.0, -0.2, 1.0]);
        assert!(matches!(
            DiffusionParams::new(indef, DVector::zeros(3), 0.1),
            Err(Error::InvariantViolated { .. })
        ));
        assert!(matches!(
            DiffusionParams::isotropic(-0.5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn heat_spectrum_contract() {
        // Mass stays one; bandwidth matches the decay criterion.
        let s = heat_spectrum(&drift_free(1.0, 0.3)).unwrap();
        assert!((s.mass() - C64::new(1.0, 0.0)).norm() < 1e-15);
        let lm = s.l_max() as f64;
        assert!((-lm * (lm + 1.0) * 0.15).exp() < SPECTRAL_FLOOR);
        assert!((-(lm - 1.0) * lm * 0.15).exp() >= SPECTRAL_FLOOR);
        // Too-small times are refused with the required bandwidth reported.
        match heat_spectrum(&drift_free(1.0, 0.01)) {
            Err(Error::TimeBelowTruncationSafe { required, .. }) => {
                assert!(required > MAX_BANDWIDTH)
            }
            other => panic!("expected truncation-safety refusal, got {other:?}"),
        }
    }

    #[test]
    fn heat_semigroup_composes_under_convolution() {
        let s1 = heat_spectrum(&drift_free(0.9, 0.4)).unwrap();
        let s2 = heat_spectrum(&drift_free(0.9, 0.7)).unwrap();
        let s12 = heat_spectrum(&drift_free(0.9, 1.1)).unwrap();
        let conv = convolve_spectra(&s1, &s2);
        for l in 0..=s12.l_max().min(conv.l_max()) {
            assert!((conv.block(l) - s12.block(l)).norm() < 1e-12);
        }
    }

    #[test]
    fn anisotropic_propagator_keeps_reality_and_mass() {
        let d = DMatrix::from_partial_diagonal(3, 3, &[1.0, 0.5, 0.25]);
        let p = DiffusionParams::new(d, DVector::zeros(3), 0.4).unwrap();
        let s = So3Spectrum {
            blocks: heat_propagator(6, &p),
        };
        assert!((s.mass() - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(s.reality_residual() < 1e-12);
    }

    #[test]
    fn drift_shifts_the_kernel_peak_without_losing_mass() {
        // Pure drift at vanishing diffusion is a translation; with finite
        // diffusion the kernel mean moves along the drift flow. Check the
        // semigroup stays a real unit-mass density and the peak moves to
        // the drift endpoint for the solvable isotropic case.
        let h = DVector::from_vec(vec![0.0, 0.0, 1.2]);
        let p = DiffusionParams::new(DMatrix::identity(3, 3), h, 0.6).unwrap();
        let s = heat_spectrum(&p).unwrap();
        assert!((s.mass() - C64::new(1.0, 0.0)).norm() < 1e-13);
        assert!(s.reality_residual() < 1e-11);
        // z-axis drift commutes with isotropic diffusion level by level,
        // so the kernel is the no-drift kernel left-shifted to the drift
        // endpoint exp(t h): blocks exp(-l(l+1)t/2) U(exp(t h X_3)^-1).
        let s0 = heat_spectrum(&p.with_no_drift()).unwrap();
        let endpoint =
            exp_map(&AlgebraVector::new(GroupId::So3, vec![0.0, 0.0, 1.2 * 0.6]).unwrap());
        let shifted = left_shift_spectrum(&s0, &endpoint);
        for l in 0..=s.l_max().min(shifted.l_max()) {
            assert!(
                (s.block(l) - shifted.block(l)).norm() < 1e-11,
                "level {l}"
            );
        }
    }

    #[test]
    fn dispersion_order_and_superadditivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..6 {
            let s1 = random_real_spectrum(4, &mut rng);
            let s2 = random_real_spectrum(4, &mut rng);
            let (m1, m2) = (s1.mass().re, s2.mass().re);
            let mut s1 = s1;
            let mut s2 = s2;
            // Normalize masses so the spectra are density-like.
            s1.scale(1.0 / m1);
            s2.scale(1.0 / m2);
            let conv = convolve_spectra(&s1, &s2);
            let (p1, p2, pc) = (dispersions(&s1), dispersions(&s2), dispersions(&conv));
            assert!(p1.d <= p1.d2 + 1e-12);
            assert!(p2.d <= p2.d2 + 1e-12);
            assert!(pc.d >= p1.d + p2.d - 1e-10, "{} vs {}", pc.d, p1.d + p2.d);
            assert!(pc.d2 >= p1.d2 + p2.d2 - 1e-10);
            // Band-weight bound: tilde_d + log b <= d / b.
            assert!(p1.tilde_d + p1.b.ln() <= p1.d / p1.b + 1e-10);
        }
    }

    #[test]
    fn dispersions_of_uniform_are_zero() {
        let mut s = So3Spectrum::zeros(3);
        s.block_mut(0)[(0, 0)] = C64::new(1.0, 0.0);
        let p = dispersions(&s);
        assert_eq!(p.b, 1.0);
        assert!(p.d.abs() < 1e-14 && p.d2.abs() < 1e-14 && p.tilde_d.abs() < 1e-14);
    }

    #[test]
    fn spectrum_addition_is_synthesis_linear() {
        let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
        let ctx = So3Harmonics::new(grid, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let s1 = random_real_spectrum(4, &mut rng);
        let s2 = random_real_spectrum(3, &mut rng);
        let sum = &s1 + &s2;
        let a = ctx.synthesize(&s1).unwrap();
        let b = ctx.synthesize(&s2).unwrap();
        let c = ctx.synthesize(&sum).unwrap();
        for i in 0..a.len() {
            assert!((a[i] + b[i] - c[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_refuses_non_real_spectra() {
        let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
        let ctx = So3Harmonics::new(grid, 2).unwrap();
        let mut s = So3Spectrum::zeros(2);
        s.block_mut(0)[(0, 0)] = C64::new(1.0, 0.0);
        // Breaks the real-function symmetry: no conjugate partner.
        s.block_mut(1)[(0, 1)] = C64::new(0.4, 0.2);
        match ctx.synthesize(&s) {
            Err(Error::InvariantViolated { what, .. }) => {
                assert!(what.contains("imaginary"))
            }
            other => panic!("expected imaginary-residue refusal, got {other:?}"),
        }
    }

    #[test]
    fn direct_convolution_matches_block_products() {
        let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
        let ctx = So3Harmonics::new(grid.clone(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let s1 = random_real_spectrum(4, &mut rng);
        let s2 = random_real_spectrum(4, &mut rng);
        let f1 = ctx.synthesize(&s1).unwrap();
        let via_nodes = direct_convolution(&grid, &f1, &s2).unwrap();
        let via_blocks = convolve_spectra(&s1, &s2);
        for l in 0..=4usize {
            let gap = (via_nodes.block(l) - via_blocks.block(l)).norm();
            assert!(gap < 1e-13, "level {l}: {gap}");
        }
    }
}
