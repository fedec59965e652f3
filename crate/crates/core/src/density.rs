//! Grid-sampled probability densities and the pointwise group actions.
//!
//! A `DensityField` stores samples of a density (with respect to the
//! invariant measure) at the nodes of a product [`Grid`]. Two grades of
//! machinery operate on it:
//!
//! - *Exact index permutations.* On rotation grids, inversion and shifts
//!   by z-axis node rotations land node-on-node, so those actions are
//!   performed by reindexing with zero numerical error. `transform`
//!   reports which route it took.
//! - *Generic engines.* Arbitrary shifts and chart-space
//!   finite-difference derivatives go through multilinear interpolation.
//!   They work on every group but carry interpolation error of order
//!   `h^2` in the node spacing — honest engine-grade accuracy, suitable
//!   for cross-checks at matching tolerances, not for the spectrally
//!   exact identities (those run through the harmonic layer).
//! - *Convolution.* Direct quadrature over the inner variable. On
//!   rotation grids the shifted factor is evaluated through its Fourier
//!   blocks at the grid's admissible bandwidth, which keeps the result
//!   exact (to quadrature precision) for band-resolvable densities —
//!   piecewise interpolation cannot reach the contracted tolerances
//!   there. Elsewhere the inner factor is interpolated and the
//!   pre-normalization mass defect is gated against window leakage.
//!
//! Left action: `LeftShift(h)` produces `g -> f(h^-1 g)`; `RightShift(h)`
//! produces `g -> f(g h)`; `Conjugate(h)` produces `g -> f(h^-1 g h)`;
//! `Invert` produces `g -> f(g^-1)`. Derivative flows: the right
//! derivative along `X_i` is `d/dt f(g exp(t X_i))`, the left one is
//! `d/dt f(exp(-t X_i) g)`, both at `t = 0`.

use crate::error::{Error, Result};
use crate::group::{
    compose, element_to_chart, inverse, jacobian, ChartPoint, GroupElement, GroupId, Side,
};
use crate::quadrature::{AxisKind, Grid};
use crate::util::{fd_weights_first, neumaier_sum, wrap_2pi};
use std::sync::Arc;

/// Density samples on a grid, taken against the invariant measure.
#[derive(Debug, Clone)]
pub struct DensityField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    flags: DensityFlags,
}

/// Which route `transform` took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformRoute {
    /// Pure reindexing; no numerical error at all.
    ExactPermutation,
    /// Multilinear interpolation; engine-grade accuracy.
    Interpolated,
}

/// A group action applied to the *argument* of a density.
#[derive(Debug, Clone)]
pub enum GroupAction {
    LeftShift(GroupElement),
    RightShift(GroupElement),
    Conjugate(GroupElement),
    Invert,
}

/// How to split a density across a subgroup decomposition
/// (see [`DensityField::marginalize`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionSpec {
    /// Left cosets of the circle subgroup of the rotation group (the
    /// third-Euler-angle circle): subgroup marginal plus coset-sphere
    /// marginal.
    CosetCircle,
    /// Double cosets of that circle with itself: the three Euler-axis
    /// marginals.
    DoubleCosetEuler,
    /// Factor marginals of a direct product.
    DirectProduct,
    /// Marginals of a nested subgroup chain.
    NestedChain,
}

/// Labeled marginal densities from [`DensityField::marginalize`], each
/// normalized on its own space.
#[derive(Debug, Clone)]
pub enum Marginals {
    Coset {
        subgroup: AxisMarginal,
        coset: AxisMarginal,
    },
    DoubleCoset {
        alpha: AxisMarginal,
        beta: AxisMarginal,
        gamma: AxisMarginal,
    },
}

/// Negative samples beyond this (relative to the peak) are rejected;
/// shallower ones are clamped to zero.
const NEGATIVE_TOL: f64 = 1e-12;

/// Interpolated transforms and convolutions on truncated windows may
/// lose at most this mass fraction before they error out. Calibrated
/// above the `h^2` interpolation bias of the engines (~1e-4 at suite
/// resolutions) and well below genuine support overflow, which costs
/// percent-level mass.
pub const WINDOW_LEAK_TOL: f64 = 1e-2;

/// Residual below which a numerically verified structure flag
/// (symmetry, class function) may be set.
pub const VERIFIED_FLAG_TOL: f64 = 1e-8;

/// Structure flags a density may carry. They are never inferred: only
/// the `verify_*` methods set them, after measuring the defining
/// residual on the grid, and any mutation of the samples clears them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DensityFlags {
    /// `f(g^-1) = f(g)` holds on the grid (residual below tolerance).
    pub symmetric: bool,
    /// `f(h^-1 g h) = f(g)` for all `h` (verified structurally).
    pub class_function: bool,
}

impl DensityField {
    pub fn new(grid: Arc<Grid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                what: "sample count differs from grid size",
            });
        }
        let peak = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor = -NEGATIVE_TOL * peak.max(1.0);
        for (node, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::Config(format!("non-finite sample at node {node}")));
            }
            if *v < floor {
                return Err(Error::NegativeDensity { node, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            grid,
            values,
            flags: DensityFlags::default(),
        })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&GroupElement) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.elements().iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn from_chart_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable sample access. Drops any verified flags: edited samples
    /// are no longer the data the verification measured.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.flags = DensityFlags::default();
        &mut self.values
    }

    /// Verified structure flags (see [`DensityFlags`]).
    pub fn flags(&self) -> DensityFlags {
        self.flags
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// Scale to unit mass; returns the mass it had. Fails on zero,
    /// negative, or non-finite total mass. Flags survive: both verified
    /// properties are scale-invariant.
    pub fn normalize(&mut self) -> Result<f64> {
        let mass = self.mass();
        if !mass.is_finite() || mass <= 1e-300 {
            return Err(Error::NotNormalizable { mass });
        }
        for v in &mut self.values {
            *v /= mass;
        }
        Ok(mass)
    }

    /// Boundary-layer mass fraction check for truncated windows.
    pub fn check_truncation(&self, limit: f64) -> Result<f64> {
        self.grid.check_truncation(&self.values, limit)
    }

    /// Multilinear interpolation at an arbitrary group element.
    ///
    /// Periodic coordinates wrap; the rotation polar angle clamps to the
    /// interior node range (the chart degenerates there, the density does
    /// not). On truncated windows a coordinate outside `[-T, T]` violates
    /// the domain contract and errors with the escaping axis; coordinates
    /// inside the window but beyond the outermost nodes interpolate to 0,
    /// consistent with the negligible-boundary-mass contract.
    pub fn evaluate(&self, g: &GroupElement) -> Result<f64> {
        if g.group() != self.grid.group() {
            return Err(Error::GroupMismatch {
                expected: self.grid.group(),
                got: g.group(),
            });
        }
        let q = element_to_chart(g, self.grid.chart())?;
        self.evaluate_coords(&q.coords)
    }

    /// Interpolation in chart coordinates (same rules as [`evaluate`]).
    pub fn evaluate_coords(&self, q: &[f64]) -> Result<f64> {
        self.interpolate_impl(q, false)
    }

    /// Like [`evaluate`], but window escapes read as density 0. For the
    /// internal engines (convolution, transforms), which account for the
    /// escaping mass in aggregate instead of per point.
    pub(crate) fn evaluate_or_zero(&self, g: &GroupElement) -> Result<f64> {
        if g.group() != self.grid.group() {
            return Err(Error::GroupMismatch {
                expected: self.grid.group(),
                got: g.group(),
            });
        }
        let q = element_to_chart(g, self.grid.chart())?;
        self.interpolate_impl(&q.coords, true)
    }

    fn interpolate_impl(&self, q: &[f64], zero_outside_window: bool) -> Result<f64> {
        let axes = self.grid.axes();
        let so3_polar = self.grid.group() == GroupId::So3;
        let half_width = self.grid.half_width();
        // Per axis: (lower index, upper index, fraction toward upper).
        let mut loc = Vec::with_capacity(axes.len());
        for (ax, a) in axes.iter().enumerate() {
            let n = a.nodes.len();
            match a.kind {
                AxisKind::PeriodicUniform => {
                    let step = std::f64::consts::TAU / n as f64;
                    let t = wrap_2pi(q[ax]);
                    let cell = (t / step).floor() as usize % n;
                    let frac = (t - cell as f64 * step) / step;
                    loc.push((cell, (cell + 1) % n, frac));
                }
                AxisKind::GaussLegendre => {
                    let x = q[ax];
                    if !(so3_polar && ax == 1) && x.abs() > half_width {
                        if zero_outside_window {
                            return Ok(0.0);
                        }
                        return Err(Error::OutsideTruncation {
                            axis: ax,
                            value: x,
                            lo: -half_width,
                            hi: half_width,
                        });
                    }
                    if x <= a.nodes[0] {
                        if so3_polar && ax == 1 {
                            loc.push((0, 0, 0.0));
                            continue;
                        }
                        if x < a.nodes[0] {
                            return Ok(0.0);
                        }
                        loc.push((0, 0, 0.0));
                        continue;
                    }
                    if x >= a.nodes[n - 1] {
                        if so3_polar && ax == 1 {
                            loc.push((n - 1, n - 1, 0.0));
                            continue;
                        }
                        if x > a.nodes[n - 1] {
                            return Ok(0.0);
                        }
                        loc.push((n - 1, n - 1, 0.0));
                        continue;
                    }
                    let hi = a.nodes.partition_point(|&v| v < x).max(1);
                    let (x0, x1) = (a.nodes[hi - 1], a.nodes[hi]);
                    loc.push((hi - 1, hi, (x - x0) / (x1 - x0)));
                }
            }
        }
        // Multilinear blend over the 2^dim cell corners.
        let dim = loc.len();
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut multi = Vec::with_capacity(dim);
            for (ax, &(i0, i1, fr)) in loc.iter().enumerate() {
                if corner >> ax & 1 == 1 {
                    w *= fr;
                    multi.push(i1);
                } else {
                    w *= 1.0 - fr;
                    multi.push(i0);
                }
            }
            if w != 0.0 {
                acc += w * self.values[self.grid.flat_index(&multi)];
            }
        }
        Ok(acc)
    }

    /// Apply a group action to the density. Exact node permutations are
    /// used whenever the grid supports them (no numerical error, mass
    /// preserved bit for bit); otherwise the result is pulled back
    /// through interpolation and rescaled to the input's mass. On
    /// truncated windows the pre-rescale mass defect is gated at
    /// [`WINDOW_LEAK_TOL`]: a shift that pushes real mass over the edge
    /// is an error, not a silent renormalization.
    ///
    /// The returned route says which path ran. Verified flags do not
    /// carry over — shifts generally destroy both properties.
    pub fn transform(&self, action: &GroupAction) -> Result<(DensityField, TransformRoute)> {
        if let Some(values) = self.permutation_transform(action) {
            return Ok((
                DensityField {
                    grid: self.grid.clone(),
                    values,
                    flags: DensityFlags::default(),
                },
                TransformRoute::ExactPermutation,
            ));
        }
        // Generic route: pull back through interpolation.
        let mut values = Vec::with_capacity(self.grid.len());
        for g in self.grid.elements() {
            let arg = match action {
                GroupAction::LeftShift(h) => compose(&inverse(h), g)?,
                GroupAction::RightShift(h) => compose(g, h)?,
                GroupAction::Conjugate(h) => compose(&compose(&inverse(h), g)?, h)?,
                GroupAction::Invert => inverse(g),
            };
            values.push(self.evaluate_or_zero(&arg)?);
        }
        let mass_in = self.mass();
        let mass_out = self.grid.integrate(&values);
        if !self.grid.group().is_compact() {
            let fraction = (mass_out / mass_in - 1.0).abs();
            if fraction > WINDOW_LEAK_TOL {
                return Err(Error::MassLeakage {
                    fraction,
                    limit: WINDOW_LEAK_TOL,
                });
            }
        }
        if !(mass_out.is_finite() && mass_out > 1e-300) {
            return Err(Error::NotNormalizable { mass: mass_out });
        }
        let scale = mass_in / mass_out;
        for v in &mut values {
            *v *= scale;
        }
        Ok((
            DensityField {
                grid: self.grid.clone(),
                values,
                flags: DensityFlags::default(),
            },
            TransformRoute::Interpolated,
        ))
    }

    /// Index of the uniform azimuthal node matching a z-rotation angle, if
    /// the angle is a node angle.
    fn node_multiple(t: f64, n: usize) -> Option<usize> {
        let step = std::f64::consts::TAU / n as f64;
        let k = wrap_2pi(t) / step;
        let r = k.round();
        if (k - r).abs() < 1e-9 {
            Some((r as usize) % n)
        } else {
            None
        }
    }

    /// Angle of `h` if it is a rotation about the chart's distinguished
    /// axis (the z axis for rotations, the circle coordinate otherwise).
    fn z_rotation_angle(h: &GroupElement) -> Option<f64> {
        let m = h.matrix();
        match h.group() {
            GroupId::So3 => {
                let t = m[(1, 0)].atan2(m[(0, 0)]);
                let (s, c) = t.sin_cos();
                let r = [
                    m[(0, 0)] - c,
                    m[(0, 1)] + s,
                    m[(1, 0)] - s,
                    m[(1, 1)] - c,
                    m[(2, 2)] - 1.0,
                    m[(0, 2)],
                    m[(1, 2)],
                    m[(2, 0)],
                    m[(2, 1)],
                ];
                if r.iter().all(|v| v.abs() < 1e-12) {
                    Some(t)
                } else {
                    None
                }
            }
            GroupId::So2 => Some(m[(1, 0)].atan2(m[(0, 0)])),
            _ => None,
        }
    }

    fn permutation_transform(&self, action: &GroupAction) -> Option<Vec<f64>> {
        let shape = self.grid.shape();
        match (self.grid.group(), action) {
            (GroupId::So3, GroupAction::Invert) => {
                // Node inverse: (a_i, b_j, c_k)^-1 = (pi - c_k, b_j, pi - a_i).
                let (na, nb, ng) = (shape[0], shape[1], shape[2]);
                let mut out = vec![0.0; self.values.len()];
                for i in 0..na {
                    for j in 0..nb {
                        for k in 0..ng {
                            let i2 = (na + na / 2 - k) % na;
                            let k2 = (ng + ng / 2 - i) % ng;
                            out[(i * nb + j) * ng + k] =
                                self.values[(i2 * nb + j) * ng + k2];
                        }
                    }
                }
                Some(out)
            }
            (GroupId::So3, GroupAction::LeftShift(h)) => {
                let t = Self::z_rotation_angle(h)?;
                let m = Self::node_multiple(t, shape[0])?;
                let (na, nb, ng) = (shape[0], shape[1], shape[2]);
                let mut out = vec![0.0; self.values.len()];
                for i in 0..na {
                    let i2 = (i + na - m) % na;
                    for j in 0..nb {
                        for k in 0..ng {
                            out[(i * nb + j) * ng + k] = self.values[(i2 * nb + j) * ng + k];
                        }
                    }
                }
                Some(out)
            }
            (GroupId::So3, GroupAction::RightShift(h)) => {
                let t = Self::z_rotation_angle(h)?;
                let m = Self::node_multiple(t, shape[2])?;
                let (na, nb, ng) = (shape[0], shape[1], shape[2]);
                let mut out = vec![0.0; self.values.len()];
                for i in 0..na {
                    for j in 0..nb {
                        for k in 0..ng {
                            let k2 = (k + m) % ng;
                            out[(i * nb + j) * ng + k] = self.values[(i * nb + j) * ng + k2];
                        }
                    }
                }
                Some(out)
            }
            (GroupId::So3, GroupAction::Conjugate(h)) => {
                let t = Self::z_rotation_angle(h)?;
                let ma = Self::node_multiple(t, shape[0])?;
                let mg = Self::node_multiple(t, shape[2])?;
                let (na, nb, ng) = (shape[0], shape[1], shape[2]);
                let mut out = vec![0.0; self.values.len()];
                for i in 0..na {
                    let i2 = (i + na - ma) % na;
                    for j in 0..nb {
                        for k in 0..ng {
                            let k2 = (k + mg) % ng;
                            out[(i * nb + j) * ng + k] = self.values[(i2 * nb + j) * ng + k2];
                        }
                    }
                }
                Some(out)
            }
            (GroupId::So2, GroupAction::Invert) => {
                let n = shape[0];
                Some((0..n).map(|i| self.values[(n - i) % n]).collect())
            }
            (GroupId::So2, GroupAction::LeftShift(h) | GroupAction::RightShift(h)) => {
                let t = Self::z_rotation_angle(h)?;
                let m = Self::node_multiple(t, shape[0])?;
                let n = shape[0];
                let flip = matches!(action, GroupAction::RightShift(_));
                Some(
                    (0..n)
                        .map(|i| {
                            let j = if flip { (i + m) % n } else { (i + n - m) % n };
                            self.values[j]
                        })
                        .collect(),
                )
            }
            (GroupId::So2, GroupAction::Conjugate(_)) => Some(self.values.clone()),
            // The line's Gauss-Legendre nodes are symmetric about 0, so
            // inversion is an index reversal; conjugation is trivial.
            (GroupId::R1, GroupAction::Invert) => {
                let n = shape[0];
                Some((0..n).map(|i| self.values[n - 1 - i]).collect())
            }
            (GroupId::R1, GroupAction::Conjugate(_)) => Some(self.values.clone()),
            _ => None,
        }
    }

    /// Group convolution `(self * other)(g) = INT self(h) other(h^-1 g) dh`
    /// by direct quadrature over `h`; the result is normalized.
    ///
    /// On rotation grids the shifted inner factor is evaluated through
    /// its Fourier blocks at the grid's admissible bandwidth, accumulated
    /// node by node — every shifted copy then integrates exactly, so the
    /// pre-normalization mass is the product of the input masses to
    /// roundoff and the result matches the true convolution to quadrature
    /// precision whenever `other` is band-resolvable. (Piecewise
    /// interpolation of the inner factor cannot reach the contracted
    /// tolerances: its `h^2` bias on the polar axis is of order 1e-3 at
    /// suite resolutions.) Cost O(N * SUM_l (2l+1)^3).
    ///
    /// Other grids use the literal O(N^2) double quadrature with
    /// interpolated inner evaluation; on truncated windows the
    /// pre-normalization mass defect is gated at [`WINDOW_LEAK_TOL`]
    /// (support escaping the window is an error, per the truncation
    /// contract).
    pub fn convolve(&self, other: &DensityField) -> Result<DensityField> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid.spec() != other.grid.spec() {
            return Err(Error::GridMismatch {
                what: "convolution needs a shared grid",
            });
        }
        let grid = &self.grid;
        if grid.group() == GroupId::So3 {
            use crate::harmonic::{direct_convolution, grid_bandwidth, So3Harmonics};
            let ctx = So3Harmonics::new(grid.clone(), grid_bandwidth(grid))?;
            let f2 = ctx.forward(other.values())?;
            let spec = direct_convolution(grid, &self.values, &f2)?;
            let mut values = ctx.synthesize(&spec)?;
            // The band representation can undershoot 0 by the inputs'
            // unresolved tail; clamp per the nonnegativity contract.
            for v in &mut values {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let mut out = DensityField {
                grid: grid.clone(),
                values,
                flags: DensityFlags::default(),
            };
            out.normalize()?;
            return Ok(out);
        }
        let w = grid.weights();
        let mut values = vec![0.0; grid.len()];
        for (hi, h) in grid.elements().iter().enumerate() {
            let fh = w[hi] * self.values[hi];
            if fh == 0.0 {
                continue;
            }
            let hinv = inverse(h);
            for (gi, g) in grid.elements().iter().enumerate() {
                values[gi] += fh * other.evaluate_or_zero(&compose(&hinv, g)?)?;
            }
        }
        if !grid.group().is_compact() {
            let expected = self.mass() * other.mass();
            let fraction = (grid.integrate(&values) / expected - 1.0).abs();
            if fraction > WINDOW_LEAK_TOL {
                return Err(Error::MassLeakage {
                    fraction,
                    limit: WINDOW_LEAK_TOL,
                });
            }
        }
        let mut out = DensityField::new(grid.clone(), values)?;
        out.normalize()?;
        Ok(out)
    }

    /// Chart-space finite-difference derivative along generator `i`.
    ///
    /// Gradient components come from the 4th-order central stencil on
    /// periodic axes and 5-point Fornberg weights on bounded axes
    /// (one-sided at the window edges); the generator field is applied
    /// through the inverse-transpose chart Jacobian: right derivative
    /// rows are `J_r^{-T} grad`, left rows `-J_l^{-T} grad`.
    pub fn lie_derivative(&self, i: usize, side: Side) -> Result<DensityField> {
        let grad = self.chart_gradient()?;
        let grid = &self.grid;
        let dim = grid.group().dim();
        if i >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: i,
            });
        }
        let mut out = vec![0.0; grid.len()];
        for idx in 0..grid.len() {
            let q = grid.coords(idx);
            let j = jacobian(grid.group(), grid.chart(), &q, side)?;
            let jinv = j.try_inverse().ok_or(Error::SingularChartPoint {
                what: "chart Jacobian not invertible at node",
            })?;
            // Row i of J^{-T} grad = column i of J^{-1} dotted with grad.
            let mut acc = 0.0;
            for a in 0..dim {
                acc += jinv[(a, i)] * grad[a][idx];
            }
            out[idx] = match side {
                Side::Right => acc,
                Side::Left => -acc,
            };
        }
        Ok(DensityField {
            grid: grid.clone(),
            values: out,
            flags: DensityFlags::default(),
        })
    }

    /// Per-axis partial derivatives at every node.
    fn chart_gradient(&self) -> Result<Vec<Vec<f64>>> {
        let grid = &self.grid;
        let axes = grid.axes();
        let shape = grid.shape();
        let mut grad = vec![vec![0.0; grid.len()]; axes.len()];
        for (ax, a) in axes.iter().enumerate() {
            let n = shape[ax];
            // Stencil weights per node of this axis.
            let stencils: Vec<(Vec<isize>, Vec<f64>)> = match a.kind {
                AxisKind::PeriodicUniform => {
                    let h = std::f64::consts::TAU / n as f64;
                    let c = [1.0 / (12.0 * h), -8.0 / (12.0 * h), 8.0 / (12.0 * h), -1.0 / (12.0 * h)];
                    (0..n)
                        .map(|_| (vec![-2isize, -1, 1, 2], c.to_vec()))
                        .collect()
                }
                AxisKind::GaussLegendre => (0..n)
                    .map(|c| {
                        let lo = (c as isize - 2).clamp(0, n as isize - 5) as usize;
                        let nodes: Vec<f64> = (lo..lo + 5).map(|t| a.nodes[t]).collect();
                        let w = fd_weights_first(a.nodes[c], &nodes);
                        let offs: Vec<isize> =
                            (lo..lo + 5).map(|t| t as isize - c as isize).collect();
                        (offs, w)
                    })
                    .collect(),
            };
            if a.kind == AxisKind::GaussLegendre && n < 5 {
                return Err(Error::Config(
                    "derivatives need at least 5 nodes per bounded axis".into(),
                ));
            }
            for idx in 0..grid.len() {
                let multi = grid.multi_index(idx);
                let c = multi[ax];
                let (offs, w) = &stencils[c];
                let mut acc = 0.0;
                for (o, wv) in offs.iter().zip(w.iter()) {
                    let mut m2 = multi.clone();
                    let j = c as isize + o;
                    m2[ax] = if a.kind == AxisKind::PeriodicUniform {
                        ((j % n as isize + n as isize) % n as isize) as usize
                    } else {
                        j as usize
                    };
                    acc += wv * self.values[grid.flat_index(&m2)];
                }
                grad[ax][idx] = acc;
            }
        }
        Ok(grad)
    }

    /// Certify `f(g^-1) = f(g)` through the grid's exact inversion
    /// permutation: sets the `symmetric` flag iff the sup-residual is
    /// below [`VERIFIED_FLAG_TOL`], and returns the residual. Grids
    /// without an exact inversion path refuse — an interpolated route
    /// cannot certify at flag precision.
    pub fn verify_symmetric(&mut self) -> Result<f64> {
        let inverted = self
            .permutation_transform(&GroupAction::Invert)
            .ok_or_else(|| {
                Error::Config(
                    "symmetry certification needs an exact inversion permutation on this grid"
                        .into(),
                )
            })?;
        let residual = self
            .values
            .iter()
            .zip(&inverted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        self.flags.symmetric = residual < VERIFIED_FLAG_TOL;
        Ok(residual)
    }

    /// Certify `f(h^-1 g h) = f(g)` for all `h` and set the
    /// `class_function` flag; returns the certification residual.
    ///
    /// Abelian grids (circle, line) are class trivially. On rotation
    /// grids the structural characterization is used: a density is a
    /// class function exactly when every Fourier block is a scalar
    /// multiple of the identity (it must commute with each irreducible
    /// representation). The residual combines the off-scalar part of the
    /// spectrum with the synthesis round-trip defect — the latter guards
    /// against unresolved content the spectral test cannot see, so
    /// non-band-limited densities are never certified. Pointwise
    /// conjugation sampling is *not* used: the grid-exact conjugations
    /// (z-axis) leave some non-class densities fixed, so that test would
    /// certify unsoundly.
    pub fn verify_class_function(&mut self) -> Result<f64> {
        let residual = match self.grid.group() {
            GroupId::So2 | GroupId::R1 => 0.0,
            GroupId::So3 => {
                use crate::harmonic::{grid_bandwidth, So3Harmonics};
                let ctx = So3Harmonics::new(self.grid.clone(), grid_bandwidth(&self.grid))?;
                let spec = ctx.forward(&self.values)?;
                let round = ctx.synthesize(&spec)?;
                let peak = self.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                let mut r = self
                    .values
                    .iter()
                    .zip(&round)
                    .map(|(a, b)| (a - b).abs() / peak)
                    .fold(0.0f64, f64::max);
                for l in 0..=spec.l_max() {
                    let blk = spec.block(l);
                    let dim = 2 * l + 1;
                    let mean = blk.trace() / num_complex::Complex64::new(dim as f64, 0.0);
                    for a in 0..dim {
                        for b in 0..dim {
                            let want = if a == b {
                                mean
                            } else {
                                num_complex::Complex64::new(0.0, 0.0)
                            };
                            r = r.max((blk[(a, b)] - want).norm());
                        }
                    }
                }
                r
            }
            _ => {
                return Err(Error::Config(
                    "class certification is implemented for rotation and abelian grids".into(),
                ))
            }
        };
        self.flags.class_function = residual < VERIFIED_FLAG_TOL;
        Ok(residual)
    }

    /// Marginalize along a subgroup decomposition, with each output
    /// normalized against its own reference measure.
    ///
    /// `CosetCircle` (rotation grid, Euler chart): `H` is the circle of
    /// rotations about the chart's distinguished axis, entered through
    /// the third Euler angle. With coset representatives `(a, b, 0)`,
    /// `g = rep * h` splits the chart exactly, so the subgroup marginal
    /// `f_H(h) = INT f(rep h) d(gH)` keeps the third axis and the coset
    /// marginal `f_{G/H}(gH) = INT_H f(rep h) dh` keeps the first two.
    ///
    /// `DoubleCosetEuler`: the three single-angle marginals of the
    /// `H\G/H` split, against the normalized per-axis measures (the
    /// polar axis carries the half-sine weight).
    ///
    /// Direct products and nested chains are not representable on a
    /// single simple-factor grid and refuse here: product factors are
    /// separate grids (decompose each factor density on its own), and
    /// nested chains need the finite-group backend.
    pub fn marginalize(&self, spec: DecompositionSpec) -> Result<Marginals> {
        let euler_rotation = self.grid.group() == GroupId::So3;
        match spec {
            DecompositionSpec::CosetCircle => {
                if !euler_rotation {
                    return Err(Error::DecompositionNotAdmissible {
                        what: format!(
                            "circle-coset split needs the rotation Euler grid, got {:?}",
                            self.grid.group()
                        ),
                    });
                }
                let mut subgroup = self.marginalize_axes(&[2])?;
                let mut coset = self.marginalize_axes(&[0, 1])?;
                subgroup.renormalize()?;
                coset.renormalize()?;
                Ok(Marginals::Coset { subgroup, coset })
            }
            DecompositionSpec::DoubleCosetEuler => {
                if !euler_rotation {
                    return Err(Error::DecompositionNotAdmissible {
                        what: format!(
                            "double-coset split needs the rotation Euler grid, got {:?}",
                            self.grid.group()
                        ),
                    });
                }
                let mut alpha = self.marginalize_axes(&[0])?;
                let mut beta = self.marginalize_axes(&[1])?;
                let mut gamma = self.marginalize_axes(&[2])?;
                alpha.renormalize()?;
                beta.renormalize()?;
                gamma.renormalize()?;
                Ok(Marginals::DoubleCoset { alpha, beta, gamma })
            }
            DecompositionSpec::DirectProduct => Err(Error::DecompositionNotAdmissible {
                what: "direct-product factors are separate grids; marginalize each factor \
                       density on its own grid"
                    .into(),
            }),
            DecompositionSpec::NestedChain => Err(Error::DecompositionNotAdmissible {
                what: "nested chains are a finite-group construction; rotation grids expose \
                       only the circle subgroup"
                    .into(),
            }),
        }
    }

    /// Marginal over the dropped axes: keeps `keep` (ascending), summing
    /// the complementary axes against their own weights. The result is a
    /// density with respect to the product measure of the kept axes.
    pub fn marginalize_axes(&self, keep: &[usize]) -> Result<AxisMarginal> {
        let dim = self.grid.shape().len();
        if keep.is_empty()
            || keep.windows(2).any(|w| w[0] >= w[1])
            || keep.iter().any(|&a| a >= dim)
        {
            return Err(Error::Config("bad marginal axis list".into()));
        }
        let axes = self.grid.axes();
        let kept_shape: Vec<usize> = keep.iter().map(|&a| self.grid.shape()[a]).collect();
        let out_len: usize = kept_shape.iter().product();
        let mut values = vec![0.0; out_len];
        for idx in 0..self.grid.len() {
            let multi = self.grid.multi_index(idx);
            let mut w = 1.0;
            for (ax, &m) in multi.iter().enumerate() {
                if !keep.contains(&ax) {
                    w *= axes[ax].weights[m];
                }
            }
            let mut oi = 0;
            for (pos, &ax) in keep.iter().enumerate() {
                oi = oi * kept_shape[pos] + multi[ax];
            }
            values[oi] += w * self.values[idx];
        }
        Ok(AxisMarginal {
            shape: kept_shape.clone(),
            nodes: keep.iter().map(|&a| axes[a].nodes.clone()).collect(),
            weights: keep.iter().map(|&a| axes[a].weights.clone()).collect(),
            values,
        })
    }
}

/// A marginal density over a subset of grid axes, with its own product
/// reference measure.
#[derive(Debug, Clone)]
pub struct AxisMarginal {
    pub shape: Vec<usize>,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl AxisMarginal {
    pub fn integrate(&self) -> f64 {
        neumaier_sum((0..self.values.len()).map(|i| self.weight(i) * self.values[i]))
    }

    /// Product weight of a flat index.
    pub fn weight(&self, mut idx: usize) -> f64 {
        let mut w = 1.0;
        for ax in (0..self.shape.len()).rev() {
            let m = idx % self.shape[ax];
            idx /= self.shape[ax];
            w *= self.weights[ax][m];
        }
        w
    }

    /// Scale to unit mass against the product reference measure;
    /// returns the mass it had.
    pub fn renormalize(&mut self) -> Result<f64> {
        let mass = self.integrate();
        if !(mass.is_finite() && mass > 1e-300) {
            return Err(Error::NotNormalizable { mass });
        }
        for v in &mut self.values {
            *v /= mass;
        }
        Ok(mass)
    }

    /// Differential entropy `-SUM w v log v` with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        neumaier_sum((0..self.values.len()).map(|i| {
            let v = self.values[i];
            if v > 0.0 {
                -self.weight(i) * v * v.ln()
            } else {
                0.0
            }
        }))
    }
}

/// Convenience: chart point of a grid node (used by callers building
/// custom evaluations).
pub fn node_point(grid: &Grid, idx: usize) -> Result<ChartPoint> {
    ChartPoint::new(grid.group(), grid.chart(), grid.coords(idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{chart_to_element, exp_map, AlgebraVector, ChartId};
    use crate::harmonic::{derivative_spectrum, So3Harmonics, So3Spectrum};
    use approx::assert_relative_eq;
    use num_complex::Complex64 as C64;

    fn se2_gaussian(grid: &Arc<Grid>, sigma: f64) -> DensityField {
        let mut d = DensityField::from_chart_fn(grid.clone(), |q| {
            let r2 = q[0] * q[0] + q[1] * q[1];
            (-(r2) / (2.0 * sigma * sigma)).exp() * (1.0 + 0.5 * q[2].cos())
        })
        .unwrap();
        d.normalize().unwrap();
        d
    }

    #[test]
    fn normalize_and_truncation_gate() {
        let grid = Grid::build(GroupId::Se2, &[24, 24, 8], Some(4.0)).unwrap();
        let d = se2_gaussian(&grid, 0.6);
        assert_relative_eq!(d.mass(), 1.0, epsilon = 1e-12);
        assert!(d.check_truncation(1e-8).unwrap() < 1e-8);
    }

    #[test]
    fn rejects_bad_samples() {
        let grid = Grid::build(GroupId::R1, &[8], Some(2.0)).unwrap();
        let bad = vec![1.0, -0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            DensityField::new(grid.clone(), bad),
            Err(Error::NegativeDensity { .. })
        ));
        let zero = vec![0.0; 8];
        let mut z = DensityField::new(grid, zero).unwrap();
        assert!(matches!(
            z.normalize(),
            Err(Error::NotNormalizable { .. })
        ));
    }

    #[test]
    fn evaluation_reproduces_nodes_and_interpolates_smoothly() {
        let grid = Grid::build(GroupId::R1, &[64], Some(6.0)).unwrap();
        let f = |x: f64| (-0.5 * x * x).exp();
        let d = DensityField::from_chart_fn(grid.clone(), |q| f(q[0])).unwrap();
        for idx in [0, 10, 31, 63] {
            let x = grid.coords(idx)[0];
            let g = chart_to_element(
                &ChartPoint::new(GroupId::R1, ChartId::Line, vec![x]).unwrap(),
            )
            .unwrap();
            assert_relative_eq!(d.evaluate(&g).unwrap(), f(x), epsilon = 1e-14);
        }
        // Between nodes: linear interpolation error ~ h^2 f''.
        for &x in &[0.11, -1.47, 2.83] {
            let g = chart_to_element(
                &ChartPoint::new(GroupId::R1, ChartId::Line, vec![x]).unwrap(),
            )
            .unwrap();
            assert!((d.evaluate(&g).unwrap() - f(x)).abs() < 5e-3);
        }
        // Inside the window but beyond the outermost node: zero.
        let edge = grid.axes()[0].nodes[63];
        assert_eq!(d.evaluate_coords(&[(edge + 6.0) / 2.0]).unwrap(), 0.0);
        // Outside the window: a contract violation naming the axis.
        let g = chart_to_element(
            &ChartPoint::new(GroupId::R1, ChartId::Line, vec![7.0]).unwrap(),
        )
        .unwrap();
        match d.evaluate(&g) {
            Err(Error::OutsideTruncation { axis, value, hi, .. }) => {
                assert_eq!(axis, 0);
                assert_eq!(value, 7.0);
                assert_eq!(hi, 6.0);
            }
            other => panic!("expected window escape, got {other:?}"),
        }
        // The engines read the same point as density zero.
        assert_eq!(d.evaluate_or_zero(&g).unwrap(), 0.0);
    }

    #[test]
    fn rotation_permutation_paths_are_exact() {
        let grid = Grid::build(GroupId::So3, &[12, 7, 12], None).unwrap();
        let f = |g: &GroupElement| {
            let m = g.matrix();
            (1.0 + 0.4 * m.trace() + 0.2 * m[(0, 2)]).powi(2)
        };
        let raw = DensityField::from_fn(grid.clone(), f).unwrap();
        let mass = raw.mass();
        let mut d = raw;
        d.normalize().unwrap();
        // Inversion twice is the identity, bit for bit.
        let (inv1, route) = d.transform(&GroupAction::Invert).unwrap();
        assert_eq!(route, TransformRoute::ExactPermutation);
        let (inv2, _) = inv1.transform(&GroupAction::Invert).unwrap();
        assert_eq!(d.values(), inv2.values());
        // Inverted field equals the function at the inverted node exactly.
        for idx in [0, 100, 757] {
            let gi = inverse(grid.element(idx));
            assert_relative_eq!(inv1.values()[idx], f(&gi) / mass, epsilon = 1e-12);
        }
        // Left shift by an azimuthal node rotation.
        let h = chart_to_element(
            &ChartPoint::new(
                GroupId::So3,
                ChartId::EulerZxz,
                vec![3.0 * std::f64::consts::TAU / 12.0, 0.0, 0.0],
            )
            .unwrap(),
        )
        .unwrap();
        let (shifted, route) = d.transform(&GroupAction::LeftShift(h.clone())).unwrap();
        assert_eq!(route, TransformRoute::ExactPermutation);
        let hinv = inverse(&h);
        for idx in [3, 333, 800] {
            let arg = compose(&hinv, grid.element(idx)).unwrap();
            assert_relative_eq!(shifted.values()[idx], f(&arg) / mass, epsilon = 1e-12);
        }
        // Conjugation by the same node rotation also permutes.
        let (_, route) = d.transform(&GroupAction::Conjugate(h)).unwrap();
        assert_eq!(route, TransformRoute::ExactPermutation);
        // A generic rotation falls back to interpolation.
        let hgen = exp_map(&AlgebraVector::new(GroupId::So3, vec![0.3, 0.2, 0.1]).unwrap());
        let (_, route) = d.transform(&GroupAction::LeftShift(hgen)).unwrap();
        assert_eq!(route, TransformRoute::Interpolated);
    }

    #[test]
    fn interpolated_shift_tracks_ground_truth() {
        let grid = Grid::build(GroupId::Se2, &[40, 40, 16], Some(4.0)).unwrap();
        let sigma = 1.0f64;
        let f = |q: &[f64]| {
            ((-(q[0] * q[0] + q[1] * q[1]) / (2.0 * sigma * sigma)).exp())
                * (1.0 + 0.3 * q[2].sin())
        };
        let d = DensityField::from_chart_fn(grid.clone(), f).unwrap();
        let h = chart_to_element(
            &ChartPoint::new(GroupId::Se2, ChartId::CartesianTheta, vec![0.25, -0.4, 0.5])
                .unwrap(),
        )
        .unwrap();
        let (shifted, route) = d.transform(&GroupAction::LeftShift(h.clone())).unwrap();
        assert_eq!(route, TransformRoute::Interpolated);
        let hinv = inverse(&h);
        let mut worst = 0.0f64;
        for idx in 0..grid.len() {
            let arg = compose(&hinv, grid.element(idx)).unwrap();
            let q = element_to_chart(&arg, ChartId::CartesianTheta).unwrap();
            // Skip pullback points outside the window (both are ~0 there).
            if q.coords[0].abs() > 3.4 || q.coords[1].abs() > 3.4 {
                continue;
            }
            worst = worst.max((shifted.values()[idx] - f(&q.coords)).abs());
        }
        // Multilinear error sums f'' h^2 / 8 over axes: ~0.016 per
        // translation axis for this peak-1.3 field at ~0.31 spacing.
        assert!(worst < 4e-2, "worst interpolation error {worst}");
    }

    #[test]
    fn line_convolution_of_gaussians() {
        let grid = Grid::build(GroupId::R1, &[96], Some(6.0)).unwrap();
        let gauss = |s: f64| {
            move |q: &[f64]| {
                (-(q[0] * q[0]) / (2.0 * s * s)).exp()
                    / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
        };
        let d1 = DensityField::from_chart_fn(grid.clone(), gauss(0.7)).unwrap();
        let d2 = DensityField::from_chart_fn(grid.clone(), gauss(0.9)).unwrap();
        let conv = d1.convolve(&d2).unwrap();
        let s = (0.7f64 * 0.7 + 0.9 * 0.9).sqrt();
        let expect = gauss(s);
        let mut worst = 0.0f64;
        for idx in 0..grid.len() {
            let q = grid.coords(idx);
            if q[0].abs() < 4.5 {
                worst = worst.max((conv.values()[idx] - expect(&q)).abs());
            }
        }
        // Engine-grade: limited by multilinear interpolation of the inner
        // factor at ~0.2 node spacing.
        assert!(worst < 3e-3, "worst convolution error {worst}");
        assert_relative_eq!(conv.mass(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn finite_difference_derivative_matches_spectral_oracle() {
        // Low-bandwidth density on a fine azimuthal grid keeps the FD
        // truncation error well below the assertion threshold.
        let grid = Grid::build(GroupId::So3, &[32, 12, 32], None).unwrap();
        let ctx = So3Harmonics::new(grid.clone(), 4).unwrap();
        // Entries obey the real-field symmetry fhat_{mn} =
        // (-1)^{m-n} conj(fhat_{-m,-n}) pairwise.
        let mut spec = So3Spectrum::zeros(2);
        *spec.block_mut(0) = nalgebra::DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        spec.block_mut(1)[(0, 2)] = C64::new(0.05, 0.02);
        spec.block_mut(1)[(2, 0)] = C64::new(0.05, -0.02);
        spec.block_mut(2)[(1, 3)] = C64::new(0.03, -0.01);
        spec.block_mut(2)[(3, 1)] = C64::new(0.03, 0.01);
        spec.block_mut(1)[(1, 1)] = C64::new(0.1, 0.0);
        let vals = ctx.synthesize(&spec).unwrap();
        let d = DensityField::new(grid.clone(), vals.iter().map(|v| v + 1.0).collect()).unwrap();
        for side in [Side::Right, Side::Left] {
            for i in 0..3 {
                let fd = d.lie_derivative(i, side).unwrap();
                let oracle = ctx
                    .synthesize(&derivative_spectrum(&spec, i, side))
                    .unwrap();
                let mut worst = 0.0f64;
                for idx in 0..grid.len() {
                    worst = worst.max((fd.values()[idx] - oracle[idx]).abs());
                }
                assert!(worst < 5e-3, "side {side:?}, generator {i}: {worst}");
            }
        }
    }

    #[test]
    fn marginals_integrate_consistently() {
        let grid = Grid::build(GroupId::So3, &[8, 6, 8], None).unwrap();
        let mut d = DensityField::from_fn(grid.clone(), |g| {
            (1.0 + 0.5 * g.matrix().trace() / 3.0).powi(2)
        })
        .unwrap();
        d.normalize().unwrap();
        // Marginal onto the polar axis keeps unit mass.
        let m = d.marginalize_axes(&[1]).unwrap();
        assert_relative_eq!(m.integrate(), 1.0, epsilon = 1e-12);
        // Two-axis marginal also keeps unit mass, and the polar-only
        // marginal of that agrees with the direct one.
        let m2 = d.marginalize_axes(&[0, 1]).unwrap();
        assert_relative_eq!(m2.integrate(), 1.0, epsilon = 1e-12);
        // Uniform density has marginal exactly 1 against its reference.
        let u = DensityField::from_fn(grid.clone(), |_| 1.0).unwrap();
        let mu = u.marginalize_axes(&[2]).unwrap();
        for v in &mu.values {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-13);
        }
        // Entropy of the uniform marginal is zero (log of 1).
        assert!(mu.entropy().abs() < 1e-12);
    }

    #[test]
    fn off_node_evaluation_converges_at_second_order() {
        let coarse = Grid::build(GroupId::So3, &[16, 16, 16], None).unwrap();
        let fine = Grid::build(GroupId::So3, &[32, 32, 32], None).unwrap();
        let (dc, spec) =
            crate::families::band_limited_rotation_density(&coarse, 3, 0.5, 21).unwrap();
        let (df, spec_f) =
            crate::families::band_limited_rotation_density(&fine, 3, 0.5, 21).unwrap();
        // Same seed, same spectrum: both grids sample one function.
        assert!((spec.block(2)[(0, 1)] - spec_f.block(2)[(0, 1)]).norm() < 1e-15);
        let pts = [
            [0.21, -0.40, 0.33],
            [1.30, 0.70, -0.90],
            [-0.45, 1.90, 0.18],
            [0.05, 0.88, 2.10],
            [-1.70, 0.90, 0.40],
        ];
        let (mut wc, mut wf) = (0.0f64, 0.0f64);
        for x in pts {
            let g = exp_map(&AlgebraVector::new(GroupId::So3, x.to_vec()).unwrap());
            let exact = So3Harmonics::evaluate(&spec, &g);
            wc = wc.max((dc.evaluate(&g).unwrap() - exact).abs());
            wf = wf.max((df.evaluate(&g).unwrap() - exact).abs());
        }
        assert!(wc < 5e-2, "coarse off-node defect {wc}");
        // Halving the spacing cuts the multilinear defect ~4x.
        assert!(wf < wc / 2.5, "defects {wc} -> {wf}");
    }

    #[test]
    fn symmetry_flag_certifies_only_exact_inversion_invariance() {
        let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
        let (mut sym, _) =
            crate::families::symmetric_rotation_density(&grid, 4, 0.5, 3).unwrap();
        let r = sym.verify_symmetric().unwrap();
        assert!(r < VERIFIED_FLAG_TOL, "residual {r}");
        assert!(sym.flags().symmetric);
        // Editing samples drops the certificate.
        sym.values_mut()[0] += 0.0;
        assert!(!sym.flags().symmetric);

        let (mut gen, _) =
            crate::families::band_limited_rotation_density(&grid, 3, 0.5, 11).unwrap();
        let r = gen.verify_symmetric().unwrap();
        assert!(r > 1e-3, "generic draw should be visibly asymmetric: {r}");
        assert!(!gen.flags().symmetric);

        // Line nodes are symmetric about zero, so an even density passes.
        let line = Grid::build(GroupId::R1, &[48], Some(6.0)).unwrap();
        let mut even =
            DensityField::from_chart_fn(line.clone(), |q| (-0.5 * q[0] * q[0]).exp()).unwrap();
        even.normalize().unwrap();
        assert!(even.verify_symmetric().unwrap() < 1e-14);
        assert!(even.flags().symmetric);

        // The motion grid has no exact inversion permutation: refuse
        // rather than certify through interpolation.
        let se2 = Grid::build(GroupId::Se2, &[8, 8, 8], Some(4.0)).unwrap();
        let mut m = DensityField::from_fn(se2, |_| 1.0).unwrap();
        assert!(m.verify_symmetric().is_err());
    }

    #[test]
    fn class_flag_follows_the_scalar_block_characterization() {
        let grid = Grid::build(GroupId::So3, &[16, 16, 16], None).unwrap();
        // Character combination 1 + 0.2 chi_1 + 0.1 chi_2: scalar on
        // every level, positive since chi_l >= -1.
        let mut spec = So3Spectrum::zeros(2);
        spec.block_mut(0)[(0, 0)] = C64::new(1.0, 0.0);
        for k in 0..3 {
            spec.block_mut(1)[(k, k)] = C64::new(0.2 / 3.0, 0.0);
        }
        for k in 0..5 {
            spec.block_mut(2)[(k, k)] = C64::new(0.1 / 5.0, 0.0);
        }
        let ctx = So3Harmonics::new(grid.clone(), 2).unwrap();
        let mut chi = DensityField::new(grid.clone(), ctx.synthesize(&spec).unwrap()).unwrap();
        let r = chi.verify_class_function().unwrap();
        assert!(r < VERIFIED_FLAG_TOL, "class residual {r}");
        assert!(chi.flags().class_function);

        // Conjugating by a grid-exact rotation leaves the samples fixed.
        let h = chart_to_element(
            &ChartPoint::new(
                GroupId::So3,
                ChartId::EulerZxz,
                vec![5.0 * std::f64::consts::TAU / 16.0, 0.0, 0.0],
            )
            .unwrap(),
        )
        .unwrap();
        let (conj, route) = chi.transform(&GroupAction::Conjugate(h)).unwrap();
        assert_eq!(route, TransformRoute::ExactPermutation);
        let worst = chi
            .values()
            .iter()
            .zip(conj.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-8, "conjugation moved a class function by {worst}");

        // A generic band-limited draw has visibly non-scalar blocks.
        let (mut gen, _) =
            crate::families::band_limited_rotation_density(&grid, 3, 0.5, 17).unwrap();
        let r = gen.verify_class_function().unwrap();
        assert!(r > 1e-3, "generic draw should fail visibly: {r}");
        assert!(!gen.flags().class_function);

        // Abelian grids are class trivially; the motion group has no
        // certification route.
        let circle = Grid::build(GroupId::So2, &[32], None).unwrap();
        let mut c =
            DensityField::from_chart_fn(circle, |q| 1.0 + 0.3 * q[0].cos()).unwrap();
        assert_eq!(c.verify_class_function().unwrap(), 0.0);
        assert!(c.flags().class_function);
        let se2 = Grid::build(GroupId::Se2, &[8, 8, 8], Some(4.0)).unwrap();
        let mut m = DensityField::from_fn(se2, |_| 1.0).unwrap();
        assert!(m.verify_class_function().is_err());
    }

    #[test]
    fn subgroup_decompositions_produce_unit_mass_marginals() {
        let grid = Grid::build(GroupId::So3, &[8, 6, 8], None).unwrap();
        let mut d = DensityField::from_fn(grid.clone(), |g| {
            (1.0 + 0.4 * g.matrix().trace()).powi(2)
        })
        .unwrap();
        d.normalize().unwrap();
        match d.marginalize(DecompositionSpec::CosetCircle).unwrap() {
            Marginals::Coset { subgroup, coset } => {
                assert_relative_eq!(subgroup.integrate(), 1.0, epsilon = 1e-12);
                assert_relative_eq!(coset.integrate(), 1.0, epsilon = 1e-12);
                assert_eq!(subgroup.shape, vec![8]);
                assert_eq!(coset.shape, vec![8, 6]);
            }
            other => panic!("expected a circle-coset split, got {other:?}"),
        }
        match d.marginalize(DecompositionSpec::DoubleCosetEuler).unwrap() {
            Marginals::DoubleCoset { alpha, beta, gamma } => {
                for m in [&alpha, &beta, &gamma] {
                    assert_relative_eq!(m.integrate(), 1.0, epsilon = 1e-12);
                }
            }
            other => panic!("expected the three-angle split, got {other:?}"),
        }
        // The uniform density marginalizes to uniform against each
        // reference measure.
        let u = DensityField::from_fn(grid.clone(), |_| 1.0).unwrap();
        if let Marginals::DoubleCoset { beta, .. } =
            u.marginalize(DecompositionSpec::DoubleCosetEuler).unwrap()
        {
            for v in &beta.values {
                assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
            }
        }
        // Products and chains are not single-grid decompositions.
        assert!(matches!(
            d.marginalize(DecompositionSpec::DirectProduct),
            Err(Error::DecompositionNotAdmissible { .. })
        ));
        assert!(matches!(
            d.marginalize(DecompositionSpec::NestedChain),
            Err(Error::DecompositionNotAdmissible { .. })
        ));
        let circle = Grid::build(GroupId::So2, &[16], None).unwrap();
        let c = DensityField::from_chart_fn(circle, |_| 1.0).unwrap();
        assert!(matches!(
            c.marginalize(DecompositionSpec::CosetCircle),
            Err(Error::DecompositionNotAdmissible { .. })
        ));
    }

    #[test]
    fn window_escape_gates_interpolated_mass() {
        let grid = Grid::build(GroupId::Se2, &[16, 16, 8], Some(4.0)).unwrap();
        let d = se2_gaussian(&grid, 0.5);
        // A shift towards the window edge loses a sigma-level tail.
        let far = chart_to_element(
            &ChartPoint::new(GroupId::Se2, ChartId::CartesianTheta, vec![3.5, 0.0, 0.0])
                .unwrap(),
        )
        .unwrap();
        match d.transform(&GroupAction::LeftShift(far)) {
            Err(Error::MassLeakage { fraction, limit }) => assert!(fraction > limit),
            other => panic!("expected the mass-escape gate, got {other:?}"),
        }
        // A small interior shift survives and returns at unit mass.
        let near = chart_to_element(
            &ChartPoint::new(GroupId::Se2, ChartId::CartesianTheta, vec![0.3, 0.0, 0.0])
                .unwrap(),
        )
        .unwrap();
        let (shifted, route) = d.transform(&GroupAction::LeftShift(near)).unwrap();
        assert_eq!(route, TransformRoute::Interpolated);
        assert_relative_eq!(shifted.mass(), 1.0, epsilon = 1e-12);

        // Convolution widens support: two broad window densities
        // overflow the box and are gated too.
        let wide = se2_gaussian(&grid, 1.6);
        assert!(matches!(
            wide.convolve(&wide),
            Err(Error::MassLeakage { .. })
        ));
    }
}
