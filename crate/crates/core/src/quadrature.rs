//! Product quadrature grids on the default chart of each group.
//!
//! Axis rules are chosen so that integrals of band-limited functions are
//! exact, not merely convergent:
//!
//! - periodic angles get the uniform (trapezoidal) rule, which integrates
//!   `e^{i m t}` exactly for `0 < |m| < n`;
//! - the SO(3) polar angle is sampled at Gauss-Legendre nodes of
//!   `u = cos(beta)`, exact for polynomials in `u` up to degree `2n - 1`
//!   (rotational harmonics of two bandwidth-`B` functions stay exact as
//!   long as `2B <= 2n - 1`);
//! - noncompact axes are truncated to `[-T, T]` and get Gauss-Legendre
//!   nodes there.
//!
//! Flattened node weights already contain the invariant-measure density
//! (via the `cos(beta)` substitution for SO(3), the `e^{2t}/2` factor for
//! SL(2,R)), so `integrate` is a plain weighted sum. Weights multiply
//! across axes, which the marginalization code relies on.
//!
//! SO(3) grids require the two azimuthal axes to share an even node count:
//! that makes inversion and shifts by grid rotations exact index
//! permutations instead of interpolations.

use crate::error::{Error, Result};
use crate::group::{chart_to_element, ChartId, ChartPoint, GroupElement, GroupId};
use crate::util::{gauss_legendre, neumaier_sum};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Serializable description of a grid; `Grid::from_spec` rebuilds the
/// nodes bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub group: GroupId,
    pub chart: ChartId,
    /// Node count per axis, one entry per group dimension.
    pub shape: Vec<usize>,
    /// Half-width `T` of the noncompact axes; ignored for compact groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

/// How a single coordinate axis is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    /// Uniform nodes `k * 2 pi / n` on a full period.
    PeriodicUniform,
    /// Gauss-Legendre nodes, possibly through a change of variable.
    GaussLegendre,
}

#[derive(Debug, Clone)]
pub struct Axis {
    pub kind: AxisKind,
    pub nodes: Vec<f64>,
    /// Per-axis weights; the product over axes is the full Haar weight.
    pub weights: Vec<f64>,
}

/// A product quadrature grid with cached group elements per node.
#[derive(Debug)]
pub struct Grid {
    spec: GridSpec,
    axes: Vec<Axis>,
    weights: Vec<f64>,
    elements: Vec<GroupElement>,
}

pub const DEFAULT_HALF_WIDTH: f64 = 4.0;

impl Grid {
    /// Build a grid on the group's default chart.
    pub fn build(
        group: GroupId,
        shape: &[usize],
        half_width: Option<f64>,
    ) -> Result<Arc<Grid>> {
        Grid::from_spec(&GridSpec {
            group,
            chart: group.default_chart(),
            shape: shape.to_vec(),
            half_width,
        })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Arc<Grid>> {
        let group = spec.group;
        if spec.chart != group.default_chart() {
            return Err(Error::ChartNotAdmissible {
                group,
                chart: spec.chart,
            });
        }
        if spec.shape.len() != group.dim() {
            return Err(Error::DimensionMismatch {
                expected: group.dim(),
                got: spec.shape.len(),
            });
        }
        if spec.shape.iter().any(|&n| n == 0) {
            return Err(Error::Config("empty grid axis".into()));
        }
        let t = spec.half_width.unwrap_or(DEFAULT_HALF_WIDTH);
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Config(format!("bad half-width {t}")));
        }

        let tau = std::f64::consts::TAU;
        let periodic = |n: usize, w: f64| -> Axis {
            Axis {
                kind: AxisKind::PeriodicUniform,
                nodes: (0..n).map(|k| tau * k as f64 / n as f64).collect(),
                weights: vec![w / n as f64; n],
            }
        };
        let bounded = |n: usize, t: f64| -> Axis {
            let (x, w) = gauss_legendre(n);
            Axis {
                kind: AxisKind::GaussLegendre,
                nodes: x.iter().map(|&u| t * u).collect(),
                weights: w.iter().map(|&v| t * v).collect(),
            }
        };

        let axes: Vec<Axis> = match group {
            GroupId::So3 => {
                let [na, nb, ng] = [spec.shape[0], spec.shape[1], spec.shape[2]];
                if na != ng || na % 2 != 0 {
                    return Err(Error::Config(format!(
                        "rotation grid needs matching even azimuthal counts, got {na} x {ng}"
                    )));
                }
                // beta through u = cos(beta): nodes acos(u_j), weight glw/2;
                // combined with the two 1/n azimuthal axes the total mass
                // is exactly 1 (normalized Haar).
                let (u, w) = gauss_legendre(nb);
                let beta = Axis {
                    kind: AxisKind::GaussLegendre,
                    // Descending u gives ascending beta.
                    nodes: u.iter().rev().map(|&v| v.acos()).collect(),
                    weights: w.iter().rev().map(|&v| v / 2.0).collect(),
                };
                vec![periodic(na, 1.0), beta, periodic(ng, 1.0)]
            }
            GroupId::Se2 => vec![
                bounded(spec.shape[0], t),
                bounded(spec.shape[1], t),
                periodic(spec.shape[2], tau),
            ],
            GroupId::H1 => vec![
                bounded(spec.shape[0], t),
                bounded(spec.shape[1], t),
                bounded(spec.shape[2], t),
            ],
            GroupId::Sl2r => {
                // Fold the measure density e^{2t}/2 into the t axis.
                let mut taxis = bounded(spec.shape[1], t);
                for (w, x) in taxis.weights.iter_mut().zip(taxis.nodes.iter()) {
                    *w *= 0.5 * (2.0 * x).exp();
                }
                vec![periodic(spec.shape[0], tau), taxis, bounded(spec.shape[2], t)]
            }
            GroupId::R1 => vec![bounded(spec.shape[0], t)],
            GroupId::So2 => vec![periodic(spec.shape[0], 1.0)],
        };

        let total: usize = spec.shape.iter().product();
        let mut weights = Vec::with_capacity(total);
        let mut elements = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..total {
            let mut w = 1.0;
            let mut q = Vec::with_capacity(axes.len());
            for (a, &i) in axes.iter().zip(idx.iter()) {
                w *= a.weights[i];
                q.push(a.nodes[i]);
            }
            weights.push(w);
            elements.push(chart_to_element(&ChartPoint::new(
                group, spec.chart, q,
            )?)?);
            // Row-major increment.
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < axes[ax].nodes.len() {
                    break;
                }
                idx[ax] = 0;
            }
        }

        Ok(Arc::new(Grid {
            spec: spec.clone(),
            axes,
            weights,
            elements,
        }))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn group(&self) -> GroupId {
        self.spec.group
    }

    pub fn chart(&self) -> ChartId {
        self.spec.chart
    }

    pub fn shape(&self) -> &[usize] {
        &self.spec.shape
    }

    pub fn half_width(&self) -> f64 {
        self.spec.half_width.unwrap_or(DEFAULT_HALF_WIDTH)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn element(&self, idx: usize) -> &GroupElement {
        &self.elements[idx]
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    /// Flat index of a multi-index (row-major).
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (i, &m) in multi.iter().enumerate() {
            idx = idx * self.spec.shape[i] + m;
        }
        idx
    }

    /// Multi-index of a flat index.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.spec.shape.len()];
        for i in (0..self.spec.shape.len()).rev() {
            out[i] = idx % self.spec.shape[i];
            idx /= self.spec.shape[i];
        }
        out
    }

    /// Chart coordinates of a node.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let multi = self.multi_index(idx);
        multi
            .iter()
            .enumerate()
            .map(|(ax, &i)| self.axes[ax].nodes[i])
            .collect()
    }

    /// Weighted sum with compensated accumulation.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        neumaier_sum(
            self.weights
                .iter()
                .zip(values.iter())
                .map(|(w, v)| w * v),
        )
    }

    /// Total measure of the (possibly truncated) grid window.
    pub fn total_mass(&self) -> f64 {
        neumaier_sum(self.weights.iter().copied())
    }

    /// True at nodes lying on the outermost layer of any truncated axis.
    /// Used by the truncation-leakage gate: a density that puts visible
    /// mass here is being clipped by the window.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let bounded_axes: Vec<usize> = self
            .axes
            .iter()
            .enumerate()
            .filter(|(ax, a)| {
                a.kind == AxisKind::GaussLegendre
                    && !(self.spec.group == GroupId::So3 && *ax == 1)
            })
            .map(|(ax, _)| ax)
            .collect();
        if bounded_axes.is_empty() {
            return mask;
        }
        for idx in 0..self.len() {
            let multi = self.multi_index(idx);
            for &ax in &bounded_axes {
                let n = self.spec.shape[ax];
                if multi[ax] == 0 || multi[ax] == n - 1 {
                    mask[idx] = true;
                    break;
                }
            }
        }
        mask
    }

    /// Fraction of `|values|`-mass on the boundary layer; errors above `limit`.
    pub fn check_truncation(&self, values: &[f64], limit: f64) -> Result<f64> {
        let mask = self.boundary_mask();
        let total = neumaier_sum(
            self.weights
                .iter()
                .zip(values.iter())
                .map(|(w, v)| w * v.abs()),
        );
        if total <= 0.0 {
            return Ok(0.0);
        }
        let edge = neumaier_sum(
            self.weights
                .iter()
                .zip(values.iter())
                .zip(mask.iter())
                .filter(|(_, &m)| m)
                .map(|((w, v), _)| w * v.abs()),
        );
        let fraction = edge / total;
        if fraction > limit {
            return Err(Error::MassLeakage { fraction, limit });
        }
        Ok(fraction)
    }
}
