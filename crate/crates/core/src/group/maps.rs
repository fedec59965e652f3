//! Exponential/logarithm maps and chart conversions.
//!
//! Closed forms are used wherever they exist (Rodrigues for SO(3), the
//! planar V-matrix for SE(2), polynomials for H(1)); SL(2,R) goes through
//! the generic scaling-and-squaring exponential and its inverse, with the
//! trigonometric/hyperbolic closed form kept as a test oracle.
//!
//! Trigonometric coefficient ratios switch to 4th-order series below
//! `SMALL_ANGLE` so that no expression ever divides by a vanishing angle.

use super::{hat, vee, AlgebraVector, ChartId, ChartPoint, GroupElement, GroupId};
use crate::error::{Error, Result};
use crate::util::{expm, logm, wrap_2pi};
use nalgebra::DMatrix;

const SMALL_ANGLE: f64 = 1e-4;
/// Log rejects rotation angles within this margin of the cut locus.
const CUT_LOCUS_MARGIN: f64 = 1e-8;

/// sin(t)/t with series fallback.
fn sinc(t: f64) -> f64 {
    if t.abs() < SMALL_ANGLE {
        let t2 = t * t;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        t.sin() / t
    }
}

/// (1 - cos(t)) / t^2 with series fallback.
fn cosc(t: f64) -> f64 {
    if t.abs() < SMALL_ANGLE {
        let t2 = t * t;
        0.5 - t2 / 24.0 + t2 * t2 / 720.0
    } else {
        (1.0 - t.cos()) / (t * t)
    }
}

pub(crate) fn rot2(t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
}

/// Rotation about the z axis.
pub(crate) fn r3(t: f64) -> DMatrix<f64> {
    let (s, c) = t.sin_cos();
    DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
}

/// Rotation about the x axis.
pub(crate) fn r1(t: f64) -> DMatrix<f64> {
    let (s, c) = t.sin_cos();
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c])
}

/// Group exponential of an algebra vector.
pub fn exp_map(x: &AlgebraVector) -> GroupElement {
    let mat = match x.group {
        GroupId::So3 => {
            let r = x.norm();
            let xh = hat(x);
            let xh2 = &xh * &xh;
            DMatrix::identity(3, 3) + xh * sinc(r) + xh2 * cosc(r)
        }
        GroupId::Se2 => {
            let (v1, v2, th) = (x.coords[0], x.coords[1], x.coords[2]);
            let (a, b) = (sinc(th), cosc(th) * th);
            let mut m = DMatrix::identity(3, 3);
            m.view_mut((0, 0), (2, 2)).copy_from(&rot2(th));
            m[(0, 2)] = a * v1 - b * v2;
            m[(1, 2)] = b * v1 + a * v2;
            m
        }
        GroupId::H1 => {
            let (x1, x2, x3) = (x.coords[0], x.coords[1], x.coords[2]);
            let mut m = DMatrix::identity(3, 3);
            m[(0, 1)] = x1;
            m[(0, 2)] = x2 + 0.5 * x1 * x3;
            m[(1, 2)] = x3;
            m
        }
        GroupId::Sl2r => expm(&hat(x)),
        GroupId::R1 => {
            let mut m = DMatrix::identity(2, 2);
            m[(0, 1)] = x.coords[0];
            m
        }
        GroupId::So2 => rot2(x.coords[0]),
    };
    GroupElement {
        group: x.group,
        mat,
    }
}

/// Group logarithm. Fails on the cut locus (rotation angle within
/// `1e-8` of `pi` for SO(3)/SE(2)) and outside the image of `exp` for
/// SL(2,R) (trace <= -2 away from `-I`).
pub fn log_map(g: &GroupElement) -> Result<AlgebraVector> {
    let m = &g.mat;
    match g.group {
        GroupId::So3 => {
            let cos_t = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
            let t = cos_t.acos();
            if t > std::f64::consts::PI - CUT_LOCUS_MARGIN {
                return Err(Error::CutLocus {
                    angle: t,
                    limit: std::f64::consts::PI,
                });
            }
            // x^ = c (R - R^T) with c = t / (2 sin t).
            let c = if t < SMALL_ANGLE {
                let t2 = t * t;
                0.5 + t2 / 12.0 + 7.0 * t2 * t2 / 720.0
            } else {
                0.5 * t / t.sin()
            };
            let skew = (m - m.transpose()) * c;
            vee(GroupId::So3, &skew)
        }
        GroupId::Se2 => {
            let th = m[(1, 0)].atan2(m[(0, 0)]);
            if th.abs() > std::f64::consts::PI - CUT_LOCUS_MARGIN {
                return Err(Error::CutLocus {
                    angle: th.abs(),
                    limit: std::f64::consts::PI,
                });
            }
            let (a, b) = (sinc(th), cosc(th) * th);
            let den = a * a + b * b;
            let (tx, ty) = (m[(0, 2)], m[(1, 2)]);
            let v1 = (a * tx + b * ty) / den;
            let v2 = (-b * tx + a * ty) / den;
            AlgebraVector::new(GroupId::Se2, vec![v1, v2, th])
        }
        GroupId::H1 => {
            let (a, b, c) = (m[(0, 1)], m[(0, 2)], m[(1, 2)]);
            AlgebraVector::new(GroupId::H1, vec![a, b - 0.5 * a * c, c])
        }
        GroupId::Sl2r => {
            let x = logm(m).ok_or(Error::LogDiverged { trace: m.trace() })?;
            // Strip the numerically tiny trace before reading coefficients.
            let x = &x - DMatrix::identity(2, 2) * (x.trace() / 2.0);
            vee(GroupId::Sl2r, &x)
        }
        GroupId::R1 => AlgebraVector::new(GroupId::R1, vec![m[(0, 1)]]),
        GroupId::So2 => {
            AlgebraVector::new(GroupId::So2, vec![m[(1, 0)].atan2(m[(0, 0)])])
        }
    }
}

fn require_finite(q: &[f64]) -> Result<()> {
    if q.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config("non-finite chart coordinate".into()))
    }
}

/// Build the group element a chart point names.
pub fn chart_to_element(p: &ChartPoint) -> Result<GroupElement> {
    p.group.check_chart(p.chart)?;
    require_finite(&p.coords)?;
    let q = &p.coords;
    let mat = match (p.group, p.chart) {
        (GroupId::So3, ChartId::EulerZxz) => {
            if !(0.0..=std::f64::consts::PI).contains(&q[1]) {
                return Err(Error::Config(format!(
                    "polar Euler angle {} outside [0, pi]",
                    q[1]
                )));
            }
            r3(q[0]) * r1(q[1]) * r3(q[2])
        }
        (GroupId::So3, ChartId::AxisAngleExp) | (GroupId::Se2, ChartId::ExpCoords) => {
            let r = if p.group == GroupId::So3 {
                (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt()
            } else {
                q[2].abs()
            };
            if r >= std::f64::consts::PI {
                return Err(Error::CutLocus {
                    angle: r,
                    limit: std::f64::consts::PI,
                });
            }
            return Ok(exp_map(&AlgebraVector::new(p.group, q.clone())?));
        }
        (GroupId::H1, ChartId::ExpCoords) => {
            return Ok(exp_map(&AlgebraVector::new(p.group, q.clone())?));
        }
        (GroupId::Se2, ChartId::CartesianTheta) => {
            let mut m = DMatrix::identity(3, 3);
            m.view_mut((0, 0), (2, 2)).copy_from(&rot2(q[2]));
            m[(0, 2)] = q[0];
            m[(1, 2)] = q[1];
            m
        }
        (GroupId::H1, ChartId::AlphaBetaGamma) => {
            let mut m = DMatrix::identity(3, 3);
            m[(0, 1)] = q[0];
            m[(0, 2)] = q[1];
            m[(1, 2)] = q[2];
            m
        }
        (GroupId::Sl2r, ChartId::Iwasawa) => {
            let (th, t, xi) = (q[0], q[1], q[2]);
            let shear = DMatrix::from_row_slice(2, 2, &[1.0, xi, 0.0, 1.0]);
            let stretch = DMatrix::from_row_slice(2, 2, &[t.exp(), 0.0, 0.0, (-t).exp()]);
            rot2(th) * stretch * shear
        }
        (GroupId::R1, ChartId::Line) => {
            let mut m = DMatrix::identity(2, 2);
            m[(0, 1)] = q[0];
            m
        }
        (GroupId::So2, ChartId::Angle) => rot2(q[0]),
        _ => unreachable!("admissibility checked above"),
    };
    Ok(GroupElement {
        group: p.group,
        mat,
    })
}

/// Chart coordinates of a group element. Angle-like coordinates come back
/// wrapped into `[0, 2*pi)` (the polar Euler angle into `[0, pi]`); at an
/// Euler gimbal configuration the free sum is stored entirely in the first
/// angle and the third is set to zero.
pub fn element_to_chart(g: &GroupElement, chart: ChartId) -> Result<ChartPoint> {
    g.group.check_chart(chart)?;
    let m = &g.mat;
    let coords = match (g.group, chart) {
        (GroupId::So3, ChartId::EulerZxz) => {
            let s_beta = (m[(0, 2)] * m[(0, 2)] + m[(1, 2)] * m[(1, 2)]).sqrt();
            let beta = s_beta.atan2(m[(2, 2)]);
            if s_beta < 1e-12 {
                // Gimbal: only alpha + gamma (beta = 0) or alpha - gamma
                // (beta = pi) is determined.
                let probe = if m[(2, 2)] > 0.0 {
                    m.clone()
                } else {
                    m * r1(std::f64::consts::PI)
                };
                let alpha = wrap_2pi(probe[(1, 0)].atan2(probe[(0, 0)]));
                vec![alpha, if m[(2, 2)] > 0.0 { 0.0 } else { std::f64::consts::PI }, 0.0]
            } else {
                let alpha = wrap_2pi(m[(0, 2)].atan2(-m[(1, 2)]));
                let gamma = wrap_2pi(m[(2, 0)].atan2(m[(2, 1)]));
                vec![alpha, beta, gamma]
            }
        }
        (GroupId::So3, ChartId::AxisAngleExp)
        | (GroupId::Se2, ChartId::ExpCoords)
        | (GroupId::H1, ChartId::ExpCoords) => log_map(g)?.coords,
        (GroupId::Se2, ChartId::CartesianTheta) => {
            vec![m[(0, 2)], m[(1, 2)], wrap_2pi(m[(1, 0)].atan2(m[(0, 0)]))]
        }
        (GroupId::H1, ChartId::AlphaBetaGamma) => vec![m[(0, 1)], m[(0, 2)], m[(1, 2)]],
        (GroupId::Sl2r, ChartId::Iwasawa) => {
            let norm1 = (m[(0, 0)] * m[(0, 0)] + m[(1, 0)] * m[(1, 0)]).sqrt();
            let th = wrap_2pi(m[(1, 0)].atan2(m[(0, 0)]));
            let t = norm1.ln();
            let xi = (th.cos() * m[(0, 1)] + th.sin() * m[(1, 1)]) / norm1;
            vec![th, t, xi]
        }
        (GroupId::R1, ChartId::Line) => vec![m[(0, 1)]],
        (GroupId::So2, ChartId::Angle) => vec![wrap_2pi(m[(1, 0)].atan2(m[(0, 0)]))],
        _ => unreachable!("admissibility checked above"),
    };
    ChartPoint::new(g.group, chart, coords)
}
