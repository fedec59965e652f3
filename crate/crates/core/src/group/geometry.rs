//! Chart Jacobians and the invariant-measure density.
//!
//! Column convention: for chart map `g(q)`,
//!
//! - right Jacobian: column `i` of `J_r(q)` is `vee(g^-1 dg/dq_i)`,
//! - left  Jacobian: column `i` of `J_l(q)` is `vee((dg/dq_i) g^-1)`.
//!
//! Every closed form below is pinned by a central-difference test against
//! that definition, so a sign or transpose slip cannot survive the suite.
//! Both determinants agree in absolute value (unimodularity), and the Haar
//! density in a chart is `|det J| / Z` with `Z` the total-mass constant
//! (8 pi^2 for SO(3), 2 pi for SO(2), 1 for the noncompact groups).

use super::maps::chart_to_element;
use super::{hat, AlgebraVector, ChartId, ChartPoint, GroupId, Side};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

const SMALL_ANGLE: f64 = 1e-4;

/// Invariant-measure weight of a chart point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaarWeight {
    /// Density of the (bi-invariant) measure against `dq_1 .. dq_n`.
    pub value: f64,
    /// True where the chart degenerates (the density vanishes and the
    /// Jacobian is not invertible there).
    pub singular: bool,
}

/// Left or right chart Jacobian, by closed form.
pub fn jacobian(group: GroupId, chart: ChartId, q: &[f64], side: Side) -> Result<DMatrix<f64>> {
    group.check_chart(chart)?;
    if q.len() != group.dim() {
        return Err(Error::DimensionMismatch {
            expected: group.dim(),
            got: q.len(),
        });
    }
    let j = match (group, chart) {
        (GroupId::So3, ChartId::EulerZxz) => {
            let (sa, ca) = q[0].sin_cos();
            let (sb, cb) = q[1].sin_cos();
            let (sg, cg) = q[2].sin_cos();
            match side {
                Side::Left => DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        0.0, ca, sa * sb, //
                        0.0, sa, -ca * sb, //
                        1.0, 0.0, cb,
                    ],
                ),
                Side::Right => DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        sb * sg, cg, 0.0, //
                        sb * cg, -sg, 0.0, //
                        cb, 0.0, 1.0,
                    ],
                ),
            }
        }
        (GroupId::So3, ChartId::AxisAngleExp) => {
            let r2 = q.iter().map(|v| v * v).sum::<f64>();
            let r = r2.sqrt();
            let x = AlgebraVector::new(GroupId::So3, q.to_vec())?;
            let xh = hat(&x);
            let xh2 = &xh * &xh;
            // J_l = I + cosc(r) X + sincc(r) X^2; J_r is its transpose.
            let (c1, c2) = if r < SMALL_ANGLE {
                (0.5 - r2 / 24.0, 1.0 / 6.0 - r2 / 120.0)
            } else {
                ((1.0 - r.cos()) / r2, (r - r.sin()) / (r2 * r))
            };
            let jl = DMatrix::identity(3, 3) + &xh * c1 + &xh2 * c2;
            match side {
                Side::Left => jl,
                Side::Right => jl.transpose(),
            }
        }
        (GroupId::Se2, ChartId::CartesianTheta) => {
            let (s, c) = q[2].sin_cos();
            match side {
                // Columns (d/dx, d/dy, d/dtheta) against the (v1, v2, w) basis.
                Side::Right => DMatrix::from_row_slice(
                    3,
                    3,
                    &[c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0],
                ),
                Side::Left => DMatrix::from_row_slice(
                    3,
                    3,
                    &[1.0, 0.0, q[1], 0.0, 1.0, -q[0], 0.0, 0.0, 1.0],
                ),
            }
        }
        (GroupId::Se2, ChartId::ExpCoords) => {
            let jl = |x1: f64, x2: f64, th: f64| -> DMatrix<f64> {
                let th2 = th * th;
                let (a, b, f1, f2) = if th.abs() < SMALL_ANGLE {
                    (
                        1.0 - th2 / 6.0,
                        th / 2.0 - th2 * th / 24.0,
                        0.5 - th2 / 24.0,
                        th / 6.0 - th2 * th / 120.0,
                    )
                } else {
                    (
                        th.sin() / th,
                        (1.0 - th.cos()) / th,
                        (1.0 - th.cos()) / th2,
                        (th - th.sin()) / th2,
                    )
                };
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        a, -b, f1 * x2 + f2 * x1, //
                        b, a, -f1 * x1 + f2 * x2, //
                        0.0, 0.0, 1.0,
                    ],
                )
            };
            match side {
                Side::Left => jl(q[0], q[1], q[2]),
                Side::Right => jl(-q[0], -q[1], -q[2]),
            }
        }
        (GroupId::H1, ChartId::AlphaBetaGamma) => match side {
            Side::Right => DMatrix::from_row_slice(
                3,
                3,
                &[1.0, 0.0, 0.0, 0.0, 1.0, -q[0], 0.0, 0.0, 1.0],
            ),
            Side::Left => DMatrix::from_row_slice(
                3,
                3,
                &[1.0, 0.0, 0.0, -q[2], 1.0, 0.0, 0.0, 0.0, 1.0],
            ),
        },
        (GroupId::H1, ChartId::ExpCoords) => match side {
            Side::Right => DMatrix::from_row_slice(
                3,
                3,
                &[1.0, 0.0, 0.0, q[2] / 2.0, 1.0, -q[0] / 2.0, 0.0, 0.0, 1.0],
            ),
            Side::Left => DMatrix::from_row_slice(
                3,
                3,
                &[1.0, 0.0, 0.0, -q[2] / 2.0, 1.0, q[0] / 2.0, 0.0, 0.0, 1.0],
            ),
        },
        (GroupId::Sl2r, ChartId::Iwasawa) => {
            let (th, t, xi) = (q[0], q[1], q[2]);
            let (e2t, em2t) = ((2.0 * t).exp(), (-2.0 * t).exp());
            match side {
                Side::Left => {
                    let (s2, c2) = (2.0 * th).sin_cos();
                    DMatrix::from_row_slice(
                        3,
                        3,
                        &[
                            1.0, 0.0, -0.5 * e2t, //
                            0.0, c2, -0.5 * e2t * s2, //
                            0.0, s2, 0.5 * e2t * c2,
                        ],
                    )
                }
                Side::Right => DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        0.5 * (e2t + em2t + xi * xi * e2t),
                        -xi,
                        -0.5, //
                        -xi * e2t,
                        1.0,
                        0.0, //
                        0.5 * (e2t - em2t - xi * xi * e2t),
                        xi,
                        0.5,
                    ],
                ),
            }
        }
        (GroupId::R1, ChartId::Line) | (GroupId::So2, ChartId::Angle) => {
            DMatrix::identity(1, 1)
        }
        _ => unreachable!("admissibility checked above"),
    };
    Ok(j)
}

/// `|det J|` of either chart Jacobian (they agree), by closed form.
pub fn jacobian_det(group: GroupId, chart: ChartId, q: &[f64]) -> Result<f64> {
    group.check_chart(chart)?;
    Ok(match (group, chart) {
        (GroupId::So3, ChartId::EulerZxz) => q[1].sin().abs(),
        (GroupId::So3, ChartId::AxisAngleExp) => {
            let r2 = q.iter().map(|v| v * v).sum::<f64>();
            if r2.sqrt() < SMALL_ANGLE {
                1.0 - r2 / 12.0
            } else {
                2.0 * (1.0 - r2.sqrt().cos()) / r2
            }
        }
        (GroupId::Se2, ChartId::CartesianTheta) => 1.0,
        (GroupId::Se2, ChartId::ExpCoords) => {
            let th = q[2];
            if th.abs() < SMALL_ANGLE {
                1.0 - th * th / 12.0
            } else {
                2.0 * (1.0 - th.cos()) / (th * th)
            }
        }
        (GroupId::H1, _) => 1.0,
        (GroupId::Sl2r, ChartId::Iwasawa) => 0.5 * (2.0 * q[1]).exp(),
        (GroupId::R1, ChartId::Line) | (GroupId::So2, ChartId::Angle) => 1.0,
        _ => unreachable!(),
    })
}

/// Bi-invariant (Haar) probability-measure density in chart coordinates.
pub fn haar_density(group: GroupId, chart: ChartId, q: &[f64]) -> Result<HaarWeight> {
    let det = jacobian_det(group, chart, q)?;
    let z = match group {
        GroupId::So3 => 8.0 * std::f64::consts::PI * std::f64::consts::PI,
        GroupId::So2 => 2.0 * std::f64::consts::PI,
        _ => 1.0,
    };
    Ok(HaarWeight {
        value: det / z,
        singular: det < 1e-12,
    })
}

/// Central-difference Jacobian straight from the definition. Exposed for
/// tests and diagnostics; production paths use the closed forms above.
pub fn jacobian_fd(
    group: GroupId,
    chart: ChartId,
    q: &[f64],
    side: Side,
    h: f64,
) -> Result<DMatrix<f64>> {
    use super::{inverse, vee};
    let n = group.dim();
    let at = |qq: &[f64]| -> Result<DMatrix<f64>> {
        Ok(chart_to_element(&ChartPoint::new(group, chart, qq.to_vec())?)?
            .matrix()
            .clone())
    };
    let g = chart_to_element(&ChartPoint::new(group, chart, q.to_vec())?)?;
    let gi = inverse(&g).matrix().clone();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let shift = |s: f64| -> Result<DMatrix<f64>> {
            let mut qq = q.to_vec();
            qq[i] += s;
            at(&qq)
        };
        // 4th-order central difference of the matrix-valued chart map.
        let d = (shift(-2.0 * h)? - shift(-h)? * 8.0 + shift(h)? * 8.0 - shift(2.0 * h)?)
            / (12.0 * h);
        let m = match side {
            Side::Right => &gi * &d,
            Side::Left => &d * &gi,
        };
        let col = vee(group, &m)?;
        for r in 0..n {
            out[(r, i)] = col.coords[r];
        }
    }
    Ok(out)
}
