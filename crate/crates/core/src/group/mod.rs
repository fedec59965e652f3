//! Matrix-group backends: elements, Lie-algebra vectors, charts, and the
//! structural operations (compose, invert, adjoint, hat/vee, brackets).
//!
//! Every element is stored as its defining real matrix. Group products are
//! literal matrix products followed by an invariant check: a small defect
//! (> 1e-9) is repaired by projecting back onto the manifold, a large one
//! (> 1e-6) is an error. This keeps long composition chains honest without
//! hiding genuine misuse.
//!
//! The six backends and their algebra bases:
//!
//! - `So3`: skew-symmetric `X_i = -e_i x .` (so that `hat(x) y = x × y`),
//!   orthonormal under `<A,B> = tr(A B^T) / 2`.
//! - `Se2`: translations `X_1, X_2` and the planar rotation `X_3`;
//!   `[X_3, X_1] = X_2`, `[X_3, X_2] = -X_1`.
//! - `H1`: strictly upper-triangular `X_1 = E_12`, `X_2 = E_13`,
//!   `X_3 = E_23`; the only bracket is `[X_1, X_3] = X_2`.
//! - `Sl2r`: `X_1 = [[0,-1],[1,0]]`, `X_2 = [[1,0],[0,-1]]`,
//!   `X_3 = [[0,1],[1,0]]`; brackets `[X_1,X_2] = 2 X_3`,
//!   `[X_1,X_3] = -2 X_2`, `[X_2,X_3] = -2 X_1`.
//! - `R1`: the shear embedding `[[1,x],[0,1]]` of the real line.
//! - `So2`: planar rotations.

mod geometry;
mod maps;

pub use geometry::{haar_density, jacobian, jacobian_det, jacobian_fd, HaarWeight};
pub use maps::{chart_to_element, element_to_chart, exp_map, log_map};

use crate::error::{Error, Result};
use crate::util::expm;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Which of the supported groups an element or density lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupId {
    /// Rotations of 3-space.
    So3,
    /// Rigid motions of the plane.
    Se2,
    /// The 3-dimensional Heisenberg group (upper unitriangular 3x3).
    H1,
    /// 2x2 real matrices of determinant one.
    Sl2r,
    /// The real line under addition, embedded as shears.
    R1,
    /// Planar rotations.
    So2,
}

/// Coordinate charts. Admissibility is per group; see [`GroupId::charts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChartId {
    /// SO(3) Euler angles, z-x-z convention: `R = R3(a) R1(b) R3(c)`.
    EulerZxz,
    /// SO(3) exponential coordinates (axis times angle).
    AxisAngleExp,
    /// SE(2) as `(x, y, theta)`.
    CartesianTheta,
    /// Exponential coordinates (SE(2) and H(1)).
    ExpCoords,
    /// H(1) matrix entries `(alpha, beta, gamma)`.
    AlphaBetaGamma,
    /// SL(2,R) as `rot(theta) * diag(e^t, e^-t) * shear(xi)`.
    Iwasawa,
    /// Coordinate on the real line.
    Line,
    /// Angle on the circle, in `[0, 2*pi)`.
    Angle,
}

/// Derivative/Fisher side selector: `Right` differentiates along
/// `g exp(t X)`, `Left` along `exp(-t X) g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl GroupId {
    pub fn dim(self) -> usize {
        match self {
            GroupId::So3 | GroupId::Se2 | GroupId::H1 | GroupId::Sl2r => 3,
            GroupId::R1 | GroupId::So2 => 1,
        }
    }

    pub fn matrix_size(self) -> usize {
        match self {
            GroupId::So3 | GroupId::Se2 | GroupId::H1 => 3,
            GroupId::Sl2r | GroupId::R1 | GroupId::So2 => 2,
        }
    }

    pub fn is_compact(self) -> bool {
        matches!(self, GroupId::So3 | GroupId::So2)
    }

    /// Charts admissible for this group, default first.
    pub fn charts(self) -> &'static [ChartId] {
        match self {
            GroupId::So3 => &[ChartId::EulerZxz, ChartId::AxisAngleExp],
            GroupId::Se2 => &[ChartId::CartesianTheta, ChartId::ExpCoords],
            GroupId::H1 => &[ChartId::AlphaBetaGamma, ChartId::ExpCoords],
            GroupId::Sl2r => &[ChartId::Iwasawa],
            GroupId::R1 => &[ChartId::Line],
            GroupId::So2 => &[ChartId::Angle],
        }
    }

    pub fn default_chart(self) -> ChartId {
        self.charts()[0]
    }

    pub fn check_chart(self, chart: ChartId) -> Result<()> {
        if self.charts().contains(&chart) {
            Ok(())
        } else {
            Err(Error::ChartNotAdmissible { group: self, chart })
        }
    }

    /// Lie-algebra basis matrices `X_1 .. X_dim`.
    pub fn basis(self) -> Vec<DMatrix<f64>> {
        let e = |r: usize, c: usize, n: usize, v: f64| {
            let mut m = DMatrix::<f64>::zeros(n, n);
            m[(r, c)] = v;
            m
        };
        match self {
            GroupId::So3 => vec![
                DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., -1., 0., 1., 0.]),
                DMatrix::from_row_slice(3, 3, &[0., 0., 1., 0., 0., 0., -1., 0., 0.]),
                DMatrix::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 0.]),
            ],
            GroupId::Se2 => vec![
                e(0, 2, 3, 1.0),
                e(1, 2, 3, 1.0),
                DMatrix::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 0.]),
            ],
            GroupId::H1 => vec![e(0, 1, 3, 1.0), e(0, 2, 3, 1.0), e(1, 2, 3, 1.0)],
            GroupId::Sl2r => vec![
                DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.]),
                DMatrix::from_row_slice(2, 2, &[1., 0., 0., -1.]),
                DMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.]),
            ],
            GroupId::R1 => vec![e(0, 1, 2, 1.0)],
            GroupId::So2 => vec![DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.])],
        }
    }

    /// Structure constants `c[i][j][k]` with `[X_i, X_j] = sum_k c[i][j][k] X_k`.
    pub fn structure_constants(self) -> Vec<Vec<Vec<f64>>> {
        let n = self.dim();
        let mut c = vec![vec![vec![0.0; n]; n]; n];
        let basis = self.basis();
        for i in 0..n {
            for j in 0..n {
                let br = &basis[i] * &basis[j] - &basis[j] * &basis[i];
                let x = vee(self, &br).expect("bracket stays in the algebra");
                c[i][j] = x.coords;
            }
        }
        c
    }
}

/// A group element: the defining matrix plus its group tag.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    group: GroupId,
    mat: DMatrix<f64>,
}

/// A Lie-algebra element in basis coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraVector {
    pub group: GroupId,
    pub coords: Vec<f64>,
}

/// A point of a chart: coordinates plus (group, chart) tags.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub group: GroupId,
    pub chart: ChartId,
    pub coords: Vec<f64>,
}

impl AlgebraVector {
    pub fn new(group: GroupId, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != group.dim() {
            return Err(Error::DimensionMismatch {
                expected: group.dim(),
                got: coords.len(),
            });
        }
        Ok(Self { group, coords })
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl ChartPoint {
    pub fn new(group: GroupId, chart: ChartId, coords: Vec<f64>) -> Result<Self> {
        group.check_chart(chart)?;
        if coords.len() != group.dim() {
            return Err(Error::DimensionMismatch {
                expected: group.dim(),
                got: coords.len(),
            });
        }
        Ok(Self {
            group,
            chart,
            coords,
        })
    }
}

/// Defect thresholds for the group-manifold invariant after composition.
const REPAIR_THRESHOLD: f64 = 1e-9;
const FATAL_THRESHOLD: f64 = 1e-6;

impl GroupElement {
    pub fn identity(group: GroupId) -> Self {
        let n = group.matrix_size();
        Self {
            group,
            mat: DMatrix::identity(n, n),
        }
    }

    /// Wrap a matrix as a group element, validating the group invariant.
    pub fn from_matrix(group: GroupId, mat: DMatrix<f64>) -> Result<Self> {
        let n = group.matrix_size();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        let g = Self { group, mat };
        let r = g.defect();
        if r > FATAL_THRESHOLD {
            return Err(Error::InvariantViolated {
                what: invariant_name(group),
                residual: r,
            });
        }
        Ok(if r > REPAIR_THRESHOLD { g.reproject() } else { g })
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Max-norm distance to `other` in the matrix embedding.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        (&self.mat - &other.mat)
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }

    /// How far the matrix sits from the group manifold (max-norm residual of
    /// the defining constraints).
    pub fn defect(&self) -> f64 {
        let m = &self.mat;
        let max_abs = |d: &DMatrix<f64>| d.iter().map(|x| x.abs()).fold(0.0, f64::max);
        match self.group {
            GroupId::So3 | GroupId::So2 => {
                let n = m.nrows();
                let orth = max_abs(&(m.transpose() * m - DMatrix::identity(n, n)));
                orth.max((m.determinant() - 1.0).abs())
            }
            GroupId::Se2 => {
                let r = m.view((0, 0), (2, 2)).into_owned();
                let orth = max_abs(&(r.transpose() * &r - DMatrix::identity(2, 2)));
                let det = (r.determinant() - 1.0).abs();
                let row = m[(2, 0)].abs().max(m[(2, 1)].abs()).max((m[(2, 2)] - 1.0).abs());
                orth.max(det).max(row)
            }
            GroupId::H1 => {
                let mut r: f64 = 0.0;
                for i in 0..3 {
                    r = r.max((m[(i, i)] - 1.0).abs());
                    for j in 0..i {
                        r = r.max(m[(i, j)].abs());
                    }
                }
                r
            }
            GroupId::Sl2r => (m.determinant() - 1.0).abs(),
            GroupId::R1 => {
                let mut r = (m[(0, 0)] - 1.0).abs().max((m[(1, 1)] - 1.0).abs());
                r = r.max(m[(1, 0)].abs());
                r
            }
        }
    }

    /// Project back onto the group manifold (polar projection for the
    /// orthogonal blocks, determinant rescaling for SL(2,R), pattern
    /// enforcement for the triangular groups).
    fn reproject(&self) -> Self {
        let m = &self.mat;
        let mat = match self.group {
            GroupId::So3 | GroupId::So2 => polar_rotation(m),
            GroupId::Se2 => {
                let mut out = m.clone();
                let r = polar_rotation(&m.view((0, 0), (2, 2)).into_owned());
                out.view_mut((0, 0), (2, 2)).copy_from(&r);
                out[(2, 0)] = 0.0;
                out[(2, 1)] = 0.0;
                out[(2, 2)] = 1.0;
                out
            }
            GroupId::H1 => {
                let mut out = DMatrix::identity(3, 3);
                out[(0, 1)] = m[(0, 1)];
                out[(0, 2)] = m[(0, 2)];
                out[(1, 2)] = m[(1, 2)];
                out
            }
            GroupId::Sl2r => {
                let det = m.determinant();
                m / det.abs().sqrt().copysign(det.signum())
            }
            GroupId::R1 => {
                let mut out = DMatrix::identity(2, 2);
                out[(0, 1)] = m[(0, 1)];
                out
            }
        };
        Self {
            group: self.group,
            mat,
        }
    }
}

fn invariant_name(group: GroupId) -> &'static str {
    match group {
        GroupId::So3 => "orthogonality / det 1 (SO3)",
        GroupId::Se2 => "homogeneous rigid-motion form (SE2)",
        GroupId::H1 => "unitriangular form (H1)",
        GroupId::Sl2r => "det 1 (SL2R)",
        GroupId::R1 => "shear form (R1)",
        GroupId::So2 => "orthogonality / det 1 (SO2)",
    }
}

/// Nearest rotation in Frobenius norm (special orthogonal polar factor).
fn polar_rotation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd");
    let vt = svd.v_t.expect("svd");
    let mut r = &u * &vt;
    if r.determinant() < 0.0 {
        // Flip the weakest singular direction to land on det +1.
        let n = m.nrows();
        let mut flip = DMatrix::<f64>::identity(n, n);
        flip[(n - 1, n - 1)] = -1.0;
        r = u * flip * vt;
    }
    r
}

/// Group product `a * b` with invariant check/repair.
pub fn compose(a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
    if a.group != b.group {
        return Err(Error::GroupMismatch {
            expected: a.group,
            got: b.group,
        });
    }
    let m = &a.mat * &b.mat;
    GroupElement::from_matrix(a.group, m)
}

/// Group inverse by the per-group closed form (never a numerical inverse).
pub fn inverse(g: &GroupElement) -> GroupElement {
    let m = &g.mat;
    let mat = match g.group {
        GroupId::So3 | GroupId::So2 => m.transpose(),
        GroupId::Se2 => {
            let r = m.view((0, 0), (2, 2)).transpose();
            let t = m.view((0, 2), (2, 1)).into_owned();
            let nt = -(&r * t);
            let mut out = DMatrix::identity(3, 3);
            out.view_mut((0, 0), (2, 2)).copy_from(&r);
            out[(0, 2)] = nt[(0, 0)];
            out[(1, 2)] = nt[(1, 0)];
            out
        }
        GroupId::H1 => {
            // (a, b, c) -> (-a, a c - b, -c)
            let (a, b, c) = (m[(0, 1)], m[(0, 2)], m[(1, 2)]);
            let mut out = DMatrix::identity(3, 3);
            out[(0, 1)] = -a;
            out[(0, 2)] = a * c - b;
            out[(1, 2)] = -c;
            out
        }
        GroupId::Sl2r => DMatrix::from_row_slice(
            2,
            2,
            &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]],
        ),
        GroupId::R1 => {
            let mut out = DMatrix::identity(2, 2);
            out[(0, 1)] = -m[(0, 1)];
            out
        }
    };
    GroupElement {
        group: g.group,
        mat,
    }
}

/// Basis expansion `hat(x) = sum_i x_i X_i`.
pub fn hat(x: &AlgebraVector) -> DMatrix<f64> {
    let basis = x.group.basis();
    let n = x.group.matrix_size();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (xi, bi) in x.coords.iter().zip(basis.iter()) {
        m += bi * *xi;
    }
    m
}

/// Coefficient extraction, inverse to [`hat`]. Errors if `m` is not in the
/// span of the basis (residual above 1e-9 of its magnitude).
pub fn vee(group: GroupId, m: &DMatrix<f64>) -> Result<AlgebraVector> {
    let coords: Vec<f64> = match group {
        GroupId::So3 => vec![m[(2, 1)], m[(0, 2)], m[(1, 0)]],
        GroupId::Se2 => vec![m[(0, 2)], m[(1, 2)], m[(1, 0)]],
        GroupId::H1 => vec![m[(0, 1)], m[(0, 2)], m[(1, 2)]],
        GroupId::Sl2r => vec![
            0.5 * (m[(1, 0)] - m[(0, 1)]),
            m[(0, 0)],
            0.5 * (m[(1, 0)] + m[(0, 1)]),
        ],
        GroupId::R1 => vec![m[(0, 1)]],
        GroupId::So2 => vec![m[(1, 0)]],
    };
    let x = AlgebraVector::new(group, coords)?;
    let residual = (m - hat(&x)).iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = m.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if residual > 1e-9 * scale {
        return Err(Error::InvariantViolated {
            what: "matrix outside the Lie algebra span",
            residual,
        });
    }
    Ok(x)
}

/// Adjoint matrix of `g`: columns are `vee(g X_i g^-1)`.
///
/// This conjugation form is total (no chart needed) and equals
/// `J_l(q) J_r(q)^{-1}` at every regular chart point of `g`, which the tests
/// verify. For rotations it reproduces the rotation matrix itself.
pub fn adjoint(g: &GroupElement) -> DMatrix<f64> {
    let n = g.group.dim();
    let basis = g.group.basis();
    let gi = inverse(g);
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (i, xi) in basis.iter().enumerate() {
        let conj = &g.mat * xi * &gi.mat;
        let col = vee(g.group, &conj).expect("Ad-image stays in the algebra");
        for r in 0..n {
            out[(r, i)] = col.coords[r];
        }
    }
    out
}

/// `exp` of a random tangent as a generic matrix exponential. Used in tests
/// as the oracle that the closed-form [`exp_map`] must match.
pub fn exp_oracle(x: &AlgebraVector) -> DMatrix<f64> {
    expm(&hat(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) const ALL_GROUPS: [GroupId; 6] = [
        GroupId::So3,
        GroupId::Se2,
        GroupId::H1,
        GroupId::Sl2r,
        GroupId::R1,
        GroupId::So2,
    ];

    fn sample_vectors(group: GroupId) -> Vec<AlgebraVector> {
        let raw: Vec<Vec<f64>> = match group.dim() {
            1 => vec![vec![0.3], vec![-1.2], vec![2.0]],
            _ => vec![
                vec![0.3, -0.4, 0.25],
                vec![-0.9, 0.2, 0.6],
                vec![0.05, 1.1, -0.7],
                vec![1.4, -0.3, 0.9],
            ],
        };
        raw.into_iter()
            .map(|v| AlgebraVector::new(group, v).unwrap())
            .collect()
    }

    #[test]
    fn hat_vee_round_trip() {
        for group in ALL_GROUPS {
            for x in sample_vectors(group) {
                let back = vee(group, &hat(&x)).unwrap();
                for (a, b) in x.coords.iter().zip(back.coords.iter()) {
                    assert_relative_eq!(a, b, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn structure_constants_match_commutators() {
        for group in ALL_GROUPS {
            let c = group.structure_constants();
            let basis = group.basis();
            let n = group.dim();
            for i in 0..n {
                for j in 0..n {
                    let br = &basis[i] * &basis[j] - &basis[j] * &basis[i];
                    let mut lin = DMatrix::<f64>::zeros(
                        group.matrix_size(),
                        group.matrix_size(),
                    );
                    for k in 0..n {
                        lin += &basis[k] * c[i][j][k];
                    }
                    assert!((br - lin).norm() < 1e-14);
                    // Antisymmetry.
                    for k in 0..n {
                        assert_relative_eq!(c[i][j][k], -c[j][i][k], epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn expected_brackets() {
        // SO3: [X1, X2] = X3 cyclic.
        let c = GroupId::So3.structure_constants();
        assert_eq!(c[0][1], vec![0.0, 0.0, 1.0]);
        assert_eq!(c[1][2], vec![1.0, 0.0, 0.0]);
        // H1: [X1, X3] = X2 is the only nonzero bracket.
        let c = GroupId::H1.structure_constants();
        assert_eq!(c[0][2], vec![0.0, 1.0, 0.0]);
        assert_eq!(c[0][1], vec![0.0, 0.0, 0.0]);
        assert_eq!(c[1][2], vec![0.0, 0.0, 0.0]);
        // SE2: [X3, X1] = X2, [X3, X2] = -X1.
        let c = GroupId::Se2.structure_constants();
        assert_eq!(c[2][0], vec![0.0, 1.0, 0.0]);
        assert_eq!(c[2][1], vec![-1.0, 0.0, 0.0]);
        // SL2R: [X1, X2] = 2 X3.
        let c = GroupId::Sl2r.structure_constants();
        assert_eq!(c[0][1], vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn compose_inverse_identity() {
        for group in ALL_GROUPS {
            for x in sample_vectors(group) {
                let g = exp_map(&x);
                let gi = inverse(&g);
                let e = compose(&g, &gi).unwrap();
                assert!(e.distance(&GroupElement::identity(group)) < 1e-12);
                let e = compose(&gi, &g).unwrap();
                assert!(e.distance(&GroupElement::identity(group)) < 1e-12);
            }
        }
    }

    #[test]
    fn associativity() {
        for group in ALL_GROUPS {
            let v = sample_vectors(group);
            let (a, b, c) = (exp_map(&v[0]), exp_map(&v[1]), exp_map(&v[2 % v.len()]));
            let ab_c = compose(&compose(&a, &b).unwrap(), &c).unwrap();
            let a_bc = compose(&a, &compose(&b, &c).unwrap()).unwrap();
            assert!(ab_c.distance(&a_bc) < 1e-12);
        }
    }

    #[test]
    fn adjoint_of_rotation_is_the_rotation() {
        let x = AlgebraVector::new(GroupId::So3, vec![0.4, -0.2, 0.7]).unwrap();
        let g = exp_map(&x);
        let ad = adjoint(&g);
        assert!((ad - g.matrix()).norm() < 1e-13);
    }

    #[test]
    fn adjoint_is_unimodular_everywhere() {
        for group in ALL_GROUPS {
            for x in sample_vectors(group) {
                let g = exp_map(&x);
                let det = adjoint(&g).determinant();
                assert_relative_eq!(det, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn adjoint_intertwines_exp() {
        // g exp(hat(x)) g^-1 = exp(hat(Ad(g) x)).
        for group in ALL_GROUPS {
            let v = sample_vectors(group);
            let g = exp_map(&v[0]);
            let x = &v[1];
            let ad = adjoint(&g);
            let mut adx = vec![0.0; group.dim()];
            for r in 0..group.dim() {
                for c in 0..group.dim() {
                    adx[r] += ad[(r, c)] * x.coords[c];
                }
            }
            let lhs = compose(&compose(&g, &exp_map(x)).unwrap(), &inverse(&g)).unwrap();
            let rhs = exp_map(&AlgebraVector::new(group, adx).unwrap());
            assert!(lhs.distance(&rhs) < 1e-10);
        }
    }

    #[test]
    fn reprojection_repairs_small_drift() {
        let x = AlgebraVector::new(GroupId::So3, vec![0.3, 0.1, -0.2]).unwrap();
        let mut m = exp_map(&x).matrix().clone();
        m[(0, 0)] += 3e-8;
        let g = GroupElement::from_matrix(GroupId::So3, m).unwrap();
        assert!(g.defect() < 1e-12);
        // Large drift is fatal.
        let mut m = exp_map(&x).matrix().clone();
        m[(0, 0)] += 1e-3;
        assert!(GroupElement::from_matrix(GroupId::So3, m).is_err());
    }

    #[test]
    fn h1_compose_follows_matrix_product() {
        // Product law in chart coordinates: the beta slot picks up a1 * c2.
        let g1 = chart_to_element(
            &ChartPoint::new(GroupId::H1, ChartId::AlphaBetaGamma, vec![1.0, 2.0, 3.0]).unwrap(),
        )
        .unwrap();
        let g2 = chart_to_element(
            &ChartPoint::new(GroupId::H1, ChartId::AlphaBetaGamma, vec![0.5, -1.0, 2.0]).unwrap(),
        )
        .unwrap();
        // Oracle: raw 3x3 multiplication.
        let oracle = g1.matrix() * g2.matrix();
        let prod = compose(&g1, &g2).unwrap();
        assert!((prod.matrix() - &oracle).norm() < 1e-15);
        let q = element_to_chart(&prod, ChartId::AlphaBetaGamma).unwrap();
        assert_relative_eq!(q.coords[0], 1.5, epsilon = 1e-14);
        // beta = b1 + b2 + a1 c2 = 2 - 1 + 1 * 2 = 3.
        assert_relative_eq!(q.coords[1], 3.0, epsilon = 1e-14);
        assert_relative_eq!(q.coords[2], 5.0, epsilon = 1e-14);
    }
}
