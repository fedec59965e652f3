//! Entropy, Fisher information, and non-commutative harmonic analysis on
//! unimodular matrix groups.
//!
//! The crate provides a small numerical laboratory for information theory on
//! groups: six matrix-group backends, Haar-weighted quadrature grids, sampled
//! densities with group-aware operations (shift, inversion, convolution,
//! marginalization), Fourier analysis on the rotation group via Wigner
//! matrices, and a verification suite that evaluates classical
//! entropy/Fisher inequalities numerically and reports the slack of each one.
//!
//! # Group backends
//!
//! | Group | dim | Element | Charts |
//! |-------|-----|---------|--------|
//! | SO(3) | 3 | 3x3 rotation | `EulerZxz`, `AxisAngleExp` |
//! | SE(2) | 3 | 3x3 homogeneous | `CartesianTheta`, `ExpCoords` |
//! | H(1)  | 3 | 3x3 upper unitriangular | `AlphaBetaGamma`, `ExpCoords` |
//! | SL(2,R) | 3 | 2x2, det 1 | `Iwasawa` |
//! | (R,+) | 1 | 2x2 shear embedding | `Line` |
//! | SO(2) | 1 | 2x2 rotation | `Angle` |
//!
//! All six are unimodular: `det Ad(g) = 1`, and left/right Jacobian
//! determinants agree, `|det J_l| = |det J_r|`, which is what makes a single
//! bi-invariant Haar weight per chart point well defined.
//!
//! # Key invariants (what the tests enforce)
//!
//! - `exp_map`/`log_map` round-trip inside the injectivity radius;
//!   `exp_map` agrees with the dense matrix exponential of `hat(x)`.
//! - Closed-form Jacobians match central-difference chart derivatives, and
//!   `Ad(g) = J_l(q) J_r(q)^{-1}` at every regular chart point.
//! - Grid weights reproduce normalized Haar mass (compact groups) or the
//!   truncation-box volume (non-compact groups), and integrals of shifted
//!   band-limited functions are shift invariant.
//! - Fourier analysis on SO(3) satisfies Plancherel, the convolution theorem
//!   (in the order `conv(f1, f2) -> F[f2] * F[f1]`), and the operational
//!   property connecting Lie derivatives to band-limited multipliers.
//! - Entropy, Fisher information and entropy power reproduce the classical
//!   closed forms (Gaussian entropy, uniform-density limits) and the
//!   inequality suite passes with non-negative slack.
//!
//! Everything is deterministic: quadrature uses compensated summation in a
//! fixed order, randomized checks derive from explicit `ChaCha8` seeds, and
//! the suite's JSON reports are byte-stable apart from their timestamp.

pub mod density;
pub mod error;
pub mod families;
pub mod finite;
pub mod group;
pub mod harmonic;
pub mod info;
pub mod io;
pub mod quadrature;
pub mod suite;
mod util;

pub use error::{Error, Result};
pub use group::{AlgebraVector, ChartId, ChartPoint, GroupElement, GroupId, Side};
