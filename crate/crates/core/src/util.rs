//! Shared numerical kernels: compensated summation, dense matrix
//! exponentials/logarithms, Gauss–Legendre rules, and finite-difference
//! stencil weights on arbitrary nodes.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Neumaier (improved Kahan) compensated sum over an iterator, in iteration
/// order. Deterministic: no reassociation beyond the fixed compensation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Scaling-and-squaring Taylor exponential for real square matrices.
///
/// The scaled norm is brought below 1/4, after which the Taylor series
/// converges past f64 precision in < 20 terms. Adequate for the small
/// (2x2..3x3) group matrices and for moderate spectral generators.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max) * n as f64;
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let b = a / 2f64.powi(s as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut out = DMatrix::<f64>::identity(n, n);
    for k in 1..64 {
        term = (&term * &b) / k as f64;
        out += &term;
        if term.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-20 {
            break;
        }
    }
    for _ in 0..s {
        out = &out * &out;
    }
    out
}

/// Complex variant of [`expm`], used for spectral-domain generators.
pub fn expm_c(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let norm = a.iter().map(|x| x.norm()).fold(0.0, f64::max) * n as f64;
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::new(2f64.powi(-(s as i32)), 0.0);
    let b = a.map(|x| x * scale);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut out = DMatrix::<Complex64>::identity(n, n);
    for k in 1..64 {
        term = (&term * &b).map(|x| x / k as f64);
        out += &term;
        if term.iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-20 {
            break;
        }
    }
    for _ in 0..s {
        out = &out * &out;
    }
    out
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Repeated principal square roots (Denman–Beavers) bring the argument near
/// the identity, then a Mercator series finishes. Requires eigenvalues off
/// the closed negative real axis; returns `None` when the square-root
/// iteration fails to converge (e.g. at or beyond the cut locus).
pub fn logm(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = a.clone();
    let mut k = 0u32;
    while (&m - &id).norm() > 0.25 {
        m = sqrtm(&m)?;
        k += 1;
        if k > 60 {
            return None;
        }
    }
    let e = &m - &id;
    let mut term = e.clone();
    let mut out = e.clone();
    for j in 2..80 {
        term = -(&term * &e);
        // term now holds (-1)^{j-1} E^j up to the sign handled above
        out += &term / j as f64;
        if term.norm() < 1e-18 {
            break;
        }
    }
    Some(out * 2f64.powi(k as i32))
}

/// Principal square root via the Denman–Beavers iteration.
fn sqrtm(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..60 {
        let yi = y.clone().try_inverse()?;
        let zi = z.clone().try_inverse()?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        y = y_next;
        z = z_next;
        if (&y * &y - a).norm() < 1e-14 * (1.0 + a.norm()) {
            return Some(y);
        }
    }
    let residual = (&y * &y - a).norm();
    if residual < 1e-11 * (1.0 + a.norm()) {
        Some(y)
    } else {
        None
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; nodes are returned in
/// ascending order and the weights sum to 2 within a few ulps.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess for the i-th root (descending order).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_pair(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and derivative `P_n'(x)`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fornberg finite-difference weights for the first derivative at `x0`
/// given stencil `nodes` (distinct, any spacing). Exact for polynomials of
/// degree `nodes.len() - 1`.
pub fn fd_weights_first(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    // c[k][j]: weight of node j for the k-th derivative (k = 0, 1).
    let mut c = vec![vec![0.0; n]; 2];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                c[1][i] = c1 * (c[0][i - 1] - c5 * c[1][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            c[1][j] = (c4 * c[1][j] - c[0][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.swap_remove(1)
}

/// Wrap an angle into `[0, 2*pi)`.
pub fn wrap_2pi(x: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut y = x % two_pi;
    if y < 0.0 {
        y += two_pi;
    }
    if y >= two_pi {
        y -= two_pi;
    }
    y
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = wrap_2pi(x);
    if y > std::f64::consts::PI {
        y - std::f64::consts::TAU
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn neumaier_recovers_cancelled_tail() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(vals), 2.0);
    }

    #[test]
    fn gauss_legendre_weights_and_moments() {
        for n in [1usize, 2, 5, 16, 33, 64] {
            let (x, w) = gauss_legendre(n);
            let mass = neumaier_sum(w.iter().copied());
            assert_relative_eq!(mass, 2.0, epsilon = 1e-13);
            // Exact for monomials up to degree 2n-1.
            for k in (0..2 * n).step_by(2) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let exact = 2.0 / (k as f64 + 1.0);
                assert_relative_eq!(q, exact, epsilon = 1e-12, max_relative = 1e-12);
            }
            for xs in x.windows(2) {
                assert!(xs[0] < xs[1]);
            }
        }
    }

    #[test]
    fn expm_matches_rotation_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.7, 0.7, 0.0]);
        let e = expm(&a);
        assert_relative_eq!(e[(0, 0)], 0.7f64.cos(), epsilon = 1e-14);
        assert_relative_eq!(e[(1, 0)], 0.7f64.sin(), epsilon = 1e-14);
    }

    #[test]
    fn logm_inverts_expm() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, -1.2, 0.3, 1.2, 0.0, -0.4, -0.3, 0.4, 0.0]);
        let l = logm(&expm(&a)).expect("logm");
        assert!((l - a).norm() < 1e-11);
    }

    #[test]
    fn fornberg_weights_match_central_difference() {
        // Uniform 5-point stencil at the center: (1, -8, 0, 8, -1)/(12h).
        let h = 0.1;
        let nodes = [-2.0 * h, -h, 0.0, h, 2.0 * h];
        let w = fd_weights_first(0.0, &nodes);
        let expect = [1.0, -8.0, 0.0, 8.0, -1.0].map(|c| c / (12.0 * h));
        for (a, b) in w.iter().zip(expect.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        // Non-uniform nodes: exact on a quartic.
        let nodes = [-0.3, -0.11, 0.05, 0.21, 0.4];
        let w = fd_weights_first(0.05, &nodes);
        let f = |x: f64| 1.0 + x - 2.0 * x.powi(2) + 0.5 * x.powi(3) - x.powi(4);
        let df = |x: f64| 1.0 - 4.0 * x + 1.5 * x.powi(2) - 4.0 * x.powi(3);
        let est: f64 = nodes.iter().zip(&w).map(|(x, wi)| wi * f(*x)).sum();
        assert_relative_eq!(est, df(0.05), epsilon = 1e-10);
    }
}
