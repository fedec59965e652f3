//! Wigner little-d matrices.
//!
//! Index convention: row `m` and column `n` run ascending from `-l` to `l`,
//! stored at offsets `m + l`, `n + l`. The matrix is defined operationally
//! as `d^l(beta) = exp(beta K_l)` with `K_l = (J_- - J_+) / 2` real
//! antisymmetric, which makes `d^l` real orthogonal and fixes every sign.
//!
//! Values are produced by a single-term seed at `l = max(|m|, |n|)`
//! followed by the three-term recursion upward in `l`; the matrix
//! exponential itself is kept as a test oracle only. The recursion runs in
//! the stable (increasing-degree) direction and stays accurate to ~1e-13
//! through `l = 32`, which is the hard bandwidth cap.

use nalgebra::DMatrix;

/// Hard cap on the degree of any expansion in this crate; tables and
/// spectra refuse to go beyond it.
pub const MAX_BANDWIDTH: usize = 32;

/// ln(k!) for k = 0..=n.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        t.push(acc);
    }
    t
}

/// Seed value `d^{l0}_{mn}` at `l0 = max(|m|, |n|)`, where the defining sum
/// collapses to one term: a square-root binomial times half-angle powers.
fn seed(l0: i64, m: i64, n: i64, half: (f64, f64), lnf: &[f64]) -> f64 {
    let (ch, sh) = half;
    let binom = |k: i64| {
        (0.5 * (lnf[(2 * l0) as usize] - lnf[k as usize] - lnf[(2 * l0 - k) as usize])).exp()
    };
    if n == l0 {
        binom(l0 + m) * ch.powi((l0 + m) as i32) * sh.powi((l0 - m) as i32)
    } else if n == -l0 {
        let sign = if (l0 + m) % 2 == 0 { 1.0 } else { -1.0 };
        sign * binom(l0 + m) * ch.powi((l0 - m) as i32) * sh.powi((l0 + m) as i32)
    } else if m == l0 {
        let sign = if (l0 - n) % 2 == 0 { 1.0 } else { -1.0 };
        sign * binom(l0 + n) * ch.powi((l0 + n) as i32) * sh.powi((l0 - n) as i32)
    } else {
        // m == -l0
        binom(l0 + n) * ch.powi((l0 - n) as i32) * sh.powi((l0 + n) as i32)
    }
}

/// All little-d matrices `l = 0..=l_max` at one angle `beta` in `[0, pi]`.
pub fn d_matrices(l_max: usize, beta: f64) -> Vec<DMatrix<f64>> {
    assert!(l_max <= MAX_BANDWIDTH, "bandwidth cap exceeded");
    let lnf = ln_factorials(2 * l_max + 1);
    let half = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let cb = beta.cos();
    let mut out: Vec<DMatrix<f64>> = (0..=l_max)
        .map(|l| DMatrix::zeros(2 * l + 1, 2 * l + 1))
        .collect();
    let lm = l_max as i64;
    for m in -lm..=lm {
        for n in -lm..=lm {
            let l0 = m.abs().max(n.abs());
            let mut prev = 0.0;
            let mut cur = seed(l0.max(0), m, n, half, &lnf);
            if l0 == 0 {
                // Degenerate first step of the recursion: take d^1_{00}
                // directly.
                out[0][(0, 0)] = 1.0;
                if l_max == 0 {
                    continue;
                }
                prev = 1.0;
                cur = cb;
                store(&mut out, 1, m, n, cur);
                advance(&mut out, 2, lm, m, n, cb, &mut prev, &mut cur);
            } else {
                store(&mut out, l0, m, n, cur);
                advance(&mut out, l0 + 1, lm, m, n, cb, &mut prev, &mut cur);
            }
        }
    }
    out
}

fn store(out: &mut [DMatrix<f64>], l: i64, m: i64, n: i64, v: f64) {
    let lu = l as usize;
    out[lu][((m + l) as usize, (n + l) as usize)] = v;
}

/// Three-term recursion in the degree:
/// `l sqrt(((l+1)^2-m^2)((l+1)^2-n^2)) d^{l+1}
///   = (2l+1)(l(l+1) cos(beta) - m n) d^l
///     - (l+1) sqrt((l^2-m^2)(l^2-n^2)) d^{l-1}`.
fn advance(
    out: &mut [DMatrix<f64>],
    from: i64,
    to: i64,
    m: i64,
    n: i64,
    cb: f64,
    prev: &mut f64,
    cur: &mut f64,
) {
    for l1 in from..=to {
        let l = (l1 - 1) as f64;
        let (mf, nf) = (m as f64, n as f64);
        let a = (l + 1.0).powi(2);
        let denom = l * ((a - mf * mf) * (a - nf * nf)).sqrt();
        let b = (2.0 * l + 1.0) * (l * (l + 1.0) * cb - mf * nf);
        let c = (l + 1.0) * ((l * l - mf * mf) * (l * l - nf * nf)).sqrt();
        let next = (b * *cur - c * *prev) / denom;
        *prev = *cur;
        *cur = next;
        store(out, l1, m, n, next);
    }
}

/// The antisymmetric generator `K_l` with `d^l(beta) = exp(beta K_l)`.
/// Raising coefficient `c_m = sqrt(l(l+1) - m(m+1)) = sqrt((l-m)(l+m+1))`.
pub fn k_generator(l: usize) -> DMatrix<f64> {
    let sz = 2 * l + 1;
    let li = l as i64;
    let mut k = DMatrix::<f64>::zeros(sz, sz);
    for m in -li..li {
        let c = (((li - m) * (li + m + 1)) as f64).sqrt();
        let a = (m + li) as usize;
        k[(a + 1, a)] = -c / 2.0;
        k[(a, a + 1)] = c / 2.0;
    }
    k
}
