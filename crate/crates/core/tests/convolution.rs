//! Cross-checks of the group-convolution engine: equivalent integral
//! forms, the Fourier-side oracle, algebraic identities, and the
//! near-delta limit.

use lieinfo::density::{DensityField, GroupAction, TransformRoute};
use lieinfo::families::{
    band_limited_rotation_density, circle_heat_density, rotation_heat_density,
};
use lieinfo::group::{exp_map, AlgebraVector, GroupElement, GroupId};
use lieinfo::harmonic::{
    convolve_spectra, direct_convolution, grid_bandwidth, left_shift_spectrum, DiffusionParams,
    So3Harmonics, So3Spectrum,
};
use lieinfo::quadrature::Grid;
use num_complex::Complex64 as C64;

fn l1(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    (0..grid.len())
        .map(|i| grid.weights()[i] * (a[i] - b[i]).abs())
        .sum()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max)
}

#[test]
fn spectral_and_direct_engines_agree() {
    let grid = Grid::build(GroupId::So3, &[16, 16, 16], None).unwrap();
    let (f1, s1) = band_limited_rotation_density(&grid, 3, 0.5, 11).unwrap();
    let (f2, s2) = band_limited_rotation_density(&grid, 4, 0.5, 22).unwrap();

    // Pre-normalization mass of the convolution is the product of the
    // factor masses, at quadrature precision.
    let ctx = So3Harmonics::new(grid.clone(), grid_bandwidth(&grid)).unwrap();
    let spec2 = ctx.forward(f2.values()).unwrap();
    let raw = direct_convolution(&grid, f1.values(), &spec2).unwrap();
    assert!(
        (raw.mass().re - 1.0).abs() < 1e-8,
        "pre-normalization mass {}",
        raw.mass()
    );
    assert!(raw.mass().im.abs() < 1e-12);

    // Engine output against the convolution-theorem oracle: the oracle
    // multiplies the analytically known factor spectra blockwise, no
    // per-node representation stacks involved.
    let conv = f1.convolve(&f2).unwrap();
    let ospec = convolve_spectra(&s1, &s2);
    let octx = So3Harmonics::new(grid.clone(), ospec.l_max()).unwrap();
    let mut oracle =
        DensityField::new(grid.clone(), octx.synthesize(&ospec).unwrap()).unwrap();
    oracle.normalize().unwrap();
    let gap = l1(&grid, conv.values(), oracle.values());
    assert!(gap < 1e-9, "engines disagree by {gap}");
}

#[test]
fn equivalent_integral_forms_agree_on_the_circle() {
    let grid = Grid::build(GroupId::So2, &[64], None).unwrap();
    let c1 = |t: f64| 1.0 + 0.6 * t.cos();
    let c2 = |t: f64| 1.0 + 0.4 * t.sin() + 0.3 * (2.0 * t).cos();
    let nodes = grid.axes()[0].nodes.clone();
    let w = grid.axes()[0].weights.clone();
    let n = nodes.len();
    // The four equivalent integral forms of (f1 * f2)(g), written out
    // literally. Inversion-invariance of the Haar measure is what makes
    // the substituted variants coincide; on the circle the node set is
    // closed under the substitutions, so they match to rounding.
    let mut forms = vec![vec![0.0; n]; 4];
    for (gi, &tg) in nodes.iter().enumerate() {
        for (hi, &th) in nodes.iter().enumerate() {
            forms[0][gi] += w[hi] * c1(th) * c2(tg - th);
            forms[1][gi] += w[hi] * c1(tg - th) * c2(th);
            forms[2][gi] += w[hi] * c1(tg + th) * c2(-th);
            forms[3][gi] += w[hi] * c1(-th) * c2(th + tg);
        }
    }
    for alt in 1..4 {
        let worst = sup(&forms[alt], &forms[0]);
        assert!(worst < 1e-12, "form {alt} deviates by {worst}");
    }
    // The engine's quadrature matches the literal defining form: circle
    // nodes compose onto nodes, so no interpolation error enters.
    let d1 = DensityField::from_chart_fn(grid.clone(), |q| c1(q[0])).unwrap();
    let d2 = DensityField::from_chart_fn(grid.clone(), |q| c2(q[0])).unwrap();
    let conv = d1.convolve(&d2).unwrap();
    let worst = sup(conv.values(), &forms[0]);
    assert!(worst < 1e-12, "engine deviates from the defining form by {worst}");
}

#[test]
fn inversion_identity_relates_swapped_convolution() {
    let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
    let (f1, _) = band_limited_rotation_density(&grid, 3, 0.5, 5).unwrap();
    let (f2, _) = band_limited_rotation_density(&grid, 4, 0.5, 6).unwrap();
    let lhs = f1.convolve(&f2).unwrap();
    // (f1 * f2)(g) = (f2~ * f1~)(g^-1) with f~(x) = f(x^-1). Both
    // inversions and the outer one ride the exact node permutation, so
    // the identity exercises the engine along a distinct data path.
    let (i2, route) = f2.transform(&GroupAction::Invert).unwrap();
    assert_eq!(route, TransformRoute::ExactPermutation);
    let (i1, _) = f1.transform(&GroupAction::Invert).unwrap();
    let swapped = i2.convolve(&i1).unwrap();
    let (rhs, route) = swapped.transform(&GroupAction::Invert).unwrap();
    assert_eq!(route, TransformRoute::ExactPermutation);
    let worst = sup(lhs.values(), rhs.values());
    assert!(worst < 1e-8, "swapped-inverted form deviates by {worst}");
}

#[test]
fn convolution_is_associative_on_rotations() {
    let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
    let (f1, _) = band_limited_rotation_density(&grid, 2, 0.5, 1).unwrap();
    let (f2, _) = band_limited_rotation_density(&grid, 3, 0.5, 2).unwrap();
    let (f3, _) = band_limited_rotation_density(&grid, 2, 0.5, 3).unwrap();
    let left = f1.convolve(&f2).unwrap().convolve(&f3).unwrap();
    let right = f1.convolve(&f2.convolve(&f3).unwrap()).unwrap();
    let gap = l1(&grid, left.values(), right.values());
    assert!(gap < 1e-6, "associativity defect {gap}");
}

#[test]
fn noncommuting_shifts_give_a_macroscopic_commutator() {
    let grid = Grid::build(GroupId::So3, &[16, 16, 16], None).unwrap();
    // Class bump with decay exp(-0.3 l(l+1)), shifted to two rotation
    // centers about different axes. The convolutions then sit at a b
    // versus b a, which differ by a macroscopic rotation.
    let mut bump = So3Spectrum::zeros(7);
    for l in 0..=7usize {
        let c = (-0.3 * (l * (l + 1)) as f64).exp();
        for k in 0..2 * l + 1 {
            bump.block_mut(l)[(k, k)] = C64::new(c, 0.0);
        }
    }
    let a = exp_map(&AlgebraVector::new(GroupId::So3, vec![0.9, 0.0, 0.0]).unwrap());
    let b = exp_map(&AlgebraVector::new(GroupId::So3, vec![0.0, 0.9, 0.0]).unwrap());
    let ctx = So3Harmonics::new(grid.clone(), bump.l_max()).unwrap();
    let mk = |h: &GroupElement| {
        let vals = ctx.synthesize(&left_shift_spectrum(&bump, h)).unwrap();
        let mut d = DensityField::new(grid.clone(), vals).unwrap();
        d.normalize().unwrap();
        d
    };
    let fa = mk(&a);
    let fb = mk(&b);
    let ab = fa.convolve(&fb).unwrap();
    let ba = fb.convolve(&fa).unwrap();
    let sep = l1(&grid, ab.values(), ba.values());
    assert!(sep > 0.01, "commutator separation only {sep}");
}

#[test]
fn near_delta_convolution_reproduces_the_other_factor() {
    let grid = Grid::build(GroupId::So2, &[256], None).unwrap();
    let rho = circle_heat_density(&grid, 1e-3).unwrap();
    assert!((rho.mass() - 1.0).abs() < 1e-12, "kernel mass {}", rho.mass());
    let f = DensityField::from_chart_fn(grid.clone(), |q| 1.0 + 0.5 * q[0].cos()).unwrap();
    let conv = f.convolve(&rho).unwrap();
    let worst = sup(conv.values(), f.values());
    // The first mode contracts by exp(-t/2): deviation
    // 0.5 (1 - exp(-0.0005)) ~ 2.5e-4, inside the near-delta budget.
    assert!(worst < 1e-3, "near-delta deviation {worst}");
    assert!(worst > 1e-5, "smoothing must still bite; deviation {worst}");
}

#[test]
fn heat_smoothing_matches_the_spectral_decay_rate() {
    let grid = Grid::build(GroupId::So3, &[16, 16, 16], None).unwrap();
    let (f, fs) = band_limited_rotation_density(&grid, 5, 0.6, 7).unwrap();
    let t = 0.8;
    let (rho, _) = rotation_heat_density(&grid, &DiffusionParams::isotropic(t).unwrap()).unwrap();
    let conv = f.convolve(&rho).unwrap();
    // Isotropic diffusion multiplies level l by exp(-l(l+1) t / 2), so
    // f - f * rho is the complementary multiplier applied to f.
    let mut pred = So3Spectrum::zeros(fs.l_max());
    for l in 0..=fs.l_max() {
        let damp = 1.0 - (-0.5 * t * (l * (l + 1)) as f64).exp();
        let blk = fs.block(l) * C64::new(damp, 0.0);
        pred.block_mut(l).copy_from(&blk);
    }
    let ctx = So3Harmonics::new(grid.clone(), pred.l_max()).unwrap();
    let predicted = ctx.synthesize(&pred).unwrap();
    let worst = (0..grid.len())
        .map(|i| ((f.values()[i] - conv.values()[i]) - predicted[i]).abs())
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-9, "smoothing defect {worst}");
}

#[test]
fn uniform_factor_absorbs_convolution() {
    let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
    let u = DensityField::from_fn(grid.clone(), |_| 1.0).unwrap();
    let (f, _) = band_limited_rotation_density(&grid, 4, 0.5, 9).unwrap();
    for conv in [u.convolve(&f).unwrap(), f.convolve(&u).unwrap()] {
        let worst = conv
            .values()
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-10, "uniform absorption defect {worst}");
    }
}

#[test]
fn class_kernels_commute_in_convolution() {
    let grid = Grid::build(GroupId::So3, &[12, 8, 12], None).unwrap();
    let (chi, _) =
        rotation_heat_density(&grid, &DiffusionParams::isotropic(0.74).unwrap()).unwrap();
    let (f, _) = band_limited_rotation_density(&grid, 4, 0.5, 13).unwrap();
    let fc = f.convolve(&chi).unwrap();
    let cf = chi.convolve(&f).unwrap();
    let gap = l1(&grid, fc.values(), cf.values());
    assert!(gap < 1e-6, "class kernel fails to commute by {gap}");
}
