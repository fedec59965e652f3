//! Entropy-side checks: quadrature invariance, the Plancherel identity,
//! entropy growth under convolution, dispersion bounds, finite-group
//! bounds, marginal subadditivity, and the entropy-preserving
//! rearrangements of convolutions.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::density::{DecompositionSpec, DensityField, Marginals};
use crate::error::Result;
use crate::families::{
    band_limited_rotation_density, circle_heat_density, rotation_heat_density,
    symmetric_rotation_density,
};
use crate::finite::{vector_entropy, FiniteDensity, FiniteGroup};
use crate::group::{GroupId, Side};
use crate::harmonic::{
    convolve_spectra, dispersions, left_shift_spectrum, right_shift_spectrum, DiffusionParams,
    So3Spectrum,
};
use crate::info;
use crate::quadrature::Grid;
use crate::util::neumaier_sum;

use super::{
    entropy_of, field_from_spectrum, l1_distance, random_rotation, rng_for, so3_env, synth_values,
    uniform_spectrum, InequalityReport, Section, So3Env, SuiteConfig,
};

const HAAR_SALT: u64 = 0xA1;
const PLANCHEREL_SALT: u64 = 0xA2;
const ENTROPY_CONV_SALT: u64 = 0xA3;
const DISPERSION_SALT: u64 = 0xA4;
const FINITE_SALT: u64 = 0xA5;
const MARGINAL_SALT: u64 = 0xA6;
const EQUALITIES_SALT: u64 = 0xA7;

/// Band for the `k`-th drawn density: the configured base plus a small
/// rotation through `bump`, clipped to the grid's exact-transform capacity.
pub(crate) fn clip_band(env: &So3Env, base: usize, bump: usize) -> usize {
    (base + bump).clamp(1, env.l_eff.max(1))
}

// ---------------------------------------------------------------------------
// haar-invariance
// ---------------------------------------------------------------------------

/// Integrals against the normalized Haar weights are unchanged when the
/// integrand is shifted (either side) or inverted. Shifted band-limited
/// densities stay band-limited, so the quadrature evaluates every variant
/// exactly and the comparison is free of discretization slack.
pub fn check_haar_invariance(cfg: &SuiteConfig) -> Result<InequalityReport> {
    const DENSITIES: usize = 20;
    const TOL: f64 = 1e-8;

    let env = so3_env(cfg, "haar-invariance")?;
    let mut section = Section::new(cfg, "haar-invariance");
    env.note_clip(cfg, &mut section);
    let mut rng = rng_for(cfg, HAAR_SALT);

    for k in 0..DENSITIES {
        let band = clip_band(&env, cfg.density.band, k % 3);
        let (field, spec) =
            band_limited_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        let base = env.grid.integrate(field.values());
        let h = random_rotation(&mut rng)?;

        let left = synth_values(&env.grid, &left_shift_spectrum(&spec, &h))?;
        section.eq(
            format!("density {k} (band {band}): left shift keeps the integral"),
            env.grid.integrate(&left),
            base,
            TOL,
        );
        let right = synth_values(&env.grid, &right_shift_spectrum(&spec, &h))?;
        section.eq(
            format!("density {k} (band {band}): right shift keeps the integral"),
            env.grid.integrate(&right),
            base,
            TOL,
        );
        let inv = synth_values(&env.grid, &spec.inverted())?;
        section.eq(
            format!("density {k} (band {band}): inversion keeps the integral"),
            env.grid.integrate(&inv),
            base,
            TOL,
        );
    }

    let ones = vec![1.0; env.grid.len()];
    section.eq(
        "uniform density: normalized Haar weights sum to one",
        env.grid.integrate(&ones),
        1.0,
        1e-12,
    );
    Ok(section.finish())
}

// ---------------------------------------------------------------------------
// plancherel
// ---------------------------------------------------------------------------

/// The dimension-weighted squared block norms of a spectrum sum to the
/// squared integral norm of the synthesized density, and the spectral
/// convolution agrees with the quadrature convolution engine.
pub fn check_plancherel(cfg: &SuiteConfig) -> Result<InequalityReport> {
    const REL_TOL: f64 = 1e-9;

    let env = so3_env(cfg, "plancherel")?;
    let mut section = Section::new(cfg, "plancherel");
    env.note_clip(cfg, &mut section);
    let mut rng = rng_for(cfg, PLANCHEREL_SALT);

    let mut identity = |label: String, spec: &So3Spectrum| -> Result<()> {
        let values = synth_values(&env.grid, spec)?;
        let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        let rhs = env.grid.integrate(&sq);
        section.eq_note(
            label,
            spec.power(),
            rhs,
            REL_TOL * rhs.abs().max(1.0),
            "tolerance is 1e-9 relative to the squared norm",
        );
        Ok(())
    };

    for bump in 0..3 {
        let band = clip_band(&env, cfg.density.band, bump);
        let (_, spec) =
            band_limited_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        identity(format!("band-limited draw (band {band})"), &spec)?;
    }
    {
        let band = clip_band(&env, cfg.density.band, 0);
        let (_, spec) =
            symmetric_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        identity(format!("symmetrized draw (band {band})"), &spec)?;
    }
    for factor in [1.0, 1.6, 2.4] {
        let t = cfg.density.heat_time * factor;
        let params = DiffusionParams::isotropic(t)?;
        let (_, spec) = rotation_heat_density(&env.grid, &params)?;
        identity(format!("heat kernel (t = {t})"), &spec)?;
    }
    identity("uniform density".to_string(), &uniform_spectrum())?;

    // Convolution-theorem cross-check: the quadrature engine against the
    // block-product spectrum, compared in L1.
    let b1 = clip_band(&env, cfg.density.band, 0);
    let b2 = clip_band(&env, cfg.density.band, 1);
    let (f1, s1) = band_limited_rotation_density(&env.grid, b1, cfg.density.amplitude, rng.gen())?;
    let (f2, s2) = band_limited_rotation_density(&env.grid, b2, cfg.density.amplitude, rng.gen())?;
    let engine = f1.convolve(&f2)?;
    let spectral = synth_values(&env.grid, &convolve_spectra(&s1, &s2))?;
    section.eq(
        format!("convolution engine matches the spectral route in L1 (bands {b1}, {b2})"),
        l1_distance(&env.grid, engine.values(), &spectral),
        0.0,
        1e-6,
    );
    Ok(section.finish())
}

// ---------------------------------------------------------------------------
// entropy-convolution
// ---------------------------------------------------------------------------

/// Convolving two densities never drops below either factor's entropy:
/// `S(f1 * f2) >= max(S(f1), S(f2))`, with an exact uniform fixed point,
/// monotone growth along a self-convolution chain, and engine-grade
/// versions on the two non-compact test groups.
pub fn check_entropy_convolution(cfg: &SuiteConfig) -> Result<InequalityReport> {
    const PAIRS: usize = 50;
    const TOL: f64 = 1e-6;

    let env = so3_env(cfg, "entropy-convolution")?;
    let mut section = Section::new(cfg, "entropy-convolution");
    env.note_clip(cfg, &mut section);
    let mut rng = rng_for(cfg, ENTROPY_CONV_SALT);

    for k in 0..PAIRS {
        let b1 = clip_band(&env, cfg.density.band, k % 3);
        let b2 = clip_band(&env, cfg.density.band, (k + 1) % 3);
        let (f1, s1) =
            band_limited_rotation_density(&env.grid, b1, cfg.density.amplitude, rng.gen())?;
        let (f2, s2) =
            band_limited_rotation_density(&env.grid, b2, cfg.density.amplitude, rng.gen())?;
        let conv = field_from_spectrum(&env.grid, &convolve_spectra(&s1, &s2))?;
        section.le(
            format!("pair {k} (bands {b1}, {b2}): convolution entropy at least each factor's"),
            info::entropy(&f1).max(info::entropy(&f2)),
            info::entropy(&conv),
            TOL,
        );
    }

    // The engine route reproduces the spectral route's entropy.
    {
        let band = clip_band(&env, cfg.density.band, 0);
        let (f1, s1) =
            band_limited_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        let (f2, s2) =
            band_limited_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        let engine = f1.convolve(&f2)?;
        let spectral = field_from_spectrum(&env.grid, &convolve_spectra(&s1, &s2))?;
        section.eq(
            "engine and spectral convolution agree on the entropy",
            info::entropy(&engine),
            info::entropy(&spectral),
            1e-9,
        );
    }

    // Uniform factor: the convolution is exactly uniform again.
    {
        let band = clip_band(&env, cfg.density.band, 1);
        let (_, spec) =
            band_limited_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        let conv = convolve_spectra(&uniform_spectrum(), &spec);
        section.eq(
            "uniform factor: convolution entropy is the uniform entropy",
            entropy_of(&env.grid, synth_values(&env.grid, &conv)?)?,
            0.0,
            1e-12,
        );
    }

    // Self-convolution chain: entropy is nondecreasing step by step and the
    // chain parks just below the uniform maximum (entropy zero).
    {
        let band = clip_band(&env, cfg.density.band, 0);
        let (f0, s0) =
            band_limited_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        let mut spec = s0.clone();
        let mut prev = info::entropy(&f0);
        let mut last = prev;
        for step in 1..=5 {
            spec = convolve_spectra(&spec, &s0);
            let s = entropy_of(&env.grid, synth_values(&env.grid, &spec)?)?;
            section.le(
                format!("chain step {step}: entropy does not decrease"),
                prev,
                s,
                TOL,
            );
            prev = s;
            last = s;
        }
        section.le(
            "chain end: entropy has climbed to within 0.05 of the uniform maximum",
            -0.05,
            last,
            0.0,
        );
    }

    // Engine-grade instances on the non-compact groups (interpolating
    // quadrature convolution on truncated windows).
    for (group, shape, label) in [
        (GroupId::Se2, vec![16, 16, 8], "planar motions"),
        (GroupId::H1, vec![12, 12, 12], "Heisenberg group"),
    ] {
        let grid = Grid::build(group, &shape, Some(4.0))?;
        let f1 = window_gaussian(&grid, 0.8)?;
        let f2 = window_gaussian(&grid, 0.6)?;
        let conv = f1.convolve(&f2)?;
        section.le_note(
            format!("{label}: convolution entropy at least each factor's"),
            info::entropy(&f1).max(info::entropy(&f2)),
            info::entropy(&conv),
            1e-3,
            "interpolation-grade engine on a truncated window",
        );
    }
    Ok(section.finish())
}

/// Centered Gaussian bump in chart coordinates (angles wrapped), normalized
/// on the grid. The generic-engine test density: smooth, positive, and far
/// from the truncation boundary.
fn window_gaussian(grid: &Arc<Grid>, sigma: f64) -> Result<DensityField> {
    let group = grid.group();
    let mut field = DensityField::from_chart_fn(grid.clone(), |coords| {
        let q: f64 = coords
            .iter()
            .enumerate()
            .map(|(ax, &x)| {
                // The planar-motion chart's third axis is an angle.
                let v = if group == GroupId::Se2 && ax == 2 {
                    crate::util::wrap_pi(x)
                } else {
                    x
                };
                v * v
            })
            .sum();
        (-q / (2.0 * sigma * sigma)).exp()
    })?;
    field.normalize()?;
    Ok(field)
}

// ---------------------------------------------------------------------------
// dispersion
// ---------------------------------------------------------------------------

/// The spectral spread functionals: the Frobenius form is bounded by the
/// operator form, both grow superadditively under convolution, the flat
/// form lower-bounds entropy, and the flat form plus the log band count is
/// at most the mean dispersion per band.
pub fn check_dispersion(cfg: &SuiteConfig) -> Result<InequalityReport> {
    const PAIRS: usize = 6;
    const SUM_TOL: f64 = 1e-8;
    const ENTROPY_TOL: f64 = 1e-5;

    let env = so3_env(cfg, "dispersion")?;
    let mut section = Section::new(cfg, "dispersion");
    env.note_clip(cfg, &mut section);
    let mut rng = rng_for(cfg, DISPERSION_SALT);

    for j in 0..PAIRS {
        // Equal bands on both factors keep the occupied-block sets aligned,
        // which is what the blockwise superadditivity argument needs.
        let band = clip_band(&env, cfg.density.band, j % 3);
        let (f1, s1) =
            band_limited_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        let (_, s2) =
            band_limited_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        let s12 = convolve_spectra(&s1, &s2);
        let f12 = field_from_spectrum(&env.grid, &s12)?;
        let d1 = dispersions(&s1);
        let d2 = dispersions(&s2);
        let d12 = dispersions(&s12);

        for (who, d) in [("factor 1", &d1), ("factor 2", &d2), ("convolution", &d12)] {
            section.le(
                format!("pair {j} (band {band}) {who}: Frobenius dispersion at most operator dispersion"),
                d.d,
                d.d2,
                SUM_TOL,
            );
        }
        section.le(
            format!("pair {j} (band {band}): operator dispersion superadditive under convolution"),
            d1.d2 + d2.d2,
            d12.d2,
            SUM_TOL,
        );
        section.le(
            format!("pair {j} (band {band}): Frobenius dispersion superadditive under convolution"),
            d1.d + d2.d,
            d12.d,
            SUM_TOL,
        );
        section.le(
            format!("pair {j} (band {band}) factor 1: flat dispersion lower-bounds entropy"),
            d1.tilde_d,
            info::entropy(&f1),
            ENTROPY_TOL,
        );
        section.le(
            format!("pair {j} (band {band}) convolution: flat dispersion lower-bounds entropy"),
            d12.tilde_d,
            info::entropy(&f12),
            ENTROPY_TOL,
        );
        section.le(
            format!("pair {j} (band {band}) factor 1: flat dispersion plus log band weight at most mean dispersion"),
            d1.tilde_d + d1.b.ln(),
            d1.d / d1.b,
            SUM_TOL,
        );
        section.le(
            format!("pair {j} (band {band}) convolution: flat dispersion plus log band weight at most mean dispersion"),
            d12.tilde_d + d12.b.ln(),
            d12.d / d12.b,
            SUM_TOL,
        );
    }

    let du = dispersions(&uniform_spectrum());
    section.eq(
        "uniform density: every dispersion vanishes",
        du.d2.abs() + du.d.abs() + du.tilde_d.abs(),
        0.0,
        1e-12,
    );
    section.eq("uniform density: band weight is one", du.b, 1.0, 0.0);
    Ok(section.finish())
}

// ---------------------------------------------------------------------------
// finite-entropy
// ---------------------------------------------------------------------------

/// On finite groups both convolution bounds are exact arithmetic:
/// `max(S(p), S(q)) <= S(p * q) <= S(p) + S(q)`, and translation and
/// inversion leave entropy untouched. Runs 1000 random pairs spread over
/// six groups and reports the worst slack per group and bound.
pub fn check_finite_entropy(cfg: &SuiteConfig) -> Result<InequalityReport> {
    const TOL: f64 = 1e-12;
    const SHIFT_TOL: f64 = 1e-13;

    let mut section = Section::new(cfg, "finite-entropy");
    let mut rng = rng_for(cfg, FINITE_SALT);

    let groups: Vec<(Arc<FiniteGroup>, usize)> = vec![
        (FiniteGroup::cyclic(5), 167),
        (FiniteGroup::cyclic(8), 167),
        (FiniteGroup::cyclic(12), 167),
        (FiniteGroup::symmetric(3), 167),
        (FiniteGroup::dihedral4(), 166),
        (FiniteGroup::quaternion(), 166),
    ];
    debug_assert_eq!(groups.iter().map(|(_, n)| n).sum::<usize>(), 1000);

    for (group, pairs) in &groups {
        let mut worst_lower = f64::INFINITY;
        let mut worst_lower_sides = (0.0, 0.0);
        let mut worst_upper = f64::INFINITY;
        let mut worst_upper_sides = (0.0, 0.0);
        for _ in 0..*pairs {
            let p = random_finite_density(&mut rng, group)?;
            let q = random_finite_density(&mut rng, group)?;
            let conv = p.convolve(&q)?;
            let (sp, sq, sc) = (p.entropy(), q.entropy(), conv.entropy());
            let lower = sc - sp.max(sq);
            if lower < worst_lower {
                worst_lower = lower;
                worst_lower_sides = (sp.max(sq), sc);
            }
            let upper = (sp + sq) - sc;
            if upper < worst_upper {
                worst_upper = upper;
                worst_upper_sides = (sc, sp + sq);
            }
        }
        section.le_note(
            format!("{}: convolution entropy at least each factor's", group.name()),
            worst_lower_sides.0,
            worst_lower_sides.1,
            TOL,
            format!("worst of {pairs} random pairs"),
        );
        section.le_note(
            format!("{}: convolution entropy at most the factors' sum", group.name()),
            worst_upper_sides.0,
            worst_upper_sides.1,
            TOL,
            format!("worst of {pairs} random pairs"),
        );

        let p = random_finite_density(&mut rng, group)?;
        let h = rng.gen_range(0..group.order());
        section.eq(
            format!("{}: translation keeps entropy", group.name()),
            p.translate(h, Side::Left).entropy(),
            p.entropy(),
            SHIFT_TOL,
        );
    }

    let q8 = FiniteGroup::quaternion();
    let p = random_finite_density(&mut rng, &q8)?;
    section.eq(
        "Q8: inversion keeps entropy",
        p.invert().entropy(),
        p.entropy(),
        SHIFT_TOL,
    );
    Ok(section.finish())
}

fn random_finite_density(rng: &mut ChaCha8Rng, group: &Arc<FiniteGroup>) -> Result<FiniteDensity> {
    let weights: Vec<f64> = (0..group.order()).map(|_| 0.01 + rng.gen::<f64>()).collect();
    FiniteDensity::new(group.clone(), weights)
}

// ---------------------------------------------------------------------------
// marginals
// ---------------------------------------------------------------------------

/// Entropy is subadditive across subgroup splits: the circle-coset and
/// three-axis splits on the rotation group, section-based subgroup splits,
/// nested chains, uniform-multiplicity double cosets (with the log
/// multiplicity correction), and direct products, where independence makes
/// the bound tight.
pub fn check_marginal_inequalities(cfg: &SuiteConfig) -> Result<InequalityReport> {
    const DENSITIES: usize = 20;
    const LIE_TOL: f64 = 1e-5;
    const EXACT_TOL: f64 = 1e-12;

    let env = so3_env(cfg, "marginals")?;
    let mut section = Section::new(cfg, "marginals");
    env.note_clip(cfg, &mut section);
    let mut rng = rng_for(cfg, MARGINAL_SALT);

    // Rotation group: split through the third-angle circle subgroup, and
    // through all three chart axes.
    for k in 0..DENSITIES {
        let band = clip_band(&env, cfg.density.band, k % 3);
        let (field, _) =
            band_limited_rotation_density(&env.grid, band, cfg.density.amplitude, rng.gen())?;
        let s = info::entropy(&field);
        let Marginals::Coset { subgroup, coset } = field.marginalize(DecompositionSpec::CosetCircle)?
        else {
            unreachable!("circle split returns coset marginals")
        };
        section.le(
            format!("density {k} (band {band}): split across the circle subgroup"),
            s,
            coset.entropy() + subgroup.entropy(),
            LIE_TOL,
        );
        let Marginals::DoubleCoset { alpha, beta, gamma } =
            field.marginalize(DecompositionSpec::DoubleCosetEuler)?
        else {
            unreachable!("axis split returns three marginals")
        };
        section.le(
            format!("density {k} (band {band}): split across the three chart axes"),
            s,
            alpha.entropy() + beta.entropy() + gamma.entropy(),
            LIE_TOL,
        );
    }
    {
        let uniform = DensityField::from_fn(env.grid.clone(), |_| 1.0)?;
        let Marginals::Coset { subgroup, coset } =
            uniform.marginalize(DecompositionSpec::CosetCircle)?
        else {
            unreachable!()
        };
        section.eq(
            "uniform density: circle split is tight at zero",
            info::entropy(&uniform),
            coset.entropy() + subgroup.entropy(),
            1e-10,
        );
    }

    // Finite subgroup splits through an explicit coset section.
    let z8 = FiniteGroup::cyclic(8);
    let s3 = FiniteGroup::symmetric(3);
    for (group, gens, label) in [
        (&z8, vec![4usize], "Z8 through its two-element subgroup"),
        (&z8, vec![2usize], "Z8 through its four-element subgroup"),
        (&s3, vec![transposition_index(&s3)?], "S3 through a transposition"),
    ] {
        let h = group.subgroup_closure(&gens)?;
        let p = random_finite_density(&mut rng, group)?;
        let (coset_masses, _) = p.coset_marginal(&h, Side::Left)?;
        let fiber = subgroup_section_marginal(&p, &h)?;
        section.le(
            format!("{label}: coset split"),
            p.entropy(),
            vector_entropy(&coset_masses) + vector_entropy(&fiber),
            EXACT_TOL,
        );
    }

    // Nested chain: Z8 over its four-element subgroup over its two-element
    // subgroup, with explicit section representatives.
    {
        let p = random_finite_density(&mut rng, &z8)?;
        let probs = p.probabilities();
        let (reps_outer, reps_mid, fiber) = ([0usize, 1], [0usize, 2], [0usize, 4]);
        let mut m_outer = [0.0; 2];
        let mut m_mid = [0.0; 2];
        let mut m_fiber = [0.0; 2];
        for (i, &a) in reps_outer.iter().enumerate() {
            for (j, &b) in reps_mid.iter().enumerate() {
                for (k, &c) in fiber.iter().enumerate() {
                    let pr = probs[z8.mul(z8.mul(a, b), c)];
                    m_outer[i] += pr;
                    m_mid[j] += pr;
                    m_fiber[k] += pr;
                }
            }
        }
        section.le(
            "Z8 nested chain: three-way split",
            p.entropy(),
            vector_entropy(&m_outer) + vector_entropy(&m_mid) + vector_entropy(&m_fiber),
            EXACT_TOL,
        );
    }

    // Uniform-multiplicity double-coset splits, corrected by the fiber
    // multiplicity.
    {
        let q8 = FiniteGroup::quaternion();
        let center = central_elements(&q8);
        let p = random_finite_density(&mut rng, &q8)?;
        double_coset_bound(&mut section, "Q8 between its center and itself", &p, &center, &center)?;

        let k2 = z8.subgroup_closure(&[4])?;
        let h4 = z8.subgroup_closure(&[2])?;
        let p = random_finite_density(&mut rng, &z8)?;
        double_coset_bound(
            &mut section,
            "Z8 between its two- and four-element subgroups",
            &p,
            &k2,
            &h4,
        )?;

        let a3 = s3.subgroup_closure(&[three_cycle_index(&s3)?])?;
        let refl = s3.subgroup_closure(&[transposition_index(&s3)?])?;
        let p = random_finite_density(&mut rng, &s3)?;
        double_coset_bound(
            &mut section,
            "S3 between its rotation subgroup and a transposition",
            &p,
            &a3,
            &refl,
        )?;

        // Mixed fiber sizes are refused rather than silently mis-scored.
        match s3.double_cosets(&refl, &refl) {
            Err(e) => section.warn(format!(
                "S3 split between two copies of the same transposition refused as designed: {e}"
            )),
            Ok(_) => section.le(
                "S3 mixed-multiplicity split should have been refused",
                1.0,
                0.0,
                0.0,
            ),
        }
    }

    // Direct product (two cyclic factors of coprime order inside Z12):
    // subadditive in general, tight for independent factors.
    {
        let z12 = FiniteGroup::cyclic(12);
        let p = random_finite_density(&mut rng, &z12)?;
        let probs = p.probabilities();
        let mut m3 = [0.0; 3];
        let mut m4 = [0.0; 4];
        for k in 0..12 {
            m3[k % 3] += probs[k];
            m4[k % 4] += probs[k];
        }
        section.le(
            "Z12 as a product of cyclic factors: split",
            p.entropy(),
            vector_entropy(&m3) + vector_entropy(&m4),
            EXACT_TOL,
        );

        let q3: Vec<f64> = (0..3).map(|_| 0.05 + rng.gen::<f64>()).collect();
        let q4: Vec<f64> = (0..4).map(|_| 0.05 + rng.gen::<f64>()).collect();
        let t3: f64 = q3.iter().sum();
        let t4: f64 = q4.iter().sum();
        let joint: Vec<f64> = (0..12).map(|k| q3[k % 3] / t3 * q4[k % 4] / t4).collect();
        let p = FiniteDensity::new(z12.clone(), joint)?;
        let norm3: Vec<f64> = q3.iter().map(|v| v / t3).collect();
        let norm4: Vec<f64> = q4.iter().map(|v| v / t4).collect();
        section.eq(
            "Z12 with independent factors: split is tight",
            p.entropy(),
            vector_entropy(&norm3) + vector_entropy(&norm4),
            EXACT_TOL,
        );
    }

    // Torus: a correlated joint on two circles against its factor
    // marginals, and an independent product where the split is tight.
    torus_instances(cfg, &mut section)?;

    Ok(section.finish())
}

fn torus_instances(cfg: &SuiteConfig, section: &mut Section) -> Result<()> {
    let circle = Grid::build(GroupId::So2, &[48], None)?;
    let nodes = circle.axes()[0].nodes.clone();
    let weights = circle.weights().to_vec();
    let n = nodes.len();

    let joint_entropy = |p: &dyn Fn(f64, f64) -> f64| -> (f64, f64, f64) {
        let mut m1 = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        let mut cells = Vec::with_capacity(n * n);
        for (i, &t1) in nodes.iter().enumerate() {
            for (j, &t2) in nodes.iter().enumerate() {
                let v = p(t1, t2);
                m1[i] += weights[j] * v;
                m2[j] += weights[i] * v;
                cells.push(if v > 0.0 {
                    -weights[i] * weights[j] * v * v.ln()
                } else {
                    0.0
                });
            }
        }
        let s12 = neumaier_sum(cells.into_iter());
        let s1 = neumaier_sum(
            m1.iter()
                .zip(&weights)
                .map(|(&v, &w)| if v > 0.0 { -w * v * v.ln() } else { 0.0 }),
        );
        let s2 = neumaier_sum(
            m2.iter()
                .zip(&weights)
                .map(|(&v, &w)| if v > 0.0 { -w * v * v.ln() } else { 0.0 }),
        );
        (s12, s1, s2)
    };

    let correlated = |t1: f64, t2: f64| {
        1.0 + 0.3 * (t1 + t2).cos()
            + 0.15 * (2.0 * t1 - t2 + 0.7).cos()
            + 0.1 * (3.0 * t2 + 1.1).cos()
            + 0.15 * (t1 - 0.3).cos()
            + 0.1 * (2.0 * t2).sin()
    };
    let (s12, s1, s2) = joint_entropy(&correlated);
    section.le(
        "torus joint: split into the two circle factors",
        s12,
        s1 + s2,
        1e-10,
    );

    let heat = circle_heat_density(&circle, 0.8 * cfg.density.heat_time)?;
    let heat_values = heat.values().to_vec();
    let bump: Vec<f64> = nodes.iter().map(|&t| 1.0 + 0.3 * (t - 0.4).cos()).collect();
    let product = move |t1: f64, t2: f64| -> f64 {
        // Nodes are uniform, so index lookup by angle is exact.
        let idx = |t: f64| {
            let step = std::f64::consts::TAU / n as f64;
            ((t / step).round() as usize) % n
        };
        bump[idx(t1)] * heat_values[idx(t2)]
    };
    let (s12, s1, s2) = joint_entropy(&product);
    section.eq(
        "torus with independent factors: split is tight",
        s12,
        s1 + s2,
        1e-12,
    );
    Ok(())
}

/// Subgroup marginal through the section that tags each group element by
/// its coset representative: `fiber(h) = SUM_classes p(rep * h)`.
fn subgroup_section_marginal(p: &FiniteDensity, h: &[usize]) -> Result<Vec<f64>> {
    let group = p.group().clone();
    let cosets = group.cosets(h, Side::Left)?;
    let probs = p.probabilities();
    let mut out = vec![0.0; h.len()];
    for class in &cosets {
        let rep = class[0];
        for (j, &hj) in h.iter().enumerate() {
            out[j] += probs[group.mul(rep, hj)];
        }
    }
    Ok(out)
}

/// Double-coset entropy bound with the uniform fiber multiplicity `m`:
/// every group element factors as `k * rep * h` in exactly `m` ways, so
/// `S(p) <= S(q_K) + S(class masses) + S(q_H) - log m`, where `q_K` and
/// `q_H` average the `m`-fold overcount away.
fn double_coset_bound(
    section: &mut Section,
    label: &str,
    p: &FiniteDensity,
    k: &[usize],
    h: &[usize],
) -> Result<()> {
    let group = p.group().clone();
    let (masses, classes, mult) = p.double_coset_marginal(k, h)?;
    let probs = p.probabilities();
    let m = mult as f64;
    let mut qk = vec![0.0; k.len()];
    let mut qh = vec![0.0; h.len()];
    for class in &classes {
        let rep = class[0];
        for (i, &ki) in k.iter().enumerate() {
            for (j, &hj) in h.iter().enumerate() {
                let pr = probs[group.mul(group.mul(ki, rep), hj)] / m;
                qk[i] += pr;
                qh[j] += pr;
            }
        }
    }
    section.le_note(
        format!("{label}: double-coset split"),
        p.entropy(),
        vector_entropy(&qk) + vector_entropy(&masses) + vector_entropy(&qh) - m.ln(),
        1e-12,
        format!("fiber multiplicity {mult}"),
    );
    Ok(())
}

fn central_elements(group: &FiniteGroup) -> Vec<usize> {
    (0..group.order())
        .filter(|&x| (0..group.order()).all(|y| group.mul(x, y) == group.mul(y, x)))
        .collect()
}

/// Index of some order-2 element (a transposition in the symmetric group).
fn transposition_index(group: &FiniteGroup) -> Result<usize> {
    (1..group.order())
        .find(|&x| group.mul(x, x) == 0)
        .ok_or_else(|| crate::error::Error::Config("no order-2 element".into()))
}

/// Index of some order-3 element.
fn three_cycle_index(group: &FiniteGroup) -> Result<usize> {
    (1..group.order())
        .find(|&x| group.mul(x, x) != 0 && group.mul(group.mul(x, x), x) == 0)
        .ok_or_else(|| crate::error::Error::Config("no order-3 element".into()))
}

// ---------------------------------------------------------------------------
// entropy-equalities
// ---------------------------------------------------------------------------

/// Rearrangements that provably keep a convolution's entropy: inverting and
/// swapping the factors, shifting them on opposite sides, conjugating both
/// by one element, commuting a central factor, commuting two symmetric
/// factors, and the shifted variants of a central pair. Each nontrivial
/// variant also carries an L1 witness that the rearranged density itself
/// moved.
pub fn check_entropy_equalities(cfg: &SuiteConfig) -> Result<InequalityReport> {
    const EQ_TOL: f64 = 1e-5;
    const WITNESS: f64 = 1e-3;

    let env = so3_env(cfg, "entropy-equalities")?;
    let mut section = Section::new(cfg, "entropy-equalities");
    env.note_clip(cfg, &mut section);
    let mut rng = rng_for(cfg, EQUALITIES_SALT);

    let b1 = clip_band(&env, cfg.density.band, 0);
    let b2 = clip_band(&env, cfg.density.band, 1);
    let (_, s1) = band_limited_rotation_density(&env.grid, b1, cfg.density.amplitude, rng.gen())?;
    let (_, s2) = band_limited_rotation_density(&env.grid, b2, cfg.density.amplitude, rng.gen())?;
    let g1 = random_rotation(&mut rng)?;
    let g2 = random_rotation(&mut rng)?;

    let base_values = synth_values(&env.grid, &convolve_spectra(&s1, &s2))?;
    let s_base = entropy_of(&env.grid, base_values.clone())?;

    let variant = |section: &mut Section,
                       label: &str,
                       spec: So3Spectrum,
                       witness: Option<f64>|
     -> Result<()> {
        let values = synth_values(&env.grid, &spec)?;
        section.eq(
            format!("{label}: entropy matches the base convolution"),
            entropy_of(&env.grid, values.clone())?,
            s_base,
            EQ_TOL,
        );
        if let Some(floor) = witness {
            section.le(
                format!("{label}: the rearranged density itself moved (L1)"),
                floor,
                l1_distance(&env.grid, &values, &base_values),
                0.0,
            );
        }
        Ok(())
    };

    variant(
        &mut section,
        "inverted factors in swapped order",
        convolve_spectra(&s2.inverted(), &s1.inverted()),
        Some(WITNESS),
    )?;
    variant(
        &mut section,
        "left-shifted first factor, right-shifted second",
        convolve_spectra(
            &left_shift_spectrum(&s1, &g1),
            &right_shift_spectrum(&s2, &g2),
        ),
        Some(WITNESS),
    )?;
    let conjugate = |spec: &So3Spectrum, g| right_shift_spectrum(&left_shift_spectrum(spec, g), g);
    variant(
        &mut section,
        "both factors conjugated by one rotation",
        convolve_spectra(&conjugate(&s1, &g1), &conjugate(&s2, &g1)),
        Some(WITNESS),
    )?;
    variant(
        &mut section,
        "combined: shifted, inverted, swapped",
        convolve_spectra(
            &left_shift_spectrum(&s2.inverted(), &g1),
            &right_shift_spectrum(&s1.inverted(), &g2),
        ),
        Some(WITNESS),
    )?;

    // A central (class-function) factor commutes exactly.
    {
        let chi = crate::harmonic::heat_spectrum(&DiffusionParams::isotropic(
            1.2 * cfg.density.heat_time,
        )?)?;
        let fwd = entropy_of(&env.grid, synth_values(&env.grid, &convolve_spectra(&chi, &s1))?)?;
        let rev = entropy_of(&env.grid, synth_values(&env.grid, &convolve_spectra(&s1, &chi))?)?;
        section.eq(
            "central heat factor: both orders give one entropy",
            fwd,
            rev,
            EQ_TOL,
        );
    }

    // Two symmetric factors commute in entropy though not pointwise.
    {
        let (_, sym1) =
            symmetric_rotation_density(&env.grid, b1, cfg.density.amplitude, rng.gen())?;
        let (_, sym2) = symmetric_rotation_density(
            &env.grid,
            clip_band(&env, cfg.density.band.saturating_sub(1).max(1), 0),
            cfg.density.amplitude,
            rng.gen(),
        )?;
        let fwd_values = synth_values(&env.grid, &convolve_spectra(&sym1, &sym2))?;
        let rev_values = synth_values(&env.grid, &convolve_spectra(&sym2, &sym1))?;
        let fwd = entropy_of(&env.grid, fwd_values.clone())?;
        let rev = entropy_of(&env.grid, rev_values.clone())?;
        section.eq(
            "two symmetric factors: both orders give one entropy",
            fwd,
            rev,
            EQ_TOL,
        );
        section.le(
            "two symmetric factors: the two orderings differ pointwise (L1)",
            1e-4,
            l1_distance(&env.grid, &fwd_values, &rev_values),
            0.0,
        );
        let same = entropy_of(&env.grid, synth_values(&env.grid, &convolve_spectra(&sym1, &sym1))?)?;
        let same_rev =
            entropy_of(&env.grid, synth_values(&env.grid, &convolve_spectra(&sym1, &sym1))?)?;
        section.eq(
            "a symmetric factor against itself: trivially order-free",
            same,
            same_rev,
            1e-12,
        );
    }

    // A pair of central factors tolerates independent shifts on either side.
    {
        let chi1 = crate::harmonic::heat_spectrum(&DiffusionParams::isotropic(cfg.density.heat_time)?)?;
        let chi2 =
            crate::harmonic::heat_spectrum(&DiffusionParams::isotropic(1.6 * cfg.density.heat_time)?)?;
        let central_base_values = synth_values(&env.grid, &convolve_spectra(&chi1, &chi2))?;
        let central_base = entropy_of(&env.grid, central_base_values.clone())?;
        let shifted = [
            (
                "central pair, both factors left-shifted",
                convolve_spectra(
                    &left_shift_spectrum(&chi1, &g1),
                    &left_shift_spectrum(&chi2, &g2),
                ),
            ),
            (
                "central pair, both factors right-shifted",
                convolve_spectra(
                    &right_shift_spectrum(&chi1, &g1),
                    &right_shift_spectrum(&chi2, &g2),
                ),
            ),
            (
                "central pair, right-shifted against left-shifted",
                convolve_spectra(
                    &right_shift_spectrum(&chi1, &g1),
                    &left_shift_spectrum(&chi2, &g2),
                ),
            ),
        ];
        for (label, spec) in shifted {
            let values = synth_values(&env.grid, &spec)?;
            section.eq(
                format!("{label}: entropy matches the unshifted pair"),
                entropy_of(&env.grid, values.clone())?,
                central_base,
                EQ_TOL,
            );
            if label.contains("right-shifted against") {
                section.le(
                    format!("{label}: the shifted density itself moved (L1)"),
                    WITNESS,
                    l1_distance(&env.grid, &values, &central_base_values),
                    0.0,
                );
            }
        }
    }

    Ok(section.finish())
}
