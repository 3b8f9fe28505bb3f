use born_core::gridfft::{nudft, Grid, SampledField, Space};
use born_core::potentials::*;
use born_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn family(a: f64, m: u32) -> PotentialSpec {
    PotentialSpec::along_x(2, 1.0, a, m, Complex64::new(1.0, 0.0), 2.0).unwrap()
}

// max |nudft − closed form| / max |closed form| over random in-band momenta
fn closed_form_error(spec: &PotentialSpec, v: &SampledField, count: usize, seed: u64) -> f64 {
    let g = v.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<_> = (0..count)
        .map(|_| {
            let px = rng.gen_range(-0.5..0.5) * g.nyquist(0);
            let py = rng.gen_range(-0.5..0.5) * g.nyquist(1);
            [px, py, 0.0]
        })
        .collect();
    let got = nudft(v, &pts).unwrap();
    let want: Vec<_> = pts.iter().map(|p| spec.eval_vtilde(p)).collect();
    let scale = want.iter().map(|z| z.norm()).fold(0.0, f64::max);
    got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
}

#[test]
fn family_passes_support_check() {
    let spec = family(1.0, 2);
    let g = Grid::new(&[60.0, 60.0], &[512, 512]).unwrap();
    let s = sample_potential(&spec, &g, SamplingMode::BandLimited).unwrap();
    assert!(s.warnings.is_empty());
    let r = verify_support(&s.field, &[1.0, 0.0, 0.0], 1.0, 1e-3).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(closed_form_error(&spec, &s.field, 100, 1) <= 1e-3);
}

#[test]
fn band_limited_beats_pointwise_for_the_slab() {
    let spec = family(1.0, 2);
    let g = Grid::new(&[40.0, 40.0], &[256, 256]).unwrap();
    let bl = sample_potential(&spec, &g, SamplingMode::BandLimited).unwrap().field;
    let pw = sample_potential(&spec, &g, SamplingMode::Pointwise).unwrap().field;
    let e_bl = closed_form_error(&spec, &bl, 60, 2);
    let e_pw = closed_form_error(&spec, &pw, 60, 2);
    assert!(e_bl < 0.1 * e_pw, "band-limited {e_bl:.2e} vs pointwise {e_pw:.2e}");
}

#[test]
fn gaussian_profile_matches_closed_form() {
    let spec = family(2.0, 2).with_transverse(Transverse::Gaussian);
    let g = Grid::new(&[60.0, 30.0], &[256, 128]).unwrap();
    let v = sample_potential(&spec, &g, SamplingMode::Pointwise).unwrap().field;
    assert!(closed_form_error(&spec, &v, 100, 3) <= 1e-3);
}

#[test]
fn other_axes_work_too() {
    let mut spec = family(1.0, 2);
    spec.u = vec![0.0, -1.0];
    let g = Grid::new(&[60.0, 60.0], &[512, 512]).unwrap();
    let v = sample_potential(&spec, &g, SamplingMode::BandLimited).unwrap().field;
    let r = verify_support(&v, &[0.0, -1.0, 0.0], 1.0, 1e-3).unwrap();
    assert!(r.pass, "{r:?}");
    let r = verify_support(&v, &[0.0, 1.0, 0.0], 1.0, 1e-3).unwrap();
    assert!(!r.pass);
}

#[test]
fn closed_form_example_3d() {
    let spec = PotentialSpec::along_x(3, 1.0, 1.0, 1, Complex64::new(1.0, 0.0), 2.0).unwrap();
    let p = [2.0, 0.0, 0.0];
    let v = spec.eval_vtilde(&p);
    assert!((v.re - 8.0 * PI / 1f64.exp()).abs() < 1e-12 && v.im == 0.0);
    // m = 1 decays slowly along x, so the box must be long
    let g = Grid::new(&[400.0, 8.0, 8.0], &[2048, 32, 32]).unwrap();
    let s = sample_potential(&spec, &g, SamplingMode::BandLimited).unwrap().field;
    let direct = nudft(&s, &[p]).unwrap()[0];
    assert!((direct - v).norm() <= 1e-3 * v.norm(), "{direct} vs {v}");
    let r = verify_support_closed_form(&spec, &Grid::new(&[20.0; 3], &[16; 3]).unwrap(), 1e-12).unwrap();
    assert_eq!(r.forbidden_max, 0.0);
}

#[test]
fn two_sided_gaussian_fails() {
    let g = Grid::new(&[20.0, 20.0], &[64, 64]).unwrap();
    let v = SampledField::from_fn(g, Space::Position, |x| {
        Complex64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0)
    })
    .unwrap();
    let r = verify_support(&v, &[1.0, 0.0, 0.0], 1.0, 1e-3).unwrap();
    assert!(!r.pass);
    assert!(r.ratio > 0.1);
}

#[test]
fn sum_support_uses_smallest_alpha() {
    let mut s2 = family(1.0, 2);
    s2.alpha = 2.0;
    let sum = PotentialSum::new(vec![family(1.0, 2), s2]).unwrap();
    let g = Grid::new(&[60.0, 60.0], &[512, 512]).unwrap();
    let v = sample_potential(&sum, &g, SamplingMode::BandLimited).unwrap().field;
    assert!(verify_support(&v, &[1.0, 0.0, 0.0], sum.alpha_min(), 1e-3).unwrap().pass);
}

fn spec_strategy() -> impl Strategy<Value = PotentialSpec> {
    (
        0.2f64..3.0,
        0.0f64..(2.0 * PI),
        0.3f64..4.0,
        1u32..5,
        -2.0f64..2.0,
        -2.0f64..2.0,
        0.5f64..4.0,
        any::<bool>(),
        (-3.0f64..3.0, -3.0f64..3.0),
    )
        .prop_map(|(alpha, th, a, m, re, im, ell, gauss, (cx, cy))| {
            let mut s = PotentialSpec::along_x(2, alpha, a, m, Complex64::new(re, im), ell).unwrap();
            s.u = vec![th.cos(), th.sin()];
            s.center = vec![cx, cy];
            if gauss {
                s.transverse = Transverse::Gaussian;
            }
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn sampled_family_passes_support(a in 0.5f64..2.0, m in 2u32..4, gauss in any::<bool>(),
                                     re in -2.0f64..2.0, im in -2.0f64..2.0, cy in -3.0f64..3.0) {
        let mut s = PotentialSpec::along_x(2, 1.0, a, m, Complex64::new(re, im), 2.0).unwrap();
        prop_assume!(s.coupling.norm() > 1e-3);
        s.center = vec![0.0, cy];
        if gauss {
            s.transverse = Transverse::Gaussian;
        }
        // at 256 nodes the e^{-aκ} tail aliases past Nyquist into u·p < α
        let g =Grid::new(&[60.0 * a, 60.0 * a], &[512, 512]).unwrap();
        let v = sample_potential(&s, &g, SamplingMode::BandLimited).unwrap().field;
        let r = verify_support(&v, &[1.0, 0.0, 0.0], 1.0, 1e-3).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }
}

proptest! {
    #[test]
    fn forbidden_half_space_is_exactly_zero(s in spec_strategy(), t in -50.0f64..0.0, q in -20.0f64..20.0) {
        let (e1, _) = s.transverse_axes();
        let u = s.u3();
        // u·p = α + t ≤ α
        let p = [(s.alpha + t) * u[0] + q * e1[0], (s.alpha + t) * u[1] + q * e1[1], 0.0];
        prop_assert_eq!(s.eval_vtilde(&p), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn edge_is_continuous(s in spec_strategy(), q in -20.0f64..20.0) {
        let (e1, _) = s.transverse_axes();
        let u = s.u3();
        let p = [s.alpha * u[0] + q * e1[0], s.alpha * u[1] + q * e1[1], 0.0];
        // u·p lands within rounding of α, where ṽ ~ κ^m
        prop_assert!(s.eval_vtilde(&p).norm() < 1e-12);
    }

    #[test]
    fn center_is_a_phase(s in spec_strategy(), px in -5.0f64..5.0, py in -5.0f64..5.0) {
        let p = [px, py, 0.0];
        let c = s.center3();
        let base = s.clone().with_center(&[0.0, 0.0]);
        let want = base.eval_vtilde(&p) * Complex64::cis(-(p[0] * c[0] + p[1] * c[1]));
        let got = s.eval_vtilde(&p);
        prop_assert!((got - want).norm() <= 1e-12 * want.norm().max(1e-300));
        prop_assert!((got.norm() - base.eval_vtilde(&p).norm()).abs() <= 1e-12 * got.norm().max(1e-300));
    }

    #[test]
    fn sums_are_linear(s in spec_strategy(), t in spec_strategy(), px in -5.0f64..5.0, py in -5.0f64..5.0) {
        let mut t = t;
        t.u = s.u.clone();
        let sum = PotentialSum::new(vec![s.clone(), t.clone()]).unwrap();
        let p = [px, py, 0.0];
        prop_assert_eq!(sum.eval_vtilde(&p), s.eval_vtilde(&p) + t.eval_vtilde(&p));
        prop_assert_eq!(sum.eval_v(&p), s.eval_v(&p) + t.eval_v(&p));
        prop_assert_eq!(sum.alpha_min(), s.alpha.min(t.alpha));
    }
}
