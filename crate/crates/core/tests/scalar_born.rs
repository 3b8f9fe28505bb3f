use born_core::gridfft::{forward_ft, nudft, Grid, SampledField, Space};
use born_core::oracle::quad_second_order;
use born_core::potentials::{sample_potential, PotentialSpec, SamplingMode, Transverse};
use born_core::scalar_born::*;
use born_core::{Complex64, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const X: [f64; 3] = [1.0, 0.0, 0.0];
const MINUS_X: [f64; 3] = [-1.0, 0.0, 0.0];

fn theorem_setup(k: f64) -> (ScatterConfig, SampledField) {
    let grid = Grid::new(&[60.0, 60.0], &[512, 512]).unwrap();
    let spec = PotentialSpec::along_x(2, 1.0, 2.0, 2, Complex64::new(1.0, 0.0), 2.0).unwrap();
    let v = sample_potential(&spec, &grid, SamplingMode::BandLimited).unwrap().field;
    let cfg = ScatterConfig::new(&grid, k, &MINUS_X, &X, 1.0).unwrap();
    (cfg, v)
}

fn small_setup(grid: &Grid, k: f64, coupling: Complex64) -> (ScatterConfig, SampledField) {
    let dim = grid.dim();
    let spec = PotentialSpec::along_x(dim, 1.0, 1.0, 2, coupling, 2.0).unwrap();
    let v = sample_potential(&spec, grid, SamplingMode::Pointwise).unwrap().field;
    let inc = if dim == 2 { [-1.0, 0.3, 0.0] } else { [-1.0, 0.3, 0.2] };
    let cfg = ScatterConfig::new(grid, k, &inc, &X, 1.0).unwrap();
    (cfg, v)
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_abs(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn first_numerator_is_shifted_spectrum() {
    let grid = Grid::new(&[30.0, 30.0], &[64, 64]).unwrap();
    let (cfg, v) = small_setup(&grid, 0.9, Complex64::new(0.4, -0.2));
    let s = born_series(&cfg.clone().with_n_max(1), &v).unwrap();
    let m1 = s.terms[1].m.as_ref().unwrap();
    let kv = cfg.k_vec;
    let idx: Vec<usize> = (0..grid.len()).step_by(13).collect();
    let pts: Vec<_> = idx
        .iter()
        .map(|&i| {
            let p = grid.node_momentum(i);
            [p[0] - kv[0], p[1] - kv[1], 0.0]
        })
        .collect();
    let want = nudft(&v, &pts).unwrap();
    let got: Vec<_> = idx.iter().map(|&i| m1.values()[i]).collect();
    assert!(max_diff(&got, &want) <= 1e-10 * max_abs(&want));
    // the on-shell record is the same sum taken at k′
    let dirs = cfg.directions().unwrap();
    let shell: Vec<_> = dirs.momenta().iter().map(|p| [p[0] - kv[0], p[1] - kv[1], 0.0]).collect();
    let want = nudft(&v, &shell).unwrap();
    assert!(max_diff(&s.on_shell[0].values, &want) <= 1e-10 * max_abs(&want));
}

fn gauge_check(grid: &Grid, k: f64) {
    let (cfg, v) = small_setup(grid, k, Complex64::new(0.3, 0.2));
    let s = born_series(&cfg.clone().with_n_max(2), &v).unwrap();
    let fast = forward_ft(&s.terms[2].b).unwrap();
    let scale = max_abs(fast.values());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..6 {
        let i = rng.gen_range(0..grid.len());
        let p = grid.node_momentum(i);
        let slow = quad_second_order(&v, &cfg.k_vec, &p, cfg.epsilon).unwrap();
        assert!(
            (slow.value - fast.values()[i]).norm() <= 1e-8 * scale,
            "node {i}: {} vs {}",
            slow.value,
            fast.values()[i]
        );
    }
}

#[test]
fn second_order_matches_double_sum_2d() {
    gauge_check(&Grid::new(&[12.0, 12.0], &[8, 8]).unwrap(), 1.1);
}

#[test]
fn second_order_matches_double_sum_3d() {
    gauge_check(&Grid::new(&[12.0, 12.0, 12.0], &[8, 8, 8]).unwrap(), 1.1);
}

#[test]
fn vanishing_orders_survive_halved_epsilon() {
    let (cfg, v) = theorem_setup(0.8);
    let eps = cfg.epsilon;
    let full = verify_shell(&cfg, &v, 1e-3).unwrap();
    let half = verify_shell(&cfg.with_epsilon(0.5 * eps).unwrap(), &v, 1e-3).unwrap();
    assert!(full.pass && half.pass, "{full:?}\n{half:?}");
    assert_eq!(full.n_exact, 1);
    assert!(full.orders[0].ratio >= 1e-1 && half.orders[0].ratio >= 1e-1);
}

#[test]
fn bands_hold_at_k_0_8() {
    let (cfg, v) = theorem_setup(0.8);
    let s = born_series(&cfg.with_n_max(3), &v).unwrap();
    for r in verify_lower_band(&s, 1e-3).iter().chain(&verify_gap_band(&s, 1e-3)) {
        assert!(r.pass && !r.vacuous, "{r:?}");
    }
}

#[test]
fn two_sided_potential_breaks_everything() {
    let (cfg, _) = theorem_setup(0.8);
    let g = cfg.grid.clone();
    let v = SampledField::from_fn(g, Space::Position, |x| {
        Complex64::new(0.5 * (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp(), 0.0)
    })
    .unwrap();
    let s = born_series(&cfg.with_n_max(3), &v).unwrap();
    let l2 = verify_lower_band(&s, 1e-3);
    let l4 = verify_gap_band(&s, 1e-3);
    assert!(l2.iter().chain(&l4).all(|r| r.max_ratio >= 1e-1), "{l2:?}\n{l4:?}");
    let report = theorem_report(&s, 1e-3);
    assert!(!report.pass);
    assert!(report.orders.iter().filter(|o| o.must_vanish).all(|o| o.ratio >= 1e-1));
}

#[test]
fn gaussian_profile_does_not_change_the_verdict() {
    let grid = Grid::new(&[60.0, 60.0], &[512, 512]).unwrap();
    let spec = PotentialSpec::along_x(2, 1.0, 2.0, 2, Complex64::new(1.0, 0.0), 2.0)
        .unwrap()
        .with_transverse(Transverse::Gaussian);
    let v = sample_potential(&spec, &grid, SamplingMode::BandLimited).unwrap().field;
    let cfg = ScatterConfig::new(&grid, 1.3, &MINUS_X, &X, 1.0).unwrap();
    let r = verify_shell(&cfg, &v, 1e-3).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn runaway_coupling_diverges() {
    let grid = Grid::new(&[30.0, 30.0], &[64, 64]).unwrap();
    let (cfg, v) = small_setup(&grid, 0.9, Complex64::new(1e8, 0.0));
    match born_series(&cfg.with_n_max(8), &v) {
        Err(Error::Divergence { order, growth }) => assert!(order >= 2 && growth > DIVERGENCE_GROWTH),
        other => panic!("expected divergence, got {:?}", other.map(|s| s.terms.len())),
    }
}

#[test]
fn under_sampled_n_max_warns() {
    let (cfg, v) = theorem_setup(0.8);
    let r = verify_shell(&cfg.with_n_max(1), &v, 1e-3).unwrap();
    assert!(r.warnings.iter().any(|w| w.contains("under-sampled")));
}

#[test]
fn product_support_zero_edges() {
    let grid = Grid::new(&[20.0, 20.0], &[64, 64]).unwrap();
    let r = verify_product_support(&grid, 0.0, 0.0, &X, 4, 1, 1e-10).unwrap();
    assert!(r.pass && !r.vacuous, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn orders_are_homogeneous(re in -1.5f64..1.5, im in -1.5f64..1.5, k in 0.5f64..1.6) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 0.1);
        let grid = Grid::new(&[24.0, 24.0], &[32, 32]).unwrap();
        let (cfg, v) = small_setup(&grid, k, Complex64::new(0.2, 0.0));
        let cfg = cfg.with_n_max(3);
        let base = born_series(&cfg, &v).unwrap();
        let scaled = born_series(&cfg, &v.scaled(c)).unwrap();
        for n in 1..=3 {
            let cn = c.powi(n as i32);
            let a = base.terms[n].m.as_ref().unwrap().values();
            let b = scaled.terms[n].m.as_ref().unwrap().values();
            let want: Vec<_> = a.iter().map(|z| z * cn).collect();
            prop_assert!(max_diff(b, &want) <= 1e-10 * max_abs(&want));
            let want: Vec<_> = base.on_shell[n - 1].values.iter().map(|z| z * cn).collect();
            prop_assert!(max_diff(&scaled.on_shell[n - 1].values, &want) <= 1e-10 * max_abs(&want).max(1e-300));
        }
    }

    #[test]
    fn products_keep_support(mu in -2.0f64..2.0, nu in -2.0f64..2.0, th in 0.0f64..6.3, seed in any::<u64>()) {
        let grid = Grid::new(&[20.0, 20.0], &[32, 32]).unwrap();
        let u = [th.cos(), th.sin(), 0.0];
        let r = verify_product_support(&grid, mu, nu, &u, 2, seed, 1e-10).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn exactness_order_is_floor(k in 0.01f64..10.0, alpha in 0.05f64..3.0) {
        let n = exactness_order(k, alpha);
        let r = 2.0 * k / alpha;
        prop_assert!(n as f64 <= r * (1.0 + 1e-12) && r < n as f64 + 1.0);
    }
}
