use born_core::gridfft::{forward_ft, nudft, Grid, SampledField, Space};
use born_core::oracle::*;
use born_core::potentials::{sample_potential, PotentialSpec, SamplingMode};
use born_core::scalar_born::{amplitude_constant, ScatterConfig};
use born_core::{Complex64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const X: [f64; 3] = [1.0, 0.0, 0.0];
const MINUS_X: [f64; 3] = [-1.0, 0.0, 0.0];

fn max_abs(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn setup(l: f64, n: usize, k: f64, coupling: f64) -> (ScatterConfig, SampledField) {
    let grid = Grid::new(&[l, l], &[n, n]).unwrap();
    let spec = PotentialSpec::along_x(2, 1.0, 2.0, 2, Complex64::new(coupling, 0.0), 2.0).unwrap();
    let v = sample_potential(&spec, &grid, SamplingMode::BandLimited).unwrap().field;
    (ScatterConfig::new(&grid, k, &MINUS_X, &X, 1.0).unwrap(), v)
}

#[test]
fn slow_dft_matches_fast_transforms() {
    let g = Grid::new(&[7.0, 9.0, 5.0], &[8, 12, 10]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vals = (0..g.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let f = SampledField::new(g.clone(), Space::Position, vals).unwrap();
    let ft = forward_ft(&f).unwrap();
    let nodes: Vec<usize> = (0..g.len()).step_by(17).collect();
    let pts: Vec<_> = nodes.iter().map(|&i| g.node_momentum(i)).collect();
    let slow = slow_dft(&f, &pts).unwrap();
    let at_nodes: Vec<_> = nodes.iter().map(|&i| ft.values()[i]).collect();
    assert!(max_diff(&slow, &at_nodes) <= 1e-12 * max_abs(&at_nodes));
    let off: Vec<_> = (0..8)
        .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
        .collect();
    let a = slow_dft(&f, &off).unwrap();
    let b = nudft(&f, &off).unwrap();
    assert!(max_diff(&a, &b) <= 1e-12 * max_abs(&a));
}

#[test]
fn free_space_needs_no_orders() {
    let (cfg, v) = setup(30.0, 64, 0.8, 1.0);
    let zero = SampledField::zeros(v.grid().clone(), Space::Position);
    let sol = converged_solution(&cfg, &zero, 1e-10, 10).unwrap();
    assert_eq!(sol.orders, 0);
    assert!(sol.on_shell_sum.iter().all(|z| z.norm() == 0.0));
    let fit = asymptotic_fit(&sol.psi, &cfg.k_vec, cfg.epsilon, 10.0, &[X, MINUS_X]).unwrap();
    assert!(max_abs(&fit.f) < 1e-12, "{:?}", fit.f);
}

#[test]
fn weak_coupling_converges_and_strong_does_not() {
    let (cfg, v) = setup(30.0, 64, 0.8, 0.02);
    let sol = converged_solution(&cfg, &v, 1e-10, 30).unwrap();
    assert!(sol.orders <= 8, "{:?}", sol.increments);
    assert!(sol.increments.windows(2).all(|w| w[1] < w[0]));
    let err = converged_solution(&cfg, &v.scaled(Complex64::new(1e4, 0.0)), 1e-10, 30).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { .. }), "{err:?}");
    let err = converged_solution(&cfg, &v, 1e-30, 3).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { orders: 3, .. }));
}

#[test]
fn far_field_fit_tracks_on_shell_sum() {
    // weak coupling at k = 0.8 so the first two orders carry the amplitude
    let (cfg, v) = setup(300.0, 768, 0.8, 0.05 * 0.64);
    let eps = 2.0 * cfg.k() * 0.04;
    let cfg = cfg.with_epsilon(eps).unwrap().with_direction_count(16).unwrap();
    let sol = converged_solution(&cfg, &v, 1e-10, 20).unwrap();
    let dirs = cfg.directions().unwrap();
    let fit = asymptotic_fit(&sol.psi, &cfg.k_vec, eps, 100.0, &dirs.units).unwrap();
    let c = amplitude_constant(2, cfg.k());
    let series: Vec<_> = sol.on_shell_sum.iter().map(|m| c * m).collect();
    let err = max_diff(&fit.f, &series) / max_abs(&series);
    assert!(err <= 0.1, "relative error {err:.3e}");
}

#[test]
fn below_half_alpha_fit_is_quiet() {
    let (cfg, v) = setup(300.0, 768, 0.45, 0.1);
    let cfg = cfg.with_direction_count(16).unwrap();
    let dirs = cfg.directions().unwrap();
    let gauss = SampledField::from_fn(cfg.grid.clone(), Space::Position, |x| {
        Complex64::new(0.1 * (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp(), 0.0)
    })
    .unwrap();
    let fit = |v: &SampledField| {
        let sol = converged_solution(&cfg, v, 1e-10, 20).unwrap();
        let f = asymptotic_fit(&sol.psi, &cfg.k_vec, cfg.epsilon, 100.0, &dirs.units).unwrap();
        max_abs(&f.f)
    };
    let quiet = fit(&v);
    let loud = fit(&gauss);
    assert!(quiet <= 1e-2 * loud, "one-sided {quiet:.3e} vs two-sided {loud:.3e}");
}

#[test]
fn quadrature_is_flagged_as_oracle() {
    let (cfg, v) = setup(12.0, 8, 1.0, 1.0);
    let r = quad_second_order(&v, &cfg.k_vec, &[0.5, 0.0, 0.0], cfg.epsilon).unwrap();
    assert!(r.oracle && r.order == 2);
    let json = serde_json::to_string(&r).unwrap();
    assert!(!json.contains("elapsed"));
}
