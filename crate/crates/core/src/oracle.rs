//! Slow references for the fast pipeline.
//!
//! Everything here is single-threaded and written as literal sums so that it
//! shares no code path with the FFT machinery beyond the grid geometry.

use crate::em_born::{MaterialTensors, Six};
use crate::gridfft::{eval_position, FourierPlan, Grid, SampledField, Space};
use crate::scalar_born::{green_g, BornEngine, ScatterConfig};
use crate::{dot, norm, Complex64, Error, Result, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Largest per-axis count the quadrature oracles accept.
pub const QUAD_MAX_COUNT: usize = 16;

/// Direct `Σ_x e^{−ip·x} f(x) Πh`, one exponential per node.
pub fn slow_dft(field: &SampledField, points: &[Vec3]) -> Result<Vec<Complex64>> {
    if field.space() != Space::Position {
        return Err(Error::InvalidField("slow_dft expects a position field".into()));
    }
    let grid = field.grid();
    let w = grid.cell_volume();
    let xs = grid.coordinates(Space::Position);
    Ok(points
        .iter()
        .map(|p| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, f) in xs.iter().zip(field.values()) {
                acc += Complex64::cis(-dot(p, x)) * f;
            }
            acc * w
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub p: Vec3,
    pub order: usize,
    #[serde(with = "crate::complex_reim")]
    pub value: Complex64,
    pub grid: Grid,
    /// Wall time; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub elapsed_s: f64,
    pub oracle: bool,
}

fn check_small(grid: &Grid) -> Result<()> {
    if grid.counts().iter().any(|&n| n > QUAD_MAX_COUNT) {
        return Err(Error::OracleTooLarge(format!(
            "grid {:?} exceeds {QUAD_MAX_COUNT} nodes per axis",
            grid.counts()
        )));
    }
    Ok(())
}

// Σ_x e^{-ip·x} f(x) Πh for a raw value slice.
fn dft_values(xs: &[Vec3], values: &[Complex64], w: f64, p: &Vec3) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, f) in xs.iter().zip(values) {
        acc += Complex64::cis(-dot(p, x)) * f;
    }
    acc * w
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `G(p)·M⁽²⁾(p)` from the double sum
/// `(2π)^{−d} ΠΔp Σ_q ṽ(p−q) G(q) ṽ(q−k)` with `ṽ` a direct transform.
pub fn quad_second_order(v: &SampledField, k_vec: &Vec3, p: &Vec3, eps: f64) -> Result<QuadratureResult> {
    let start = Instant::now();
    let grid = v.grid();
    check_small(grid)?;
    let k = norm(k_vec);
    let xs = grid.coordinates(Space::Position);
    let qs = grid.coordinates(Space::Momentum);
    let w = grid.cell_volume();
    let mut sum = Complex64::new(0.0, 0.0);
    for q in &qs {
        let outer = dft_values(&xs, v.values(), w, &sub(p, q));
        let inner = dft_values(&xs, v.values(), w, &sub(q, k_vec));
        sum += outer * green_g(dot(q, q), k, eps) * inner;
    }
    let weight = grid.momentum_cell_volume() / (2.0 * PI).powi(grid.dim() as i32);
    let value = green_g(dot(p, p), k, eps) * sum * weight;
    Ok(QuadratureResult {
        p: *p,
        order: 2,
        value,
        grid: grid.clone(),
        elapsed_s: start.elapsed().as_secs_f64(),
        oracle: true,
    })
}

/// The `6×6` kernel matrix written out entry by entry.
pub fn kernel_matrix(p: &Vec3, k: f64) -> [[Complex64; 6]; 6] {
    let mut m = [[Complex64::new(0.0, 0.0); 6]; 6];
    // [p×] with (p×w)_i = Σ_j c_ij w_j
    let c = [
        [0.0, -p[2], p[1]],
        [p[2], 0.0, -p[0]],
        [-p[1], p[0], 0.0],
    ];
    for i in 0..3 {
        for j in 0..3 {
            let pp = p[i] * p[j] - if i == j { k * k } else { 0.0 };
            m[i][j] = Complex64::new(pp, 0.0);
            m[i + 3][j + 3] = Complex64::new(pp, 0.0);
            m[i][j + 3] = Complex64::new(k * c[i][j], 0.0);
            m[i + 3][j] = Complex64::new(-k * c[i][j], 0.0);
        }
    }
    m
}

fn mat_vec(m: &[[Complex64; 6]; 6], v: &Six) -> Six {
    std::array::from_fn(|i| (0..6).map(|j| m[i][j] * v[j]).sum())
}

// η̃(p) as a 6×6 block-diagonal matrix from direct transforms.
fn eta_tilde(mat: &MaterialTensors, xs: &[Vec3], w: f64, p: &Vec3) -> [[Complex64; 6]; 6] {
    let mut m = [[Complex64::new(0.0, 0.0); 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            if let Some(e) = mat.eps.entry(i, j) {
                m[i][j] = dft_values(xs, e, w, p);
            }
            if let Some(e) = mat.mu.entry(i, j) {
                m[i + 3][j + 3] = dft_values(xs, e, w, p);
            }
        }
    }
    m
}

/// Electromagnetic analog of [`quad_second_order`]:
/// `G(p) K(p) (2π)^{−3} ΠΔp Σ_q η̃(p−q) G(q) K(q) η̃(q−k) Ψ₀`.
pub fn quad_second_order_em(mat: &MaterialTensors, psi0: &Six, k_vec: &Vec3, p: &Vec3, eps: f64) -> Result<Six> {
    let grid = mat.grid();
    check_small(grid)?;
    let k = norm(k_vec);
    let xs = grid.coordinates(Space::Position);
    let qs = grid.coordinates(Space::Momentum);
    let w = grid.cell_volume();
    let mut sum = [Complex64::new(0.0, 0.0); 6];
    for q in &qs {
        let first = mat_vec(&eta_tilde(mat, &xs, w, &sub(q, k_vec)), psi0);
        let prop = mat_vec(&kernel_matrix(q, k), &first).map(|z| z * green_g(dot(q, q), k, eps));
        let second = mat_vec(&eta_tilde(mat, &xs, w, &sub(p, q)), &prop);
        for c in 0..6 {
            sum[c] += second[c];
        }
    }
    let weight = grid.momentum_cell_volume() / (2.0 * PI).powi(3);
    let g = green_g(dot(p, p), k, eps) * weight;
    Ok(mat_vec(&kernel_matrix(p, k), &sum).map(|z| z * g))
}

#[derive(Clone, Debug)]
pub struct ConvergedSolution {
    /// `Σ B⁽ⁿ⁾` in position space, incident wave included.
    pub psi: SampledField,
    /// Highest order summed.
    pub orders: usize,
    /// `max|B⁽ⁿ⁾| / max|ψ|` for `n = 1..=orders`.
    pub increments: Vec<f64>,
    /// On-shell numerators of orders `1..=orders` on the configured shell.
    pub on_shell_sum: Vec<Complex64>,
}

/// Partial sums of the series until the relative max-norm increment drops
/// below `series_tol`.
pub fn converged_solution(config: &ScatterConfig, v: &SampledField, series_tol: f64, order_cap: usize) -> Result<ConvergedSolution> {
    let engine = BornEngine::new(config, v)?;
    let mut term = engine.incident();
    let mut psi = term.b.values().to_vec();
    let mut increments = Vec::new();
    let mut on_shell_sum = vec![Complex64::new(0.0, 0.0); engine.directions().len()];
    let mut b1_max = None;
    if v.max_abs() == 0.0 {
        let psi = SampledField::new(config.grid.clone(), Space::Position, psi)?;
        return Ok(ConvergedSolution {
            psi,
            orders: 0,
            increments,
            on_shell_sum,
        });
    }
    for order in 1..=order_cap {
        let rec = engine.on_shell(&term)?;
        for (s, z) in on_shell_sum.iter_mut().zip(&rec.values) {
            *s += z;
        }
        term = match engine.step(&term, b1_max) {
            Ok(t) => t,
            Err(Error::Divergence { .. }) => {
                return Err(Error::NonConvergence {
                    orders: order,
                    increment: f64::INFINITY,
                })
            }
            Err(e) => return Err(e),
        };
        let b_max = term.b.max_abs();
        if order == 1 {
            b1_max = Some(b_max);
        }
        for (s, z) in psi.iter_mut().zip(term.b.values()) {
            *s += z;
        }
        let scale = crate::max_abs(&psi);
        let inc = b_max / scale;
        increments.push(inc);
        if inc < series_tol {
            let psi = SampledField::new(config.grid.clone(), Space::Position, psi)?;
            return Ok(ConvergedSolution {
                psi,
                orders: order,
                increments,
                on_shell_sum,
            });
        }
    }
    Err(Error::NonConvergence {
        orders: order_cap,
        increment: *increments.last().unwrap_or(&f64::INFINITY),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub radius: f64,
    pub directions: Vec<Vec3>,
    #[serde(with = "crate::scalar_born::complex_vec")]
    pub f: Vec<Complex64>,
    /// Estimates at `radius` and `0.9·radius`.
    #[serde(with = "crate::scalar_born::complex_vec")]
    pub f_outer: Vec<Complex64>,
    #[serde(with = "crate::scalar_born::complex_vec")]
    pub f_inner: Vec<Complex64>,
    pub warnings: Vec<String>,
    pub oracle: bool,
}

/// Far-field amplitude from `ψ ≈ e^{ik·x} + f e^{iκr}/r^{(d−1)/2}`.
///
/// `κ = √(k² + iε)` is the outgoing wavenumber of the regularized Green's
/// function (it reduces to `k` for `ε = 0`). The residual is evaluated off
/// grid by trigonometric interpolation of its spectrum.
pub fn asymptotic_fit(psi: &SampledField, k_vec: &Vec3, epsilon: f64, fit_radius: f64, directions: &[Vec3]) -> Result<AsymptoticFit> {
    if psi.space() != Space::Position {
        return Err(Error::InvalidField("asymptotic_fit expects a position field".into()));
    }
    let grid = psi.grid();
    let d = grid.dim();
    let half_box = grid.extents().iter().fold(f64::INFINITY, |a, &l| a.min(0.5 * l));
    if !(fit_radius > 0.0 && fit_radius < half_box) {
        return Err(Error::InvalidConfig(format!(
            "fit radius {fit_radius} must lie inside the box (half width {half_box})"
        )));
    }
    if directions.is_empty() {
        return Err(Error::InvalidConfig("no fit directions".into()));
    }
    let k = norm(k_vec);
    let kappa = Complex64::new(k * k, epsilon).sqrt();
    let scattered: Vec<Complex64> = grid
        .coordinates(Space::Position)
        .iter()
        .zip(psi.values())
        .map(|(x, z)| z - Complex64::cis(dot(k_vec, x)))
        .collect();
    let mut spectrum = scattered;
    FourierPlan::new(grid).forward_in_place(&mut spectrum);
    let spectrum = SampledField::from_parts_unchecked(grid.clone(), Space::Momentum, spectrum);
    let estimate = |r: f64| -> Result<Vec<Complex64>> {
        let pts: Vec<Vec3> = directions.iter().map(|u| [r * u[0], r * u[1], r * u[2]]).collect();
        let vals = eval_position(&spectrum, &pts)?;
        let decay = r.powf(0.5 * (d as f64 - 1.0));
        Ok(vals
            .into_iter()
            .map(|z| z * decay / (Complex64::i() * kappa * r).exp())
            .collect())
    };
    let f_outer = estimate(fit_radius)?;
    let f_inner = estimate(0.9 * fit_radius)?;
    let f: Vec<Complex64> = f_outer.iter().zip(&f_inner).map(|(a, b)| 0.5 * (a + b)).collect();
    let scale = crate::max_abs(&f);
    let mut warnings = Vec::new();
    if scale > 0.0 {
        let spread = f_outer
            .iter()
            .zip(&f_inner)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / scale;
        if spread > 0.1 {
            warnings.push(format!(
                "estimates at r = {fit_radius} and {} differ by {:.1}%; far field not reached",
                0.9 * fit_radius,
                100.0 * spread
            ));
        }
    }
    Ok(AsymptoticFit {
        radius: fit_radius,
        directions: directions.to_vec(),
        f,
        f_outer,
        f_inner,
        warnings,
        oracle: true,
    })
}
