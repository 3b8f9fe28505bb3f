//! Scalar Born series in the plane-wave gauge.
//!
//! With `B⁽⁰⁾ = e^{ik·x}` the iteration is
//!
//! ```text
//! M⁽ⁿ⁺¹⁾ = FT(v · B⁽ⁿ⁾),   B⁽ⁿ⁺¹⁾ = FT⁻¹(G · M⁽ⁿ⁺¹⁾),   G(p) = 1/(k² − p² + iε)
//! ```
//!
//! `M⁽ⁿ⁾` is the numerator before the Green's function. Its values on the
//! shell `|p| = k` are evaluated by direct summation, never interpolated.

use crate::gridfft::{
    apply_mask, dealias_mask, nudft, sphere_directions, DirectionSet, FourierPlan, Grid,
    SampledField, Space,
};
use crate::{dot, max_abs, norm, Complex64, Error, Result, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Growth of `max|B⁽ⁿ⁾|` over `max|B⁽¹⁾|` treated as divergence.
pub const DIVERGENCE_GROWTH: f64 = 1e12;

pub fn green_g(p_sq: f64, k: f64, eps: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) / Complex64::new(k * k - p_sq, eps)
}

/// `N = ⌊2k/α⌋`, with values within rounding of an integer taken as that
/// integer.
pub fn exactness_order(k: f64, alpha: f64) -> usize {
    let r = 2.0 * k / alpha;
    let n = r.round();
    if (r - n).abs() <= 1e-12 * r.max(1.0) {
        n as usize
    } else {
        r.floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterConfig {
    pub grid: Grid,
    /// Wavenumber as requested, before snapping.
    pub k_requested: f64,
    /// Incident wave vector snapped to the nearest momentum node.
    pub k_vec: Vec3,
    pub epsilon: f64,
    pub u: Vec3,
    pub alpha: f64,
    pub n_max: usize,
    pub direction_count: usize,
    /// Restrict every numerator to the 2/3 band and project `v` onto it.
    pub dealias: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ScatterConfig {
    /// Defaults: `ε = 2kΔp_max`, `N_max = N + 2`, 64 directions, no
    /// dealiasing.
    pub fn new(grid: &Grid, k: f64, incident: &Vec3, u: &Vec3, alpha: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidConfig(format!("k must be positive, got {k}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        check_direction(grid, incident, "incident direction")?;
        check_direction(grid, u, "u")?;
        let nyq = (0..grid.dim()).map(|a| grid.nyquist(a)).fold(f64::INFINITY, f64::min);
        if k >= nyq {
            return Err(Error::InvalidConfig(format!(
                "k = {k} is not below the grid Nyquist momentum {nyq}"
            )));
        }
        let len = norm(incident);
        let target = [k * incident[0] / len, k * incident[1] / len, k * incident[2] / len];
        let k_vec = grid.snap_momentum(&target);
        let k_snap = norm(&k_vec);
        if k_snap == 0.0 {
            return Err(Error::InvalidConfig(format!(
                "k = {k} snaps to the zero momentum node; refine the momentum grid"
            )));
        }
        let mut warnings = Vec::new();
        let n_req = exactness_order(k, alpha);
        let n_snap = exactness_order(k_snap, alpha);
        if n_req != n_snap {
            warnings.push(format!(
                "snapping k from {k} to {k_snap} changes N from {n_req} to {n_snap}"
            ));
        }
        Ok(ScatterConfig {
            grid: grid.clone(),
            k_requested: k,
            k_vec,
            epsilon: 2.0 * k_snap * grid.max_momentum_spacing(),
            u: *u,
            alpha,
            n_max: n_snap + 2,
            direction_count: 64,
            dealias: false,
            warnings,
        })
    }

    pub fn with_epsilon(mut self, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {eps}")));
        }
        self.epsilon = eps;
        Ok(self)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_direction_count(mut self, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidConfig("direction count must be at least 1".into()));
        }
        self.direction_count = count;
        Ok(self)
    }

    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    /// Snapped wavenumber `|k|`.
    pub fn k(&self) -> f64 {
        norm(&self.k_vec)
    }

    pub fn incident_unit(&self) -> Vec3 {
        let k = self.k();
        [self.k_vec[0] / k, self.k_vec[1] / k, self.k_vec[2] / k]
    }

    pub fn exactness_order(&self) -> usize {
        exactness_order(self.k(), self.alpha)
    }

    pub fn directions(&self) -> Result<DirectionSet> {
        sphere_directions(self.grid.dim(), self.k(), self.direction_count, &self.incident_unit())
    }
}

fn check_direction(grid: &Grid, d: &Vec3, what: &str) -> Result<()> {
    let len = norm(d);
    if !(len.is_finite() && len > 0.0) {
        return Err(Error::InvalidConfig(format!("{what} must be nonzero")));
    }
    if grid.dim() == 2 && d[2] != 0.0 {
        return Err(Error::InvalidConfig(format!("{what} has a z component on a 2D grid")));
    }
    if what == "u" && (len - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig("u must be a unit vector".into()));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BornTerm {
    pub order: usize,
    /// `B⁽ⁿ⁾` in position space.
    pub b: SampledField,
    /// `M⁽ⁿ⁾` in momentum space; absent for the incident term.
    pub m: Option<SampledField>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnShellRecord {
    pub order: usize,
    pub k: f64,
    pub directions: Vec<Vec3>,
    #[serde(with = "complex_vec")]
    pub values: Vec<Complex64>,
}

impl OnShellRecord {
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }
}

pub(crate) mod complex_vec {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

/// Far-field constant `c_d` with `f⁽ⁿ⁾ = c_d M⁽ⁿ⁾(k′)`.
pub fn amplitude_constant(dim: usize, k: f64) -> Complex64 {
    match dim {
        2 => -Complex64::cis(PI / 4.0) / (8.0 * PI * k).sqrt(),
        _ => Complex64::new(-1.0 / (4.0 * PI), 0.0),
    }
}

pub fn amplitude_contribution(record: &OnShellRecord, dim: usize) -> Vec<Complex64> {
    let c = amplitude_constant(dim, record.k);
    record.values.iter().map(|m| c * m).collect()
}

/// Iterates the series for one sampled interaction on one configuration.
pub struct BornEngine {
    config: ScatterConfig,
    plan: FourierPlan,
    v: SampledField,
    green: Vec<Complex64>,
    mask: Option<Vec<bool>>,
    directions: DirectionSet,
}

impl BornEngine {
    pub fn new(config: &ScatterConfig, v: &SampledField) -> Result<Self> {
        v.expect_space(Space::Position)?;
        if v.grid() != &config.grid {
            return Err(Error::InvalidField("potential grid differs from the scattering grid".into()));
        }
        let grid = &config.grid;
        let plan = FourierPlan::new(grid);
        let k = config.k();
        let green = grid
            .coordinates(Space::Momentum)
            .iter()
            .map(|p| green_g(dot(p, p), k, config.epsilon))
            .collect();
        let mask = config.dealias.then(|| dealias_mask(grid));
        let v = match &mask {
            Some(mask) => {
                let mut spec = v.values().to_vec();
                plan.forward_in_place(&mut spec);
                apply_mask(&mut spec, mask);
                plan.inverse_in_place(&mut spec);
                SampledField::from_parts_unchecked(grid.clone(), Space::Position, spec)
            }
            None => v.clone(),
        };
        let directions = config.directions()?;
        Ok(BornEngine {
            config: config.clone(),
            plan,
            v,
            green,
            mask,
            directions,
        })
    }

    pub fn config(&self) -> &ScatterConfig {
        &self.config
    }

    /// The interaction actually used (projected when dealiasing).
    pub fn potential(&self) -> &SampledField {
        &self.v
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn incident(&self) -> BornTerm {
        let kv = self.config.k_vec;
        let values = self
            .config
            .grid
            .coordinates(Space::Position)
            .iter()
            .map(|x| Complex64::cis(dot(&kv, x)))
            .collect();
        BornTerm {
            order: 0,
            b: SampledField::from_parts_unchecked(self.config.grid.clone(), Space::Position, values),
            m: None,
        }
    }

    /// `v · B` for the given term.
    pub fn source(&self, prev: &BornTerm) -> Result<SampledField> {
        self.v.mul(&prev.b)
    }

    /// One iteration. `b1_max` is `max|B⁽¹⁾|` once known, for the growth
    /// guard.
    pub fn step(&self, prev: &BornTerm, b1_max: Option<f64>) -> Result<BornTerm> {
        let order = prev.order + 1;
        let mut m = self.source(prev)?.into_values();
        self.plan.forward_in_place(&mut m);
        if let Some(mask) = &self.mask {
            apply_mask(&mut m, mask);
        }
        let mut b: Vec<Complex64> = m.iter().zip(&self.green).map(|(a, g)| a * g).collect();
        self.plan.inverse_in_place(&mut b);
        let b_max = max_abs(&b);
        if !b_max.is_finite() || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Divergence {
                order,
                growth: f64::INFINITY,
            });
        }
        if let Some(ref_max) = b1_max {
            if ref_max > 0.0 && b_max > DIVERGENCE_GROWTH * ref_max {
                return Err(Error::Divergence {
                    order,
                    growth: b_max / ref_max,
                });
            }
        }
        let grid = self.config.grid.clone();
        Ok(BornTerm {
            order,
            b: SampledField::from_parts_unchecked(grid.clone(), Space::Position, b),
            m: Some(SampledField::from_parts_unchecked(grid, Space::Momentum, m)),
        })
    }

    /// `M⁽ⁿ⁾(k′) = Σ_x e^{−ik′·x} v B⁽ⁿ⁻¹⁾ Πh` on the configured shell.
    pub fn on_shell(&self, prev: &BornTerm) -> Result<OnShellRecord> {
        self.on_shell_at(prev, &self.directions)
    }

    pub fn on_shell_at(&self, prev: &BornTerm, dirs: &DirectionSet) -> Result<OnShellRecord> {
        let src = self.source(prev)?;
        let values = nudft(&src, &dirs.momenta())?;
        Ok(OnShellRecord {
            order: prev.order + 1,
            k: dirs.k,
            directions: dirs.units.clone(),
            values,
        })
    }

    /// Orders `0..=N_max` with the on-shell record of every order `n ≥ 1`.
    pub fn series(&self) -> Result<BornSeries> {
        let mut terms = vec![self.incident()];
        let mut on_shell = Vec::new();
        let mut b1_max = None;
        for _ in 0..self.config.n_max {
            let prev = terms.last().unwrap();
            on_shell.push(self.on_shell(prev)?);
            let next = self.step(prev, b1_max)?;
            if next.order == 1 {
                b1_max = Some(next.b.max_abs());
            }
            terms.push(next);
        }
        Ok(BornSeries {
            config: self.config.clone(),
            terms,
            on_shell,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BornSeries {
    pub config: ScatterConfig,
    /// Orders `0..=N_max`.
    pub terms: Vec<BornTerm>,
    /// Orders `1..=N_max`.
    pub on_shell: Vec<OnShellRecord>,
}

pub fn born_series(config: &ScatterConfig, v: &SampledField) -> Result<BornSeries> {
    BornEngine::new(config, v)?.series()
}

/// Vanishing check of one order over a momentum band or the shell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub order: usize,
    /// `[lo, hi]` in `u·p`; `None` for a band that is empty by its bounds.
    pub band: Option<[f64; 2]>,
    pub nodes: usize,
    pub max_ratio: f64,
    pub tol: f64,
    pub pass: bool,
    pub vacuous: bool,
}

fn band_check(
    grid: &Grid,
    mags: &[f64],
    u: &Vec3,
    band: Option<[f64; 2]>,
    in_band: impl Fn(f64) -> bool,
    order: usize,
    tol: f64,
) -> BandReport {
    let global = mags.iter().copied().fold(0.0, f64::max);
    let mut inside = 0usize;
    let mut band_max: f64 = 0.0;
    if band.is_some() {
        for (flat, &a) in mags.iter().enumerate() {
            if in_band(dot(u, &grid.node_momentum(flat))) {
                inside += 1;
                band_max = band_max.max(a);
            }
        }
    }
    let vacuous = inside == 0 || global == 0.0;
    let max_ratio = if vacuous { 0.0 } else { band_max / global };
    BandReport {
        order,
        band,
        nodes: inside,
        max_ratio,
        tol,
        pass: vacuous || max_ratio <= tol,
        vacuous,
    }
}

/// Vanishing of a numerator (given by its node magnitudes) below `u·p = −k`.
pub fn lower_band(grid: &Grid, mags: &[f64], u: &Vec3, k: f64, order: usize, tol: f64) -> BandReport {
    band_check(grid, mags, u, Some([f64::NEG_INFINITY, -k]), |s| s < -k, order, tol)
}

/// Vanishing of order `order` on `−k ≤ u·p ≤ k − (N−order+1)α`.
#[allow(clippy::too_many_arguments)]
pub fn gap_band(grid: &Grid, mags: &[f64], u: &Vec3, k: f64, alpha: f64, n_exact: usize, order: usize, tol: f64) -> BandReport {
    let hi = k - (n_exact as f64 - order as f64 + 1.0) * alpha;
    let band = (hi >= -k).then_some([-k, hi]);
    // small slack so nodes sitting on the band edges count as inside
    let slack = 1e-9 * k;
    band_check(grid, mags, u, band, |s| s >= -k - slack && s <= hi + slack, order, tol)
}

fn numerators(series: &BornSeries) -> impl Iterator<Item = (usize, &SampledField)> {
    series.terms.iter().filter_map(|t| t.m.as_ref().map(|m| (t.order, m)))
}

fn magnitudes(m: &SampledField) -> Vec<f64> {
    m.values().iter().map(|z| z.norm()).collect()
}

/// Numerators vanish below `u·p = −k` for a support-certified `v`.
pub fn verify_lower_band(series: &BornSeries, tol: f64) -> Vec<BandReport> {
    let c = &series.config;
    numerators(series)
        .map(|(order, m)| lower_band(&c.grid, &magnitudes(m), &c.u, c.k(), order, tol))
        .collect()
}

/// Order `m` vanishes on `−k ≤ u·p ≤ k − (N−m+1)α`.
pub fn verify_gap_band(series: &BornSeries, tol: f64) -> Vec<BandReport> {
    let c = &series.config;
    let n = c.exactness_order();
    numerators(series)
        .map(|(order, m)| gap_band(&c.grid, &magnitudes(m), &c.u, c.k(), c.alpha, n, order, tol))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub order: usize,
    /// `true` for orders above `N`, which must vanish on the shell.
    pub must_vanish: bool,
    pub on_shell_max: f64,
    pub grid_max: f64,
    pub ratio: f64,
    /// `None` for orders `≤ N`, where no bound is asserted.
    pub pass: Option<bool>,
    /// Indices of directions whose ratio exceeds the tolerance.
    pub offending: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub k_requested: f64,
    pub k: f64,
    pub alpha: f64,
    pub n_exact: usize,
    pub epsilon: f64,
    pub tol: f64,
    pub orders: Vec<OrderVerdict>,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Ratio of the shell maximum to the grid maximum of the same order.
/// `shell` holds the on-shell magnitudes per direction.
pub fn shell_verdict(order: usize, n_exact: usize, shell: &[f64], grid_max: f64, tol: f64) -> OrderVerdict {
    let on_shell_max = shell.iter().copied().fold(0.0, f64::max);
    let ratio = if grid_max > 0.0 { on_shell_max / grid_max } else { 0.0 };
    let must_vanish = order > n_exact;
    let offending = if must_vanish && grid_max > 0.0 {
        shell
            .iter()
            .enumerate()
            .filter(|(_, &a)| a / grid_max > tol)
            .map(|(i, _)| i)
            .collect()
    } else {
        Vec::new()
    };
    OrderVerdict {
        order,
        must_vanish,
        on_shell_max,
        grid_max,
        ratio,
        pass: must_vanish.then_some(ratio <= tol),
        offending,
    }
}

pub fn theorem_report(series: &BornSeries, tol: f64) -> TheoremReport {
    let c = &series.config;
    let n_exact = c.exactness_order();
    let orders: Vec<OrderVerdict> = series
        .on_shell
        .iter()
        .map(|rec| {
            let grid_max = series.terms[rec.order].m.as_ref().map_or(0.0, |m| m.max_abs());
            let shell: Vec<f64> = rec.values.iter().map(|z| z.norm()).collect();
            shell_verdict(rec.order, n_exact, &shell, grid_max, tol)
        })
        .collect();
    assemble_report(c, orders, tol)
}

pub(crate) fn assemble_report(c: &ScatterConfig, orders: Vec<OrderVerdict>, tol: f64) -> TheoremReport {
    let n_exact = c.exactness_order();
    let pass = orders.iter().all(|o| o.pass != Some(false));
    let mut warnings = c.warnings.clone();
    if c.n_max < n_exact + 2 {
        warnings.push(format!(
            "N_max = {} is below N + 2 = {}; vanishing orders are under-sampled",
            c.n_max,
            n_exact + 2
        ));
    }
    TheoremReport {
        k_requested: c.k_requested,
        k: c.k(),
        alpha: c.alpha,
        n_exact,
        epsilon: c.epsilon,
        tol,
        orders,
        pass,
        warnings,
    }
}

pub fn verify_shell(config: &ScatterConfig, v: &SampledField, tol: f64) -> Result<TheoremReport> {
    Ok(theorem_report(&born_series(config, v)?, tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSupportReport {
    pub mu: f64,
    pub nu: f64,
    pub trials: usize,
    pub max_ratio: f64,
    pub tol: f64,
    pub pass: bool,
    pub vacuous: bool,
}

/// Random spectra supported in `u·p ≥ μ` and `u·p ≥ ν` multiply (in
/// position space) to a spectrum supported in `u·p ≥ μ + ν`.
///
/// The random spectra are also confined to `|p_i| < π/(2h_i)` so that their
/// product does not wrap around the periodic momentum grid.
pub fn verify_product_support(grid: &Grid, mu: f64, nu: f64, u: &Vec3, trials: usize, seed: u64, tol: f64) -> Result<ProductSupportReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("product support check needs at least one trial".into()));
    }
    check_direction(grid, u, "u")?;
    let plan = FourierPlan::new(grid);
    let momenta = grid.coordinates(Space::Momentum);
    let half_band = |p: &Vec3| (0..grid.dim()).all(|a| p[a].abs() < 0.5 * grid.nyquist(a));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_spectrum = |lower: f64| -> Vec<Complex64> {
        momenta
            .iter()
            .map(|p| {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if dot(u, p) >= lower && half_band(p) {
                    z
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    };
    let mut worst: f64 = 0.0;
    let mut any_signal = false;
    let mut any_region = false;
    for _ in 0..trials {
        let mut f = random_spectrum(mu);
        let mut g = random_spectrum(nu);
        plan.inverse_in_place(&mut f);
        plan.inverse_in_place(&mut g);
        let mut prod: Vec<Complex64> = f.iter().zip(&g).map(|(a, b)| a * b).collect();
        plan.forward_in_place(&mut prod);
        let global = max_abs(&prod);
        let mut forbidden: f64 = 0.0;
        for (p, z) in momenta.iter().zip(&prod) {
            if dot(u, p) < mu + nu {
                any_region = true;
                forbidden = forbidden.max(z.norm());
            }
        }
        if global > 0.0 {
            any_signal = true;
            worst = worst.max(forbidden / global);
        }
    }
    let vacuous = !any_signal || !any_region;
    Ok(ProductSupportReport {
        mu,
        nu,
        trials,
        max_ratio: worst,
        tol,
        pass: vacuous || worst <= tol,
        vacuous,
    })
}
