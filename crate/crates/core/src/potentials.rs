//! Interactions with half-space spectral support.
//!
//! The family is
//!
//! ```text
//! v(x) = e^{iα x∥} 𝔷 g(x⊥) / (1 − i x∥/a)^{m+1}
//! ṽ(p) = 2πa (aκ)^m e^{−aκ} θ(κ)/m! · 𝔷 · ĝ(p⊥) · e^{−ip·x₀},   κ = p∥ − α
//! ```
//!
//! with `x∥ = u·(x−x₀)`. The transverse profile `g` is either the hard slab
//! (`ĝ = ℓ sinc(qℓ/2)` per transverse axis) or a Gaussian of width `ℓ/2`.
//! In 2D only the first transverse axis exists.

use crate::gridfft::{forward_ft, orthonormal_complement, Grid, SampledField, Space};
use crate::special::sine_integral;
use crate::{dot, norm, Complex64, Error, Result, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Sampled values whose box-boundary magnitude exceeds this fraction of the
/// maximum trigger a truncation warning.
pub const BOUNDARY_WARN_RATIO: f64 = 1e-3;

pub fn step_theta(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        1.0
    }
}

pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        t.sin() / t
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transverse {
    /// Indicator of `|y| ≤ ℓ/2`.
    #[default]
    Slab,
    /// `exp(−y²/(2σ²))` with `σ = ℓ/2`. Smooth, so it survives the `p²`
    /// factors of the electromagnetic kernel.
    Gaussian,
}

/// How a potential is turned into grid samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// `v` evaluated at the nodes.
    Pointwise,
    /// The slab indicator is replaced by its band-limited projection onto
    /// the grid's momentum window, so the node samples carry exactly the
    /// in-band part of the closed-form transverse spectrum. Requires an
    /// axis-aligned `u`. Other profiles are sampled pointwise.
    #[default]
    BandLimited,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub alpha: f64,
    /// Support direction; its length (2 or 3) fixes the dimension.
    pub u: Vec<f64>,
    pub a: f64,
    pub m: u32,
    #[serde(with = "crate::complex_reim")]
    pub coupling: Complex64,
    pub ell_y: f64,
    /// Second slab width; defaults to `ell_y`, ignored in 2D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub center: Vec<f64>,
    #[serde(default)]
    pub transverse: Transverse,
}

impl PotentialSpec {
    /// Family member with `u = +x`, centered at the origin.
    pub fn along_x(dim: usize, alpha: f64, a: f64, m: u32, coupling: Complex64, ell: f64) -> Result<Self> {
        let mut u = vec![0.0; dim];
        if let Some(first) = u.first_mut() {
            *first = 1.0;
        }
        let spec = PotentialSpec {
            alpha,
            u,
            a,
            m,
            coupling,
            ell_y: ell,
            ell_z: None,
            center: Vec::new(),
            transverse: Transverse::Slab,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_transverse(mut self, t: Transverse) -> Self {
        self.transverse = t;
        self
    }

    pub fn with_center(mut self, center: &[f64]) -> Self {
        self.center = center.to_vec();
        self
    }

    pub fn with_coupling(mut self, coupling: Complex64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPotential(msg));
        let dim = self.u.len();
        if !(2..=3).contains(&dim) {
            return bad(format!("u must have 2 or 3 components, got {dim}"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return bad(format!("a must be positive, got {}", self.a));
        }
        // decay |x|^-(m+1) must beat |x|^-(d+1)/2
        if self.m < 1 {
            return bad("m must be at least 1 for sufficient decay".into());
        }
        if !(self.coupling.re.is_finite() && self.coupling.im.is_finite()) {
            return bad("coupling must be finite".into());
        }
        if !(self.ell_y.is_finite() && self.ell_y > 0.0) {
            return bad(format!("ell_y must be positive, got {}", self.ell_y));
        }
        if dim == 3 && !(self.ell_z().is_finite() && self.ell_z() > 0.0) {
            return bad(format!("ell_z must be positive, got {}", self.ell_z()));
        }
        let u_len = self.u.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (u_len - 1.0).abs() > 1e-12 {
            return bad(format!("u must be a unit vector, |u| = {u_len}"));
        }
        if !self.center.is_empty() && self.center.len() != dim {
            return bad(format!("center has {} components, expected {dim}", self.center.len()));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return bad("center must be finite".into());
        }
        Ok(())
    }

    pub fn ell_z(&self) -> f64 {
        self.ell_z.unwrap_or(self.ell_y)
    }

    pub fn u3(&self) -> Vec3 {
        to_vec3(&self.u)
    }

    pub fn center3(&self) -> Vec3 {
        to_vec3(&self.center)
    }

    /// Orthonormal transverse axes `(e⊥1, e⊥2)`; `e⊥2` is zero in 2D.
    pub fn transverse_axes(&self) -> (Vec3, Vec3) {
        let u = self.u3();
        if self.dim() == 2 {
            ([-u[1], u[0], 0.0], [0.0; 3])
        } else {
            orthonormal_complement(&u)
        }
    }

    fn radial_tilde(&self, kappa: f64) -> f64 {
        if kappa <= 0.0 {
            return 0.0;
        }
        let t = self.a * kappa;
        let log_mag = (self.m as f64) * t.ln() - t - ln_factorial(self.m);
        2.0 * PI * self.a * log_mag.exp()
    }

    fn profile(&self, y: f64, ell: f64) -> f64 {
        match self.transverse {
            Transverse::Slab => {
                if y.abs() <= 0.5 * ell {
                    1.0
                } else {
                    0.0
                }
            }
            Transverse::Gaussian => {
                let s = 0.5 * ell;
                (-y * y / (2.0 * s * s)).exp()
            }
        }
    }

    fn profile_tilde(&self, q: f64, ell: f64) -> f64 {
        match self.transverse {
            Transverse::Slab => ell * sinc(0.5 * q * ell),
            Transverse::Gaussian => {
                let s = 0.5 * ell;
                (2.0 * PI).sqrt() * s * (-0.5 * s * s * q * q).exp()
            }
        }
    }

    // Profile with the slab replaced by its projection onto |q| < π/h.
    fn profile_band_limited(&self, y: f64, ell: f64, h: f64) -> f64 {
        match self.transverse {
            Transverse::Slab => {
                let w = PI / h;
                (sine_integral(w * (y + 0.5 * ell)) - sine_integral(w * (y - 0.5 * ell))) / PI
            }
            Transverse::Gaussian => self.profile(y, ell),
        }
    }

    fn local(&self, x: &Vec3) -> (f64, f64, f64) {
        let c = self.center3();
        let r = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
        let (e1, e2) = self.transverse_axes();
        (dot(&self.u3(), &r), dot(&e1, &r), dot(&e2, &r))
    }

    fn parallel_factor(&self, xpar: f64) -> Complex64 {
        let denom = Complex64::new(1.0, -xpar / self.a).powu(self.m + 1);
        Complex64::cis(self.alpha * xpar) * self.coupling / denom
    }

    fn sample_band_limited(&self, x: &Vec3, grid: &Grid) -> Result<Complex64> {
        let (xpar, y1, y2) = self.local(x);
        let (e1, e2) = self.transverse_axes();
        let h1 = grid.spacing(aligned_axis(&e1)?);
        let mut g = self.profile_band_limited(y1, self.ell_y, h1);
        if self.dim() == 3 {
            let h2 = grid.spacing(aligned_axis(&e2)?);
            g *= self.profile_band_limited(y2, self.ell_z(), h2);
        }
        Ok(self.parallel_factor(xpar) * g)
    }
}

fn ln_factorial(m: u32) -> f64 {
    (2..=m).map(|j| (j as f64).ln()).sum()
}

fn to_vec3(v: &[f64]) -> Vec3 {
    let mut out = [0.0; 3];
    for (o, c) in out.iter_mut().zip(v) {
        *o = *c;
    }
    out
}

fn aligned_axis(e: &Vec3) -> Result<usize> {
    let axis = (0..3)
        .max_by(|&a, &b| e[a].abs().partial_cmp(&e[b].abs()).unwrap())
        .unwrap();
    if (e[axis].abs() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidPotential(
            "band-limited slab sampling needs u along a grid axis".into(),
        ));
    }
    Ok(axis)
}

/// Anything with a position-space form and a closed-form transform.
pub trait Potential {
    fn dim(&self) -> usize;
    fn support_direction(&self) -> Vec3;
    /// Lower edge of the spectral support along `u`.
    fn alpha_min(&self) -> f64;
    fn eval_v(&self, x: &Vec3) -> Complex64;
    fn eval_vtilde(&self, p: &Vec3) -> Complex64;
    fn sample_node(&self, x: &Vec3, grid: &Grid, mode: SamplingMode) -> Result<Complex64>;
}

impl Potential for PotentialSpec {
    fn dim(&self) -> usize {
        self.u.len()
    }

    fn support_direction(&self) -> Vec3 {
        self.u3()
    }

    fn alpha_min(&self) -> f64 {
        self.alpha
    }

    fn eval_v(&self, x: &Vec3) -> Complex64 {
        let (xpar, y1, y2) = self.local(x);
        let mut g = self.profile(y1, self.ell_y);
        if self.dim() == 3 {
            g *= self.profile(y2, self.ell_z());
        }
        if g == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.parallel_factor(xpar) * g
    }

    fn eval_vtilde(&self, p: &Vec3) -> Complex64 {
        let (e1, e2) = self.transverse_axes();
        let kappa = dot(&self.u3(), p) - self.alpha;
        let radial = step_theta(kappa) * self.radial_tilde(kappa);
        if radial == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut g = self.profile_tilde(dot(&e1, p), self.ell_y);
        if self.dim() == 3 {
            g *= self.profile_tilde(dot(&e2, p), self.ell_z());
        }
        let phase = Complex64::cis(-dot(p, &self.center3()));
        self.coupling * (radial * g) * phase
    }

    fn sample_node(&self, x: &Vec3, grid: &Grid, mode: SamplingMode) -> Result<Complex64> {
        match mode {
            SamplingMode::Pointwise => Ok(self.eval_v(x)),
            SamplingMode::BandLimited => self.sample_band_limited(x, grid),
        }
    }
}

/// Superposition of family members sharing one support direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PotentialSum {
    members: Vec<PotentialSpec>,
}

impl PotentialSum {
    pub fn new(members: Vec<PotentialSpec>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidPotential("a sum needs at least one member".into()))?;
        for m in &members {
            m.validate()?;
            if m.u.len() != first.u.len()
                || m.u.iter().zip(&first.u).any(|(a, b)| (a - b).abs() > 1e-12)
            {
                return Err(Error::InvalidPotential(
                    "all members of a sum must share the same u".into(),
                ));
            }
        }
        Ok(PotentialSum { members })
    }

    pub fn members(&self) -> &[PotentialSpec] {
        &self.members
    }
}

impl Potential for PotentialSum {
    fn dim(&self) -> usize {
        self.members[0].dim()
    }

    fn support_direction(&self) -> Vec3 {
        self.members[0].u3()
    }

    fn alpha_min(&self) -> f64 {
        self.members.iter().map(|m| m.alpha).fold(f64::INFINITY, f64::min)
    }

    fn eval_v(&self, x: &Vec3) -> Complex64 {
        self.members.iter().map(|m| m.eval_v(x)).sum()
    }

    fn eval_vtilde(&self, p: &Vec3) -> Complex64 {
        self.members.iter().map(|m| m.eval_vtilde(p)).sum()
    }

    fn sample_node(&self, x: &Vec3, grid: &Grid, mode: SamplingMode) -> Result<Complex64> {
        self.members.iter().map(|m| m.sample_node(x, grid, mode)).sum()
    }
}

#[derive(Clone, Debug)]
pub struct SampledPotential {
    pub field: SampledField,
    /// Largest boundary-node magnitude over the largest magnitude.
    pub boundary_ratio: f64,
    pub warnings: Vec<String>,
}

pub fn sample_potential<P: Potential + ?Sized>(
    pot: &P,
    grid: &Grid,
    mode: SamplingMode,
) -> Result<SampledPotential> {
    if pot.dim() != grid.dim() {
        return Err(Error::InvalidPotential(format!(
            "{}-dimensional potential on a {}-dimensional grid",
            pot.dim(),
            grid.dim()
        )));
    }
    let values = grid
        .coordinates(Space::Position)
        .iter()
        .map(|x| pot.sample_node(x, grid, mode))
        .collect::<Result<Vec<_>>>()?;
    let field = SampledField::new(grid.clone(), Space::Position, values)?;
    let boundary_ratio = boundary_ratio(&field);
    let mut warnings = Vec::new();
    if boundary_ratio > BOUNDARY_WARN_RATIO {
        warnings.push(format!(
            "potential does not decay inside the box: boundary/max = {boundary_ratio:.3e}; enlarge the box"
        ));
    }
    Ok(SampledPotential {
        field,
        boundary_ratio,
        warnings,
    })
}

/// Largest magnitude on the box faces relative to the global maximum.
pub fn boundary_ratio(field: &SampledField) -> f64 {
    let grid = field.grid();
    let max = field.max_abs();
    if max == 0.0 {
        return 0.0;
    }
    let mut edge: f64 = 0.0;
    for (flat, z) in field.values().iter().enumerate() {
        let idx = grid.unravel(flat);
        let on_face = (0..grid.dim()).any(|a| idx[a] == 0 || idx[a] == grid.counts()[a] - 1);
        if on_face {
            edge = edge.max(z.norm());
        }
    }
    edge / max
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub alpha: f64,
    pub u: Vec3,
    pub forbidden_max: f64,
    pub overall_max: f64,
    pub ratio: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Support check of an already transformed (momentum-space) field.
pub fn support_of_spectrum(spectrum: &SampledField, u: &Vec3, alpha: f64, tol: f64) -> Result<SupportReport> {
    spectrum.expect_space(Space::Momentum)?;
    check_tol(tol)?;
    let grid = spectrum.grid();
    let mut forbidden: f64 = 0.0;
    let mut overall: f64 = 0.0;
    for (flat, z) in spectrum.values().iter().enumerate() {
        let a = z.norm();
        overall = overall.max(a);
        if dot(u, &grid.node_momentum(flat)) < alpha {
            forbidden = forbidden.max(a);
        }
    }
    support_report(*u, alpha, forbidden, overall, tol)
}

/// Transforms a sampled potential and checks `ṽ(p) = 0` for `u·p < α`.
pub fn verify_support(field: &SampledField, u: &Vec3, alpha: f64, tol: f64) -> Result<SupportReport> {
    field.expect_space(Space::Position)?;
    check_unit(u)?;
    let spectrum = forward_ft(field)?;
    support_of_spectrum(&spectrum, u, alpha, tol)
}

/// Same check on the closed-form transform at the grid's momentum nodes.
pub fn verify_support_closed_form<P: Potential + ?Sized>(pot: &P, grid: &Grid, tol: f64) -> Result<SupportReport> {
    let values = grid
        .coordinates(Space::Momentum)
        .iter()
        .map(|p| pot.eval_vtilde(p))
        .collect();
    let spectrum = SampledField::new(grid.clone(), Space::Momentum, values)?;
    support_of_spectrum(&spectrum, &pot.support_direction(), pot.alpha_min(), tol)
}

fn support_report(u: Vec3, alpha: f64, forbidden: f64, overall: f64, tol: f64) -> Result<SupportReport> {
    if overall == 0.0 {
        return Err(Error::Degenerate("potential spectrum is identically zero".into()));
    }
    let ratio = forbidden / overall;
    Ok(SupportReport {
        alpha,
        u,
        forbidden_max: forbidden,
        overall_max: overall,
        ratio,
        tol,
        pass: ratio <= tol,
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

fn check_unit(u: &Vec3) -> Result<()> {
    if (norm(u) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig("u must be a unit vector".into()));
    }
    Ok(())
}
