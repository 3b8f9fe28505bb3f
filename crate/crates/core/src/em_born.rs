//! Six-component electromagnetic Born series.
//!
//! The field is `Ψ = (ℰ, ℋ)` and the material deviation is the block
//! diagonal `η = diag(δε̂, δμ̂)`. With `W = FT(η·B)` the numerator is
//!
//! ```text
//! M_E = −k² W_E + p (p·W_E) + k p×W_H
//! M_H = −k p×W_E − k² W_H + p (p·W_H)
//! ```
//!
//! followed by `B = FT⁻¹(G·M)` as in the scalar engine. The overall
//! constant is fixed so that the isotropic reduction `δε̂ = vI`, `δμ̂ = 0`
//! gives `M⁽¹⁾_E = (−k² + pp·)(ṽ(p−k)ℰ₀)`, the scalar first-order kernel
//! dressed by the transverse projector.

use crate::gridfft::{
    apply_mask, cross, dealias_mask, nudft, DirectionSet, FourierPlan, Grid, SampledField, Space,
};
use crate::potentials::{boundary_ratio, support_of_spectrum, SupportReport, BOUNDARY_WARN_RATIO};
use crate::scalar_born::{
    assemble_report, green_g, lower_band, gap_band, shell_verdict, BandReport, ScatterConfig,
    TheoremReport, DIVERGENCE_GROWTH,
};
use crate::{dot, norm, Complex64, Error, Result, Vec3};
use serde::{Deserialize, Serialize};

pub type Six = [Complex64; 6];
pub type CVec3 = [Complex64; 3];

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub fn six_norm(v: &Six) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Six component arrays on one grid, `(E_x, E_y, E_z, H_x, H_y, H_z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SixField {
    grid: Grid,
    space: Space,
    comps: [Vec<Complex64>; 6],
}

impl SixField {
    pub fn new(grid: Grid, space: Space, comps: [Vec<Complex64>; 6]) -> Result<Self> {
        for (i, c) in comps.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(Error::InvalidField(format!(
                    "component {i} has {} values for {} nodes",
                    c.len(),
                    grid.len()
                )));
            }
            if c.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::InvalidField(format!("component {i} has non-finite values")));
            }
        }
        Ok(SixField { grid, space, comps })
    }

    pub fn zeros(grid: Grid, space: Space) -> Self {
        let n = grid.len();
        let comps = std::array::from_fn(|_| vec![ZERO; n]);
        SixField { grid, space, comps }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn component(&self, i: usize) -> &[Complex64] {
        &self.comps[i]
    }

    pub fn at(&self, flat: usize) -> Six {
        std::array::from_fn(|c| self.comps[c][flat])
    }

    /// Pointwise six-vector norms.
    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| six_norm(&self.at(i))).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.magnitudes().into_iter().fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let comps = std::array::from_fn(|i| self.comps[i].iter().map(|z| z * c).collect());
        SixField {
            grid: self.grid.clone(),
            space: self.space,
            comps,
        }
    }
}

/// Complex 3×3 tensor field; absent entries are identically zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorField {
    entries: [Option<Vec<Complex64>>; 9],
}

impl TensorField {
    pub fn entry(&self, i: usize, j: usize) -> Option<&[Complex64]> {
        self.entries[3 * i + j].as_deref()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_none())
    }

    fn apply(&self, flat: usize, v: &[Complex64; 3]) -> CVec3 {
        let mut out = [ZERO; 3];
        for i in 0..3 {
            for j in 0..3 {
                if let Some(e) = &self.entries[3 * i + j] {
                    out[i] += e[flat] * v[j];
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Epsilon,
    Mu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialKind {
    Epsilon,
    Mu,
    Both,
}

/// `δε̂` and `δμ̂` sampled on one 3D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialTensors {
    grid: Grid,
    pub eps: TensorField,
    pub mu: TensorField,
}

impl MaterialTensors {
    pub fn zero(grid: &Grid) -> Result<Self> {
        if grid.dim() != 3 {
            return Err(Error::InvalidGrid("electromagnetic media need a 3D grid".into()));
        }
        Ok(MaterialTensors {
            grid: grid.clone(),
            eps: TensorField::default(),
            mu: TensorField::default(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Sets entry `(i, j)` of one block from a position-space sample.
    pub fn set_entry(&mut self, block: Block, i: usize, j: usize, field: &SampledField) -> Result<()> {
        field.expect_space(Space::Position)?;
        if field.grid() != &self.grid {
            return Err(Error::InvalidField("tensor entry lives on a different grid".into()));
        }
        if i > 2 || j > 2 {
            return Err(Error::InvalidConfig(format!("tensor index ({i}, {j}) out of range")));
        }
        let t = match block {
            Block::Epsilon => &mut self.eps,
            Block::Mu => &mut self.mu,
        };
        t.entries[3 * i + j] = Some(field.values().to_vec());
        Ok(())
    }

    /// All present entries as `(block, i, j, values)`.
    pub fn entries(&self) -> impl Iterator<Item = (Block, usize, usize, &[Complex64])> {
        let e = self.eps.entries.iter().enumerate().map(|(n, v)| (Block::Epsilon, n, v));
        let m = self.mu.entries.iter().enumerate().map(|(n, v)| (Block::Mu, n, v));
        e.chain(m)
            .filter_map(|(b, n, v)| v.as_deref().map(|v| (b, n / 3, n % 3, v)))
    }

    /// `η·Ψ` at one node.
    pub fn apply(&self, flat: usize, psi: &Six) -> Six {
        let e = self.eps.apply(flat, &[psi[0], psi[1], psi[2]]);
        let h = self.mu.apply(flat, &[psi[3], psi[4], psi[5]]);
        [e[0], e[1], e[2], h[0], h[1], h[2]]
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let scale = |t: &TensorField| TensorField {
            entries: std::array::from_fn(|n| {
                t.entries[n].as_ref().map(|v| v.iter().map(|z| z * c).collect())
            }),
        };
        MaterialTensors {
            grid: self.grid.clone(),
            eps: scale(&self.eps),
            mu: scale(&self.mu),
        }
    }

    /// Truncation warnings for entries that do not decay inside the box.
    pub fn warnings(&self) -> Vec<String> {
        self.entries()
            .filter_map(|(b, i, j, v)| {
                let f = SampledField::from_parts_unchecked(self.grid.clone(), Space::Position, v.to_vec());
                let r = boundary_ratio(&f);
                (r > BOUNDARY_WARN_RATIO).then(|| {
                    format!("{b:?} entry ({i}, {j}) does not decay inside the box: boundary/max = {r:.3e}")
                })
            })
            .collect()
    }

    /// Support certificate per present entry.
    pub fn verify_support(&self, u: &Vec3, alpha: f64, tol: f64) -> Result<Vec<(Block, usize, usize, SupportReport)>> {
        let plan = FourierPlan::new(&self.grid);
        self.entries()
            .map(|(b, i, j, v)| {
                let mut spec = v.to_vec();
                plan.forward_in_place(&mut spec);
                let f = SampledField::from_parts_unchecked(self.grid.clone(), Space::Momentum, spec);
                Ok((b, i, j, support_of_spectrum(&f, u, alpha, tol)?))
            })
            .collect()
    }

    fn map_entries(&self, f: impl Fn(&[Complex64]) -> Vec<Complex64>) -> Self {
        let map = |t: &TensorField| TensorField {
            entries: std::array::from_fn(|n| t.entries[n].as_deref().map(&f)),
        };
        MaterialTensors {
            grid: self.grid.clone(),
            eps: map(&self.eps),
            mu: map(&self.mu),
        }
    }
}

/// Isotropic media `δε̂ = scale·v I` and/or `δμ̂ = scale·v I`.
pub fn material_from_scalar(v: &SampledField, which: MaterialKind, scale: Complex64) -> Result<MaterialTensors> {
    let mut m = MaterialTensors::zero(v.grid())?;
    let scaled = v.scaled(scale);
    let blocks: &[Block] = match which {
        MaterialKind::Epsilon => &[Block::Epsilon],
        MaterialKind::Mu => &[Block::Mu],
        MaterialKind::Both => &[Block::Epsilon, Block::Mu],
    };
    for &b in blocks {
        for i in 0..3 {
            m.set_entry(b, i, i, &scaled)?;
        }
    }
    Ok(m)
}

/// `Ψ₀ = (ℰ₀, k̂×ℰ₀)`; `ℰ₀` must be transverse to `k̂`.
pub fn em_incident(e0: &CVec3, khat: &Vec3) -> Result<Six> {
    let kn = norm(khat);
    if (kn - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig("incident direction must be a unit vector".into()));
    }
    let along: Complex64 = (0..3).map(|i| e0[i] * khat[i]).sum();
    let scale = e0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
    if along.norm() > 1e-12 * scale {
        return Err(Error::InvalidConfig(format!(
            "polarization is not transverse: E0·k̂ = {along}"
        )));
    }
    let h = ccross_real(khat, e0);
    Ok([e0[0], e0[1], e0[2], h[0], h[1], h[2]])
}

/// Linear polarization along `k̂×u` if nonzero, otherwise along the
/// coordinate axis least aligned with `k̂`, made transverse.
pub fn default_polarization(khat: &Vec3, u: &Vec3) -> CVec3 {
    let c = cross(khat, u);
    let cn = norm(&c);
    let e = if cn > 1e-12 {
        [c[0] / cn, c[1] / cn, c[2] / cn]
    } else {
        let axis = (0..3)
            .min_by(|&a, &b| khat[a].abs().partial_cmp(&khat[b].abs()).unwrap())
            .unwrap();
        let mut s = [0.0; 3];
        s[axis] = 1.0;
        let d = dot(&s, khat);
        let mut e = [s[0] - d * khat[0], s[1] - d * khat[1], s[2] - d * khat[2]];
        let l = norm(&e);
        for x in e.iter_mut() {
            *x /= l;
        }
        e
    };
    e.map(|x| Complex64::new(x, 0.0))
}

fn ccross_real(a: &Vec3, b: &CVec3) -> CVec3 {
    [
        b[2] * a[1] - b[1] * a[2],
        b[0] * a[2] - b[2] * a[0],
        b[1] * a[0] - b[0] * a[1],
    ]
}

/// The kernel at one momentum.
pub fn em_kernel_at(p: &Vec3, k: f64, w: &Six) -> Six {
    let we = [w[0], w[1], w[2]];
    let wh = [w[3], w[4], w[5]];
    let pe: Complex64 = (0..3).map(|i| we[i] * p[i]).sum();
    let ph: Complex64 = (0..3).map(|i| wh[i] * p[i]).sum();
    let xe = ccross_real(p, &we);
    let xh = ccross_real(p, &wh);
    let k2 = k * k;
    let mut out = [ZERO; 6];
    for i in 0..3 {
        out[i] = -k2 * we[i] + pe * p[i] + k * xh[i];
        out[i + 3] = -k * xe[i] - k2 * wh[i] + ph * p[i];
    }
    out
}

pub fn em_kernel_apply(w: &SixField, k: f64) -> Result<SixField> {
    if w.space != Space::Momentum {
        return Err(Error::InvalidField("kernel acts on momentum-space fields".into()));
    }
    let grid = &w.grid;
    let mut out = SixField::zeros(grid.clone(), Space::Momentum);
    for (flat, p) in grid.coordinates(Space::Momentum).iter().enumerate() {
        let r = em_kernel_at(p, k, &w.at(flat));
        for c in 0..6 {
            out.comps[c][flat] = r[c];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EmBornTerm {
    pub order: usize,
    pub b: SixField,
    pub m: Option<SixField>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmOnShellRecord {
    pub order: usize,
    pub k: f64,
    pub directions: Vec<Vec3>,
    pub values: Vec<[[f64; 2]; 6]>,
}

impl EmOnShellRecord {
    fn new(order: usize, dirs: &DirectionSet, vals: Vec<Six>) -> Self {
        EmOnShellRecord {
            order,
            k: dirs.k,
            directions: dirs.units.clone(),
            values: vals.iter().map(|v| v.map(|z| [z.re, z.im])).collect(),
        }
    }

    pub fn six(&self, i: usize) -> Six {
        self.values[i].map(|[re, im]| Complex64::new(re, im))
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| six_norm(&self.six(i))).collect()
    }
}

pub struct EmEngine {
    config: ScatterConfig,
    psi0: Six,
    plan: FourierPlan,
    materials: MaterialTensors,
    green: Vec<Complex64>,
    mask: Option<Vec<bool>>,
    directions: DirectionSet,
}

impl EmEngine {
    /// `e0 = None` selects [`default_polarization`].
    pub fn new(config: &ScatterConfig, materials: &MaterialTensors, e0: Option<CVec3>) -> Result<Self> {
        let grid = &config.grid;
        if grid.dim() != 3 {
            return Err(Error::InvalidConfig("the electromagnetic engine needs a 3D grid".into()));
        }
        if materials.grid() != grid {
            return Err(Error::InvalidField("materials live on a different grid".into()));
        }
        let khat = config.incident_unit();
        let e0 = e0.unwrap_or_else(|| default_polarization(&khat, &config.u));
        let psi0 = em_incident(&e0, &khat)?;
        let plan = FourierPlan::new(grid);
        let k = config.k();
        let green = grid
            .coordinates(Space::Momentum)
            .iter()
            .map(|p| green_g(dot(p, p), k, config.epsilon))
            .collect();
        let mask = config.dealias.then(|| dealias_mask(grid));
        let materials = match &mask {
            Some(mask) => materials.map_entries(|v| {
                let mut s = v.to_vec();
                plan.forward_in_place(&mut s);
                apply_mask(&mut s, mask);
                plan.inverse_in_place(&mut s);
                s
            }),
            None => materials.clone(),
        };
        let directions = config.directions()?;
        Ok(EmEngine {
            config: config.clone(),
            psi0,
            plan,
            materials,
            green,
            mask,
            directions,
        })
    }

    pub fn config(&self) -> &ScatterConfig {
        &self.config
    }

    pub fn psi0(&self) -> Six {
        self.psi0
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn materials(&self) -> &MaterialTensors {
        &self.materials
    }

    pub fn incident(&self) -> EmBornTerm {
        let grid = &self.config.grid;
        let kv = self.config.k_vec;
        let phases: Vec<Complex64> = grid
            .coordinates(Space::Position)
            .iter()
            .map(|x| Complex64::cis(dot(&kv, x)))
            .collect();
        let comps = std::array::from_fn(|c| phases.iter().map(|z| z * self.psi0[c]).collect());
        EmBornTerm {
            order: 0,
            b: SixField {
                grid: grid.clone(),
                space: Space::Position,
                comps,
            },
            m: None,
        }
    }

    /// `η·B` in position space; blocks with no material are skipped.
    fn source(&self, prev: &EmBornTerm) -> [Option<Vec<Complex64>>; 6] {
        let n = self.config.grid.len();
        let mut out: [Vec<Complex64>; 6] = std::array::from_fn(|_| vec![ZERO; n]);
        for flat in 0..n {
            let r = self.materials.apply(flat, &prev.b.at(flat));
            for c in 0..6 {
                out[c][flat] = r[c];
            }
        }
        let e_live = !self.materials.eps.is_zero();
        let h_live = !self.materials.mu.is_zero();
        let mut i = 0;
        out.map(|v| {
            let live = if i < 3 { e_live } else { h_live };
            i += 1;
            live.then_some(v)
        })
    }

    pub fn step(&self, prev: &EmBornTerm, b1_max: Option<f64>) -> Result<EmBornTerm> {
        let order = prev.order + 1;
        let grid = &self.config.grid;
        let n = grid.len();
        let src = self.source(prev);
        let w: [Vec<Complex64>; 6] = src.map(|c| match c {
            Some(mut v) => {
                self.plan.forward_in_place(&mut v);
                if let Some(mask) = &self.mask {
                    apply_mask(&mut v, mask);
                }
                v
            }
            None => vec![ZERO; n],
        });
        let w = SixField {
            grid: grid.clone(),
            space: Space::Momentum,
            comps: w,
        };
        let m = em_kernel_apply(&w, self.config.k())?;
        let b = m.comps.clone().map(|mut c| {
            for (z, g) in c.iter_mut().zip(&self.green) {
                *z *= g;
            }
            self.plan.inverse_in_place(&mut c);
            c
        });
        let b = SixField {
            grid: grid.clone(),
            space: Space::Position,
            comps: b,
        };
        let b_max = b.max_norm();
        if !b_max.is_finite() {
            return Err(Error::Divergence {
                order,
                growth: f64::INFINITY,
            });
        }
        if let Some(r) = b1_max {
            if r > 0.0 && b_max > DIVERGENCE_GROWTH * r {
                return Err(Error::Divergence {
                    order,
                    growth: b_max / r,
                });
            }
        }
        Ok(EmBornTerm {
            order,
            b,
            m: Some(m),
        })
    }

    /// `M⁽ⁿ⁾(k′) = K(k′) Σ_x e^{−ik′·x} η B⁽ⁿ⁻¹⁾ Πh`.
    pub fn on_shell(&self, prev: &EmBornTerm) -> Result<EmOnShellRecord> {
        let grid = &self.config.grid;
        let momenta = self.directions.momenta();
        let src = self.source(prev);
        let mut w = vec![[ZERO; 6]; momenta.len()];
        for (c, comp) in src.into_iter().enumerate() {
            if let Some(values) = comp {
                let f = SampledField::from_parts_unchecked(grid.clone(), Space::Position, values);
                for (slot, z) in w.iter_mut().zip(nudft(&f, &momenta)?) {
                    slot[c] = z;
                }
            }
        }
        let k = self.config.k();
        let vals = momenta.iter().zip(&w).map(|(p, wv)| em_kernel_at(p, k, wv)).collect();
        Ok(EmOnShellRecord::new(prev.order + 1, &self.directions, vals))
    }

    pub fn series(&self) -> Result<EmBornSeries> {
        let mut terms = vec![self.incident()];
        let mut on_shell = Vec::new();
        let mut b1_max = None;
        for _ in 0..self.config.n_max {
            let prev = terms.last().unwrap();
            on_shell.push(self.on_shell(prev)?);
            let next = self.step(prev, b1_max)?;
            if next.order == 1 {
                b1_max = Some(next.b.max_norm());
            }
            terms.push(next);
        }
        Ok(EmBornSeries {
            config: self.config.clone(),
            psi0: self.psi0,
            terms,
            on_shell,
        })
    }
}

#[derive(Clone, Debug)]
pub struct EmBornSeries {
    pub config: ScatterConfig,
    pub psi0: Six,
    pub terms: Vec<EmBornTerm>,
    pub on_shell: Vec<EmOnShellRecord>,
}

pub fn em_born_series(config: &ScatterConfig, materials: &MaterialTensors, e0: Option<CVec3>) -> Result<EmBornSeries> {
    EmEngine::new(config, materials, e0)?.series()
}

pub fn em_theorem_report(series: &EmBornSeries, tol: f64) -> TheoremReport {
    let c = &series.config;
    let n_exact = c.exactness_order();
    let orders = series
        .on_shell
        .iter()
        .map(|rec| {
            let grid_max = series.terms[rec.order].m.as_ref().map_or(0.0, |m| m.max_norm());
            shell_verdict(rec.order, n_exact, &rec.norms(), grid_max, tol)
        })
        .collect();
    let mut report = assemble_report(c, orders, tol);
    let e0: Vec<String> = series.psi0[..3].iter().map(|z| format!("{:.6}", z.re)).collect();
    report.warnings.push(format!("polarization E0 = ({})", e0.join(", ")));
    report
}

pub fn verify_em_shell(config: &ScatterConfig, materials: &MaterialTensors, e0: Option<CVec3>, tol: f64) -> Result<TheoremReport> {
    Ok(em_theorem_report(&em_born_series(config, materials, e0)?, tol))
}

/// Band checks on the six-vector magnitude of each numerator.
pub fn em_verify_bands(series: &EmBornSeries, tol: f64) -> (Vec<BandReport>, Vec<BandReport>) {
    let c = &series.config;
    let n = c.exactness_order();
    let mut l2 = Vec::new();
    let mut l4 = Vec::new();
    for t in &series.terms {
        if let Some(m) = &t.m {
            let mags = m.magnitudes();
            l2.push(lower_band(&c.grid, &mags, &c.u, c.k(), t.order, tol));
            l4.push(gap_band(&c.grid, &mags, &c.u, c.k(), c.alpha, n, t.order, tol));
        }
    }
    (l2, l4)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn incident_examples() {
        let z = [0.0, 0.0, 1.0];
        let psi = em_incident(&[c(1.0), c(0.0), c(0.0)], &z).unwrap();
        assert_eq!(psi, [c(1.0), c(0.0), c(0.0), c(0.0), c(1.0), c(0.0)]);
        let psi = em_incident(&[c(0.0), c(1.0), c(0.0)], &z).unwrap();
        assert_eq!(psi, [c(0.0), c(1.0), c(0.0), c(-1.0), c(0.0), c(0.0)]);
        assert!(em_incident(&[c(0.0), c(0.0), c(1.0)], &z).is_err());
    }

    #[test]
    fn default_polarization_is_transverse() {
        let e = default_polarization(&[-1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(e, [c(0.0), c(1.0), c(0.0)]);
        let k = [0.0, 0.6, 0.8];
        let e = default_polarization(&k, &[1.0, 0.0, 0.0]);
        let d: Complex64 = (0..3).map(|i| e[i] * k[i]).sum();
        assert!(d.norm() < 1e-15);
    }

    #[test]
    fn kernel_zero_and_orthogonality() {
        let p = [0.3, -1.2, 0.7];
        assert_eq!(em_kernel_at(&p, 1.1, &[ZERO; 6]), [ZERO; 6]);
        // only W_H: E output is k p×W_H, orthogonal to p
        let w = [ZERO, ZERO, ZERO, Complex64::new(0.2, 1.0), c(-0.5), Complex64::new(0.0, 0.3)];
        let out = em_kernel_at(&p, 1.1, &w);
        let d: Complex64 = (0..3).map(|i| out[i] * p[i]).sum();
        assert!(d.norm() < 1e-14);
    }

    #[test]
    fn materials_need_3d() {
        let g = Grid::new(&[10.0, 10.0], &[8, 8]).unwrap();
        assert!(MaterialTensors::zero(&g).is_err());
    }
}
