//! Uniform grids and continuum-normalized Fourier transforms.
//!
//! Position node `j` on axis `i` sits at `x_j = -L_i/2 + j h_i` and momentum
//! node `m` at `p_m = -π/h_i + m Δp_i`, with `h_i = L_i/n_i` and
//! `Δp_i = 2π/L_i`. Both spaces are stored row-major, axis 0 slowest, in this
//! centered order.
//!
//! The forward transform is the Riemann sum of `∫ dᵈx e^{-ip·x} f(x)`:
//!
//! ```text
//! F(p) = Σ_x e^{-ip·x} f(x) Π h_i
//! f(x) = (2π)^{-d} Σ_p e^{ip·x} F(p) Π Δp_i
//! ```
//!
//! and the two are exact inverses on the grid.

use crate::{dot, norm, Complex64, Error, Result, Vec3};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

const MIN_COUNT: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    extents: Vec<f64>,
    counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    extents: Vec<f64>,
    counts: Vec<usize>,
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        Grid::new(&r.extents, &r.counts)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr {
            extents: g.extents,
            counts: g.counts,
        }
    }
}

/// Validating constructor with an explicit dimension.
pub fn make_grid(dim: usize, extents: &[f64], counts: &[usize]) -> Result<Grid> {
    if extents.len() != dim || counts.len() != dim {
        return Err(Error::InvalidGrid(format!(
            "dimension {dim} needs {dim} extents and counts, got {} and {}",
            extents.len(),
            counts.len()
        )));
    }
    Grid::new(extents, counts)
}

impl Grid {
    pub fn new(extents: &[f64], counts: &[usize]) -> Result<Self> {
        let dim = counts.len();
        if !(2..=3).contains(&dim) || extents.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "need 2 or 3 axes with matching extents, got {} counts and {} extents",
                dim,
                extents.len()
            )));
        }
        for (axis, (&l, &n)) in extents.iter().zip(counts).enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "extent on axis {axis} must be positive, got {l}"
                )));
            }
            if n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "count on axis {axis} is odd ({n}); the Nyquist node would be ambiguous"
                )));
            }
            if n < MIN_COUNT {
                return Err(Error::InvalidGrid(format!(
                    "count on axis {axis} is {n}, minimum is {MIN_COUNT}"
                )));
            }
        }
        Ok(Grid {
            extents: extents.to_vec(),
            counts: counts.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.counts[axis] as f64
    }

    pub fn momentum_spacing(&self, axis: usize) -> f64 {
        2.0 * PI / self.extents[axis]
    }

    pub fn max_momentum_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.momentum_spacing(a))
            .fold(0.0, f64::max)
    }

    /// Largest representable momentum `π/h` on an axis.
    pub fn nyquist(&self, axis: usize) -> f64 {
        PI / self.spacing(axis)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn momentum_cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.momentum_spacing(a)).product()
    }

    pub fn axis_position(&self, axis: usize, j: usize) -> f64 {
        -0.5 * self.extents[axis] + j as f64 * self.spacing(axis)
    }

    pub fn axis_momentum(&self, axis: usize, m: usize) -> f64 {
        (m as f64 - (self.counts[axis] / 2) as f64) * self.momentum_spacing(axis)
    }

    pub fn positions(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis])
            .map(|j| self.axis_position(axis, j))
            .collect()
    }

    pub fn momenta(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis])
            .map(|m| self.axis_momentum(axis, m))
            .collect()
    }

    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for axis in (0..self.dim()).rev() {
            idx[axis] = rest % self.counts[axis];
            rest /= self.counts[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn node_position(&self, flat: usize) -> Vec3 {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = self.axis_position(a, idx[a]);
        }
        x
    }

    pub fn node_momentum(&self, flat: usize) -> Vec3 {
        let idx = self.unravel(flat);
        let mut p = [0.0; 3];
        for a in 0..self.dim() {
            p[a] = self.axis_momentum(a, idx[a]);
        }
        p
    }

    /// Coordinates of every node in the given space, in storage order.
    pub fn coordinates(&self, space: Space) -> Vec<Vec3> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|a| match space {
                Space::Position => self.positions(a),
                Space::Momentum => self.momenta(a),
            })
            .collect();
        let mut out = Vec::with_capacity(self.len());
        match self.dim() {
            2 => {
                for &x in &axes[0] {
                    for &y in &axes[1] {
                        out.push([x, y, 0.0]);
                    }
                }
            }
            _ => {
                for &x in &axes[0] {
                    for &y in &axes[1] {
                        for &z in &axes[2] {
                            out.push([x, y, z]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Nearest momentum node to `p` (componentwise rounding).
    pub fn snap_momentum(&self, p: &Vec3) -> Vec3 {
        let mut out = [0.0; 3];
        for a in 0..self.dim() {
            let dp = self.momentum_spacing(a);
            out[a] = (p[a] / dp).round() * dp;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Position,
    Momentum,
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Space::Position => f.write_str("position"),
            Space::Momentum => f.write_str("momentum"),
        }
    }
}

/// Complex samples on a grid, tagged with the space they live in.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    grid: Grid,
    space: Space,
    values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: Grid, space: Space, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidField(format!("non-finite value at node {i}")));
        }
        Ok(SampledField {
            grid,
            space,
            values,
        })
    }

    pub fn zeros(grid: Grid, space: Space) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); grid.len()];
        SampledField {
            grid,
            space,
            values,
        }
    }

    /// Samples `f` at every node of `space`.
    pub fn from_fn(grid: Grid, space: Space, f: impl Fn(Vec3) -> Complex64) -> Result<Self> {
        let values = grid.coordinates(space).into_iter().map(f).collect();
        Self::new(grid, space, values)
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, space: Space, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        SampledField {
            grid,
            space,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        crate::max_abs(&self.values)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let values = self.values.iter().map(|z| z * c).collect();
        Self::from_parts_unchecked(self.grid.clone(), self.space, values)
    }

    /// Pointwise product; both factors must share grid and space.
    pub fn mul(&self, other: &SampledField) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self::from_parts_unchecked(
            self.grid.clone(),
            self.space,
            values,
        ))
    }

    pub fn check_compatible(&self, other: &SampledField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidField("fields live on different grids".into()));
        }
        if self.space != other.space {
            return Err(Error::InvalidField(format!(
                "mixing {} and {} fields",
                self.space, other.space
            )));
        }
        Ok(())
    }

    pub(crate) fn expect_space(&self, space: Space) -> Result<()> {
        if self.space != space {
            return Err(Error::InvalidField(format!(
                "expected a {space} field, got {}",
                self.space
            )));
        }
        Ok(())
    }
}

/// Cached per-axis FFT plans for one grid.
///
/// Plans are immutable once built and every call allocates its own scratch,
/// so a plan can be shared between threads.
pub struct FourierPlan {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

// Number of strided lines gathered per FFT call.
const LINE_BLOCK: usize = 16;

impl FourierPlan {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.counts.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.counts.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        FourierPlan {
            grid: grid.clone(),
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// In-place forward transform of position samples.
    pub fn forward_in_place(&self, values: &mut [Complex64]) {
        assert_eq!(values.len(), self.grid.len());
        let half_sum: usize = self.grid.counts.iter().map(|n| n / 2).sum();
        apply_checkerboard(&self.grid, values, 0, 1.0);
        for axis in 0..self.grid.dim() {
            transform_axis(&self.grid, values, axis, self.forward[axis].as_ref());
        }
        apply_checkerboard(&self.grid, values, half_sum, self.grid.cell_volume());
    }

    /// In-place inverse transform of momentum samples.
    pub fn inverse_in_place(&self, values: &mut [Complex64]) {
        assert_eq!(values.len(), self.grid.len());
        let half_sum: usize = self.grid.counts.iter().map(|n| n / 2).sum();
        let weight = self.grid.momentum_cell_volume() / (2.0 * PI).powi(self.grid.dim() as i32);
        apply_checkerboard(&self.grid, values, 0, 1.0);
        for axis in 0..self.grid.dim() {
            transform_axis(&self.grid, values, axis, self.inverse[axis].as_ref());
        }
        apply_checkerboard(&self.grid, values, half_sum, weight);
    }

    pub fn forward(&self, field: &SampledField) -> Result<SampledField> {
        field.expect_space(Space::Position)?;
        self.check_grid(field)?;
        let mut values = field.values.clone();
        self.forward_in_place(&mut values);
        Ok(SampledField::from_parts_unchecked(
            self.grid.clone(),
            Space::Momentum,
            values,
        ))
    }

    pub fn inverse(&self, field: &SampledField) -> Result<SampledField> {
        field.expect_space(Space::Momentum)?;
        self.check_grid(field)?;
        let mut values = field.values.clone();
        self.inverse_in_place(&mut values);
        Ok(SampledField::from_parts_unchecked(
            self.grid.clone(),
            Space::Position,
            values,
        ))
    }

    fn check_grid(&self, field: &SampledField) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::InvalidField("field grid does not match plan".into()));
        }
        Ok(())
    }
}

// Multiplies node (j0, j1, j2) by scale * (-1)^(offset + j0 + j1 + j2).
fn apply_checkerboard(grid: &Grid, values: &mut [Complex64], offset: usize, scale: f64) {
    let last = *grid.counts.last().unwrap();
    for (row, chunk) in values.chunks_mut(last).enumerate() {
        let idx = grid.unravel(row * last);
        let base: usize = offset + idx.iter().sum::<usize>();
        for (j, z) in chunk.iter_mut().enumerate() {
            if (base + j).is_multiple_of(2) {
                *z *= scale;
            } else {
                *z *= -scale;
            }
        }
    }
}

fn transform_axis(grid: &Grid, values: &mut [Complex64], axis: usize, fft: &dyn Fft<f64>) {
    let n = grid.counts[axis];
    let stride: usize = grid.counts[axis + 1..].iter().product();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    if stride == 1 {
        fft.process_with_scratch(values, &mut scratch);
        return;
    }
    let outer: usize = grid.counts[..axis].iter().product();
    let mut buf = vec![Complex64::new(0.0, 0.0); LINE_BLOCK * n];
    for o in 0..outer {
        let base = o * n * stride;
        let mut inner0 = 0;
        while inner0 < stride {
            let width = LINE_BLOCK.min(stride - inner0);
            for j in 0..n {
                let row = base + j * stride + inner0;
                for l in 0..width {
                    buf[l * n + j] = values[row + l];
                }
            }
            fft.process_with_scratch(&mut buf[..width * n], &mut scratch);
            for j in 0..n {
                let row = base + j * stride + inner0;
                for l in 0..width {
                    values[row + l] = buf[l * n + j];
                }
            }
            inner0 += width;
        }
    }
}

/// Continuum-normalized forward transform (one-shot plan).
pub fn forward_ft(field: &SampledField) -> Result<SampledField> {
    FourierPlan::new(field.grid()).forward(field)
}

/// Exact inverse of [`forward_ft`].
pub fn inverse_ft(field: &SampledField) -> Result<SampledField> {
    FourierPlan::new(field.grid()).inverse(field)
}

fn phase_table(coords: &[f64], p: f64, sign: f64) -> Vec<Complex64> {
    coords
        .iter()
        .map(|&x| Complex64::cis(sign * p * x))
        .collect()
}

// Σ_nodes T0[i] T1[j] (T2[k]) values[i,j,(k)] for separable phase tables.
fn separable_sum(grid: &Grid, values: &[Complex64], tables: &[Vec<Complex64>]) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    match grid.dim() {
        2 => {
            let n1 = grid.counts[1];
            values
                .chunks_exact(n1)
                .zip(&tables[0])
                .map(|(row, t0)| {
                    let inner = row.iter().zip(&tables[1]).fold(zero, |acc, (v, t)| acc + v * t);
                    inner * t0
                })
                .sum()
        }
        _ => {
            let n1 = grid.counts[1];
            let n2 = grid.counts[2];
            values
                .chunks_exact(n1 * n2)
                .zip(&tables[0])
                .map(|(plane, t0)| {
                    let s: Complex64 = plane
                        .chunks_exact(n2)
                        .zip(&tables[1])
                        .map(|(row, t1)| {
                            let inner =
                                row.iter().zip(&tables[2]).fold(zero, |acc, (v, t)| acc + v * t);
                            inner * t1
                        })
                        .sum();
                    s * t0
                })
                .sum()
        }
    }
}

/// Direct evaluation of `Σ_x e^{-ip·x} f(x) Π h_i` at arbitrary momenta.
pub fn nudft(field: &SampledField, points: &[Vec3]) -> Result<Vec<Complex64>> {
    field.expect_space(Space::Position)?;
    let grid = field.grid();
    let coords: Vec<Vec<f64>> = (0..grid.dim()).map(|a| grid.positions(a)).collect();
    let w = grid.cell_volume();
    points
        .iter()
        .map(|p| {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidField("non-finite momentum point".into()));
            }
            let tables: Vec<_> = (0..grid.dim())
                .map(|a| phase_table(&coords[a], p[a], -1.0))
                .collect();
            Ok(separable_sum(grid, field.values(), &tables) * w)
        })
        .collect()
}

/// Trigonometric interpolation of a momentum-space field at arbitrary
/// positions: `(2π)^{-d} Σ_p e^{ip·x} F(p) Π Δp_i`.
pub fn eval_position(field: &SampledField, points: &[Vec3]) -> Result<Vec<Complex64>> {
    field.expect_space(Space::Momentum)?;
    let grid = field.grid();
    let coords: Vec<Vec<f64>> = (0..grid.dim()).map(|a| grid.momenta(a)).collect();
    let w = grid.momentum_cell_volume() / (2.0 * PI).powi(grid.dim() as i32);
    points
        .iter()
        .map(|x| {
            let tables: Vec<_> = (0..grid.dim())
                .map(|a| phase_table(&coords[a], x[a], 1.0))
                .collect();
            Ok(separable_sum(grid, field.values(), &tables) * w)
        })
        .collect()
}

/// Keeps only momentum nodes with `3|m| < n` on every axis (signed index
/// `m`), so pointwise products of two masked fields alias only into the
/// discarded band.
pub fn dealias_mask(grid: &Grid) -> Vec<bool> {
    let keep_axis: Vec<Vec<bool>> = grid
        .counts
        .iter()
        .map(|&n| {
            (0..n)
                .map(|m| 3 * (m as i64 - (n / 2) as i64).unsigned_abs() < n as u64)
                .collect()
        })
        .collect();
    (0..grid.len())
        .map(|flat| {
            let idx = grid.unravel(flat);
            (0..grid.dim()).all(|a| keep_axis[a][idx[a]])
        })
        .collect()
}

pub fn apply_mask(values: &mut [Complex64], mask: &[bool]) {
    for (z, &keep) in values.iter_mut().zip(mask) {
        if !keep {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}

/// Unit scattering directions on the shell `|p| = k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub dim: usize,
    pub k: f64,
    pub units: Vec<Vec3>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// On-shell momenta `k' = k k̂'`.
    pub fn momenta(&self) -> Vec<Vec3> {
        self.units
            .iter()
            .map(|u| [self.k * u[0], self.k * u[1], self.k * u[2]])
            .collect()
    }
}

/// Deterministic directions covering the unit circle (2D) or sphere (3D).
///
/// In 2D the angles are equally spaced starting at `incident`; in 3D a
/// golden-angle spiral runs from `incident` to its antipode.
pub fn sphere_directions(dim: usize, k: f64, count: usize, incident: &Vec3) -> Result<DirectionSet> {
    if count == 0 {
        return Err(Error::InvalidConfig("direction count must be at least 1".into()));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidConfig(format!("wavenumber must be positive, got {k}")));
    }
    let len = norm(incident);
    if !(len > 0.0) || (dim == 2 && incident[2] != 0.0) {
        return Err(Error::InvalidConfig("incident direction must be a nonzero in-plane vector".into()));
    }
    let e1 = [incident[0] / len, incident[1] / len, incident[2] / len];
    let units = match dim {
        2 => {
            let theta0 = e1[1].atan2(e1[0]);
            (0..count)
                .map(|s| {
                    let t = theta0 + 2.0 * PI * s as f64 / count as f64;
                    [t.cos(), t.sin(), 0.0]
                })
                .collect()
        }
        3 => {
            let (e2, e3) = orthonormal_complement(&e1);
            let golden = PI * (3.0 - 5.0_f64.sqrt());
            (0..count)
                .map(|s| {
                    let c = if count == 1 {
                        1.0
                    } else {
                        1.0 - 2.0 * s as f64 / (count - 1) as f64
                    };
                    let r = (1.0 - c * c).max(0.0).sqrt();
                    let phi = golden * s as f64;
                    let (sp, cp) = phi.sin_cos();
                    let mut v = [0.0; 3];
                    for i in 0..3 {
                        v[i] = c * e1[i] + r * (cp * e2[i] + sp * e3[i]);
                    }
                    let l = norm(&v);
                    [v[0] / l, v[1] / l, v[2] / l]
                })
                .collect()
        }
        _ => return Err(Error::InvalidConfig(format!("dimension {dim} unsupported"))),
    };
    Ok(DirectionSet { dim, k, units })
}

/// Two unit vectors completing `e1` to a right-handed orthonormal frame.
pub(crate) fn orthonormal_complement(e1: &Vec3) -> (Vec3, Vec3) {
    // start from the coordinate axis least aligned with e1
    let axis = (0..3)
        .min_by(|&a, &b| e1[a].abs().partial_cmp(&e1[b].abs()).unwrap())
        .unwrap();
    let mut seed = [0.0; 3];
    seed[axis] = 1.0;
    let d = dot(&seed, e1);
    let mut e2 = [seed[0] - d * e1[0], seed[1] - d * e1[1], seed[2] - d * e1[2]];
    let l = norm(&e2);
    for c in e2.iter_mut() {
        *c /= l;
    }
    let e3 = cross(e1, &e2);
    (e2, e3)
}

pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
