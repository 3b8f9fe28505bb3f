//! Run configuration and its validation.

use born_core::em_born::{Block, MaterialKind};
use born_core::potentials::{Potential, PotentialSpec, PotentialSum, SamplingMode};
use born_core::{Complex64, Grid};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Scalar2d,
    Scalar3d,
    Em3d,
}

impl Mode {
    pub fn dim(self) -> usize {
        match self {
            Mode::Scalar2d => 2,
            Mode::Scalar3d | Mode::Em3d => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extents: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> born_core::Result<Grid> {
        Grid::new(&self.extents, &self.counts)
    }
}

/// Either an explicit list or `count` evenly spaced values in `[start, stop]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSweep {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl KSweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            KSweep::List(v) => v.clone(),
            KSweep::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonPolicy {
    /// `2kΔp_max` for each sweep point.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub theorem: f64,
    pub band: f64,
    pub support: f64,
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            theorem: 1e-3,
            band: 1e-3,
            support: 1e-3,
            oracle: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Tolerances {
            theorem: tol,
            band: tol,
            support: tol,
            oracle: tol,
        }
    }
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// One tensor entry of a medium, sampled from its own potential list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntrySpec {
    pub block: Block,
    pub i: usize,
    pub j: usize,
    pub potential: Vec<PotentialSpec>,
    #[serde(default = "one", with = "reim")]
    pub scale: Complex64,
}

/// Medium built from the top-level potential (isotropic part) plus explicit
/// entries. Without this block an em3d run uses `δε̂ = v·I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialsSpec {
    #[serde(default = "epsilon_kind")]
    pub isotropic: Option<MaterialKind>,
    #[serde(default = "one", with = "reim")]
    pub scale: Complex64,
    #[serde(default)]
    pub entries: Vec<EntrySpec>,
}

fn epsilon_kind() -> Option<MaterialKind> {
    Some(MaterialKind::Epsilon)
}

impl Default for MaterialsSpec {
    fn default() -> Self {
        MaterialsSpec {
            isotropic: epsilon_kind(),
            scale: one(),
            entries: Vec::new(),
        }
    }
}

mod reim {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct ReIm {
        re: f64,
        #[serde(default)]
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        ReIm { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let r = ReIm::deserialize(d)?;
        Ok(Complex64::new(r.re, r.im))
    }
}

fn default_directions() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mode: Mode,
    pub grid: GridSpec,
    /// Superposed into one interaction; all members share `u`.
    pub potential: Vec<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub materials: Option<MaterialsSpec>,
    pub k: KSweep,
    #[serde(default)]
    pub epsilon: EpsilonPolicy,
    /// Highest order; `N + 2` per sweep point when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Incident direction; `−u` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident: Option<Vec<f64>>,
    /// Electric polarization as `[re, im]` pairs; em3d only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarization: Option<[[f64; 2]; 3]>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub dealias: bool,
    #[serde(default)]
    pub sampling: SamplingMode,
    /// Grid for the `oracle` subcommand; 8 nodes per axis over `12/α` when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_grid: Option<GridSpec>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(out: &mut Vec<Diagnostic>, field: &str, message: impl Into<String>) {
    out.push(Diagnostic {
        field: field.into(),
        message: message.into(),
    });
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Vec<Diagnostic>> {
        serde_json::from_str(text).map_err(|e| {
            vec![Diagnostic {
                field: "config".into(),
                message: e.to_string(),
            }]
        })
    }

    pub fn sum(&self) -> born_core::Result<PotentialSum> {
        PotentialSum::new(self.potential.clone())
    }

    pub fn alpha(&self) -> f64 {
        self.potential.iter().map(|p| p.alpha).fold(f64::INFINITY, f64::min)
    }

    pub fn u(&self) -> [f64; 3] {
        self.potential[0].u3()
    }

    pub fn incident(&self) -> [f64; 3] {
        match &self.incident {
            Some(d) => {
                let mut out = [0.0; 3];
                out[..d.len().min(3)].copy_from_slice(&d[..d.len().min(3)]);
                out
            }
            None => self.u().map(|x| -x),
        }
    }

    pub fn polarization(&self) -> Option<[Complex64; 3]> {
        self.polarization.map(|p| p.map(|[re, im]| Complex64::new(re, im)))
    }

    pub fn oracle_grid(&self) -> born_core::Result<Grid> {
        match &self.oracle_grid {
            Some(g) => g.build(),
            None => {
                let d = self.mode.dim();
                Grid::new(&vec![12.0 / self.alpha(); d], &vec![8; d])
            }
        }
    }

    /// Every violated invariant; empty means runnable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            diag(
                &mut out,
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            );
        }
        let dim = self.mode.dim();
        let grid = match self.grid.build() {
            Ok(g) => {
                if g.dim() != dim {
                    diag(
                        &mut out,
                        "grid",
                        format!("mode {:?} needs a {dim}D grid, got {}D", self.mode, g.dim()),
                    );
                }
                Some(g)
            }
            Err(e) => {
                diag(&mut out, "grid", e.to_string());
                None
            }
        };
        if self.potential.is_empty() {
            diag(&mut out, "potential", "at least one potential is required");
        }
        for (n, p) in self.potential.iter().enumerate() {
            if let Err(e) = p.validate() {
                diag(&mut out, &format!("potential[{n}]"), e.to_string());
            } else if p.dim() != dim {
                diag(
                    &mut out,
                    &format!("potential[{n}]"),
                    format!("{}D potential in a {dim}D mode", p.dim()),
                );
            }
        }
        if out.iter().all(|d| !d.field.starts_with("potential")) && !self.potential.is_empty() {
            if let Err(e) = self.sum() {
                diag(&mut out, "potential", e.to_string());
            }
        }
        let ks = self.k.values();
        if ks.is_empty() {
            diag(&mut out, "k", "the sweep is empty");
        }
        if let KSweep::Range { start, stop, .. } = self.k {
            if stop < start {
                diag(&mut out, "k", "range stop lies below start");
            }
        }
        let nyq = grid
            .as_ref()
            .map(|g| (0..g.dim()).map(|a| g.nyquist(a)).fold(f64::INFINITY, f64::min));
        for (n, &k) in ks.iter().enumerate() {
            if !positive(k) {
                diag(&mut out, &format!("k[{n}]"), format!("wavenumber must be positive, got {k}"));
            } else if let Some(nyq) = nyq {
                if k >= nyq {
                    diag(&mut out, &format!("k[{n}]"), format!("k = {k} is not below the Nyquist momentum {nyq}"));
                }
            }
        }
        if let EpsilonPolicy::Fixed(e) = self.epsilon {
            if !positive(e) {
                diag(&mut out, "epsilon", format!("fixed epsilon must be positive, got {e}"));
            }
        }
        if self.directions == 0 {
            diag(&mut out, "directions", "at least one direction is required");
        }
        let t = &self.tolerances;
        for (name, v) in [("theorem", t.theorem), ("band", t.band), ("support", t.support), ("oracle", t.oracle)] {
            if !positive(v) {
                diag(&mut out, &format!("tolerances.{name}"), format!("must be positive, got {v}"));
            }
        }
        if let Some(d) = &self.incident {
            let l: f64 = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if d.len() != dim {
                diag(&mut out, "incident", format!("expected {dim} components, got {}", d.len()));
            } else if !positive(l) {
                diag(&mut out, "incident", "direction must be nonzero");
            }
        }
        if self.mode == Mode::Em3d {
            if let Some(m) = &self.materials {
                for (n, e) in m.entries.iter().enumerate() {
                    let f = format!("materials.entries[{n}]");
                    if e.i > 2 || e.j > 2 {
                        diag(&mut out, &f, format!("index ({}, {}) out of range", e.i, e.j));
                    }
                    match PotentialSum::new(e.potential.clone()) {
                        Ok(s) if s.dim() != 3 => diag(&mut out, &f, "entries need 3D potentials"),
                        Ok(_) => {}
                        Err(err) => diag(&mut out, &f, err.to_string()),
                    }
                }
            }
        } else {
            if self.materials.is_some() {
                diag(&mut out, "materials", "materials are only used in em3d mode");
            }
            if self.polarization.is_some() {
                diag(&mut out, "polarization", "polarization is only used in em3d mode");
            }
        }
        if let Some(g) = &self.oracle_grid {
            match g.build() {
                Ok(g) if g.dim() != dim => diag(&mut out, "oracle_grid", "dimension differs from the mode"),
                Ok(_) => {}
                Err(e) => diag(&mut out, "oracle_grid", e.to_string()),
            }
        }
        out
    }
}
