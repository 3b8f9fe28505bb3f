//! Subcommand bodies. Each writes its artifacts atomically into the output
//! directory and returns what it wrote along with an overall status.

use crate::config::{EpsilonPolicy, Mode, RunConfig};
use born_core::em_born::{
    em_born_series, em_theorem_report, em_verify_bands, material_from_scalar, Block, MaterialTensors,
    Six,
};
use born_core::gridfft::{forward_ft, nudft, Grid, SampledField, Space};
use born_core::io::{em_on_shell_csv, fmt_f64, load_field, on_shell_csv, save_field, write_atomic};
use born_core::oracle::{quad_second_order, quad_second_order_em, slow_dft};
use born_core::potentials::{sample_potential, verify_support, PotentialSum, SupportReport};
use born_core::scalar_born::{
    born_series, green_g, theorem_report, verify_lower_band, verify_gap_band, BandReport, ScatterConfig,
    TheoremReport,
};
use born_core::{Complex64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Diverged,
}

impl Status {
    fn worst(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (Diverged, _) | (_, Diverged) => Diverged,
            (Fail, _) | (_, Fail) => Fail,
            _ => Pass,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
    /// One human-readable line per sweep point or check.
    pub lines: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<crate::config::Diagnostic>),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    fn config(field: &str, message: impl Into<String>) -> Self {
        RunError::Config(vec![crate::config::Diagnostic {
            field: field.into(),
            message: message.into(),
        }])
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> RunResult<Self> {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> RunResult<()> {
        let path = self.dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> RunResult<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    fn field(&mut self, name: &str, f: &SampledField) -> RunResult<()> {
        let path = self.dir.join(name);
        save_field(&path, f)?;
        self.files.push(path);
        Ok(())
    }
}

enum Interaction {
    Scalar(SampledField),
    Em(MaterialTensors),
}

/// Sampled fields of one configuration, named as they are stored on disk.
struct Sampled {
    fields: Vec<(String, SampledField)>,
    warnings: Vec<String>,
}

fn entry_name(block: Block, i: usize, j: usize) -> String {
    let b = match block {
        Block::Epsilon => "eps",
        Block::Mu => "mu",
    };
    format!("{b}_{i}{j}.field")
}

fn sample_all(cfg: &RunConfig) -> RunResult<Sampled> {
    let grid = cfg.grid.build()?;
    let sum = cfg.sum()?;
    let s = sample_potential(&sum, &grid, cfg.sampling)?;
    let mut fields = vec![("potential.field".to_string(), s.field)];
    let mut warnings = s.warnings;
    if cfg.mode == Mode::Em3d {
        for e in cfg.materials.iter().flat_map(|m| &m.entries) {
            let p = sample_potential(&PotentialSum::new(e.potential.clone())?, &grid, cfg.sampling)?;
            warnings.extend(p.warnings);
            fields.push((entry_name(e.block, e.i, e.j), p.field.scaled(e.scale)));
        }
    }
    Ok(Sampled { fields, warnings })
}

fn load_all(cfg: &RunConfig, dir: &Path) -> RunResult<Sampled> {
    let mut names = vec!["potential.field".to_string()];
    if cfg.mode == Mode::Em3d {
        names.extend(cfg.materials.iter().flat_map(|m| &m.entries).map(|e| entry_name(e.block, e.i, e.j)));
    }
    let grid = cfg.grid.build()?;
    let mut fields = Vec::new();
    for n in names {
        let f = load_field(&dir.join(&n))?;
        if f.grid() != &grid || f.space() != Space::Position {
            return Err(RunError::config("grid", format!("stored {n} does not match the configured grid")));
        }
        fields.push((n, f));
    }
    Ok(Sampled {
        fields,
        warnings: Vec::new(),
    })
}

fn interaction(cfg: &RunConfig, sampled: &Sampled) -> RunResult<Interaction> {
    let v = &sampled.fields[0].1;
    if cfg.mode != Mode::Em3d {
        return Ok(Interaction::Scalar(v.clone()));
    }
    let spec = cfg.materials.clone().unwrap_or_default();
    let mut mat = match spec.isotropic {
        Some(kind) => material_from_scalar(v, kind, spec.scale)?,
        None => MaterialTensors::zero(v.grid())?,
    };
    for (e, (_, f)) in spec.entries.iter().zip(&sampled.fields[1..]) {
        let present = match e.block {
            Block::Epsilon => mat.eps.entry(e.i, e.j),
            Block::Mu => mat.mu.entry(e.i, e.j),
        };
        let total = match present {
            Some(old) => {
                let vals = old.iter().zip(f.values()).map(|(a, b)| a + b).collect();
                SampledField::new(f.grid().clone(), Space::Position, vals)?
            }
            None => f.clone(),
        };
        mat.set_entry(e.block, e.i, e.j, &total)?;
    }
    Ok(Interaction::Em(mat))
}

#[derive(Serialize)]
struct SupportEntry {
    field: String,
    report: SupportReport,
}

#[derive(Serialize)]
struct SupportFile {
    pass: bool,
    entries: Vec<SupportEntry>,
    warnings: Vec<String>,
}

fn support(cfg: &RunConfig, sampled: &Sampled, inter: &Interaction) -> RunResult<SupportFile> {
    let (u, alpha, tol) = (cfg.u(), cfg.alpha(), cfg.tolerances.support);
    let entries = match inter {
        Interaction::Scalar(v) => vec![SupportEntry {
            field: "potential".into(),
            report: verify_support(v, &u, alpha, tol)?,
        }],
        Interaction::Em(mat) => mat
            .verify_support(&u, alpha, tol)?
            .into_iter()
            .map(|(b, i, j, report)| SupportEntry {
                field: entry_name(b, i, j).trim_end_matches(".field").to_string(),
                report,
            })
            .collect(),
    };
    let mut warnings = sampled.warnings.clone();
    if let Interaction::Em(mat) = inter {
        warnings.extend(mat.warnings());
    }
    Ok(SupportFile {
        pass: entries.iter().all(|e| e.report.pass),
        entries,
        warnings,
    })
}

fn prepare(cfg: &RunConfig) -> RunResult<()> {
    let diags = cfg.validate();
    if diags.is_empty() {
        Ok(())
    } else {
        Err(RunError::Config(diags))
    }
}

/// Samples the interaction, stores it and certifies its support.
pub fn make_potential(cfg: &RunConfig) -> RunResult<Outcome> {
    prepare(cfg)?;
    let sampled = sample_all(cfg)?;
    let inter = interaction(cfg, &sampled)?;
    let sup = support(cfg, &sampled, &inter)?;
    let mut w = Writer::new(&cfg.output_dir)?;
    for (name, f) in &sampled.fields {
        w.field(name, f)?;
    }
    w.json("support.json", &sup)?;
    let status = if sup.pass { Status::Pass } else { Status::Fail };
    let lines = sup
        .entries
        .iter()
        .map(|e| format!("support {}: ratio {:.3e} ({})", e.field, e.report.ratio, verdict(e.report.pass)))
        .collect();
    Ok(Outcome {
        status,
        files: w.files,
        lines,
    })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn scatter_config(cfg: &RunConfig, grid: &Grid, k: f64) -> RunResult<ScatterConfig> {
    let mut c = ScatterConfig::new(grid, k, &cfg.incident(), &cfg.u(), cfg.alpha())?
        .with_direction_count(cfg.directions)?
        .with_dealias(cfg.dealias);
    if let EpsilonPolicy::Fixed(e) = cfg.epsilon {
        c = c.with_epsilon(e)?;
    }
    if let Some(n) = cfg.n_max {
        c = c.with_n_max(n);
    }
    Ok(c)
}

#[derive(Serialize)]
struct PointReport {
    index: usize,
    k_requested: f64,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem: Option<TheoremReport>,
    lower_band: Vec<BandReport>,
    gap_band: Vec<BandReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diverged_at: Option<usize>,
}

#[derive(Serialize)]
struct Markers {
    half_alpha: f64,
    alpha: f64,
}

#[derive(Serialize)]
struct PointSummary {
    index: usize,
    k_requested: f64,
    k: f64,
    n_exact: usize,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    diverged_at: Option<usize>,
    /// On-shell ratio per order, orders `1..`.
    ratios: Vec<f64>,
}

#[derive(Serialize)]
struct Summary {
    mode: Mode,
    alpha: f64,
    markers: Markers,
    support_pass: bool,
    status: Status,
    points: Vec<PointSummary>,
}

pub const SUMMARY_HEADER: &str =
    "k_requested,k,n_exact,order,must_vanish,on_shell_ratio,shell_verdict,lower_band_ratio,gap_band_ratio,band_verdict";

/// Full pipeline: sample, certify, iterate every sweep point, report.
pub fn run(cfg: &RunConfig) -> RunResult<Outcome> {
    prepare(cfg)?;
    let sampled = sample_all(cfg)?;
    sweep(cfg, &sampled, true)
}

/// Reports from fields previously stored by `make_potential`.
pub fn verify(cfg: &RunConfig) -> RunResult<Outcome> {
    prepare(cfg)?;
    let sampled = load_all(cfg, &cfg.output_dir)?;
    sweep(cfg, &sampled, false)
}

fn sweep(cfg: &RunConfig, sampled: &Sampled, emit_records: bool) -> RunResult<Outcome> {
    let grid = cfg.grid.build()?;
    let inter = interaction(cfg, sampled)?;
    let sup = support(cfg, sampled, &inter)?;
    let mut w = Writer::new(&cfg.output_dir)?;
    w.json("support.json", &sup)?;
    let mut status = if sup.pass { Status::Pass } else { Status::Fail };
    let mut lines = vec![format!("support: {}", verdict(sup.pass))];
    let mut points = Vec::new();
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    let t = cfg.tolerances;
    for (index, k) in cfg.k.values().into_iter().enumerate() {
        let sc = scatter_config(cfg, &grid, k)?;
        let result = match &inter {
            Interaction::Scalar(v) => born_series(&sc, v).map(|s| {
                let rec = emit_records.then(|| on_shell_csv(&s.on_shell));
                (theorem_report(&s, t.theorem), verify_lower_band(&s, t.band), verify_gap_band(&s, t.band), rec)
            }),
            Interaction::Em(mat) => em_born_series(&sc, mat, cfg.polarization()).map(|s| {
                let rec = emit_records.then(|| em_on_shell_csv(&s.on_shell));
                let (l2, l4) = em_verify_bands(&s, t.band);
                (em_theorem_report(&s, t.theorem), l2, l4, rec)
            }),
        };
        let report = match result {
            Ok((theorem, lower_band, gap_band, rec)) => {
                if let Some(rec) = rec {
                    w.text(&format!("k{index:03}_onshell.csv"), &rec)?;
                }
                let bands_ok = lower_band.iter().chain(&gap_band).all(|b| b.pass);
                let st = if theorem.pass && bands_ok { Status::Pass } else { Status::Fail };
                for (o, (b2, b4)) in theorem.orders.iter().zip(lower_band.iter().zip(&gap_band)) {
                    let shell = match o.pass {
                        Some(p) => verdict(p),
                        None => "n/a",
                    };
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{},{},{}",
                        fmt_f64(k),
                        fmt_f64(theorem.k),
                        theorem.n_exact,
                        o.order,
                        o.must_vanish,
                        fmt_f64(o.ratio),
                        shell,
                        fmt_f64(b2.max_ratio),
                        fmt_f64(b4.max_ratio),
                        verdict(b2.pass && b4.pass)
                    );
                }
                let ratios: Vec<String> = theorem.orders.iter().map(|o| format!("{:.2e}", o.ratio)).collect();
                lines.push(format!(
                    "k = {k} (snapped {:.6}), N = {}: {} [{}]",
                    theorem.k,
                    theorem.n_exact,
                    verdict(st == Status::Pass),
                    ratios.join(", ")
                ));
                points.push(PointSummary {
                    index,
                    k_requested: k,
                    k: theorem.k,
                    n_exact: theorem.n_exact,
                    status: st,
                    diverged_at: None,
                    ratios: theorem.orders.iter().map(|o| o.ratio).collect(),
                });
                PointReport {
                    index,
                    k_requested: k,
                    status: st,
                    theorem: Some(theorem),
                    lower_band,
                    gap_band,
                    diverged_at: None,
                }
            }
            Err(Error::Divergence { order, growth }) => {
                lines.push(format!("k = {k}: series diverged at order {order} (growth {growth:.3e})"));
                points.push(PointSummary {
                    index,
                    k_requested: k,
                    k: sc.k(),
                    n_exact: sc.exactness_order(),
                    status: Status::Diverged,
                    diverged_at: Some(order),
                    ratios: Vec::new(),
                });
                PointReport {
                    index,
                    k_requested: k,
                    status: Status::Diverged,
                    theorem: None,
                    lower_band: Vec::new(),
                    gap_band: Vec::new(),
                    diverged_at: Some(order),
                }
            }
            Err(e) => return Err(e.into()),
        };
        status = status.worst(report.status);
        w.json(&format!("k{index:03}_report.json"), &report)?;
    }
    let alpha = cfg.alpha();
    w.text("summary.csv", &csv)?;
    w.text(
        "markers.csv",
        &format!("marker,k\nhalf_alpha,{}\nalpha,{}\n", fmt_f64(0.5 * alpha), fmt_f64(alpha)),
    )?;
    w.json(
        "summary.json",
        &Summary {
            mode: cfg.mode,
            alpha,
            markers: Markers {
                half_alpha: 0.5 * alpha,
                alpha,
            },
            support_pass: sup.pass,
            status,
            points,
        },
    )?;
    Ok(Outcome {
        status,
        files: w.files,
        lines,
    })
}

/// Number of momentum nodes compared against the quadrature oracle.
pub const ORACLE_POINTS: usize = 5;
/// Agreement required between the direct sum and the separable transform.
pub const SLOW_DFT_TOL: f64 = 1e-12;

#[derive(Serialize)]
struct OraclePoint {
    p: [f64; 3],
    pipeline: Vec<[f64; 2]>,
    oracle: Vec<[f64; 2]>,
    rel_err: f64,
}

#[derive(Serialize)]
struct OracleCase {
    k_requested: f64,
    k: f64,
    epsilon: f64,
    points: Vec<OraclePoint>,
    max_rel_err: f64,
    pass: bool,
}

#[derive(Serialize)]
struct OracleFile {
    grid: Grid,
    seed: u64,
    tol: f64,
    slow_dft_rel_err: f64,
    slow_dft_pass: bool,
    cases: Vec<OracleCase>,
    pass: bool,
}

fn pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Second-order pipeline values against the nested quadrature on a small
/// grid, plus the direct-sum check of the off-grid transform.
pub fn oracle(cfg: &RunConfig, seed: u64) -> RunResult<Outcome> {
    prepare(cfg)?;
    let grid = cfg.oracle_grid()?;
    if let Some(n) = grid.counts().iter().find(|&&n| n > born_core::oracle::QUAD_MAX_COUNT) {
        return Err(RunError::config(
            "oracle_grid",
            format!("{n} nodes per axis exceed the oracle limit of {}", born_core::oracle::QUAD_MAX_COUNT),
        ));
    }
    let mut small = cfg.clone();
    small.grid = crate::config::GridSpec {
        extents: grid.extents().to_vec(),
        counts: grid.counts().to_vec(),
    };
    let sampled = sample_all(&small)?;
    let inter = interaction(&small, &sampled)?;
    let v = &sampled.fields[0].1;
    let tol = cfg.tolerances.oracle;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let nyq: Vec<f64> = (0..grid.dim()).map(|a| grid.nyquist(a)).collect();
    let off: Vec<[f64; 3]> = (0..ORACLE_POINTS)
        .map(|_| std::array::from_fn(|a| if a < grid.dim() { rng.gen_range(-1.0..1.0) * nyq[a] } else { 0.0 }))
        .collect();
    // a random field exercises every node, which a thin sampled slab may not
    let noise: Vec<Complex64> = (0..grid.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let noise = SampledField::new(grid.clone(), Space::Position, noise)?;
    let mut slow_dft_rel_err: f64 = 0.0;
    for f in [v, &noise] {
        let fast = nudft(f, &off)?;
        let slow = slow_dft(f, &off)?;
        let scale = slow.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale > 0.0 {
            slow_dft_rel_err = slow_dft_rel_err.max(diff_norm(&fast, &slow) / scale);
        }
    }
    let slow_dft_pass = slow_dft_rel_err <= SLOW_DFT_TOL;
    let mut lines = vec![format!("slow_dft vs nudft: {slow_dft_rel_err:.3e} ({})", verdict(slow_dft_pass))];

    let mut cases = Vec::new();
    for k in cfg.k.values() {
        let nyq_min = nyq.iter().copied().fold(f64::INFINITY, f64::min);
        if k >= nyq_min {
            return Err(RunError::config(
                "oracle_grid",
                format!("k = {k} is not below the oracle grid Nyquist momentum {nyq_min}"),
            ));
        }
        let mut sc = scatter_config(&small, &grid, k)?.with_n_max(2).with_dealias(false);
        sc.direction_count = 1;
        let nodes: Vec<usize> = (0..ORACLE_POINTS).map(|_| rng.gen_range(0..grid.len())).collect();
        let mut points = Vec::new();
        match &inter {
            Interaction::Scalar(v) => {
                let s = born_series(&sc, v)?;
                let ft = forward_ft(&s.terms[2].b)?;
                let scale = ft.max_abs();
                for &i in &nodes {
                    let p = grid.node_momentum(i);
                    let q = quad_second_order(v, &sc.k_vec, &p, sc.epsilon)?;
                    let a = [ft.values()[i]];
                    let b = [q.value];
                    points.push(OraclePoint {
                        p,
                        pipeline: pairs(&a),
                        oracle: pairs(&b),
                        rel_err: if scale > 0.0 { diff_norm(&a, &b) / scale } else { 0.0 },
                    });
                }
            }
            Interaction::Em(mat) => {
                let s = em_born_series(&sc, mat, cfg.polarization())?;
                let m = s.terms[2].m.as_ref().expect("order 2 has a numerator");
                let k_snap = sc.k();
                let g = |p: &[f64; 3]| green_g(p[0] * p[0] + p[1] * p[1] + p[2] * p[2], k_snap, sc.epsilon);
                let scale = (0..grid.len())
                    .map(|i| born_core::em_born::six_norm(&m.at(i)) * g(&grid.node_momentum(i)).norm())
                    .fold(0.0, f64::max);
                for &i in &nodes {
                    let p = grid.node_momentum(i);
                    let a: Six = m.at(i).map(|z| z * g(&p));
                    let b = quad_second_order_em(mat, &s.psi0, &sc.k_vec, &p, sc.epsilon)?;
                    points.push(OraclePoint {
                        p,
                        pipeline: pairs(&a),
                        oracle: pairs(&b),
                        rel_err: if scale > 0.0 { diff_norm(&a, &b) / scale } else { 0.0 },
                    });
                }
            }
        }
        let max_rel_err = points.iter().map(|p| p.rel_err).fold(0.0, f64::max);
        let pass = max_rel_err <= tol;
        lines.push(format!("k = {k}: order-2 oracle error {max_rel_err:.3e} ({})", verdict(pass)));
        cases.push(OracleCase {
            k_requested: k,
            k: sc.k(),
            epsilon: sc.epsilon,
            points,
            max_rel_err,
            pass,
        });
    }
    let pass = slow_dft_pass && cases.iter().all(|c| c.pass);
    let mut w = Writer::new(&cfg.output_dir)?;
    w.json(
        "oracle.json",
        &OracleFile {
            grid,
            seed,
            tol,
            slow_dft_rel_err,
            slow_dft_pass,
            cases,
            pass,
        },
    )?;
    Ok(Outcome {
        status: if pass { Status::Pass } else { Status::Fail },
        files: w.files,
        lines,
    })
}
