//! Born-series engine for scattering interactions whose Fourier transform
//! vanishes on a half-space of momentum.
//!
//! For an interaction with `ṽ(p) = 0` whenever `u·p < α`, every Born term of
//! order `n > ⌊2k/α⌋` vanishes on the energy shell `|p| = k`, so the series
//! truncated at `N = ⌊2k/α⌋` is exact; below `k = α/2` nothing scatters at
//! all. This crate builds such interactions, runs the scalar (2D/3D) and
//! six-component electromagnetic (3D) Born series on uniform grids, and turns
//! the vanishing statements into numerical checks.
//!
//! Modules:
//!
//! * [`gridfft`]: grids, continuum-normalized transforms, direct
//!   non-uniform evaluation and on-shell direction sets.
//! * [`potentials`]: the analytic family with half-space spectral support.
//! * [`scalar_born`]: scalar Born series, on-shell numerators and the
//!   support/band/shell verifications.
//! * [`oracle`]: slow independent references for the fast pipeline.
//! * [`em_born`]: the electromagnetic engine.
//! * [`io`]: binary field exchange and CSV record formats.

pub mod em_born;
mod error;
pub mod gridfft;
pub mod io;
pub mod oracle;
pub mod potentials;
pub mod scalar_born;
pub mod special;

pub use error::{Error, Result};
pub use gridfft::{Grid, SampledField, Space};
pub use num_complex::Complex64;

/// Three-component real vector; the third entry is zero on 2D grids.
pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn max_abs(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Serde adapter storing a complex number as `{"re": .., "im": ..}`.
pub mod complex_reim {
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
        let v = ReIm::deserialize(d)?;
        Ok(Complex64::new(v.re, v.im))
    }
}
