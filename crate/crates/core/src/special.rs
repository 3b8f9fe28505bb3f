//! Sine integral, used for band-limited sampling of hard-edged profiles.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

const SERIES_LIMIT: f64 = 2.0;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 200;

/// `Si(x) = ∫₀ˣ sin(t)/t dt`.
///
/// Power series below |x| = 2, Lentz continued fraction for `E₁(ix)` above.
pub fn sine_integral(x: f64) -> f64 {
    let t = x.abs();
    let value = if t == 0.0 {
        0.0
    } else if t < SERIES_LIMIT {
        series(t)
    } else {
        continued_fraction(t)
    };
    if x < 0.0 {
        -value
    } else {
        value
    }
}

fn series(t: f64) -> f64 {
    // Si(t) = Σ (-1)^k t^(2k+1) / ((2k+1) (2k+1)!)
    let mut sum = 0.0;
    let mut fact_term = t; // t^(2k+1) / (2k+1)!
    for k in 0..MAX_ITER {
        let n = (2 * k + 1) as f64;
        let term = fact_term / n;
        sum += term;
        if term.abs() < EPS * sum.abs() {
            break;
        }
        fact_term *= -t * t / ((n + 1.0) * (n + 2.0));
    }
    sum
}

fn continued_fraction(t: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, t);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 2..MAX_ITER {
        let a = -(((i - 1) * (i - 1)) as f64);
        b += Complex64::new(2.0, 0.0);
        d = Complex64::new(1.0, 0.0) / (d * a + b);
        c = b + Complex64::new(a, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < EPS {
            break;
        }
    }
    h *= Complex64::new(t.cos(), -t.sin());
    // Ci(t) + i Si(t) = -conj(h) + iπ/2
    let cs = -h.conj() + Complex64::new(0.0, FRAC_PI_2);
    cs.im
}
