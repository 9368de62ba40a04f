use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::{Error, Result};

/// Winding number of a sampled closed loop and the rounding residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Winding {
    pub value: i64,
    pub residual: f64,
}

/// Angle in `(-pi, pi]`.
pub fn principal_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Continuous lift of S^1-valued samples, starting in `(-pi, pi]`.
pub fn unwrap_phase(samples: &[Complex64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.len());
    let Some(first) = samples.first() else {
        return Ok(out);
    };
    let mut acc = principal_angle(first.arg());
    out.push(acc);
    for (k, w) in samples.windows(2).enumerate() {
        let step = (w[1] * w[0].conj()).arg();
        if step.abs() >= PI {
            return Err(Error::AmbiguousLift { index: k + 1, gap: step.abs() });
        }
        acc += step;
        out.push(acc);
    }
    Ok(out)
}

/// Winding number of the closed loop through `samples` (last joined to first).
pub fn winding_of_loop(samples: &[Complex64]) -> Result<Winding> {
    if samples.is_empty() {
        return Ok(Winding { value: 0, residual: 0.0 });
    }
    let n = samples.len();
    let mut total = 0.0;
    for k in 0..n {
        let (a, b) = (samples[k], samples[(k + 1) % n]);
        let step = (b * a.conj()).arg();
        if step.abs() >= PI {
            return Err(Error::AmbiguousLift { index: (k + 1) % n, gap: step.abs() });
        }
        total += step;
    }
    let w = total / TAU;
    let value = w.round();
    Ok(Winding { value: value as i64, residual: (w - value).abs() })
}
