use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Phase of an S^1-valued loop: `winding * t + offset + sum_k (a_k cos kt + b_k sin kt)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopPhase {
    pub winding: i64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl LoopPhase {
    pub fn pure(winding: i64) -> Self {
        Self { winding, offset: 0.0, cos: Vec::new(), sin: Vec::new() }
    }

    pub fn phase(&self, t: f64) -> f64 {
        let mut s = self.winding as f64 * t + self.offset;
        for (k, a) in self.cos.iter().enumerate() {
            s += a * ((k + 1) as f64 * t).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            s += b * ((k + 1) as f64 * t).sin();
        }
        s
    }

    /// Derivative of the phase with respect to the loop parameter.
    pub fn phase_derivative(&self, t: f64) -> f64 {
        let mut s = self.winding as f64;
        for (k, a) in self.cos.iter().enumerate() {
            let m = (k + 1) as f64;
            s -= a * m * (m * t).sin();
        }
        for (k, b) in self.sin.iter().enumerate() {
            let m = (k + 1) as f64;
            s += b * m * (m * t).cos();
        }
        s
    }

    pub fn value(&self, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.phase(t))
    }

    /// `phase(pi - t) + phase(t)` is constant.
    pub fn is_mirror_symmetric(&self) -> bool {
        let even_cos = self.cos.iter().enumerate().all(|(k, a)| (k + 1) % 2 == 1 || *a == 0.0);
        let odd_sin = self.sin.iter().enumerate().all(|(k, b)| (k + 1) % 2 == 0 || *b == 0.0);
        even_cos && odd_sin
    }
}

/// Boundary datum `g`, one phase per boundary loop (loop 0 outer).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDatum {
    pub loops: Vec<LoopPhase>,
}

impl BoundaryDatum {
    pub fn new(loops: Vec<LoopPhase>) -> Self {
        Self { loops }
    }

    /// `g = e^{i w t}` on a simply connected domain.
    pub fn uniform(winding: i64) -> Self {
        Self { loops: vec![LoopPhase::pure(winding)] }
    }

    pub fn value(&self, l: usize, t: f64) -> Complex64 {
        self.loops[l].value(t)
    }

    pub fn phase(&self, l: usize, t: f64) -> f64 {
        self.loops[l].phase(t)
    }

    pub fn winding(&self, l: usize) -> i64 {
        self.loops[l].winding
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        self.loops.iter().all(LoopPhase::is_mirror_symmetric)
    }

    /// Every loop is `e^{i(w t + c)}`, so a rotation only shifts the phase by a constant.
    pub fn is_rotation_equivariant(&self) -> bool {
        self.loops.iter().all(|l| l.cos.iter().chain(&l.sin).all(|c| *c == 0.0))
    }
}
