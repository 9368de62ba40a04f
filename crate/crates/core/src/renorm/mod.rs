//! Renormalized energy `W(x)` by excision and by the Green representation,
//! and its gradient by two independent formulas.

mod boundary;
mod green;
mod rho;

use std::fmt::Write as _;

pub use green::{grad_w_green, renorm_energy_green, solve_linear_singular_problem, solve_linear_singular_problem_with, GreenData};
pub use rho::{geometric_schedule, renorm_energy_rho_limit};

use crate::laplace::NeumannSolver;
use crate::vortex::{transport_config, CanonicalMap};
use crate::{perp, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyMethod {
    RhoLimit,
    Green,
}

impl EnergyMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            EnergyMethod::RhoLimit => "rho-limit",
            EnergyMethod::Green => "green",
        }
    }
}

/// Terms of the Green representation; they sum to `W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenBreakdown {
    pub pairwise: f64,
    pub boundary: f64,
    pub self_term: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub value: f64,
    pub method: EnergyMethod,
    pub breakdown: Option<GreenBreakdown>,
    /// Fit residual (rho-limit) or Neumann load defect (green).
    pub error_estimate: f64,
    /// `(rho, W_rho)` pairs used by the rho-limit fit.
    pub samples: Vec<(f64, f64)>,
}

impl EnergyReport {
    /// Flat `key = value` block with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method = {}", self.method.tag());
        let _ = writeln!(s, "W = {:.16e}", self.value);
        if let Some(b) = &self.breakdown {
            let _ = writeln!(s, "pairwise = {:.16e}", b.pairwise);
            let _ = writeln!(s, "boundary = {:.16e}", b.boundary);
            let _ = writeln!(s, "self = {:.16e}", b.self_term);
            let _ = writeln!(s, "theta = {:.16e}", b.theta);
        }
        let _ = writeln!(s, "error_estimate = {:.16e}", self.error_estimate);
        for (r, w) in &self.samples {
            let _ = writeln!(s, "W_rho[{:.16e}] = {:.16e}", r, w);
        }
        s
    }
}

/// `4 pi d_j (j u_j(x_j))^perp` for each vortex, flattened.
pub fn grad_w_phase(map: &CanonicalMap) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * map.config.n());
    for (j, d) in map.config.degrees().iter().enumerate() {
        let v = perp(map.regular_current_at_vortex(j)?);
        let s = 2.0 * std::f64::consts::TAU * *d as f64;
        out.push(s * v[0]);
        out.push(s * v[1]);
    }
    Ok(out)
}

/// Green-method `W` at the configuration of `map` moved to `points` on the same mesh.
pub fn green_energy_at(map: &CanonicalMap, points: &[crate::Point], solver: &NeumannSolver) -> Result<f64> {
    let moved = transport_config(map, points)?;
    let green = solve_linear_singular_problem_with(&moved, solver)?;
    Ok(renorm_energy_green(&green)?.value)
}

/// Central differences of the Green-method `W` with step `h` in every coordinate.
pub fn fd_grad_w_green(map: &CanonicalMap, h: f64) -> Result<Vec<f64>> {
    let solver = NeumannSolver::new(map.mesh())?;
    let x0 = map.config.flat();
    let mut out = Vec::with_capacity(x0.len());
    for k in 0..x0.len() {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[k] += h;
        xm[k] -= h;
        let pp = crate::vortex::VortexConfig::points_from_flat(&xp);
        let pm = crate::vortex::VortexConfig::points_from_flat(&xm);
        out.push((green_energy_at(map, &pp, &solver)? - green_energy_at(map, &pm, &solver)?) / (2.0 * h));
    }
    Ok(out)
}
