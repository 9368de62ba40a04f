use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryDatum, Domain, DomainKind, MeshOptions};
use crate::pharmonic::SolverParams;
use crate::stationary::{ContinuationOptions, Problem, StationaryOptions};
use crate::vortex::{check_compatibility, VortexConfig};
use crate::{Error, Point, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSpec {
    pub x: f64,
    pub y: f64,
    pub d: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub h_far: f64,
    /// Defaults to `h_far / 20`.
    pub h_near: Option<f64>,
    pub grading: f64,
    pub min_angle_deg: f64,
    pub mirror: bool,
}

impl Default for MeshSpec {
    fn default() -> Self {
        let o = MeshOptions::new(0.1);
        Self { h_far: o.h_far, h_near: None, grading: o.grading, min_angle_deg: o.min_angle_deg, mirror: false }
    }
}

impl MeshSpec {
    pub fn options(&self) -> MeshOptions {
        MeshOptions {
            h_far: self.h_far,
            h_near: self.h_near.unwrap_or(self.h_far / 20.0),
            grading: self.grading,
            min_angle_deg: self.min_angle_deg,
            mirror: self.mirror,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub eps_schedule: Vec<f64>,
    pub eps_ratio: f64,
    pub eps_min_rel: f64,
    pub max_iter: usize,
    pub energy_tol: f64,
    pub residual_tol: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverParams::default();
        Self {
            eps_schedule: d.eps_schedule,
            eps_ratio: d.eps_ratio,
            eps_min_rel: d.eps_min_rel,
            max_iter: d.max_iter,
            energy_tol: d.energy_tol,
            residual_tol: d.residual_tol,
        }
    }
}

impl SolverSpec {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            eps_schedule: self.eps_schedule.clone(),
            eps_ratio: self.eps_ratio,
            eps_min_rel: self.eps_min_rel,
            max_iter: self.max_iter,
            energy_tol: self.energy_tol,
            residual_tol: self.residual_tol,
            ..SolverParams::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormSpec {
    /// Largest excision radius relative to the clearance.
    pub rho_max_rel: f64,
    pub rho_ratio: f64,
    pub rho_count: usize,
    /// Finite-difference step relative to the clearance.
    pub fd_rel: f64,
    /// Side of the translation grid for the `W` table; 0 disables it.
    pub grid_k: usize,
    pub grid_radius: f64,
}

impl Default for RenormSpec {
    fn default() -> Self {
        Self { rho_max_rel: 0.4, rho_ratio: 0.7, rho_count: 5, fd_rel: 0.01, grid_k: 0, grid_radius: 0.05 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StressSpec {
    /// Cutoff radii; empty means a quarter of the clearance.
    pub deltas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub k: usize,
    pub radius: f64,
    pub delta: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { k: 3, radius: 0.1, delta: 0.15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarySpec {
    pub certify: bool,
    pub degree_samples: usize,
    pub trust_rel: f64,
    pub stress_rel: f64,
    pub root_rel: f64,
    pub min_conditioning: f64,
}

impl Default for StationarySpec {
    fn default() -> Self {
        let o = ContinuationOptions::default();
        Self {
            certify: o.certify,
            degree_samples: o.degree_samples,
            trust_rel: o.stationary.trust_rel,
            stress_rel: o.stationary.stress_rel,
            root_rel: o.stationary.root_rel,
            min_conditioning: o.min_conditioning,
        }
    }
}

impl StationarySpec {
    pub fn options(&self) -> ContinuationOptions {
        let d = ContinuationOptions::default();
        ContinuationOptions {
            certify: self.certify,
            degree_samples: self.degree_samples,
            min_conditioning: self.min_conditioning,
            stationary: StationaryOptions {
                trust_rel: self.trust_rel,
                stress_rel: self.stress_rel,
                root_rel: self.root_rel,
                ..d.stationary
            },
            ..d
        }
    }
}

fn default_p_schedule() -> Vec<f64> {
    vec![1.9, 1.95, 1.975]
}

fn default_output_dir() -> String {
    "out".into()
}

/// Everything one experiment needs; JSON on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    pub datum: BoundaryDatum,
    pub vortices: Vec<VortexSpec>,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default = "default_p_schedule")]
    pub p_schedule: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub renorm: RenormSpec,
    #[serde(default)]
    pub stress: StressSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub stationary: StationarySpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,
}

/// Validated pieces of a config.
pub struct Resolved {
    pub domain: Domain,
    pub config: VortexConfig,
    pub problem: Problem,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn points(&self) -> Vec<Point> {
        self.vortices.iter().map(|v| [v.x, v.y]).collect()
    }

    pub fn degrees(&self) -> Vec<i64> {
        self.vortices.iter().map(|v| v.d).collect()
    }

    /// Copy with every optional value made explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.mesh.h_near = Some(self.mesh.options().h_near);
        c
    }

    /// Checks every value before anything is solved.
    pub fn validate(&self) -> Result<Resolved> {
        let domain = Domain::from_kind(self.domain.clone())?;
        if self.datum.loops.len() != domain.n_components() {
            return Err(Error::InvalidConfig(format!(
                "datum has {} loops but the domain has {} boundary components",
                self.datum.loops.len(),
                domain.n_components()
            )));
        }
        let bad = |v: f64| !v.is_finite();
        for (l, lp) in self.datum.loops.iter().enumerate() {
            if bad(lp.offset) || lp.cos.iter().chain(&lp.sin).any(|v| bad(*v)) {
                return Err(Error::InvalidConfig(format!("datum loop {l} has a non-finite coefficient")));
            }
        }
        if self.vortices.is_empty() {
            return Err(Error::InvalidConfig("no vortices".into()));
        }
        let config = VortexConfig::new(&domain, self.points(), self.degrees())?;
        check_compatibility(&domain, &self.datum, &config).into_result()?;
        let mesh = self.mesh.options();
        if !(mesh.h_near > 0.0 && mesh.h_near <= mesh.h_far && mesh.h_far.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mesh sizes must satisfy 0 < h_near <= h_far (got {} and {})",
                mesh.h_near, mesh.h_far
            )));
        }
        if !(mesh.grading > 0.0 && mesh.min_angle_deg > 0.0 && mesh.min_angle_deg < 30.0) {
            return Err(Error::InvalidConfig("mesh grading must be positive and the minimum angle in (0, 30)".into()));
        }
        if self.p_schedule.is_empty() {
            return Err(Error::InvalidConfig("empty exponent schedule".into()));
        }
        if let Some(p) = self.p_schedule.iter().find(|p| !(**p > 1.0 && **p < 2.0)) {
            return Err(Error::BadExponent(*p));
        }
        if self.p_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("exponent schedule must be strictly increasing".into()));
        }
        let solver = self.solver.params();
        solver.validate()?;
        let r = &self.renorm;
        if !(r.rho_max_rel > 0.0 && r.rho_max_rel < 0.5 && r.rho_ratio > 0.0 && r.rho_ratio < 1.0 && r.rho_count >= 3) {
            return Err(Error::InvalidConfig("renorm needs 0 < rho_max_rel < 0.5, 0 < rho_ratio < 1 and rho_count >= 3".into()));
        }
        if !(r.fd_rel > 0.0 && r.fd_rel < 0.5 && r.grid_radius >= 0.0) {
            return Err(Error::InvalidConfig("renorm needs 0 < fd_rel < 0.5 and grid_radius >= 0".into()));
        }
        let half = 0.5 * config.clearance();
        if let Some(d) = self.stress.deltas.iter().find(|d| !(**d > 0.0 && **d < half)) {
            return Err(Error::BadRadius(format!("cutoff radius {d} not in (0, {half})")));
        }
        let s = &self.sweep;
        if s.k == 0 || !(s.radius >= 0.0) || !(s.delta > 0.0) {
            return Err(Error::InvalidConfig("sweep needs k >= 1, radius >= 0 and delta > 0".into()));
        }
        let st = &self.stationary;
        if st.degree_samples < 4 || !(st.trust_rel > 0.0 && st.stress_rel > 0.0 && st.root_rel > 0.0) {
            return Err(Error::InvalidConfig("stationary needs degree_samples >= 4 and positive relative radii".into()));
        }
        let problem = Problem { domain: domain.clone(), datum: self.datum.clone(), degrees: self.degrees(), mesh, solver };
        Ok(Resolved { domain, config, problem })
    }
}
