use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryDatum, Domain};
use crate::{dist, sub, Error, Point, Result};

/// Vortex positions `x_j` with integer degrees `d_j` (possibly none, for smooth maps).
#[derive(Clone, Debug, PartialEq)]
pub struct VortexConfig {
    points: Vec<Point>,
    degrees: Vec<i64>,
    min_separation: f64,
    boundary_distance: f64,
}

impl VortexConfig {
    pub fn new(domain: &Domain, points: Vec<Point>, degrees: Vec<i64>) -> Result<Self> {
        if points.len() != degrees.len() {
            return Err(Error::InvalidConfig(format!(
                "{} vortex points but {} degrees",
                points.len(),
                degrees.len()
            )));
        }
        if let Some(j) = degrees.iter().position(|d| *d == 0) {
            return Err(Error::InvalidConfig(format!("vortex {j} has degree 0")));
        }
        let mut boundary_distance = f64::INFINITY;
        for (j, x) in points.iter().enumerate() {
            if !x[0].is_finite() || !x[1].is_finite() || !domain.contains(*x) {
                return Err(Error::InvalidConfig(format!("vortex {j} at ({}, {}) is outside the domain", x[0], x[1])));
            }
            boundary_distance = boundary_distance.min(domain.distance_to_boundary(*x));
        }
        let mut min_separation = f64::INFINITY;
        for i in 0..points.len() {
            for k in i + 1..points.len() {
                let d = dist(points[i], points[k]);
                if d < 1e-12 {
                    return Err(Error::InvalidConfig(format!("vortices {i} and {k} coincide")));
                }
                min_separation = min_separation.min(d);
            }
        }
        Ok(Self { points, degrees, min_separation, boundary_distance })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    /// Minimal pairwise distance (infinite for a single vortex).
    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    pub fn boundary_distance(&self) -> f64 {
        self.boundary_distance
    }

    /// `min(pairwise distance, distance to the boundary)`.
    pub fn clearance(&self) -> f64 {
        self.min_separation.min(self.boundary_distance)
    }

    /// Same degrees at new positions.
    pub fn moved(&self, domain: &Domain, points: Vec<Point>) -> Result<Self> {
        Self::new(domain, points, self.degrees.clone())
    }

    /// Coordinates `(x_1, y_1, x_2, y_2, ...)`.
    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    pub fn points_from_flat(x: &[f64]) -> Vec<Point> {
        x.chunks(2).map(|c| [c[0], c[1]]).collect()
    }
}

/// Both sides of the degree balance `deg(g|outer) = sum d_j + sum deg(g|inner)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub outer: i64,
    pub vortices: i64,
    pub inner: Vec<i64>,
    pub compatible: bool,
}

impl CompatibilityReport {
    pub fn into_result(self) -> Result<Self> {
        if self.compatible {
            Ok(self)
        } else {
            Err(Error::IncompatibleDegrees {
                outer: self.outer,
                vortices: self.vortices,
                inner: self.inner.iter().sum(),
            })
        }
    }
}

pub fn check_compatibility(domain: &Domain, g: &BoundaryDatum, config: &VortexConfig) -> CompatibilityReport {
    let outer = g.winding(0);
    let inner: Vec<i64> = (1..domain.n_components()).map(|l| g.winding(l)).collect();
    let vortices = config.degrees.iter().sum();
    let compatible = g.loops.len() == domain.n_components() && outer == vortices + inner.iter().sum::<i64>();
    CompatibilityReport { outer, vortices, inner, compatible }
}

/// `sum_j d_j (p - x_j)^perp / |p - x_j|^2`.
pub fn singular_current(config: &VortexConfig, p: Point) -> Result<Point> {
    if config.points.iter().any(|x| dist(*x, p) < 1e-12) {
        return Err(Error::SingularPoint(p[0], p[1]));
    }
    Ok(point_sources(config.points.iter().copied().zip(config.degrees.iter().copied()), p))
}

pub(crate) fn point_sources(sources: impl Iterator<Item = (Point, i64)>, p: Point) -> Point {
    let mut out = [0.0, 0.0];
    for (x, d) in sources {
        let h = sub(p, x);
        let r2 = h[0] * h[0] + h[1] * h[1];
        out[0] -= d as f64 * h[1] / r2;
        out[1] += d as f64 * h[0] / r2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LoopPhase;

    #[test]
    fn compatibility_examples() {
        let disk = Domain::unit_disk();
        let one = VortexConfig::new(&disk, vec![[0.0, 0.0]], vec![1]).unwrap();
        assert!(check_compatibility(&disk, &BoundaryDatum::uniform(1), &one).compatible);
        let two = VortexConfig::new(&disk, vec![[0.0, 0.0]], vec![2]).unwrap();
        let r = check_compatibility(&disk, &BoundaryDatum::uniform(1), &two);
        assert!(!r.compatible);
        assert!(matches!(r.into_result(), Err(Error::IncompatibleDegrees { outer: 1, vortices: 2, inner: 0 })));
        let ann = Domain::annulus(0.3).unwrap();
        let g = BoundaryDatum::new(vec![LoopPhase::pure(2), LoopPhase::pure(1)]);
        let c = VortexConfig::new(&ann, vec![[0.6, 0.0]], vec![1]).unwrap();
        let r = check_compatibility(&ann, &g, &c);
        assert!(r.compatible);
        assert_eq!((r.outer, r.vortices, r.inner.clone()), (2, 1, vec![1]));
    }

    #[test]
    fn singular_current_examples() {
        let disk = Domain::unit_disk();
        let c = VortexConfig::new(&disk, vec![[0.0, 0.0]], vec![1]).unwrap();
        assert_eq!(singular_current(&c, [1.0, 0.0]).unwrap(), [0.0, 1.0]);
        let c = VortexConfig::new(&disk, vec![[0.0, 0.0]], vec![-2]).unwrap();
        assert_eq!(singular_current(&c, [0.0, 1.0]).unwrap(), [2.0, 0.0]);
        let c = VortexConfig::new(&disk, vec![[0.5, 0.0], [-0.5, 0.0]], vec![1, 1]).unwrap();
        let j = singular_current(&c, [0.0, 0.0]).unwrap();
        assert!(j[0].abs() < 1e-15 && j[1].abs() < 1e-15);
        assert!(matches!(singular_current(&c, [0.5, 0.0]), Err(Error::SingularPoint(..))));
    }

    #[test]
    fn config_validation() {
        let disk = Domain::unit_disk();
        assert!(VortexConfig::new(&disk, vec![[1.5, 0.0]], vec![1]).is_err());
        assert!(VortexConfig::new(&disk, vec![[0.1, 0.0], [0.1, 0.0]], vec![1, 1]).is_err());
        assert!(VortexConfig::new(&disk, vec![[0.1, 0.0]], vec![1, 1]).is_err());
        let c = VortexConfig::new(&disk, vec![[0.4, 0.0], [-0.4, 0.0]], vec![1, 1]).unwrap();
        assert!((c.min_separation() - 0.8).abs() < 1e-15);
        assert!((c.boundary_distance() - 0.6).abs() < 1e-15);
        assert_eq!(c.flat(), vec![0.4, 0.0, -0.4, 0.0]);
    }
}
