use std::fmt::Write as _;

use super::CanonicalMap;
use crate::laplace::ScalarField;
use crate::quadrature::{circle_nodes, vortex_adapted_rules, RuleOptions};
use crate::{dist, dot, Error, Point, Result};

/// Current `j u = grad(psi) + j u_x` of `u = e^{i psi} u_x`; `psi = 0` gives the canonical map.
#[derive(Clone, Copy, Debug)]
pub struct CurrentField<'a> {
    pub map: &'a CanonicalMap,
    pub correction: Option<&'a ScalarField>,
}

impl<'a> CurrentField<'a> {
    pub fn canonical(map: &'a CanonicalMap) -> Self {
        Self { map, correction: None }
    }

    pub fn with_correction(map: &'a CanonicalMap, psi: &'a ScalarField) -> Self {
        Self { map, correction: Some(psi) }
    }

    /// Current without the vortex terms, on triangle `t`.
    pub fn regular_in(&self, t: usize, p: Point) -> Point {
        let mut r = self.map.regular_in(t, p);
        if let Some(psi) = self.correction {
            let g = psi.gradient(self.map.mesh(), t);
            r[0] += g[0];
            r[1] += g[1];
        }
        r
    }

    pub fn eval_in(&self, t: usize, p: Point) -> Point {
        let r = self.regular_in(t, p);
        let s = self.map.vortex_current(p);
        [r[0] + s[0], r[1] + s[1]]
    }

    /// CSV `x,y,jx,jy` on the nodes of the vortex-adapted quadrature rules.
    pub fn to_csv(&self, rules: &RuleOptions) -> String {
        let mut s = String::from("x,y,jx,jy\n");
        let mesh = self.map.mesh();
        for (t, rule) in vortex_adapted_rules(mesh, self.map.config.points(), rules).iter().enumerate() {
            for n in &rule.nodes {
                let j = self.eval_in(t, n.point);
                let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", n.point[0], n.point[1], j[0], j[1]);
            }
        }
        s
    }

    pub fn eval(&self, p: Point) -> Result<Point> {
        if self.map.config.points().iter().any(|x| dist(*x, p) < 1e-12) {
            return Err(Error::SingularPoint(p[0], p[1]));
        }
        let (t, _) = self.map.mesh().locate(p).ok_or(Error::OutOfDomain(p[0], p[1]))?;
        Ok(self.eval_in(t, p))
    }
}

/// Trapezoid value of the circulation of `current` on the circle `|x - center| = radius`.
pub fn circulation(current: &CurrentField, center: Point, radius: f64, n: usize) -> Result<f64> {
    if let Some(x) = current.map.config.points().iter().find(|x| (dist(**x, center) - radius).abs() < 1e-12) {
        return Err(Error::SingularPoint(x[0], x[1]));
    }
    let mut s = 0.0;
    for (p, tau, w) in circle_nodes(center, radius, n) {
        s += w * dot(current.eval(p)?, tau);
    }
    Ok(s)
}
