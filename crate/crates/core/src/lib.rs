//! Numerical laboratory for singular harmonic maps to the circle with
//! prescribed vortices, their renormalized energy, the convex p-energy
//! relaxation and stationary p-harmonic configurations as p approaches 2.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod laplace;
pub mod pharmonic;
pub mod quadrature;
pub mod renorm;
pub mod stationary;
pub mod stress;
pub mod vortex;

pub use error::{Error, Result};

/// Planar point.
pub type Point = [f64; 2];

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Rotation by +90 degrees, (h1, h2) -> (-h2, h1).
#[inline]
pub(crate) fn perp(a: Point) -> Point {
    [-a[1], a[0]]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
