//! Bounded domains, their discretizations and sampled fields.

mod field;
mod green;
mod mesh;

pub use field::Field;
pub use green::{ball_harmonic_extension_h, harmonic_extension_pole_gradient, robin_laplace, robin_laplace_gradient};
pub use mesh::{graded_faces, Focus, GridSpec, Mesh, Symmetry};

use crate::error::{invalid, Error, Result};
use std::fmt;
use std::str::FromStr;

/// Geometry of a domain.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    /// Ball of the given radius centered at the origin.
    Ball { radius: f64 },
    /// Axis-aligned box, one `(lo, hi)` interval per axis.
    Box { extents: Vec<(f64, f64)> },
}

/// A bounded domain `Ω ⊂ ℝⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainModel {
    n: usize,
    kind: DomainKind,
}

impl DomainModel {
    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("domain dimension must be at least 2"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(DomainModel { n, kind: DomainKind::Ball { radius } })
    }

    pub fn unit_ball(n: usize) -> Result<Self> {
        Self::ball(n, 1.0)
    }

    pub fn cuboid(extents: Vec<(f64, f64)>) -> Result<Self> {
        if extents.len() < 2 {
            return Err(invalid("box needs at least two axes"));
        }
        for &(lo, hi) in &extents {
            if !(hi > lo && lo.is_finite() && hi.is_finite()) {
                return Err(invalid(format!("box extent ({lo}, {hi}) has no positive length")));
            }
        }
        Ok(DomainModel { n: extents.len(), kind: DomainKind::Box { extents } })
    }

    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::cuboid(vec![(0.0, 1.0); n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            DomainKind::Ball { .. } => "ball",
            DomainKind::Box { .. } => "box",
        }
    }

    pub fn ball_radius(&self) -> Option<f64> {
        match self.kind {
            DomainKind::Ball { radius } => Some(radius),
            DomainKind::Box { .. } => None,
        }
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius } => radius - x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            DomainKind::Box { extents } => extents
                .iter()
                .zip(x)
                .map(|(&(lo, hi), &v)| (v - lo).min(hi - v))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n && self.signed_distance(x) > 0.0
    }

    /// Exact distance from an interior point to `∂Ω`.
    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let d = self.signed_distance(x);
        if d < 0.0 {
            return Err(Error::OutsideDomain);
        }
        Ok(d)
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius } => 2.0 * radius,
            DomainKind::Box { extents } => extents.iter().map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt(),
        }
    }

    /// A point well inside the domain.
    pub fn center(&self) -> Vec<f64> {
        match &self.kind {
            DomainKind::Ball { .. } => vec![0.0; self.n],
            DomainKind::Box { extents } => extents.iter().map(|(a, b)| 0.5 * (a + b)).collect(),
        }
    }
}

impl fmt::Display for DomainModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DomainKind::Ball { radius } => write!(f, "ball:n={}:r={}", self.n, radius),
            DomainKind::Box { extents } => {
                let parts: Vec<String> = extents.iter().map(|(a, b)| format!("{a}..{b}")).collect();
                write!(f, "box:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for DomainModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("cannot parse domain '{s}'"));
        if let Some(rest) = s.strip_prefix("ball:") {
            let mut n = None;
            let mut r = 1.0;
            for kv in rest.split(':') {
                match kv.split_once('=') {
                    Some(("n", v)) => n = Some(v.parse().map_err(|_| bad())?),
                    Some(("r", v)) => r = v.parse().map_err(|_| bad())?,
                    _ => return Err(bad()),
                }
            }
            return DomainModel::ball(n.ok_or_else(bad)?, r);
        }
        if let Some(rest) = s.strip_prefix("box:") {
            let mut ext = Vec::new();
            for part in rest.split(',') {
                let (a, b) = part.split_once("..").ok_or_else(bad)?;
                ext.push((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?));
            }
            return DomainModel::cuboid(ext);
        }
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        let b = DomainModel::unit_ball(3).unwrap();
        assert_eq!(b.distance_to_boundary(&[0.0; 3]).unwrap(), 1.0);
        assert!((b.distance_to_boundary(&[0.9, 0.0, 0.0]).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(b.distance_to_boundary(&[2.0, 0.0, 0.0]), Err(Error::OutsideDomain)));
        let c = DomainModel::unit_cube(3).unwrap();
        assert!((c.distance_to_boundary(&[0.2, 0.5, 0.5]).unwrap() - 0.2).abs() < 1e-15);
        assert!(c.distance_to_boundary(&[0.2, 0.5]).is_err());
    }

    #[test]
    fn validation_and_roundtrip() {
        assert!(DomainModel::ball(3, -1.0).is_err());
        assert!(DomainModel::cuboid(vec![(0.0, 1.0), (1.0, 1.0)]).is_err());
        for d in [DomainModel::unit_ball(5).unwrap(), DomainModel::cuboid(vec![(0.0, 1.0), (-0.5, 2.0)]).unwrap()] {
            let back: DomainModel = d.to_string().parse().unwrap();
            assert_eq!(back, d);
        }
    }
}
