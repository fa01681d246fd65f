use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GridKind {
    IntegerLattice,
    Continuum { resolution: f64 },
}

/// Ordered set of parameter values over which contours are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    points: Vec<f64>,
    kind: GridKind,
}

/// Relative tolerance under which two parameter values are considered the same point.
pub const POINT_TOL: f64 = 1e-9;

pub(crate) fn same_point(a: f64, b: f64) -> bool {
    (a - b).abs() <= POINT_TOL * a.abs().max(b.abs()).max(1.0)
}

fn decimals_for(step: f64) -> i32 {
    ((-step.log10()).ceil() as i32 + 3).clamp(3, 15)
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let r = (v * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl ParameterGrid {
    /// Evenly spaced grid `lo, lo + step, ..., hi` (inclusive when `hi` is hit).
    ///
    /// Points are rounded to a few decimals beyond `step` so that e.g. `0.3`
    /// on a `0.001` grid is the same double as `3.0 / 10.0`.
    pub fn continuum(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bounds".into()));
        }
        if step <= 0.0 {
            return Err(Error::InvalidGrid(format!("resolution must be > 0, got {step}")));
        }
        if hi < lo {
            return Err(Error::InvalidGrid(format!("empty range {lo}:{hi}")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        let d = decimals_for(step);
        let points = (0..=n).map(|i| round_to(lo + i as f64 * step, d)).collect();
        Self::from_points(points, GridKind::Continuum { resolution: step })
    }

    /// Integers `lo..=hi`.
    pub fn integers(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidGrid(format!("empty range {lo}:{hi}")));
        }
        Self::from_points((lo..=hi).map(|v| v as f64).collect(), GridKind::IntegerLattice)
    }

    pub fn from_points(points: Vec<f64>, kind: GridKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid("grid contains non-finite values".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("grid points must be strictly increasing".into()));
        }
        match kind {
            GridKind::IntegerLattice => {
                if points.iter().any(|p| p.fract() != 0.0) {
                    return Err(Error::InvalidGrid("integer lattice has non-integer points".into()));
                }
            }
            GridKind::Continuum { resolution } => {
                if !(resolution > 0.0) {
                    return Err(Error::InvalidGrid(format!(
                        "resolution must be > 0, got {resolution}"
                    )));
                }
            }
        }
        Ok(Self { points, kind })
    }

    /// Merge arbitrary points into the grid. A new point closer than
    /// [`POINT_TOL`] to an existing one replaces it.
    pub fn with_points(&self, extra: &[f64]) -> Self {
        let mut pts = self.points.clone();
        for &p in extra {
            if !p.is_finite() {
                continue;
            }
            match pts.binary_search_by(|q| q.total_cmp(&p)) {
                Ok(_) => {}
                Err(i) => {
                    if i > 0 && same_point(pts[i - 1], p) {
                        pts[i - 1] = p;
                    } else if i < pts.len() && same_point(pts[i], p) {
                        pts[i] = p;
                    } else {
                        pts.insert(i, p);
                    }
                }
            }
        }
        Self {
            points: pts,
            kind: self.kind,
        }
    }

    pub fn with_point(&self, p: f64) -> Self {
        self.with_points(&[p])
    }

    /// Keep only points satisfying `keep`; `None` if nothing survives.
    pub fn filtered(&self, keep: impl Fn(f64) -> bool) -> Option<Self> {
        let points: Vec<f64> = self.points.iter().copied().filter(|&p| keep(p)).collect();
        (!points.is_empty()).then_some(Self {
            points,
            kind: self.kind,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.points[0]
    }

    pub fn hi(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Index of the grid point equal (within tolerance) to `theta`.
    pub fn position(&self, theta: f64) -> Option<usize> {
        let i = self.points.partition_point(|&q| q < theta);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .find(|&j| j < self.points.len() && same_point(self.points[j], theta))
    }
}

/// Parse the CLI grid syntax `lo:hi:step`.
impl std::str::FromStr for ParameterGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidGrid(format!("expected lo:hi:step, got `{s}`")));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidGrid(format!("`{t}` is not a number")))
        };
        Self::continuum(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuum_hits_decimal_points_exactly() {
        let g = ParameterGrid::continuum(0.0, 1.0, 0.001).unwrap();
        assert_eq!(g.len(), 1001);
        assert!(g.points().contains(&0.3));
        assert!(g.points().contains(&(3.0 / 10.0)));
        assert_eq!(g.hi(), 1.0);
    }

    #[test]
    fn augment_replaces_near_duplicates() {
        let g = ParameterGrid::continuum(0.0, 1.0, 0.001).unwrap();
        let h = g.with_point(0.3 + 1e-13);
        assert_eq!(h.len(), g.len());
        let h = g.with_point(11.0 / 16.0);
        assert_eq!(h.len(), g.len() + 1);
        assert_eq!(h.position(0.6875), Some(688));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(ParameterGrid::continuum(0.0, 1.0, 0.0).is_err());
        assert!(ParameterGrid::continuum(1.0, 0.0, 0.1).is_err());
        assert!(ParameterGrid::from_points(vec![], GridKind::IntegerLattice).is_err());
        assert!(ParameterGrid::from_points(vec![1.0, 1.0], GridKind::IntegerLattice).is_err());
        assert!(ParameterGrid::from_points(vec![1.5], GridKind::IntegerLattice).is_err());
        assert!("0:1".parse::<ParameterGrid>().is_err());
        assert!("0:x:0.1".parse::<ParameterGrid>().is_err());
    }

    #[test]
    fn parses_cli_syntax() {
        let g: ParameterGrid = "5:15:1".parse().unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.points()[1], 6.0);
    }
}
