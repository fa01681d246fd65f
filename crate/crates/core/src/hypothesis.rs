use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{same_point, ParameterGrid};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidHypothesis(format!("interval [{lo}, {hi}] has lo > hi")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, theta: f64) -> bool {
        (theta >= self.lo || same_point(theta, self.lo)) && (theta <= self.hi || same_point(theta, self.hi))
    }
}

/// A subset of the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisSet {
    Points(Vec<f64>),
    Interval(Interval),
    /// Disjoint intervals sorted by `lo`.
    Union(Vec<Interval>),
}

impl HypothesisSet {
    pub fn points(mut pts: Vec<f64>) -> Result<Self> {
        if pts.iter().any(|p| p.is_nan()) {
            return Err(Error::InvalidHypothesis("NaN point".into()));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(HypothesisSet::Points(pts))
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Ok(HypothesisSet::Interval(Interval::new(lo, hi)?))
    }

    /// Union of intervals; overlapping pieces are merged.
    pub fn union(mut parts: Vec<Interval>) -> Result<Self> {
        if parts.is_empty() {
            return Ok(HypothesisSet::Points(vec![]));
        }
        parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(parts.len());
        for p in parts {
            match merged.last_mut() {
                Some(last) if p.lo <= last.hi => last.hi = last.hi.max(p.hi),
                _ => merged.push(p),
            }
        }
        Ok(if merged.len() == 1 {
            HypothesisSet::Interval(merged[0])
        } else {
            HypothesisSet::Union(merged)
        })
    }

    pub fn contains(&self, theta: f64) -> bool {
        match self {
            HypothesisSet::Points(p) => p.iter().any(|&q| same_point(q, theta)),
            HypothesisSet::Interval(i) => i.contains(theta),
            HypothesisSet::Union(parts) => parts.iter().any(|i| i.contains(theta)),
        }
    }

    /// Indices of grid points inside the set.
    pub fn grid_members(&self, grid: &ParameterGrid) -> Vec<usize> {
        grid.points()
            .iter()
            .enumerate()
            .filter(|(_, &t)| self.contains(t))
            .map(|(i, _)| i)
            .collect()
    }

    /// Bounding range `(min, max)` of the set, `None` when empty.
    pub fn extent(&self) -> Option<(f64, f64)> {
        match self {
            HypothesisSet::Points(p) => Some((*p.first()?, *p.last()?)),
            HypothesisSet::Interval(i) => Some((i.lo, i.hi)),
            HypothesisSet::Union(parts) => Some((parts.first()?.lo, parts.last()?.hi)),
        }
    }

    pub fn intervals(&self) -> Vec<Interval> {
        match self {
            HypothesisSet::Points(_) => vec![],
            HypothesisSet::Interval(i) => vec![*i],
            HypothesisSet::Union(parts) => parts.clone(),
        }
    }
}

impl fmt::Display for HypothesisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisSet::Points(p) => {
                let s: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                write!(f, "{{{}}}", s.join(","))
            }
            HypothesisSet::Interval(i) => write!(f, "[{},{}]", i.lo, i.hi),
            HypothesisSet::Union(parts) => {
                let s: Vec<String> = parts.iter().map(|i| format!("[{},{}]", i.lo, i.hi)).collect();
                write!(f, "{}", s.join("U"))
            }
        }
    }
}

fn parse_num(t: &str) -> Result<f64> {
    let t = t.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| Error::InvalidHypothesis(format!("`{t}` is not a number")))
}

/// Grammar: `[lo,hi]`, `{a,b,c}`, or intervals joined by `U`, e.g. `[0,0.2]U[0.8,1]`.
impl FromStr for HypothesisSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(body) = s.strip_prefix('{') {
            let body = body
                .strip_suffix('}')
                .ok_or_else(|| Error::InvalidHypothesis(format!("unterminated point set `{s}`")))?;
            if body.trim().is_empty() {
                return HypothesisSet::points(vec![]);
            }
            return HypothesisSet::points(body.split(',').map(parse_num).collect::<Result<_>>()?);
        }
        let pieces: Vec<&str> = s.split(['U', 'u', '∪']).collect();
        let mut parts = Vec::with_capacity(pieces.len());
        for piece in pieces {
            let piece = piece.trim();
            let inner = piece
                .strip_prefix('[')
                .and_then(|p| p.strip_suffix(']'))
                .ok_or_else(|| Error::InvalidHypothesis(format!("expected `[lo,hi]`, got `{piece}`")))?;
            let (lo, hi) = inner
                .split_once(',')
                .ok_or_else(|| Error::InvalidHypothesis(format!("expected `[lo,hi]`, got `{piece}`")))?;
            parts.push(Interval::new(parse_num(lo)?, parse_num(hi)?)?);
        }
        HypothesisSet::union(parts)
    }
}
