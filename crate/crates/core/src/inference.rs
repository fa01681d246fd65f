//! Possibility measure on hypotheses, and the tests and confidence sets it induces.

use serde::Serialize;

use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSet, Interval};

/// Supremum of the contour over a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Possibility {
    pub value: f64,
    /// Set when the hypothesis contains no grid point; `value` is then 0.
    pub empty_intersection: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Refuted,
    Supported,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Refuted => "refuted",
            Verdict::Supported => "supported",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestDecision {
    Reject,
    Retain,
}

impl TestDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            TestDecision::Reject => "reject",
            TestDecision::Retain => "retain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceSet {
    pub alpha: f64,
    /// Grid points with contour value strictly above `alpha`.
    pub retained: Vec<f64>,
    /// Maximal runs of consecutive retained grid points, as intervals.
    pub interval_hull: Vec<Interval>,
}

impl ConfidenceSet {
    /// Single interval spanning every retained point.
    pub fn hull(&self) -> Option<Interval> {
        Some(Interval {
            lo: *self.retained.first()?,
            hi: *self.retained.last()?,
        })
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.retained.iter().any(|&t| crate::grid::same_point(t, theta))
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config("alpha", format!("must lie in (0, 1), got {alpha}")))
    }
}

fn sup_over(c: &Contour, idx: impl Iterator<Item = usize>) -> Option<f64> {
    idx.map(|i| c.values[i]).reduce(f64::max)
}

/// `sup_{theta in A} pi_x(theta)` by scanning grid points in `A`.
pub fn possibility(c: &Contour, a: &HypothesisSet) -> Possibility {
    match sup_over(c, a.grid_members(&c.grid).into_iter()) {
        Some(value) => Possibility {
            value,
            empty_intersection: false,
        },
        None => Possibility {
            value: 0.0,
            empty_intersection: true,
        },
    }
}

/// Possibility of the grid complement of `A` (0 when the complement is empty).
pub fn complement_possibility(c: &Contour, a: &HypothesisSet) -> f64 {
    let inside = a.grid_members(&c.grid);
    let mut k = 0;
    let outside = (0..c.values.len()).filter(|&i| {
        if k < inside.len() && inside[k] == i {
            k += 1;
            false
        } else {
            true
        }
    });
    sup_over(c, outside).unwrap_or(0.0)
}

/// Refuted if `Pi(A) <= alpha`; supported if `Pi(A) > alpha` and the grid
/// complement has `Pi(A^c) <= alpha` (an empty complement counts); otherwise
/// inconclusive.
pub fn verdict(c: &Contour, a: &HypothesisSet, alpha: f64) -> Result<Verdict> {
    check_level(alpha)?;
    let pa = possibility(c, a).value;
    if pa <= alpha {
        return Ok(Verdict::Refuted);
    }
    Ok(if complement_possibility(c, a) <= alpha {
        Verdict::Supported
    } else {
        Verdict::Inconclusive
    })
}

/// Reject `H: theta in A` iff `Pi(A) <= alpha`.
pub fn test(c: &Contour, a: &HypothesisSet, alpha: f64) -> Result<TestDecision> {
    check_level(alpha)?;
    Ok(if possibility(c, a).value <= alpha {
        TestDecision::Reject
    } else {
        TestDecision::Retain
    })
}

/// `{theta : pi_x(theta) > alpha}` restricted to the grid.
pub fn confidence_set(c: &Contour, alpha: f64) -> Result<ConfidenceSet> {
    check_level(alpha)?;
    let pts = c.grid.points();
    let mut retained = Vec::new();
    let mut runs: Vec<Interval> = Vec::new();
    let mut prev: Option<usize> = None;
    for (i, (&t, &v)) in pts.iter().zip(&c.values).enumerate() {
        if v > alpha {
            retained.push(t);
            match (prev, runs.last_mut()) {
                (Some(p), Some(run)) if p + 1 == i => run.hi = t,
                _ => runs.push(Interval { lo: t, hi: t }),
            }
            prev = Some(i);
        }
    }
    Ok(ConfidenceSet {
        alpha,
        retained,
        interval_hull: runs,
    })
}
