//! Streaming enumeration of the scenario product space.
//!
//! Scenarios are visited in lexicographic order of value indices, the first
//! feature being most significant. Positions are ranks in the unfiltered order,
//! so a stream can be resumed, or split into disjoint rank ranges.

use serde::{Deserialize, Serialize};

use crate::constraint::{CompiledConstraint, ConstraintExpr};
use crate::error::{Error, Result};
use crate::model::{Scenario, ScenarioSpace};

/// Rank of the next scenario in the unfiltered lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PositionToken(pub u64);

/// Mixed-radix counter over value indices.
#[derive(Clone, Debug)]
pub(crate) struct Odometer {
    radices: Vec<usize>,
    current: Vec<usize>,
    rank: u64,
    end: u64,
    primed: bool,
}

impl Odometer {
    pub(crate) fn new(radices: Vec<usize>, start: u64, end: u64) -> Self {
        let current = decode(&radices, start);
        Odometer {
            radices,
            current,
            rank: start,
            end,
            primed: false,
        }
    }

    pub(crate) fn advance(&mut self) -> Option<&[usize]> {
        if self.rank >= self.end {
            return None;
        }
        if self.primed {
            for pos in (0..self.radices.len()).rev() {
                self.current[pos] += 1;
                if self.current[pos] < self.radices[pos] {
                    break;
                }
                self.current[pos] = 0;
            }
        } else {
            self.primed = true;
        }
        self.rank += 1;
        Some(&self.current)
    }
}

/// Assignment at lexicographic `rank`.
pub fn decode(radices: &[usize], mut rank: u64) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for pos in (0..radices.len()).rev() {
        let r = radices[pos] as u64;
        out[pos] = (rank % r) as usize;
        rank /= r;
    }
    out
}

/// Lexicographic rank of `assignment`.
pub fn rank_of(radices: &[usize], assignment: &[usize]) -> u64 {
    radices
        .iter()
        .zip(assignment)
        .fold(0u64, |acc, (&r, &i)| acc * r as u64 + i as u64)
}

/// A cursor over the (optionally filtered) product space.
pub struct ScenarioStream {
    odometer: Odometer,
    filter: Option<CompiledConstraint>,
}

impl ScenarioStream {
    pub fn new(space: &ScenarioSpace, constraint: Option<&ConstraintExpr>) -> Result<Self> {
        Self::range(space, constraint, PositionToken(0), None)
    }

    /// Continues from a position previously returned by [`ScenarioStream::position`].
    pub fn resume(
        space: &ScenarioSpace,
        constraint: Option<&ConstraintExpr>,
        token: PositionToken,
    ) -> Result<Self> {
        Self::range(space, constraint, token, None)
    }

    /// Stream over ranks `start..end` (`end` defaults to the space size).
    pub fn range(
        space: &ScenarioSpace,
        constraint: Option<&ConstraintExpr>,
        start: PositionToken,
        end: Option<u64>,
    ) -> Result<Self> {
        let total = space.total_combinations()?;
        let end = end.unwrap_or(total).min(total);
        if start.0 > total {
            return Err(Error::InvalidArgument(format!(
                "position {} beyond space size {total}",
                start.0
            )));
        }
        let filter = constraint.map(|c| c.compile(space)).transpose()?;
        Ok(ScenarioStream {
            odometer: Odometer::new(space.cardinalities(), start.0, end),
            filter,
        })
    }

    pub fn position(&self) -> PositionToken {
        PositionToken(self.odometer.rank)
    }

    /// Next admissible assignment without allocating.
    pub fn next_assignment(&mut self) -> Option<&[usize]> {
        loop {
            let a = self.odometer.advance()?;
            let ok = self.filter.as_ref().is_none_or(|f| f.matches(a));
            if ok {
                return Some(&self.odometer.current);
            }
        }
    }
}

impl Iterator for ScenarioStream {
    type Item = Scenario;

    fn next(&mut self) -> Option<Scenario> {
        self.next_assignment().map(|a| Scenario::new(a.to_vec()))
    }
}

/// Streams every scenario of `space` admitted by `constraint`.
pub fn enumerate(space: &ScenarioSpace, constraint: Option<&ConstraintExpr>) -> Result<ScenarioStream> {
    ScenarioStream::new(space, constraint)
}
