//! Difficulty scores and consistent-difficulty buckets.
//!
//! A scenario's raw score is the weighted sum of its feature values, each
//! feature weighted by its skill group. Scores are normalized by the maximum
//! raw score of the space, and grouped into buckets of width `delta` (the
//! largest single-feature contribution): bucket `k = round(d / delta)`, and its
//! position in `[0, 1]` is `cd = k / k_max` with `k_max = round(1 / delta)`.
//! Rounding is half away from zero throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Profile, Scenario, ScenarioSpace};
use crate::rational::{checked_lcm, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyScore {
    pub raw: Rational,
    pub normalized: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BucketIndex {
    pub k: u32,
    pub k_max: u32,
    pub cd: Rational,
}

impl BucketIndex {
    pub fn new(k: u32, k_max: u32) -> Self {
        BucketIndex {
            k,
            k_max,
            cd: Rational::new(k as i64, k_max as i64),
        }
    }

    /// The reciprocal form `1 / round(d / delta)`; `None` for bucket 0.
    pub fn literal_cd(&self) -> Option<Rational> {
        (self.k > 0).then(|| Rational::new(1, self.k as i64))
    }
}

fn group_weight(space: &ScenarioSpace, profile: &Profile, pos: usize) -> Result<i64> {
    let f = &space.features[pos];
    profile.weight(f.group_id).map(i64::from).ok_or_else(|| {
        Error::InvalidProfile(format!(
            "profile {} has no weight for group {} (feature {})",
            profile.profile_id, f.group_id, f.feature_id
        ))
    })
}

/// Weighted sum of the scenario's feature values.
pub fn raw_score(scenario: &Scenario, space: &ScenarioSpace, profile: &Profile) -> Result<Rational> {
    space.check_scenario(scenario)?;
    let mut total = Rational::ZERO;
    for (pos, (f, &idx)) in space.features.iter().zip(&scenario.assignment).enumerate() {
        let w = Rational::from_integer(group_weight(space, profile, pos)?);
        total = total.checked_add(&w.checked_mul(&f.values[idx])?)?;
    }
    Ok(total)
}

/// Raw score of the all-maximum scenario.
pub fn max_raw_score(space: &ScenarioSpace, profile: &Profile) -> Result<Rational> {
    let mut total = Rational::ZERO;
    for (pos, f) in space.features.iter().enumerate() {
        let w = Rational::from_integer(group_weight(space, profile, pos)?);
        total = total.checked_add(&w.checked_mul(&f.max_value())?)?;
    }
    Ok(total)
}

pub fn normalized_score(scenario: &Scenario, space: &ScenarioSpace, profile: &Profile) -> Result<Rational> {
    Ok(difficulty(scenario, space, profile)?.normalized)
}

pub fn difficulty(scenario: &Scenario, space: &ScenarioSpace, profile: &Profile) -> Result<DifficultyScore> {
    let raw = raw_score(scenario, space, profile)?;
    let max = max_raw_score(space, profile)?;
    if max.is_zero() {
        return Err(Error::DegenerateScore);
    }
    Ok(DifficultyScore {
        raw,
        normalized: raw.checked_div(&max)?,
    })
}

/// Largest single-feature contribution, in normalized units.
pub fn delta(space: &ScenarioSpace, profile: &Profile) -> Result<Rational> {
    let max = max_raw_score(space, profile)?;
    if max.is_zero() {
        return Err(Error::DegenerateScore);
    }
    let mut best = Rational::ZERO;
    for (pos, f) in space.features.iter().enumerate() {
        let w = Rational::from_integer(group_weight(space, profile, pos)?);
        best = best.max(w.checked_mul(&f.max_value())?);
    }
    best.checked_div(&max)
}

/// Assigns a normalized score to its consistent-difficulty bucket.
pub fn cd_bucket(d_norm: Rational, delta: Rational) -> Result<BucketIndex> {
    if delta <= 0 {
        return Err(Error::ZeroDelta);
    }
    if d_norm < 0 || d_norm > 1 {
        return Err(Error::InvalidArgument(format!("normalized score {d_norm} outside [0,1]")));
    }
    let k = d_norm.checked_div(&delta)?.round_half_away();
    let k_max = Rational::ONE.checked_div(&delta)?.round_half_away();
    Ok(BucketIndex::new(k as u32, k_max as u32))
}

/// Integer form of a profile's scoring over one space.
///
/// Every contribution `weight * value` is multiplied by the lcm of the value
/// denominators so totals are integers; bucket classification is then pure
/// integer arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreModel {
    contributions: Vec<Vec<i64>>,
    scale: i64,
    max_total: i64,
    max_step: i64,
    k_max: u32,
}

impl ScoreModel {
    pub fn new(space: &ScenarioSpace, profile: &Profile) -> Result<Self> {
        let mut scale = 1i64;
        for f in &space.features {
            for v in &f.values {
                scale = checked_lcm(scale, v.denom())?;
            }
        }
        let mut contributions = Vec::with_capacity(space.features.len());
        let mut max_total = 0i64;
        let mut max_step = 0i64;
        for (pos, f) in space.features.iter().enumerate() {
            let w = group_weight(space, profile, pos)?;
            let row = f
                .values
                .iter()
                .map(|v| {
                    w.checked_mul(v.numer())
                        .and_then(|x| x.checked_mul(scale / v.denom()))
                        .ok_or(Error::Overflow)
                })
                .collect::<Result<Vec<i64>>>()?;
            let top = row.last().copied().unwrap_or(0);
            max_total = max_total.checked_add(top).ok_or(Error::Overflow)?;
            max_step = max_step.max(top);
            contributions.push(row);
        }
        if max_total == 0 {
            return Err(Error::DegenerateScore);
        }
        let k_max = round_ratio(max_total, max_step) as u32;
        Ok(ScoreModel {
            contributions,
            scale,
            max_total,
            max_step,
            k_max,
        })
    }

    pub fn contributions(&self) -> &[Vec<i64>] {
        &self.contributions
    }

    /// Common denominator of all feature values.
    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn max_total(&self) -> i64 {
        self.max_total
    }

    /// Integer width of one bucket (largest single contribution).
    pub fn max_step(&self) -> i64 {
        self.max_step
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn delta(&self) -> Rational {
        Rational::new(self.max_step, self.max_total)
    }

    pub fn total(&self, assignment: &[usize]) -> i64 {
        self.contributions
            .iter()
            .zip(assignment)
            .map(|(row, &i)| row[i])
            .sum()
    }

    pub fn raw(&self, total: i64) -> Rational {
        Rational::new(total, self.scale)
    }

    pub fn normalized(&self, total: i64) -> Rational {
        Rational::new(total, self.max_total)
    }

    pub fn bucket_of_total(&self, total: i64) -> u32 {
        round_ratio(total, self.max_step) as u32
    }

    pub fn bucket_of(&self, assignment: &[usize]) -> u32 {
        self.bucket_of_total(self.total(assignment))
    }

    pub fn bucket(&self, k: u32) -> BucketIndex {
        BucketIndex::new(k, self.k_max)
    }

    /// Inclusive range of integer totals that land in bucket `k`.
    pub fn total_range(&self, k: u32) -> (i64, i64) {
        let d = self.max_step as i128;
        let k = k as i128;
        // k = floor((2t + d) / 2d)  <=>  (2k - 1) d <= 2t < (2k + 1) d
        let lo = ((2 * k - 1) * d + 1).div_euclid(2).max(0);
        let hi = ((2 * k + 1) * d - 1).div_euclid(2);
        (lo as i64, (hi as i64).min(self.max_total))
    }
}

/// `round(a / b)` for `a >= 0, b > 0`, ties away from zero.
fn round_ratio(a: i64, b: i64) -> i64 {
    ((2 * a as i128 + b as i128) / (2 * b as i128)) as i64
}
