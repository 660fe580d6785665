//! Diverse scenario sets at fixed difficulty, and paths across levels.
//!
//! Selection is greedy max-min over Hamming distance: a seeded first pick,
//! then repeatedly the member farthest from everything chosen so far, ties to
//! the lexicographically smallest. The generator is ChaCha8 seeded from a
//! `u64`, which gives the same stream on every platform.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counting::{count_by_bucket, BucketMembers};
use crate::error::{Error, Result};
use crate::model::{Profile, Scenario, ScenarioSpace};
use crate::rational::Rational;

/// Picks `count` spread-out members of bucket `k`.
pub fn sample_bucket(
    space: &ScenarioSpace,
    profile: &Profile,
    k: u32,
    count: usize,
    seed: u64,
) -> Result<Vec<Scenario>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let members: Vec<Scenario> = BucketMembers::new(space, profile, k)?.collect();
    if members.is_empty() {
        return Err(Error::EmptyBucket(k));
    }
    if count >= members.len() {
        return Ok(members);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..members.len());
    let mut picked = vec![first];
    let mut nearest: Vec<usize> = members.iter().map(|m| m.hamming(&members[first])).collect();
    while picked.len() < count {
        // nearest is 0 exactly for picked members, members being distinct
        let (best, _) = nearest
            .iter()
            .enumerate()
            .fold((0, 0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        picked.push(best);
        for (d, m) in nearest.iter_mut().zip(&members) {
            *d = (*d).min(m.hamming(&members[best]));
        }
    }
    Ok(picked.into_iter().map(|i| members[i].clone()).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStep {
    pub cd: Rational,
    pub assignment: Vec<usize>,
    pub labels: IndexMap<String, String>,
}

/// A requested level that had no scenarios and was moved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub requested_cd: Rational,
    pub requested_k: u32,
    pub used_k: u32,
    pub used_cd: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub profile: String,
    pub seed: u64,
    pub steps: Vec<SessionStep>,
    #[serde(default)]
    pub substitutions: Vec<Substitution>,
}

/// Nearest element of the sorted `nonempty` to `k`, ties upward.
fn nearest_bucket(nonempty: &[u32], k: u32) -> u32 {
    *nonempty
        .iter()
        .min_by_key(|&&b| (b.abs_diff(k), b < k))
        .expect("nonempty list")
}

/// Samples `per_level` scenarios at each target difficulty, easiest first.
///
/// Level `i` (after sorting) draws with seed `seed + i`.
pub fn build_path(
    space: &ScenarioSpace,
    profile: &Profile,
    cd_targets: &[Rational],
    per_level: usize,
    seed: u64,
) -> Result<SessionPlan> {
    let counts = count_by_bucket(space, profile)?;
    let nonempty: Vec<u32> = counts.nonempty().map(|b| b.k).collect();
    if nonempty.is_empty() {
        return Err(Error::EmptyConstrainedSpace);
    }
    let k_max = counts.k_max;
    let mut substitutions = Vec::new();
    let mut levels = Vec::with_capacity(cd_targets.len());
    for &cd in cd_targets {
        if cd < 0 || cd > 1 {
            return Err(Error::InvalidArgument(format!("cd target {cd} outside [0,1]")));
        }
        let k = cd.checked_mul(&Rational::from_integer(k_max as i64))?.round_half_away() as u32;
        let used = nearest_bucket(&nonempty, k);
        if used != k {
            substitutions.push(Substitution {
                requested_cd: cd,
                requested_k: k,
                used_k: used,
                used_cd: Rational::new(used as i64, k_max as i64),
            });
        }
        levels.push(used);
    }
    levels.sort_unstable();
    let mut steps = Vec::new();
    for (i, &k) in levels.iter().enumerate() {
        let cd = Rational::new(k as i64, k_max as i64);
        for s in sample_bucket(space, profile, k, per_level, seed.wrapping_add(i as u64))? {
            steps.push(SessionStep {
                cd,
                labels: space.labels_for(&s),
                assignment: s.assignment,
            });
        }
    }
    Ok(SessionPlan {
        profile: profile.profile_id.clone(),
        seed,
        steps,
        substitutions,
    })
}

/// Smallest pairwise Hamming distance; `None` for fewer than two scenarios.
pub fn min_pairwise_hamming(set: &[Scenario]) -> Option<usize> {
    let mut best = None;
    for (i, a) in set.iter().enumerate() {
        for b in &set[i + 1..] {
            let d = a.hamming(b);
            best = Some(best.map_or(d, |x: usize| x.min(d)));
        }
    }
    best
}
