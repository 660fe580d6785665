//! Per-bucket scenario counts.
//!
//! Two independent routes produce identical [`BucketCounts`]:
//!
//! - brute force: stream every scenario, score it, tally its bucket;
//! - convolution: the distribution of an integer score that is a sum of
//!   independent per-feature contributions is the convolution of the
//!   per-feature distributions, so counts per total are built feature by
//!   feature without touching individual scenarios. An at-least-one clause is
//!   handled by inclusion–exclusion: `count(C and any(atoms)) = count(C) -
//!   count(C with every atom excluded)`.
//!
//! The convolution route needs the constraint to normalize into per-feature
//! allowed sets plus at most one at-least-one clause; anything else reports
//! [`Error::UnsupportedShape`] and callers fall back to brute force.

use std::thread;

use serde::{Deserialize, Serialize};

use crate::constraint::{full_masks, CompiledConstraint, ConjunctiveShape};
use crate::enumerate::{PositionToken, ScenarioStream};
use crate::error::{Error, Result};
use crate::model::{Profile, Scenario, ScenarioSpace};
use crate::rational::Rational;
use crate::scoring::ScoreModel;

/// Largest integer score range the convolution counter will allocate for.
const MAX_DP_BINS: i64 = 1 << 26;

/// Spaces smaller than this are scanned on one thread.
const PARALLEL_THRESHOLD: u64 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCount {
    pub k: u32,
    pub cd: Rational,
    pub count_all: u64,
    pub count_profile: u64,
}

/// Dense per-bucket counts for `k = 0..=k_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub k_max: u32,
    pub buckets: Vec<BucketCount>,
}

impl BucketCounts {
    fn from_vecs(k_max: u32, all: Vec<u64>, profile: Vec<u64>) -> Self {
        let buckets = all
            .into_iter()
            .zip(profile)
            .enumerate()
            .map(|(k, (count_all, count_profile))| BucketCount {
                k: k as u32,
                cd: Rational::new(k as i64, k_max as i64),
                count_all,
                count_profile,
            })
            .collect();
        BucketCounts { k_max, buckets }
    }

    pub fn total_all(&self) -> u64 {
        self.buckets.iter().map(|b| b.count_all).sum()
    }

    pub fn total_profile(&self) -> u64 {
        self.buckets.iter().map(|b| b.count_profile).sum()
    }

    pub fn get(&self, k: u32) -> Option<&BucketCount> {
        self.buckets.get(k as usize)
    }

    /// Buckets holding at least one profile scenario.
    pub fn nonempty(&self) -> impl Iterator<Item = &BucketCount> {
        self.buckets.iter().filter(|b| b.count_profile > 0)
    }

    /// Element-wise sum; both sides must share `k_max`.
    pub fn merge(&self, other: &BucketCounts) -> Result<BucketCounts> {
        if self.k_max != other.k_max {
            return Err(Error::InvalidArgument(format!(
                "cannot merge counts with k_max {} and {}",
                self.k_max, other.k_max
            )));
        }
        let all = self
            .buckets
            .iter()
            .zip(&other.buckets)
            .map(|(a, b)| a.count_all + b.count_all)
            .collect();
        let profile = self
            .buckets
            .iter()
            .zip(&other.buckets)
            .map(|(a, b)| a.count_profile + b.count_profile)
            .collect();
        Ok(BucketCounts::from_vecs(self.k_max, all, profile))
    }
}

/// Per-bucket value frequencies of the profile-admissible scenarios:
/// `counts[k][feature position][value index]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketHistograms {
    counts: Vec<Vec<Vec<u64>>>,
}

impl BucketHistograms {
    fn zeros(k_max: u32, cards: &[usize]) -> Self {
        BucketHistograms {
            counts: vec![cards.iter().map(|&n| vec![0; n]).collect(); k_max as usize + 1],
        }
    }

    pub fn get(&self, k: u32, pos: usize) -> Option<&[u64]> {
        self.counts.get(k as usize).and_then(|b| b.get(pos)).map(Vec::as_slice)
    }

    fn add(&mut self, other: &BucketHistograms) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (fa, fb) in a.iter_mut().zip(b) {
                for (x, y) in fa.iter_mut().zip(fb) {
                    *x += y;
                }
            }
        }
    }

    fn subtract(&mut self, other: &BucketHistograms) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (fa, fb) in a.iter_mut().zip(b) {
                for (x, y) in fa.iter_mut().zip(fb) {
                    *x -= y;
                }
            }
        }
    }
}

/// Counts plus histograms from a single pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketTally {
    pub counts: BucketCounts,
    pub histograms: BucketHistograms,
}

struct ScanPart {
    all: Vec<u64>,
    profile: Vec<u64>,
    hist: Option<BucketHistograms>,
}

fn scan_range(
    space: &ScenarioSpace,
    model: &ScoreModel,
    filter: &CompiledConstraint,
    start: u64,
    end: u64,
    with_hist: bool,
) -> Result<ScanPart> {
    let slots = model.k_max() as usize + 1;
    let mut part = ScanPart {
        all: vec![0; slots],
        profile: vec![0; slots],
        hist: with_hist.then(|| BucketHistograms::zeros(model.k_max(), &space.cardinalities())),
    };
    let mut stream = ScenarioStream::range(space, None, PositionToken(start), Some(end))?;
    while let Some(a) = stream.next_assignment() {
        let k = model.bucket_of(a) as usize;
        part.all[k] += 1;
        if filter.matches(a) {
            part.profile[k] += 1;
            if let Some(h) = part.hist.as_mut() {
                for (pos, &v) in a.iter().enumerate() {
                    h.counts[k][pos][v] += 1;
                }
            }
        }
    }
    Ok(part)
}

fn scan(space: &ScenarioSpace, profile: &Profile, with_hist: bool) -> Result<(BucketCounts, Option<BucketHistograms>)> {
    let model = ScoreModel::new(space, profile)?;
    let filter = profile.constraint.compile(space)?;
    let total = space.total_combinations()?;
    let workers = if total < PARALLEL_THRESHOLD {
        1
    } else {
        thread::available_parallelism().map_or(1, |n| n.get()).min(16) as u64
    };
    let chunk = total.div_ceil(workers).max(1);
    let parts: Vec<Result<ScanPart>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (model, filter) = (&model, &filter);
                let start = (w * chunk).min(total);
                let end = ((w + 1) * chunk).min(total);
                s.spawn(move || scan_range(space, model, filter, start, end, with_hist))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scan worker panicked")).collect()
    });

    let slots = model.k_max() as usize + 1;
    let mut all = vec![0u64; slots];
    let mut prof = vec![0u64; slots];
    let mut hist = with_hist.then(|| BucketHistograms::zeros(model.k_max(), &space.cardinalities()));
    for part in parts {
        let part = part?;
        for k in 0..slots {
            all[k] += part.all[k];
            prof[k] += part.profile[k];
        }
        if let (Some(h), Some(ph)) = (hist.as_mut(), part.hist.as_ref()) {
            h.add(ph);
        }
    }
    Ok((BucketCounts::from_vecs(model.k_max(), all, prof), hist))
}

/// Scores every scenario of the space and tallies buckets.
pub fn count_by_bucket_bruteforce(space: &ScenarioSpace, profile: &Profile) -> Result<BucketCounts> {
    Ok(scan(space, profile, false)?.0)
}

pub fn tally_bruteforce(space: &ScenarioSpace, profile: &Profile) -> Result<BucketTally> {
    let (counts, hist) = scan(space, profile, true)?;
    Ok(BucketTally {
        counts,
        histograms: hist.expect("histograms requested"),
    })
}

/// Number of assignments per integer total, restricted to `masks`, skipping
/// the feature at `skip`.
fn distribution(contributions: &[Vec<i64>], masks: &[u64], skip: Option<usize>) -> Vec<u64> {
    let mut dist = vec![1u64];
    for (pos, (row, &mask)) in contributions.iter().zip(masks).enumerate() {
        if Some(pos) == skip {
            continue;
        }
        let top = row.last().copied().unwrap_or(0) as usize;
        let mut next = vec![0u64; dist.len() + top];
        for (v, &c) in row.iter().enumerate() {
            if mask & (1u64 << v) == 0 {
                continue;
            }
            let c = c as usize;
            for (t, &n) in dist.iter().enumerate() {
                if n != 0 {
                    next[t + c] += n;
                }
            }
        }
        dist = next;
    }
    dist
}

fn buckets_from_distribution(model: &ScoreModel, dist: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; model.k_max() as usize + 1];
    for (t, &n) in dist.iter().enumerate() {
        if n != 0 {
            out[model.bucket_of_total(t as i64) as usize] += n;
        }
    }
    out
}

fn histograms_from_masks(model: &ScoreModel, masks: &[u64], cards: &[usize]) -> BucketHistograms {
    let mut hist = BucketHistograms::zeros(model.k_max(), cards);
    let contributions = model.contributions();
    for (pos, row) in contributions.iter().enumerate() {
        let others = distribution(contributions, masks, Some(pos));
        for (v, &c) in row.iter().enumerate() {
            if masks[pos] & (1u64 << v) == 0 {
                continue;
            }
            for (t, &n) in others.iter().enumerate() {
                if n != 0 {
                    let k = model.bucket_of_total(t as i64 + c) as usize;
                    hist.counts[k][pos][v] += n;
                }
            }
        }
    }
    hist
}

fn fast_prepare(space: &ScenarioSpace, profile: &Profile) -> Result<(ScoreModel, ConjunctiveShape)> {
    space.total_combinations()?;
    let model = ScoreModel::new(space, profile)?;
    if model.max_total() > MAX_DP_BINS {
        return Err(Error::UnsupportedShape(format!(
            "integer score range {} too large for convolution",
            model.max_total()
        )));
    }
    let shape = profile.constraint.conjunctive_shape(space)?;
    Ok((model, shape))
}

fn profile_buckets(model: &ScoreModel, shape: &ConjunctiveShape) -> Vec<u64> {
    let contributions = model.contributions();
    let mut prof = buckets_from_distribution(model, &distribution(contributions, &shape.masks, None));
    if let Some(excluded) = shape.excluded_masks() {
        let minus = buckets_from_distribution(model, &distribution(contributions, &excluded, None));
        for (p, m) in prof.iter_mut().zip(minus) {
            *p -= m;
        }
    }
    prof
}

/// Exact per-bucket counts by convolution, without enumerating scenarios.
pub fn count_by_bucket_fast(space: &ScenarioSpace, profile: &Profile) -> Result<BucketCounts> {
    let (model, shape) = fast_prepare(space, profile)?;
    let all = buckets_from_distribution(&model, &distribution(model.contributions(), &full_masks(space), None));
    let prof = profile_buckets(&model, &shape);
    Ok(BucketCounts::from_vecs(model.k_max(), all, prof))
}

pub fn tally_fast(space: &ScenarioSpace, profile: &Profile) -> Result<BucketTally> {
    let (model, shape) = fast_prepare(space, profile)?;
    let cards = space.cardinalities();
    let all = buckets_from_distribution(&model, &distribution(model.contributions(), &full_masks(space), None));
    let prof = profile_buckets(&model, &shape);
    let mut hist = histograms_from_masks(&model, &shape.masks, &cards);
    if let Some(excluded) = shape.excluded_masks() {
        hist.subtract(&histograms_from_masks(&model, &excluded, &cards));
    }
    Ok(BucketTally {
        counts: BucketCounts::from_vecs(model.k_max(), all, prof),
        histograms: hist,
    })
}

/// Convolution when the constraint allows it, brute force otherwise.
pub fn count_by_bucket(space: &ScenarioSpace, profile: &Profile) -> Result<BucketCounts> {
    match count_by_bucket_fast(space, profile) {
        Err(Error::UnsupportedShape(_)) => count_by_bucket_bruteforce(space, profile),
        other => other,
    }
}

/// Counts and histograms, by convolution when the constraint allows it.
pub fn tally(space: &ScenarioSpace, profile: &Profile, use_fast: bool) -> Result<BucketTally> {
    if use_fast {
        match tally_fast(space, profile) {
            Err(Error::UnsupportedShape(_)) => {}
            other => return other,
        }
    }
    tally_bruteforce(space, profile)
}

/// Lexicographic iterator over the admissible scenarios of one bucket.
///
/// Walks the product space depth-first, pruning prefixes whose reachable
/// score range misses the bucket.
pub struct BucketMembers {
    contributions: Vec<Vec<i64>>,
    allowed: Vec<Vec<usize>>,
    suffix_min: Vec<i64>,
    suffix_max: Vec<i64>,
    lo: i64,
    hi: i64,
    filter: CompiledConstraint,
    cursor: Vec<usize>,
    partial: Vec<i64>,
    assignment: Vec<usize>,
    depth: usize,
    done: bool,
}

impl BucketMembers {
    pub fn new(space: &ScenarioSpace, profile: &Profile, k: u32) -> Result<Self> {
        let model = ScoreModel::new(space, profile)?;
        if k > model.k_max() {
            return Err(Error::BucketOutOfRange { k, k_max: model.k_max() });
        }
        let filter = profile.constraint.compile(space)?;
        let masks = match profile.constraint.conjunctive_shape(space) {
            Ok(shape) => shape.masks,
            Err(Error::UnsupportedShape(_)) => full_masks(space),
            Err(e) => return Err(e),
        };
        let contributions = model.contributions().to_vec();
        let allowed: Vec<Vec<usize>> = contributions
            .iter()
            .zip(&masks)
            .map(|(row, &m)| (0..row.len()).filter(|&v| m & (1u64 << v) != 0).collect())
            .collect();
        let n = contributions.len();
        let mut suffix_min = vec![0i64; n + 1];
        let mut suffix_max = vec![0i64; n + 1];
        let mut empty = false;
        for pos in (0..n).rev() {
            let vals = allowed[pos].iter().map(|&v| contributions[pos][v]);
            match (vals.clone().min(), vals.max()) {
                (Some(lo), Some(hi)) => {
                    suffix_min[pos] = suffix_min[pos + 1] + lo;
                    suffix_max[pos] = suffix_max[pos + 1] + hi;
                }
                _ => empty = true,
            }
        }
        let (lo, hi) = model.total_range(k);
        Ok(BucketMembers {
            contributions,
            allowed,
            suffix_min,
            suffix_max,
            lo,
            hi,
            filter,
            cursor: vec![0; n],
            partial: vec![0; n + 1],
            assignment: vec![0; n],
            depth: 0,
            done: empty,
        })
    }

    fn backtrack(&mut self) {
        if self.depth == 0 {
            self.done = true;
        } else {
            self.depth -= 1;
        }
    }
}

impl Iterator for BucketMembers {
    type Item = Scenario;

    fn next(&mut self) -> Option<Scenario> {
        let n = self.allowed.len();
        while !self.done {
            let d = self.depth;
            if d == n {
                let hit = self.filter.matches(&self.assignment);
                let out = hit.then(|| Scenario::new(self.assignment.clone()));
                self.backtrack();
                if out.is_some() {
                    return out;
                }
                continue;
            }
            let c = self.cursor[d];
            if c >= self.allowed[d].len() {
                self.backtrack();
                continue;
            }
            self.cursor[d] += 1;
            let v = self.allowed[d][c];
            let s = self.partial[d] + self.contributions[d][v];
            if s + self.suffix_min[d + 1] > self.hi || s + self.suffix_max[d + 1] < self.lo {
                continue;
            }
            self.assignment[d] = v;
            self.partial[d + 1] = s;
            self.depth = d + 1;
            if d + 1 < n {
                self.cursor[d + 1] = 0;
            }
        }
        None
    }
}

/// A page of the admissible scenarios in bucket `k`, in lexicographic order.
pub fn bucket_members(
    space: &ScenarioSpace,
    profile: &Profile,
    k: u32,
    offset: usize,
    limit: usize,
) -> Result<Vec<Scenario>> {
    if limit == 0 {
        return Ok(Vec::new());
    }
    Ok(BucketMembers::new(space, profile, k)?.skip(offset).take(limit).collect())
}
