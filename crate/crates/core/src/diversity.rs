//! Evenness of feature values within a difficulty bucket.
//!
//! `V = 1 - JSD(empirical, uniform)`, with the divergence taken in bits so it
//! stays in `[0, 1]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::counting::{tally, BucketTally};
use crate::error::{Error, Result};
use crate::model::{Profile, ScenarioSpace};
use crate::rational::Rational;

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueDistribution {
    pub feature_id: u32,
    pub probabilities: Vec<f64>,
}

impl ValueDistribution {
    pub fn new(feature_id: u32, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::Distribution("no values".into()));
        }
        if probabilities.iter().any(|&p| p.is_nan() || p < 0.0) {
            return Err(Error::Distribution("negative or NaN probability".into()));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE * probabilities.len() as f64 {
            return Err(Error::Distribution(format!("probabilities sum to {sum}")));
        }
        Ok(ValueDistribution {
            feature_id,
            probabilities,
        })
    }

    pub fn uniform(feature_id: u32, n: usize) -> Self {
        ValueDistribution {
            feature_id,
            probabilities: vec![1.0 / n as f64; n],
        }
    }

    /// Normalizes raw frequencies; `None` when they are all zero.
    pub fn from_counts(feature_id: u32, counts: &[u64]) -> Option<Self> {
        let total: u64 = counts.iter().sum();
        (total > 0).then(|| ValueDistribution {
            feature_id,
            probabilities: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

fn kl_bits(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).log2())
        .sum()
}

/// Jensen–Shannon divergence in bits.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Distribution(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let d = 0.5 * kl_bits(p, &m) + 0.5 * kl_bits(q, &m);
    Ok(d.clamp(0.0, 1.0))
}

pub fn jsd_between(p: &ValueDistribution, q: &ValueDistribution) -> Result<f64> {
    jsd(&p.probabilities, &q.probabilities)
}

/// `1 - JSD` against the uniform distribution of the same length.
pub fn variance_of(dist: &ValueDistribution) -> f64 {
    let u = ValueDistribution::uniform(dist.feature_id, dist.len());
    1.0 - jsd(&dist.probabilities, &u.probabilities).expect("equal lengths")
}

fn position(space: &ScenarioSpace, feature_id: u32) -> Result<usize> {
    space.position(feature_id).ok_or(Error::UnknownFeature(feature_id))
}

/// Distribution of one feature among a tally's profile scenarios in bucket `k`.
pub fn distribution_in(tally: &BucketTally, space: &ScenarioSpace, feature_id: u32, k: u32) -> Result<ValueDistribution> {
    let pos = position(space, feature_id)?;
    let k_max = tally.counts.k_max;
    let counts = tally
        .histograms
        .get(k, pos)
        .ok_or(Error::BucketOutOfRange { k, k_max })?;
    ValueDistribution::from_counts(feature_id, counts).ok_or(Error::EmptyBucket(k))
}

pub fn empirical_distribution(
    space: &ScenarioSpace,
    profile: &Profile,
    feature_id: u32,
    k: u32,
) -> Result<ValueDistribution> {
    position(space, feature_id)?;
    distribution_in(&tally(space, profile, true)?, space, feature_id, k)
}

pub fn variance(space: &ScenarioSpace, profile: &Profile, feature_id: u32, k: u32) -> Result<f64> {
    Ok(variance_of(&empirical_distribution(space, profile, feature_id, k)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: u32,
    pub cd: Rational,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub feature_id: u32,
    pub feature_name: String,
    pub points: Vec<CurvePoint>,
}

/// One curve per feature not in `exclude`, over the nonempty buckets.
pub fn curves_from_tally(space: &ScenarioSpace, tally: &BucketTally, exclude: &BTreeSet<u32>) -> Vec<VarianceCurve> {
    space
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| !exclude.contains(&f.feature_id))
        .map(|(pos, f)| VarianceCurve {
            feature_id: f.feature_id,
            feature_name: f.name.clone(),
            points: tally
                .counts
                .nonempty()
                .filter_map(|b| {
                    let hist = tally.histograms.get(b.k, pos)?;
                    let dist = ValueDistribution::from_counts(f.feature_id, hist)?;
                    Some(CurvePoint {
                        k: b.k,
                        cd: b.cd,
                        v: variance_of(&dist),
                    })
                })
                .collect(),
        })
        .collect()
}

pub fn variance_curves(space: &ScenarioSpace, profile: &Profile, exclude: &BTreeSet<u32>) -> Result<Vec<VarianceCurve>> {
    Ok(curves_from_tally(space, &tally(space, profile, true)?, exclude))
}
