//! Full per-profile analysis: counts, variance curves and collapse thresholds.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::counting::{tally, BucketCounts};
use crate::diversity::{curves_from_tally, VarianceCurve};
use crate::error::Result;
use crate::model::{Profile, ScenarioSpace};
use crate::rational::Rational;

/// V above which a bucket counts as part of the plateau.
pub const PLATEAU_V: f64 = 0.9;
/// V below which a feature counts as collapsed.
pub const COLLAPSE_V: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub use_fast_counting: bool,
    pub exclude_constrained: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            use_fast_counting: true,
            exclude_constrained: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low_cd_collapse: Option<Rational>,
    pub high_cd_collapse: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileAnalysis {
    pub profile_id: String,
    pub profile_version: u64,
    pub space_fingerprint: String,
    pub total_all: u64,
    pub total_profile: u64,
    pub percentage: f64,
    pub k_max: u32,
    pub delta: Rational,
    pub constrained_features: Vec<u32>,
    pub buckets: BucketCounts,
    pub curves: Vec<VarianceCurve>,
    pub thresholds: Thresholds,
}

impl ProfileAnalysis {
    /// `"290304 / 331776 (87.5%)"`.
    pub fn summary(&self) -> String {
        format!("{} / {} ({:.1}%)", self.total_profile, self.total_all, self.percentage)
    }
}

/// Collapse thresholds from curves of unconstrained features.
///
/// Plateau buckets are those where every curve exceeds [`PLATEAU_V`]. The low
/// threshold is the highest cd below the first plateau bucket where some curve
/// drops under [`COLLAPSE_V`]; the high threshold mirrors it above the last
/// plateau bucket.
pub fn collapse_thresholds(curves: &[&VarianceCurve]) -> Thresholds {
    let mut ks: Vec<(u32, Rational)> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| (p.k, p.cd)))
        .collect();
    ks.sort();
    ks.dedup();
    let v_at = |k: u32| curves.iter().filter_map(move |c| c.points.iter().find(|p| p.k == k).map(|p| p.v));
    let plateau: Vec<u32> = ks
        .iter()
        .map(|&(k, _)| k)
        .filter(|&k| v_at(k).all(|v| v > PLATEAU_V))
        .collect();
    let (Some(&first), Some(&last)) = (plateau.first(), plateau.last()) else {
        return Thresholds::default();
    };
    let collapsed = |k: u32| v_at(k).any(|v| v < COLLAPSE_V);
    Thresholds {
        low_cd_collapse: ks.iter().rev().find(|&&(k, _)| k < first && collapsed(k)).map(|&(_, cd)| cd),
        high_cd_collapse: ks.iter().find(|&&(k, _)| k > last && collapsed(k)).map(|&(_, cd)| cd),
    }
}

pub fn analyze(space: &ScenarioSpace, profile: &Profile, options: AnalyzeOptions) -> Result<ProfileAnalysis> {
    let t = tally(space, profile, options.use_fast_counting)?;
    let constrained = profile.constraint.constrained_features(space)?;
    let constrained_set: BTreeSet<u32> = constrained.iter().copied().collect();
    let all_curves = curves_from_tally(space, &t, &BTreeSet::new());
    let free: Vec<&VarianceCurve> = all_curves
        .iter()
        .filter(|c| !constrained_set.contains(&c.feature_id))
        .collect();
    let thresholds = collapse_thresholds(&free);
    let curves = if options.exclude_constrained {
        free.into_iter().cloned().collect()
    } else {
        all_curves
    };
    let total_all = t.counts.total_all();
    let total_profile = t.counts.total_profile();
    let model = crate::scoring::ScoreModel::new(space, profile)?;
    Ok(ProfileAnalysis {
        profile_id: profile.profile_id.clone(),
        profile_version: profile.version,
        space_fingerprint: space.fingerprint(),
        total_all,
        total_profile,
        percentage: 100.0 * total_profile as f64 / total_all as f64,
        k_max: t.counts.k_max,
        delta: model.delta(),
        constrained_features: constrained,
        buckets: t.counts,
        curves,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::CurvePoint;
    use crate::presets::{builtin_crosswalk_space, builtin_profiles};

    fn curve(vs: &[(u32, f64)]) -> VarianceCurve {
        VarianceCurve {
            feature_id: 1,
            feature_name: "f".into(),
            points: vs
                .iter()
                .map(|&(k, v)| CurvePoint {
                    k,
                    cd: Rational::new(k as i64, 10),
                    v,
                })
                .collect(),
        }
    }

    #[test]
    fn thresholds_bracket_the_plateau() {
        let c = curve(&[(1, 0.2), (2, 0.4), (3, 0.7), (4, 0.95), (5, 0.97), (6, 0.6), (7, 0.3)]);
        let t = collapse_thresholds(&[&c]);
        assert_eq!(t.low_cd_collapse, Some(Rational::new(2, 10)));
        assert_eq!(t.high_cd_collapse, Some(Rational::new(7, 10)));
        let flat = curve(&[(1, 0.6), (2, 0.7)]);
        assert_eq!(collapse_thresholds(&[&flat]), Thresholds::default());
    }

    #[test]
    fn profile1_summary() {
        let space = builtin_crosswalk_space();
        let a = analyze(&space, &builtin_profiles()[0], AnalyzeOptions::default()).unwrap();
        assert_eq!(a.summary(), "290304 / 331776 (87.5%)");
        assert_eq!(a.curves.len(), 12);
        assert!(a.constrained_features.is_empty());
        assert!(a.thresholds.low_cd_collapse.is_some());
        assert_eq!(a.delta, Rational::new(5, 43));
    }

    #[test]
    fn fast_and_brute_agree() {
        let space = builtin_crosswalk_space();
        for p in builtin_profiles() {
            let fast = analyze(&space, &p, AnalyzeOptions { use_fast_counting: true, exclude_constrained: true }).unwrap();
            let brute = analyze(&space, &p, AnalyzeOptions { use_fast_counting: false, exclude_constrained: true }).unwrap();
            assert_eq!(fast, brute, "{}", p.profile_id);
            assert!((fast.percentage - 100.0 * fast.total_profile as f64 / fast.total_all as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn profile3_excludes_its_fixed_features() {
        let space = builtin_crosswalk_space();
        let opts = AnalyzeOptions { use_fast_counting: true, exclude_constrained: true };
        let a = analyze(&space, &builtin_profiles()[2], opts).unwrap();
        assert_eq!(a.summary(), "16384 / 331776 (4.9%)");
        assert_eq!(a.constrained_features, vec![1, 4, 5, 12]);
        assert_eq!(a.curves.len(), 8);
    }
}
