//! Built-in crosswalk scenario space and the four reference profiles.

use std::collections::BTreeMap;

use crate::constraint::ConstraintExpr;
use crate::model::{FeatureSchema, Profile, ScenarioSpace, SkillGroup};
use crate::rational::Rational;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn thirds() -> Vec<Rational> {
    vec![r(0, 1), r(1, 3), r(2, 3), r(1, 1)]
}

fn binary() -> Vec<Rational> {
    vec![r(0, 1), r(1, 1)]
}

fn halves() -> Vec<Rational> {
    vec![r(0, 1), r(1, 2), r(1, 1)]
}

/// The 12-feature urban crosswalk space (331776 combinations).
pub fn builtin_crosswalk_space() -> ScenarioSpace {
    let volume = ["mute", "low", "medium", "high"];
    let sound = ["no sound", "sound activated"];
    let features = vec![
        FeatureSchema::new(1, "Type of crossing", 1, vec![r(1, 3), r(2, 3), r(1, 1)])
            .with_labels(["short", "long", "double"]),
        FeatureSchema::new(2, "Night time", 2, binary()).with_labels(["day time", "night time"]),
        FeatureSchema::new(3, "Rain", 2, binary()).with_labels(["sunny", "rainy"]),
        FeatureSchema::new(4, "Presence of pedestrians", 3, halves())
            .with_labels(["no one", "some people", "many people"]),
        FeatureSchema::new(5, "Presence of vehicles", 4, halves())
            .with_labels(["no cars", "some cars", "many cars"]),
        FeatureSchema::new(6, "ssd: church bell", 5, binary()).with_labels(sound),
        FeatureSchema::new(7, "ssd: helicopter", 5, binary()).with_labels(sound),
        FeatureSchema::new(8, "ssd: car waiting at red light", 5, binary()).with_labels(sound),
        FeatureSchema::new(9, "bn: ambulance", 6, thirds()).with_labels(volume),
        FeatureSchema::new(10, "bn: baby crying", 6, thirds()).with_labels(volume),
        FeatureSchema::new(11, "bn: dogs barking", 6, thirds()).with_labels(volume),
        FeatureSchema::new(12, "Traffic light", 7, (1..=6).map(|k| r(k, 6)).collect()).with_labels([
            "no traffic light",
            "basic traffic light",
            "traffic light with pedestrian button",
            "traffic light with countdown timer",
            "traffic light with button and timer",
            "broken or malfunctioning TL",
        ]),
    ];
    let groups = vec![
        SkillGroup::new(1, "Visuospatial awareness"),
        SkillGroup::new(2, "Pattern vision"),
        SkillGroup::new(3, "Social factor"),
        SkillGroup::new(4, "Hazard factor"),
        SkillGroup::new(5, "Sudden sound perception"),
        SkillGroup::new(6, "Tolerance to noise"),
        SkillGroup::new(7, "Rule complexity and hazard factor"),
    ];
    ScenarioSpace { features, groups }
}

/// Training stage for the attention-to-detail profile; each stage caps every
/// background-noise volume at a ceiling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Easy,
    Medium,
    Hard,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Easy, Stage::Medium, Stage::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Easy => "easy",
            Stage::Medium => "medium",
            Stage::Hard => "hard",
        }
    }

    /// Highest admissible volume index (mute=0 .. high=3).
    pub fn volume_ceiling(self) -> usize {
        match self {
            Stage::Easy => 1,
            Stage::Medium => 2,
            Stage::Hard => 3,
        }
    }
}

const BACKGROUND_NOISE: [u32; 3] = [9, 10, 11];
const COUNTDOWN: usize = 3;
const BUTTON_AND_TIMER: usize = 4;

fn profile2_base() -> Vec<ConstraintExpr> {
    vec![
        ConstraintExpr::allow(12, [COUNTDOWN, BUTTON_AND_TIMER]),
        ConstraintExpr::allow(1, [1, 2]),
    ]
}

/// Constraint for one training stage of profile 2.
pub fn profile2_stage(stage: Stage) -> ConstraintExpr {
    let mut args = profile2_base();
    if stage.volume_ceiling() < 3 {
        args.extend(
            BACKGROUND_NOISE
                .iter()
                .map(|&f| ConstraintExpr::allow(f, 0..=stage.volume_ceiling())),
        );
    }
    ConstraintExpr::and(args)
}

/// Constraint presets keyed by profile id, including the staged profile-2 variants.
pub fn profile_presets() -> BTreeMap<String, ConstraintExpr> {
    let mut m = BTreeMap::new();
    m.insert(
        "profile-1".to_string(),
        ConstraintExpr::at_least_one([(6, [1]), (7, [1]), (8, [1])]),
    );
    m.insert("profile-2".to_string(), ConstraintExpr::and(profile2_base()));
    for stage in Stage::ALL {
        m.insert(format!("profile-2-{}", stage.name()), profile2_stage(stage));
    }
    // many/some people, many cars, long/double crossing, absent or broken light
    m.insert(
        "profile-3".to_string(),
        ConstraintExpr::and(vec![
            ConstraintExpr::allow(4, [1, 2]),
            ConstraintExpr::allow(5, [2]),
            ConstraintExpr::allow(1, [1, 2]),
            ConstraintExpr::allow(12, [0, 5]),
        ]),
    );
    m.insert(
        "profile-4".to_string(),
        ConstraintExpr::and(vec![ConstraintExpr::allow(1, [1, 2]), ConstraintExpr::allow(5, [1, 2])]),
    );
    m
}

fn weights(w: [u8; 7]) -> BTreeMap<u32, u8> {
    (1..=7).zip(w).collect()
}

fn profile(id: &str, name: &str, w: [u8; 7], description: &str) -> Profile {
    Profile {
        profile_id: id.to_string(),
        name: name.to_string(),
        weights: weights(w),
        constraint: profile_presets()[id].clone(),
        description: description.to_string(),
        version: 1,
    }
}

/// The four reference profiles.
pub fn builtin_profiles() -> Vec<Profile> {
    vec![
        profile(
            "profile-1",
            "Sound hypersensitive",
            [2, 2, 2, 2, 5, 5, 3],
            "Overwhelmed by loud noises. Every scenario includes at least one sudden sound distractor.",
        ),
        profile(
            "profile-2",
            "Excessively focused attention on a detail",
            [3, 1, 3, 3, 3, 3, 3],
            "Fixates on the traffic-light timer. Scenarios use a timer light and a long or double \
             crossing; staged variants cap background-noise volume.",
        ),
        profile(
            "profile-3",
            "Social anxiety",
            [2, 2, 5, 5, 2, 2, 2],
            "Avoids other pedestrians. Scenarios have people present, many vehicles, a long or \
             double crossing and no reliable traffic light.",
        ),
        profile(
            "profile-4",
            "Intermittent attention",
            [5, 2, 2, 3, 2, 2, 2],
            "Struggles to sustain attention. Scenarios use a long or double crossing with some or \
             many vehicles.",
        ),
    ]
}

/// Resolves a builtin profile id, including `profile-2-easy|medium|hard`.
pub fn builtin_profile(id: &str) -> Option<Profile> {
    let profiles = builtin_profiles();
    if let Some(p) = profiles.iter().find(|p| p.profile_id == id) {
        return Some(p.clone());
    }
    let stage = Stage::ALL
        .into_iter()
        .find(|s| id == format!("profile-2-{}", s.name()))?;
    let mut p = profiles.into_iter().find(|p| p.profile_id == "profile-2")?;
    p.profile_id = id.to_string();
    p.name = format!("{} ({})", p.name, stage.name());
    p.constraint = profile2_stage(stage);
    Some(p)
}

/// Ids accepted by [`builtin_profile`], in display order.
pub fn builtin_profile_ids() -> Vec<String> {
    let mut ids: Vec<String> = builtin_profiles().into_iter().map(|p| p.profile_id).collect();
    ids.extend(Stage::ALL.iter().map(|s| format!("profile-2-{}", s.name())));
    ids
}
