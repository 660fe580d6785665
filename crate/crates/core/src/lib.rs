//! Scenario spaces, difficulty scoring, constraints, counting and sampling
//! for graded exposure sessions.

pub mod analysis;
pub mod constraint;
pub mod counting;
pub mod diversity;
pub mod document;
pub mod enumerate;
pub mod error;
pub mod export;
pub mod model;
pub mod presets;
pub mod rational;
pub mod sampler;
pub mod scoring;

pub use analysis::{analyze, AnalyzeOptions, ProfileAnalysis, Thresholds};
pub use constraint::{CompiledConstraint, ConjunctiveShape, ConstraintExpr, ValueSet};
pub use counting::{BucketCount, BucketCounts, BucketHistograms, BucketMembers, BucketTally};
pub use diversity::{jsd, CurvePoint, ValueDistribution, VarianceCurve};
pub use enumerate::{enumerate, PositionToken, ScenarioStream};
pub use error::{Error, Result};
pub use export::ExportFormat;
pub use model::{FeatureSchema, Profile, Scenario, ScenarioSpace, SkillGroup, ValidationReport, Violation};
pub use rational::Rational;
pub use sampler::{build_path, sample_bucket, SessionPlan, SessionStep, Substitution};
pub use scoring::{BucketIndex, DifficultyScore, ScoreModel};
