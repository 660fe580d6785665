//! JSON documents for spaces and profiles.

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::model::{Profile, ScenarioSpace};

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Document {
            path,
            message: inner.to_string(),
            line: inner.line(),
            column: inner.column(),
        }
    })
}

pub fn serialize_space(space: &ScenarioSpace) -> String {
    serde_json::to_string_pretty(space).expect("space serializes")
}

/// Parses and validates a space document.
pub fn deserialize_space(text: &str) -> Result<ScenarioSpace> {
    let space: ScenarioSpace = parse(text)?;
    let report = space.validate();
    if report.is_ok() {
        Ok(space)
    } else {
        Err(Error::InvalidSpace(report))
    }
}

pub fn serialize_profile(profile: &Profile) -> String {
    serde_json::to_string_pretty(profile).expect("profile serializes")
}

/// Parses a profile document and checks weight ranges.
///
/// Group coverage and constraint references need a space; see
/// [`deserialize_profile_for`].
pub fn deserialize_profile(text: &str) -> Result<Profile> {
    let profile: Profile = parse(text)?;
    let report = profile.check_weights();
    if report.is_ok() {
        Ok(profile)
    } else {
        Err(Error::InvalidProfile(report.to_string()))
    }
}

/// Parses a profile document and validates it fully against `space`.
pub fn deserialize_profile_for(text: &str, space: &ScenarioSpace) -> Result<Profile> {
    let profile = deserialize_profile(text)?;
    let report = profile.validate(space);
    if report.is_ok() {
        Ok(profile)
    } else {
        Err(Error::InvalidProfile(report.to_string()))
    }
}
