//! Shared safety vocabulary: integrity levels, performance classes,
//! demand profiles, verdicts and safe-state commands.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SafetyError {
    #[error("no performance class configured for {0}; supply an explicit SIL mapping")]
    UnmappedSil(SilLevel),
    #[error("unknown safety integrity level `{0}`")]
    UnknownSil(String),
    #[error("unknown performance class `{0}`")]
    UnknownClass(String),
    #[error("invalid demand profile: {0}")]
    InvalidProfile(String),
    #[error("safe value must be finite, got {0}")]
    NonFiniteSafeValue(f64),
}

/// Safety Integrity Level. ASIL labels A-D are accepted as aliases when parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SilLevel {
    Sil1,
    Sil2,
    Sil3,
    Sil4,
}

impl SilLevel {
    pub const ALL: [SilLevel; 4] = [SilLevel::Sil1, SilLevel::Sil2, SilLevel::Sil3, SilLevel::Sil4];

    pub fn as_str(&self) -> &'static str {
        match self {
            SilLevel::Sil1 => "SIL1",
            SilLevel::Sil2 => "SIL2",
            SilLevel::Sil3 => "SIL3",
            SilLevel::Sil4 => "SIL4",
        }
    }
}

impl fmt::Display for SilLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SilLevel {
    type Err = SafetyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace(' ', "").as_str() {
            "SIL1" | "ASILA" => Ok(SilLevel::Sil1),
            "SIL2" | "ASILB" => Ok(SilLevel::Sil2),
            "SIL3" | "ASILC" => Ok(SilLevel::Sil3),
            "SIL4" | "ASILD" => Ok(SilLevel::Sil4),
            _ => Err(SafetyError::UnknownSil(s.to_string())),
        }
    }
}

impl TryFrom<String> for SilLevel {
    type Error = SafetyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SilLevel> for String {
    fn from(s: SilLevel) -> Self {
        s.as_str().to_string()
    }
}

/// Sensor-style performance class A-F.
///
/// Each class demands that the probability of an in-range output exceed
/// `1 - tail`. The tail is the stored quantity; the threshold is derived
/// from it so that comparisons can be carried out on the tails directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PerformanceClass {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl PerformanceClass {
    pub const ALL: [PerformanceClass; 6] = [
        PerformanceClass::A,
        PerformanceClass::B,
        PerformanceClass::C,
        PerformanceClass::D,
        PerformanceClass::E,
        PerformanceClass::F,
    ];

    /// Permitted probability of an out-of-range (dangerous) output.
    pub fn tail(&self) -> f64 {
        match self {
            PerformanceClass::A => 2.4e-3,
            PerformanceClass::B => 1.0e-5,
            PerformanceClass::C => 3.0e-6,
            PerformanceClass::D => 2.5e-7,
            PerformanceClass::E => 2.5e-8,
            PerformanceClass::F => 2.5e-9,
        }
    }

    /// Minimum in-range probability, `1 - tail`.
    pub fn threshold(&self) -> f64 {
        1.0 - self.tail()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PerformanceClass::A => "A",
            PerformanceClass::B => "B",
            PerformanceClass::C => "C",
            PerformanceClass::D => "D",
            PerformanceClass::E => "E",
            PerformanceClass::F => "F",
        }
    }
}

/// Convenience wrapper for [`PerformanceClass::threshold`].
pub fn class_threshold(class: PerformanceClass) -> f64 {
    class.threshold()
}

impl fmt::Display for PerformanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerformanceClass {
    type Err = SafetyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(PerformanceClass::A),
            "B" | "b" => Ok(PerformanceClass::B),
            "C" | "c" => Ok(PerformanceClass::C),
            "D" | "d" => Ok(PerformanceClass::D),
            "E" | "e" => Ok(PerformanceClass::E),
            "F" | "f" => Ok(PerformanceClass::F),
            _ => Err(SafetyError::UnknownClass(s.to_string())),
        }
    }
}

impl TryFrom<String> for PerformanceClass {
    type Error = SafetyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PerformanceClass> for String {
    fn from(c: PerformanceClass) -> Self {
        c.as_str().to_string()
    }
}

/// SIL to performance-class lookup.
///
/// Only SIL3 -> E is known out of the box. Every other level has to be
/// configured explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilMapping {
    entries: BTreeMap<SilLevel, PerformanceClass>,
}

impl Default for SilMapping {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(SilLevel::Sil3, PerformanceClass::E);
        SilMapping { entries }
    }
}

impl SilMapping {
    /// A mapping with no entries at all.
    pub fn empty() -> Self {
        SilMapping {
            entries: BTreeMap::new(),
        }
    }

    pub fn with(mut self, sil: SilLevel, class: PerformanceClass) -> Self {
        self.entries.insert(sil, class);
        self
    }

    pub fn insert(&mut self, sil: SilLevel, class: PerformanceClass) {
        self.entries.insert(sil, class);
    }

    pub fn entries(&self) -> impl Iterator<Item = (SilLevel, PerformanceClass)> + '_ {
        self.entries.iter().map(|(s, c)| (*s, *c))
    }

    pub fn class_for(&self, sil: SilLevel) -> Result<PerformanceClass, SafetyError> {
        self.entries.get(&sil).copied().ok_or(SafetyError::UnmappedSil(sil))
    }
}

pub fn class_for_sil(sil: SilLevel, mapping: &SilMapping) -> Result<PerformanceClass, SafetyError> {
    mapping.class_for(sil)
}

/// PFH budget `L` and demand rate `D`, both per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct DemandProfile {
    pfh_limit: f64,
    demand_rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    pfh_limit: f64,
    demand_rate: f64,
}

impl TryFrom<RawProfile> for DemandProfile {
    type Error = SafetyError;
    fn try_from(r: RawProfile) -> Result<Self, Self::Error> {
        DemandProfile::new(r.pfh_limit, r.demand_rate)
    }
}

impl DemandProfile {
    pub fn new(pfh_limit: f64, demand_rate: f64) -> Result<Self, SafetyError> {
        if !(demand_rate.is_finite() && demand_rate > 0.0) {
            return Err(SafetyError::InvalidProfile(format!(
                "demand_rate must be finite and > 0, got {demand_rate}"
            )));
        }
        if !(pfh_limit.is_finite() && pfh_limit >= 0.0) {
            return Err(SafetyError::InvalidProfile(format!(
                "pfh_limit must be finite and >= 0, got {pfh_limit}"
            )));
        }
        Ok(DemandProfile { pfh_limit, demand_rate })
    }

    pub fn pfh_limit(&self) -> f64 {
        self.pfh_limit
    }

    pub fn demand_rate(&self) -> f64 {
        self.demand_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Pass,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub detail: String,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict {
            outcome: Outcome::Pass,
            detail: String::new(),
        }
    }

    /// An empty detail is replaced by a generic message so that violations always explain themselves.
    pub fn violation(detail: impl Into<String>) -> Self {
        let mut detail = detail.into();
        if detail.trim().is_empty() {
            detail = "violation".to_string();
        }
        Verdict {
            outcome: Outcome::Violation,
            detail,
        }
    }

    pub fn is_pass(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

/// What a safety mechanism emits in place of an untrusted output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeStateCommand {
    Stop,
    SubstituteSafeValue(f64),
}

impl SafeStateCommand {
    pub fn substitute(value: f64) -> Result<Self, SafetyError> {
        if value.is_finite() {
            Ok(SafeStateCommand::SubstituteSafeValue(value))
        } else {
            Err(SafetyError::NonFiniteSafeValue(value))
        }
    }
}

impl fmt::Display for SafeStateCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafeStateCommand::Stop => f.write_str("stop"),
            SafeStateCommand::SubstituteSafeValue(v) => write!(f, "substitute({v})"),
        }
    }
}

/// What a safety mechanism hands downstream: a value, or a safe-state command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emission {
    Forward(f64),
    Safe(SafeStateCommand),
}

impl Emission {
    pub fn value(&self) -> Option<f64> {
        match self {
            Emission::Forward(v) | Emission::Safe(SafeStateCommand::SubstituteSafeValue(v)) => Some(*v),
            Emission::Safe(SafeStateCommand::Stop) => None,
        }
    }
}
