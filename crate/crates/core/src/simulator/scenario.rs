use serde::{Deserialize, Serialize};

use crate::monitor::{IndependenceModel, MonitorPolicy};
use crate::quant_eval::{AcceptanceTarget, SafeRange, TargetSpec, DEFAULT_CONFIDENCE};
use crate::redundancy::{VoterConfig, MAX_ENUMERATED_CHANNELS};
use crate::safety::SafeStateCommand;

use super::SimError;

/// Upper bound on simulated demands per run.
pub const MAX_DEMANDS: u64 = 10_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthSignal {
    Constant {
        value: f64,
    },
    Sine {
        amplitude: f64,
        period_demands: f64,
        offset: f64,
    },
    RandomWalk {
        start: f64,
        step_std: f64,
    },
}

/// Synthetic output error of one component (or one redundant channel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModel {
    pub gaussian_std: f64,
    pub bias: f64,
    /// Per-demand probability of a gross error.
    pub gross_error_prob: f64,
    /// Added with a random sign on gross-error demands.
    pub gross_error_magnitude: f64,
    /// Per-demand probability that the channel's self-check fires and it goes
    /// silent. Only meaningful for redundant channels.
    #[serde(default)]
    pub detected_fault_prob: f64,
}

impl ErrorModel {
    pub fn perfect() -> Self {
        ErrorModel {
            gaussian_std: 0.0,
            bias: 0.0,
            gross_error_prob: 0.0,
            gross_error_magnitude: 0.0,
            detected_fault_prob: 0.0,
        }
    }

    fn check(&self, path: &str, problems: &mut Vec<String>) {
        if !(self.gaussian_std.is_finite() && self.gaussian_std >= 0.0) {
            problems.push(format!("{path}.gaussian_std: must be finite and >= 0"));
        }
        if !self.bias.is_finite() {
            problems.push(format!("{path}.bias: must be finite"));
        }
        if !self.gross_error_magnitude.is_finite() {
            problems.push(format!("{path}.gross_error_magnitude: must be finite"));
        }
        for (name, p) in [
            ("gross_error_prob", self.gross_error_prob),
            ("detected_fault_prob", self.detected_fault_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                problems.push(format!("{path}.{name}: must lie in [0, 1]"));
            }
        }
        if self.gross_error_prob + self.detected_fault_prob > 1.0 {
            problems.push(format!("{path}: gross_error_prob + detected_fault_prob exceeds 1"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    Bare {},
    Monitored {
        policy: MonitorPolicy,
        independence: IndependenceModel,
        on_violation: SafeStateCommand,
    },
    Redundant {
        channels: Vec<ErrorModel>,
        voter: VoterConfig,
    },
}

impl Architecture {
    pub fn label(&self) -> &'static str {
        match self {
            Architecture::Bare {} => "bare",
            Architecture::Monitored { .. } => "monitored",
            Architecture::Redundant { .. } => "redundant",
        }
    }
}

/// A complete, seeded fault-injection experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub duration_hours: f64,
    pub demand_rate: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    pub truth: TruthSignal,
    /// Error model of the single component; unused by the redundant architecture.
    pub error_model: ErrorModel,
    pub architecture: Architecture,
    pub safe_range: SafeRange,
    pub target: TargetSpec,
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::InvalidScenario(vec![e.to_string()]))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable as TOML")
    }

    /// `round(D * H)`.
    pub fn demand_count(&self) -> u64 {
        (self.demand_rate * self.duration_hours).round() as u64
    }

    pub fn resolved_target(&self) -> Result<AcceptanceTarget, SimError> {
        self.target
            .resolve(Some(self.demand_rate))
            .map_err(|e| SimError::InvalidScenario(vec![format!("target: {e}")]))
    }

    /// Collects every field-level problem instead of stopping at the first.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        if !(self.duration_hours.is_finite() && self.duration_hours > 0.0) {
            problems.push("duration_hours: must be finite and > 0".to_string());
        }
        if !(self.demand_rate.is_finite() && self.demand_rate > 0.0) {
            problems.push("demand_rate: must be finite and > 0".to_string());
        }
        if problems.is_empty() {
            let n = self.demand_rate * self.duration_hours;
            if n.round() < 1.0 {
                problems.push(format!(
                    "duration_hours * demand_rate = {n}: at least one demand is required"
                ));
            } else if n.round() > MAX_DEMANDS as f64 {
                problems.push(format!(
                    "duration_hours * demand_rate = {n}: exceeds {MAX_DEMANDS} demands"
                ));
            }
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            problems.push("confidence: must lie strictly between 0 and 1".to_string());
        }
        match self.truth {
            TruthSignal::Constant { value } if !value.is_finite() => {
                problems.push("truth.value: must be finite".to_string())
            }
            TruthSignal::Sine {
                amplitude,
                period_demands,
                offset,
            } => {
                if !(amplitude.is_finite() && offset.is_finite()) {
                    problems.push("truth: amplitude and offset must be finite".to_string());
                }
                if !(period_demands.is_finite() && period_demands > 0.0) {
                    problems.push("truth.period_demands: must be finite and > 0".to_string());
                }
            }
            TruthSignal::RandomWalk { start, step_std } => {
                if !start.is_finite() {
                    problems.push("truth.start: must be finite".to_string());
                }
                if !(step_std.is_finite() && step_std >= 0.0) {
                    problems.push("truth.step_std: must be finite and >= 0".to_string());
                }
            }
            _ => {}
        }
        self.error_model.check("error_model", &mut problems);
        if let Err(e) = self.safe_range.validate() {
            problems.push(format!("safe_range: {e}"));
        }
        if let Err(e) = self.target.resolve(Some(self.demand_rate.max(f64::MIN_POSITIVE))) {
            problems.push(format!("target: {e}"));
        }
        match &self.architecture {
            Architecture::Bare {} => {}
            Architecture::Monitored {
                policy,
                independence,
                on_violation,
            } => {
                if let Err(e) = policy.validate() {
                    problems.push(format!("architecture.policy: {e}"));
                }
                if let Err(e) = independence.validate() {
                    problems.push(format!("architecture.independence: {e}"));
                }
                if let SafeStateCommand::SubstituteSafeValue(v) = on_violation {
                    if !v.is_finite() {
                        problems.push("architecture.on_violation: safe value must be finite".to_string());
                    }
                }
            }
            Architecture::Redundant { channels, voter } => {
                if channels.len() != voter.n_channels() {
                    problems.push(format!(
                        "architecture.channels: {} channel(s) declared but voter expects {}",
                        channels.len(),
                        voter.n_channels()
                    ));
                }
                if channels.len() > MAX_ENUMERATED_CHANNELS {
                    problems.push(format!(
                        "architecture.channels: at most {MAX_ENUMERATED_CHANNELS} supported"
                    ));
                }
                for (i, c) in channels.iter().enumerate() {
                    c.check(&format!("architecture.channels[{i}]"), &mut problems);
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidScenario(problems))
        }
    }
}
