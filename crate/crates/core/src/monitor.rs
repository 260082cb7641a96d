//! Runtime safety monitor wrapped around an untrusted component.
//!
//! The monitor is deliberately deductive: a static envelope, a per-demand
//! rate-of-change limit and a plausibility check against a feedback signal.
//! A violation forces the configured safe state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::safety::{DemandProfile, Emission, SafeStateCommand, Verdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("non-finite {0} passed to monitor")]
    NonFiniteInput(&'static str),
    #[error("plausibility check enabled but no feedback signal supplied")]
    PlausibilityUnavailable,
    #[error("invalid monitor policy: {0}")]
    InvalidPolicy(String),
    #[error("{name} must be a probability in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorPolicy {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_range: Option<Envelope>,
    /// Largest permitted change between consecutive demands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rate_of_change: Option<f64>,
    /// Largest permitted deviation from the feedback signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausibility: Option<f64>,
}

impl MonitorPolicy {
    pub fn range(min: f64, max: f64) -> Self {
        MonitorPolicy {
            static_range: Some(Envelope { min, max }),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), MonitorError> {
        if self.static_range.is_none() && self.max_rate_of_change.is_none() && self.plausibility.is_none() {
            return Err(MonitorError::InvalidPolicy("at least one check must be enabled".into()));
        }
        if let Some(Envelope { min, max }) = self.static_range {
            if !(min.is_finite() && max.is_finite() && min < max) {
                return Err(MonitorError::InvalidPolicy(format!(
                    "static range needs min < max, got ({min}, {max})"
                )));
            }
        }
        for (name, bound) in [
            ("max_rate_of_change", self.max_rate_of_change),
            ("plausibility", self.plausibility),
        ] {
            if let Some(b) = bound {
                if !(b.is_finite() && b > 0.0) {
                    return Err(MonitorError::InvalidPolicy(format!(
                        "{name} must be finite and > 0, got {b}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorState {
    policy: MonitorPolicy,
    on_violation: SafeStateCommand,
    last_output: Option<f64>,
    tripped: bool,
}

impl MonitorState {
    pub fn new(policy: MonitorPolicy, on_violation: SafeStateCommand) -> Result<Self, MonitorError> {
        policy.validate()?;
        if let SafeStateCommand::SubstituteSafeValue(v) = on_violation {
            if !v.is_finite() {
                return Err(MonitorError::NonFiniteInput("safe value"));
            }
        }
        Ok(MonitorState {
            policy,
            on_violation,
            last_output: None,
            tripped: false,
        })
    }

    pub fn policy(&self) -> &MonitorPolicy {
        &self.policy
    }

    pub fn last_output(&self) -> Option<f64> {
        self.last_output
    }

    pub fn is_tripped(&self) -> bool {
        self.tripped
    }

    /// Clears the latch and the rate-of-change history.
    pub fn reset(&mut self) {
        self.tripped = false;
        self.last_output = None;
    }

    /// Runs every enabled check on `value`. Records `value` as the last output.
    pub fn check(&mut self, value: f64, feedback: Option<f64>) -> Result<Verdict, MonitorError> {
        if !value.is_finite() {
            return Err(MonitorError::NonFiniteInput("output"));
        }
        let mut problems = Vec::new();
        if let Some(Envelope { min, max }) = self.policy.static_range {
            if value < min || value > max {
                problems.push(format!("{value} outside [{min}, {max}]"));
            }
        }
        if let Some(bound) = self.policy.plausibility {
            let fb = feedback.ok_or(MonitorError::PlausibilityUnavailable)?;
            if !fb.is_finite() {
                return Err(MonitorError::NonFiniteInput("feedback"));
            }
            if (value - fb).abs() > bound {
                problems.push(format!(
                    "deviation {} from feedback exceeds {bound}",
                    (value - fb).abs()
                ));
            }
        }
        if let (Some(bound), Some(last)) = (self.policy.max_rate_of_change, self.last_output) {
            if (value - last).abs() > bound {
                problems.push(format!("step {} exceeds rate limit {bound}", (value - last).abs()));
            }
        }
        self.last_output = Some(value);
        Ok(if problems.is_empty() {
            Verdict::pass()
        } else {
            Verdict::violation(problems.join("; "))
        })
    }

    /// Supervises one item: forward, substitute, or stop.
    pub fn step(&mut self, value: f64, feedback: Option<f64>) -> Result<Emission, MonitorError> {
        if self.tripped {
            return Ok(Emission::Safe(SafeStateCommand::Stop));
        }
        let verdict = self.check(value, feedback)?;
        if verdict.is_pass() {
            return Ok(Emission::Forward(value));
        }
        if self.on_violation == SafeStateCommand::Stop {
            self.tripped = true;
        }
        Ok(Emission::Safe(self.on_violation))
    }

    pub fn supervise<I>(&mut self, outputs: I) -> Result<Vec<Emission>, MonitorError>
    where
        I: IntoIterator<Item = f64>,
    {
        outputs.into_iter().map(|v| self.step(v, None)).collect()
    }

    pub fn supervise_with_feedback<I>(&mut self, items: I) -> Result<Vec<Emission>, MonitorError>
    where
        I: IntoIterator<Item = (f64, Option<f64>)>,
    {
        items.into_iter().map(|(v, fb)| self.step(v, fb)).collect()
    }
}

/// Coupling between the component and its monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependenceModel {
    /// Per-demand probability that the monitor misses a dangerous output.
    pub monitor_miss_prob: f64,
    /// Common-cause fraction that defeats component and monitor together.
    pub beta_ccf: f64,
}

impl IndependenceModel {
    pub fn new(monitor_miss_prob: f64, beta_ccf: f64) -> Result<Self, MonitorError> {
        let m = IndependenceModel {
            monitor_miss_prob,
            beta_ccf,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MonitorError> {
        check_prob("monitor_miss_prob", self.monitor_miss_prob)?;
        check_prob("beta_ccf", self.beta_ccf)
    }

    /// Probability that a dangerous output slips past the monitor.
    pub fn escape_prob(&self) -> f64 {
        self.beta_ccf + (1.0 - self.beta_ccf) * self.monitor_miss_prob
    }
}

fn check_prob(name: &'static str, value: f64) -> Result<(), MonitorError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(MonitorError::InvalidProbability { name, value })
    }
}

/// Dangerous failures per hour left over after monitoring:
/// `D * p * (beta + (1 - beta) * miss)`.
pub fn residual_dangerous_rate(
    p_dangerous_per_demand: f64,
    independence: &IndependenceModel,
    profile: &DemandProfile,
) -> Result<f64, MonitorError> {
    check_prob("p_dangerous_per_demand", p_dangerous_per_demand)?;
    independence.validate()?;
    Ok(profile.demand_rate() * p_dangerous_per_demand * independence.escape_prob())
}
