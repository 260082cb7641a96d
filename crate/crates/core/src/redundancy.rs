//! N-version redundancy with fail-silent channels and k-of-N voting.
//!
//! The system failure probability is computed by exact enumeration of all
//! `3^n` channel states (correct, silent, undetected-wrong). How wrong
//! channels relate to each other is not knowable in general, so two
//! bounding modes are provided: `Concordant` (all wrong channels emit the
//! same wrong value) and `Dissenting` (wrong values never agree with
//! anything).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::safety::{Emission, SafeStateCommand, Verdict};

/// Largest channel count accepted by the enumeration (3^15 ~ 1.4e7 states).
pub const MAX_ENUMERATED_CHANNELS: usize = 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RedundancyError {
    #[error("at least three channels are required, got {0}")]
    TooFewChannels(usize),
    #[error("enumeration supports at most {MAX_ENUMERATED_CHANNELS} channels, got {0}")]
    TooManyChannels(usize),
    #[error("expected {expected} channel outputs, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid voter configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid channel `{id}`: {msg}")]
    InvalidChannel { id: String, msg: String },
    #[error("insufficient diversity: {0}")]
    InsufficientDiversity(String),
    #[error("non-finite channel output")]
    NonFiniteOutput,
    #[error("beta must be a probability in [0, 1], got {0}")]
    InvalidBeta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityAxis {
    Model,
    TrainingData,
    Team,
    InputKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub id: String,
    /// Per demand: emits a dangerous value that its own self-check misses.
    pub p_undetected_wrong: f64,
    /// Per demand: self-check fires and the channel goes silent.
    pub p_detected_fault: f64,
    /// Labelled diversity attributes, e.g. `model = "resnet50"`.
    pub diversity: BTreeMap<DiversityAxis, String>,
}

impl ChannelSpec {
    pub fn new(id: impl Into<String>, p_undetected_wrong: f64, p_detected_fault: f64) -> Self {
        ChannelSpec {
            id: id.into(),
            p_undetected_wrong,
            p_detected_fault,
            diversity: BTreeMap::new(),
        }
    }

    pub fn tag(mut self, axis: DiversityAxis, label: impl Into<String>) -> Self {
        self.diversity.insert(axis, label.into());
        self
    }

    pub fn p_correct(&self) -> f64 {
        1.0 - self.p_undetected_wrong - self.p_detected_fault
    }

    pub fn validate(&self) -> Result<(), RedundancyError> {
        let bad = |msg: String| RedundancyError::InvalidChannel {
            id: self.id.clone(),
            msg,
        };
        for (name, p) in [
            ("p_undetected_wrong", self.p_undetected_wrong),
            ("p_detected_fault", self.p_detected_fault),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.p_undetected_wrong + self.p_detected_fault > 1.0 {
            return Err(bad("p_undetected_wrong + p_detected_fault exceeds 1".into()));
        }
        if self.diversity.is_empty() {
            return Err(bad("at least one diversity tag is required".into()));
        }
        Ok(())
    }

    /// Axes on which two channels differ. An axis declared by only one of
    /// the two counts as a difference.
    fn differing_axes(&self, other: &ChannelSpec) -> usize {
        let mut axes: Vec<&DiversityAxis> = self.diversity.keys().chain(other.diversity.keys()).collect();
        axes.sort();
        axes.dedup();
        axes.into_iter()
            .filter(|a| self.diversity.get(a) != other.diversity.get(a))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WrongOutputMode {
    /// Worst case: every undetected-wrong channel emits the same wrong value.
    #[default]
    Concordant,
    /// Best case: wrong values never agree with each other or with correct ones.
    Dissenting,
}

impl fmt::Display for WrongOutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WrongOutputMode::Concordant => "concordant",
            WrongOutputMode::Dissenting => "dissenting",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVoter", into = "RawVoter")]
pub struct VoterConfig {
    n_channels: usize,
    k_agree: usize,
    agreement_tolerance: f64,
    wrong_output_mode: WrongOutputMode,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVoter {
    n_channels: usize,
    #[serde(default)]
    k_agree: Option<usize>,
    agreement_tolerance: f64,
    #[serde(default)]
    wrong_output_mode: WrongOutputMode,
}

impl TryFrom<RawVoter> for VoterConfig {
    type Error = RedundancyError;
    fn try_from(r: RawVoter) -> Result<Self, Self::Error> {
        let k = r.k_agree.unwrap_or_else(|| VoterConfig::majority_k(r.n_channels));
        VoterConfig::new(r.n_channels, k, r.agreement_tolerance, r.wrong_output_mode)
    }
}

impl From<VoterConfig> for RawVoter {
    fn from(v: VoterConfig) -> Self {
        RawVoter {
            n_channels: v.n_channels,
            k_agree: Some(v.k_agree),
            agreement_tolerance: v.agreement_tolerance,
            wrong_output_mode: v.wrong_output_mode,
        }
    }
}

impl VoterConfig {
    pub fn new(
        n_channels: usize,
        k_agree: usize,
        agreement_tolerance: f64,
        wrong_output_mode: WrongOutputMode,
    ) -> Result<Self, RedundancyError> {
        if n_channels < 3 {
            return Err(RedundancyError::TooFewChannels(n_channels));
        }
        if k_agree < 1 || k_agree > n_channels {
            return Err(RedundancyError::InvalidConfig(format!(
                "k_agree must lie in 1..={n_channels}, got {k_agree}"
            )));
        }
        if !(agreement_tolerance.is_finite() && agreement_tolerance >= 0.0) {
            return Err(RedundancyError::InvalidConfig(format!(
                "agreement_tolerance must be finite and >= 0, got {agreement_tolerance}"
            )));
        }
        Ok(VoterConfig {
            n_channels,
            k_agree,
            agreement_tolerance,
            wrong_output_mode,
        })
    }

    /// `ceil((n + 1) / 2)` votes out of `n`.
    pub fn majority(n_channels: usize, tolerance: f64) -> Result<Self, RedundancyError> {
        Self::new(
            n_channels,
            Self::majority_k(n_channels),
            tolerance,
            WrongOutputMode::Concordant,
        )
    }

    fn majority_k(n: usize) -> usize {
        (n + 2) / 2
    }

    pub fn with_mode(mut self, mode: WrongOutputMode) -> Self {
        self.wrong_output_mode = mode;
        self
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn k_agree(&self) -> usize {
        self.k_agree
    }

    pub fn agreement_tolerance(&self) -> f64 {
        self.agreement_tolerance
    }

    pub fn wrong_output_mode(&self) -> WrongOutputMode {
        self.wrong_output_mode
    }
}

/// Pairwise diversity check over a channel set.
pub fn validate_diversity(channels: &[ChannelSpec]) -> Result<Verdict, RedundancyError> {
    if channels.len() < 3 {
        return Err(RedundancyError::TooFewChannels(channels.len()));
    }
    for c in channels {
        c.validate()?;
    }
    let mut offending = Vec::new();
    for (i, a) in channels.iter().enumerate() {
        for b in &channels[i + 1..] {
            if a.differing_axes(b) == 0 {
                offending.push(format!("({}, {})", a.id, b.id));
            }
        }
    }
    Ok(if offending.is_empty() {
        Verdict::pass()
    } else {
        Verdict::violation(format!("channels without any diversity: {}", offending.join(", ")))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelOutput {
    Value(f64),
    Silent,
}

/// Votes over channel outputs; returns the median of the unique largest
/// agreement cluster, or `Stop` when no cluster reaches `k_agree`.
pub fn vote(outputs: &[ChannelOutput], config: &VoterConfig) -> Result<Emission, RedundancyError> {
    if outputs.len() != config.n_channels {
        return Err(RedundancyError::LengthMismatch {
            expected: config.n_channels,
            got: outputs.len(),
        });
    }
    vote_values(outputs, config.k_agree, config.agreement_tolerance)
}

pub(crate) fn vote_values(outputs: &[ChannelOutput], k_agree: usize, tol: f64) -> Result<Emission, RedundancyError> {
    let mut values = Vec::with_capacity(outputs.len());
    for o in outputs {
        if let ChannelOutput::Value(v) = o {
            if !v.is_finite() {
                return Err(RedundancyError::NonFiniteOutput);
            }
            values.push(*v);
        }
    }
    if values.is_empty() {
        return Ok(Emission::Safe(SafeStateCommand::Stop));
    }
    values.sort_by(f64::total_cmp);

    // single-linkage clusters as index ranges into the sorted values
    let mut best: Option<(usize, usize)> = None;
    let mut tied = false;
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            let len = i - start;
            match best {
                Some((_, l)) if len == l => tied = true,
                Some((_, l)) if len < l => {}
                _ => {
                    best = Some((start, len));
                    tied = false;
                }
            }
            start = i;
        }
    }
    let (s, len) = best.expect("nonempty values form at least one cluster");
    if tied || len < k_agree {
        return Ok(Emission::Safe(SafeStateCommand::Stop));
    }
    let cluster = &values[s..s + len];
    let median = if len % 2 == 1 {
        cluster[len / 2]
    } else {
        0.5 * (cluster[len / 2 - 1] + cluster[len / 2])
    };
    Ok(Emission::Forward(median))
}

/// Probability mass of each system-level outcome per demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomePartition {
    /// A wrong value wins the vote.
    pub dangerous: f64,
    /// No cluster qualifies; the voter commands the safe state.
    pub safe_state: f64,
    /// A correct value wins the vote.
    pub correct: f64,
}

impl OutcomePartition {
    pub fn total(&self) -> f64 {
        self.dangerous + self.safe_state + self.correct
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SystemOutcome {
    Dangerous,
    SafeState,
    Correct,
}

/// Decides the vote for `correct` agreeing correct channels and `wrong`
/// undetected-wrong channels; silent channels do not take part.
fn decide(correct: usize, wrong: usize, k_agree: usize, mode: WrongOutputMode) -> SystemOutcome {
    let wrong_largest = match mode {
        WrongOutputMode::Concordant => wrong,
        WrongOutputMode::Dissenting => wrong.min(1),
    };
    let wrong_clusters_at_max = match mode {
        WrongOutputMode::Concordant => usize::from(wrong > 0),
        WrongOutputMode::Dissenting => wrong,
    };
    if correct > wrong_largest {
        if correct >= k_agree {
            SystemOutcome::Correct
        } else {
            SystemOutcome::SafeState
        }
    } else if wrong_largest > correct {
        // unique only if a single wrong cluster has the maximum size
        if wrong_clusters_at_max == 1 && wrong_largest >= k_agree {
            SystemOutcome::Dangerous
        } else {
            SystemOutcome::SafeState
        }
    } else {
        // tie between the correct cluster and a wrong one, or nothing at all
        SystemOutcome::SafeState
    }
}

/// Exact enumeration over all `3^n` channel states, with no diversity or
/// minimum-channel checks. Summation runs in a fixed lexicographic order.
pub fn enumerate_outcomes(
    channels: &[ChannelSpec],
    k_agree: usize,
    mode: WrongOutputMode,
) -> Result<OutcomePartition, RedundancyError> {
    let n = channels.len();
    if n > MAX_ENUMERATED_CHANNELS {
        return Err(RedundancyError::TooManyChannels(n));
    }
    if k_agree < 1 || k_agree > n.max(1) {
        return Err(RedundancyError::InvalidConfig(format!(
            "k_agree must lie in 1..={n}, got {k_agree}"
        )));
    }
    for c in channels {
        let bad = |msg: String| RedundancyError::InvalidChannel { id: c.id.clone(), msg };
        if !(0.0..=1.0).contains(&c.p_undetected_wrong) || !(0.0..=1.0).contains(&c.p_detected_fault) {
            return Err(bad("probabilities must lie in [0, 1]".into()));
        }
        if c.p_undetected_wrong + c.p_detected_fault > 1.0 {
            return Err(bad("p_undetected_wrong + p_detected_fault exceeds 1".into()));
        }
    }

    let mut part = OutcomePartition {
        dangerous: 0.0,
        safe_state: 0.0,
        correct: 0.0,
    };
    let states = 3usize.pow(n as u32);
    // per-channel state: 0 = correct, 1 = silent, 2 = undetected wrong
    let mut digits = vec![0u8; n];
    for _ in 0..states {
        let mut prob = 1.0;
        let (mut c_count, mut w_count) = (0, 0);
        for (ch, d) in channels.iter().zip(&digits) {
            prob *= match d {
                0 => {
                    c_count += 1;
                    ch.p_correct()
                }
                1 => ch.p_detected_fault,
                _ => {
                    w_count += 1;
                    ch.p_undetected_wrong
                }
            };
        }
        match decide(c_count, w_count, k_agree, mode) {
            SystemOutcome::Dangerous => part.dangerous += prob,
            SystemOutcome::SafeState => part.safe_state += prob,
            SystemOutcome::Correct => part.correct += prob,
        }
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < 3 {
                break;
            }
            *d = 0;
        }
    }
    Ok(part)
}

/// System outcome partition per demand for a diverse channel set.
/// Fails unless the channel set passes [`validate_diversity`].
pub fn system_dangerous_prob_per_demand(
    channels: &[ChannelSpec],
    config: &VoterConfig,
) -> Result<OutcomePartition, RedundancyError> {
    let verdict = validate_diversity(channels)?;
    if !verdict.is_pass() {
        return Err(RedundancyError::InsufficientDiversity(verdict.detail));
    }
    system_outcomes_unchecked(channels, config)
}

/// Same as [`system_dangerous_prob_per_demand`] with the diversity check
/// explicitly overridden. Channel count and probabilities are still validated.
pub fn system_outcomes_unchecked(
    channels: &[ChannelSpec],
    config: &VoterConfig,
) -> Result<OutcomePartition, RedundancyError> {
    if channels.len() != config.n_channels {
        return Err(RedundancyError::LengthMismatch {
            expected: config.n_channels,
            got: channels.len(),
        });
    }
    enumerate_outcomes(channels, config.k_agree, config.wrong_output_mode)
}

/// Beta-factor extension: `beta * p_channel + (1 - beta) * p_independent`.
/// For heterogeneous channels `p_channel` is the largest single-channel
/// undetected-wrong probability.
pub fn with_common_cause(
    channels: &[ChannelSpec],
    config: &VoterConfig,
    beta_ccf: f64,
) -> Result<f64, RedundancyError> {
    if !(0.0..=1.0).contains(&beta_ccf) {
        return Err(RedundancyError::InvalidBeta(beta_ccf));
    }
    let independent = system_dangerous_prob_per_demand(channels, config)?.dangerous;
    let p_channel = channels.iter().map(|c| c.p_undetected_wrong).fold(0.0, f64::max);
    Ok(beta_ccf * p_channel + (1.0 - beta_ccf) * independent)
}

/// Both bounding modes side by side, as carried into reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingPair {
    pub concordant: OutcomePartition,
    pub dissenting: OutcomePartition,
}

pub fn bounding_pair(channels: &[ChannelSpec], config: &VoterConfig) -> Result<BoundingPair, RedundancyError> {
    Ok(BoundingPair {
        concordant: system_dangerous_prob_per_demand(channels, &config.with_mode(WrongOutputMode::Concordant))?,
        dissenting: system_dangerous_prob_per_demand(channels, &config.with_mode(WrongOutputMode::Dissenting))?,
    })
}
