//! Quantitative evaluation of the dangerous-output probability.
//!
//! A component passes when the probability `P` of an output inside the
//! safe range exceeds `1 - L/D` (or a performance-class threshold).
//! `P` comes either from a normal output model or from measured samples;
//! for samples only the one-sided lower confidence bound is allowed to
//! carry the verdict.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::safety::{DemandProfile, PerformanceClass, SafetyError, SilLevel, SilMapping};
use crate::stats::{self, Split};

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantError {
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("standard deviation must be finite and > 0, got {0}")]
    InvalidStd(f64),
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    InvalidConfidence(f64),
    #[error("safe range half-width must be finite and >= 0, got {0}")]
    InvalidRange(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error(transparent)]
    Safety(#[from] SafetyError),
}

pub fn check_confidence(c: f64) -> Result<f64, QuantError> {
    if c > 0.0 && c < 1.0 {
        Ok(c)
    } else {
        Err(QuantError::InvalidConfidence(c))
    }
}

/// Where the safe band is centred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    #[default]
    GroundTruth,
    FixedTarget(f64),
}

/// Symmetric band of acceptable error around the reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeRange {
    pub half_width: f64,
    #[serde(default)]
    pub center: CenterMode,
}

impl SafeRange {
    pub fn new(half_width: f64) -> Result<Self, QuantError> {
        Self::with_center(half_width, CenterMode::GroundTruth)
    }

    pub fn with_center(half_width: f64, center: CenterMode) -> Result<Self, QuantError> {
        let r = SafeRange { half_width, center };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), QuantError> {
        if !(self.half_width.is_finite() && self.half_width >= 0.0) {
            return Err(QuantError::InvalidRange(self.half_width));
        }
        if let CenterMode::FixedTarget(v) = self.center {
            if !v.is_finite() {
                return Err(QuantError::NonFinite("safe range target"));
            }
        }
        Ok(())
    }

    /// The band centre for a given ground-truth value.
    pub fn center(&self, truth: f64) -> f64 {
        match self.center {
            CenterMode::GroundTruth => truth,
            CenterMode::FixedTarget(v) => v,
        }
    }

    pub fn contains(&self, value: f64, truth: f64) -> bool {
        (value - self.center(truth)).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalModel {
    pub mean: f64,
    pub std: f64,
}

impl NormalModel {
    pub fn new(mean: f64, std: f64) -> Result<Self, QuantError> {
        if !mean.is_finite() {
            return Err(QuantError::NonFinite("normal model mean"));
        }
        if !(std.is_finite() && std > 0.0) {
            return Err(QuantError::InvalidStd(std));
        }
        Ok(NormalModel { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    pub output: f64,
    pub truth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl EmpiricalSample {
    pub fn new(output: f64, truth: f64) -> Self {
        EmpiricalSample {
            output,
            truth,
            timestamp: None,
        }
    }
}

/// Parses `output,truth[,timestamp]` records. Commas, semicolons and tabs
/// all act as delimiters; a non-numeric first record is taken as a header;
/// blank lines and `#` comments are skipped.
pub fn parse_samples(text: &str) -> Result<Vec<EmpiricalSample>, QuantError> {
    let mut out = Vec::new();
    let mut seen_record = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split([',', ';', '\t']).map(str::trim).collect();
        let first_record = !seen_record;
        seen_record = true;
        if first_record && fields[0].parse::<f64>().is_err() {
            continue;
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(QuantError::Parse {
                line: line_no,
                msg: format!("expected `output,truth[,timestamp]`, got {} field(s)", fields.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64, QuantError> {
            let v: f64 = s.parse().map_err(|_| QuantError::Parse {
                line: line_no,
                msg: format!("{what} `{s}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(QuantError::Parse {
                    line: line_no,
                    msg: format!("{what} is not finite"),
                });
            }
            Ok(v)
        };
        out.push(EmpiricalSample {
            output: num(fields[0], "output")?,
            truth: num(fields[1], "truth")?,
            timestamp: fields.get(2).filter(|s| !s.is_empty()).map(|s| s.to_string()),
        });
    }
    Ok(out)
}

/// The right-hand side of the acceptance inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Minimum in-range probability.
    pub threshold: f64,
    /// Permitted dangerous-output probability, `1 - threshold`.
    pub tail: f64,
    /// Set when `L >= D`: the threshold is clamped to zero and any nonzero P passes.
    pub vacuous: bool,
}

pub fn acceptance_threshold(profile: &DemandProfile) -> Threshold {
    let ratio = profile.pfh_limit() / profile.demand_rate();
    if ratio >= 1.0 {
        Threshold {
            threshold: 0.0,
            tail: 1.0,
            vacuous: true,
        }
    } else {
        Threshold {
            threshold: 1.0 - ratio,
            tail: ratio,
            vacuous: false,
        }
    }
}

/// What an evaluation is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceTarget {
    Class(PerformanceClass),
    Demand(DemandProfile),
}

impl AcceptanceTarget {
    pub fn from_sil(sil: SilLevel, mapping: &SilMapping) -> Result<Self, SafetyError> {
        Ok(AcceptanceTarget::Class(mapping.class_for(sil)?))
    }

    pub fn threshold(&self) -> Threshold {
        match self {
            AcceptanceTarget::Class(c) => Threshold {
                threshold: c.threshold(),
                tail: c.tail(),
                vacuous: false,
            },
            AcceptanceTarget::Demand(p) => acceptance_threshold(p),
        }
    }

    pub fn label(&self) -> String {
        match self {
            AcceptanceTarget::Class(c) => format!("class {c}"),
            AcceptanceTarget::Demand(p) => {
                format!("L={} /h, D={} /h", p.pfh_limit(), p.demand_rate())
            }
        }
    }
}

/// Target as written in config files: exactly one of `class`, `sil` or
/// `pfh_limit` (with `demand_rate`, unless the caller supplies one).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<PerformanceClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sil: Option<SilLevel>,
    /// Extra SIL -> class entries layered over the built-in SIL3 -> E.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sil_mapping: Option<BTreeMap<SilLevel, PerformanceClass>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pfh_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_rate: Option<f64>,
}

impl TargetSpec {
    pub fn class(class: PerformanceClass) -> Self {
        TargetSpec {
            class: Some(class),
            ..Default::default()
        }
    }

    pub fn resolve(&self, default_demand_rate: Option<f64>) -> Result<AcceptanceTarget, QuantError> {
        let chosen = [self.class.is_some(), self.sil.is_some(), self.pfh_limit.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if chosen != 1 {
            return Err(QuantError::InvalidTarget(
                "exactly one of `class`, `sil` or `pfh_limit` must be given".into(),
            ));
        }
        if self.sil_mapping.is_some() && self.sil.is_none() {
            return Err(QuantError::InvalidTarget("`sil_mapping` requires `sil`".into()));
        }
        if self.demand_rate.is_some() && self.pfh_limit.is_none() {
            return Err(QuantError::InvalidTarget("`demand_rate` requires `pfh_limit`".into()));
        }
        if let Some(c) = self.class {
            return Ok(AcceptanceTarget::Class(c));
        }
        if let Some(sil) = self.sil {
            let mut mapping = SilMapping::default();
            for (s, c) in self.sil_mapping.iter().flatten() {
                mapping.insert(*s, *c);
            }
            return Ok(AcceptanceTarget::from_sil(sil, &mapping)?);
        }
        let l = self.pfh_limit.expect("checked above");
        let d = self
            .demand_rate
            .or(default_demand_rate)
            .ok_or_else(|| QuantError::InvalidTarget("`pfh_limit` needs a `demand_rate`".into()))?;
        Ok(AcceptanceTarget::Demand(DemandProfile::new(l, d)?))
    }
}

/// In-range probability of a normally distributed output around `truth`.
pub fn normal_in_range_probability(model: &NormalModel, range: &SafeRange, truth: f64) -> Split {
    let c = range.center(truth);
    let lo = (c - range.half_width - model.mean) / model.std;
    let hi = (c + range.half_width - model.mean) / model.std;
    stats::normal_interval(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub n: u64,
    pub in_range: u64,
    pub p_point: f64,
    pub p_lower_bound: f64,
    /// Upper confidence bound on the out-of-range probability.
    pub q_upper_bound: f64,
}

pub fn empirical_in_range_probability(
    samples: &[EmpiricalSample],
    range: &SafeRange,
    confidence: f64,
) -> Result<EmpiricalEstimate, QuantError> {
    check_confidence(confidence)?;
    if samples.is_empty() {
        return Err(QuantError::EmptySampleSet);
    }
    let mut in_range = 0u64;
    for s in samples {
        if !(s.output.is_finite() && s.truth.is_finite()) {
            return Err(QuantError::NonFinite("sample"));
        }
        if range.contains(s.output, s.truth) {
            in_range += 1;
        }
    }
    let n = samples.len() as u64;
    let bound = stats::clopper_pearson_lower(in_range, n, confidence);
    Ok(EmpiricalEstimate {
        n,
        in_range,
        p_point: in_range as f64 / n as f64,
        p_lower_bound: bound.p,
        q_upper_bound: bound.q,
    })
}

/// Ratio `z = sigma_allow / std` at which a centred normal output exactly
/// meets the class threshold.
pub fn required_sigma_ratio(class: PerformanceClass) -> f64 {
    let per_side = class.tail() / 2.0;
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if stats::normal_sf(mid) > per_side {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Evidence fed into [`evaluate`].
#[derive(Debug, Clone, Copy)]
pub enum Evidence<'a> {
    /// Analytic model; `truth` is the reference the safe band is centred on.
    Normal { model: NormalModel, truth: f64 },
    Samples {
        samples: &'a [EmpiricalSample],
        confidence: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalVerdict {
    Pass,
    Fail,
}

impl fmt::Display for EvalVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalVerdict::Pass => "PASS",
            EvalVerdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub method: String,
    pub p_point: f64,
    pub p_lower_bound: f64,
    /// Conservative dangerous-output probability (complement of `p_lower_bound`).
    pub q_upper_bound: f64,
    pub threshold: f64,
    pub tail: f64,
    pub vacuous: bool,
    pub verdict: EvalVerdict,
    /// `p_lower_bound - threshold`, computed on the tails.
    pub margin: f64,
    pub target: AcceptanceTarget,
    pub half_width: f64,
    pub n: Option<u64>,
    pub in_range: Option<u64>,
    pub confidence: Option<f64>,
}

pub fn evaluate(
    evidence: Evidence<'_>,
    range: &SafeRange,
    target: AcceptanceTarget,
) -> Result<EvaluationResult, QuantError> {
    range.validate()?;
    let th = target.threshold();
    let (method, p_point, lower, n, in_range, confidence) = match evidence {
        Evidence::Normal { model, truth } => {
            let model = NormalModel::new(model.mean, model.std)?;
            if !truth.is_finite() {
                return Err(QuantError::NonFinite("reference value"));
            }
            let s = normal_in_range_probability(&model, range, truth);
            ("normal", s.p, s, None, None, None)
        }
        Evidence::Samples { samples, confidence } => {
            let e = empirical_in_range_probability(samples, range, confidence)?;
            let lower = Split {
                p: e.p_lower_bound,
                q: e.q_upper_bound,
            };
            (
                "empirical",
                e.p_point,
                lower,
                Some(e.n),
                Some(e.in_range),
                Some(confidence),
            )
        }
    };
    let verdict = if lower.q < th.tail {
        EvalVerdict::Pass
    } else {
        EvalVerdict::Fail
    };
    Ok(EvaluationResult {
        method: method.to_string(),
        p_point,
        p_lower_bound: lower.p,
        q_upper_bound: lower.q,
        threshold: th.threshold,
        tail: th.tail,
        vacuous: th.vacuous,
        verdict,
        margin: th.tail - lower.q,
        target,
        half_width: range.half_width,
        n,
        in_range,
        confidence,
    })
}
