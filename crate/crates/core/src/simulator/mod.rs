//! Seeded Monte Carlo fault injection.
//!
//! A run draws `round(D * H)` demands, perturbs the ground truth through
//! the configured error model(s), passes the result through the
//! architecture (bare, monitored or N-version) and classifies what comes
//! out: a value outside the safe range is dangerous, a safe-state command
//! never is.

mod rng;
mod scenario;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitor::MonitorState;
use crate::quant_eval::{AcceptanceTarget, EvalVerdict};
use crate::redundancy::{
    self, BoundingPair, ChannelOutput, ChannelSpec, VoterConfig, WrongOutputMode, MAX_ENUMERATED_CHANNELS,
};
use crate::safety::{Emission, SafeStateCommand};
use crate::stats;

pub use rng::{mix, stream_key, Stream};
pub use scenario::{Architecture, ErrorModel, Scenario, TruthSignal, MAX_DEMANDS};

const CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    InvalidScenario(Vec<String>),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("monitor: {0}")]
    Monitor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Correct,
    Dangerous,
    SafeState,
}

/// One line of the optional per-demand audit trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub demand: u64,
    pub truth: f64,
    /// Raw component outputs; `None` marks a silent channel.
    pub raw: Vec<Option<f64>>,
    pub emission: Emission,
    pub classification: Classification,
}

impl TraceRecord {
    pub fn csv_header() -> &'static str {
        "demand,truth,raw_outputs,emission,classification"
    }

    pub fn to_csv(&self) -> String {
        let raw: Vec<String> = self
            .raw
            .iter()
            .map(|r| r.map_or_else(|| "silent".to_string(), |v| v.to_string()))
            .collect();
        let emission = match self.emission {
            Emission::Forward(v) => v.to_string(),
            Emission::Safe(cmd) => cmd.to_string(),
        };
        let class = match self.classification {
            Classification::Correct => "correct",
            Classification::Dangerous => "dangerous",
            Classification::SafeState => "safe_state",
        };
        format!(
            "{},{},{},{},{}",
            self.demand,
            self.truth,
            raw.join(";"),
            emission,
            class
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

/// Aggregated outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub seed: u64,
    pub architecture: String,
    pub demands: u64,
    pub duration_hours: f64,
    pub demand_rate: f64,
    pub dangerous_events: u64,
    pub safe_state_events: u64,
    pub correct_events: u64,
    pub confidence: f64,
    /// Dangerous events per hour of simulated operation.
    pub rate_per_hour: f64,
    /// One-sided exact Poisson upper bound on the dangerous rate.
    pub rate_upper_bound: f64,
    /// Fraction of demands without a dangerous emission.
    pub p_in_range: f64,
    pub p_in_range_lower: f64,
    pub q_upper_bound: f64,
    /// Fraction of demands not answered by a safe-state command.
    pub availability: f64,
    pub target: AcceptanceTarget,
    pub threshold: f64,
    pub tail: f64,
    pub vacuous: bool,
    pub margin: f64,
    pub verdict: EvalVerdict,
    /// Exact per-demand outcome probabilities for the redundant channel set
    /// under both wrong-output modes (gross errors taken as the only wrong outputs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration: Option<BoundingPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrong_output_mode: Option<WrongOutputMode>,
}

impl Estimate {
    pub fn dangerous_fraction(&self) -> f64 {
        self.dangerous_events as f64 / self.demands as f64
    }
}

#[derive(Clone, Copy)]
struct Draw {
    truth: f64,
    n: usize,
    outputs: [ChannelOutput; MAX_ENUMERATED_CHANNELS],
    monitor_blind: bool,
    /// Emission for stateless architectures, decided during the parallel pass.
    emission: Option<Emission>,
}

fn sign(flag: bool) -> f64 {
    if flag {
        1.0
    } else {
        -1.0
    }
}

/// Draws one channel. Every draw consumes the same three variates in a fixed
/// order so that changing a probability never shifts the noise stream.
fn draw_channel(
    model: &ErrorModel,
    truth: f64,
    seed: u64,
    demand: u64,
    channel: u64,
    allow_silent: bool,
    offset: impl Fn(f64) -> f64,
) -> ChannelOutput {
    let mut rng = rng::stream(seed, Stream::Channel, demand, channel);
    let u: f64 = rng.random();
    let z: f64 = rng.sample(StandardNormal);
    let own_sign = sign(rng.random::<bool>());
    let p_silent = if allow_silent { model.detected_fault_prob } else { 0.0 };
    if u < p_silent {
        return ChannelOutput::Silent;
    }
    let mut v = truth + model.bias + model.gaussian_std * z;
    if u < p_silent + model.gross_error_prob {
        v += offset(own_sign);
    }
    ChannelOutput::Value(v)
}

struct TruthGen {
    signal: TruthSignal,
    walk: Option<(rng::StreamRng, f64)>,
}

impl TruthGen {
    fn new(signal: TruthSignal, seed: u64) -> Self {
        let walk = match signal {
            TruthSignal::RandomWalk { start, .. } => Some((rng::stream(seed, Stream::Truth, 0, 0), start)),
            _ => None,
        };
        TruthGen { signal, walk }
    }

    fn chunk(&mut self, start: u64, len: u64) -> Vec<f64> {
        match self.signal {
            TruthSignal::Constant { value } => vec![value; len as usize],
            TruthSignal::Sine {
                amplitude,
                period_demands,
                offset,
            } => (start..start + len)
                .map(|i| offset + amplitude * (std::f64::consts::TAU * i as f64 / period_demands).sin())
                .collect(),
            TruthSignal::RandomWalk { step_std, .. } => {
                let (rng, current) = self.walk.as_mut().expect("walk state");
                (0..len)
                    .map(|j| {
                        if start + j > 0 {
                            let z: f64 = rng.sample(StandardNormal);
                            *current += step_std * z;
                        }
                        *current
                    })
                    .collect()
            }
        }
    }
}

fn draw_demand(s: &Scenario, demand: u64, truth: f64) -> Draw {
    let mut d = Draw {
        truth,
        n: 1,
        outputs: [ChannelOutput::Silent; MAX_ENUMERATED_CHANNELS],
        monitor_blind: false,
        emission: None,
    };
    match &s.architecture {
        Architecture::Bare {} | Architecture::Monitored { .. } => {
            let m = &s.error_model;
            d.outputs[0] = draw_channel(m, truth, s.seed, demand, 0, false, |own| own * m.gross_error_magnitude);
            match &s.architecture {
                Architecture::Monitored { independence, .. } => {
                    let u: f64 = rng::stream(s.seed, Stream::Monitor, demand, 0).random();
                    d.monitor_blind = u < independence.escape_prob();
                }
                _ => {
                    let ChannelOutput::Value(v) = d.outputs[0] else {
                        unreachable!("bare channel never silent")
                    };
                    d.emission = Some(Emission::Forward(v));
                }
            }
        }
        Architecture::Redundant { channels, voter } => {
            let common = sign(rng::stream(s.seed, Stream::Common, demand, 0).random::<bool>());
            d.n = channels.len();
            for (j, m) in channels.iter().enumerate() {
                let offset = |own: f64| match voter.wrong_output_mode() {
                    WrongOutputMode::Concordant => common * m.gross_error_magnitude,
                    // distinct multiples keep wrong channels apart from each other
                    WrongOutputMode::Dissenting => own * m.gross_error_magnitude * (1 + j) as f64,
                };
                d.outputs[j] = draw_channel(m, truth, s.seed, demand, j as u64, true, offset);
            }
            let e = redundancy::vote(&d.outputs[..d.n], voter).expect("validated channel count and finite outputs");
            d.emission = Some(e);
        }
    }
    d
}

fn classify(s: &Scenario, emission: Emission, truth: f64) -> Classification {
    match emission {
        Emission::Forward(v) if s.safe_range.contains(v, truth) => Classification::Correct,
        Emission::Forward(_) => Classification::Dangerous,
        Emission::Safe(_) => Classification::SafeState,
    }
}

pub fn run(scenario: &Scenario) -> Result<Estimate, SimError> {
    run_with(scenario, &RunOptions::default(), None)
}

/// Runs a scenario, optionally on a dedicated pool and streaming a per-demand trace.
pub fn run_with(
    scenario: &Scenario,
    opts: &RunOptions,
    trace: Option<&mut dyn FnMut(&TraceRecord)>,
) -> Result<Estimate, SimError> {
    scenario.validate()?;
    let pool = match opts.threads {
        None => None,
        Some(t) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| SimError::ThreadPool(e.to_string()))?,
        ),
    };
    simulate(scenario, pool.as_ref(), trace)
}

fn simulate(
    s: &Scenario,
    pool: Option<&rayon::ThreadPool>,
    mut trace: Option<&mut dyn FnMut(&TraceRecord)>,
) -> Result<Estimate, SimError> {
    let target = s.resolved_target()?;
    let n = s.demand_count();
    let mut monitor = match &s.architecture {
        Architecture::Monitored {
            policy, on_violation, ..
        } => Some(MonitorState::new(*policy, *on_violation).map_err(|e| SimError::Monitor(e.to_string()))?),
        _ => None,
    };
    let mut truth_gen = TruthGen::new(s.truth, s.seed);
    let (mut correct, mut dangerous, mut safe_state) = (0u64, 0u64, 0u64);

    let mut start = 0u64;
    while start < n {
        let len = CHUNK.min(n - start);
        let truths = truth_gen.chunk(start, len);
        let draw_all = || -> Vec<Draw> {
            truths
                .par_iter()
                .enumerate()
                .map(|(j, &t)| draw_demand(s, start + j as u64, t))
                .collect()
        };
        let draws = match pool {
            Some(p) => p.install(draw_all),
            None => draw_all(),
        };
        for (j, d) in draws.iter().enumerate() {
            let emission = match (d.emission, monitor.as_mut()) {
                (Some(e), _) => e,
                (None, Some(m)) => {
                    let ChannelOutput::Value(v) = d.outputs[0] else {
                        unreachable!("monitored channel never silent")
                    };
                    if m.is_tripped() {
                        Emission::Safe(SafeStateCommand::Stop)
                    } else if d.monitor_blind {
                        Emission::Forward(v)
                    } else {
                        m.step(v, Some(d.truth)).map_err(|e| SimError::Monitor(e.to_string()))?
                    }
                }
                (None, None) => unreachable!("stateless architectures decide during the parallel pass"),
            };
            let class = classify(s, emission, d.truth);
            match class {
                Classification::Correct => correct += 1,
                Classification::Dangerous => dangerous += 1,
                Classification::SafeState => safe_state += 1,
            }
            if let Some(sink) = trace.as_mut() {
                let raw = d.outputs[..d.n]
                    .iter()
                    .map(|o| match o {
                        ChannelOutput::Value(v) => Some(*v),
                        ChannelOutput::Silent => None,
                    })
                    .collect();
                sink(&TraceRecord {
                    demand: start + j as u64,
                    truth: d.truth,
                    raw,
                    emission,
                    classification: class,
                });
            }
        }
        start += len;
    }

    let th = target.threshold();
    let bound = stats::clopper_pearson_lower(n - dangerous, n, s.confidence);
    let enumeration = match &s.architecture {
        Architecture::Redundant { channels, voter } => {
            let specs: Vec<ChannelSpec> = channels
                .iter()
                .enumerate()
                .map(|(j, m)| ChannelSpec::new(format!("ch{j}"), m.gross_error_prob, m.detected_fault_prob))
                .collect();
            let pair = |mode| redundancy::enumerate_outcomes(&specs, voter.k_agree(), mode);
            match (pair(WrongOutputMode::Concordant), pair(WrongOutputMode::Dissenting)) {
                (Ok(concordant), Ok(dissenting)) => Some(BoundingPair { concordant, dissenting }),
                _ => None,
            }
        }
        _ => None,
    };
    Ok(Estimate {
        seed: s.seed,
        architecture: s.architecture.label().to_string(),
        demands: n,
        duration_hours: s.duration_hours,
        demand_rate: s.demand_rate,
        dangerous_events: dangerous,
        safe_state_events: safe_state,
        correct_events: correct,
        confidence: s.confidence,
        rate_per_hour: dangerous as f64 / s.duration_hours,
        rate_upper_bound: stats::poisson_upper_mean(dangerous, s.confidence) / s.duration_hours,
        p_in_range: (n - dangerous) as f64 / n as f64,
        p_in_range_lower: bound.p,
        q_upper_bound: bound.q,
        availability: (n - safe_state) as f64 / n as f64,
        target,
        threshold: th.threshold,
        tail: th.tail,
        vacuous: th.vacuous,
        margin: th.tail - bound.q,
        verdict: if bound.q < th.tail {
            EvalVerdict::Pass
        } else {
            EvalVerdict::Fail
        },
        enumeration,
        wrong_output_mode: match &s.architecture {
            Architecture::Redundant { voter, .. } => Some(voter.wrong_output_mode()),
            _ => None,
        },
    })
}

/// How sweep variants are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepSeeds {
    /// Every variant reuses the base seed (common random numbers).
    #[default]
    Common,
    /// Variant `i` is seeded from a hash of `(base seed, i)`.
    PerVariant,
}

pub const SWEEP_PARAMETERS: &[&str] = &[
    "gross_error_prob",
    "gaussian_std",
    "bias",
    "gross_error_magnitude",
    "detected_fault_prob",
    "half_width",
    "demand_rate",
    "duration_hours",
    "confidence",
    "monitor_miss_prob",
    "beta_ccf",
    "agreement_tolerance",
];

/// Returns a copy of `base` with the named numeric field set to `value`.
/// Error-model fields are applied to the single component and to every
/// redundant channel.
pub fn with_parameter(base: &Scenario, parameter: &str, value: f64) -> Result<Scenario, SimError> {
    let mut s = base.clone();
    let set_model = |m: &mut ErrorModel| match parameter {
        "gross_error_prob" => m.gross_error_prob = value,
        "gaussian_std" => m.gaussian_std = value,
        "bias" => m.bias = value,
        "gross_error_magnitude" => m.gross_error_magnitude = value,
        "detected_fault_prob" => m.detected_fault_prob = value,
        _ => {}
    };
    match parameter {
        "gross_error_prob" | "gaussian_std" | "bias" | "gross_error_magnitude" | "detected_fault_prob" => {
            set_model(&mut s.error_model);
            if let Architecture::Redundant { channels, .. } = &mut s.architecture {
                channels.iter_mut().for_each(set_model);
            }
        }
        "half_width" => s.safe_range.half_width = value,
        "demand_rate" => s.demand_rate = value,
        "duration_hours" => s.duration_hours = value,
        "confidence" => s.confidence = value,
        "monitor_miss_prob" | "beta_ccf" => match &mut s.architecture {
            Architecture::Monitored { independence, .. } => {
                if parameter == "beta_ccf" {
                    independence.beta_ccf = value;
                } else {
                    independence.monitor_miss_prob = value;
                }
            }
            _ => {
                return Err(SimError::InvalidScenario(vec![format!(
                    "{parameter}: only applies to the monitored architecture"
                )]))
            }
        },
        "agreement_tolerance" => match &mut s.architecture {
            Architecture::Redundant { voter, .. } => {
                *voter = VoterConfig::new(voter.n_channels(), voter.k_agree(), value, voter.wrong_output_mode())
                    .map_err(|e| SimError::InvalidScenario(vec![format!("architecture.voter: {e}")]))?;
            }
            _ => {
                return Err(SimError::InvalidScenario(vec![
                    "agreement_tolerance: only applies to the redundant architecture".into(),
                ]))
            }
        },
        other => return Err(SimError::UnknownParameter(other.to_string())),
    }
    s.validate()?;
    Ok(s)
}

pub fn sweep(base: &Scenario, parameter: &str, values: &[f64]) -> Result<Vec<(f64, Estimate)>, SimError> {
    sweep_with(base, parameter, values, SweepSeeds::default(), &RunOptions::default())
}

pub fn sweep_with(
    base: &Scenario,
    parameter: &str,
    values: &[f64],
    seeds: SweepSeeds,
    opts: &RunOptions,
) -> Result<Vec<(f64, Estimate)>, SimError> {
    if !SWEEP_PARAMETERS.contains(&parameter) {
        return Err(SimError::UnknownParameter(parameter.to_string()));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut s = with_parameter(base, parameter, v)?;
            if seeds == SweepSeeds::PerVariant {
                s.seed = stream_key(base.seed, Stream::Sweep, i as u64, 0);
            }
            Ok((v, run_with(&s, opts, None)?))
        })
        .collect()
}
