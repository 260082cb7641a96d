use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use smlsafe::compare::{self, TscProfile, Weights};
use smlsafe::process::Assessment;
use smlsafe::proven_in_use::{self, PiuError, QualificationVerdict, QualifyParams, UsageLedger};
use smlsafe::quant_eval::{
    self, check_confidence, EvalVerdict, Evidence, NormalModel, SafeRange, TargetSpec, DEFAULT_CONFIDENCE,
};
use smlsafe::simulator::{self, RunOptions, Scenario, TraceRecord};

use crate::report::{num, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// Whether the subject met its criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn config_err(path: &Path, msg: impl ToString) -> CliError {
    CliError::Config {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    }
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    toml::from_str(&read(path)?).map_err(|e| config_err(path, e))
}

/// Paths inside a config file are relative to that file.
fn resolve(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new("")).join(p)
    }
}

fn override_confidence(file: Option<f64>, flag: Option<f64>) -> Result<f64, CliError> {
    let c = flag.or(file).unwrap_or(DEFAULT_CONFIDENCE);
    check_confidence(c).map_err(|e| CliError::Invalid(e.to_string()))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalSection {
    pub mean: f64,
    pub std: f64,
    /// Reference value the safe band is centred on; defaults to `mean`.
    #[serde(default)]
    pub truth: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    #[serde(default)]
    pub samples: Option<PathBuf>,
    #[serde(default)]
    pub normal: Option<NormalSection>,
    pub safe_range: SafeRange,
    pub target: TargetSpec,
    #[serde(default)]
    pub confidence: Option<f64>,
}

pub fn evaluate(config_path: &Path, confidence: Option<f64>) -> Result<(Report, Status), CliError> {
    let mut cfg: EvaluateConfig = parse_toml(config_path)?;
    let conf = override_confidence(cfg.confidence, confidence)?;
    cfg.confidence = Some(conf);
    let target = cfg
        .target
        .resolve(None)
        .map_err(|e| config_err(config_path, format!("target: {e}")))?;
    let samples;
    let evidence = match (&cfg.samples, cfg.normal) {
        (Some(path), None) => {
            let path = resolve(config_path, path);
            samples = quant_eval::parse_samples(&read(&path)?).map_err(|e| config_err(&path, e))?;
            Evidence::Samples {
                samples: &samples,
                confidence: conf,
            }
        }
        (None, Some(n)) => {
            let model = NormalModel::new(n.mean, n.std).map_err(|e| config_err(config_path, format!("normal: {e}")))?;
            let truth = n.truth.unwrap_or(n.mean);
            cfg.normal = Some(NormalSection {
                truth: Some(truth),
                ..n
            });
            Evidence::Normal { model, truth }
        }
        _ => {
            return Err(config_err(
                config_path,
                "exactly one of `samples` or `[normal]` is required",
            ))
        }
    };
    let result = quant_eval::evaluate(evidence, &cfg.safe_range, target).map_err(|e| config_err(config_path, e))?;
    let status = if result.verdict == EvalVerdict::Pass {
        Status::Pass
    } else {
        Status::Fail
    };
    let summary = format!(
        "{}: lower bound on P = {} vs threshold {} ({}), dangerous-output bound {} vs tail {}",
        result.verdict,
        num(result.p_lower_bound),
        num(result.threshold),
        target.label(),
        num(result.q_upper_bound),
        num(result.tail)
    );
    let mut report = Report::new("evaluate", summary, to_value(&cfg), to_value(&result));
    report.confidence = Some(conf);
    Ok((report, status))
}

pub struct SimulateArgs<'a> {
    pub config: &'a Path,
    pub seed: Option<u64>,
    pub confidence: Option<f64>,
    pub trace: Option<&'a Path>,
    pub threads: Option<usize>,
}

pub fn simulate(args: &SimulateArgs<'_>) -> Result<(Report, Status), CliError> {
    let text = read(args.config)?;
    let mut scenario: Scenario = toml::from_str(&text).map_err(|e| config_err(args.config, e))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(c) = args.confidence {
        scenario.confidence = c;
    }
    if let Err(e) = scenario.validate() {
        return Err(config_err(args.config, sim_problems(e)));
    }
    let opts = RunOptions { threads: args.threads };
    let est = match args.trace {
        None => simulator::run_with(&scenario, &opts, None),
        Some(path) => {
            let io_err = |source| CliError::Io {
                path: path.to_path_buf(),
                source,
            };
            let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
            writeln!(w, "{}", TraceRecord::csv_header()).map_err(io_err)?;
            let mut failed = None;
            let mut sink = |r: &TraceRecord| {
                if failed.is_none() {
                    if let Err(e) = writeln!(w, "{}", r.to_csv()) {
                        failed = Some(e);
                    }
                }
            };
            let est = simulator::run_with(&scenario, &opts, Some(&mut sink));
            if let Some(e) = failed {
                return Err(io_err(e));
            }
            w.flush().map_err(io_err)?;
            est
        }
    }
    .map_err(|e| config_err(args.config, sim_problems(e)))?;

    let status = if est.verdict == EvalVerdict::Pass {
        Status::Pass
    } else {
        Status::Fail
    };
    let summary = format!(
        "{}: {} dangerous / {} safe-state / {} correct over {} demands; P lower bound {} vs threshold {}",
        est.verdict,
        est.dangerous_events,
        est.safe_state_events,
        est.correct_events,
        est.demands,
        num(est.p_in_range_lower),
        num(est.threshold)
    );
    let mut report = Report::new("simulate", summary, to_value(&scenario), to_value(&est));
    report.seed = Some(scenario.seed);
    report.confidence = Some(scenario.confidence);
    Ok((report, status))
}

fn sim_problems(e: simulator::SimError) -> String {
    match e {
        simulator::SimError::InvalidScenario(p) => p.join("\n  "),
        other => other.to_string(),
    }
}

pub fn assess(config_path: &Path) -> Result<(Report, Status), CliError> {
    let assessment = Assessment::from_toml(&read(config_path)?).map_err(|e| config_err(config_path, e))?;
    let config = to_value(&assessment);
    match assessment.report() {
        Ok(r) => {
            let status = if r.compliant { Status::Pass } else { Status::Fail };
            let summary = if r.compliant {
                "COMPLIANT: every tailored practice is largely or fully achieved".to_string()
            } else {
                format!("NOT COMPLIANT: {}", r.noncompliant.join(", "))
            };
            Ok((Report::new("assess", summary, config, to_value(&r)), status))
        }
        Err(smlsafe::process::ProcessError::IncompleteAssessment(missing)) => {
            let summary = format!("NOT COMPLIANT: no rating for {}", missing.join(", "));
            let result = json!({ "compliant": false, "unrated": missing });
            Ok((Report::new("assess", summary, config, result), Status::Fail))
        }
        Err(e) => Err(config_err(config_path, e)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerConfig {
    pub ledger: PathBuf,
    pub target_pfh: f64,
    #[serde(default)]
    pub min_hours: Option<f64>,
    #[serde(default)]
    pub confidence: Option<f64>,
}

pub fn ledger(config_path: &Path, confidence: Option<f64>) -> Result<(Report, Status), CliError> {
    let mut cfg: LedgerConfig = parse_toml(config_path)?;
    let conf = override_confidence(cfg.confidence, confidence)?;
    cfg.confidence = Some(conf);
    let min_hours = *cfg.min_hours.get_or_insert(proven_in_use::DEFAULT_MIN_HOURS);
    let path = resolve(config_path, &cfg.ledger);
    let ledger = UsageLedger::from_jsonl(&read(&path)?).map_err(|e| config_err(&path, e))?;
    let params = QualifyParams {
        target_pfh: cfg.target_pfh,
        confidence: conf,
        min_hours,
    };
    let (summary, result, status) = match proven_in_use::qualify(&ledger, &params) {
        Ok(q) => {
            let status = if q.verdict == QualificationVerdict::Pass {
                Status::Pass
            } else {
                Status::Fail
            };
            let summary = format!(
                "{:?}: {} eligible hours, {} failure(s), upper rate bound {} /h vs target {} /h{}",
                q.verdict,
                num(q.eligible_hours),
                q.failures,
                num(q.lambda_upper),
                num(q.target_pfh),
                if q.min_duration_met {
                    String::new()
                } else {
                    format!(" (below minimum {} h)", num(q.min_hours))
                }
            );
            (summary, to_value(&q), status)
        }
        Err(PiuError::EmptyEligibleWindow) => (
            "Fail: no usage recorded since the last change".to_string(),
            json!({ "verdict": "Fail", "eligible_hours": 0.0, "min_duration_met": false }),
            Status::Fail,
        ),
        Err(e) => return Err(config_err(config_path, e)),
    };
    let mut report = Report::new("ledger", summary, to_value(&cfg), result);
    report.confidence = Some(conf);
    Ok((report, status))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default)]
    pub weights: Option<Weights>,
    #[serde(default)]
    pub profiles: Option<Vec<TscProfile>>,
}

pub fn compare(config_path: Option<&Path>) -> Result<(Report, Status), CliError> {
    let mut cfg: CompareConfig = match config_path {
        Some(p) => parse_toml(p)?,
        None => CompareConfig::default(),
    };
    let profiles = cfg.profiles.get_or_insert_with(compare::default_profiles).clone();
    let weights = cfg.weights.get_or_insert_with(compare::unit_weights).clone();
    let ranking = compare::rank(&profiles, Some(&weights)).map_err(|e| CliError::Invalid(e.to_string()))?;
    let order: Vec<String> = ranking
        .entries
        .iter()
        .map(|e| format!("{}={}", e.tsc_id, num(e.total)))
        .collect();
    let summary = format!("ranking (lower is better): {}", order.join(", "));
    let result = json!({
        "ranking": ranking,
        "assurance_matrix": compare::assurance_matrix(),
    });
    Ok((Report::new("compare", summary, to_value(&cfg), result), Status::Pass))
}
