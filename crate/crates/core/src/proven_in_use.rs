//! Proven-in-use qualification from operational history.
//!
//! The ledger only counts history gathered with exactly one software binary
//! on exactly one hardware product. Any change (retraining, new binary, new
//! chip) closes the window; only entries after the latest change are
//! eligible. Qualification requires a minimum eligible duration and an exact
//! Poisson upper bound on the dangerous-failure rate below the PFH target.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::quant_eval::DEFAULT_CONFIDENCE;
use crate::stats;

/// One year of continuous operation.
pub const DEFAULT_MIN_HOURS: f64 = 8760.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PiuError {
    #[error("identity mismatch ({kind}): ledger has `{expected}`, entry has `{found}`; change event recorded, entry rejected")]
    IdentityMismatch {
        kind: ChangeKind,
        expected: String,
        found: String,
    },
    #[error("timestamp {found} does not advance past {last}")]
    NonMonotonicTimestamp { last: i64, found: i64 },
    #[error("invalid entry: {0}")]
    InvalidEntry(String),
    #[error("no eligible usage after the latest change event")]
    EmptyEligibleWindow,
    #[error("invalid qualification parameter: {0}")]
    InvalidParameter(String),
    #[error("ledger line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Retraining,
    BinaryChange,
    HardwareChange,
}

impl std::fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChangeKind::Retraining => "retraining",
            ChangeKind::BinaryChange => "binary_change",
            ChangeKind::HardwareChange => "hardware_change",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsageEntry {
    /// Seconds since the Unix epoch at the end of the recorded period.
    pub timestamp: i64,
    pub period_hours: f64,
    pub demands: u64,
    pub dangerous_failures: u64,
    pub software_identity: String,
    pub hardware_identity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeEvent {
    pub timestamp: i64,
    pub kind: ChangeKind,
    #[serde(default)]
    pub note: String,
    /// Identity in force after the change, when it changes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub software_identity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardware_identity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum RecordBody {
    Header {
        software_identity: String,
        hardware_identity: String,
    },
    Entry(UsageEntry),
    Change(ChangeEvent),
}

/// One line of the persisted ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainedRecord {
    pub seq: u64,
    pub prev_digest: String,
    #[serde(flatten)]
    pub body: RecordBody,
    pub digest: String,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    seq: u64,
    prev_digest: &'a str,
    #[serde(flatten)]
    body: &'a RecordBody,
}

fn record_digest(seq: u64, prev_digest: &str, body: &RecordBody) -> String {
    let canonical = serde_json::to_vec(&DigestInput { seq, prev_digest, body }).expect("record serializes");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageLedger {
    software_identity: String,
    hardware_identity: String,
    records: Vec<RecordBody>,
    last_timestamp: Option<i64>,
    last_entry_timestamp: Option<i64>,
}

impl UsageLedger {
    pub fn new(software_identity: impl Into<String>, hardware_identity: impl Into<String>) -> Self {
        let software_identity = software_identity.into();
        let hardware_identity = hardware_identity.into();
        let header = RecordBody::Header {
            software_identity: software_identity.clone(),
            hardware_identity: hardware_identity.clone(),
        };
        UsageLedger {
            software_identity,
            hardware_identity,
            records: vec![header],
            last_timestamp: None,
            last_entry_timestamp: None,
        }
    }

    pub fn software_identity(&self) -> &str {
        &self.software_identity
    }

    pub fn hardware_identity(&self) -> &str {
        &self.hardware_identity
    }

    pub fn records(&self) -> &[RecordBody] {
        &self.records
    }

    pub fn entries(&self) -> impl Iterator<Item = &UsageEntry> {
        self.records.iter().filter_map(|r| match r {
            RecordBody::Entry(e) => Some(e),
            _ => None,
        })
    }

    pub fn change_events(&self) -> impl Iterator<Item = &ChangeEvent> {
        self.records.iter().filter_map(|r| match r {
            RecordBody::Change(c) => Some(c),
            _ => None,
        })
    }

    /// Entries recorded after the latest change event.
    pub fn eligible_entries(&self) -> &[RecordBody] {
        let start = self
            .records
            .iter()
            .rposition(|r| matches!(r, RecordBody::Change(_) | RecordBody::Header { .. }))
            .map_or(0, |p| p + 1);
        &self.records[start..]
    }

    fn check_time(&self, ts: i64, strict_after: Option<i64>) -> Result<(), PiuError> {
        if let Some(last) = self.last_timestamp {
            if ts < last {
                return Err(PiuError::NonMonotonicTimestamp { last, found: ts });
            }
        }
        if let Some(last) = strict_after {
            if ts <= last {
                return Err(PiuError::NonMonotonicTimestamp { last, found: ts });
            }
        }
        Ok(())
    }

    /// Logs a change; everything before it stops counting.
    pub fn record_change(&mut self, event: ChangeEvent) -> Result<(), PiuError> {
        self.check_time(event.timestamp, None)?;
        if let Some(s) = &event.software_identity {
            self.software_identity = s.clone();
        }
        if let Some(h) = &event.hardware_identity {
            self.hardware_identity = h.clone();
        }
        self.last_timestamp = Some(event.timestamp);
        self.records.push(RecordBody::Change(event));
        Ok(())
    }

    /// Appends usage. An entry whose identities differ from the ledger's is
    /// rejected; a change event for the new identity is recorded in its place,
    /// so the same entry can be re-appended to start the new window.
    pub fn append(&mut self, entry: UsageEntry) -> Result<(), PiuError> {
        if !(entry.period_hours.is_finite() && entry.period_hours > 0.0) {
            return Err(PiuError::InvalidEntry(format!(
                "period_hours must be > 0, got {}",
                entry.period_hours
            )));
        }
        if entry.dangerous_failures > entry.demands {
            return Err(PiuError::InvalidEntry(format!(
                "dangerous_failures ({}) exceeds demands ({})",
                entry.dangerous_failures, entry.demands
            )));
        }
        self.check_time(entry.timestamp, self.last_entry_timestamp)?;
        let mismatch = if entry.software_identity != self.software_identity {
            Some((
                ChangeKind::BinaryChange,
                self.software_identity.clone(),
                entry.software_identity.clone(),
            ))
        } else if entry.hardware_identity != self.hardware_identity {
            Some((
                ChangeKind::HardwareChange,
                self.hardware_identity.clone(),
                entry.hardware_identity.clone(),
            ))
        } else {
            None
        };
        if let Some((kind, expected, found)) = mismatch {
            self.record_change(ChangeEvent {
                timestamp: entry.timestamp,
                kind,
                note: "identity mismatch detected on append".into(),
                software_identity: Some(entry.software_identity.clone()),
                hardware_identity: Some(entry.hardware_identity.clone()),
            })?;
            return Err(PiuError::IdentityMismatch { kind, expected, found });
        }
        self.last_timestamp = Some(entry.timestamp);
        self.last_entry_timestamp = Some(entry.timestamp);
        self.records.push(RecordBody::Entry(entry));
        Ok(())
    }

    /// Hash-chained records, as written to disk.
    pub fn chain(&self) -> Vec<ChainedRecord> {
        let mut prev = String::new();
        self.records
            .iter()
            .enumerate()
            .map(|(i, body)| {
                let digest = record_digest(i as u64, &prev, body);
                let rec = ChainedRecord {
                    seq: i as u64,
                    prev_digest: prev.clone(),
                    body: body.clone(),
                    digest,
                };
                prev = rec.digest.clone();
                rec
            })
            .collect()
    }

    /// One JSON record per line.
    pub fn to_jsonl(&self) -> String {
        self.chain()
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    /// Loads a ledger, checking the hash chain and replaying every record
    /// through the same rules as live appends.
    pub fn from_jsonl(text: &str) -> Result<Self, PiuError> {
        let mut ledger: Option<UsageLedger> = None;
        let mut prev = String::new();
        let mut seq = 0u64;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |msg: String| PiuError::Corrupt { line: line_no, msg };
            let rec: ChainedRecord = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
            if rec.seq != seq {
                return Err(corrupt(format!("expected seq {seq}, found {}", rec.seq)));
            }
            if rec.prev_digest != prev {
                return Err(corrupt("previous-record digest does not match".into()));
            }
            if record_digest(rec.seq, &rec.prev_digest, &rec.body) != rec.digest {
                return Err(corrupt("record digest does not match its content".into()));
            }
            match (&mut ledger, rec.body) {
                (
                    None,
                    RecordBody::Header {
                        software_identity,
                        hardware_identity,
                    },
                ) => {
                    ledger = Some(UsageLedger::new(software_identity, hardware_identity));
                }
                (None, _) => return Err(corrupt("first record must be the header".into())),
                (Some(_), RecordBody::Header { .. }) => return Err(corrupt("duplicate header".into())),
                (Some(l), RecordBody::Entry(e)) => l.append(e).map_err(|e| corrupt(e.to_string()))?,
                (Some(l), RecordBody::Change(c)) => l.record_change(c).map_err(|e| corrupt(e.to_string()))?,
            }
            prev = rec.digest;
            seq += 1;
        }
        ledger.ok_or(PiuError::Corrupt {
            line: 0,
            msg: "empty ledger".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QualificationVerdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qualification {
    pub eligible_hours: f64,
    pub eligible_demands: u64,
    pub failures: u64,
    pub confidence: f64,
    pub lambda_point: f64,
    /// One-sided upper confidence bound on dangerous failures per hour.
    pub lambda_upper: f64,
    /// Informative only: upper bound on dangerous failures per demand.
    pub per_demand_upper: Option<f64>,
    pub target_pfh: f64,
    pub min_hours: f64,
    pub min_duration_met: bool,
    pub verdict: QualificationVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualifyParams {
    pub target_pfh: f64,
    pub confidence: f64,
    pub min_hours: f64,
}

impl QualifyParams {
    pub fn new(target_pfh: f64) -> Self {
        QualifyParams {
            target_pfh,
            confidence: DEFAULT_CONFIDENCE,
            min_hours: DEFAULT_MIN_HOURS,
        }
    }
}

pub fn qualify(ledger: &UsageLedger, params: &QualifyParams) -> Result<Qualification, PiuError> {
    if !(params.confidence > 0.0 && params.confidence < 1.0) {
        return Err(PiuError::InvalidParameter(format!(
            "confidence must lie in (0, 1), got {}",
            params.confidence
        )));
    }
    if !(params.target_pfh.is_finite() && params.target_pfh >= 0.0) {
        return Err(PiuError::InvalidParameter(format!(
            "target_pfh must be >= 0, got {}",
            params.target_pfh
        )));
    }
    if !(params.min_hours.is_finite() && params.min_hours >= 0.0) {
        return Err(PiuError::InvalidParameter(format!(
            "min_hours must be >= 0, got {}",
            params.min_hours
        )));
    }
    let (mut hours, mut demands, mut failures) = (0.0f64, 0u64, 0u64);
    let mut any = false;
    for r in ledger.eligible_entries() {
        if let RecordBody::Entry(e) = r {
            any = true;
            hours += e.period_hours;
            demands += e.demands;
            failures += e.dangerous_failures;
        }
    }
    if !any {
        return Err(PiuError::EmptyEligibleWindow);
    }
    let lambda_upper = stats::poisson_upper_mean(failures, params.confidence) / hours;
    let per_demand_upper =
        (demands > 0).then(|| stats::clopper_pearson_lower(demands - failures, demands, params.confidence).q);
    let min_duration_met = hours >= params.min_hours;
    let pass = min_duration_met && lambda_upper <= params.target_pfh;
    Ok(Qualification {
        eligible_hours: hours,
        eligible_demands: demands,
        failures,
        confidence: params.confidence,
        lambda_point: failures as f64 / hours,
        lambda_upper,
        per_demand_upper,
        target_pfh: params.target_pfh,
        min_hours: params.min_hours,
        min_duration_met,
        verdict: if pass {
            QualificationVerdict::Pass
        } else {
            QualificationVerdict::Fail
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(ts: i64, hours: f64, failures: u64) -> UsageEntry {
        UsageEntry {
            timestamp: ts,
            period_hours: hours,
            demands: 1000,
            dangerous_failures: failures,
            software_identity: "sha256:aaaa".into(),
            hardware_identity: "soc-x1".into(),
        }
    }

    #[test]
    fn append_matching_and_mismatching() {
        let mut l = UsageLedger::new("sha256:aaaa", "soc-x1");
        l.append(entry(1, 10.0, 0)).unwrap();
        let mut other = entry(2, 10.0, 0);
        other.software_identity = "sha256:bbbb".into();
        let err = l.append(other.clone()).unwrap_err();
        assert!(matches!(
            err,
            PiuError::IdentityMismatch {
                kind: ChangeKind::BinaryChange,
                ..
            }
        ));
        assert_eq!(l.change_events().count(), 1);
        assert_eq!(l.entries().count(), 1);
        assert_eq!(l.software_identity(), "sha256:bbbb");
        // the new window starts with the re-appended entry
        l.append(other).unwrap();
        assert_eq!(l.eligible_entries().len(), 1);
    }

    #[test]
    fn retraining_empties_window() {
        let mut l = UsageLedger::new("sha256:aaaa", "soc-x1");
        l.append(entry(1, 9000.0, 0)).unwrap();
        l.record_change(ChangeEvent {
            timestamp: 2,
            kind: ChangeKind::Retraining,
            note: "new weights".into(),
            software_identity: None,
            hardware_identity: None,
        })
        .unwrap();
        assert_eq!(
            qualify(&l, &QualifyParams::new(1.0)),
            Err(PiuError::EmptyEligibleWindow)
        );
    }

    #[test]
    fn timestamps_must_advance() {
        let mut l = UsageLedger::new("sha256:aaaa", "soc-x1");
        l.append(entry(5, 1.0, 0)).unwrap();
        assert!(matches!(
            l.append(entry(5, 1.0, 0)),
            Err(PiuError::NonMonotonicTimestamp { .. })
        ));
        assert!(matches!(l.append(entry(7, 1.0, 2000)), Err(PiuError::InvalidEntry(_))));
    }

    #[test]
    fn zero_failure_bounds() {
        let mut l = UsageLedger::new("sha256:aaaa", "soc-x1");
        l.append(entry(1, 8760.0, 0)).unwrap();
        let q = qualify(&l, &QualifyParams::new(1e-7)).unwrap();
        assert!((q.lambda_upper - 3.42e-4).abs() < 1e-6);
        assert!(q.min_duration_met);
        assert_eq!(q.verdict, QualificationVerdict::Fail);

        let mut l = UsageLedger::new("sha256:aaaa", "soc-x1");
        l.append(entry(1, 4000.0, 0)).unwrap();
        let q = qualify(&l, &QualifyParams::new(1.0)).unwrap();
        assert!(!q.min_duration_met);
        assert_eq!(q.verdict, QualificationVerdict::Fail);
    }

    #[test]
    fn jsonl_round_trip_and_tamper_detection() {
        let mut l = UsageLedger::new("sha256:aaaa", "soc-x1");
        l.append(entry(1, 100.0, 0)).unwrap();
        l.append(entry(2, 200.0, 1)).unwrap();
        let text = l.to_jsonl();
        assert_eq!(UsageLedger::from_jsonl(&text).unwrap(), l);
        let tampered = text.replace("\"dangerous_failures\":1", "\"dangerous_failures\":0");
        assert!(matches!(
            UsageLedger::from_jsonl(&tampered),
            Err(PiuError::Corrupt { line: 3, .. })
        ));
        let dropped: String = text
            .lines()
            .enumerate()
            .filter(|(i, _)| *i != 1)
            .map(|(_, l)| format!("{l}\n"))
            .collect();
        assert!(matches!(
            UsageLedger::from_jsonl(&dropped),
            Err(PiuError::Corrupt { line: 2, .. })
        ));
    }
}
