//! Development-process assessment for learned components.
//!
//! Three fixed catalogs (key activities, XAI capability matrix, tailored
//! SWE.2 base practices) plus an evidence-backed N/P/L/F rating store with
//! an audit trail of superseded ratings.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error("unknown practice `{0}`")]
    UnknownPractice(String),
    #[error("rating {level} for {practice_id} requires at least one evidence record")]
    MissingEvidence { practice_id: String, level: RatingLevel },
    #[error("rating {level} for {practice_id} requires a rationale")]
    MissingRationale { practice_id: String, level: RatingLevel },
    #[error("evidence for {0} has an empty description")]
    EmptyEvidence(String),
    #[error("XAI technique selection is empty")]
    EmptySelection,
    #[error("assessment incomplete; unrated practices: {}", .0.join(", "))]
    IncompleteAssessment(Vec<String>),
    #[error("practice {0} is rated more than once; superseded ratings belong in the audit trail")]
    DuplicateRating(String),
    #[error("assessment document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActivityId {
    #[serde(rename = "P-a")]
    Pa,
    #[serde(rename = "P-b")]
    Pb,
    #[serde(rename = "P-c")]
    Pc,
    #[serde(rename = "P-d")]
    Pd,
}

impl ActivityId {
    pub const ALL: [ActivityId; 4] = [ActivityId::Pa, ActivityId::Pb, ActivityId::Pc, ActivityId::Pd];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActivityId::Pa => "P-a",
            ActivityId::Pb => "P-b",
            ActivityId::Pc => "P-c",
            ActivityId::Pd => "P-d",
        }
    }
}

impl fmt::Display for ActivityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KeyActivity {
    pub id: ActivityId,
    pub title: &'static str,
    pub characteristics: &'static str,
    pub issue_summary: &'static str,
}

const KEY_ACTIVITIES: [KeyActivity; 4] = [
    KeyActivity {
        id: ActivityId::Pa,
        title: "SR specification",
        characteristics: "The prediction result (output) differs possibly depending on input and external environment. If the prediction employs stochastic logics, the determinism of the behavior becomes quite low.",
        issue_summary: "It is difficult to clearly specify requirements including preconditions, inputs and outputs. The test specifications extracted from SRs cannot comprehensively specified. Then, it is difficult to ensure sufficient quality of the output.",
    },
    KeyActivity {
        id: ActivityId::Pb,
        title: "Consistency checking between requirements and implementations",
        characteristics: "In general, to understand the internal structure and parameters of SML is quite difficult for engineers. Then, keeping consistency among requirements, design and implementation of SML is quite difficult as well.",
        issue_summary: "It is quite hard to investigate the root cause of the incorrect output. The impact analysis of retraining of the model cannot be done with fine grain. This means that whole of the SML system must be revalidated after any retraining.",
    },
    KeyActivity {
        id: ActivityId::Pc,
        title: "White-box verification",
        characteristics: "Same as the above.",
        issue_summary: "The exhaustive white-box test and review are difficult in unit and integration verification phase. If such phases are skipped, it is suspicious whether sufficient quality is ensured only by system integration test and validation.",
    },
    KeyActivity {
        id: ActivityId::Pd,
        title: "Quality management process",
        characteristics: "The learning methods for SML are currently diverse and flexible.",
        issue_summary: "No standardized process to mitigate or avoid high risk during learning and re-learning phases.",
    },
];

/// How far a technique supports an activity. Ordered `N < P < F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Capability {
    N,
    P,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XaiTechnique {
    Lime,
    Corels,
    PrototypeSelection,
    MmdCritic,
    ExplainableLearningProcess,
}

impl XaiTechnique {
    pub const ALL: [XaiTechnique; 5] = [
        XaiTechnique::Lime,
        XaiTechnique::Corels,
        XaiTechnique::PrototypeSelection,
        XaiTechnique::MmdCritic,
        XaiTechnique::ExplainableLearningProcess,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            XaiTechnique::Lime => "LIME",
            XaiTechnique::Corels => "CORELS",
            XaiTechnique::PrototypeSelection => "Prototype Selection",
            XaiTechnique::MmdCritic => "MMD-critic",
            XaiTechnique::ExplainableLearningProcess => "Explainable SML learning process",
        }
    }

    /// Ratings for P-a..P-d in order.
    pub fn ratings(&self) -> [Capability; 4] {
        use Capability::*;
        match self {
            XaiTechnique::Lime => [N, N, P, N],
            XaiTechnique::Corels => [P, P, P, N],
            XaiTechnique::PrototypeSelection => [P, P, N, N],
            XaiTechnique::MmdCritic => [P, P, N, N],
            XaiTechnique::ExplainableLearningProcess => [N, N, N, F],
        }
    }

    pub fn rating(&self, activity: ActivityId) -> Capability {
        self.ratings()[activity as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Practice {
    pub id: &'static str,
    pub base_text: &'static str,
    pub tailored_activity: &'static str,
}

const SHARED_BP4_BP5: &str =
    "The dynamic behavior and resources consumption of the SML component are clearly defined and explained.";
const SHARED_BP7_BP8: &str = "For the SML component, traceability between requirements specification and architecture design is documented to ensure their consistency.";

const PRACTICES: [Practice; 9] = [
    Practice {
        id: "SWE.2.BP1",
        base_text: "Develop software architectural design.",
        tailored_activity: "The design documents for SML architecture are created to clearly define the technical policies like number of layers, type of optimizer type of learning data etc.",
    },
    Practice {
        id: "SWE.2.BP2",
        base_text: "Allocate software requirements.",
        tailored_activity: "If the SML component is split into multiple elements, the requirements for the component are explicitly assigned to the elements.",
    },
    Practice {
        id: "SWE.2.BP3",
        base_text: "Define interfaces of software elements.",
        tailored_activity: "If the SML component is split into multiple elements, the interfaces among them are clearly defined.",
    },
    Practice { id: "SWE.2.BP4", base_text: "Describe dynamic behavior.", tailored_activity: SHARED_BP4_BP5 },
    Practice {
        id: "SWE.2.BP5",
        base_text: "Define resource consumption objectives.",
        tailored_activity: SHARED_BP4_BP5,
    },
    Practice {
        id: "SWE.2.BP6",
        base_text: "Evaluate alternative software architectures.",
        tailored_activity: "The design policy is evaluated.",
    },
    Practice {
        id: "SWE.2.BP7",
        base_text: "Establish bidirectional traceability.",
        tailored_activity: SHARED_BP7_BP8,
    },
    Practice { id: "SWE.2.BP8", base_text: "Ensure consistency.", tailored_activity: SHARED_BP7_BP8 },
    Practice {
        id: "SWE.2.BP9",
        base_text: "Communicate disagreed software architectural design.",
        tailored_activity: "The architecture design for the SML component is discussed and agreed by developers and engineers when the design is changed.",
    },
];

/// The three fixed catalogs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Catalog {
    pub activities: &'static [KeyActivity],
    pub practices: &'static [Practice],
    pub techniques: &'static [XaiTechnique],
}

pub fn load_catalog() -> Catalog {
    Catalog {
        activities: &KEY_ACTIVITIES,
        practices: &PRACTICES,
        techniques: &XaiTechnique::ALL,
    }
}

pub fn practice(id: &str) -> Option<&'static Practice> {
    PRACTICES.iter().find(|p| p.id == id)
}

impl Catalog {
    /// Key activities as tab-separated text, one row per activity.
    pub fn activities_tsv(&self) -> String {
        let mut out = String::from("id\ttitle\tcharacteristics\ttechnical_issues\n");
        for a in self.activities {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                a.id, a.title, a.characteristics, a.issue_summary
            ));
        }
        out
    }

    /// XAI capability matrix as tab-separated text.
    pub fn capability_tsv(&self) -> String {
        let mut out = String::from("technique\tP-a\tP-b\tP-c\tP-d\n");
        for t in self.techniques {
            let r = t.ratings();
            out.push_str(&format!(
                "{}\t{:?}\t{:?}\t{:?}\t{:?}\n",
                t.label(),
                r[0],
                r[1],
                r[2],
                r[3]
            ));
        }
        out
    }

    /// Tailored practices as tab-separated text.
    pub fn practices_tsv(&self) -> String {
        let mut out = String::from("id\tbase_practice\ttailored_activity\n");
        for p in self.practices {
            out.push_str(&format!("{}\t{}\t{}\n", p.id, p.base_text, p.tailored_activity));
        }
        out
    }
}

/// Best rating per activity over the selected techniques.
pub fn coverage(selected: &[XaiTechnique]) -> Result<BTreeMap<ActivityId, Capability>, ProcessError> {
    if selected.is_empty() {
        return Err(ProcessError::EmptySelection);
    }
    Ok(ActivityId::ALL
        .iter()
        .map(|a| (*a, selected.iter().map(|t| t.rating(*a)).max().expect("nonempty")))
        .collect())
}

/// Not / partially / largely / fully achieved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RatingLevel {
    N,
    P,
    L,
    F,
}

impl RatingLevel {
    pub fn is_compliant(&self) -> bool {
        matches!(self, RatingLevel::L | RatingLevel::F)
    }
}

impl fmt::Display for RatingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceRecord {
    pub practice_id: String,
    pub description: String,
    pub artifact_uri: String,
    pub recorded_by: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rating {
    pub practice_id: String,
    pub level: RatingLevel,
    #[serde(default)]
    pub rationale: String,
}

/// Ratings, evidence and the trail of superseded ratings.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assessment {
    /// Techniques applied in the learning process; drives the coverage section of the report.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub xai_techniques: Vec<XaiTechnique>,
    #[serde(default)]
    evidence: Vec<EvidenceRecord>,
    #[serde(default)]
    ratings: Vec<Rating>,
    #[serde(default)]
    audit_trail: Vec<Rating>,
}

impl Assessment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn evidence(&self) -> &[EvidenceRecord] {
        &self.evidence
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn audit_trail(&self) -> &[Rating] {
        &self.audit_trail
    }

    pub fn evidence_count(&self, practice_id: &str) -> usize {
        self.evidence.iter().filter(|e| e.practice_id == practice_id).count()
    }

    pub fn rating(&self, practice_id: &str) -> Option<&Rating> {
        self.ratings.iter().find(|r| r.practice_id == practice_id)
    }

    pub fn add_evidence(&mut self, record: EvidenceRecord) -> Result<(), ProcessError> {
        if practice(&record.practice_id).is_none() {
            return Err(ProcessError::UnknownPractice(record.practice_id));
        }
        if record.description.trim().is_empty() {
            return Err(ProcessError::EmptyEvidence(record.practice_id));
        }
        self.evidence.push(record);
        Ok(())
    }

    /// Records `evidence` and rates the practice. A previous rating of the
    /// same practice moves to the audit trail.
    pub fn rate(
        &mut self,
        practice_id: &str,
        evidence: Vec<EvidenceRecord>,
        level: RatingLevel,
        rationale: &str,
    ) -> Result<&Rating, ProcessError> {
        if practice(practice_id).is_none() {
            return Err(ProcessError::UnknownPractice(practice_id.to_string()));
        }
        for e in &evidence {
            if e.practice_id != practice_id {
                return Err(ProcessError::Document(format!(
                    "evidence for {} supplied while rating {practice_id}",
                    e.practice_id
                )));
            }
            if e.description.trim().is_empty() {
                return Err(ProcessError::EmptyEvidence(practice_id.to_string()));
            }
        }
        let rating = Rating {
            practice_id: practice_id.to_string(),
            level,
            rationale: rationale.to_string(),
        };
        check_rating(&rating, self.evidence_count(practice_id) + evidence.len())?;
        self.evidence.extend(evidence);
        if let Some(pos) = self.ratings.iter().position(|r| r.practice_id == practice_id) {
            let old = self.ratings.remove(pos);
            self.audit_trail.push(old);
        }
        self.ratings.push(rating);
        Ok(self.ratings.last().expect("just pushed"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("assessment is always representable as TOML")
    }

    /// Parses and re-validates a persisted assessment.
    pub fn from_toml(text: &str) -> Result<Self, ProcessError> {
        let doc: Assessment = toml::from_str(text).map_err(|e| ProcessError::Document(e.to_string()))?;
        for e in &doc.evidence {
            if practice(&e.practice_id).is_none() {
                return Err(ProcessError::UnknownPractice(e.practice_id.clone()));
            }
            if e.description.trim().is_empty() {
                return Err(ProcessError::EmptyEvidence(e.practice_id.clone()));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &doc.ratings {
            if practice(&r.practice_id).is_none() {
                return Err(ProcessError::UnknownPractice(r.practice_id.clone()));
            }
            if !seen.insert(r.practice_id.as_str()) {
                return Err(ProcessError::DuplicateRating(r.practice_id.clone()));
            }
            check_rating(r, doc.evidence_count(&r.practice_id))?;
        }
        Ok(doc)
    }

    pub fn report(&self) -> Result<AssessmentReport, ProcessError> {
        let missing: Vec<String> = PRACTICES
            .iter()
            .filter(|p| self.rating(p.id).is_none())
            .map(|p| p.id.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(ProcessError::IncompleteAssessment(missing));
        }
        let practices: Vec<PracticeLine> = PRACTICES
            .iter()
            .map(|p| {
                let r = self.rating(p.id).expect("checked above");
                PracticeLine {
                    id: p.id.to_string(),
                    level: r.level,
                    rationale: r.rationale.clone(),
                    evidence_count: self.evidence_count(p.id),
                    compliant: r.level.is_compliant(),
                }
            })
            .collect();
        let noncompliant: Vec<String> = practices
            .iter()
            .filter(|l| !l.compliant)
            .map(|l| l.id.clone())
            .collect();
        let coverage = if self.xai_techniques.is_empty() {
            None
        } else {
            Some(coverage(&self.xai_techniques)?)
        };
        let unresolved_activities = match &coverage {
            Some(c) => c
                .iter()
                .filter(|(_, cap)| **cap != Capability::F)
                .map(|(a, _)| *a)
                .collect(),
            None => ActivityId::ALL.to_vec(),
        };
        Ok(AssessmentReport {
            compliant: noncompliant.is_empty(),
            practices,
            noncompliant,
            coverage,
            unresolved_activities,
            superseded_ratings: self.audit_trail.len(),
        })
    }
}

fn check_rating(r: &Rating, evidence: usize) -> Result<(), ProcessError> {
    if r.level != RatingLevel::F && r.rationale.trim().is_empty() {
        return Err(ProcessError::MissingRationale {
            practice_id: r.practice_id.clone(),
            level: r.level,
        });
    }
    if matches!(r.level, RatingLevel::L | RatingLevel::F) && evidence == 0 {
        return Err(ProcessError::MissingEvidence {
            practice_id: r.practice_id.clone(),
            level: r.level,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PracticeLine {
    pub id: String,
    pub level: RatingLevel,
    pub rationale: String,
    pub evidence_count: usize,
    pub compliant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub compliant: bool,
    pub practices: Vec<PracticeLine>,
    pub noncompliant: Vec<String>,
    pub coverage: Option<BTreeMap<ActivityId, Capability>>,
    /// Activities no selected technique covers fully.
    pub unresolved_activities: Vec<ActivityId>,
    pub superseded_ratings: usize,
}
