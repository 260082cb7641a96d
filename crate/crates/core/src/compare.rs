//! Cost/difficulty comparison of the five technical safety concepts.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("weights missing for: {}", .0.join(", "))]
    IncompleteWeights(Vec<String>),
    #[error("weight for {0} must be finite and >= 0")]
    InvalidWeight(String),
    #[error("profile `{id}`: {msg}")]
    InvalidProfile { id: String, msg: String },
    #[error("no profiles to rank")]
    EmptyProfiles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    NewDevelopmentWorkload,
    HardwareCost,
    RealizationDifficulty,
    RelearningWorkload,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::NewDevelopmentWorkload,
        Criterion::HardwareCost,
        Criterion::RealizationDifficulty,
        Criterion::RelearningWorkload,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::NewDevelopmentWorkload => "new_development_workload",
            Criterion::HardwareCost => "hardware_cost",
            Criterion::RealizationDifficulty => "realization_difficulty",
            Criterion::RelearningWorkload => "relearning_workload",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A concept scored 0 (none) to 3 (significant) on each criterion; lower is better.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TscProfile {
    pub tsc_id: String,
    pub phase: String,
    pub scores: BTreeMap<Criterion, u8>,
    #[serde(default)]
    pub score_notes: BTreeMap<Criterion, String>,
}

impl TscProfile {
    pub fn validate(&self) -> Result<(), CompareError> {
        let bad = |msg: String| CompareError::InvalidProfile {
            id: self.tsc_id.clone(),
            msg,
        };
        for c in Criterion::ALL {
            match self.scores.get(&c) {
                None => return Err(bad(format!("missing score for {c}"))),
                Some(s) if *s > 3 => return Err(bad(format!("score for {c} must be 0..=3, got {s}"))),
                _ => {}
            }
        }
        Ok(())
    }
}

fn profile(id: &str, phase: &str, rows: [(u8, &str); 4]) -> TscProfile {
    TscProfile {
        tsc_id: id.to_string(),
        phase: phase.to_string(),
        scores: Criterion::ALL
            .iter()
            .zip(rows.iter())
            .map(|(c, (s, _))| (*c, *s))
            .collect(),
        score_notes: Criterion::ALL
            .iter()
            .zip(rows.iter())
            .map(|(c, (_, n))| (*c, n.to_string()))
            .collect(),
    }
}

/// The five reference profiles.
pub fn default_profiles() -> Vec<TscProfile> {
    const ARCH: &str = "system architecture design";
    const DEV: &str = "development and change management of SML component";
    const NO_HW: &str = "no additional hardware required";
    vec![
        profile(
            "1-1",
            ARCH,
            [
                (2, "almost same as conventional deductive systems"),
                (3, "additional monitoring system required"),
                (1, "same as conventional deductive systems"),
                (1, "reintegration test"),
            ],
        ),
        profile(
            "1-2",
            ARCH,
            [
                (3, "three or more redundancy with sufficient independence required"),
                (3, "three or more redundancy with sufficient independence required"),
                (3, "diverse design"),
                (2, "component test and reintegration test"),
            ],
        ),
        profile(
            "2-1",
            DEV,
            [
                (2, "almost same as conventional deductive systems"),
                (0, NO_HW),
                (3, "more improvements in XAI techniques expected"),
                (2, "reassessment of the relearning process"),
            ],
        ),
        profile(
            "2-2",
            DEV,
            [
                (1, "output measurement and quantitative evaluation required"),
                (0, NO_HW),
                (2, "lack of experience"),
                (2, "remeasurement of output and reassessment"),
            ],
        ),
        profile(
            "2-3",
            "one or more year(s) after product release",
            [
                (1, "data recording and its evaluation"),
                (0, NO_HW),
                (1, "easy but usage condition is restricted"),
                (3, "relearning is not allowed"),
            ],
        ),
    ]
}

pub type Weights = BTreeMap<Criterion, f64>;

pub fn unit_weights() -> Weights {
    Criterion::ALL.iter().map(|c| (*c, 1.0)).collect()
}

fn check_weights(w: &Weights) -> Result<(), CompareError> {
    let missing: Vec<String> = Criterion::ALL
        .iter()
        .filter(|c| !w.contains_key(c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CompareError::IncompleteWeights(missing));
    }
    for (c, v) in w {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(CompareError::InvalidWeight(c.to_string()));
        }
    }
    Ok(())
}

/// Weighted score sum; `None` means unit weights.
pub fn total(profile: &TscProfile, weights: Option<&Weights>) -> Result<f64, CompareError> {
    profile.validate()?;
    if let Some(w) = weights {
        check_weights(w)?;
    }
    Ok(Criterion::ALL
        .iter()
        .map(|c| f64::from(profile.scores[c]) * weights.map_or(1.0, |w| w[c]))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub tsc_id: String,
    pub total: f64,
    pub breakdown: BTreeMap<Criterion, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// Ascending total; equal totals keep input order.
    pub entries: Vec<RankEntry>,
    /// Groups of two or more profiles sharing a total.
    pub tie_groups: Vec<Vec<String>>,
}

fn same_total(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

pub fn rank(profiles: &[TscProfile], weights: Option<&Weights>) -> Result<Ranking, CompareError> {
    if profiles.is_empty() {
        return Err(CompareError::EmptyProfiles);
    }
    let entries = profiles
        .iter()
        .map(|p| {
            let t = total(p, weights)?;
            let breakdown = Criterion::ALL
                .iter()
                .map(|c| (*c, f64::from(p.scores[c]) * weights.map_or(1.0, |w| w[c])))
                .collect();
            Ok(RankEntry {
                tsc_id: p.tsc_id.clone(),
                total: t,
                breakdown,
            })
        })
        .collect::<Result<Vec<_>, CompareError>>()?;
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| entries[a].total.total_cmp(&entries[b].total));

    // totals within rounding of each other form a tie group, kept in input order
    let mut ranked = Vec::with_capacity(entries.len());
    let mut tie_groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && same_total(entries[order[j - 1]].total, entries[order[j]].total) {
            j += 1;
        }
        let mut group = order[i..j].to_vec();
        group.sort_unstable();
        if group.len() > 1 {
            tie_groups.push(group.iter().map(|&k| entries[k].tsc_id.clone()).collect());
        }
        ranked.extend(group);
        i = j;
    }
    let entries = ranked.into_iter().map(|k| entries[k].clone()).collect();
    Ok(Ranking { entries, tie_groups })
}

/// Where a concept provides assurance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssuranceRow {
    pub tsc_id: &'static str,
    pub name: &'static str,
    pub system_level: bool,
    pub component_reliable_process: bool,
    pub component_reliable_output: bool,
}

pub fn assurance_matrix() -> [AssuranceRow; 5] {
    let row = |tsc_id, name, s, p, o| AssuranceRow {
        tsc_id,
        name,
        system_level: s,
        component_reliable_process: p,
        component_reliable_output: o,
    };
    [
        row("1-1", "Safety monitoring mechanism", true, false, false),
        row("1-2", "Redundant SML software components", false, false, true),
        row("2-1", "Assessment of SML development process", false, true, false),
        row(
            "2-2",
            "Quantitative evaluation of dangerous failure rate",
            false,
            false,
            true,
        ),
        row("2-3", "Proven in use", false, true, true),
    ]
}

/// The assurance matrix as tab-separated text with `X` / `N/A` cells.
pub fn assurance_matrix_tsv() -> String {
    let cell = |b: bool| if b { "X" } else { "N/A" };
    let mut out = String::from("tsc\tname\tsystem_level\treliable_process\treliable_output\n");
    for r in assurance_matrix() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.tsc_id,
            r.name,
            cell(r.system_level),
            cell(r.component_reliable_process),
            cell(r.component_reliable_output)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_id(id: &str) -> TscProfile {
        default_profiles().into_iter().find(|p| p.tsc_id == id).unwrap()
    }

    #[test]
    fn default_totals() {
        let totals: Vec<f64> = default_profiles().iter().map(|p| total(p, None).unwrap()).collect();
        assert_eq!(totals, vec![7.0, 11.0, 7.0, 5.0, 5.0]);
    }

    #[test]
    fn weighted_totals() {
        let zero: Weights = Criterion::ALL.iter().map(|c| (*c, 0.0)).collect();
        assert!(default_profiles().iter().all(|p| total(p, Some(&zero)).unwrap() == 0.0));
        let mut w = unit_weights();
        w.insert(Criterion::HardwareCost, 2.0);
        assert_eq!(total(&by_id("1-1"), Some(&w)).unwrap(), 10.0);
        w.remove(&Criterion::RelearningWorkload);
        assert_eq!(
            total(&by_id("1-1"), Some(&w)),
            Err(CompareError::IncompleteWeights(vec!["relearning_workload".into()]))
        );
    }

    #[test]
    fn ranking_surfaces_ties() {
        let r = rank(&default_profiles(), None).unwrap();
        let ids: Vec<&str> = r.entries.iter().map(|e| e.tsc_id.as_str()).collect();
        assert_eq!(ids, vec!["2-2", "2-3", "1-1", "2-1", "1-2"]);
        assert_eq!(
            r.tie_groups,
            vec![vec!["2-2".to_string(), "2-3".into()], vec!["1-1".into(), "2-1".into()]]
        );
    }

    #[test]
    fn ranking_without_hardware_cost() {
        let mut w = unit_weights();
        w.insert(Criterion::HardwareCost, 0.0);
        let r = rank(&default_profiles(), Some(&w)).unwrap();
        assert_eq!(r.entries[0].tsc_id, "1-1");
        assert_eq!(r.entries[0].total, 4.0);
        let single = rank(&default_profiles()[..1], None).unwrap();
        assert_eq!(single.entries.len(), 1);
        assert!(single.tie_groups.is_empty());
        assert_eq!(rank(&[], None), Err(CompareError::EmptyProfiles));
    }

    #[test]
    fn custom_profile_validation() {
        let mut p = by_id("2-2");
        p.scores.insert(Criterion::HardwareCost, 4);
        assert!(total(&p, None).is_err());
        p.scores.remove(&Criterion::HardwareCost);
        assert!(total(&p, None).is_err());
    }

    #[test]
    fn matrix_cells() {
        let m = assurance_matrix();
        assert!(m[0].system_level && !m[0].component_reliable_process && !m[0].component_reliable_output);
        assert!(m[4].component_reliable_process && m[4].component_reliable_output);
    }
}
