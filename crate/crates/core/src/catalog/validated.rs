use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::builtin_catalog;

/// Shipped resolution of the 80% set's open slots.
pub const DEFAULT_RESOLUTION: &str = include_str!("../../data/resolution.txt");

/// Members of the 80% set that are not in doubt.
const FIXED_STRICT: [&str; 17] = [
    "no_consensus_standalone",
    "no_consensus_studies",
    "no_consensus_ideas",
    "no_consensus_methods",
    "no_consensus_results",
    "controvers_standalone",
    "controvers_studies",
    "controvers_ideas",
    "controvers_methods",
    "controvers_results",
    "debat_standalone",
    "debat_studies",
    "debat_methods",
    "debat_results",
    "disagree_studies",
    "disagree_results",
    "contrast_ideas",
];

/// Queries added when relaxing the threshold from 80% to 70%.
pub const RELAXED_ADDITIONS: [&str; 13] = [
    "contradict_standalone",
    "contrary_studies",
    "contrary_methods",
    "conflict_results",
    "disagree_methods",
    "disagree_ideas",
    "disprov_methods",
    "disprov_ideas",
    "refut_studies",
    "refut_results",
    "refut_ideas",
    "debat_ideas",
    "questionable_ideas",
];

/// How many resolved queries each open signal contributes.
const SLOTS: [(&str, usize); 5] = [
    ("contrary", 1),
    ("conflict", 1),
    ("contradict", 2),
    ("disprov", 1),
    ("questionable", 1),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSet {
    pub threshold: f64,
    pub query_ids: BTreeSet<String>,
}

impl ValidatedSet {
    pub fn contains(&self, query_id: &str) -> bool {
        self.query_ids.contains(query_id)
    }

    pub fn len(&self) -> usize {
        self.query_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.query_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResolutionError {
    #[error("resolution line {line}: unknown builtin query `{id}`")]
    UnknownQuery { line: usize, id: String },
    #[error("resolution line {line}: `{id}` is not an open slot (signals: contrary, conflict, contradict, disprov, questionable)")]
    NotOpenSlot { line: usize, id: String },
    #[error("resolution names {found} queries for `{signal}`, expected {expected}")]
    SlotCount {
        signal: String,
        expected: usize,
        found: usize,
    },
    #[error("no shipped validated set for threshold {0}; gate annotation statistics instead")]
    UnknownThreshold(f64),
}

/// The resolved open slots of the 80% set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    query_ids: BTreeSet<String>,
}

impl Resolution {
    pub fn parse(text: &str) -> Result<Self, ResolutionError> {
        let catalog: BTreeMap<String, String> = builtin_catalog()
            .into_iter()
            .map(|q| (q.query_id, q.signal_id))
            .collect();
        let mut query_ids = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let id = raw.split('#').next().unwrap_or("").trim();
            if id.is_empty() {
                continue;
            }
            let signal = catalog.get(id).ok_or_else(|| ResolutionError::UnknownQuery {
                line: i + 1,
                id: id.to_string(),
            })?;
            if !SLOTS.iter().any(|(s, _)| s == signal) || FIXED_STRICT.contains(&id) {
                return Err(ResolutionError::NotOpenSlot {
                    line: i + 1,
                    id: id.to_string(),
                });
            }
            query_ids.insert(id.to_string());
        }
        for (signal, expected) in SLOTS {
            let found = query_ids
                .iter()
                .filter(|id| catalog[*id] == signal)
                .count();
            if found != expected {
                return Err(ResolutionError::SlotCount {
                    signal: signal.to_string(),
                    expected,
                    found,
                });
            }
        }
        Ok(Resolution { query_ids })
    }

    pub fn query_ids(&self) -> &BTreeSet<String> {
        &self.query_ids
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution::parse(DEFAULT_RESOLUTION).expect("shipped resolution file")
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Shipped validated sets for the 0.80 and 0.70 thresholds.
pub fn default_validated_set(
    threshold: f64,
    resolution: &Resolution,
) -> Result<ValidatedSet, ResolutionError> {
    let mut ids: BTreeSet<String> = FIXED_STRICT.iter().map(|s| s.to_string()).collect();
    ids.extend(resolution.query_ids.iter().cloned());
    if same(threshold, 0.70) {
        ids.extend(RELAXED_ADDITIONS.iter().map(|s| s.to_string()));
    } else if !same(threshold, 0.80) {
        return Err(ResolutionError::UnknownThreshold(threshold));
    }
    Ok(ValidatedSet {
        threshold,
        query_ids: ids,
    })
}
