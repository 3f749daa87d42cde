//! Identifier mapping with validity intervals.

use std::collections::{BTreeSet, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMapping {
    pub source_id: String,
    pub target_id: String,
    pub valid_from: NaiveDate,
    pub valid_to: NaiveDate,
}

impl IdMapping {
    pub fn validate(&self) -> Result<()> {
        if self.valid_from > self.valid_to {
            return Err(Error::validation(format!(
                "mapping {} -> {} ends ({}) before it starts ({})",
                self.source_id, self.target_id, self.valid_to, self.valid_from
            )));
        }
        Ok(())
    }

    /// Both ends inclusive.
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.valid_from <= date && date <= self.valid_to
    }
}

/// Pairs of mappings for the same source whose intervals intersect.
pub fn overlapping_mappings(mappings: &[IdMapping]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..mappings.len() {
        for j in i + 1..mappings.len() {
            let (a, b) = (&mappings[i], &mappings[j]);
            if a.source_id == b.source_id && a.valid_from <= b.valid_to && b.valid_from <= a.valid_to {
                out.push((i, j));
            }
        }
    }
    out
}

/// The target whose interval contains `date`. Several distinct targets is
/// an error; none is `Ok(None)`.
pub fn resolve_id(source_id: &str, date: NaiveDate, mappings: &[IdMapping]) -> Result<Option<String>> {
    let targets: BTreeSet<&str> = mappings
        .iter()
        .filter(|m| m.source_id == source_id && m.contains(date))
        .map(|m| m.target_id.as_str())
        .collect();
    match targets.len() {
        0 => Ok(None),
        1 => Ok(targets.into_iter().next().map(str::to_string)),
        _ => Err(Error::AmbiguousMapping {
            source_id: source_id.to_string(),
            date: date.to_string(),
            targets: targets.into_iter().map(str::to_string).collect(),
        }),
    }
}

/// Mapping table indexed by source id.
#[derive(Debug, Clone, Default)]
pub struct IdMap {
    by_source: HashMap<String, Vec<IdMapping>>,
    /// Overlapping pairs found at load time, as (source, first target, second target).
    pub overlaps: Vec<(String, String, String)>,
}

impl IdMap {
    pub fn new(mappings: Vec<IdMapping>) -> Result<Self> {
        for m in &mappings {
            m.validate()?;
        }
        let overlaps = overlapping_mappings(&mappings)
            .into_iter()
            .map(|(i, j)| (mappings[i].source_id.clone(), mappings[i].target_id.clone(), mappings[j].target_id.clone()))
            .collect::<Vec<_>>();
        for (s, a, b) in &overlaps {
            log::warn!("overlapping mappings for {s}: {a} and {b}");
        }
        let mut by_source: HashMap<String, Vec<IdMapping>> = HashMap::new();
        for m in mappings {
            by_source.entry(m.source_id.clone()).or_default().push(m);
        }
        Ok(IdMap { by_source, overlaps })
    }

    pub fn resolve(&self, source_id: &str, date: NaiveDate) -> Result<Option<String>> {
        match self.by_source.get(source_id) {
            Some(list) => resolve_id(source_id, date, list),
            None => Ok(None),
        }
    }
}
