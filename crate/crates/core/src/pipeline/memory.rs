use serde::{Deserialize, Serialize};

use crate::domain::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryKind {
    Preference,
    Constraint,
    History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemoryValue {
    SpeedCap { kph: f64 },
    Note { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryEntry {
    pub key: String,
    pub kind: MemoryKind,
    pub value: MemoryValue,
    #[serde(default = "default_origin")]
    pub origin: Role,
    #[serde(default)]
    pub inserted_step: u32,
    /// Survives into the next episode.
    #[serde(default = "default_persistent")]
    pub persistent: bool,
}

fn default_origin() -> Role {
    Role::User
}

fn default_persistent() -> bool {
    true
}

impl MemoryEntry {
    pub fn speed_cap(key: impl Into<String>, kph: f64, origin: Role, step: u32, persistent: bool) -> Self {
        Self {
            key: key.into(),
            kind: MemoryKind::Constraint,
            value: MemoryValue::SpeedCap { kph },
            origin,
            inserted_step: step,
            persistent,
        }
    }

    fn cap_kph(&self) -> Option<f64> {
        match (&self.kind, &self.value) {
            (MemoryKind::Constraint, MemoryValue::SpeedCap { kph }) => Some(*kph),
            _ => None,
        }
    }
}

/// Personal-agent long-term memory. Append-only within an episode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    entries: Vec<MemoryEntry>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = MemoryEntry>) -> Self {
        let mut store = Self::new();
        for e in entries {
            store.append(e);
        }
        store
    }

    /// Returns false when an entry with the same key and value is already
    /// stored; the store is left untouched in that case.
    pub fn append(&mut self, entry: MemoryEntry) -> bool {
        let dup = self
            .entries
            .iter()
            .any(|e| e.key == entry.key && e.kind == entry.kind && e.value == entry.value);
        if dup {
            return false;
        }
        self.entries.push(entry);
        true
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (key, cap) for every speed-cap constraint, in insertion order.
    pub fn speed_caps(&self) -> Vec<(&str, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.cap_kph().map(|c| (e.key.as_str(), c)))
            .collect()
    }

    pub fn effective_cap(&self) -> Option<f64> {
        self.speed_caps().into_iter().map(|(_, c)| c).reduce(f64::min)
    }

    /// What the next episode starts with.
    pub fn carry_over(&self) -> MemoryStore {
        MemoryStore {
            entries: self.entries.iter().filter(|e| e.persistent).cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_cap_is_minimum() {
        let store = MemoryStore::from_entries([
            MemoryEntry::speed_cap("a", 45.0, Role::User, 0, true),
            MemoryEntry::speed_cap("b", 60.0, Role::User, 0, true),
        ]);
        assert_eq!(store.effective_cap(), Some(45.0));
        assert_eq!(store.speed_caps().len(), 2);
    }

    #[test]
    fn preferences_do_not_cap() {
        let mut store = MemoryStore::new();
        store.append(MemoryEntry {
            key: "likes".into(),
            kind: MemoryKind::Preference,
            value: MemoryValue::SpeedCap { kph: 30.0 },
            origin: Role::User,
            inserted_step: 0,
            persistent: true,
        });
        assert_eq!(store.effective_cap(), None);
    }

    #[test]
    fn duplicate_append_is_noop() {
        let mut store = MemoryStore::new();
        assert!(store.append(MemoryEntry::speed_cap("a", 45.0, Role::User, 0, true)));
        assert!(!store.append(MemoryEntry::speed_cap("a", 45.0, Role::User, 3, true)));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn carry_over_keeps_only_persistent() {
        let store = MemoryStore::from_entries([
            MemoryEntry::speed_cap("keep", 50.0, Role::User, 0, true),
            MemoryEntry::speed_cap("drop", 40.0, Role::External, 0, false),
        ]);
        let next = store.carry_over();
        assert_eq!(next.len(), 1);
        assert_eq!(next.effective_cap(), Some(50.0));
    }
}
