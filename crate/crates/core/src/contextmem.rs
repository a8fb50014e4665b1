//! Per-process structured context window and agent memory.

use std::collections::{HashMap, VecDeque};

use crate::vm::Value;

/// Working-tier capacity; the episodic tier holds twice as many.
pub const DEFAULT_WORKING_CAPACITY: usize = 100;

/// Three tiers: system directives (P0), episodic history (P2) and the
/// working set (P1). Rendered flat as P0, then P2, then P1, so directives
/// sit at the start of the prompt and the newest material at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredContext {
    p0: Vec<String>,
    p1: VecDeque<String>,
    p2: VecDeque<String>,
    working_capacity: usize,
}

impl Default for StructuredContext {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_WORKING_CAPACITY)
    }
}

impl StructuredContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// Working tier bound `w`; episodic tier bound `2w`.
    pub fn with_capacity(w: usize) -> Self {
        Self {
            p0: Vec::new(),
            p1: VecDeque::new(),
            p2: VecDeque::new(),
            working_capacity: w.max(1),
        }
    }

    /// Rebuild from stored tiers (used when restoring snapshots).
    pub fn from_parts(p0: Vec<String>, p2: Vec<String>, p1: Vec<String>, w: usize) -> Self {
        let mut ctx = Self::with_capacity(w);
        ctx.p0 = p0;
        ctx.p2 = p2.into();
        ctx.p1 = p1.into();
        ctx
    }

    pub fn working_capacity(&self) -> usize {
        self.working_capacity
    }

    pub fn episodic_capacity(&self) -> usize {
        self.working_capacity * 2
    }

    pub fn system(&mut self, directive: impl Into<String>) {
        self.p0.push(directive.into());
    }

    /// Push onto the working tier. When full, its oldest item is demoted to
    /// the episodic tier, whose own oldest item is dropped on overflow.
    pub fn append(&mut self, item: impl Into<String>) {
        if self.p1.len() == self.working_capacity {
            if let Some(oldest) = self.p1.pop_front() {
                if self.p2.len() == self.episodic_capacity() {
                    self.p2.pop_front();
                }
                self.p2.push_back(oldest);
            }
        }
        self.p1.push_back(item.into());
    }

    pub fn to_flat_vec(&self) -> Vec<String> {
        self.p0
            .iter()
            .chain(self.p2.iter())
            .chain(self.p1.iter())
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.p0.len() + self.p1.len() + self.p2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn p0(&self) -> &[String] {
        &self.p0
    }

    pub fn p1(&self) -> &VecDeque<String> {
        &self.p1
    }

    pub fn p2(&self) -> &VecDeque<String> {
        &self.p2
    }
}

/// Private key-value store behind `remember`/`recall`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentMemory {
    entries: HashMap<String, Value>,
}

impl AgentMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn remember(&mut self, key: impl Into<String>, value: Value) {
        self.entries.insert(key.into(), value);
    }

    /// Missing keys read as `Null`.
    pub fn recall(&self, key: &str) -> Value {
        self.entries.get(key).cloned().unwrap_or(Value::Null)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.entries.iter()
    }
}

impl FromIterator<(String, Value)> for AgentMemory {
    fn from_iter<I: IntoIterator<Item = (String, Value)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}
