use std::collections::HashSet;

use crate::partition::{GraphMeta, RelStore};

/// Edges removed from the message-passing graph.
///
/// Val/test edges of the flagged relations are matched by their split mask;
/// batch targets are matched by `(relation, src, dst)`, so parallel copies of
/// a target edge are removed too.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExclusionSet {
    pub eval_relations: Vec<bool>,
    pub targets: HashSet<(u32, u64, u64)>,
}

impl ExclusionSet {
    pub fn none(num_relations: usize) -> Self {
        Self {
            eval_relations: vec![false; num_relations],
            targets: HashSet::new(),
        }
    }

    /// Excludes val/test-marked edges of every relation that carries an LP split.
    pub fn eval_edges(meta: &GraphMeta) -> Self {
        Self {
            eval_relations: meta.relations.iter().map(|r| r.has_split).collect(),
            targets: HashSet::new(),
        }
    }

    /// Adds batch target edges, optionally with their reverse orientation in
    /// every relation whose endpoint types are swapped.
    pub fn add_targets(&mut self, meta: &GraphMeta, rel: usize, src: &[u64], dst: &[u64], include_reverse: bool) {
        let reverse = if include_reverse { meta.reverse_relations(rel) } else { Vec::new() };
        for (&u, &v) in src.iter().zip(dst) {
            self.targets.insert((rel as u32, u, v));
            for &r in &reverse {
                self.targets.insert((r as u32, v, u));
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty() && !self.eval_relations.iter().any(|&b| b)
    }

    /// Whether the edge at position `pos` of a partition's relation store is excluded.
    pub fn excludes(&self, rel: usize, store: &RelStore, pos: usize) -> bool {
        if self.eval_relations.get(rel).copied().unwrap_or(false) {
            if let Some(s) = &store.split {
                if s.val[pos] || s.test[pos] {
                    return true;
                }
            }
        }
        !self.targets.is_empty() && self.targets.contains(&(rel as u32, store.src[pos], store.dst[pos]))
    }

    /// Same test against a global edge description.
    pub fn excludes_edge(&self, rel: usize, src: u64, dst: u64, is_eval: bool) -> bool {
        (is_eval && self.eval_relations.get(rel).copied().unwrap_or(false)) || self.targets.contains(&(rel as u32, src, dst))
    }
}
