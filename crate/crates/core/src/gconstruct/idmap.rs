use std::collections::HashMap;

use rustc_hash::FxBuildHasher;

use super::table::StrColumn;
use crate::error::{Error, Result};

/// Bijection between raw string ids and contiguous integers `0..N`, in
/// first-appearance order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeIdMap {
    pub node_type: String,
    ids: Vec<String>,
    index: HashMap<String, u64, FxBuildHasher>,
}

/// Result of mapping one id column: the map plus, per row, the integer id and
/// whether the row repeats an earlier one.
#[derive(Debug, Clone)]
pub struct IdAssignment {
    pub map: NodeIdMap,
    /// Row index where each integer id first appeared.
    pub first_row: Vec<usize>,
    /// `(row, first_row)` for every repeated id.
    pub duplicates: Vec<(usize, usize)>,
}

pub fn build_id_map(column: &StrColumn, node_type: &str) -> IdAssignment {
    let mut map = NodeIdMap {
        node_type: node_type.to_string(),
        ids: Vec::new(),
        index: HashMap::with_capacity_and_hasher(column.len(), FxBuildHasher),
    };
    let mut first_row = Vec::new();
    let mut duplicates = Vec::new();
    for (row, raw) in column.iter().enumerate() {
        match map.index.get(raw) {
            Some(&id) => duplicates.push((row, first_row[id as usize])),
            None => {
                map.index.insert(raw.to_string(), map.ids.len() as u64);
                map.ids.push(raw.to_string());
                first_row.push(row);
            }
        }
    }
    IdAssignment {
        map,
        first_row,
        duplicates,
    }
}

impl NodeIdMap {
    pub fn from_ids(node_type: &str, ids: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity_and_hasher(ids.len(), FxBuildHasher);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i as u64).is_some() {
                return Err(Error::invalid(format!("duplicate id {id:?} in {node_type} id list")));
            }
        }
        Ok(Self {
            node_type: node_type.to_string(),
            ids,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn forward(&self, raw: &str) -> Option<u64> {
        self.index.get(raw).copied()
    }

    pub fn reverse(&self, id: u64) -> Option<&str> {
        self.ids.get(id as usize).map(String::as_str)
    }

    /// Raw ids in integer order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

const MAX_REPORTED: usize = 10;

fn remap_column(column: &StrColumn, map: &NodeIdMap) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(column.len());
    let mut missing = Vec::new();
    for raw in column.iter() {
        match map.forward(raw) {
            Some(id) => out.push(id),
            None => {
                if missing.len() < MAX_REPORTED && !missing.iter().any(|m| m == raw) {
                    missing.push(raw.to_string());
                }
            }
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(Error::UnknownIds {
            node_type: map.node_type.clone(),
            ids: missing,
        })
    }
}

/// Maps every `(src, dst)` string pair to integers, preserving edge order.
pub fn remap_edges(src: &StrColumn, dst: &StrColumn, src_map: &NodeIdMap, dst_map: &NodeIdMap) -> Result<(Vec<u64>, Vec<u64>)> {
    if src.len() != dst.len() {
        return Err(Error::Shape(format!("{} sources vs {} destinations", src.len(), dst.len())));
    }
    Ok((remap_column(src, src_map)?, remap_column(dst, dst_map)?))
}
