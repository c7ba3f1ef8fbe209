use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;

use super::graph::{ConstructedGraph, EdgeData, Labels, NamedFeature, NodeData};
use super::idmap::{build_id_map, remap_edges, NodeIdMap};
use super::splits::{assign_splits, SplitMasks};
use super::table::{expand_files, ingest_table, RawTable};
use super::transform::transform_feature;
use crate::error::{Error, Result};
use crate::schema::{EdgeSpec, GraphSchema, LabelSpec, NodeSpec, RelationType};
use crate::util::{mix64, stable_hash};

/// Builds the typed graph described by `schema` from files under `input_dir`.
///
/// Node types are processed first (their id maps are needed to remap edges).
/// Files within a spec are read in parallel on the current rayon pool.
pub fn construct_graph(schema: &GraphSchema, input_dir: &Path, rng_seed: u64) -> Result<ConstructedGraph> {
    schema.validate()?;
    let nodes = schema
        .nodes
        .iter()
        .map(|spec| build_node_data(spec, input_dir, rng_seed))
        .collect::<Result<Vec<_>>>()?;
    let maps: HashMap<&str, &NodeIdMap> = nodes.iter().map(|n| (n.node_type.as_str(), &n.ids)).collect();
    let edges = schema
        .edges
        .iter()
        .map(|spec| {
            let src = maps[spec.relation.src_type.as_str()];
            let dst = maps[spec.relation.dst_type.as_str()];
            build_edge_data(spec, input_dir, src, dst, rng_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstructedGraph {
        name: "graph".to_string(),
        schema: schema.clone(),
        nodes,
        edges,
    })
}

fn unique<'a>(cols: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    cols.into_iter().filter(|c| seen.insert(*c)).collect()
}

pub fn ingest_node_table(spec: &NodeSpec, input_dir: &Path) -> Result<RawTable> {
    let files = expand_files(input_dir, &spec.files)?;
    let cols = unique(
        std::iter::once(spec.node_id_col.as_str())
            .chain(spec.features.iter().map(|f| f.feature_col.as_str()))
            .chain(spec.labels.iter().filter_map(|l| l.label_col.as_deref())),
    );
    ingest_table(&files, spec.format.name, &cols)
}

pub fn ingest_edge_table(spec: &EdgeSpec, input_dir: &Path) -> Result<RawTable> {
    let files = expand_files(input_dir, &spec.files)?;
    let cols = unique(
        [spec.source_id_col.as_str(), spec.dest_id_col.as_str()]
            .into_iter()
            .chain(spec.weight_col.as_deref()),
    );
    ingest_table(&files, spec.format.name, &cols)
}

fn build_node_data(spec: &NodeSpec, input_dir: &Path, rng_seed: u64) -> Result<NodeData> {
    let table = ingest_node_table(spec, input_dir)?;
    let raw_ids = table.strings(&spec.node_id_col)?;
    let assignment = build_id_map(&raw_ids, &spec.node_type);

    let value_cols: Vec<&str> = spec
        .features
        .iter()
        .map(|f| f.feature_col.as_str())
        .chain(spec.labels.iter().filter_map(|l| l.label_col.as_deref()))
        .collect();
    for &(row, first) in &assignment.duplicates {
        if !table.rows_equal(row, first, &value_cols) {
            let raw = raw_ids.get(row);
            return Err(table.data_error(row, format!("node `{raw}` repeats with conflicting values")));
        }
    }
    let dedup = !assignment.duplicates.is_empty();

    let features = spec
        .features
        .par_iter()
        .map(|f| {
            let t = transform_feature(&table, f, None)?;
            let matrix = if dedup {
                t.matrix.gather(assignment.first_row.iter().copied())
            } else {
                t.matrix
            };
            Ok(NamedFeature {
                name: f.output_name().to_string(),
                matrix,
                stats: t.stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (labels, split) = match spec.labels.first() {
        Some(label) => {
            let labels = encode_labels(&table, label, &assignment.first_row)?;
            let split = node_split(&labels.values, label.split_pct, rng_seed, &spec.node_type);
            (Some(labels), Some(split))
        }
        None => (None, None),
    };

    Ok(NodeData {
        node_type: spec.node_type.clone(),
        ids: assignment.map,
        features,
        labels,
        split,
    })
}

/// Integer labels are used as class ids directly; anything else is mapped
/// through a sorted vocabulary. Empty cells mean unlabeled.
fn encode_labels(table: &RawTable, spec: &LabelSpec, rows: &[usize]) -> Result<Labels> {
    let col = spec.label_col.as_deref().expect("validated classification label");
    let raw = table.strings(col)?;
    let cells: Vec<&str> = rows.iter().map(|&r| raw.get(r).trim()).collect();
    let as_ints: Option<Vec<i32>> = cells
        .iter()
        .map(|c| if c.is_empty() { Some(-1) } else { c.parse::<i32>().ok().filter(|v| *v >= 0) })
        .collect();
    if let Some(values) = as_ints {
        let num_classes = values.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
        return Ok(Labels {
            values,
            num_classes,
            vocab: None,
        });
    }
    let vocab: Vec<String> = cells
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| c.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<&str, i32> = vocab.iter().enumerate().map(|(i, v)| (v.as_str(), i as i32)).collect();
    Ok(Labels {
        values: cells.iter().map(|c| index.get(c).copied().unwrap_or(-1)).collect(),
        num_classes: vocab.len(),
        vocab: Some(vocab),
    })
}

/// Splits over labeled nodes only; unlabeled nodes are in no mask.
pub(crate) fn node_split(values: &[i32], split_pct: [f64; 3], rng_seed: u64, node_type: &str) -> SplitMasks {
    let seed = mix64(&[rng_seed, stable_hash(&[b"node", node_type.as_bytes()])]);
    let labeled: Vec<usize> = (0..values.len()).filter(|&i| values[i] >= 0).collect();
    let local = assign_splits(labeled.len(), split_pct, seed);
    let mut masks = SplitMasks::empty(values.len());
    for (k, &i) in labeled.iter().enumerate() {
        masks.train[i] = local.train[k];
        masks.val[i] = local.val[k];
        masks.test[i] = local.test[k];
    }
    masks
}

pub(crate) fn edge_split(count: usize, split_pct: [f64; 3], rng_seed: u64, relation: &RelationType) -> SplitMasks {
    let seed = mix64(&[rng_seed, stable_hash(&[b"edge", relation.to_string().as_bytes()])]);
    assign_splits(count, split_pct, seed)
}

fn build_edge_data(spec: &EdgeSpec, input_dir: &Path, src_map: &NodeIdMap, dst_map: &NodeIdMap, rng_seed: u64) -> Result<EdgeData> {
    let table = ingest_edge_table(spec, input_dir)?;
    let (src, dst) = remap_edges(
        &table.strings(&spec.source_id_col)?,
        &table.strings(&spec.dest_id_col)?,
        src_map,
        dst_map,
    )?;
    let weights = match &spec.weight_col {
        Some(col) => {
            let w = table.floats(col)?;
            if let Some(i) = w.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(table.data_error(i, format!("`{col}`: edge weight {} must be finite and >= 0", w[i])));
            }
            Some(w.into_iter().map(|x| x as f32).collect())
        }
        None => None,
    };
    let split = spec
        .labels
        .first()
        .map(|label| edge_split(src.len(), label.split_pct, rng_seed, &spec.relation));
    if src.len() != table.row_count {
        return Err(Error::Shape("edge remap changed the row count".into()));
    }
    Ok(EdgeData {
        relation: spec.relation.clone(),
        src,
        dst,
        weights,
        split,
    })
}
