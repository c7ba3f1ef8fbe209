//! Feature encodings. Fitted statistics are returned so inference-time data
//! is encoded exactly as training data was.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::table::RawTable;
use crate::error::{Error, Result};
use crate::schema::{FeatureSpec, TransformKind};

/// Row-major float32 matrix, the in-memory form of a feature file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(rows * cols, data.len(), "feature matrix shape");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Rows in the given order.
    pub fn gather(&self, rows: impl IntoIterator<Item = usize>) -> FeatureMatrix {
        let mut data = Vec::new();
        let mut n = 0;
        for r in rows {
            data.extend_from_slice(self.row(r));
            n += 1;
        }
        FeatureMatrix::new(n, self.cols, data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedStats {
    None { width: usize },
    MaxMin { min: Vec<f64>, max: Vec<f64> },
    OneHot { vocab: Vec<String> },
    FloatVector { width: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub matrix: FeatureMatrix,
    pub stats: FittedStats,
    pub warnings: Vec<String>,
}

/// Encodes `spec.feature_col` of `table`. With `fitted`, reuses training-time
/// statistics instead of computing them from this data.
pub fn transform_feature(table: &RawTable, spec: &FeatureSpec, fitted: Option<&FittedStats>) -> Result<Transformed> {
    let col = spec.feature_col.as_str();
    let mut warnings = Vec::new();
    let (matrix, stats) = match spec.transform.name {
        TransformKind::None | TransformKind::FloatVector => {
            let (width, data) = table.float_vectors(col)?;
            if let Some(FittedStats::None { width: w } | FittedStats::FloatVector { width: w }) = fitted {
                if *w != width {
                    return Err(Error::Shape(format!("feature `{col}` width {width}, fitted width {w}")));
                }
            }
            let stats = if spec.transform.name == TransformKind::None {
                FittedStats::None { width }
            } else {
                FittedStats::FloatVector { width }
            };
            (to_matrix(table.row_count, width, &data), stats)
        }
        TransformKind::MaxMin => {
            let (width, data) = table.float_vectors(col)?;
            let (min, max) = match fitted {
                Some(FittedStats::MaxMin { min, max }) if min.len() == width => (min.clone(), max.clone()),
                Some(_) => return Err(Error::Shape(format!("fitted stats do not match max_min feature `{col}`"))),
                None => column_ranges(width, &data),
            };
            let mut out = vec![0f32; data.len()];
            for k in 0..width {
                let span = max[k] - min[k];
                if span <= 0.0 || !span.is_finite() {
                    warnings.push(format!("feature `{col}` dim {k}: max == min, emitting zeros"));
                    continue;
                }
                for r in 0..table.row_count {
                    out[r * width + k] = ((data[r * width + k] - min[k]) / span) as f32;
                }
            }
            (FeatureMatrix::new(table.row_count, width, out), FittedStats::MaxMin { min, max })
        }
        TransformKind::OneHot => {
            let values = table.strings(col)?;
            let vocab = match fitted {
                Some(FittedStats::OneHot { vocab }) => vocab.clone(),
                Some(_) => return Err(Error::Shape(format!("fitted stats do not match one_hot feature `{col}`"))),
                None => {
                    let mut seen = HashMap::new();
                    let mut vocab = Vec::new();
                    for v in values.iter() {
                        if !seen.contains_key(v) {
                            seen.insert(v.to_string(), vocab.len());
                            vocab.push(v.to_string());
                        }
                    }
                    vocab
                }
            };
            let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
            let width = vocab.len();
            let mut out = vec![0f32; table.row_count * width];
            let mut unseen = 0usize;
            for (r, v) in values.iter().enumerate() {
                match index.get(v) {
                    Some(&k) => out[r * width + k] = 1.0,
                    None => unseen += 1,
                }
            }
            if unseen > 0 {
                warnings.push(format!("feature `{col}`: {unseen} rows with unseen categories encoded as zeros"));
            }
            (FeatureMatrix::new(table.row_count, width, out), FittedStats::OneHot { vocab })
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Transformed { matrix, stats, warnings })
}

fn to_matrix(rows: usize, width: usize, data: &[f64]) -> FeatureMatrix {
    FeatureMatrix::new(rows, width, data.iter().map(|&x| x as f32).collect())
}

fn column_ranges(width: usize, data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut min = vec![f64::INFINITY; width];
    let mut max = vec![f64::NEG_INFINITY; width];
    for row in data.chunks_exact(width.max(1)) {
        for (k, &x) in row.iter().enumerate().take(width) {
            min[k] = min[k].min(x);
            max[k] = max[k].max(x);
        }
    }
    (min, max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gconstruct::table::{Column, StrColumn};
    use crate::schema::TransformSpec;

    fn spec(kind: TransformKind) -> FeatureSpec {
        FeatureSpec {
            feature_col: "c".into(),
            feature_name: None,
            transform: TransformSpec { name: kind },
        }
    }

    fn floats(v: &[f64]) -> RawTable {
        RawTable::from_columns(vec![("c".into(), Column::Float(v.to_vec()))]).unwrap()
    }

    fn strings(v: &[&str]) -> RawTable {
        RawTable::from_columns(vec![("c".into(), Column::Str(v.iter().collect::<StrColumn>()))]).unwrap()
    }

    #[test]
    fn max_min_endpoints() {
        let t = transform_feature(&floats(&[0.0, 5.0, 10.0]), &spec(TransformKind::MaxMin), None).unwrap();
        assert_eq!(t.matrix.data, vec![0.0, 0.5, 1.0]);
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn max_min_degenerate_warns() {
        let t = transform_feature(&floats(&[7.0, 7.0, 7.0]), &spec(TransformKind::MaxMin), None).unwrap();
        assert_eq!(t.matrix.data, vec![0.0; 3]);
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn one_hot_first_appearance() {
        let t = transform_feature(&strings(&["a", "b", "a"]), &spec(TransformKind::OneHot), None).unwrap();
        assert_eq!(t.matrix.cols, 2);
        assert_eq!(t.matrix.data, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn one_hot_unseen_at_inference() {
        let fit = transform_feature(&strings(&["a", "b"]), &spec(TransformKind::OneHot), None).unwrap();
        let t = transform_feature(&strings(&["b", "z"]), &spec(TransformKind::OneHot), Some(&fit.stats)).unwrap();
        assert_eq!(t.matrix.data, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn fitted_stats_reproduce_training_encoding() {
        let data = [3.0, -1.0, 8.5, 2.0];
        let train = transform_feature(&floats(&data), &spec(TransformKind::MaxMin), None).unwrap();
        let infer = transform_feature(&floats(&data), &spec(TransformKind::MaxMin), Some(&train.stats)).unwrap();
        assert_eq!(train.matrix, infer.matrix);
    }

    #[test]
    fn max_min_requires_numbers() {
        assert!(transform_feature(&strings(&["x"]), &spec(TransformKind::MaxMin), None).is_err());
    }
}
