//! Raw tabular input: CSV or JSON-lines files concatenated in listed order.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::schema::FileFormat;

/// Strings packed into one buffer; ids for 10M-row edge tables stay compact.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrColumn {
    bytes: String,
    ends: Vec<u64>,
}

impl StrColumn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: &str) {
        self.bytes.push_str(s);
        self.ends.push(self.bytes.len() as u64);
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub fn get(&self, i: usize) -> &str {
        let start = if i == 0 { 0 } else { self.ends[i - 1] as usize };
        &self.bytes[start..self.ends[i] as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    fn append(&mut self, other: StrColumn) {
        let base = self.bytes.len() as u64;
        self.bytes.push_str(&other.bytes);
        self.ends.extend(other.ends.into_iter().map(|e| e + base));
    }
}

impl<S: AsRef<str>> FromIterator<S> for StrColumn {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut c = StrColumn::new();
        for s in iter {
            c.push(s.as_ref());
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Str(StrColumn),
    Float(Vec<f64>),
    FloatVec { width: usize, data: Vec<f64> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Str(s) => s.len(),
            Column::Float(v) => v.len(),
            Column::FloatVec { width, data } => {
                if *width == 0 {
                    0
                } else {
                    data.len() / width
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Canonical text of one cell, used for duplicate-row comparison.
    pub fn cell_text(&self, row: usize) -> String {
        match self {
            Column::Str(s) => s.get(row).to_string(),
            Column::Float(v) => v[row].to_string(),
            Column::FloatVec { width, data } => format!("{:?}", &data[row * width..(row + 1) * width]),
        }
    }
}

/// Where each row came from, for error messages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowOrigin {
    files: Vec<(String, usize)>,
}

impl RowOrigin {
    /// `(file, 1-based data row)` of a global row.
    pub fn locate(&self, row: usize) -> (String, usize) {
        let idx = self.files.partition_point(|(_, start)| *start <= row).saturating_sub(1);
        match self.files.get(idx) {
            Some((file, start)) => (file.clone(), row - start + 1),
            None => ("<memory>".to_string(), row + 1),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawTable {
    pub columns: HashMap<String, Column>,
    pub row_count: usize,
    pub origin: RowOrigin,
}

impl RawTable {
    pub fn from_columns(columns: Vec<(String, Column)>) -> Result<Self> {
        let row_count = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        if let Some((name, c)) = columns.iter().find(|(_, c)| c.len() != row_count) {
            return Err(Error::Shape(format!(
                "column `{name}` has {} rows, expected {row_count}",
                c.len()
            )));
        }
        Ok(Self {
            columns: columns.into_iter().collect(),
            row_count,
            origin: RowOrigin::default(),
        })
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns.get(name).ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
            file: "table".to_string(),
        })
    }

    /// Column values as strings; numbers are rendered with their shortest text.
    pub fn strings(&self, name: &str) -> Result<StrColumn> {
        Ok(match self.column(name)? {
            Column::Str(s) => s.clone(),
            Column::Float(v) => v.iter().map(|x| fmt_number(*x)).collect(),
            Column::FloatVec { .. } => {
                return Err(Error::invalid(format!("column `{name}` holds vectors, expected ids")))
            }
        })
    }

    /// Scalar floats; string cells are parsed and failures reported with file + row.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        match self.column(name)? {
            Column::Float(v) => Ok(v.clone()),
            Column::Str(s) => s
                .iter()
                .enumerate()
                .map(|(i, cell)| {
                    cell.trim().parse::<f64>().map_err(|_| self.data_error(i, format!("`{name}`: cannot parse {cell:?} as a number")))
                })
                .collect(),
            Column::FloatVec { width: 1, data } => Ok(data.clone()),
            Column::FloatVec { .. } => Err(Error::invalid(format!("column `{name}` holds vectors, expected scalars"))),
        }
    }

    /// Row vectors of a fixed width. Scalars become width-1 vectors; string
    /// cells are parsed as JSON arrays (`[0.1,0.2]`) or separator-delimited numbers.
    pub fn float_vectors(&self, name: &str) -> Result<(usize, Vec<f64>)> {
        match self.column(name)? {
            Column::Float(v) => Ok((1, v.clone())),
            Column::FloatVec { width, data } => Ok((*width, data.clone())),
            Column::Str(s) => {
                let mut width = None;
                let mut data = Vec::new();
                for (i, cell) in s.iter().enumerate() {
                    let row = parse_vector(cell).ok_or_else(|| {
                        self.data_error(i, format!("`{name}`: cannot parse {cell:?} as a float vector"))
                    })?;
                    match width {
                        None => width = Some(row.len()),
                        Some(w) if w != row.len() => {
                            return Err(self.data_error(i, format!("`{name}`: vector width {} differs from {w}", row.len())))
                        }
                        _ => {}
                    }
                    data.extend(row);
                }
                Ok((width.unwrap_or(0), data))
            }
        }
    }

    pub fn data_error(&self, row: usize, message: String) -> Error {
        let (file, row) = self.origin.locate(row);
        Error::Data { file, row, message }
    }

    /// Whether two rows agree on every listed column.
    pub fn rows_equal(&self, a: usize, b: usize, columns: &[&str]) -> bool {
        columns.iter().all(|c| match self.columns.get(*c) {
            Some(col) => col.cell_text(a) == col.cell_text(b),
            None => true,
        })
    }
}

fn fmt_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        x.to_string()
    }
}

fn parse_vector(cell: &str) -> Option<Vec<f64>> {
    let t = cell.trim();
    if t.starts_with('[') {
        return serde_json::from_str::<Vec<f64>>(t).ok();
    }
    t.split(|c: char| c == ';' || c == ' ' || c == ',')
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().ok())
        .collect()
}

/// Expands `*` wildcards in the file-name component, sorted by name.
pub fn expand_files(base_dir: &Path, patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for pattern in patterns {
        let full = base_dir.join(pattern);
        let name = full.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if !name.contains('*') {
            out.push(full);
            continue;
        }
        let dir = full.parent().unwrap_or(base_dir).to_path_buf();
        let mut matched: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_str().is_some_and(|n| wildcard_match(&name, n)))
            .map(|e| e.path())
            .collect();
        if matched.is_empty() {
            return Err(Error::io(&full, std::io::Error::new(std::io::ErrorKind::NotFound, "pattern matched no files")));
        }
        matched.sort();
        out.extend(matched);
    }
    Ok(out)
}

fn wildcard_match(pattern: &str, text: &str) -> bool {
    match pattern.split_once('*') {
        None => pattern == text,
        Some((head, rest)) => {
            let Some(tail) = text.strip_prefix(head) else {
                return false;
            };
            (0..=tail.len()).any(|i| tail.is_char_boundary(i) && wildcard_match(rest, &tail[i..]))
        }
    }
}

/// Reads `files` in order, keeping only `wanted` columns, and concatenates them.
pub fn ingest_table(files: &[PathBuf], format: FileFormat, wanted: &[&str]) -> Result<RawTable> {
    let parts = files
        .par_iter()
        .map(|f| match format {
            FileFormat::Csv => read_csv(f, wanted),
            FileFormat::JsonLines => read_jsonl(f, wanted),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = RawTable::default();
    for (file, part) in files.iter().zip(parts) {
        table.origin.files.push((file.display().to_string(), table.row_count));
        table.row_count += part.row_count;
        for (name, col) in part.columns {
            match table.columns.get_mut(&name) {
                None => {
                    table.columns.insert(name, col);
                }
                Some(existing) => merge_column(existing, col, &name, file)?,
            }
        }
    }
    Ok(table)
}

fn merge_column(existing: &mut Column, col: Column, name: &str, file: &Path) -> Result<()> {
    match (existing, col) {
        (Column::Str(a), Column::Str(b)) => a.append(b),
        (Column::Float(a), Column::Float(b)) => a.extend(b),
        (Column::FloatVec { width: wa, data: a }, Column::FloatVec { width: wb, data: b }) if *wa == wb => a.extend(b),
        (Column::Str(a), Column::Float(b)) => b.iter().for_each(|x| a.push(&fmt_number(*x))),
        (existing @ Column::Float(_), Column::Str(b)) => {
            let Column::Float(a) = std::mem::replace(existing, Column::Str(StrColumn::new())) else {
                unreachable!()
            };
            let mut s: StrColumn = a.iter().map(|x| fmt_number(*x)).collect();
            s.append(b);
            *existing = Column::Str(s);
        }
        _ => {
            return Err(Error::Parse {
                path: file.display().to_string(),
                message: format!("column `{name}` changes type between files"),
            })
        }
    }
    Ok(())
}

fn read_csv(path: &Path, wanted: &[&str]) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut indices = Vec::with_capacity(wanted.len());
    for w in wanted {
        let idx = header.iter().position(|h| h == *w).ok_or_else(|| Error::MissingColumn {
            column: w.to_string(),
            file: path.display().to_string(),
        })?;
        indices.push(idx);
    }
    let mut cols: Vec<StrColumn> = vec![StrColumn::new(); wanted.len()];
    let mut record = csv::StringRecord::new();
    let mut rows = 0usize;
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                return Err(match e.kind() {
                    csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Data {
                        file: path.display().to_string(),
                        row: rows + 1,
                        message: format!("ragged row: {len} fields, header has {expected_len}"),
                    },
                    _ => csv_error(path, e),
                })
            }
        }
        for (col, &idx) in cols.iter_mut().zip(&indices) {
            col.push(&record[idx]);
        }
        rows += 1;
    }
    let mut table = RawTable::default();
    table.row_count = rows;
    table.origin.files.push((path.display().to_string(), 0));
    for (name, col) in wanted.iter().zip(cols) {
        table.columns.insert(name.to_string(), Column::Str(col));
    }
    Ok(table)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

enum Cells {
    Num(Vec<f64>),
    Vecs(usize, Vec<f64>),
    Text(StrColumn),
}

fn read_jsonl(path: &Path, wanted: &[&str]) -> Result<RawTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut raw: Vec<Vec<serde_json::Value>> = vec![Vec::new(); wanted.len()];
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(line).map_err(|e| Error::Data {
                file: path.display().to_string(),
                row: lineno + 1,
                message: format!("invalid JSON object: {e}"),
            })?;
        for (slot, w) in raw.iter_mut().zip(wanted) {
            let v = obj.remove(*w).ok_or_else(|| {
                if rows == 0 {
                    Error::MissingColumn {
                        column: w.to_string(),
                        file: path.display().to_string(),
                    }
                } else {
                    Error::Data {
                        file: path.display().to_string(),
                        row: lineno + 1,
                        message: format!("missing field `{w}`"),
                    }
                }
            })?;
            slot.push(v);
        }
        rows += 1;
    }
    let mut table = RawTable::default();
    table.row_count = rows;
    table.origin.files.push((path.display().to_string(), 0));
    for (name, values) in wanted.iter().zip(raw) {
        let col = match classify(&values) {
            Cells::Num(v) => Column::Float(v),
            Cells::Vecs(width, data) => Column::FloatVec { width, data },
            Cells::Text(s) => Column::Str(s),
        };
        table.columns.insert(name.to_string(), col);
    }
    Ok(table)
}

fn classify(values: &[serde_json::Value]) -> Cells {
    use serde_json::Value;
    if !values.is_empty() && values.iter().all(Value::is_number) {
        return Cells::Num(values.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect());
    }
    let as_vec = |v: &Value| -> Option<Vec<f64>> { v.as_array()?.iter().map(Value::as_f64).collect() };
    if let Some(first) = values.first().and_then(as_vec) {
        let width = first.len();
        let mut data = Vec::with_capacity(width * values.len());
        let all = values.iter().all(|v| match as_vec(v) {
            Some(row) if row.len() == width => {
                data.extend(row);
                true
            }
            _ => false,
        });
        if all {
            return Cells::Vecs(width, data);
        }
    }
    Cells::Text(
        values
            .iter()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                Value::Null => String::new(),
                Value::Number(n) => n.as_f64().map(fmt_number).unwrap_or_else(|| n.to_string()),
                other => other.to_string(),
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn csv_files_concatenate_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "id,x\np1,1\np2,2\np3,3\n");
        let b = write(dir.path(), "b.csv", "x,id\n4,p4\n5,p5\n");
        let t = ingest_table(&[a, b], FileFormat::Csv, &["id", "x"]).unwrap();
        assert_eq!(t.row_count, 5);
        assert_eq!(t.strings("id").unwrap().iter().collect::<Vec<_>>(), ["p1", "p2", "p3", "p4", "p5"]);
        assert_eq!(t.floats("x").unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn missing_column_named() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "nid,x\np1,1\n");
        let err = ingest_table(&[a], FileFormat::Csv, &["node_id"]).unwrap_err();
        assert!(matches!(&err, Error::MissingColumn { column, .. } if column == "node_id"), "{err}");
    }

    #[test]
    fn ragged_row_reported() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "id,x\np1,1\np2\n");
        let err = ingest_table(&[a], FileFormat::Csv, &["id"]).unwrap_err();
        assert!(matches!(err, Error::Data { row: 2, .. }), "{err}");
    }

    #[test]
    fn numeric_parse_failure_has_file_and_row() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "id,x\np1,1\n");
        let b = write(dir.path(), "b.csv", "id,x\np2,2\np3,oops\n");
        let t = ingest_table(&[a, b], FileFormat::Csv, &["id", "x"]).unwrap();
        match t.floats("x").unwrap_err() {
            Error::Data { file, row, .. } => {
                assert!(file.ends_with("b.csv"));
                assert_eq!(row, 2);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn jsonl_vector_column() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.jsonl", "{\"id\": \"a\", \"v\": [0.1,0.2]}\n{\"id\": 7, \"v\": [0.3,0.4]}\n");
        let t = ingest_table(&[a], FileFormat::JsonLines, &["id", "v"]).unwrap();
        let (w, data) = t.float_vectors("v").unwrap();
        assert_eq!(w, 2);
        assert_eq!(data, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(t.strings("id").unwrap().get(1), "7");
    }

    #[test]
    fn csv_vector_cells() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.csv", "id,v\na,\"[1,2]\"\nb,3;4\n");
        let t = ingest_table(&[a], FileFormat::Csv, &["id", "v"]).unwrap();
        assert_eq!(t.float_vectors("v").unwrap(), (2, vec![1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn wildcard_expansion() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "part-1.csv", "");
        write(dir.path(), "part-0.csv", "");
        write(dir.path(), "other.txt", "");
        let files = expand_files(dir.path(), &["part-*.csv".to_string()]).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["part-0.csv", "part-1.csv"]);
    }
}
