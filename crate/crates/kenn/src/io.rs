//! Text file formats.
//!
//! * Schema: `unary: A, B` and `binary: R` lines.
//! * Clauses: one `weight:literal,literal,...` per line, `#` comments.
//! * Multi-label CSV: header `f1,...,fF,|,A,B,...`; every row repeats the
//!   `|` cell. Label cells are 0 or 1.
//! * Node CSV: header `id,f1,...,fF,label`; `label` names a unary predicate.
//! * Edge CSV: header `src,dst[,R,...]`; `src`, `dst` are node ids and each
//!   further column holds the truth value in [0, 1] of one binary predicate.
//!   Binary predicates without a column are known to hold on every listed
//!   edge.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use kenn_core::fuzzy::{logit, sigmoid};
use kenn_core::logic::{Knowledge, PredicateSchema};
use kenn_core::relational::{BinaryTable, KNOWN_TRUE_PREACTIVATION};
use kenn_core::Matrix;

use crate::error::{CliError, Result};

/// Column separating features from labels in multi-label files.
pub const SEPARATOR: &str = "|";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_schema(path: &Path) -> Result<PredicateSchema> {
    PredicateSchema::parse(&read_text(path)?).map_err(|e| CliError::in_file(path, e))
}

pub fn read_knowledge(path: &Path, schema: PredicateSchema) -> Result<Knowledge> {
    Knowledge::parse(&read_text(path)?, schema).map_err(|e| CliError::in_file(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn headers(path: &Path, rdr: &mut csv::Reader<fs::File>) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(str::to_string)
        .collect())
}

fn number(path: &Path, line: usize, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| {
        CliError::Data(format!(
            "{}: line {line}: `{cell}` in column `{column}` is not a number",
            path.display()
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Data(format!(
            "{}: line {line}: non-finite value in column `{column}`",
            path.display()
        )));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiLabelData {
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub x: Matrix,
    pub y: Matrix,
}

impl MultiLabelData {
    /// Labels reordered to `names`, which must be the same set.
    pub fn labels_in_order(&self, names: &[String]) -> Result<Matrix> {
        let mut cols = Vec::with_capacity(names.len());
        for n in names {
            let c = self
                .label_names
                .iter()
                .position(|l| l == n)
                .ok_or_else(|| {
                    CliError::Data(format!("label column `{n}` missing from the data"))
                })?;
            cols.push(c);
        }
        if names.len() != self.label_names.len() {
            return Err(CliError::Data(format!(
                "data has {} label columns, the schema {} unary predicates",
                self.label_names.len(),
                names.len()
            )));
        }
        Ok(self.y.select_cols(&cols))
    }
}

/// Reads a multi-label CSV. Without a `|` column and with
/// `labels_only`, every column is a label.
pub fn read_multilabel(path: &Path, labels_only: bool) -> Result<MultiLabelData> {
    let mut rdr = reader(path)?;
    let head = headers(path, &mut rdr)?;
    let sep = match head.iter().position(|h| h == SEPARATOR) {
        Some(i) => Some(i),
        None if labels_only => None,
        None => {
            return Err(CliError::Data(format!(
                "{}: header has no `{SEPARATOR}` column between features and labels",
                path.display()
            )))
        }
    };
    let (feature_names, label_names) = match sep {
        Some(i) => (head[..i].to_vec(), head[i + 1..].to_vec()),
        None => (Vec::new(), head.clone()),
    };
    if label_names.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no label columns",
            path.display()
        )));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        for (c, cell) in rec.iter().enumerate() {
            match sep {
                Some(s) if c == s => {
                    if !(cell.is_empty() || cell == SEPARATOR) {
                        return Err(CliError::Data(format!(
                            "{}: line {line}: separator cell holds `{cell}`",
                            path.display()
                        )));
                    }
                }
                Some(s) if c < s => x.push(number(path, line, &head[c], cell)?),
                _ => {
                    let v = number(path, line, &head[c], cell)?;
                    if v != 0.0 && v != 1.0 {
                        return Err(CliError::Data(format!(
                            "{}: line {line}: label `{}` must be 0 or 1",
                            path.display(),
                            head[c]
                        )));
                    }
                    y.push(v);
                }
            }
        }
        rows += 1;
    }
    Ok(MultiLabelData {
        x: Matrix::from_vec(rows, feature_names.len(), x)?,
        y: Matrix::from_vec(rows, label_names.len(), y)?,
        feature_names,
        label_names,
    })
}

pub fn write_multilabel(path: &Path, data: &MultiLabelData) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut head: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    head.push(SEPARATOR);
    head.extend(data.label_names.iter().map(String::as_str));
    w.write_record(&head).map_err(|e| CliError::io(path, e))?;
    for r in 0..data.x.rows().max(data.y.rows()) {
        let mut rec: Vec<String> = data.x.row(r).iter().map(|v| v.to_string()).collect();
        rec.push(SEPARATOR.to_string());
        rec.extend(data.y.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeData {
    pub ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub features: Matrix,
    pub labels: Vec<String>,
}

impl NodeData {
    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Class of each node as a position in `classes`.
    pub fn class_indices(&self, classes: &[String]) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .zip(&self.ids)
            .map(|(l, id)| {
                classes.iter().position(|c| c == l).ok_or_else(|| {
                    CliError::Data(format!(
                        "node `{id}` has label `{l}`, not a unary predicate"
                    ))
                })
            })
            .collect()
    }
}

pub fn read_nodes(path: &Path) -> Result<NodeData> {
    let mut rdr = reader(path)?;
    let head = headers(path, &mut rdr)?;
    if head.len() < 2 || head[0] != "id" || head[head.len() - 1] != "label" {
        return Err(CliError::Data(format!(
            "{}: node header must be `id,<features...>,label`",
            path.display()
        )));
    }
    let feature_names = head[1..head.len() - 1].to_vec();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut features = Vec::new();
    let mut seen = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let id = rec[0].to_string();
        if seen.insert(id.clone(), line).is_some() {
            return Err(CliError::Data(format!(
                "{}: line {line}: node `{id}` listed twice",
                path.display()
            )));
        }
        for c in 1..head.len() - 1 {
            features.push(number(path, line, &head[c], &rec[c])?);
        }
        ids.push(id);
        labels.push(rec[head.len() - 1].to_string());
    }
    Ok(NodeData {
        features: Matrix::from_vec(ids.len(), feature_names.len(), features)?,
        ids,
        feature_names,
        labels,
    })
}

/// Probability floor for edge values, so that 1 maps to the known-true
/// preactivation.
pub fn edge_epsilon() -> f64 {
    sigmoid(-KNOWN_TRUE_PREACTIVATION)
}

/// Reads edges into a binary table over the nodes of `nodes`.
pub fn read_edges(path: &Path, nodes: &NodeData, schema: &PredicateSchema) -> Result<BinaryTable> {
    let mut rdr = reader(path)?;
    let head = headers(path, &mut rdr)?;
    if head.len() < 2 || head[0] != "src" || head[1] != "dst" {
        return Err(CliError::Data(format!(
            "{}: edge header must start with `src,dst`",
            path.display()
        )));
    }
    let binary = schema.binary_names();
    let mut column_of = vec![None; binary.len()];
    for (c, h) in head.iter().enumerate().skip(2) {
        let j = schema.binary_index(h).ok_or_else(|| {
            CliError::Data(format!(
                "{}: `{h}` is not a binary predicate",
                path.display()
            ))
        })?;
        if column_of[j].replace(c).is_some() {
            return Err(CliError::Data(format!(
                "{}: column `{h}` repeated",
                path.display()
            )));
        }
    }
    let index = nodes.index();
    let eps = edge_epsilon();
    let (mut sx, mut sy, mut z) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        for (slot, out) in [(0, &mut sx), (1, &mut sy)] {
            let id = &rec[slot];
            let &k = index.get(id).ok_or_else(|| {
                CliError::Data(format!(
                    "{}: line {line}: unknown node `{id}`",
                    path.display()
                ))
            })?;
            out.push(k);
        }
        for col in &column_of {
            z.push(match *col {
                Some(c) => {
                    let v = number(path, line, &head[c], &rec[c])?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(CliError::Data(format!(
                            "{}: line {line}: `{}` must be in [0, 1]",
                            path.display(),
                            head[c]
                        )));
                    }
                    logit(v.clamp(eps, 1.0 - eps))
                }
                None => KNOWN_TRUE_PREACTIVATION,
            });
        }
    }
    let n = sx.len();
    let table = BinaryTable::new(sx, sy, Matrix::from_vec(n, binary.len(), z)?)?;
    Ok(table.with_given(column_of.iter().map(Option::is_none).collect())?)
}
