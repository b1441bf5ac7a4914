//! Labeled attributed graphs and their on-disk directory format.
//!
//! A dataset directory holds:
//!
//! - `meta.json`: `{"num_nodes", "num_relations", "feature_dim", "directed", "name"}`
//!   plus an optional `provenance` string map
//! - `edges.tsv`: `src<TAB>dst[<TAB>rel]`, 0-based; a missing relation means 0
//! - `features.tsv`: one line per node in id order, `feature_dim` tab-separated decimals
//! - `labels.tsv`: `node<TAB>label` with label 0 or 1; unlabeled nodes are omitted
//! - `splits.json` (optional): `{"<name>": {"train": [..], "val": [..], "test": [..]}}`

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::graph::Graph;
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Anomalous,
    Unknown,
}

impl Label {
    pub fn is_known(self) -> bool {
        self != Label::Unknown
    }
}

/// Per-node labels with at least one known positive and one known negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    labels: Vec<Label>,
    num_pos: usize,
    num_neg: usize,
}

impl LabelTable {
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        let num_pos = labels.iter().filter(|&&l| l == Label::Anomalous).count();
        let num_neg = labels.iter().filter(|&&l| l == Label::Normal).count();
        if num_pos == 0 || num_neg == 0 {
            return Err(GadError::DegenerateLabels(format!(
                "need at least one known positive and one known negative, got {num_pos} and {num_neg}"
            )));
        }
        Ok(Self {
            labels,
            num_pos,
            num_neg,
        })
    }

    /// Builds a fully labeled table from booleans (`true` = anomalous).
    pub fn from_bools(flags: &[bool]) -> Result<Self> {
        Self::new(
            flags
                .iter()
                .map(|&a| if a { Label::Anomalous } else { Label::Normal })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, node: usize) -> Label {
        self.labels[node]
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.labels
    }

    pub fn num_pos(&self) -> usize {
        self.num_pos
    }

    pub fn num_neg(&self) -> usize {
        self.num_neg
    }

    /// Known-label node ids, ascending.
    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i].is_known())
            .collect()
    }

    pub fn positives(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == Label::Anomalous)
            .collect()
    }

    pub fn negatives(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == Label::Normal)
            .collect()
    }

    /// `true` for anomalous nodes. Fails if any requested node is unlabeled.
    pub fn targets(&self, nodes: &[usize]) -> Result<Vec<bool>> {
        nodes
            .iter()
            .map(|&i| match self.labels[i] {
                Label::Anomalous => Ok(true),
                Label::Normal => Ok(false),
                Label::Unknown => Err(GadError::InvalidValue(format!("node {i} has no label"))),
            })
            .collect()
    }
}

/// A user-provided train/val/test assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelTable,
    pub meta: BTreeMap<String, String>,
    pub splits: BTreeMap<String, NamedSplit>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: FeatureMatrix,
        labels: LabelTable,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.num_rows() != n || labels.len() != n {
            return Err(GadError::Dimension(format!(
                "graph has {n} nodes, features {} rows, labels {} entries",
                features.num_rows(),
                labels.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            meta: BTreeMap::new(),
            splits: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn with_split(mut self, name: impl Into<String>, split: NamedSplit) -> Result<Self> {
        let name = name.into();
        validate_split(&name, &split, &self.labels)?;
        self.splits.insert(name, split);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// One-line summary: nodes, edges, feature dim, anomalies.
    pub fn summary(&self) -> String {
        format!(
            "{}: nodes={} edges={} relations={} dim={} anomalies={} normals={}",
            self.name,
            self.num_nodes(),
            self.graph.num_edges(),
            self.graph.num_relations(),
            self.features.dim(),
            self.labels.num_pos(),
            self.labels.num_neg()
        )
    }
}

fn validate_split(name: &str, split: &NamedSplit, labels: &LabelTable) -> Result<()> {
    let mut seen = vec![false; labels.len()];
    for ids in [&split.train, &split.val, &split.test] {
        for &i in ids {
            if i >= labels.len() {
                return Err(GadError::InvalidValue(format!(
                    "split `{name}`: node id out of range: {i}"
                )));
            }
            if !labels.get(i).is_known() {
                return Err(GadError::InvalidValue(format!(
                    "split `{name}`: node {i} is unlabeled"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(GadError::InvalidValue(format!(
                    "split `{name}`: node {i} appears more than once"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaFile {
    num_nodes: usize,
    num_relations: usize,
    feature_dim: usize,
    directed: bool,
    name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    provenance: BTreeMap<String, String>,
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)> + '_> {
    let file = fs::File::open(path).map_err(|e| GadError::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, l)| (i + 1, l.map_err(|e| GadError::io(path, e)))))
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    field: &str,
    what: &str,
) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| GadError::parse(path, line, format!("malformed {what} `{field}`")))
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| GadError::io(&meta_path, e))?;
    let meta: MetaFile = serde_json::from_str(&meta_text)
        .map_err(|e| GadError::parse(&meta_path, e.line(), e.to_string()))?;
    if meta.feature_dim == 0 {
        return Err(GadError::parse(
            &meta_path,
            1,
            "feature_dim must be positive",
        ));
    }
    if meta.num_relations == 0 {
        return Err(GadError::parse(
            &meta_path,
            1,
            "num_relations must be positive",
        ));
    }
    let n = meta.num_nodes;

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (line_no, line) in open_lines(&edges_path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(GadError::parse(
                &edges_path,
                line_no,
                format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let src: usize = parse_field(&edges_path, line_no, fields[0], "node id")?;
        let dst: usize = parse_field(&edges_path, line_no, fields[1], "node id")?;
        let rel: usize = match fields.get(2) {
            Some(f) => parse_field(&edges_path, line_no, f, "relation id")?,
            None => 0,
        };
        if src >= n || dst >= n {
            return Err(GadError::parse(
                &edges_path,
                line_no,
                "node id out of range",
            ));
        }
        if rel >= meta.num_relations {
            return Err(GadError::parse(
                &edges_path,
                line_no,
                "relation id out of range",
            ));
        }
        edges.push((src, dst, rel));
    }
    let graph = Graph::build_csr(&edges, n, meta.num_relations, meta.directed)?;
    drop(edges);

    let features_path = dir.join("features.tsv");
    let mut values = Vec::with_capacity(n * meta.feature_dim);
    let mut rows = 0usize;
    for (line_no, line) in open_lines(&features_path)? {
        let line = line?;
        if rows == n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(GadError::parse(
                &features_path,
                line_no,
                format!("more feature rows than num_nodes = {n}"),
            ));
        }
        let before = values.len();
        for field in line.split('\t') {
            let v: f64 = parse_field(&features_path, line_no, field, "feature value")?;
            if !v.is_finite() {
                return Err(GadError::parse(
                    &features_path,
                    line_no,
                    format!("non-finite feature `{field}`"),
                ));
            }
            values.push(v);
        }
        if values.len() - before != meta.feature_dim {
            return Err(GadError::parse(
                &features_path,
                line_no,
                format!(
                    "expected {} features, got {}",
                    meta.feature_dim,
                    values.len() - before
                ),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(GadError::Dimension(format!(
            "{}: {rows} feature rows but num_nodes = {n}",
            features_path.display()
        )));
    }
    let features = FeatureMatrix::new(n, meta.feature_dim, values)?;

    let labels_path = dir.join("labels.tsv");
    let mut labels = vec![Label::Unknown; n];
    for (line_no, line) in open_lines(&labels_path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(GadError::parse(
                &labels_path,
                line_no,
                "expected node<TAB>label",
            ));
        }
        let node: usize = parse_field(&labels_path, line_no, fields[0], "node id")?;
        if node >= n {
            return Err(GadError::parse(
                &labels_path,
                line_no,
                format!("node id out of range: {node}"),
            ));
        }
        let label = match fields[1].trim() {
            "0" => Label::Normal,
            "1" => Label::Anomalous,
            other => {
                return Err(GadError::parse(
                    &labels_path,
                    line_no,
                    format!("label must be 0 or 1, got `{other}`"),
                ))
            }
        };
        if labels[node].is_known() {
            return Err(GadError::parse(
                &labels_path,
                line_no,
                format!("duplicate label for node {node}"),
            ));
        }
        labels[node] = label;
    }
    let labels = LabelTable::new(labels)?;

    let mut dataset = Dataset::new(meta.name, graph, features, labels)?;
    dataset.meta = meta.provenance;

    let splits_path = dir.join("splits.json");
    if splits_path.exists() {
        let text = fs::read_to_string(&splits_path).map_err(|e| GadError::io(&splits_path, e))?;
        let splits: BTreeMap<String, NamedSplit> = serde_json::from_str(&text)
            .map_err(|e| GadError::parse(&splits_path, e.line(), e.to_string()))?;
        for (name, split) in splits {
            dataset = dataset.with_split(name, split)?;
        }
    }
    Ok(dataset)
}

/// Writes `dataset` in the directory format, creating `dir` if needed.
/// Decimals are written in shortest round-trip form, so loading the result
/// reproduces every value bit for bit.
pub fn save_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| GadError::io(dir, e))?;

    let meta = MetaFile {
        num_nodes: dataset.num_nodes(),
        num_relations: dataset.graph.num_relations(),
        feature_dim: dataset.features.dim(),
        directed: dataset.graph.is_directed(),
        name: dataset.name.clone(),
        provenance: dataset.meta.clone(),
    };
    let mut meta_text = serde_json::to_string_pretty(&meta)?;
    meta_text.push('\n');
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, meta_text).map_err(|e| GadError::io(&meta_path, e))?;

    write_lines(&dir.join("edges.tsv"), |w| {
        for (s, d, r) in dataset.graph.edges() {
            writeln!(w, "{s}\t{d}\t{r}")?;
        }
        Ok(())
    })?;

    write_lines(&dir.join("features.tsv"), |w| {
        for i in 0..dataset.num_nodes() {
            let row = dataset.features.row(i);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    w.write_all(b"\t")?;
                }
                write!(w, "{v:?}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;

    write_lines(&dir.join("labels.tsv"), |w| {
        for (i, l) in dataset.labels.as_slice().iter().enumerate() {
            match l {
                Label::Normal => writeln!(w, "{i}\t0")?,
                Label::Anomalous => writeln!(w, "{i}\t1")?,
                Label::Unknown => {}
            }
        }
        Ok(())
    })?;

    let splits_path = dir.join("splits.json");
    if dataset.splits.is_empty() {
        if splits_path.exists() {
            fs::remove_file(&splits_path).map_err(|e| GadError::io(&splits_path, e))?;
        }
    } else {
        let mut text = serde_json::to_string(&dataset.splits)?;
        text.push('\n');
        fs::write(&splits_path, text).map_err(|e| GadError::io(&splits_path, e))?;
    }
    Ok(())
}

fn write_lines(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| GadError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| GadError::io(path, e))
}

/// Loose text inputs for [`import_text`]: fields split on tabs, commas or
/// spaces; blank lines and lines starting with `#` are skipped.
#[derive(Debug, Clone)]
pub struct TextSources<'a> {
    /// `src dst [rel]` per line.
    pub edges: &'a Path,
    /// One row of decimals per node, in node-id order.
    pub features: &'a Path,
    /// `node label` per line, label 0 or 1.
    pub labels: &'a Path,
}

fn loose_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields = t
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(str::to_string)
            .collect();
        out.push((line_no, fields));
    }
    Ok(out)
}

/// Builds a dataset from loose text files. The node count is the number of
/// feature rows and the relation count is one past the largest relation id.
pub fn import_text(sources: &TextSources<'_>, name: &str, directed: bool) -> Result<Dataset> {
    let feature_rows = loose_records(sources.features)?;
    let n = feature_rows.len();
    let dim = feature_rows.first().map_or(0, |(_, f)| f.len());
    if n == 0 || dim == 0 {
        return Err(GadError::parse(sources.features, 1, "no feature rows"));
    }
    let mut values = Vec::with_capacity(n * dim);
    for (line_no, fields) in &feature_rows {
        if fields.len() != dim {
            return Err(GadError::parse(
                sources.features,
                *line_no,
                format!("expected {dim} features, got {}", fields.len()),
            ));
        }
        for f in fields {
            let v: f64 = parse_field(sources.features, *line_no, f, "feature value")?;
            if !v.is_finite() {
                return Err(GadError::parse(
                    sources.features,
                    *line_no,
                    format!("non-finite feature `{f}`"),
                ));
            }
            values.push(v);
        }
    }
    let features = FeatureMatrix::new(n, dim, values)?;

    let mut edges = Vec::new();
    for (line_no, fields) in loose_records(sources.edges)? {
        if !(2..=3).contains(&fields.len()) {
            return Err(GadError::parse(
                sources.edges,
                line_no,
                "expected src dst [rel]",
            ));
        }
        let src: usize = parse_field(sources.edges, line_no, &fields[0], "node id")?;
        let dst: usize = parse_field(sources.edges, line_no, &fields[1], "node id")?;
        let rel: usize = match fields.get(2) {
            Some(f) => parse_field(sources.edges, line_no, f, "relation id")?,
            None => 0,
        };
        if src >= n || dst >= n {
            return Err(GadError::parse(
                sources.edges,
                line_no,
                "node id out of range",
            ));
        }
        edges.push((src, dst, rel));
    }
    let num_relations = edges.iter().map(|e| e.2 + 1).max().unwrap_or(1);
    let graph = Graph::build_csr(&edges, n, num_relations, directed)?;

    let mut labels = vec![Label::Unknown; n];
    for (line_no, fields) in loose_records(sources.labels)? {
        if fields.len() != 2 {
            return Err(GadError::parse(
                sources.labels,
                line_no,
                "expected node label",
            ));
        }
        let node: usize = parse_field(sources.labels, line_no, &fields[0], "node id")?;
        if node >= n {
            return Err(GadError::parse(
                sources.labels,
                line_no,
                format!("node id out of range: {node}"),
            ));
        }
        labels[node] = match fields[1].as_str() {
            "0" => Label::Normal,
            "1" => Label::Anomalous,
            other => {
                return Err(GadError::parse(
                    sources.labels,
                    line_no,
                    format!("label must be 0 or 1, got `{other}`"),
                ))
            }
        };
    }
    Dataset::new(name, graph, features, LabelTable::new(labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_table_requires_both_classes() {
        assert!(LabelTable::new(vec![Label::Normal, Label::Unknown]).is_err());
        assert!(LabelTable::new(vec![Label::Anomalous, Label::Unknown]).is_err());
        let t = LabelTable::new(vec![Label::Normal, Label::Unknown, Label::Anomalous]).unwrap();
        assert_eq!((t.num_pos(), t.num_neg()), (1, 1));
        assert_eq!(t.labeled_nodes(), vec![0, 2]);
        assert!(t.targets(&[1]).is_err());
        assert_eq!(t.targets(&[2, 0]).unwrap(), vec![true, false]);
    }

    #[test]
    fn dataset_checks_sizes() {
        let g = Graph::build_csr(&[], 2, 1, false).unwrap();
        let x = FeatureMatrix::zeros(3, 1);
        let y = LabelTable::from_bools(&[true, false]).unwrap();
        assert!(matches!(
            Dataset::new("x", g, x, y),
            Err(GadError::Dimension(_))
        ));
    }

    #[test]
    fn split_validation() {
        let g = Graph::build_csr(&[], 3, 1, false).unwrap();
        let x = FeatureMatrix::zeros(3, 1);
        let y = LabelTable::new(vec![Label::Normal, Label::Anomalous, Label::Unknown]).unwrap();
        let d = Dataset::new("x", g, x, y).unwrap();
        let overlap = NamedSplit {
            train: vec![0],
            val: vec![0],
            test: vec![1],
        };
        assert!(d.clone().with_split("a", overlap).is_err());
        let unlabeled = NamedSplit {
            train: vec![0],
            val: vec![],
            test: vec![2],
        };
        assert!(d.clone().with_split("a", unlabeled).is_err());
        let ok = NamedSplit {
            train: vec![0, 1],
            val: vec![],
            test: vec![],
        };
        assert!(d.with_split("a", ok).is_ok());
    }
}
