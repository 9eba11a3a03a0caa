//! Reader and writer for the TU graph-collection text format.
//!
//! A dataset `NAME` is a directory holding
//!
//! * `NAME_A.txt`: one `row, col` pair of 1-based global node ids per line,
//! * `NAME_graph_indicator.txt`: the 1-based graph id of each node, in node order,
//! * `NAME_graph_labels.txt`: one integer class label per graph.
//!
//! Other files (node labels, edge labels, attributes) are ignored. Class labels
//! are renumbered densely in ascending order, so `{-1, 1}` becomes `{0, 1}`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dsgc_core::graph::{Dataset, Graph};

use crate::{Error, Result};

fn file(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn parse_int<T: std::str::FromStr>(path: &Path, line: usize, field: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        file: path.to_owned(),
        line,
        message: format!("expected an integer, found '{}'", field.trim()),
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { file: path.to_owned(), line, message: message.into() }
}

/// Name of a dataset directory: its final path component.
pub fn dataset_name(dir: &Path) -> Result<String> {
    dir.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Usage(format!("cannot infer a dataset name from {}", dir.display())))
}

/// Loads the dataset stored in `dir`, named after the directory.
///
/// Graphs come back featureless (`n x 0`); see
/// [`dsgc_core::experiment::prepare_dataset`].
pub fn load(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::Io {
            path: dir.to_owned(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        });
    }
    let name = dataset_name(dir)?;

    let indicator_path = file(dir, &name, "graph_indicator");
    let indicator_text = read(&indicator_path)?;
    let mut node_graph = Vec::new();
    for (line, text) in lines(&indicator_text) {
        let g: usize = parse_int(&indicator_path, line, text)?;
        if g == 0 {
            return Err(parse_error(&indicator_path, line, "graph ids start at 1"));
        }
        if let Some(&prev) = node_graph.last() {
            if g < prev {
                return Err(parse_error(&indicator_path, line, "nodes must be grouped by ascending graph id"));
            }
        }
        node_graph.push(g);
    }

    let labels_path = file(dir, &name, "graph_labels");
    let labels_text = read(&labels_path)?;
    let raw_labels = lines(&labels_text).map(|(line, text)| parse_int::<i64>(&labels_path, line, text)).collect::<Result<Vec<_>>>()?;
    let graph_count = raw_labels.len();
    if node_graph.last().is_some_and(|&g| g > graph_count) {
        return Err(parse_error(&indicator_path, node_graph.len(), format!("graph id exceeds the {graph_count} labels")));
    }
    let classes: Vec<i64> = raw_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();

    // first global node of each graph and node counts
    let mut first = vec![usize::MAX; graph_count];
    let mut count = vec![0usize; graph_count];
    for (v, &g) in node_graph.iter().enumerate() {
        first[g - 1] = first[g - 1].min(v);
        count[g - 1] += 1;
    }

    let edges_path = file(dir, &name, "A");
    let edges_text = read(&edges_path)?;
    let mut edges = vec![Vec::new(); graph_count];
    for (line, text) in lines(&edges_text) {
        let (a, b) = text.split_once(',').ok_or_else(|| parse_error(&edges_path, line, "expected 'row, col'"))?;
        let a: usize = parse_int(&edges_path, line, a)?;
        let b: usize = parse_int(&edges_path, line, b)?;
        if a == 0 || b == 0 || a > node_graph.len() || b > node_graph.len() {
            return Err(parse_error(&edges_path, line, format!("node id outside 1..={}", node_graph.len())));
        }
        let (ga, gb) = (node_graph[a - 1], node_graph[b - 1]);
        if ga != gb {
            return Err(parse_error(&edges_path, line, format!("edge joins graphs {ga} and {gb}")));
        }
        edges[ga - 1].push((a - 1 - first[ga - 1], b - 1 - first[ga - 1]));
    }

    let graphs = raw_labels
        .iter()
        .enumerate()
        .map(|(k, raw)| {
            let label = classes.binary_search(raw).expect("label collected above");
            Ok(Graph::structure(count[k], std::mem::take(&mut edges[k]), Some(label))?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(name, graphs, classes.len())?)
}

/// Writes `ds` into `dir` (created if needed) as `<ds.name>_*.txt`.
/// Labels are written as their dense class indices.
pub fn write(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_owned(), source })?;
    let (mut a, mut indicator, mut labels) = (String::new(), String::new(), String::new());
    let mut offset = 0;
    for (k, g) in ds.graphs.iter().enumerate() {
        for _ in 0..g.node_count() {
            writeln!(indicator, "{}", k + 1).unwrap();
        }
        for &(u, v) in g.edges() {
            writeln!(a, "{}, {}", u + offset + 1, v + offset + 1).unwrap();
            writeln!(a, "{}, {}", v + offset + 1, u + offset + 1).unwrap();
        }
        let label = g.label().ok_or_else(|| Error::Usage(format!("graph {k} has no label")))?;
        writeln!(labels, "{label}").unwrap();
        offset += g.node_count();
    }
    for (suffix, text) in [("A", a), ("graph_indicator", indicator), ("graph_labels", labels)] {
        crate::output::write_atomic(&file(dir, &ds.name, suffix), text.as_bytes())?;
    }
    Ok(())
}
