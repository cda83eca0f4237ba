use std::collections::HashMap;
use std::path::Path;

use super::{Masks, NodeDataset};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numkernel::Mat;

/// Parsed `.content` file.
#[derive(Clone, Debug, PartialEq)]
pub struct ContentTable {
    pub ids: Vec<String>,
    pub features: Mat,
    pub labels: Vec<usize>,
    /// Label strings in first-appearance order; `labels` index into this.
    pub class_names: Vec<String>,
}

impl ContentTable {
    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(k, id)| (id.as_str(), k))
            .collect()
    }
}

/// What the loader dropped while reading the citation file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub ids: Vec<String>,
    pub class_names: Vec<String>,
    /// `.cites` lines naming an id absent from `.content`.
    pub skipped_unknown: usize,
    /// `.cites` lines citing the paper itself.
    pub skipped_self: usize,
}

/// Parses `id<TAB>f_1 … f_d<TAB>label` lines.
pub fn parse_content(text: &str) -> Result<ContentTable> {
    let mut ids = Vec::new();
    let mut seen = HashMap::new();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut width: Option<usize> = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: ln + 1,
                msg: format!("expected id, features and label, got {} fields", fields.len()),
            });
        }
        let d = fields.len() - 2;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(Error::Format(format!(
                    "line {}: {d} features, earlier lines have {w}",
                    ln + 1
                )))
            }
            _ => {}
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "empty node id".into(),
            });
        }
        if seen.insert(id.to_string(), ids.len()).is_some() {
            return Err(Error::Parse {
                line: ln + 1,
                msg: format!("duplicate node id {id:?}"),
            });
        }
        ids.push(id.to_string());
        for f in &fields[1..=d] {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line: ln + 1,
                msg: format!("bad feature value {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("non-finite feature value {f:?}"),
                });
            }
            data.push(v);
        }
        let label = fields[d + 1].trim();
        let next = class_names.len();
        let idx = *class_index.entry(label.to_string()).or_insert(next);
        if idx == next {
            class_names.push(label.to_string());
        }
        labels.push(idx);
    }
    let n = ids.len();
    if n == 0 {
        return Err(Error::Format("content file has no nodes".into()));
    }
    Ok(ContentTable {
        features: Mat::from_vec(n, width.unwrap_or(0), data)?,
        ids,
        labels,
        class_names,
    })
}

/// Parses `cited<TAB>citing` lines into undirected index pairs. Lines naming
/// unknown ids and self-citations are skipped and counted.
pub fn parse_cites(
    text: &str,
    index: &HashMap<&str, usize>,
) -> Result<(Vec<(usize, usize)>, usize, usize)> {
    let mut edges = Vec::new();
    let (mut unknown, mut selfs) = (0, 0);
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "expected two tab-separated ids".into(),
            });
        }
        match (index.get(fields[0]), index.get(fields[1])) {
            (Some(&a), Some(&b)) if a == b => selfs += 1,
            (Some(&a), Some(&b)) => edges.push((a, b)),
            _ => unknown += 1,
        }
    }
    Ok((edges, unknown, selfs))
}

pub fn load_planetoid(content_path: &Path, cites_path: &Path) -> Result<(NodeDataset, LoadReport)> {
    let content = std::fs::read_to_string(content_path)?;
    let cites = std::fs::read_to_string(cites_path)?;
    build(&content, &cites)
}

/// Loads `<dir>/<name>.content` and `<dir>/<name>.cites`.
pub fn load_planetoid_dir(dir: &Path, name: &str) -> Result<(NodeDataset, LoadReport)> {
    load_planetoid(
        &dir.join(format!("{name}.content")),
        &dir.join(format!("{name}.cites")),
    )
}

fn build(content: &str, cites: &str) -> Result<(NodeDataset, LoadReport)> {
    let table = parse_content(content)?;
    let (edges, unknown, selfs) = parse_cites(cites, &table.index())?;
    if unknown > 0 {
        log::warn!("skipped {unknown} citation lines naming unknown ids");
    }
    if selfs > 0 {
        log::warn!("skipped {selfs} self-citations");
    }
    let n = table.ids.len();
    let graph = Graph::new(n, edges)?;
    let ds = NodeDataset::new(
        graph,
        table.features,
        table.labels,
        table.class_names.len(),
        Masks::empty(n),
    )?;
    Ok((
        ds,
        LoadReport {
            ids: table.ids,
            class_names: table.class_names,
            skipped_unknown: unknown,
            skipped_self: selfs,
        },
    ))
}
