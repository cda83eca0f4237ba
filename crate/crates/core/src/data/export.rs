use std::path::Path;

use super::{GraphDataset, GraphItem, Masks, NodeDataset, Split};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numkernel::Mat;

pub const EDGES_FILE: &str = "edges.txt";
pub const FEATURES_FILE: &str = "features.csv";
pub const MASKS_FILE: &str = "masks.csv";
pub const GRAPHS_FILE: &str = "graphs.csv";

/// Rows of `features.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub x: Mat,
    pub labels: Vec<usize>,
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: usize, what: &str) -> Result<T> {
    let s = rec.get(k).unwrap_or("");
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {what} {s:?}"),
    })
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn write_csv(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(&header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn features_csv(x: &Mat, labels: &[usize]) -> Result<String> {
    let mut header = vec!["node_id".to_string()];
    header.extend((1..=x.cols()).map(|j| format!("f{j}")));
    header.push("label".into());
    write_csv(
        header,
        (0..x.rows()).map(|i| {
            let mut r = vec![i.to_string()];
            r.extend(x.row(i).iter().map(|v| v.to_string()));
            r.push(labels[i].to_string());
            r
        }),
    )
}

/// Parses `node_id,f1..fd,label`. Node ids must run 0, 1, 2, … in order.
pub fn parse_features_csv(text: &str) -> Result<FeatureTable> {
    let mut rd = reader(text);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || &header[0] != "node_id" || &header[header.len() - 1] != "label" {
        return Err(Error::Format(
            "features header must be node_id,f1..fd,label".into(),
        ));
    }
    let d = header.len() - 2;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        let id: usize = field(&rec, 0, line, "node id")?;
        if id != labels.len() {
            return Err(Error::Parse {
                line,
                msg: format!("node id {id} out of sequence, expected {}", labels.len()),
            });
        }
        for k in 1..=d {
            let v: f64 = field(&rec, k, line, "feature")?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: "non-finite feature".into(),
                });
            }
            data.push(v);
        }
        labels.push(field(&rec, d + 1, line, "label")?);
    }
    Ok(FeatureTable {
        x: Mat::from_vec(labels.len(), d, data)?,
        labels,
    })
}

fn masks_csv(m: &Masks) -> Result<String> {
    let b = |v: bool| if v { "1" } else { "0" }.to_string();
    write_csv(
        ["node_id", "train", "val", "test"].map(String::from).to_vec(),
        (0..m.len()).map(|i| vec![i.to_string(), b(m.train[i]), b(m.val[i]), b(m.test[i])]),
    )
}

/// Parses `node_id,train,val,test` with 0/1 flags.
pub fn parse_masks_csv(text: &str) -> Result<Masks> {
    let mut rd = reader(text);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["node_id", "train", "val", "test"] {
        return Err(Error::Format("masks header must be node_id,train,val,test".into()));
    }
    let mut m = Masks::default();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        let id: usize = field(&rec, 0, line, "node id")?;
        if id != m.train.len() {
            return Err(Error::Parse {
                line,
                msg: format!("node id {id} out of sequence"),
            });
        }
        let flag = |k: usize| -> Result<bool> {
            match rec.get(k) {
                Some("0") => Ok(false),
                Some("1") => Ok(true),
                other => Err(Error::Parse {
                    line,
                    msg: format!("mask flag must be 0 or 1, got {other:?}"),
                }),
            }
        };
        m.train.push(flag(1)?);
        m.val.push(flag(2)?);
        m.test.push(flag(3)?);
    }
    m.validate(m.train.len())?;
    Ok(m)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn infer_classes(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |&m| m + 1)
}

/// The files of [`write_node_dataset`] as `(name, contents)` pairs.
pub fn node_dataset_files(ds: &NodeDataset) -> Result<Vec<(&'static str, String)>> {
    Ok(vec![
        (EDGES_FILE, ds.graph.to_edge_list()),
        (FEATURES_FILE, features_csv(&ds.x, &ds.labels)?),
        (MASKS_FILE, masks_csv(&ds.masks)?),
    ])
}

fn write_files(dir: &Path, files: &[(&'static str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in files {
        write_file(dir, name, text)?;
    }
    Ok(())
}

pub fn write_node_dataset(dir: &Path, ds: &NodeDataset) -> Result<()> {
    write_files(dir, &node_dataset_files(ds)?)
}

/// Reads a node dataset written by [`write_node_dataset`]. The class count
/// is one more than the largest label.
pub fn read_node_dataset(dir: &Path) -> Result<NodeDataset> {
    let mut graph = Graph::parse_edge_list(&std::fs::read_to_string(dir.join(EDGES_FILE))?)?;
    let table = parse_features_csv(&std::fs::read_to_string(dir.join(FEATURES_FILE))?)?;
    let n = table.labels.len();
    if graph.n() < n {
        graph = Graph::new(n, graph.edges().iter().copied())?;
    }
    let masks = match std::fs::read_to_string(dir.join(MASKS_FILE)) {
        Ok(text) => parse_masks_csv(&text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Masks::empty(n),
        Err(e) => return Err(e.into()),
    };
    let k = infer_classes(&table.labels);
    NodeDataset::new(graph, table.x, table.labels, k, masks)
}

/// One row of `graphs.csv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphRow {
    pub first_node: usize,
    pub num_nodes: usize,
    pub label: usize,
    pub split: Split,
}

/// Parses `graph_id,first_node,num_nodes,label,split`. Graphs must be listed
/// in id order and cover consecutive node ranges.
pub fn parse_graphs_csv(text: &str) -> Result<Vec<GraphRow>> {
    let mut rd = reader(text);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["graph_id", "first_node", "num_nodes", "label", "split"] {
        return Err(Error::Format(
            "graphs header must be graph_id,first_node,num_nodes,label,split".into(),
        ));
    }
    let mut rows: Vec<GraphRow> = Vec::new();
    let mut next = 0usize;
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        let id: usize = field(&rec, 0, line, "graph id")?;
        let first: usize = field(&rec, 1, line, "first node")?;
        let count: usize = field(&rec, 2, line, "node count")?;
        if id != rows.len() || first != next || count == 0 {
            return Err(Error::Parse {
                line,
                msg: format!("graph {id} does not continue the node ranges (expected id {}, first node {next}, positive size)", rows.len()),
            });
        }
        let split = rec.get(4).and_then(Split::parse).ok_or_else(|| Error::Parse {
            line,
            msg: "split must be train, val or test".into(),
        })?;
        next = first.checked_add(count).ok_or_else(|| Error::Parse {
            line,
            msg: "node range overflows".into(),
        })?;
        rows.push(GraphRow {
            first_node: first,
            num_nodes: count,
            label: field(&rec, 3, line, "label")?,
            split,
        });
    }
    Ok(rows)
}

/// Writes the disjoint union of all graphs as one node dataset (each node
/// labelled with its graph's label) plus `graphs.csv` describing the ranges.
pub fn write_graph_dataset(dir: &Path, ds: &GraphDataset) -> Result<()> {
    write_files(dir, &graph_dataset_files(ds)?)
}

/// The files of [`write_graph_dataset`] as `(name, contents)` pairs.
pub fn graph_dataset_files(ds: &GraphDataset) -> Result<Vec<(&'static str, String)>> {
    let graphs: Vec<&Graph> = ds.items.iter().map(|it| &it.graph).collect();
    let union = Graph::disjoint_union(&graphs);
    let xs: Vec<&Mat> = ds.items.iter().map(|it| &it.x).collect();
    let x = Mat::vstack(&xs)?;
    let labels: Vec<usize> = ds
        .items
        .iter()
        .flat_map(|it| std::iter::repeat_n(it.label, it.graph.n()))
        .collect();
    let edges = union.to_edge_list();
    let features = features_csv(&x, &labels)?;
    let mut first = 0;
    let rows: Vec<Vec<String>> = ds
        .items
        .iter()
        .enumerate()
        .map(|(k, it)| {
            let r = vec![
                k.to_string(),
                first.to_string(),
                it.graph.n().to_string(),
                it.label.to_string(),
                it.split.as_str().to_string(),
            ];
            first += it.graph.n();
            r
        })
        .collect();
    let text = write_csv(
        ["graph_id", "first_node", "num_nodes", "label", "split"]
            .map(String::from)
            .to_vec(),
        rows.into_iter(),
    )?;
    Ok(vec![(EDGES_FILE, edges), (FEATURES_FILE, features), (GRAPHS_FILE, text)])
}

pub fn read_graph_dataset(dir: &Path) -> Result<GraphDataset> {
    let union = Graph::parse_edge_list(&std::fs::read_to_string(dir.join(EDGES_FILE))?)?;
    let table = parse_features_csv(&std::fs::read_to_string(dir.join(FEATURES_FILE))?)?;
    let rows = parse_graphs_csv(&std::fs::read_to_string(dir.join(GRAPHS_FILE))?)?;
    let total = rows.last().map_or(0, |r| r.first_node + r.num_nodes);
    if total != table.labels.len() || union.n() > total {
        return Err(Error::Format(format!(
            "graphs cover {total} nodes, features have {}, edges reference {}",
            table.labels.len(),
            union.n()
        )));
    }
    let mut graph_of = vec![0usize; total];
    for (k, r) in rows.iter().enumerate() {
        graph_of[r.first_node..r.first_node + r.num_nodes].fill(k);
    }
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); rows.len()];
    for &(a, b) in union.edges() {
        let (ga, gb) = (graph_of[a], graph_of[b]);
        if ga != gb {
            return Err(Error::Format(format!("edge ({a}, {b}) crosses graphs {ga} and {gb}")));
        }
        let off = rows[ga].first_node;
        edges[ga].push((a - off, b - off));
    }
    let items = rows
        .iter()
        .zip(edges)
        .map(|(r, e)| {
            Ok(GraphItem {
                graph: Graph::new(r.num_nodes, e)?,
                x: table.x.slice_rows(r.first_node, r.first_node + r.num_nodes),
                label: r.label,
                split: r.split,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k = infer_classes(&items.iter().map(|it| it.label).collect::<Vec<_>>());
    GraphDataset::new(items, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_feature_sbm, gen_graph_classification, GraphSynthConfig, SynthConfig};

    #[test]
    fn node_dataset_round_trip() {
        let ds = gen_feature_sbm(&SynthConfig::default()).unwrap();
        let dir = std::env::temp_dir().join(format!("gsagcn-export-{}", std::process::id()));
        write_node_dataset(&dir, &ds).unwrap();
        let back = read_node_dataset(&dir).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        assert_eq!(back, ds);
    }

    #[test]
    fn graph_dataset_round_trip() {
        let ds = gen_graph_classification(&GraphSynthConfig {
            graphs_per_class: 5,
            ..GraphSynthConfig::default()
        })
        .unwrap();
        let dir = std::env::temp_dir().join(format!("gsagcn-gexport-{}", std::process::id()));
        write_graph_dataset(&dir, &ds).unwrap();
        let back = read_graph_dataset(&dir).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        assert_eq!(back, ds);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_features_csv("id,f1,label\n0,1,0\n").is_err());
        assert!(parse_features_csv("node_id,f1,label\n1,1,0\n").is_err());
        assert!(parse_features_csv("node_id,f1,label\n0,x,0\n").is_err());
        assert!(parse_features_csv("node_id,f1,label\n0,1\n").is_err());
        assert!(parse_masks_csv("node_id,train,val,test\n0,1,1,0\n").is_err());
        assert!(parse_masks_csv("node_id,train,val,test\n0,2,0,0\n").is_err());
        assert!(parse_graphs_csv("graph_id,first_node,num_nodes,label,split\n0,1,2,0,train\n").is_err());
        assert!(parse_graphs_csv("graph_id,first_node,num_nodes,label,split\n0,0,2,0,dev\n").is_err());
        let ok = parse_features_csv("node_id,f1,f2,label\n0,1.5,-2,1\n1,0,0,0\n").unwrap();
        assert_eq!(ok.x, Mat::from_rows(&[[1.5, -2.0], [0.0, 0.0]]));
        assert_eq!(ok.labels, vec![1, 0]);
    }
}
