//! File ingestion and emission for attributed graphs.
//!
//! Formats:
//! - `schema.json`: `{"attributes": [{"name": ..., "labels": [...]}, ...]}`
//! - `nodes.tsv`: `user_id<TAB>a_1<TAB>...<TAB>a_L`, 0 = missing; user ids
//!   must be a dense 0..N-1 range and may not repeat.
//! - `edges.tsv`: `u<TAB>v` per line, undirected, deduplicated on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::graph::{AttributeSchema, AttributeType, AttributedGraph};

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    attributes: Vec<AttributeEntry>,
}

#[derive(Serialize, Deserialize)]
struct AttributeEntry {
    name: String,
    labels: Vec<String>,
}

pub fn load_schema(path: &Path) -> Result<AttributeSchema> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file: SchemaFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    AttributeSchema::new(
        file.attributes
            .into_iter()
            .map(|a| AttributeType {
                name: a.name,
                labels: a.labels,
            })
            .collect(),
    )
}

/// Loads and validates a full attributed graph from the three input files.
pub fn load_graph(
    schema_path: &Path,
    nodes_path: &Path,
    edges_path: &Path,
) -> Result<AttributedGraph> {
    let schema = load_schema(schema_path)?;
    let (n_users, assignments) = load_nodes(nodes_path, &schema)?;
    let edges = load_edges(edges_path, n_users)?;
    AttributedGraph::new(n_users, edges, schema, assignments)
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn load_nodes(path: &Path, schema: &AttributeSchema) -> Result<(usize, Vec<usize>)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let l = schema.n_types();
    let mut rows: Vec<(usize, Vec<usize>)> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != l + 1 {
            return Err(parse_error(
                path,
                line_no,
                format!(
                    "expected {} tab-separated fields, found {}",
                    l + 1,
                    fields.len()
                ),
            ));
        }
        let mut values = fields.iter().map(|f| {
            f.trim().parse::<usize>().map_err(|_| {
                parse_error(
                    path,
                    line_no,
                    format!("'{f}' is not a non-negative integer"),
                )
            })
        });
        let user_id = values.next().unwrap()?;
        let mut assignment = Vec::with_capacity(l);
        for (j, value) in values.enumerate() {
            let a = value?;
            if a > schema.label_count(j) {
                return Err(Error::Schema(format!(
                    "user {user_id} has label {a} for attribute '{}' which only has {} labels",
                    schema.types()[j].name,
                    schema.label_count(j)
                )));
            }
            assignment.push(a);
        }
        rows.push((user_id, assignment));
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, "node file contains no rows"));
    }
    let n_users = rows.len();
    let mut assignments = vec![None; n_users * l];
    for (user_id, assignment) in rows {
        if user_id >= n_users {
            return Err(Error::Schema(format!(
                "user id {user_id} outside the dense range 0..{n_users}"
            )));
        }
        for (j, a) in assignment.into_iter().enumerate() {
            let slot = &mut assignments[user_id * l + j];
            if j == 0 && slot.is_some() {
                return Err(Error::Schema(format!("duplicate node id {user_id}")));
            }
            *slot = Some(a);
        }
    }
    let assignments = assignments
        .into_iter()
        .collect::<Option<Vec<usize>>>()
        .ok_or_else(|| Error::Schema("node ids do not cover the dense range 0..N".into()))?;
    Ok((n_users, assignments))
}

fn load_edges(path: &Path, n_users: usize) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut edges = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_error(
                path,
                line_no,
                format!("expected 'u<TAB>v', found {} fields", fields.len()),
            ));
        }
        let u = fields[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_error(path, line_no, format!("'{}' is not a user id", fields[0])))?;
        let v = fields[1]
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_error(path, line_no, format!("'{}' is not a user id", fields[1])))?;
        if u == v {
            return Err(parse_error(
                path,
                line_no,
                format!("self-loop edge on user {u}"),
            ));
        }
        if u >= n_users || v >= n_users {
            return Err(Error::Schema(format!(
                "edge ({u}, {v}) has endpoint outside 0..{n_users}"
            )));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

/// Writes `schema.json`, `nodes.tsv`, `edges.tsv` and, when ground truth is
/// supplied, `ground_truth.tsv` into `dir`. Output is byte-deterministic.
pub fn write_graph(
    dir: &Path,
    graph: &AttributedGraph,
    ground_truth: Option<&[usize]>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let schema_file = SchemaFile {
        attributes: graph
            .schema()
            .types()
            .iter()
            .map(|t| AttributeEntry {
                name: t.name.clone(),
                labels: t.labels.clone(),
            })
            .collect(),
    };
    let schema_path = dir.join("schema.json");
    let schema_json = serde_json::to_string_pretty(&schema_file)
        .map_err(|e| Error::Numerical(format!("schema serialization failed: {e}")))?;
    fs::write(&schema_path, schema_json + "\n").map_err(io_err(&schema_path))?;

    let nodes_path = dir.join("nodes.tsv");
    fs::write(
        &nodes_path,
        render_nodes(
            graph.n_users(),
            graph.schema().n_types(),
            graph.assignments(),
        ),
    )
    .map_err(io_err(&nodes_path))?;

    let edges_path = dir.join("edges.tsv");
    let mut edges_text = String::new();
    for &(u, v) in graph.edges() {
        edges_text.push_str(&format!("{u}\t{v}\n"));
    }
    fs::write(&edges_path, edges_text).map_err(io_err(&edges_path))?;

    if let Some(truth) = ground_truth {
        let truth_path = dir.join("ground_truth.tsv");
        fs::write(
            &truth_path,
            render_nodes(graph.n_users(), graph.schema().n_types(), truth),
        )
        .map_err(io_err(&truth_path))?;
    }
    Ok(())
}

fn render_nodes(n_users: usize, n_types: usize, assignments: &[usize]) -> String {
    let mut out = String::new();
    for u in 0..n_users {
        out.push_str(&u.to_string());
        for j in 0..n_types {
            out.push('\t');
            out.push_str(&assignments[u * n_types + j].to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn write_temp(name: &str, content: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("attrinfer-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        fs::write(&path, content).unwrap();
        path
    }

    const SCHEMA: &str = r#"{"attributes": [{"name": "gender", "labels": ["male", "female"]}]}"#;

    #[test]
    fn loads_minimal_graph() {
        let schema = write_temp("s1.json", SCHEMA);
        let nodes = write_temp("n1.tsv", "0\t1\n1\t2\n");
        let edges = write_temp("e1.tsv", "0\t1\n");
        let g = load_graph(&schema, &nodes, &edges).unwrap();
        assert_eq!(g.n_users(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.schema().n_labels(), 2);
    }

    #[test]
    fn out_of_range_label_is_schema_error() {
        let schema = write_temp("s2.json", SCHEMA);
        let nodes = write_temp("n2.tsv", "0\t3\n1\t2\n");
        let edges = write_temp("e2.tsv", "0\t1\n");
        match load_graph(&schema, &nodes, &edges) {
            Err(Error::Schema(msg)) => {
                assert!(msg.contains("user 0") && msg.contains("gender"), "{msg}")
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_edges_in_both_orders_collapse() {
        let schema = write_temp("s3.json", SCHEMA);
        let nodes = write_temp("n3.tsv", "0\t1\n1\t2\n");
        let edges = write_temp("e3.tsv", "0\t1\n1\t0\n");
        let g = load_graph(&schema, &nodes, &edges).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let schema = write_temp("s4.json", SCHEMA);
        let nodes = write_temp("n4.tsv", "0\t1\nnot-a-number\t2\n");
        let edges = write_temp("e4.tsv", "");
        match load_graph(&schema, &nodes, &edges) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_node_id_is_rejected() {
        let schema = write_temp("s5.json", SCHEMA);
        let nodes = write_temp("n5.tsv", "0\t1\n0\t2\n");
        let edges = write_temp("e5.tsv", "");
        assert!(load_graph(&schema, &nodes, &edges).is_err());
    }

    #[test]
    fn round_trips_through_write_graph() {
        let dir = std::env::temp_dir().join(format!("attrinfer-rt-{}", std::process::id()));
        let schema = AttributeSchema::from_counts(&[("a", 2), ("b", 3)]).unwrap();
        let g =
            AttributedGraph::new(3, vec![(0, 1), (1, 2)], schema, vec![1, 3, 0, 2, 2, 1]).unwrap();
        write_graph(&dir, &g, Some(g.assignments())).unwrap();
        let loaded = load_graph(
            &dir.join("schema.json"),
            &dir.join("nodes.tsv"),
            &dir.join("edges.tsv"),
        )
        .unwrap();
        assert_eq!(loaded, g);
        assert!(dir.join("ground_truth.tsv").exists());
    }
}
