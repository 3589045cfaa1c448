#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use kenn::io::{write_multilabel, MultiLabelData};
use kenn_core::train::{
    citation_knowledge, make_implication_dataset, make_synthetic_citations, GraphDataset,
    SyntheticGraphSpec,
};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn kenn(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_kenn"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Multi-label CSV plus schema and clause files for the implication data.
pub struct MultiLabelFiles {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub clauses: PathBuf,
}

pub fn write_implication(dir: &Path, n: usize, seed: u64) -> MultiLabelFiles {
    let (x, y) = make_implication_dataset(n, 3, 0.0, seed).unwrap();
    let data = dir.join("implication.csv");
    write_multilabel(
        &data,
        &MultiLabelData {
            feature_names: vec!["x0".into(), "x1".into(), "x2".into()],
            label_names: vec!["A".into(), "B".into()],
            x,
            y,
        },
    )
    .unwrap();
    let schema = dir.join("implication.schema");
    std::fs::write(&schema, "unary: A, B\n").unwrap();
    let clauses = dir.join("implication.clauses");
    std::fs::write(&clauses, "# the label B follows from A\n_:nA(x),B(x)\n").unwrap();
    MultiLabelFiles {
        data,
        schema,
        clauses,
    }
}

pub struct GraphFiles {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub schema: PathBuf,
    pub clauses: PathBuf,
}

pub fn write_graph(dir: &Path, g: &GraphDataset) -> GraphFiles {
    let knowledge = citation_knowledge(g.n_classes).unwrap();
    let classes = knowledge.schema().unary_names();
    let mut nodes = String::from("id");
    for f in 0..g.features.cols() {
        let _ = write!(nodes, ",f{f}");
    }
    nodes.push_str(",label\n");
    for i in 0..g.n_nodes() {
        let _ = write!(nodes, "n{i}");
        for v in g.features.row(i) {
            let _ = write!(nodes, ",{v}");
        }
        let _ = writeln!(nodes, ",{}", classes[g.labels[i]]);
    }
    let mut edges = String::from("src,dst\n");
    for (s, d) in g.edge_list() {
        let _ = writeln!(edges, "n{s},n{d}");
    }
    let files = GraphFiles {
        nodes: dir.join("nodes.csv"),
        edges: dir.join("edges.csv"),
        schema: dir.join("graph.schema"),
        clauses: dir.join("graph.clauses"),
    };
    std::fs::write(&files.nodes, nodes).unwrap();
    std::fs::write(&files.edges, edges).unwrap();
    std::fs::write(&files.schema, knowledge.schema().to_string()).unwrap();
    std::fs::write(&files.clauses, knowledge.to_string()).unwrap();
    files
}

pub fn small_graph(seed: u64) -> GraphDataset {
    make_synthetic_citations(&SyntheticGraphSpec {
        n_nodes: 60,
        n_classes: 3,
        n_features: 4,
        homophily: 0.9,
        edge_density: 2.0,
        class_separation: 1.5,
        seed,
    })
    .unwrap()
}
