use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Graph, GraphError};

/// On-disk graph description. Node ids are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub sources: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
}

impl GraphFile {
    pub fn from_graph(g: &Graph) -> Self {
        GraphFile {
            n: g.node_count(),
            edges: g.edges().iter().map(|&(i, j, w)| (i + 1, j + 1, w)).collect(),
            sources: g.sources().iter().map(|s| s + 1).collect(),
            positions: g.positions().map(<[_]>::to_vec),
        }
    }

    pub fn into_graph(self) -> Result<Graph, GraphError> {
        Graph::from_one_based(self.n, &self.edges, &self.sources, self.positions)
    }

    /// JSON text with every float written to 17 significant digits, so that
    /// reading it back reproduces the same bits.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{{\n  \"n\": {},", self.n);
        out.push_str("  \"edges\": [");
        for (k, (i, j, w)) in self.edges.iter().enumerate() {
            let sep = if k == 0 { "" } else { "," };
            let _ = write!(out, "{sep}\n    [{i}, {j}, {}]", fmt_f64(*w));
        }
        out.push_str(if self.edges.is_empty() { "],\n" } else { "\n  ],\n" });
        let sources: Vec<String> = self.sources.iter().map(|s| s.to_string()).collect();
        let _ = write!(out, "  \"sources\": [{}]", sources.join(", "));
        if let Some(pos) = &self.positions {
            out.push_str(",\n  \"positions\": [");
            for (k, [x, y]) in pos.iter().enumerate() {
                let sep = if k == 0 { "" } else { "," };
                let _ = write!(out, "{sep}\n    [{}, {}]", fmt_f64(*x), fmt_f64(*y));
            }
            out.push_str("\n  ]");
        }
        out.push_str("\n}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any finite f64.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_graph_file(path: impl AsRef<Path>) -> Result<Graph, GraphError> {
    let text = std::fs::read_to_string(path)?;
    GraphFile::from_json(&text)?.into_graph()
}

impl Graph {
    pub fn to_json(&self) -> String {
        GraphFile::from_graph(self).to_json()
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
