//! DOT and JSON output for mixed graphs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::MixedGraph;
use crate::error::{Error, Result};

/// JSON form of a mixed graph, with edges given by node name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub nodes: Vec<String>,
    pub directed: Vec<[String; 2]>,
    pub undirected: Vec<[String; 2]>,
}

fn check_names(g: &MixedGraph, names: &[String]) -> Result<()> {
    if names.len() != g.n() {
        return Err(Error::Argument(format!("{} names for {} nodes", names.len(), g.n())));
    }
    Ok(())
}

fn dot_id(name: &str) -> String {
    let plain = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        name.to_owned()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

/// DOT text: nodes in index order, then `a -> b` edges, then `a -- b` edges,
/// each list sorted by node index.
pub fn to_dot(g: &MixedGraph, names: &[String]) -> Result<String> {
    check_names(g, names)?;
    let mut out = String::from("digraph essential {\n");
    for name in names {
        let _ = writeln!(out, "  {};", dot_id(name));
    }
    for (a, b) in g.directed_edges() {
        let _ = writeln!(out, "  {} -> {};", dot_id(&names[a]), dot_id(&names[b]));
    }
    for (a, b) in g.undirected_edges() {
        let _ = writeln!(out, "  {} -- {};", dot_id(&names[a]), dot_id(&names[b]));
    }
    out.push_str("}\n");
    Ok(out)
}

pub fn to_document(g: &MixedGraph, names: &[String]) -> Result<GraphDocument> {
    check_names(g, names)?;
    let pair = |(a, b): (usize, usize)| [names[a].clone(), names[b].clone()];
    Ok(GraphDocument {
        nodes: names.to_vec(),
        directed: g.directed_edges().into_iter().map(pair).collect(),
        undirected: g.undirected_edges().into_iter().map(pair).collect(),
    })
}

pub fn to_json(g: &MixedGraph, names: &[String]) -> Result<String> {
    let doc = to_document(g, names)?;
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Argument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses a [`GraphDocument`] back into a graph and its node names.
pub fn from_json(text: &str) -> Result<(MixedGraph, Vec<String>)> {
    let doc: GraphDocument =
        serde_json::from_str(text).map_err(|e| Error::Format { row: e.line(), message: e.to_string() })?;
    let index = |name: &str| {
        doc.nodes.iter().position(|n| n == name).ok_or_else(|| Error::Argument(format!("unknown node {name:?}")))
    };
    let mut g = MixedGraph::new(doc.nodes.len());
    for [a, b] in &doc.directed {
        g.add_directed(index(a)?, index(b)?)?;
    }
    for [a, b] in &doc.undirected {
        g.add_undirected(index(a)?, index(b)?)?;
    }
    Ok((g, doc.nodes.clone()))
}
