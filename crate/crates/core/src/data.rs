//! Edge-list I/O and the bundled benchmark networks.
//!
//! Edge lists are UTF-8 text with one edge per line given as two
//! whitespace-separated 1-based node ids. `#` starts a comment. Undirected
//! duplicates are merged. The node count is the largest id unless given
//! explicitly, which is needed when trailing nodes are isolated.

use crate::model::Network;
use thiserror::Error;

const FLORENTINE: &str = include_str!("../data/florentine.txt");
const KARATE: &str = include_str!("../data/karate.txt");

/// Padgett's Florentine families in the order of their 1-based ids.
pub const FLORENTINE_FAMILIES: [&str; 15] = [
    "Acciaiuoli",
    "Medici",
    "Castellani",
    "Peruzzi",
    "Strozzi",
    "Barbadori",
    "Ridolfi",
    "Tornabuoni",
    "Albizzi",
    "Salviati",
    "Pazzi",
    "Bischeri",
    "Guadagni",
    "Ginori",
    "Lamberteschi",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: expected two node ids, found {content:?}")]
    Malformed { line: usize, content: String },
    #[error("line {line}: node ids are 1-based, found 0")]
    ZeroId { line: usize },
    #[error("line {line}: self loop on node {node}")]
    SelfLoop { line: usize, node: usize },
    #[error("edge list mentions node {max} but the node count is {nodes}")]
    NodeCountTooSmall { max: usize, nodes: usize },
}

/// Parses an edge list into a network on `nodes` nodes (default: largest id).
pub fn parse_edge_list(text: &str, nodes: Option<usize>) -> Result<Network, ParseError> {
    let mut edges = Vec::new();
    let mut max_id = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let malformed = || ParseError::Malformed { line, content: raw.to_string() };
        if fields.len() != 2 {
            return Err(malformed());
        }
        let i: usize = fields[0].parse().map_err(|_| malformed())?;
        let j: usize = fields[1].parse().map_err(|_| malformed())?;
        if i == 0 || j == 0 {
            return Err(ParseError::ZeroId { line });
        }
        if i == j {
            return Err(ParseError::SelfLoop { line, node: i });
        }
        max_id = max_id.max(i).max(j);
        edges.push((i - 1, j - 1));
    }
    let n = nodes.unwrap_or(max_id);
    if max_id > n {
        return Err(ParseError::NodeCountTooSmall { max: max_id, nodes: n });
    }
    Ok(Network::from_edges(n, &edges).expect("ids validated above"))
}

/// Canonical text form: a `# nodes` header, then `i j` with `i < j` in
/// lexicographic order, 1-based. Equal networks give identical text.
pub fn format_edge_list(y: &Network) -> String {
    let mut out = format!("# nodes {}\n", y.node_count());
    for (i, j) in y.edges() {
        out.push_str(&format!("{} {}\n", i + 1, j + 1));
    }
    out
}

pub fn florentine() -> Network {
    parse_edge_list(FLORENTINE, Some(15)).expect("bundled data is valid")
}

pub fn karate() -> Network {
    parse_edge_list(KARATE, Some(34)).expect("bundled data is valid")
}
