//! Simple undirected graphs with a fixed edge numbering.
//!
//! Graphs are immutable after construction; all colouring state lives outside
//! so one graph can be shared across trials and threads.

use std::collections::HashMap;

use thiserror::Error;

pub type Vertex = u32;
/// Index into [`Graph::edges`]; edges are sorted lexicographically at
/// construction so ids are stable for a given edge set.
pub type EdgeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid graph: {0}")]
    Validation(String),
}

#[derive(Clone, Debug)]
pub struct Graph {
    vertex_count: u32,
    edges: Vec<[Vertex; 2]>,
    adjacency: Vec<Vec<EdgeId>>,
    max_degree: u32,
    index: HashMap<(Vertex, Vertex), EdgeId>,
}

impl Graph {
    /// Build a graph from vertex count and unordered edge pairs.
    /// Pairs may come in any order; each is normalized to `u < v`.
    pub fn new(vertex_count: u32, pairs: &[[Vertex; 2]]) -> Result<Self, GraphError> {
        let mut edges: Vec<[Vertex; 2]> = Vec::with_capacity(pairs.len());
        for &[a, b] in pairs {
            if a == b {
                return Err(GraphError::Validation(format!("loop at vertex {a}")));
            }
            if a >= vertex_count || b >= vertex_count {
                return Err(GraphError::Validation(format!(
                    "edge ({a},{b}) out of range for {vertex_count} vertices"
                )));
            }
            edges.push([a.min(b), a.max(b)]);
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            let d = edges.windows(2).find(|w| w[0] == w[1]).unwrap()[0];
            return Err(GraphError::Validation(format!(
                "duplicate edge ({},{})",
                d[0], d[1]
            )));
        }
        let mut adjacency = vec![Vec::new(); vertex_count as usize];
        let mut index = HashMap::with_capacity(edges.len());
        for (id, &[u, v]) in edges.iter().enumerate() {
            adjacency[u as usize].push(id);
            adjacency[v as usize].push(id);
            index.insert((u, v), id);
        }
        let max_degree = adjacency.iter().map(|a| a.len() as u32).max().unwrap_or(0);
        Ok(Graph {
            vertex_count,
            edges,
            adjacency,
            max_degree,
            index,
        })
    }

    /// Parse the text edge-list format: first non-comment line `n m`, then
    /// `m` lines `u v` with `0 <= u < v < n`. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut header: Option<(u32, usize)> = None;
        let mut pairs: Vec<[Vertex; 2]> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse_num = |s: Option<&str>, what: &str| -> Result<u64, GraphError> {
                s.ok_or_else(|| GraphError::Parse {
                    line: lineno + 1,
                    msg: format!("missing {what}"),
                })?
                .parse::<u64>()
                .map_err(|_| GraphError::Parse {
                    line: lineno + 1,
                    msg: format!("bad {what}: {line:?}"),
                })
            };
            if header.is_none() {
                let n = parse_num(it.next(), "vertex count")?;
                let m = parse_num(it.next(), "edge count")?;
                if it.next().is_some() {
                    return Err(GraphError::Parse {
                        line: lineno + 1,
                        msg: "trailing tokens after header".into(),
                    });
                }
                header = Some((n as u32, m as usize));
            } else {
                let u = parse_num(it.next(), "endpoint")? as u32;
                let v = parse_num(it.next(), "endpoint")? as u32;
                if it.next().is_some() {
                    return Err(GraphError::Parse {
                        line: lineno + 1,
                        msg: "trailing tokens after edge".into(),
                    });
                }
                if u >= v {
                    return Err(GraphError::Parse {
                        line: lineno + 1,
                        msg: format!("edge must satisfy u < v, got {u} {v}"),
                    });
                }
                pairs.push([u, v]);
            }
        }
        let (n, m) = header.ok_or(GraphError::Parse {
            line: 0,
            msg: "empty document".into(),
        })?;
        if pairs.len() != m {
            return Err(GraphError::Validation(format!(
                "header promises {m} edges, found {}",
                pairs.len()
            )));
        }
        Self::new(n, &pairs)
    }

    pub fn vertex_count(&self) -> u32 {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[Vertex; 2]] {
        &self.edges
    }

    pub fn endpoints(&self, e: EdgeId) -> [Vertex; 2] {
        self.edges[e]
    }

    /// Edge ids incident to `v`, ascending.
    pub fn incident(&self, v: Vertex) -> &[EdgeId] {
        &self.adjacency[v as usize]
    }

    pub fn degree(&self, v: Vertex) -> u32 {
        self.adjacency[v as usize].len() as u32
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn edge_between(&self, u: Vertex, v: Vertex) -> Option<EdgeId> {
        self.index.get(&(u.min(v), u.max(v))).copied()
    }

    /// The endpoint of `e` that is not `v`.
    pub fn other_endpoint(&self, e: EdgeId, v: Vertex) -> Vertex {
        let [a, b] = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn path(n: u32) -> Graph {
        let pairs: Vec<[u32; 2]> = (1..n).map(|v| [v - 1, v]).collect();
        Graph::new(n, &pairs).unwrap()
    }

    pub fn cycle(n: u32) -> Graph {
        assert!(n >= 3);
        let mut pairs: Vec<[u32; 2]> = (1..n).map(|v| [v - 1, v]).collect();
        pairs.push([0, n - 1]);
        Graph::new(n, &pairs).unwrap()
    }

    pub fn complete(n: u32) -> Graph {
        let mut pairs = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                pairs.push([u, v]);
            }
        }
        Graph::new(n, &pairs).unwrap()
    }

    /// Star with centre 0 and `k` leaves.
    pub fn star(k: u32) -> Graph {
        let pairs: Vec<[u32; 2]> = (1..=k).map(|v| [0, v]).collect();
        Graph::new(k + 1, &pairs).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_triangle() {
        let g = Graph::parse("3 3\n0 1\n1 2\n0 2").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.max_degree(), 2);
    }

    #[test]
    fn parse_single_edge() {
        let g = Graph::parse("2 1\n0 1").unwrap();
        assert_eq!(g.max_degree(), 1);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn parse_star() {
        let g = Graph::parse("4 3\n0 1\n0 2\n0 3").unwrap();
        assert_eq!(g.max_degree(), 3);
        assert_eq!(g.degree(0), 3);
        assert_eq!(g.degree(2), 1);
    }

    #[test]
    fn parse_comments_and_blank_lines() {
        let g = Graph::parse("# a triangle\n3 3\n\n0 1\n# middle\n1 2\n0 2\n").unwrap();
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn parse_rejects_reversed_edge() {
        let err = Graph::parse("3 1\n2 1").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }));
    }

    #[test]
    fn parse_rejects_edge_count_mismatch() {
        assert!(Graph::parse("3 2\n0 1").is_err());
    }

    #[test]
    fn rejects_loop_duplicate_range() {
        assert!(Graph::new(3, &[[1, 1]]).is_err());
        assert!(Graph::new(3, &[[0, 1], [1, 0]]).is_err());
        assert!(Graph::new(3, &[[0, 3]]).is_err());
    }

    #[test]
    fn edge_ids_sorted_and_indexed() {
        let g = Graph::new(4, &[[2, 3], [0, 1], [1, 2]]).unwrap();
        assert_eq!(g.edges(), &[[0, 1], [1, 2], [2, 3]]);
        assert_eq!(g.edge_between(3, 2), Some(2));
        assert_eq!(g.edge_between(0, 3), None);
        assert_eq!(g.other_endpoint(1, 2), 1);
    }
}
