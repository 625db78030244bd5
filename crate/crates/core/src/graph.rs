//! Undirected simple graphs on vertices `0..p`, stored as adjacency bitsets.
//!
//! Vertices are 0-based everywhere in the library. The text edge-list format
//! and DOT export use 1-based labels.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[inline]
pub(crate) fn words_for(p: usize) -> usize {
    p.div_ceil(64).max(1)
}

/// Iterates the set bits of a bitset in increasing order.
pub(crate) fn bits(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(w, &word)| {
        let mut rest = word;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let t = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(w * 64 + t)
        })
    })
}

#[inline]
pub(crate) fn popcount(set: &[u64]) -> usize {
    set.iter().map(|w| w.count_ones() as usize).sum()
}

#[inline]
pub(crate) fn test_bit(set: &[u64], i: usize) -> bool {
    set[i / 64] >> (i % 64) & 1 == 1
}

#[inline]
pub(crate) fn set_bit(set: &mut [u64], i: usize) {
    set[i / 64] |= 1 << (i % 64);
}

#[inline]
pub(crate) fn clear_bit(set: &mut [u64], i: usize) {
    set[i / 64] &= !(1 << (i % 64));
}

/// An undirected graph without self-loops.
///
/// Equality and hashing are over the adjacency bitsets, which are a canonical
/// form of the edge set.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    p: usize,
    words: usize,
    adj: Vec<u64>,
    edges: usize,
}

impl Graph {
    pub fn empty(p: usize) -> Self {
        let words = words_for(p);
        Graph {
            p,
            words,
            adj: vec![0; p * words],
            edges: 0,
        }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Graph::empty(p);
        for i in 0..p {
            for j in i + 1..p {
                g.add_edge(i, j);
            }
        }
        g
    }

    /// Builds a graph from 0-based vertex pairs. Duplicate pairs are merged.
    pub fn from_edges<I>(p: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::empty(p);
        for (i, j) in edges {
            if i == j {
                return Err(Error::Domain(format!("self-loop on vertex {}", i + 1)));
            }
            if i >= p || j >= p {
                return Err(Error::Domain(format!(
                    "edge ({}, {}) out of range for {p} vertices",
                    i + 1,
                    j + 1
                )));
            }
            g.add_edge(i, j);
        }
        Ok(g)
    }

    /// Graph on `p` vertices whose edges are the set bits of `mask` taken in
    /// lexicographic pair order (0,1), (0,2), ..., (p-2,p-1).
    pub fn from_mask(p: usize, mask: u64) -> Self {
        let mut g = Graph::empty(p);
        let mut bit = 0;
        for i in 0..p {
            for j in i + 1..p {
                if mask >> bit & 1 == 1 {
                    g.add_edge(i, j);
                }
                bit += 1;
            }
        }
        g
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges
    }

    /// Maximum possible edge count, `p(p-1)/2`.
    #[inline]
    pub fn max_edges(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2
    }

    #[inline]
    pub(crate) fn words(&self) -> usize {
        self.words
    }

    /// Adjacency bitset of vertex `v`.
    #[inline]
    pub(crate) fn row(&self, v: usize) -> &[u64] {
        &self.adj[v * self.words..(v + 1) * self.words]
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && test_bit(self.row(i), j)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        debug_assert!(i != j && i < self.p && j < self.p);
        if self.has_edge(i, j) {
            return false;
        }
        let w = self.words;
        set_bit(&mut self.adj[i * w..(i + 1) * w], j);
        set_bit(&mut self.adj[j * w..(j + 1) * w], i);
        self.edges += 1;
        true
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        if !self.has_edge(i, j) {
            return false;
        }
        let w = self.words;
        clear_bit(&mut self.adj[i * w..(i + 1) * w], j);
        clear_bit(&mut self.adj[j * w..(j + 1) * w], i);
        self.edges -= 1;
        true
    }

    pub fn toggle(&mut self, i: usize, j: usize) {
        if !self.remove_edge(i, j) {
            self.add_edge(i, j);
        }
    }

    /// Returns a copy with edge `(i, j)` toggled.
    pub fn toggled(&self, i: usize, j: usize) -> Graph {
        let mut g = self.clone();
        g.toggle(i, j);
        g
    }

    pub fn degree(&self, v: usize) -> usize {
        popcount(self.row(v))
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        bits(self.row(v))
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edges);
        for i in 0..self.p {
            out.extend(bits(self.row(i)).filter(|&j| j > i).map(|j| (i, j)));
        }
        out
    }

    /// Non-edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.max_edges() - self.edges);
        for i in 0..self.p {
            for j in i + 1..self.p {
                if !self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.p == other.p && self.adj.iter().zip(&other.adj).all(|(a, b)| a & !b == 0)
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.p);
        let mut g = Graph::empty(self.p);
        for (i, j) in self.edges() {
            g.add_edge(perm[i], perm[j]);
        }
        g
    }

    /// Whether the vertices in `set` are pairwise adjacent.
    pub fn is_complete_on(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(a, &i)| set[a + 1..].iter().all(|&j| self.has_edge(i, j)))
    }

    /// Connected-component label per vertex, labels in order of first vertex.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.p];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.p {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for w in self.neighbors(v) {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// One "i j" line per edge with 1-based labels, preceded by a
    /// `# vertices P` comment so isolated vertices survive a round trip.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# vertices {}\n", self.p);
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{} {}", i + 1, j + 1);
        }
        s
    }

    /// Parses the edge-list format. Blank lines are skipped and `#` starts a
    /// comment. The vertex count is taken from `p`, else from a
    /// `# vertices P` header, else from the largest label seen.
    pub fn parse_edge_list(text: &str, p: Option<usize>) -> Result<Graph> {
        let mut declared = p;
        let mut pairs = Vec::new();
        for (row, line) in text.lines().enumerate() {
            let (body, comment) = match line.find('#') {
                Some(at) => (&line[..at], Some(&line[at + 1..])),
                None => (line, None),
            };
            if let Some(c) = comment {
                let mut it = c.split_whitespace();
                if declared.is_none() && it.next() == Some("vertices") {
                    declared = it.next().and_then(|t| t.parse().ok());
                }
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != 2 {
                return Err(Error::Parse {
                    row: row + 1,
                    column: 1,
                    message: format!("expected two vertex labels, found {}", fields.len()),
                });
            }
            let mut ends = [0usize; 2];
            for (col, f) in fields.iter().enumerate() {
                ends[col] = match f.parse::<usize>() {
                    Ok(v) if v >= 1 => v - 1,
                    _ => {
                        return Err(Error::Parse {
                            row: row + 1,
                            column: col + 1,
                            message: format!("invalid 1-based vertex label {f:?}"),
                        })
                    }
                };
            }
            pairs.push((ends[0], ends[1]));
        }
        let inferred = pairs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
        Graph::from_edges(declared.unwrap_or(inferred), pairs)
    }

    /// Undirected DOT with every vertex listed, so isolated vertices show.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("graph {name} {{\n");
        for v in 0..self.p {
            let _ = writeln!(s, "  {};", v + 1);
        }
        for (i, j) in self.edges() {
            let _ = writeln!(s, "  {} -- {};", i + 1, j + 1);
        }
        s.push_str("}\n");
        s
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(p={}, ", self.p)?;
        f.debug_list()
            .entries(self.edges().iter().map(|&(i, j)| (i + 1, j + 1)))
            .finish()?;
        write!(f, ")")
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct GraphRepr {
    p: usize,
    edges: Vec<(usize, usize)>,
}

/// Serialized as `{"p": P, "edges": [[i, j], ...]}` with 1-based labels.
impl serde::Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphRepr {
            p: self.p,
            edges: self.edges().into_iter().map(|(i, j)| (i + 1, j + 1)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GraphRepr::deserialize(d)?;
        let mut pairs = Vec::with_capacity(r.edges.len());
        for (i, j) in r.edges {
            if i == 0 || j == 0 {
                return Err(serde::de::Error::custom("vertex labels are 1-based"));
            }
            pairs.push((i - 1, j - 1));
        }
        Graph::from_edges(r.p, pairs).map_err(serde::de::Error::custom)
    }
}
