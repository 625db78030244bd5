//! Decomposable (chordal) graph machinery: maximum cardinality search,
//! junction trees, decomposability-preserving edge toggles, and the greedy
//! supergraph/subgraph pair used to repair non-decomposable graphs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{bits, clear_bit, popcount, set_bit, test_bit, words_for, Graph};

/// Maximum cardinality search. `pick(n)` selects among `n` tied candidates
/// (listed in increasing vertex order) and returns the chosen index.
fn mcs_with(g: &Graph, mut pick: impl FnMut(usize) -> usize) -> Vec<usize> {
    let p = g.num_vertices();
    let mut weight = vec![0usize; p];
    let mut numbered = vec![false; p];
    let mut order = Vec::with_capacity(p);
    let mut tied = Vec::with_capacity(p);
    for _ in 0..p {
        let best = (0..p)
            .filter(|&v| !numbered[v])
            .map(|v| weight[v])
            .max()
            .unwrap_or(0);
        tied.clear();
        tied.extend((0..p).filter(|&v| !numbered[v] && weight[v] == best));
        let v = tied[if tied.len() > 1 { pick(tied.len()) } else { 0 }];
        numbered[v] = true;
        order.push(v);
        for w in g.neighbors(v) {
            if !numbered[w] {
                weight[w] += 1;
            }
        }
    }
    order
}

/// Visit order of maximum cardinality search with lowest-index tie-breaking.
pub fn mcs_order(g: &Graph) -> Vec<usize> {
    mcs_with(g, |_| 0)
}

/// Maximum cardinality search with uniformly random tie-breaking.
pub fn mcs_order_random<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Vec<usize> {
    mcs_with(g, |n| rng.random_range(0..n))
}

/// Zero fill-in test of an MCS visit order: every vertex's earlier neighbours
/// other than the most recent one must be adjacent to that most recent one.
fn has_zero_fill(g: &Graph, order: &[usize]) -> bool {
    let p = g.num_vertices();
    let words = g.words();
    let mut pos = vec![0usize; p];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut visited = vec![0u64; words];
    let mut earlier = vec![0u64; words];
    for &v in order {
        let row = g.row(v);
        for w in 0..words {
            earlier[w] = row[w] & visited[w];
        }
        if let Some(follower) = bits(&earlier).max_by_key(|&u| pos[u]) {
            clear_bit(&mut earlier, follower);
            let frow = g.row(follower);
            if earlier.iter().zip(frow).any(|(e, f)| e & !f != 0) {
                return false;
            }
        }
        set_bit(&mut visited, v);
    }
    true
}

/// Whether `g` is chordal, i.e. decomposable.
pub fn is_decomposable(g: &Graph) -> bool {
    has_zero_fill(g, &mcs_order(g))
}

/// Clique/separator decomposition of a decomposable graph.
///
/// Cliques are listed in a perfect ordering; `separators[j - 1]` is the
/// separator attaching clique `j` to its parent `tree_edges[j - 1].0`.
/// Cliques that start a new connected component attach to the previous clique
/// through an empty separator, so the result is always a single tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionTree {
    pub cliques: Vec<Vec<usize>>,
    pub separators: Vec<Vec<usize>>,
    pub tree_edges: Vec<(usize, usize)>,
}

impl JunctionTree {
    pub fn new(g: &Graph) -> Result<Self> {
        Self::from_order(g, &mcs_order(g))
    }

    /// Junction tree from a randomly tie-broken MCS, i.e. a random perfect
    /// ordering of the cliques.
    pub fn new_random<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Result<Self> {
        Self::from_order(g, &mcs_order_random(g, rng))
    }

    fn from_order(g: &Graph, order: &[usize]) -> Result<Self> {
        if !has_zero_fill(g, order) {
            return Err(Error::NotDecomposable);
        }
        let p = g.num_vertices();
        let words = g.words();
        if p == 0 {
            return Ok(JunctionTree {
                cliques: Vec::new(),
                separators: Vec::new(),
                tree_edges: Vec::new(),
            });
        }

        // Candidate clique of each vertex: itself plus earlier neighbours.
        let mut visited = vec![0u64; words];
        let mut candidates: Vec<Vec<u64>> = Vec::with_capacity(p);
        for &v in order {
            let mut c: Vec<u64> = g.row(v).iter().zip(&visited).map(|(r, s)| r & s).collect();
            set_bit(&mut c, v);
            candidates.push(c);
            set_bit(&mut visited, v);
        }
        // A candidate is maximal unless the next one extends it by one vertex.
        let mut clique_sets: Vec<Vec<u64>> = Vec::new();
        for i in 0..p {
            let extended = i + 1 < p && popcount(&candidates[i + 1]) == popcount(&candidates[i]) + 1;
            if !extended {
                clique_sets.push(candidates[i].clone());
            }
        }

        let mut cliques = Vec::with_capacity(clique_sets.len());
        let mut separators = Vec::with_capacity(clique_sets.len().saturating_sub(1));
        let mut tree_edges = Vec::with_capacity(clique_sets.len().saturating_sub(1));
        let mut union = vec![0u64; words];
        for (j, c) in clique_sets.iter().enumerate() {
            cliques.push(bits(c).collect::<Vec<_>>());
            if j > 0 {
                let sep: Vec<u64> = c.iter().zip(&union).map(|(a, b)| a & b).collect();
                let parent = if sep.iter().all(|&w| w == 0) {
                    j - 1
                } else {
                    (0..j)
                        .find(|&i| sep.iter().zip(&clique_sets[i]).all(|(s, k)| s & !k == 0))
                        .ok_or(Error::NotDecomposable)?
                };
                separators.push(bits(&sep).collect());
                tree_edges.push((parent, j));
            }
            for (u, w) in union.iter_mut().zip(c) {
                *u |= w;
            }
        }
        Ok(JunctionTree {
            cliques,
            separators,
            tree_edges,
        })
    }

    /// Checks the running intersection property of the clique sequence.
    pub fn has_running_intersection(&self) -> bool {
        let mut seen: Vec<usize> = Vec::new();
        for (j, c) in self.cliques.iter().enumerate() {
            if j > 0 {
                let overlap: Vec<usize> = c.iter().copied().filter(|v| seen.contains(v)).collect();
                if !self.cliques[..j]
                    .iter()
                    .any(|k| overlap.iter().all(|v| k.contains(v)))
                {
                    return false;
                }
            }
            for &v in c {
                if !seen.contains(&v) {
                    seen.push(v);
                }
            }
        }
        true
    }

    /// Separators as a sorted multiset.
    pub fn separator_multiset(&self) -> Vec<Vec<usize>> {
        let mut s = self.separators.clone();
        s.sort();
        s
    }
}

/// Convenience wrapper for [`JunctionTree::new`].
pub fn junction_tree(g: &Graph) -> Result<JunctionTree> {
    JunctionTree::new(g)
}

/// Edge toggles that keep a decomposable graph decomposable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeMoves {
    pub additions: Vec<(usize, usize)>,
    pub deletions: Vec<(usize, usize)>,
}

/// Whether adding the non-edge `(u, v)` keeps the chordal graph `g` chordal.
///
/// This holds iff the common neighbourhood of `u` and `v` separates them;
/// otherwise a shortest path avoiding it closes a chordless cycle.
pub fn is_legal_addition(g: &Graph, u: usize, v: usize) -> bool {
    debug_assert!(u != v && !g.has_edge(u, v));
    let words = g.words();
    let (ru, rv) = (g.row(u), g.row(v));
    let mut blocked: Vec<u64> = ru.iter().zip(rv).map(|(a, b)| a & b).collect();
    set_bit(&mut blocked, u);
    let mut frontier = vec![0u64; words];
    set_bit(&mut frontier, u);
    let mut next = vec![0u64; words];
    loop {
        next.iter_mut().for_each(|w| *w = 0);
        for w in bits(&frontier) {
            for (n, r) in next.iter_mut().zip(g.row(w)) {
                *n |= r;
            }
        }
        for (n, b) in next.iter_mut().zip(&blocked) {
            *n &= !b;
        }
        if test_bit(&next, v) {
            return false;
        }
        if next.iter().all(|&w| w == 0) {
            return true;
        }
        for (b, n) in blocked.iter_mut().zip(&next) {
            *b |= n;
        }
        std::mem::swap(&mut frontier, &mut next);
    }
}

/// Whether deleting the edge `(u, v)` keeps the chordal graph `g` chordal,
/// i.e. the edge lies in exactly one maximal clique. Equivalently the common
/// neighbourhood of `u` and `v` is complete.
pub fn is_legal_deletion(g: &Graph, u: usize, v: usize) -> bool {
    debug_assert!(g.has_edge(u, v));
    let common: Vec<u64> = g.row(u).iter().zip(g.row(v)).map(|(a, b)| a & b).collect();
    let complete = bits(&common).all(|w| {
        let row = g.row(w);
        common.iter().zip(row).enumerate().all(|(k, (c, r))| {
            let mut c = *c;
            if w / 64 == k {
                c &= !(1u64 << (w % 64));
            }
            c & !r == 0
        })
    });
    complete
}

/// Legal additions and deletions for a decomposable graph, both in
/// lexicographic edge order. Deletions are the edges contained in exactly one
/// clique of `jt`.
pub fn legal_edge_moves(g: &Graph, jt: &JunctionTree) -> EdgeMoves {
    let p = g.num_vertices();
    let mut count = vec![0u32; p * p];
    for c in &jt.cliques {
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                count[i * p + j] += 1;
            }
        }
    }
    let deletions = g
        .edges()
        .into_iter()
        .filter(|&(i, j)| count[i * p + j] == 1)
        .collect();
    EdgeMoves {
        additions: legal_additions(g),
        deletions,
    }
}

/// All legal additions of a decomposable graph, lexicographically ordered.
pub fn legal_additions(g: &Graph) -> Vec<(usize, usize)> {
    let comp = g.components();
    g.non_edges()
        .into_iter()
        .filter(|&(i, j)| comp[i] != comp[j] || is_legal_addition(g, i, j))
        .collect()
}

/// All legal deletions of a decomposable graph, lexicographically ordered.
pub fn legal_deletions(g: &Graph) -> Vec<(usize, usize)> {
    g.edges()
        .into_iter()
        .filter(|&(i, j)| is_legal_deletion(g, i, j))
        .collect()
}

/// Greedy minimum-fill triangulation with lowest-index tie-breaking.
pub fn min_fill_triangulation(g: &Graph) -> Graph {
    min_fill_with(g, |_| 0)
}

/// Greedy minimum-fill triangulation with random tie-breaking among the
/// vertices of minimum fill.
pub fn min_fill_triangulation_random<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Graph {
    min_fill_with(g, |n| rng.random_range(0..n))
}

fn min_fill_with(g: &Graph, mut pick: impl FnMut(usize) -> usize) -> Graph {
    let p = g.num_vertices();
    let words = words_for(p);
    let mut work = g.clone();
    let mut out = g.clone();
    let mut alive = vec![0u64; words];
    for v in 0..p {
        set_bit(&mut alive, v);
    }
    let mut nbrs = vec![0u64; words];
    let mut tied = Vec::with_capacity(p);
    for _ in 0..p {
        let mut best = usize::MAX;
        tied.clear();
        for v in bits(&alive) {
            // Each missing pair among live neighbours is counted twice.
            for (n, (r, a)) in nbrs.iter_mut().zip(work.row(v).iter().zip(&alive)) {
                *n = r & a;
            }
            let mut twice = 0;
            for a in bits(&nbrs) {
                let ra = work.row(a);
                twice += nbrs
                    .iter()
                    .zip(ra)
                    .map(|(n, r)| (n & !r).count_ones() as usize)
                    .sum::<usize>()
                    - 1;
            }
            let fill = twice / 2;
            if fill < best {
                best = fill;
                tied.clear();
            }
            if fill == best {
                tied.push(v);
            }
        }
        let v = tied[if tied.len() > 1 { pick(tied.len()) } else { 0 }];
        for (n, (r, a)) in nbrs.iter_mut().zip(work.row(v).iter().zip(&alive)) {
            *n = r & a;
        }
        let live: Vec<usize> = bits(&nbrs).collect();
        for (x, &a) in live.iter().enumerate() {
            for &b in &live[x + 1..] {
                work.add_edge(a, b);
                out.add_edge(a, b);
            }
        }
        clear_bit(&mut alive, v);
    }
    out
}

/// Greedy decomposable subgraph: edges are deleted in increasing `score`
/// order (ties lexicographic) until the graph is chordal, then deleted edges
/// are re-added in decreasing score order whenever that keeps it chordal.
pub fn max_decomposable_subgraph(g: &Graph, score: impl Fn(usize, usize) -> f64) -> Graph {
    max_subgraph_with(g, score, |_| {})
}

/// As [`max_decomposable_subgraph`] with ties in score broken at random.
pub fn max_decomposable_subgraph_random<R: Rng + ?Sized>(
    g: &Graph,
    score: impl Fn(usize, usize) -> f64,
    rng: &mut R,
) -> Graph {
    max_subgraph_with(g, score, |edges| {
        use rand::seq::SliceRandom;
        edges.shuffle(rng);
    })
}

fn max_subgraph_with(
    g: &Graph,
    score: impl Fn(usize, usize) -> f64,
    pre_shuffle: impl FnOnce(&mut Vec<(usize, usize)>),
) -> Graph {
    if is_decomposable(g) {
        return g.clone();
    }
    let mut edges = g.edges();
    pre_shuffle(&mut edges);
    // Stable sort keeps the pre-shuffled (or lexicographic) order on ties.
    edges.sort_by(|a, b| score(a.0, a.1).total_cmp(&score(b.0, b.1)));

    let mut h = g.clone();
    let mut removed = Vec::new();
    for &(i, j) in &edges {
        if is_decomposable(&h) {
            break;
        }
        h.remove_edge(i, j);
        removed.push((i, j));
    }
    removed.reverse();
    loop {
        let mut changed = false;
        removed.retain(|&(i, j)| {
            if is_legal_addition(&h, i, j) {
                h.add_edge(i, j);
                changed = true;
                false
            } else {
                true
            }
        });
        if !changed {
            break;
        }
    }
    h
}

/// All decomposable graphs on `p <= 6` vertices, in edge-mask order.
pub fn enumerate_decomposable(p: usize) -> Result<Vec<Graph>> {
    if p > 6 {
        return Err(Error::TooLarge(p));
    }
    let m = p * p.saturating_sub(1) / 2;
    Ok((0u64..1 << m)
        .map(|mask| Graph::from_mask(p, mask))
        .filter(is_decomposable)
        .collect())
}
