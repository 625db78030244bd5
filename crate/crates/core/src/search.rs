//! Feature-inclusion stochastic search (FINCS) over decomposable graphs.
//!
//! The search is a guided walk rather than a Markov chain. Local moves toggle
//! one edge, favouring additions of edges with high estimated inclusion
//! probability and deletions of edges with low probability. Resampling moves
//! jump back to a stored graph chosen in proportion to its posterior weight.
//! Global moves rebuild a decomposable graph around the current median graph
//! and hill-climb from it. Every visited graph is scored and offered to a
//! bounded list of the best graphs seen, which in turn defines the inclusion
//! probabilities.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chordal::{
    is_decomposable, legal_additions, legal_deletions, max_decomposable_subgraph_random,
    min_fill_triangulation, min_fill_triangulation_random,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::likelihood::{DataMatrix, LikelihoodConfig, Scorer, SubsetCache};
use crate::prior::PriorSpec;

/// Search tuning. Iterations are numbered from 1; iteration `t` is a global
/// move when `t % global_period == 0`, otherwise a resampling move when
/// `t % resample_period == 0`, otherwise a local move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub iterations: usize,
    pub global_period: usize,
    pub resample_period: usize,
    pub capacity: usize,
    /// Local-move weights are clamped to `[eps, 1 - eps]`.
    pub inclusion_clamp: f64,
    pub seed: u64,
    /// Progress line to stderr every this many iterations; 0 disables.
    pub progress_period: usize,
    /// Memoise whole-graph scores by graph. Never changes results.
    pub memoize: bool,
}

pub const DESK_ITERATIONS: usize = 100_000;
pub const LONG_ITERATIONS: usize = 5_000_000;
/// Incrementally maintained inclusion sums are rebuilt this often.
pub const INCLUSION_REFRESH: usize = 10_000;

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            iterations: DESK_ITERATIONS,
            global_period: 50,
            resample_period: 10,
            capacity: 1000,
            inclusion_clamp: 0.01,
            seed: 0,
            progress_period: 0,
            memoize: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.global_period == 0 || self.resample_period == 0 {
            return Err(Error::Domain("move periods must be at least 1".into()));
        }
        if self.capacity == 0 {
            return Err(Error::Domain("list capacity must be at least 1".into()));
        }
        if !(self.inclusion_clamp > 0.0 && self.inclusion_clamp < 0.5) {
            return Err(Error::Domain(format!(
                "inclusion clamp must lie in (0, 0.5), got {}",
                self.inclusion_clamp
            )));
        }
        Ok(())
    }
}

/// Bounded list of distinct graphs with their log scores, best first.
#[derive(Debug, Clone)]
pub struct ScoredGraphList {
    capacity: usize,
    entries: Vec<(Graph, f64)>,
    members: HashSet<Graph>,
}

/// What happened to a graph offered to a [`ScoredGraphList`].
#[derive(Debug, Clone, PartialEq)]
pub enum Offer {
    Inserted { evicted: Option<(Graph, f64)> },
    Duplicate,
    Rejected,
}

impl ScoredGraphList {
    pub fn new(capacity: usize) -> Self {
        ScoredGraphList {
            capacity,
            entries: Vec::new(),
            members: HashSet::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by score, highest first.
    pub fn entries(&self) -> &[(Graph, f64)] {
        &self.entries
    }

    pub fn contains(&self, g: &Graph) -> bool {
        self.members.contains(g)
    }

    pub fn best(&self) -> Option<&(Graph, f64)> {
        self.entries.first()
    }

    pub fn max_score(&self) -> Option<f64> {
        self.entries.first().map(|e| e.1)
    }

    /// Inserts `g` unless it is already present or the list is full of
    /// better graphs. A full list evicts its lowest-scoring entry.
    ///
    /// Panics if `g` is not decomposable.
    pub fn offer(&mut self, g: &Graph, score: f64) -> Offer {
        if self.members.contains(g) {
            return Offer::Duplicate;
        }
        if !score.is_finite() {
            return Offer::Rejected;
        }
        if self.entries.len() == self.capacity && self.entries.last().is_some_and(|e| e.1 >= score) {
            return Offer::Rejected;
        }
        assert!(is_decomposable(g), "only decomposable graphs may enter the list");
        let at = self.entries.partition_point(|e| e.1 >= score);
        self.entries.insert(at, (g.clone(), score));
        self.members.insert(g.clone());
        let evicted = if self.entries.len() > self.capacity {
            let (old, s) = self.entries.pop().expect("list is non-empty");
            self.members.remove(&old);
            Some((old, s))
        } else {
            None
        };
        Offer::Inserted { evicted }
    }
}

/// Symmetric matrix of estimated edge inclusion probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionMatrix {
    p: usize,
    values: Vec<f64>,
}

impl InclusionMatrix {
    pub fn zeros(p: usize) -> Self {
        InclusionMatrix {
            p,
            values: vec![0.0; p * p],
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.p + j] = v;
        self.values[j * self.p + i] = v;
    }

    /// Rows of the full `p x p` matrix (diagonal zero).
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.p.max(1)).map(|r| r.to_vec()).collect()
    }

    /// Graph of edges with inclusion probability at least 0.5.
    pub fn median_graph(&self) -> Graph {
        self.threshold_graph(|q| q >= 0.5)
    }

    /// Graph of edges with inclusion probability strictly above 0.5.
    pub fn strict_median_graph(&self) -> Graph {
        self.threshold_graph(|q| q > 0.5)
    }

    fn threshold_graph(&self, keep: impl Fn(f64) -> bool) -> Graph {
        let mut g = Graph::empty(self.p);
        for i in 0..self.p {
            for j in i + 1..self.p {
                if keep(self.get(i, j)) {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }
}

/// Inclusion probabilities from `(graph, log score)` pairs, each graph
/// weighted by `exp(score - max score)`.
///
/// The entries are put in a canonical order first, so the result does not
/// depend on how they are listed. Duplicate graphs count once.
pub fn inclusion_from_entries(entries: &[(Graph, f64)]) -> Result<InclusionMatrix> {
    let Some(first) = entries.first() else {
        return Err(Error::EmptyList);
    };
    let p = first.0.num_vertices();
    let mut sorted: Vec<(Vec<(usize, usize)>, f64)> = Vec::with_capacity(entries.len());
    let mut seen = HashSet::new();
    for (g, s) in entries {
        if seen.insert(g) {
            sorted.push((g.edges(), *s));
        }
    }
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let max = sorted[0].1;
    let mut denom = 0.0;
    let mut numer = vec![0.0; p * p];
    for (edges, s) in &sorted {
        let w = (s - max).exp();
        denom += w;
        for &(i, j) in edges {
            numer[i * p + j] += w;
        }
    }
    let mut q = InclusionMatrix::zeros(p);
    for i in 0..p {
        for j in i + 1..p {
            q.set(i, j, (numer[i * p + j] / denom).clamp(0.0, 1.0));
        }
    }
    Ok(q)
}

/// Inclusion probabilities over the graphs in `list`.
pub fn update_inclusion(list: &ScoredGraphList) -> Result<InclusionMatrix> {
    inclusion_from_entries(list.entries())
}

/// Running weighted sums behind the inclusion matrix, updated as graphs enter
/// and leave the list.
#[derive(Debug, Clone)]
struct InclusionTracker {
    p: usize,
    reference: f64,
    denom: f64,
    numer: Vec<f64>,
}

impl InclusionTracker {
    fn new(p: usize) -> Self {
        InclusionTracker {
            p,
            reference: f64::NEG_INFINITY,
            denom: 0.0,
            numer: vec![0.0; p * p],
        }
    }

    fn rebuild(&mut self, list: &ScoredGraphList) {
        *self = InclusionTracker::new(self.p);
        for (g, s) in list.entries() {
            self.add(g, *s);
        }
    }

    fn add(&mut self, g: &Graph, score: f64) {
        if score > self.reference {
            let shrink = (self.reference - score).exp();
            self.denom *= shrink;
            self.numer.iter_mut().for_each(|v| *v *= shrink);
            self.reference = score;
        }
        let w = (score - self.reference).exp();
        self.denom += w;
        for (i, j) in g.edges() {
            self.numer[i * self.p + j] += w;
        }
    }

    fn remove(&mut self, g: &Graph, score: f64) {
        let w = (score - self.reference).exp();
        self.denom -= w;
        for (i, j) in g.edges() {
            self.numer[i * self.p + j] -= w;
        }
    }

    fn matrix(&self) -> InclusionMatrix {
        let mut q = InclusionMatrix::zeros(self.p);
        if self.denom > 0.0 {
            for i in 0..self.p {
                for j in i + 1..self.p {
                    q.set(i, j, (self.numer[i * self.p + j] / self.denom).clamp(0.0, 1.0));
                }
            }
        }
        q
    }
}

/// Starting graph: pairs whose sample correlation exceeds `2 / sqrt(n)` in
/// absolute value, triangulated by minimum fill.
pub fn initialize(data: &DataMatrix) -> Graph {
    let p = data.p();
    let r = data.correlation();
    let cut = 2.0 / (data.n() as f64).sqrt();
    let mut g = Graph::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            if r[(i, j)].abs() > cut {
                g.add_edge(i, j);
            }
        }
    }
    min_fill_triangulation(&g)
}

fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Toggles one edge of the decomposable graph `current`, keeping it
/// decomposable. Additions are drawn with weight `q_ij` and deletions with
/// weight `1 - q_ij`, both clamped to `[eps, 1 - eps]`.
pub fn local_move<R: Rng + ?Sized>(current: &Graph, q: &InclusionMatrix, eps: f64, rng: &mut R) -> Graph {
    let k = current.num_edges();
    let m = current.max_edges();
    if m == 0 {
        return current.clone();
    }
    let add = if k == 0 {
        true
    } else if k == m {
        false
    } else {
        rng.random_bool(0.5)
    };
    let (candidates, weights): (Vec<(usize, usize)>, Vec<f64>) = if add {
        legal_additions(current)
            .into_iter()
            .map(|(i, j)| ((i, j), q.get(i, j).clamp(eps, 1.0 - eps)))
            .unzip()
    } else {
        legal_deletions(current)
            .into_iter()
            .map(|(i, j)| ((i, j), (1.0 - q.get(i, j)).clamp(eps, 1.0 - eps)))
            .unzip()
    };
    let (i, j) = candidates[sample_weighted(&weights, rng)];
    current.toggled(i, j)
}

/// Draws a graph from the list with probability proportional to
/// `exp(score - max score)`.
pub fn resample_move<R: Rng + ?Sized>(list: &ScoredGraphList, rng: &mut R) -> Result<Graph> {
    let max = list.max_score().ok_or(Error::EmptyList)?;
    let weights: Vec<f64> = list.entries().iter().map(|e| (e.1 - max).exp()).collect();
    Ok(list.entries()[sample_weighted(&weights, rng)].0.clone())
}

/// Best-improvement hill climb over legal single-edge toggles, ties broken by
/// lexicographic edge order, for at most `m` steps. Returns every graph on
/// the path after the start, with its score, and the final graph.
pub fn hill_climb(
    start: &Graph,
    start_score: f64,
    scorer: &Scorer,
    prior: &PriorSpec,
) -> Result<(Graph, f64, Vec<Graph>)> {
    let mut g = start.clone();
    let mut score = start_score;
    let mut path = Vec::new();
    for _ in 0..g.max_edges() {
        let k = g.num_edges();
        let base_prior = prior.log_prior_size(k);
        let mut moves = legal_additions(&g);
        moves.extend(legal_deletions(&g));
        moves.sort_unstable();
        let mut best: Option<((usize, usize), f64)> = None;
        for (i, j) in moves {
            let new_k = if g.has_edge(i, j) { k - 1 } else { k + 1 };
            let Ok(delta) = scorer.toggle_delta(&g, i, j) else {
                continue;
            };
            let gain = delta + prior.log_prior_size(new_k) - base_prior;
            if gain > 0.0 && best.is_none_or(|(_, b)| gain > b) {
                best = Some(((i, j), gain));
            }
        }
        let Some(((i, j), gain)) = best else { break };
        g.toggle(i, j);
        score += gain;
        path.push(g.clone());
    }
    Ok((g, score, path))
}

/// Counters and traces from a search run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub iterations: usize,
    pub local_moves: usize,
    pub resample_moves: usize,
    pub global_moves: usize,
    /// Distinct graphs whose score was computed.
    pub graphs_scored: usize,
    /// `(iteration, best score)` each time the best score improved.
    pub best_history: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub list: ScoredGraphList,
    pub inclusion: InclusionMatrix,
    pub median_graph: Graph,
    pub stats: SearchStats,
}

struct Fincs<'a> {
    scorer: Scorer,
    prior: &'a PriorSpec,
    cfg: &'a SearchConfig,
    memo: HashMap<Graph, f64>,
    scored: HashSet<Graph>,
    list: ScoredGraphList,
    tracker: InclusionTracker,
    stats: SearchStats,
}

impl Fincs<'_> {
    fn score(&mut self, g: &Graph) -> f64 {
        if self.cfg.memoize {
            if let Some(&s) = self.memo.get(g) {
                return s;
            }
        }
        // Graphs whose clique submatrices are singular cannot be scored.
        let s = self.scorer.log_score(g, self.prior).unwrap_or(f64::NEG_INFINITY);
        if self.cfg.memoize {
            self.memo.insert(g.clone(), s);
        }
        if self.scored.insert(g.clone()) {
            self.stats.graphs_scored += 1;
        }
        s
    }

    /// Scores `g` and offers it to the list, keeping the tracker in sync.
    fn visit(&mut self, g: &Graph, iteration: usize) -> f64 {
        let s = self.score(g);
        let previous_best = self.list.max_score();
        if let Offer::Inserted { evicted } = self.list.offer(g, s) {
            self.tracker.add(g, s);
            if let Some((old, old_s)) = evicted {
                self.tracker.remove(&old, old_s);
            }
            if previous_best.is_none_or(|b| s > b) {
                self.stats.best_history.push((iteration, s));
            }
        }
        s
    }

    fn global_move(&mut self, rng: &mut ChaCha8Rng, iteration: usize) -> Result<Graph> {
        let q = self.tracker.matrix();
        let (graph, visited) = global_move_with(&q, &self.scorer, self.prior, rng, |g| self.memo.get(g).copied())?;
        for g in &visited {
            self.visit(g, iteration);
        }
        Ok(graph)
    }
}

/// Global move: form the median graph of edges with `q_ij > 0.5`, bracket it
/// by a random minimum-fill triangulation and a greedy decomposable subgraph
/// (lowest `q_ij` removed first), pick one of the pair with probability
/// proportional to its posterior weight, then hill-climb.
///
/// Returns the final graph and all graphs visited on the way.
pub fn global_move<R: Rng + ?Sized>(
    q: &InclusionMatrix,
    scorer: &Scorer,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<(Graph, Vec<Graph>)> {
    global_move_with(q, scorer, prior, rng, |_| None)
}

fn global_move_with<R: Rng + ?Sized>(
    q: &InclusionMatrix,
    scorer: &Scorer,
    prior: &PriorSpec,
    rng: &mut R,
    known: impl Fn(&Graph) -> Option<f64>,
) -> Result<(Graph, Vec<Graph>)> {
    let score_of = |g: &Graph| -> f64 {
        known(g).unwrap_or_else(|| scorer.log_score(g, prior).unwrap_or(f64::NEG_INFINITY))
    };
    let median = q.strict_median_graph();
    let mut visited = Vec::new();
    let (start, start_score) = if is_decomposable(&median) {
        let s = score_of(&median);
        (median, s)
    } else {
        let plus = min_fill_triangulation_random(&median, rng);
        let minus = max_decomposable_subgraph_random(&median, |i, j| q.get(i, j), rng);
        let (sp, sm) = (score_of(&plus), score_of(&minus));
        visited.push(plus.clone());
        visited.push(minus.clone());
        // P(plus) = 1 / (1 + exp(sm - sp)).
        let take_plus = if sp.is_finite() || sm.is_finite() {
            let p_plus = if sm == f64::NEG_INFINITY {
                1.0
            } else {
                1.0 / (1.0 + (sm - sp).exp())
            };
            rng.random::<f64>() < p_plus
        } else {
            true
        };
        if take_plus {
            (plus, sp)
        } else {
            (minus, sm)
        }
    };
    if !start_score.is_finite() {
        visited.push(start.clone());
        return Ok((start, visited));
    }
    let (end, _, path) = hill_climb(&start, start_score, scorer, prior)?;
    if path.is_empty() {
        visited.push(start);
    }
    visited.extend(path);
    Ok((end, visited))
}

/// Runs FINCS and returns the list of best graphs, the inclusion
/// probabilities recomputed exactly from that list, and the median graph
/// (edges with inclusion probability at least 0.5).
pub fn run_fincs(
    data: Arc<DataMatrix>,
    prior: &PriorSpec,
    likelihood: &LikelihoodConfig,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    run_fincs_with_cache(data, prior, likelihood, cfg, Arc::new(SubsetCache::new()))
}

/// As [`run_fincs`], sharing a subset-factor cache with other runs on the
/// same data and fraction.
pub fn run_fincs_with_cache(
    data: Arc<DataMatrix>,
    prior: &PriorSpec,
    likelihood: &LikelihoodConfig,
    cfg: &SearchConfig,
    cache: Arc<SubsetCache>,
) -> Result<SearchResult> {
    cfg.validate()?;
    let p = data.p();
    if prior.m != p * p.saturating_sub(1) / 2 {
        return Err(Error::Dimension(format!(
            "prior defined for m = {} but data has {p} variables",
            prior.m
        )));
    }
    let scorer = Scorer::with_cache(data.clone(), likelihood, cache)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut run = Fincs {
        scorer,
        prior,
        cfg,
        memo: HashMap::new(),
        scored: HashSet::new(),
        list: ScoredGraphList::new(cfg.capacity),
        tracker: InclusionTracker::new(p),
        stats: SearchStats::default(),
    };

    let mut current = initialize(&data);
    run.visit(&current, 0);

    for t in 1..=cfg.iterations {
        if t % cfg.global_period == 0 {
            current = run.global_move(&mut rng, t)?;
            run.stats.global_moves += 1;
        } else if t % cfg.resample_period == 0 {
            current = resample_move(&run.list, &mut rng)?;
            run.stats.resample_moves += 1;
        } else {
            let q = run.tracker.matrix();
            current = local_move(&current, &q, cfg.inclusion_clamp, &mut rng);
            run.visit(&current, t);
            run.stats.local_moves += 1;
        }
        if t % INCLUSION_REFRESH == 0 {
            run.tracker.rebuild(&run.list);
        }
        if cfg.progress_period > 0 && t % cfg.progress_period == 0 {
            eprintln!(
                "iteration {t}: best log score {:.6}, {} graphs in list",
                run.list.max_score().unwrap_or(f64::NAN),
                run.list.len()
            );
        }
    }
    run.stats.iterations = cfg.iterations;

    let inclusion = update_inclusion(&run.list)?;
    let median_graph = inclusion.median_graph();
    Ok(SearchResult {
        list: run.list,
        inclusion,
        median_graph,
        stats: run.stats,
    })
}

/// Exact posterior over every decomposable graph on the data's vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPosterior {
    /// `(graph, log score, posterior probability)`, best first.
    pub graphs: Vec<(Graph, f64, f64)>,
    pub inclusion: InclusionMatrix,
}

impl ExactPosterior {
    pub fn map_graph(&self) -> &Graph {
        &self.graphs[0].0
    }
}

/// Scores all decomposable graphs; limited to six vertices. Graphs whose
/// clique submatrices are not positive definite get probability zero.
pub fn enumerate_posterior(
    data: Arc<DataMatrix>,
    prior: &PriorSpec,
    likelihood: &LikelihoodConfig,
) -> Result<ExactPosterior> {
    let graphs = crate::chordal::enumerate_decomposable(data.p())?;
    let scorer = Scorer::new(data, likelihood)?;
    let mut scored = Vec::with_capacity(graphs.len());
    for g in graphs {
        let s = match scorer.log_score(&g, prior) {
            Err(Error::NotPd { .. }) => f64::NEG_INFINITY,
            other => other?,
        };
        scored.push((g, s));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.edges().cmp(&b.0.edges())));
    let inclusion = inclusion_from_entries(&scored)?;
    let max = scored[0].1;
    let total: f64 = scored.iter().map(|(_, s)| (s - max).exp()).sum();
    let graphs = scored
        .into_iter()
        .map(|(g, s)| {
            let prob = (s - max).exp() / total;
            (g, s, prob)
        })
        .collect();
    Ok(ExactPosterior { graphs, inclusion })
}
