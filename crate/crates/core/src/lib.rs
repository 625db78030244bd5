//! Bayesian structure learning for Gaussian graphical models over
//! decomposable graphs: graph priors penalising complexity, closed-form
//! hyper-inverse Wishart marginal likelihoods, feature-inclusion stochastic
//! search, and Kullback-Leibler projections.

pub mod chordal;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod likelihood;
pub mod linalg;
pub mod prior;
pub mod search;

pub use chordal::{is_decomposable, junction_tree, legal_edge_moves, EdgeMoves, JunctionTree};
pub use error::{Error, Result};
pub use graph::Graph;
pub use likelihood::{log_marginal_likelihood, log_posterior_score, DataMatrix, LikelihoodConfig, Scorer, SubsetCache};
pub use prior::{calibrate, PriorSpec, PriorVariant, SizeDistribution, SizeWeighting};
pub use search::{run_fincs, InclusionMatrix, ScoredGraphList, SearchConfig, SearchResult};
