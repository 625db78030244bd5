mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_abs_diff_eq;
use lossgraph::chordal::{is_decomposable, legal_additions, legal_deletions, JunctionTree};
use lossgraph::likelihood::log_hiw_norm_const;
use lossgraph::{junction_tree, log_marginal_likelihood, log_posterior_score, DataMatrix, Graph, LikelihoodConfig, PriorSpec, PriorVariant, Scorer};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use common::{gaussian_data, random_decomposable};

fn mvgamma(a: usize, x: f64) -> f64 {
    let a = a as f64;
    a * (a - 1.0) / 4.0 * PI.ln() + (0..a as usize).map(|j| ln_gamma(x - j as f64 / 2.0)).sum::<f64>()
}

fn sub(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Log marginal of the columns `idx` under the complete graph, straight from
/// the single-clique formula with LU determinants.
fn complete_marginal(data: &DataMatrix, idx: &[usize], g: f64) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let n = data.n() as f64;
    let a = idx.len();
    let s = sub(data.gram(), idx);
    let log_h = |b: f64, d: &DMatrix<f64>| {
        let shape = (b + a as f64 - 1.0) / 2.0;
        shape * (d / 2.0).determinant().ln() - mvgamma(a, shape)
    };
    -(n * a as f64) / 2.0 * (2.0 * PI).ln() + log_h(g * n, &(&s * g)) - log_h(n, &s)
}

#[test]
fn factorisation_over_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = LikelihoodConfig::default();
    for t in 0..200 {
        let p = 1 + t % 8;
        let data = gaussian_data(50, p, &mut rng);
        let g = random_decomposable(p, &mut rng);
        let jt = junction_tree(&g).unwrap();
        let ratio: f64 = jt.cliques.iter().map(|c| complete_marginal(&data, c, 1.0 / 50.0)).sum::<f64>()
            - jt.separators.iter().map(|s| complete_marginal(&data, s, 1.0 / 50.0)).sum::<f64>();
        let direct = log_marginal_likelihood(&data, &g, &cfg).unwrap();
        assert_abs_diff_eq!(direct, ratio, epsilon = 1e-8);
    }
}

#[test]
fn norm_const_ordering_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for t in 0..200 {
        let p = 1 + t % 8;
        let data = gaussian_data(50, p, &mut rng);
        let g = random_decomposable(p, &mut rng);
        let base = log_hiw_norm_const(&junction_tree(&g).unwrap(), 50.0, data.gram()).unwrap();
        for _ in 0..3 {
            let jt = JunctionTree::new_random(&g, &mut rng).unwrap();
            assert_abs_diff_eq!(log_hiw_norm_const(&jt, 50.0, data.gram()).unwrap(), base, epsilon = 1e-10);
        }
    }
}

#[test]
fn single_vertex_closed_form() {
    let jt = junction_tree(&Graph::empty(1)).unwrap();
    let d = DMatrix::from_element(1, 1, 2.0);
    assert_abs_diff_eq!(log_hiw_norm_const(&jt, 2.0, &d).unwrap(), 0.0, epsilon = 1e-15);
}

#[test]
fn complete_graph_is_one_clique() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = gaussian_data(30, 5, &mut rng);
    let all: Vec<usize> = (0..5).collect();
    let got = log_marginal_likelihood(&data, &Graph::complete(5), &LikelihoodConfig::default()).unwrap();
    assert_abs_diff_eq!(got, complete_marginal(&data, &all, 1.0 / 30.0), epsilon = 1e-9);
}

#[test]
fn explicit_fraction_matches_default() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = gaussian_data(40, 4, &mut rng);
    let g = Graph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
    let a = log_marginal_likelihood(&data, &g, &LikelihoodConfig::default()).unwrap();
    let b = log_marginal_likelihood(&data, &g, &LikelihoodConfig { g: Some(1.0 / 40.0) }).unwrap();
    assert_eq!(a, b);
    let c = log_marginal_likelihood(&data, &g, &LikelihoodConfig { g: Some(0.2) }).unwrap();
    let all = [0usize, 1, 2];
    let want = complete_marginal(&data, &all[..2], 0.2) + complete_marginal(&data, &all[1..], 0.2)
        - complete_marginal(&data, &[1], 0.2)
        + complete_marginal(&data, &[3], 0.2);
    assert_abs_diff_eq!(c, want, epsilon = 1e-9);
}

#[test]
fn errors_surface() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = gaussian_data(20, 4, &mut rng);
    let c4 = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
    let cfg = LikelihoodConfig::default();
    assert!(matches!(log_marginal_likelihood(&data, &c4, &cfg), Err(lossgraph::Error::NotDecomposable)));
    assert!(matches!(log_marginal_likelihood(&data, &Graph::empty(3), &cfg), Err(lossgraph::Error::Dimension(_))));
    // Three observations cannot support a four-vertex clique.
    let small = gaussian_data(3, 4, &mut rng);
    assert!(matches!(
        log_marginal_likelihood(&small, &Graph::complete(4), &cfg),
        Err(lossgraph::Error::NotPd { .. })
    ));
}

#[test]
fn posterior_adds_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data = gaussian_data(25, 4, &mut rng);
    let g = Graph::from_edges(4, [(0, 1)]).unwrap();
    let prior = PriorSpec::for_vertices(PriorVariant::CarvalhoScott, 4).unwrap();
    let cfg = LikelihoodConfig::default();
    let got = log_posterior_score(&data, &g, &prior, &cfg).unwrap();
    assert_abs_diff_eq!(got, log_marginal_likelihood(&data, &g, &cfg).unwrap() - 6f64.ln(), epsilon = 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scorer_agrees_with_direct(seed in any::<u64>(), p in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Arc::new(gaussian_data(60, p, &mut rng));
        let cfg = LikelihoodConfig::default();
        let scorer = Scorer::new(data.clone(), &cfg).unwrap();
        let g = random_decomposable(p, &mut rng);
        let direct = log_marginal_likelihood(&data, &g, &cfg).unwrap();
        let cached = scorer.log_marginal(&g).unwrap();
        prop_assert!((direct - cached).abs() < 1e-8 * direct.abs().max(1.0));
    }

    #[test]
    fn toggle_delta_is_score_difference(seed in any::<u64>(), p in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Arc::new(gaussian_data(60, p, &mut rng));
        let scorer = Scorer::new(data, &LikelihoodConfig::default()).unwrap();
        let g = random_decomposable(p, &mut rng);
        let base = scorer.log_marginal(&g).unwrap();
        let mut moves = legal_additions(&g);
        moves.extend(legal_deletions(&g));
        for (i, j) in moves {
            let h = g.toggled(i, j);
            prop_assert!(is_decomposable(&h));
            let want = scorer.log_marginal(&h).unwrap() - base;
            let got = scorer.toggle_delta(&g, i, j).unwrap();
            prop_assert!((want - got).abs() < 1e-8, "({},{}) {} vs {}", i, j, want, got);
        }
    }

    #[test]
    fn marginal_is_finite_and_relabeling_invariant(seed in any::<u64>(), p in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = gaussian_data(50, p, &mut rng);
        let g = random_decomposable(p, &mut rng);
        let cfg = LikelihoodConfig::default();
        let a = log_marginal_likelihood(&data, &g, &cfg).unwrap();
        prop_assert!(a.is_finite());
        // Reverse the column order and the vertex labels together.
        let rev: Vec<usize> = (0..p).rev().collect();
        let data_r = data.select_columns(&rev);
        let b = log_marginal_likelihood(&data_r, &g.permuted(&rev), &cfg).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
    }
}
