mod common;

use lossgraph::chordal::{
    enumerate_decomposable, is_decomposable, junction_tree, legal_edge_moves, max_decomposable_subgraph,
    min_fill_triangulation, JunctionTree,
};
use lossgraph::Graph;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{has_chordless_cycle, random_decomposable, random_graph};

#[test]
fn all_graphs_on_four_vertices_match_cycle_oracle() {
    let mut chordal = 0;
    for mask in 0..64u64 {
        let g = Graph::from_mask(4, mask);
        assert_eq!(is_decomposable(&g), !has_chordless_cycle(&g), "{g:?}");
        chordal += usize::from(is_decomposable(&g));
    }
    // 64 graphs minus the three labelled 4-cycles.
    assert_eq!(chordal, 61);
}

#[test]
fn five_vertex_graphs_match_cycle_oracle() {
    for mask in 0..1024u64 {
        let g = Graph::from_mask(5, mask);
        assert_eq!(is_decomposable(&g), !has_chordless_cycle(&g), "{g:?}");
    }
}

#[test]
fn decomposable_counts() {
    // Labelled chordal graphs on n vertices: 1, 2, 8, 61, 822.
    for (p, want) in [(1, 1), (2, 2), (3, 8), (4, 61), (5, 822)] {
        assert_eq!(enumerate_decomposable(p).unwrap().len(), want);
    }
    assert!(enumerate_decomposable(7).is_err());
}

#[test]
fn exhaustive_toggle_oracle_p5() {
    for g in enumerate_decomposable(5).unwrap() {
        let jt = junction_tree(&g).unwrap();
        let moves = legal_edge_moves(&g, &jt);
        for i in 0..5 {
            for j in i + 1..5 {
                let ok = is_decomposable(&g.toggled(i, j));
                let listed = if g.has_edge(i, j) {
                    moves.deletions.contains(&(i, j))
                } else {
                    moves.additions.contains(&(i, j))
                };
                assert_eq!(ok, listed, "{g:?} toggle ({i},{j})");
            }
        }
    }
}

#[test]
fn trivial_move_sets() {
    let k3 = Graph::complete(3);
    let m = legal_edge_moves(&k3, &junction_tree(&k3).unwrap());
    assert_eq!(m.deletions.len(), 3);
    assert!(m.additions.is_empty());
    let e4 = Graph::empty(4);
    let m = legal_edge_moves(&e4, &junction_tree(&e4).unwrap());
    assert_eq!(m.additions.len(), 6);
    assert!(m.deletions.is_empty());
}

#[test]
fn path_and_complete_junction_trees() {
    let path = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let jt = junction_tree(&path).unwrap();
    let mut cl = jt.cliques.clone();
    cl.sort();
    assert_eq!(cl, vec![vec![0, 1], vec![1, 2]]);
    assert_eq!(jt.separators, vec![vec![1]]);
    let k5 = junction_tree(&Graph::complete(5)).unwrap();
    assert_eq!(k5.cliques, vec![vec![0, 1, 2, 3, 4]]);
    assert!(k5.separators.is_empty());
}

#[test]
fn four_cycle_repairs() {
    let c4 = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
    assert!(junction_tree(&c4).is_err());
    let plus = min_fill_triangulation(&c4);
    assert_eq!(plus.num_edges(), 5);
    assert!(c4.is_subgraph_of(&plus) && is_decomposable(&plus));
    let minus = max_decomposable_subgraph(&c4, |_, _| 0.5);
    assert_eq!(minus.num_edges(), 3);
    assert!(minus.is_subgraph_of(&c4) && is_decomposable(&minus));
}

fn check_tree(g: &Graph, jt: &JunctionTree) {
    let p = g.num_vertices();
    assert_eq!(jt.separators.len() + 1, jt.cliques.len());
    assert!(jt.has_running_intersection());
    let mut covered = vec![false; p];
    for c in &jt.cliques {
        assert!(g.is_complete_on(c));
        for v in 0..p {
            if !c.contains(&v) {
                let mut bigger = c.clone();
                bigger.push(v);
                assert!(!g.is_complete_on(&bigger), "clique {c:?} not maximal");
            }
        }
        for &v in c {
            covered[v] = true;
        }
    }
    assert!(covered.iter().all(|&c| c));
    let sc: usize = jt.cliques.iter().map(Vec::len).sum();
    let ss: usize = jt.separators.iter().map(Vec::len).sum();
    assert_eq!(sc - ss, p);
    for ((parent, child), sep) in jt.tree_edges.iter().zip(&jt.separators) {
        assert!(parent < child);
        let inter: Vec<usize> = jt.cliques[*child]
            .iter()
            .copied()
            .filter(|v| jt.cliques[*parent].contains(v))
            .collect();
        assert_eq!(&inter, sep);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn junction_trees_are_valid(seed in any::<u64>(), p in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_decomposable(p, &mut rng);
        check_tree(&g, &junction_tree(&g).unwrap());
        let jt = JunctionTree::new_random(&g, &mut rng).unwrap();
        check_tree(&g, &jt);
        prop_assert_eq!(jt.separator_multiset(), junction_tree(&g).unwrap().separator_multiset());
    }

    #[test]
    fn separators_invariant_under_relabeling(seed in any::<u64>(), p in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_decomposable(p, &mut rng);
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(&mut rng);
        let h = g.permuted(&perm);
        prop_assert!(is_decomposable(&h));
        let relabel = |seps: Vec<Vec<usize>>| {
            let mut out: Vec<Vec<usize>> = seps
                .into_iter()
                .map(|s| { let mut t: Vec<usize> = s.iter().map(|&v| perm[v]).collect(); t.sort(); t })
                .collect();
            out.sort();
            out
        };
        prop_assert_eq!(relabel(junction_tree(&g).unwrap().separator_multiset()),
                        junction_tree(&h).unwrap().separator_multiset());
    }

    #[test]
    fn triangulation_pair_brackets_input(seed in any::<u64>(), p in 2usize..9, d in 0.1f64..0.8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(p, d, &mut rng);
        let plus = min_fill_triangulation(&g);
        prop_assert!(is_decomposable(&plus) && g.is_subgraph_of(&plus));
        let minus = max_decomposable_subgraph(&g, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0);
        prop_assert!(is_decomposable(&minus) && minus.is_subgraph_of(&g));
        if is_decomposable(&g) {
            prop_assert_eq!(&plus, &g);
            prop_assert_eq!(&minus, &g);
        }
        // Greedy re-addition leaves no legal edge of g out.
        for (i, j) in g.edges() {
            if !minus.has_edge(i, j) {
                prop_assert!(!is_decomposable(&minus.toggled(i, j)));
            }
        }
    }

    #[test]
    fn legal_moves_match_toggle_test(seed in any::<u64>(), p in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_decomposable(p, &mut rng);
        let moves = legal_edge_moves(&g, &junction_tree(&g).unwrap());
        for i in 0..p {
            for j in i + 1..p {
                let listed = moves.additions.contains(&(i, j)) || moves.deletions.contains(&(i, j));
                prop_assert_eq!(listed, is_decomposable(&g.toggled(i, j)));
            }
        }
    }

    #[test]
    fn edge_list_round_trip(seed in any::<u64>(), p in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(p, 0.3, &mut rng);
        prop_assert_eq!(Graph::parse_edge_list(&g.to_edge_list(), None).unwrap(), g.clone());
        let json = serde_json::to_string(&g).unwrap();
        prop_assert_eq!(serde_json::from_str::<Graph>(&json).unwrap(), g);
    }
}
