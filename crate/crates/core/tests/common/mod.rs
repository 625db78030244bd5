#![allow(dead_code)]

use lossgraph::chordal::min_fill_triangulation;
use lossgraph::{DataMatrix, Graph};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_graph<R: Rng>(p: usize, density: f64, rng: &mut R) -> Graph {
    let mut g = Graph::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            if rng.random_bool(density) {
                g.add_edge(i, j);
            }
        }
    }
    g
}

pub fn random_decomposable<R: Rng>(p: usize, rng: &mut R) -> Graph {
    let d = rng.random_range(0.05..0.6);
    min_fill_triangulation(&random_graph(p, d, rng))
}

/// A well-conditioned random covariance matrix.
pub fn random_spd<R: Rng>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(p, p + 2, |_, _| StandardNormal.sample(rng));
    let mut s = &a * a.transpose() / (p as f64 + 2.0);
    for i in 0..p {
        s[(i, i)] += 0.3;
    }
    s
}

pub fn gaussian_data<R: Rng>(n: usize, p: usize, rng: &mut R) -> DataMatrix {
    let mix = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rng.random_range(-0.4..0.4) });
    let z = DMatrix::<f64>::from_fn(n, p, |_, _| StandardNormal.sample(rng));
    DataMatrix::new(z * mix)
}

/// True iff some cycle of length at least 4 has no chord, by enumerating
/// simple cycles directly.
pub fn has_chordless_cycle(g: &Graph) -> bool {
    let p = g.num_vertices();
    fn extend(g: &Graph, path: &mut Vec<usize>, found: &mut bool) {
        if *found {
            return;
        }
        let start = path[0];
        let last = *path.last().unwrap();
        for v in 0..g.num_vertices() {
            if !g.has_edge(last, v) || v < start {
                continue;
            }
            if v == start && path.len() >= 4 {
                let k = path.len();
                let chord = (0..k).any(|a| {
                    (a + 2..k).any(|b| !(a == 0 && b == k - 1) && g.has_edge(path[a], path[b]))
                });
                if !chord {
                    *found = true;
                    return;
                }
            }
            if v != start && !path.contains(&v) {
                path.push(v);
                extend(g, path, found);
                path.pop();
            }
        }
    }
    let mut found = false;
    for s in 0..p {
        extend(g, &mut vec![s], &mut found);
    }
    found
}
