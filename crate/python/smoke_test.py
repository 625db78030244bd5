"""Smoke test for the pylossgraph extension module."""

import math
import random

import pylossgraph as lg


def main():
    path = lg.Graph(3, [(0, 1), (1, 2)])
    assert path.is_decomposable()
    cliques, seps = path.junction_tree()
    assert sorted(map(sorted, cliques)) == [[0, 1], [1, 2]] and seps == [[1]]

    cycle = lg.Graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert not cycle.is_decomposable()
    assert cycle.min_fill_triangulation().num_edges == 5

    prior = lg.Prior(15, "loss_based", h=0.28, c=0.11)
    mean, _ = prior.moments()
    assert abs(mean - 3.0) < 0.05, mean
    calibrated = lg.calibrate(15, 3.0)
    assert abs(calibrated.moments()[0] - 3.0) < 1e-4

    rng = random.Random(1)
    rows = []
    for _ in range(100):
        z = [rng.gauss(0, 1) for _ in range(4)]
        rows.append([z[0], z[0] + 0.5 * z[1], z[2], z[2] - z[3]])
    data = lg.Data(rows)
    uniform = lg.Prior(6, "uniform")
    post = lg.enumerate_posterior(data, uniform)
    assert abs(sum(p for _, _, p in post) - 1.0) < 1e-12
    top, inclusion, median = lg.run_fincs(data, uniform, seed=3, iterations=2000)
    assert top[0][0] == post[0][0]
    assert median.has_edge(0, 1) and median.has_edge(2, 3)
    assert math.isclose(top[0][1], lg.log_posterior_score(data, top[0][0], uniform), rel_tol=1e-12)

    curve = lg.run_kl_study("identity", seed=5, samples=200)
    assert [s for s, _, _ in curve] == [3, 5, 10]
    print("smoke test passed")


if __name__ == "__main__":
    main()
