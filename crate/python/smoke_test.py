"""Smoke test for the riswie_py extension module.

Build and run from the repository root:

    cargo build --release -p riswie-py --features extension-module
    cp target/release/libriswie_py.so python/riswie_py.so
    python3 python/smoke_test.py
"""

import math
import os
import random
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import riswie_py as rw  # noqa: E402


def gaussian(rng, n, stds):
    return [[rng.gauss(0.0, s) for s in stds] for _ in range(n)]


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return [[c, -s], [s, c]]


def main():
    rng = random.Random(0)
    x = rw.PointCloud(gaussian(rng, 300, [3.0, 1.0]), id="x")
    moved = x.transformed(rotation(0.7), [4.0, -2.0])

    r = rw.riswie_distance(x, moved)
    assert r.distance < 1e-8, r.distance
    assert sorted(r.permutation) == [0, 1]

    y = rw.PointCloud(gaussian(rng, 200, [2.0, 1.5]), id="y")
    hard = rw.riswie_distance(x, y, rw.EmbeddingConfig("pca"))
    soft, plan = rw.sriswie_distance(x, y, beta=1e6, eps=1e-4)
    assert abs(soft**2 - hard.squared) < 1e-3 * (x.total_variance() + y.total_variance())
    assert all(abs(sum(row) - 1.0) < 1e-8 for row in plan)

    _, t = rw.align(x, moved)
    assert abs(abs(t.determinant()) - 1.0) < 1e-9
    assert rw.boosted_distance(x, moved, base="nn") < 1e-8

    assert abs(rw.gaussian_closed_form([4.0, 1.0], [9.0, 1.0]) - math.sqrt(0.5)) < 1e-15
    g = rw.gw_bounds([4.0, 1.0], [9.0, 1.0])
    assert g["d2"] <= g["bound_ii"] and g["d2"] <= g["bound_i"]
    assert rw.stability_bound(1.0, 5.0) == 2.5

    clouds = [x, y, moved]
    d = rw.pairwise_matrix(clouds)
    assert d.ids == ["x", "y", "x"]
    assert d.get(0, 2) < 1e-8

    stacks, cost = rw.stack_assign(d, 1)
    assert stacks == [[0, 1, 2]]
    assert rw.match_accuracy([[0, 2], [1, 3]], ["a", "b", "a", "b"]) == 1.0

    frac, compared, _ = rw.ordering_agreement(d, d)
    assert frac == 1.0 and compared == 3
    h = rw.hybrid_matrix(d, d, 0.5)
    assert len(h) == 3

    rows = rw.bias_variance_experiment([2], [50, 150, 500], 4, [[4.0, 1.0]], [[9.0, 1.0]], 1)
    assert len(rows) == 3 and rows[0]["n"] == 50

    try:
        rw.riswie_distance(x, y, rw.EmbeddingConfig("pca", k=5))
    except rw.RiswieError as e:
        assert "k=5" in str(e)
    else:
        raise AssertionError("expected RiswieError")

    try:
        rw.sriswie_distance(x, y, max_iter=2, tol=1e-15)
    except rw.NoConvergenceError:
        pass
    else:
        raise AssertionError("expected NoConvergenceError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
