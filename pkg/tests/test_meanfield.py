import math

import pytest

from oracles import clique_roots_by_scan, tree_bias_from_root, tree_root_by_scan
from spectral_ising.gadget import f_alpha
from spectral_ising.meanfield import (
    mean_field_residual,
    solve_clique_fixed_points,
    solve_tree_fixed_points,
    thresholds,
    tree_map,
    tree_threshold,
)

# q+ values frozen from a 10^6-point sign-change scan of the mean-field residual
CLIQUE_Q_PLUS = {
    1.01: 0.58583088964,
    1.1: 0.75147028747,
    1.25: 0.85520589174,
    1.5: 0.92927981832,
    2.0: 0.97875201204,
    5.0: 0.99995456086,
}
# tree biases frozen from a grid scan of x - f(x) on (1, e^{4 beta}) followed by bisection
TREE_D3 = {1.2: (98.45390772, 0.99897739897), 1.0: (None, 0.9958785016)}


@pytest.mark.parametrize("beta", [0.5, 0.99, 1.01, 1.1, 1.5, 2, 5])
def test_clique_roots_match_grid_scan(beta):
    sol = solve_clique_fixed_points(beta)
    scan = clique_roots_by_scan(beta)
    assert len(sol.roots) == len(scan)
    for a, b in zip(sol.roots, scan):
        assert a == pytest.approx(b, abs=1e-6)
    for z in sol.roots:
        assert abs(mean_field_residual(beta, z)) < 1e-10


@pytest.mark.parametrize("beta,q", sorted(CLIQUE_Q_PLUS.items()))
def test_clique_q_plus_anchor(beta, q):
    sol = solve_clique_fixed_points(beta)
    assert sol.q_plus == pytest.approx(q, abs=1e-10)
    assert (sol.q_plus - 0.5) - (0.5 - sol.q_minus) == pytest.approx(0, abs=1e-12)


def test_clique_subcritical_and_errors():
    sol = solve_clique_fixed_points(0.5)
    assert sol.roots == (0.5,) and sol.q_plus is None
    with pytest.raises(ValueError):
        solve_clique_fixed_points(0.0)


def test_near_critical_flag():
    assert solve_clique_fixed_points(1 + 1e-9).near_critical
    assert not solve_clique_fixed_points(1.5).near_critical


@pytest.mark.parametrize("beta", [1.1, 1.5, 2, 5])
def test_q_plus_beats_half_in_f(beta):
    q = solve_clique_fixed_points(beta).q_plus
    assert f_alpha(beta, q) > f_alpha(beta, 0.5)


def test_tree_fixed_point_anchor_and_oracle():
    fp = solve_tree_fixed_points(3, 1.2)
    x = tree_root_by_scan(3, 1.2)
    assert fp.tilde_q_plus == pytest.approx(x, rel=1e-10)
    assert fp.tilde_q_plus == pytest.approx(TREE_D3[1.2][0], abs=1e-7)
    assert fp.q_plus == pytest.approx(TREE_D3[1.2][1], abs=1e-10)
    assert fp.q_plus == pytest.approx(tree_bias_from_root(1.2, x), abs=1e-12)
    assert solve_tree_fixed_points(3, 1.0).q_plus == pytest.approx(TREE_D3[1.0][1], abs=1e-9)


@pytest.mark.parametrize("d,beta", [(3, 0.6), (3, 1.2), (4, 0.4), (5, 1.0), (10, 0.2), (3, 3.0)])
def test_tree_invariants(d, beta):
    fp = solve_tree_fixed_points(d, beta)
    assert fp.tilde_q_plus > 1 > fp.tilde_q_minus > 0
    assert fp.tilde_q_minus == pytest.approx(1 / fp.tilde_q_plus, rel=1e-10)
    assert fp.q_minus == pytest.approx(1 - fp.q_plus, abs=1e-10)
    for x in (fp.tilde_q_plus, fp.tilde_q_minus):
        assert abs(x - tree_map(d, beta, x)) <= 1e-10 * max(1, x)


def test_tree_below_threshold_rejected():
    with pytest.raises(ValueError):
        solve_tree_fixed_points(3, tree_threshold(3))
    with pytest.raises(ValueError):
        solve_tree_fixed_points(2, 1.0)


def test_threshold_constants():
    c = thresholds(4)
    assert c.beta_d == pytest.approx(0.5 * math.log(2), abs=1e-15)
    assert c.lambda_d == pytest.approx(4 + 2 * math.sqrt(3), abs=1e-15)
    assert c.theorem2_threshold == pytest.approx(0.5 * math.log(3) * (3 + 2 * math.sqrt(2)), abs=1e-14)
    assert c.theorem2_threshold == pytest.approx(3.20155, abs=1e-4)
    assert thresholds(3).theorem2_threshold is None
    with pytest.raises(ValueError):
        thresholds(2)


def test_threshold_tends_to_one():
    vals = [thresholds(d).theorem2_threshold for d in (10 ** 3, 10 ** 4, 10 ** 5)]
    assert vals[0] > vals[1] > vals[2] > 1
    assert vals[2] - 1 < 0.02
    seq = [thresholds(d).theorem2_threshold for d in range(4, 60)]
    assert all(a > b for a, b in zip(seq, seq[1:]))
