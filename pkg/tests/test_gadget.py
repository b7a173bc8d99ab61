import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import clique_epsilon, clique_terminal_law, naive_log_z
from spectral_ising.core import brute_force_log_z
from spectral_ising.gadget import (
    CliqueGadget,
    RegularGadget,
    brute_force_phase_balance,
    brute_force_terminal_table,
    build_regular_gadget,
    exact_phase_masses,
    f_alpha,
    gadget_epsilon,
    locate_maxima,
    phase_of,
    product_measure_prob,
    product_measure_table,
    terminal_distribution,
    verify_regular_gadget,
    z_alpha_tau,
)
from spectral_ising.meanfield import solve_clique_fixed_points, solve_tree_fixed_points
from spectral_ising.core import logsumexp

# gadget_epsilon at beta = 1.5, t = 2, recorded after checking against the
# independent per-k summation in oracles.clique_epsilon
EPSILON_ANCHORS = {
    41: 0.2920011566,
    81: 0.0942026435,
    161: 0.0404364693,
    321: 0.0190796829,
    641: 0.0092893128,
}


def test_phase_of():
    assert phase_of(np.ones(5), []) == "+"
    s = np.array([1, -1, 1, 1, -1, 1])
    assert phase_of(s, [0]) != phase_of(-s, [0])
    assert phase_of([1, 1, -1, -1, -1], []) == "-"
    with pytest.raises(ValueError):
        phase_of(np.ones(4), [])


def test_clique_gadget_structure():
    g = CliqueGadget(9, 2, Fraction(3, 2))
    assert g.r == 7 and g.terminals == (0, 1)
    J = g.interaction()
    assert J.nnz == 9 * 10 // 2
    assert set(J.exact_weights) == {Fraction(3, 14)}
    with pytest.raises(ValueError):
        CliqueGadget(10, 2, 1.5)  # r even
    with pytest.raises(ValueError):
        CliqueGadget(9, 2, 0.9)


def test_z_alpha_tau_examples():
    g = CliqueGadget(7, 0, 1.5)
    assert z_alpha_tau(g, g.r, 0) == pytest.approx(1.5 / 2 * g.r, rel=1e-14)
    g = CliqueGadget(9, 2, 1.5)
    for k in range(g.r + 1):
        for s in (-2, 0, 2):
            assert z_alpha_tau(g, k, s) == pytest.approx(z_alpha_tau(g, g.r - k, -s), rel=1e-14)
    with pytest.raises(ValueError):
        z_alpha_tau(g, 0, 1)
    with pytest.raises(ValueError):
        z_alpha_tau(g, g.r + 1, 0)
    # sum over k and over all tau (multiplicity of each tau sum folded in) equals Z
    terms = [z_alpha_tau(g, k, s) + math.log(math.comb(2, (s + 2) // 2))
             for k in range(g.r + 1) for s in (-2, 0, 2)]
    assert logsumexp(terms) == pytest.approx(naive_log_z(g.interaction().dense()), rel=1e-12)


@pytest.mark.parametrize("n,t", [(5, 0), (9, 2), (12, 3), (18, 1)])
def test_clique_identity_sums_to_brute_force(n, t):
    g = CliqueGadget(n, t, 1.2)
    assert g.log_z() == pytest.approx(brute_force_log_z(g.interaction()).log_z, rel=1e-12)


def test_terminal_distribution_properties():
    g = CliqueGadget(14, 3, 1.5)
    plus, minus = terminal_distribution(g, "+"), terminal_distribution(g, "-")
    assert plus.probabilities.sum() == pytest.approx(1, abs=1e-12)
    full = (1 << g.t) - 1
    for code in range(1 << g.t):
        assert plus.probabilities[code] == pytest.approx(minus.probabilities[full ^ code], rel=1e-12)
    np.testing.assert_allclose(plus.probabilities, clique_terminal_law(14, 3, 1.5, "+"), rtol=1e-12)
    empty = terminal_distribution(CliqueGadget(7, 0, 1.5), "+")
    assert empty.probabilities.tolist() == [1.0]


def test_terminal_distribution_matches_brute_force():
    g = CliqueGadget(10, 3, 1.5)
    table = brute_force_terminal_table(g.interaction(), g.terminals)
    for phase in "+-":
        np.testing.assert_allclose(terminal_distribution(g, phase).probabilities, table[phase], rtol=1e-9)


def test_product_measure():
    assert product_measure_prob(0.5, [1, -1, 1]) == pytest.approx(1 / 8)
    assert product_measure_prob(0.8, [1, 1, 1]) == pytest.approx(0.8 ** 3)
    assert product_measure_prob(0.9, [1, -1]) == pytest.approx(0.09)
    assert product_measure_table(0.3, 4).sum() == pytest.approx(1, abs=1e-15)
    with pytest.raises(ValueError):
        product_measure_prob(1.0, [1])


def test_epsilon_anchor_values_and_oracle():
    q = solve_clique_fixed_points(1.5).q_plus
    for n, eps in EPSILON_ANCHORS.items():
        value = gadget_epsilon(CliqueGadget(n, 2, 1.5))
        assert value == pytest.approx(eps, abs=1e-9)
        if n <= 161:
            assert value == pytest.approx(clique_epsilon(n, 2, 1.5, q), rel=1e-8)


@pytest.mark.parametrize("beta", [1.2, 1.5, 2.0])
def test_epsilon_decreases_along_doubling(beta):
    ns = [41, 81, 161, 321]
    eps = [gadget_epsilon(CliqueGadget(n, 2, beta)) for n in ns]
    assert all(a > b for a, b in zip(eps, eps[1:]))


def test_exact_phase_balance_structural_and_brute_force():
    for n, t in [(9, 2), (11, 2), (12, 3), (16, 3)]:
        g = CliqueGadget(n, t, Fraction(3, 2))
        masses = exact_phase_masses(g)
        assert masses["+"].counts == masses["-"].counts
    g = CliqueGadget(11, 2, Fraction(3, 2))
    plus, minus = brute_force_phase_balance(g.interaction(), g.terminals)
    assert plus.counts == minus.counts


def test_f_alpha_and_maxima():
    assert f_alpha(1.5, 0.5) == pytest.approx(math.log(2))
    assert f_alpha(1.5, 0.0) == f_alpha(1.5, 1.0) == pytest.approx(0.75)
    for beta in (1.1, 1.5, 2, 5):
        lo, hi = locate_maxima(beta)
        sol = solve_clique_fixed_points(beta)
        assert hi == pytest.approx(sol.q_plus, abs=1e-8)
        assert lo == pytest.approx(sol.q_minus, abs=1e-8)
    grid = np.linspace(0.5, 1 - 1e-9, 1_000_000)
    fvals = [f_alpha(1.5, a) for a in grid[::1000]]
    coarse = grid[::1000][int(np.argmax(fvals))]
    assert coarse == pytest.approx(solve_clique_fixed_points(1.5).q_plus, abs=1e-3)
    with pytest.raises(ValueError):
        locate_maxima(1.0)


def test_f_alpha_grid_argmax_matches_root():
    # f is symmetric about 1/2; scan the upper half for the q+ maximizer
    grid = np.linspace(0.5, 1 - 1e-9, 1_000_000)
    h = -(grid * np.log(grid) + (1 - grid) * np.log(1 - grid))
    f = h + 0.75 * (2 * grid - 1) ** 2
    assert grid[np.argmax(f)] == pytest.approx(solve_clique_fixed_points(1.5).q_plus, abs=1e-6)


def test_regular_gadget_construction():
    g = build_regular_gadget(4, 3, seed=0, t=1)
    assert sorted(g.edges) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    with pytest.raises(ValueError):
        build_regular_gadget(5, 3, seed=0)
    g = build_regular_gadget(101, 4, seed=7, t=0)
    deg = np.bincount(np.array(g.edges).ravel(), minlength=101)
    assert np.all(deg == 4)
    assert len(set(g.edges)) == len(g.edges)
    assert all(u != v for u, v in g.edges)
    assert build_regular_gadget(101, 4, seed=7, t=0).edges == g.edges
    with pytest.raises(ValueError):
        RegularGadget(4, 3, 0, 1.0, ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)))  # n - t even


def test_regular_terminal_bias_shrinks_with_n():
    """Exact terminal bias of d=3, t=1, beta=1 gadgets vs the tree q+, averaged over 10 seeds."""
    q = solve_tree_fixed_points(3, 1.0).q_plus

    def mean_dev(n):
        devs = []
        for seed in range(10):
            g = build_regular_gadget(n, 3, seed, t=1, beta=1.0)
            devs.append(abs(brute_force_terminal_table(g.interaction(), g.terminals)["+"][1] - q))
        return float(np.mean(devs))

    d16, d24 = mean_dev(16), mean_dev(24)
    assert d16 == pytest.approx(0.003326, abs=2e-6)
    assert d24 == pytest.approx(0.001668, abs=2e-6)
    assert d24 < d16


def test_verify_regular_gadget_exact_report():
    g = build_regular_gadget(16, 3, seed=1, t=1, beta=1.0)
    rep = verify_regular_gadget(g, epsilon_target=0.5)
    assert rep["method"] == "exact"
    assert rep["spectral_ok"]
    assert rep["flip_asymmetry"] < 1e-12
    assert rep["phase_balance_structural"]


def test_verify_regular_gadget_sampling_report():
    g = build_regular_gadget(42, 3, seed=2, t=1, beta=1.0)
    rep = verify_regular_gadget(g, epsilon_target=0.5, samples=4000, chains=4)
    assert rep["method"] == "glauber"
    plus, minus = rep["conditionals"]["+"], rep["conditionals"]["-"]
    # flip symmetry in law: Pr[+1 | +] against Pr[-1 | -], within sampling error
    se = max(rep["stderr"]["+"][1], rep["stderr"]["-"][0])
    assert abs(plus[1] - minus[0]) < 5 * math.sqrt(2) * max(se, 1e-3)
