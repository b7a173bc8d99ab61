import math

import numpy as np
import pytest

from oracles import maxcut_by_enumeration
from spectral_ising.core import brute_force_log_z
from spectral_ising.gadget import CliqueGadget, RegularGadget, build_regular_gadget, gadget_epsilon, sample_regular_graph
from spectral_ising.meanfield import friedman_lambda, solve_clique_fixed_points, tree_threshold
from spectral_ising.reduction import (
    MaxCutInstance,
    ParameterError,
    ReductionParams,
    brute_force_maxcut,
    build_reduction,
    choose_dense_n,
    complete_bipartite_k33,
    complete_graph_k4,
    compose,
    compute_ab,
    default_eta,
    estimate_maxcut,
    lemma4_check,
    log_window,
    maxcut_bounds,
    maxcut_interval_width,
    petersen_graph,
    random_cut_floor,
    structured_log_z,
    triangular_prism,
)


def dense(gamma=1.5, t=3, n=None, strict=True):
    return ReductionParams("dense", gamma, t, n or choose_dense_n(gamma, t), strict=strict)


def test_brute_force_maxcut_known_graphs():
    assert brute_force_maxcut(complete_graph_k4()) == 4
    assert brute_force_maxcut(complete_bipartite_k33()) == 9
    assert brute_force_maxcut(petersen_graph()) == 12
    assert brute_force_maxcut(triangular_prism()) == 7
    for H in (complete_graph_k4(), petersen_graph()):
        assert H.is_cubic
        assert brute_force_maxcut(H) >= random_cut_floor(H) == 3 * H.m / 4


def test_brute_force_maxcut_random_cubic_graphs():
    rng = np.random.default_rng(1)
    for m in (6, 8, 10):
        H = MaxCutInstance.from_edges(m, sample_regular_graph(m, 3, rng))
        assert brute_force_maxcut(H) == maxcut_by_enumeration(m, H.edges)
    with pytest.raises(ValueError):
        brute_force_maxcut(MaxCutInstance.from_edges(25, [(0, 1)]))


def test_k4_dense_structure():
    gamma = 1.5
    inst = build_reduction(complete_graph_k4(), dense(gamma))
    assert inst.m == 4 and len(inst.matchings) == inst.m * inst.t // 2 == 6
    audit = inst.audit()
    assert all(audit[k] for k in ("decomposition_exact", "disjoint_matching", "terminal_rows_one_entry",
                                  "non_terminal_rows_empty", "groups_partition"))
    E = inst.E.dense()
    for v in range(inst.m):
        for k in range(inst.t):
            row = E[inst.terminal_index(v, k)]
            nz = row[row != 0]
            assert len(nz) == 1 and abs(nz[0]) == pytest.approx((gamma - 1) / 5, abs=1e-15)
    assert np.array_equal(inst.J.dense(), inst.D.dense() + inst.E.dense())


def test_matching_is_index_ordered():
    H = complete_graph_k4()
    inst = build_reduction(H, dense(t=6))
    n = inst.n
    # edge (0, 1): group 0 of block 0 faces group 0 of block 1 (0 is the first neighbour of 1)
    pairs = [(i, j) for i, j, _ in inst.matchings if i // n == 0 and j // n == 1]
    assert pairs == [(0, n + 0), (1, n + 1)]
    pairs = [(i, j) for i, j, _ in inst.matchings if i // n == 2 and j // n == 3]
    assert pairs == [(2 * n + 4, 3 * n + 4), (2 * n + 5, 3 * n + 5)]


def test_parameter_validation():
    H = complete_graph_k4()
    with pytest.raises(ParameterError):
        dense(gamma=0.9, n=41).validate()
    with pytest.raises(ParameterError):
        ReductionParams("dense", 1.5, 4, 81).validate()
    with pytest.raises(ParameterError):
        ReductionParams("dense", 1.5, 3, 81).validate()  # r even
    with pytest.raises(ParameterError):
        ReductionParams("dense", 1.5, 3, 40).validate()  # n/r too large
    ReductionParams("dense", 1.5, 3, 40, strict=False).validate()
    with pytest.raises(ParameterError):
        ReductionParams("sparse", 3.1, 3, 20, d=4, eta=0.01).validate()  # below the d=4 threshold
    with pytest.raises(ParameterError):
        ReductionParams("sparse", 3.3, 3, 20, d=4, eta=0.5).validate()
    with pytest.raises(ParameterError):
        build_reduction(MaxCutInstance.from_edges(3, [(0, 1), (1, 2)]), dense())


def test_default_eta_leaves_slack():
    for gamma, d in [(3.3, 4), (4.0, 4), (3.0, 5), (2.0, 10)]:
        eta = default_eta(gamma, d)
        beta = tree_threshold(d - 1) + eta
        assert eta > 0
        assert beta * (friedman_lambda(d - 1) + eta) + 2 * eta < gamma


def test_sparse_reduction_structure():
    inst = build_reduction(complete_graph_k4(), ReductionParams("sparse", 3.3, 3, 20, d=4, eta=0.01, seed=3))
    assert isinstance(inst.block, RegularGadget) and inst.block.d == 3
    assert inst.J.row_support().max() <= 4
    assert inst.audit()["decomposition_exact"]


def test_compute_ab():
    ab = compute_ab(-0.3, 0.5)
    assert ab.A - ab.B == 0
    q = solve_clique_fixed_points(1.25).q_plus
    params = dense(1.5)
    ab = compute_ab(params, q)
    w = params.w_minus
    # direct average of exp(w x y) over endpoint spins drawn from Q+ x Q+ and Q+ x Q-
    law = {1: q, -1: 1 - q}
    A = sum(law[x] * law[y] * math.exp(w * x * y) for x in (1, -1) for y in (1, -1))
    B = sum(law[x] * law[-y] * math.exp(w * x * y) for x in (1, -1) for y in (1, -1))
    assert ab.A == pytest.approx(A, rel=1e-14)
    assert ab.B == pytest.approx(B, rel=1e-14)
    assert ab.A == pytest.approx(0.9544515216265111, rel=1e-12)
    assert ab.B == pytest.approx(1.0555568144850962, rel=1e-12)
    assert ab.B > ab.A
    # the psi constant only scales the exponent
    c2 = compute_ab(w, q, psi_scale=2.0)
    doubled = compute_ab(2 * w, q)
    assert (c2.A, c2.B) == (pytest.approx(doubled.A, rel=1e-15), pytest.approx(doubled.B, rel=1e-15))
    with pytest.raises(ValueError):
        compute_ab(w, 1.0)


def test_structured_single_gadget():
    g = CliqueGadget(10, 3, 1.5)
    inst = compose(g, 1, [])
    assert structured_log_z(inst) == pytest.approx(brute_force_log_z(g.interaction()).log_z, abs=1e-9)


def test_structured_two_gadgets_one_edge():
    g = CliqueGadget(7, 3, 1.25, strict=False)
    inst = compose(g, 2, [(0, 7, -0.1)])
    assert structured_log_z(inst) == pytest.approx(brute_force_log_z(inst.J).log_z, abs=1e-9)
    assert structured_log_z(inst, include_matchings=False) == pytest.approx(2 * g.log_z(), abs=1e-12)


def test_structured_sparse_blocks():
    g = build_regular_gadget(8, 3, seed=0, t=3, beta=0.8)
    inst = compose(g, 2, [(0, 8, -0.2), (1, 9, -0.2), (2, 10, -0.2)])
    assert structured_log_z(inst) == pytest.approx(brute_force_log_z(inst.J).log_z, abs=1e-9)


def test_structured_cap():
    inst = build_reduction(petersen_graph(), dense(t=3))
    with pytest.raises(ValueError):
        structured_log_z(inst)


def test_phase_vector_identity_tiny():
    """Two gadgets joined on all three terminals: ratio against the phase average of A/B products."""
    g = CliqueGadget(8, 3, 1.25)
    w = -0.1
    inst = compose(g, 2, [(0, 8, w), (1, 9, w), (2, 10, w)])
    log_ratio = brute_force_log_z(inst.J).log_z - 2 * brute_force_log_z(g.interaction()).log_z
    ab = compute_ab(w, solve_clique_fixed_points(1.25).q_plus)
    # Y in {++, +-, -+, --}: same phases give A^3, different give B^3
    pred = math.log(0.5 * ab.A ** 3 + 0.5 * ab.B ** 3)
    eps = gadget_epsilon(g)
    assert abs(log_ratio - pred) <= 2 * math.log1p(eps)


def test_window_monotone_in_epsilon():
    lo1, hi1 = log_window(0.01, 4)
    lo2, hi2 = log_window(0.05, 4)
    assert lo2 < lo1 and hi2 > hi1
    assert log_window(0.3, 4)[0] == -math.inf


def test_lemma4_conventions_runnable():
    inst = build_reduction(complete_graph_k4(), dense(n=80))
    rep = lemma4_check(inst)
    assert rep["e_match"] == 6 and rep["pass"]
    tripled = lemma4_check(inst, psi_scale=2.0, convention="tripled")
    assert tripled["e_match"] == 18 and tripled["psi_scale"] == 2.0
    assert isinstance(tripled["pass"], bool)
    # the phase-averaged prediction is much closer to the measured ratio than the window center
    assert abs(rep["log_ratio_over_prediction"]) < 1e-3 < abs(rep["log_ratio_over_center"])


def test_maxcut_bounds_width_and_errors():
    A, B, eps, m, t = 0.95, 1.05, 0.1, 4, 3
    lo, hi = maxcut_bounds(1.0, A, B, eps, m, t)
    assert hi - lo == pytest.approx(maxcut_interval_width(A, B, eps, m, t), rel=1e-12)
    lo_d, hi_d = maxcut_bounds(1.0, A, B, eps, m, t, delta=1e-3, n=50)
    assert lo_d < lo and hi_d > hi
    assert hi_d - lo_d == pytest.approx(maxcut_interval_width(A, B, eps, m, t, 1e-3, 50), rel=1e-12)
    limit = 3 * m * math.log(2) / (t * math.log(B / A))
    assert maxcut_interval_width(A, B, 1e-12, m, t) == pytest.approx(limit, rel=1e-9)
    assert maxcut_interval_width(A, B, eps, m, 12) == pytest.approx(maxcut_interval_width(A, B, eps, m, 3) / 4)
    with pytest.raises(ValueError):
        maxcut_bounds(1.0, A, B, 0.25, m, t)
    with pytest.raises(ValueError):
        maxcut_bounds(1.0, B, A, eps, m, t)


@pytest.mark.parametrize("H", [complete_graph_k4(), complete_bipartite_k33(), triangular_prism()],
                         ids=["k4", "k33", "prism"])
def test_bracketing_with_exact_z(H):
    n = choose_dense_n(1.5, 3, max_epsilon=0.1)
    rep = estimate_maxcut(build_reduction(H, dense(n=n)))
    assert rep["epsilon"] < 0.25
    assert rep["contains_maxcut"]
    assert rep["lower"] <= brute_force_maxcut(H) <= rep["upper"]


def test_bracketing_random_cubic_m8():
    n = choose_dense_n(1.5, 3, max_epsilon=0.1)
    for seed in range(3):
        H = MaxCutInstance.from_edges(8, sample_regular_graph(8, 3, np.random.default_rng(seed)))
        rep = estimate_maxcut(build_reduction(H, dense(n=n)))
        assert rep["lower"] <= brute_force_maxcut(H) <= rep["upper"]


def test_choose_dense_n():
    for gamma in (1.2, 1.5, 2.0):
        n = choose_dense_n(gamma, 3)
        assert (n - 3) % 2 == 1
        assert ReductionParams("dense", gamma, 3, n).validate()
        assert not ReductionParams("dense", gamma, 3, n - 2, strict=True).n / (n - 5) < (6 * gamma + 4) / (5 * gamma + 5)
    n = choose_dense_n(1.5, 3, max_epsilon=0.1)
    assert gadget_epsilon(CliqueGadget(n, 3, 1.25)) < 0.1 <= gadget_epsilon(CliqueGadget(n - 2, 3, 1.25))
