import math

import numpy as np
import pytest

from spectral_ising.core import SymmetricInteraction, brute_force_log_z, total_variation
from spectral_ising.glauber import (
    ChainState,
    UniformCoupling,
    count_sign_changes,
    empirical_law,
    field_audit,
    glauber_sweep,
    mixing_experiment,
    stationarity_check,
)


def random_instance(n, seed):
    rng = np.random.default_rng(seed)
    entries = [(i, j, float(rng.normal(scale=0.6))) for i in range(n) for j in range(i, n) if rng.random() < 0.6]
    return SymmetricInteraction.from_entries(n, entries)


def test_free_spins_have_zero_mean():
    J = SymmetricInteraction.zeros(30)
    rep = mixing_experiment(J, "random", sweeps=20000, seed=4)
    trace = np.array(rep.trace, dtype=float) / 30
    # thinned records of independent fair spins: each has variance 1/30
    se = math.sqrt(1 / 30 / len(trace))
    assert abs(trace.mean()) < 3 * se


def test_deep_well_never_escapes():
    J = UniformCoupling.clique(50, 5.0)
    for start in ("all-plus", "all-minus"):
        rep = mixing_experiment(J, start, sweeps=20000, seed=1)
        assert rep.sign_changes == 0 and rep.first_escape is None
        assert rep.mean_abs_magnetization > 0.99


def test_reproducible():
    J = random_instance(12, 0)
    a = mixing_experiment(J, "random", sweeps=500, seed=7)
    b = mixing_experiment(J, "random", sweeps=500, seed=7)
    assert a.to_dict() == b.to_dict()
    c = mixing_experiment(J, "random", sweeps=500, seed=8)
    assert c.trace != a.trace


def test_uniform_path_matches_generic_kernel_in_law():
    J = UniformCoupling.clique(6, 1.0)
    exact = brute_force_log_z(J.interaction(), table=True).probabilities
    emp = empirical_law(J.interaction(), 2_000_000, seed=3)
    assert total_variation(emp, exact) < 0.01
    # the fast path reaches the same magnetization statistics
    fast = mixing_experiment(J, "all-plus", sweeps=200000, seed=2)
    slow = mixing_experiment(J.interaction(), "all-plus", sweeps=200000, seed=2)
    assert fast.mean_abs_magnetization == pytest.approx(slow.mean_abs_magnetization, abs=0.01)


def test_plus_minus_symmetry_over_seeds():
    J = UniformCoupling.clique(40, 1.2)
    plus = [np.mean(mixing_experiment(J, "all-plus", 300, seed=s).trace) for s in range(20)]
    minus = [np.mean(mixing_experiment(J, "all-minus", 300, seed=100 + s).trace) for s in range(20)]
    plus, minus = np.array(plus), -np.array(minus)
    se = math.sqrt(plus.var(ddof=1) / 20 + minus.var(ddof=1) / 20)
    assert abs(plus.mean() - minus.mean()) < 4 * max(se, 1e-9)


@pytest.mark.parametrize("n", [1, 3, 6])
def test_stationarity_small(n):
    rep = stationarity_check(random_instance(n, 10 + n), updates=1_000_000, seeds=(0, 1))
    assert rep["max_tv"] < 0.02


def test_debug_field_audit():
    J = random_instance(40, 3)
    rep = mixing_experiment(J, "random", sweeps=3000, seed=0, debug=True)
    assert rep.field_audit is not None and rep.field_audit < 1e-10
    state = glauber_sweep(ChainState.start(J, "all-plus", 5), J, sweeps=50)
    assert state.sweeps == 50
    assert field_audit(state, J) < 1e-10


def test_occupancy_and_sign_changes():
    J = UniformCoupling.clique(30, 0.5)
    rep = mixing_experiment(J, "all-plus", sweeps=5000, seed=0, trace_points=5000)
    assert sum(rep.occupancy.values()) == pytest.approx(1.0, abs=1e-12)
    assert rep.trace_every == 1 and len(rep.trace) == 5000
    assert rep.sign_changes == count_sign_changes(rep.trace) > 0
    assert rep.first_escape is not None
    assert count_sign_changes([3, 0, -1, 0, 0, -2, 4]) == 2
    assert count_sign_changes([0, 0]) == 0


def test_bad_arguments():
    J = SymmetricInteraction.zeros(3)
    with pytest.raises(ValueError):
        mixing_experiment(J, "sideways", sweeps=10)
    with pytest.raises(ValueError):
        mixing_experiment(J, "all-plus", sweeps=0)
    with pytest.raises(ValueError):
        empirical_law(SymmetricInteraction.zeros(21), 10)
