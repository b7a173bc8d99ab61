"""Random-scan heat-bath Glauber dynamics and phase-escape diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spectral_ising import _kernels
from spectral_ising.core import SymmetricInteraction, brute_force_log_z, total_variation

STARTS = ("all-plus", "all-minus", "random")
TRACE_POINTS = 1000


@dataclass(frozen=True)
class UniformCoupling:
    """J_ij = coupling for every pair (the diagonal does not affect the chain).

    ``UniformCoupling.clique(n, beta)`` is the Curie-Weiss form with coupling beta/n.
    """

    n: int
    coupling: float

    @classmethod
    def clique(cls, n: int, beta: float) -> "UniformCoupling":
        return cls(n, beta / n)

    def interaction(self) -> SymmetricInteraction:
        return SymmetricInteraction.from_dense(np.full((self.n, self.n), self.coupling))

    def local_fields(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=np.int64)
        return self.coupling * (sigma.sum() - sigma)


@dataclass
class ChainState:
    sigma: np.ndarray
    h: np.ndarray
    rng: np.random.Generator
    sweeps: int = 0

    @classmethod
    def start(cls, J, start: str = "random", seed: int = 0) -> "ChainState":
        rng = np.random.default_rng(seed)
        sigma = initial_configuration(J.n, start, rng)
        return cls(sigma, np.asarray(J.local_fields(sigma), dtype=float), rng)

    def next_seed(self) -> int:
        return int(self.rng.integers(0, 2 ** 31 - 1))


def initial_configuration(n: int, start: str, rng: np.random.Generator) -> np.ndarray:
    if start == "all-plus":
        return np.ones(n, dtype=np.int64)
    if start == "all-minus":
        return -np.ones(n, dtype=np.int64)
    if start == "random":
        return rng.choice(np.array([-1, 1], dtype=np.int64), size=n)
    raise ValueError(f"start must be one of {STARTS}, got {start!r}")


def _run(state: ChainState, J, sweeps: int, record_every: int = 1) -> np.ndarray:
    seed = state.next_seed()
    if isinstance(J, UniformCoupling):
        trace = _kernels.glauber_uniform(state.sigma, float(J.coupling), sweeps, seed, record_every)
        state.h = J.local_fields(state.sigma)
    else:
        indptr, indices, data = J.csr
        member = np.zeros(J.n, dtype=np.bool_)
        trace = _kernels.glauber_sparse(state.sigma, state.h, indptr, indices, data,
                                        sweeps, seed, False, member, 1, record_every)
    state.sweeps += sweeps
    return trace


def glauber_sweep(state: ChainState, J, sweeps: int = 1) -> ChainState:
    """Advance the chain by ``sweeps`` rounds of N uniformly random single-site updates."""
    if sweeps < 0:
        raise ValueError("sweeps must be non-negative")
    _run(state, J, sweeps, max(1, sweeps))
    return state


def field_audit(state: ChainState, J) -> float:
    """Largest |cached h_i - recomputed h_i|."""
    fresh = np.asarray(J.local_fields(state.sigma), dtype=float)
    return float(np.max(np.abs(fresh - state.h))) if fresh.size else 0.0


def count_sign_changes(trace) -> int:
    """Sign flips of the magnetization, skipping records where it is exactly zero."""
    s = np.sign(np.asarray(trace))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


@dataclass
class MixingReport:
    n: int
    start: str
    seed: int
    sweeps: int
    start_phase: int
    sign_changes: int
    first_escape: int | None
    occupancy: dict
    trace_every: int
    trace: list = field(repr=False)
    mean_abs_magnetization: float = 0.0
    field_audit: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def mixing_experiment(J, start: str = "all-plus", sweeps: int = 1000, seed: int = 0,
                      debug: bool = False, trace_points: int = TRACE_POINTS) -> MixingReport:
    """Run one chain, recording the total magnetization after every sweep.

    The phase of a record is the sign of the total magnetization; records with
    zero magnetization count toward the "zero" occupancy bucket and are skipped
    when counting sign changes.  With ``debug`` the chain pauses every 1000
    sweeps to compare cached and recomputed local fields.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    state = ChainState.start(J, start, seed)
    m0 = int(state.sigma.sum())
    start_phase = 1 if m0 >= 0 else -1
    if debug:
        parts, audit = [], 0.0
        done = 0
        while done < sweeps:
            k = min(1000, sweeps - done)
            parts.append(_run(state, J, k))
            audit = max(audit, field_audit(state, J))
            done += k
        trace = np.concatenate(parts)
    else:
        trace = _run(state, J, sweeps)
        audit = None
    escaped = np.nonzero(np.sign(trace) == -start_phase)[0]
    first_escape = int(escaped[0]) + 1 if escaped.size else None
    total = trace.size
    occupancy = {
        "plus": float(np.count_nonzero(trace > 0)) / total,
        "minus": float(np.count_nonzero(trace < 0)) / total,
        "zero": float(np.count_nonzero(trace == 0)) / total,
    }
    every = max(1, total // trace_points)
    return MixingReport(
        n=J.n, start=start, seed=seed, sweeps=sweeps, start_phase=start_phase,
        sign_changes=count_sign_changes(trace), first_escape=first_escape, occupancy=occupancy,
        trace_every=every, trace=trace[every - 1::every].tolist(),
        mean_abs_magnetization=float(np.abs(trace).mean()) / J.n, field_audit=audit,
    )


def empirical_law(J: SymmetricInteraction, updates: int, seed: int = 0, start: str = "random") -> np.ndarray:
    """Fraction of updates after which the chain sits in each state (index = state code)."""
    if J.n > 20:
        raise ValueError("empirical law is only tabulated for n <= 20")
    state = ChainState.start(J, start, seed)
    indptr, indices, data = J.csr
    counts = _kernels.glauber_state_counts(state.sigma, state.h, indptr, indices, data,
                                           updates, state.next_seed())
    return counts / counts.sum()


def stationarity_check(J: SymmetricInteraction, updates: int = 10 ** 7, seeds=(0, 1, 2)) -> dict:
    """Total-variation distance of long-run chain occupancy to the exact Gibbs table."""
    exact = brute_force_log_z(J, table=True).probabilities
    tvs = [total_variation(empirical_law(J, updates, s), exact) for s in seeds]
    return {"n": J.n, "updates": updates, "seeds": list(seeds), "tv": tvs, "max_tv": max(tvs)}
