"""MaxCut -> Ising reduction with gadget blocks and antiferromagnetic matchings.

Every vertex of a 3-regular graph H becomes a gadget block; the t terminals of
a block are split into three groups of t/3, one per neighbour, and each edge
of H becomes a size-t/3 matching of weight w- < 0 between the facing groups.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from spectral_ising import _kernels
from spectral_ising.core import SymmetricInteraction, log_bins, logsumexp
from spectral_ising.gadget import (
    CliqueGadget,
    RegularGadget,
    adjacency_gap,
    brute_force_terminal_table,
    build_regular_gadget,
    gadget_epsilon,
    product_measure_table,
)
from spectral_ising.meanfield import (
    friedman_lambda,
    solve_clique_fixed_points,
    solve_tree_fixed_points,
    thresholds,
    tree_threshold,
)
from spectral_ising.spectral import dense_admissible

STRUCTURED_CAP = 26
MAXCUT_CAP = 24


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class MaxCutInstance:
    m: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if u == v or not (0 <= u < self.m and 0 <= v < self.m):
                raise ValueError(f"bad edge ({u}, {v})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"parallel edge {key}")
            seen.add(key)

    @classmethod
    def from_edges(cls, m: int, edges) -> "MaxCutInstance":
        return cls(m, tuple(sorted((min(u, v), max(u, v)) for u, v in edges)))

    @cached_property
    def neighbors(self) -> list[list[int]]:
        nb = [[] for _ in range(self.m)]
        for u, v in self.edges:
            nb[u].append(v)
            nb[v].append(u)
        return [sorted(x) for x in nb]

    @property
    def degrees(self) -> list[int]:
        return [len(x) for x in self.neighbors]

    @property
    def is_cubic(self) -> bool:
        return all(k == 3 for k in self.degrees)

    def cut_value(self, sides) -> int:
        return sum(1 for u, v in self.edges if sides[u] != sides[v])


def complete_graph_k4() -> MaxCutInstance:
    return MaxCutInstance.from_edges(4, itertools.combinations(range(4), 2))


def complete_bipartite_k33() -> MaxCutInstance:
    return MaxCutInstance.from_edges(6, [(a, b) for a in range(3) for b in range(3, 6)])


def triangular_prism() -> MaxCutInstance:
    return MaxCutInstance.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)])


def petersen_graph() -> MaxCutInstance:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return MaxCutInstance.from_edges(10, outer + spokes + inner)


def brute_force_maxcut(H: MaxCutInstance, cap: int = MAXCUT_CAP) -> int:
    """Exact maximum cut over the 2^(m-1) bipartitions with vertex m-1 fixed."""
    if H.m > cap:
        raise ValueError(f"m={H.m} exceeds the brute-force cap {cap}")
    if H.m <= 1 or not H.edges:
        return 0
    e = np.array(H.edges, dtype=np.int64)
    codes = np.arange(1 << (H.m - 1), dtype=np.int64)
    best = 0
    for lo in range(0, codes.size, 1 << 16):
        chunk = codes[lo:lo + (1 << 16)]
        side_u = (chunk[:, None] >> e[:, 0]) & 1
        side_v = (chunk[:, None] >> e[:, 1]) & 1
        best = max(best, int((side_u != side_v).sum(axis=1).max()))
    return best


def random_cut_floor(H: MaxCutInstance) -> float:
    """Expected size of a uniformly random cut: |E|/2 (= 3m/4 for cubic H)."""
    return len(H.edges) / 2.0


@dataclass(frozen=True)
class ReductionParams:
    variant: str
    gamma: float
    t: int
    n: int
    d: int | None = None
    eta: float | None = None
    seed: int | None = None
    strict: bool = True

    @property
    def beta(self):
        if self.variant == "dense":
            return (1 + self.gamma) / 2
        return tree_threshold(self.d - 1) + self.eta

    @property
    def w_minus(self):
        if self.variant == "dense":
            return (1 - self.gamma) / 5
        return -self.eta

    @property
    def r(self) -> int:
        return self.n - self.t

    def validate(self) -> "ReductionParams":
        if self.variant not in ("dense", "sparse"):
            raise ParameterError(f"variant must be 'dense' or 'sparse', got {self.variant!r}")
        if self.t <= 0 or self.t % 3:
            raise ParameterError(f"t must be a positive multiple of 3, got {self.t}")
        if self.n <= self.t:
            raise ParameterError(f"need n > t, got n={self.n}, t={self.t}")
        if self.strict and self.r % 2 == 0:
            raise ParameterError(f"n - t = {self.r} must be odd")
        if self.variant == "dense":
            if not self.gamma > 1:
                raise ParameterError(f"gamma must exceed 1 so that beta = (1+gamma)/2 > 1, got {self.gamma}")
            if self.strict and not dense_admissible(self.n, self.r, float(self.gamma)):
                raise ParameterError(
                    f"n/r = {self.n / self.r:.6g} violates n/r < (6g+4)/(5g+5) for gamma={self.gamma}")
        else:
            if self.d is None or self.d < 4:
                raise ParameterError("sparse variant needs d >= 4")
            if ((self.d - 1) * self.n) % 2:
                raise ParameterError(f"(d-1)*n = {(self.d - 1) * self.n} must be even")
            threshold = thresholds(self.d).theorem2_threshold
            if not self.gamma > threshold:
                raise ParameterError(f"gamma must exceed {threshold:.6g} for d={self.d}")
            if self.eta is None or not self.eta > 0:
                raise ParameterError("eta must be positive")
            lam = friedman_lambda(self.d - 1) + self.eta
            if not self.beta * lam + 2 * self.eta < self.gamma:
                raise ParameterError("eta too large: beta*lambda + 2*eta must stay below gamma")
        return self

    def to_dict(self) -> dict:
        return {"variant": self.variant, "gamma": float(self.gamma), "t": self.t, "n": self.n, "d": self.d,
                "eta": self.eta, "seed": self.seed, "strict": self.strict,
                "beta": float(self.beta), "w_minus": float(self.w_minus)}


def default_eta(gamma: float, d: int) -> float:
    lam = friedman_lambda(d - 1)
    beta = tree_threshold(d - 1)
    return min(0.01, (gamma - beta * lam) / (lam + beta + 3.0))


def choose_dense_n(gamma: float, t: int, max_epsilon: float | None = None, n_min: int | None = None) -> int:
    """Smallest n with n - t odd and n/r < (6g+4)/(5g+5); optionally also gadget epsilon < max_epsilon."""
    if not gamma > 1:
        raise ParameterError("gamma must exceed 1")
    n = max(t + 1, n_min or 0)
    if (n - t) % 2 == 0:
        n += 1
    while not dense_admissible(n, n - t, gamma):
        n += 2
    if max_epsilon is None:
        return n
    beta = (1 + gamma) / 2
    eps = lambda k: gadget_epsilon(CliqueGadget(k, t, beta))
    if eps(n) < max_epsilon:
        return n
    step = 2
    while eps(n + step) >= max_epsilon:
        step *= 2
        if n + step > 10 ** 7:
            raise ParameterError("no gadget size reaches the requested epsilon")
    lo, hi = (n if step == 2 else n + step // 2), n + step  # eps(lo) >= target > eps(hi), n - t odd
    while hi - lo > 2:
        mid = lo + ((hi - lo) // 4) * 2
        if eps(mid) < max_epsilon:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True, eq=False)
class ReducedInstance:
    """Composite of m copies of one gadget plus weighted inter-gadget matching edges.

    Block v occupies vertices v*n .. v*n + n - 1; its terminals are the first t.
    ``matchings`` holds (i, j, w) with global indices.
    """

    block: CliqueGadget | RegularGadget
    m: int
    matchings: tuple[tuple[int, int, float], ...]
    params: ReductionParams | None = None
    graph: MaxCutInstance | None = None
    groups: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.block.n

    @property
    def t(self) -> int:
        return self.block.t

    @property
    def r(self) -> int:
        return self.n - self.t

    @property
    def size(self) -> int:
        return self.n * self.m

    def block_interaction(self) -> SymmetricInteraction:
        return self.block.interaction()

    def _block_entries(self):
        base = self.block_interaction().entries()
        for v in range(self.m):
            off = v * self.n
            for i, j, w in base:
                yield i + off, j + off, w

    @cached_property
    def D(self) -> SymmetricInteraction:
        return SymmetricInteraction.from_entries(self.size, self._block_entries())

    @cached_property
    def E(self) -> SymmetricInteraction:
        return SymmetricInteraction.from_entries(self.size, self.matchings)

    @cached_property
    def J(self) -> SymmetricInteraction:
        return SymmetricInteraction.from_entries(self.size, itertools.chain(self._block_entries(), self.matchings))

    def terminal_index(self, v: int, k: int) -> int:
        return v * self.n + k

    def audit(self) -> dict:
        """Structural checks: J = D + E, disjoint matching, terminal coverage."""
        diff = self.J.sparse() - self.D.sparse() - self.E.sparse()
        ends = [x for i, j, _ in self.matchings for x in (i, j)]
        terminal_set = {self.terminal_index(v, k) for v in range(self.m) for k in range(self.t)}
        support = self.E.row_support()
        out = {
            "decomposition_exact": bool(abs(diff).max() == 0 if diff.nnz else True),
            "disjoint_matching": len(ends) == len(set(ends)),
            "matching_edges": len(self.matchings),
            "terminal_rows_one_entry": all(support[i] == 1 for i in terminal_set) if self.graph else None,
            "non_terminal_rows_empty": all(support[i] == 0 for i in range(self.size) if i not in terminal_set),
        }
        if self.graph is not None:
            out["expected_matching_edges"] = self.m * self.t // 2
            out["groups_partition"] = all(
                sorted(x for g in self.groups[v] for x in g) == list(range(self.t)) for v in range(self.m))
        return out


def _regular_gadget_for(params: ReductionParams, max_tries: int = 1000) -> RegularGadget:
    """Sample (d-1)-regular gadgets until beta * gap(A) <= beta * (lambda_{d-1} + eta)."""
    seed = params.seed or 0
    limit = friedman_lambda(params.d - 1) + params.eta
    for k in range(max_tries):
        g = build_regular_gadget(params.n, params.d - 1, seed + k, t=params.t, beta=params.beta)
        if adjacency_gap(g) <= limit:
            return g
    raise RuntimeError("no sampled gadget met the spectral requirement")


def build_reduction(H: MaxCutInstance, params: ReductionParams) -> ReducedInstance:
    if not H.is_cubic:
        raise ParameterError("MaxCut instance must be 3-regular")
    params.validate()
    if params.variant == "dense":
        block = CliqueGadget(params.n, params.t, params.beta, strict=params.strict)
    else:
        block = _regular_gadget_for(params)
        params = replace(params, seed=block.seed)
    size = params.t // 3
    groups = {v: [list(range(i * size, (i + 1) * size)) for i in range(3)] for v in range(H.m)}
    w = params.w_minus
    matchings = []
    for u, v in H.edges:
        i = H.neighbors[u].index(v)
        j = H.neighbors[v].index(u)
        for a, b in zip(groups[u][i], groups[v][j]):
            matchings.append((u * params.n + a, v * params.n + b, w))
    return ReducedInstance(block, H.m, tuple(matchings), params, H, groups)


def compose(block, m: int, matchings) -> ReducedInstance:
    """Free-form composite for oracle tests: m copies of ``block`` plus the given edges."""
    return ReducedInstance(block, m, tuple((int(i), int(j), w) for i, j, w in matchings))


def block_log_weights(block) -> np.ndarray:
    """log of the terminal-marginal weight W(tau) of one block, per terminal code."""
    if isinstance(block, CliqueGadget):
        return block.log_block_weights()
    return log_bins(block.interaction(), block.terminals, cap=24)[0]


def structured_log_z(inst: ReducedInstance, include_matchings: bool = True) -> float:
    """Exact log Z of the composite from per-block terminal weights.

    Summing out each block's non-terminal spins leaves log W_v(tau_v); the
    remaining sum over all t*m terminal spins carries the matching energies
    w tau_i tau_j.
    """
    logw = block_log_weights(inst.block)
    if not include_matchings:
        return inst.m * logsumexp(logw)
    T = inst.t * inst.m
    if T > STRUCTURED_CAP:
        raise ValueError(f"t*m = {T} exceeds the structured cap {STRUCTURED_CAP}")
    local = {}
    for v in range(inst.m):
        for k in range(inst.t):
            local[inst.terminal_index(v, k)] = v * inst.t + k
    try:
        mi = np.array([local[i] for i, _, _ in inst.matchings], dtype=np.int64)
        mj = np.array([local[j] for _, j, _ in inst.matchings], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"matching endpoint {exc.args[0]} is not a terminal") from exc
    mw = np.array([float(w) for _, _, w in inst.matchings])
    block_of = np.repeat(np.arange(inst.m), inst.t).astype(np.int64)
    bit = np.tile(np.arange(inst.t), inst.m).astype(np.int64)
    table = np.tile(logw, (inst.m, 1))
    return float(_kernels.terminal_sum_log(T, table, block_of, bit, inst.m, mi, mj, mw, 1.0))


@dataclass(frozen=True)
class RatioConstants:
    A: float
    B: float
    q_plus: float
    psi_scale: float
    w_minus: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compute_ab(w_minus, q_plus: float, psi_scale: float = 1.0) -> RatioConstants:
    """Mean matching-edge factors with psi(x, y) = exp(psi_scale * w * x * y).

    A averages psi over independent endpoint spins from the same phase, B from
    opposite phases.  ``w_minus`` is the matching weight or a ReductionParams.
    """
    if isinstance(w_minus, ReductionParams):
        w_minus = w_minus.w_minus
    if not 0.5 <= q_plus < 1.0:
        raise ValueError(f"q_plus must lie in [1/2, 1), got {q_plus}")
    psi = lambda x, y: math.exp(psi_scale * float(w_minus) * x * y)
    same = q_plus ** 2 + (1.0 - q_plus) ** 2
    mixed = 2.0 * q_plus * (1.0 - q_plus)
    A = same * psi(1, 1) + mixed * psi(1, -1)
    B = same * psi(-1, 1) + mixed * psi(1, 1)
    return RatioConstants(A, B, q_plus, psi_scale, float(w_minus))


def phase_bias(params: ReductionParams) -> float:
    if params.variant == "dense":
        return solve_clique_fixed_points(float(params.beta)).q_plus
    return solve_tree_fixed_points(params.d - 1, params.beta).q_plus


def instance_epsilon(inst: ReducedInstance) -> float:
    """Terminal-law error of the instance's gadget against its product measures."""
    if isinstance(inst.block, CliqueGadget):
        return gadget_epsilon(inst.block)
    g = inst.block
    tree = solve_tree_fixed_points(g.d, g.beta)
    table = brute_force_terminal_table(g.interaction(), g.terminals)
    return max(float(np.max(np.abs(table[ph] / product_measure_table(q, g.t) - 1.0)))
               for ph, q in (("+", tree.q_plus), ("-", tree.q_minus)))


def matching_exponent(m: int, t: int, convention: str = "construction") -> float:
    """Power of A in the ratio estimate: the m*t/2 matching edges, or three times that ("tripled")."""
    if convention == "construction":
        return m * t / 2
    if convention == "tripled":
        return 3 * m * t / 2
    raise ValueError(f"unknown exponent convention {convention!r}")


def log_window(epsilon: float, m: int) -> tuple[float, float]:
    """log of [(1-4e)^m 2^-m, (1+4e)^m]."""
    lower = m * math.log(1.0 - 4.0 * epsilon) - m * math.log(2.0) if epsilon < 0.25 else -math.inf
    return lower, m * math.log1p(4.0 * epsilon)


def lemma4_check(inst: ReducedInstance, psi_scale: float = 1.0, convention: str = "construction",
                 epsilon: float | None = None) -> dict:
    """Compare Z(H^G)/Z(disjoint gadgets) with A^e (B/A)^{maxcut t/3} and its (1 +- 4 eps) window."""
    if inst.graph is None or inst.params is None:
        raise ValueError("instance was not built from a MaxCut graph")
    H, m, t = inst.graph, inst.m, inst.t
    maxcut = brute_force_maxcut(H)
    if epsilon is None:
        epsilon = instance_epsilon(inst)
    q = phase_bias(inst.params)
    ab = compute_ab(inst.params.w_minus, q, psi_scale)
    log_z_full = structured_log_z(inst, True)
    log_z_free = structured_log_z(inst, False)
    log_ratio = log_z_full - log_z_free
    e_match = matching_exponent(m, t, convention)
    log_ba = math.log(ab.B / ab.A)
    log_center = e_match * math.log(ab.A) + maxcut * t / 3 * log_ba
    lo, hi = log_window(epsilon, m)
    rel = log_ratio - log_center
    # phase-averaged prediction: A^e 2^-m sum_Y (B/A)^{cut(Y) t/3}
    cuts = [H.cut_value([(y >> v) & 1 for v in range(m)]) for y in range(1 << m)]
    log_pred = e_match * math.log(ab.A) - m * math.log(2.0) + logsumexp([c * t / 3 * log_ba for c in cuts])
    return {
        "m": m, "t": t, "n": inst.n, "maxcut": maxcut, "epsilon": epsilon,
        "A": ab.A, "B": ab.B, "q_plus": q, "psi_scale": psi_scale, "exponent_convention": convention,
        "e_match": e_match, "log_z": log_z_full, "log_z_free": log_z_free, "log_ratio": log_ratio,
        "log_center": log_center, "log_ratio_over_center": rel,
        "log_window": [lo, hi], "pass": bool(lo <= rel <= hi),
        "log_phase_prediction": log_pred, "log_ratio_over_prediction": log_ratio - log_pred,
    }


def maxcut_bounds(log_z_ratio: float, A: float, B: float, epsilon: float, m: int, t: int,
                  e_match: float | None = None, delta: float = 0.0, n: int = 0) -> tuple[float, float]:
    """MaxCut interval implied by the ratio window.

    ``delta`` is a per-vertex oracle error on log Z(H^G) (total delta*m*n),
    which widens both ends.
    """
    if not epsilon < 0.25:
        raise ValueError(f"epsilon must be below 1/4, got {epsilon}")
    if not B > A:
        raise ValueError("need B > A")
    if e_match is None:
        e_match = m * t / 2
    scale = 3.0 / (t * math.log(B / A))
    base = log_z_ratio - e_match * math.log(A)
    slack = delta * m * n
    lower = scale * (base - m * math.log1p(4.0 * epsilon) - slack)
    upper = scale * (base + m * math.log(2.0) - m * math.log(1.0 - 4.0 * epsilon) + slack)
    return lower, upper


def maxcut_interval_width(A: float, B: float, epsilon: float, m: int, t: int, delta: float = 0.0, n: int = 0) -> float:
    return 3.0 * m * (math.log(2.0) - math.log(1.0 - 4.0 * epsilon) + math.log1p(4.0 * epsilon)
                      + 2.0 * delta * n) / (t * math.log(B / A))


def estimate_maxcut(inst: ReducedInstance, delta: float = 0.0, psi_scale: float = 1.0) -> dict:
    """Run the ratio estimate on exact structured Z and return the MaxCut interval."""
    report = lemma4_check(inst, psi_scale)
    lower, upper = maxcut_bounds(report["log_ratio"], report["A"], report["B"], report["epsilon"],
                                 inst.m, inst.t, report["e_match"], delta, inst.n)
    report.update({"lower": lower, "upper": upper, "width": upper - lower,
                   "contains_maxcut": bool(lower <= report["maxcut"] <= upper)})
    return report
