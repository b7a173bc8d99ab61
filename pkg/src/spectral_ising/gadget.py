"""Clique and random-regular gadgets and their phase-conditioned terminal laws.

The phase of a configuration is the sign of the spin sum over the
non-terminal vertices.  Conditioned on the phase, terminal spins of a clique
gadget are close to i.i.d. with bias q+ (or q- = 1 - q+), the mean-field roots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from spectral_ising import _kernels
from spectral_ising.core import (
    SymmetricInteraction,
    as_spins,
    exact_level_counts,
    log_bins,
    logsumexp,
    ExactLevels,
)
from spectral_ising.meanfield import (
    friedman_lambda,
    solve_clique_fixed_points,
    solve_tree_fixed_points,
    tree_threshold,
)

TERMINAL_CAP = 20
REGULAR_EXACT_CAP = 24
PLUS, MINUS = "+", "-"


def _check_phase(phase: str) -> str:
    if phase not in (PLUS, MINUS):
        raise ValueError(f"phase must be '+' or '-', got {phase!r}")
    return phase


def phase_of(sigma, terminals: Sequence[int]) -> str:
    """'+' iff the spin sum over the non-terminal vertices is positive."""
    s = as_spins(sigma)
    mask = np.ones(s.shape[0], dtype=bool)
    mask[list(terminals)] = False
    if mask.sum() % 2 == 0:
        raise ValueError("non-terminal vertex count must be odd so the phase is never tied")
    return PLUS if s[mask].sum() > 0 else MINUS


def tau_sums(t: int) -> np.ndarray:
    """Spin sum of every terminal code 0..2^t-1 (bit k set <=> terminal k is +1)."""
    codes = np.arange(1 << t)
    plus = np.zeros(1 << t, dtype=np.int64)
    for k in range(t):
        plus += (codes >> k) & 1
    return 2 * plus - t


def product_measure_prob(q: float, tau) -> float:
    """Q(tau) = q^{(|tau| + t)/2} (1 - q)^{(t - |tau|)/2} for independent spins of bias q."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    tau = np.asarray(tau)
    t = tau.size
    plus = int(np.sum(tau == 1))
    return q ** plus * (1.0 - q) ** (t - plus)


def product_measure_table(q: float, t: int) -> np.ndarray:
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    plus = (tau_sums(t) + t) // 2
    return np.exp(plus * math.log(q) + (t - plus) * math.log1p(-q))


def binary_entropy(alpha: float) -> float:
    if alpha <= 0.0 or alpha >= 1.0:
        return 0.0
    return -alpha * math.log(alpha) - (1.0 - alpha) * math.log1p(-alpha)


def f_alpha(beta: float, alpha: float) -> float:
    """Exponential growth rate H(a) + (beta/2)(2a - 1)^2 of the magnetization-a mass."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return binary_entropy(alpha) + 0.5 * beta * (2.0 * alpha - 1.0) ** 2


def locate_maxima(beta: float, grid_points: int = 1_000_001) -> tuple[float, float]:
    """Maximizers (q-, q+) of f on [0, 1] for beta > 1.

    Grid argmax on (1/2, 1), then Newton steps on f' = ln((1-a)/a) + 2 beta (2a-1)
    using f'' = 4 beta - 1/(a(1-a)).
    """
    if not beta > 1.0:
        raise ValueError(f"f has a unique maximum at 1/2 unless beta > 1, got {beta}")
    a = np.linspace(0.5, 1.0, grid_points)[1:-1]
    vals = -a * np.log(a) - (1 - a) * np.log1p(-a) + 0.5 * beta * (2 * a - 1) ** 2
    x = float(a[np.argmax(vals)])
    h = a[1] - a[0]
    lo, hi = max(0.5 + 1e-15, x - 2 * h), min(1.0 - 1e-16, x + 2 * h)
    for _ in range(100):
        d1 = math.log((1.0 - x) / x) + 2.0 * beta * (2.0 * x - 1.0)
        d2 = 4.0 * beta - 1.0 / (x * (1.0 - x))
        step = d1 / d2
        x_new = min(max(x - step, lo), hi)
        if abs(x_new - x) < 1e-15:
            x = x_new
            break
        x = x_new
    return 1.0 - x, x


@dataclass(frozen=True)
class CliqueGadget:
    """Complete graph with all J entries (diagonal included) equal to beta/r, r = n - t.

    Terminals are vertices 0..t-1.  ``strict`` enforces an odd non-terminal
    count and beta > 1; composite oracle tests may relax it.
    """

    n: int
    t: int
    beta: float | Fraction
    strict: bool = True

    def __post_init__(self):
        if not (self.n > self.t >= 0):
            raise ValueError(f"need n > t >= 0, got n={self.n}, t={self.t}")
        if self.strict:
            if self.r % 2 == 0:
                raise ValueError(f"n - t = {self.r} must be odd")
            if not self.beta > 1:
                raise ValueError(f"clique gadget needs beta > 1, got {self.beta}")
        elif not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def r(self) -> int:
        return self.n - self.t

    @property
    def terminals(self) -> tuple[int, ...]:
        return tuple(range(self.t))

    @property
    def non_terminals(self) -> tuple[int, ...]:
        return tuple(range(self.t, self.n))

    @property
    def weight(self):
        if isinstance(self.beta, Fraction) or isinstance(self.beta, int):
            return Fraction(self.beta) / self.r
        return self.beta / self.r

    def interaction(self) -> SymmetricInteraction:
        w = self.weight
        return SymmetricInteraction.from_entries(
            self.n, ((i, j, w) for i in range(self.n) for j in range(i, self.n)))

    @cached_property
    def _log_binom(self) -> np.ndarray:
        # log C(r, k) from cumulative sums of log-integers
        logs = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, self.r + 1, dtype=float)))])
        k = np.arange(self.r + 1)
        return logs[self.r] - logs[k] - logs[self.r - k]

    @cached_property
    def log_z_table(self) -> np.ndarray:
        """log Z^{k/r}(tau) for terminal sum s = -t, -t+2, ..., t (rows) and k = 0..r (columns)."""
        beta = float(self.beta)
        r = self.r
        m = 2.0 * np.arange(r + 1) / r - 1.0
        s = np.arange(-self.t, self.t + 1, 2, dtype=float)[:, None]
        return self._log_binom[None, :] + 0.5 * beta * m * m * r + beta * m * s + beta * s * s / (2.0 * r)

    def log_block_weights(self) -> np.ndarray:
        """log sum_k Z^{k/r}(tau) for every terminal code: the terminal marginal weight."""
        per_sum = np.array([logsumexp(row) for row in self.log_z_table])
        return per_sum[(tau_sums(self.t) + self.t) // 2]

    def log_z(self) -> float:
        return logsumexp(self.log_block_weights())


def z_alpha_tau(g: CliqueGadget, k: int, tau_sum: int) -> float:
    """log Z^{k/r}(tau): mass of states with k non-terminal +1 spins and terminal sum tau_sum.

    log C(r, k) + (beta/2)(2a-1)^2 r + beta (2a-1)|tau| + (beta/2r)|tau|^2 with a = k/r.
    """
    r, t = g.r, g.t
    if not 0 <= k <= r:
        raise ValueError(f"k must lie in [0, {r}], got {k}")
    if abs(tau_sum) > t or (tau_sum - t) % 2:
        raise ValueError(f"terminal sum {tau_sum} impossible for t={t}")
    beta = float(g.beta)
    a = k / r
    m = 2.0 * a - 1.0
    return float(g._log_binom[k]) + 0.5 * beta * m * m * r + beta * m * tau_sum + beta * tau_sum ** 2 / (2.0 * r)


@dataclass
class TerminalDistribution:
    phase: str
    probabilities: np.ndarray
    reference: np.ndarray | None = None
    log_phase_mass: float | None = None

    @property
    def t(self) -> int:
        return int(round(math.log2(self.probabilities.size)))

    @property
    def epsilon(self) -> float | None:
        if self.reference is None:
            return None
        return float(np.max(np.abs(self.probabilities / self.reference - 1.0)))

    def per_tau(self) -> list[dict]:
        rows = []
        for code, p in enumerate(self.probabilities):
            tau = [1 if (code >> k) & 1 else -1 for k in range(self.t)]
            row = {"tau": tau, "probability": float(p)}
            if self.reference is not None:
                row["product"] = float(self.reference[code])
            rows.append(row)
        return rows


def _phase_k_range(g: CliqueGadget, phase: str) -> np.ndarray:
    ks = np.arange(g.r + 1)
    return ks[2 * ks > g.r] if phase == PLUS else ks[2 * ks <= g.r]


def terminal_distribution(g: CliqueGadget, phase: str, q_plus: float | None = None) -> TerminalDistribution:
    """Exact law of the terminal spins given the phase, from the Z^{k/r}(tau) sums."""
    _check_phase(phase)
    if g.t > TERMINAL_CAP:
        raise ValueError(f"t={g.t} exceeds the terminal cap {TERMINAL_CAP}")
    ks = _phase_k_range(g, phase)
    per_sum = np.array([logsumexp(row[ks]) for row in g.log_z_table])
    logw = per_sum[(tau_sums(g.t) + g.t) // 2]
    mass = logsumexp(logw)
    probs = np.exp(logw - mass)
    ref = None
    if q_plus is None and g.beta > 1:
        q_plus = solve_clique_fixed_points(float(g.beta)).q_plus
    if q_plus is not None:
        ref = product_measure_table(q_plus if phase == PLUS else 1.0 - q_plus, g.t)
    return TerminalDistribution(phase, probs, ref, mass)


def gadget_epsilon(g: CliqueGadget) -> float:
    """max over tau and phase of |Pr[tau | phase] / Q^phase(tau) - 1|."""
    q = solve_clique_fixed_points(float(g.beta)).q_plus
    return max(terminal_distribution(g, ph, q).epsilon for ph in (PLUS, MINUS))


def exact_phase_masses(g: CliqueGadget) -> dict[str, ExactLevels]:
    """Exact phase masses from the binomial structure.

    Every state has energy (beta/2r)(2k - r + |tau|)^2, so a phase mass is an
    integer combination of exp(unit * level) with unit = beta/(2r).
    """
    beta = Fraction(g.beta) if not isinstance(g.beta, float) else Fraction(g.beta).limit_denominator(10 ** 12)
    unit = beta / (2 * g.r)
    out = {}
    for phase in (PLUS, MINUS):
        counts: dict[int, int] = {}
        for k in _phase_k_range(g, phase):
            k = int(k)
            for plus in range(g.t + 1):
                level = (2 * k - g.r + 2 * plus - g.t) ** 2
                counts[level] = counts.get(level, 0) + math.comb(g.r, k) * math.comb(g.t, plus)
        out[phase] = ExactLevels(Fraction(0), unit, counts)
    return out


def brute_force_terminal_table(J: SymmetricInteraction, terminals: Sequence[int]) -> dict:
    """Phase-conditioned terminal laws by full enumeration.

    Returns {"+": probs, "-": probs, "log_mass": (log Z+, log Z-)}.
    """
    terminals = list(terminals)
    others = [i for i in range(J.n) if i not in set(terminals)]
    bins = log_bins(J, terminals, others)
    out = {"log_mass": (logsumexp(bins[0]), logsumexp(bins[1]))}
    for row, ph in ((0, PLUS), (1, MINUS)):
        out[ph] = np.exp(bins[row] - logsumexp(bins[row]))
    return out


def brute_force_phase_balance(J: SymmetricInteraction, terminals: Sequence[int]) -> tuple[ExactLevels, ExactLevels]:
    """Exact per-phase masses by enumeration (rational weights, N <= 20)."""
    terminals = list(terminals)
    others = [i for i in range(J.n) if i not in set(terminals)]
    levels = exact_level_counts(J, (), others)
    return levels[0][0], levels[1][0]


# ---------------------------------------------------------------- regular gadgets


@dataclass(frozen=True)
class RegularGadget:
    """beta * adjacency of a simple d-regular graph; terminals are vertices 0..t-1."""

    n: int
    d: int
    t: int
    beta: float
    edges: tuple[tuple[int, int], ...] = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        deg = np.zeros(self.n, dtype=np.int64)
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"parallel edge {key}")
            seen.add(key)
            deg[u] += 1
            deg[v] += 1
        if np.any(deg != self.d):
            raise ValueError("graph is not d-regular")
        if not (self.n > self.t >= 0):
            raise ValueError(f"need n > t >= 0, got n={self.n}, t={self.t}")
        if (self.n - self.t) % 2 == 0:
            raise ValueError(f"n - t = {self.n - self.t} must be odd")

    @property
    def terminals(self) -> tuple[int, ...]:
        return tuple(range(self.t))

    def interaction(self) -> SymmetricInteraction:
        return SymmetricInteraction.from_entries(self.n, ((u, v, self.beta) for u, v in self.edges))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a


def sample_regular_graph(n: int, d: int, rng: np.random.Generator, max_attempts: int = 10_000) -> list[tuple[int, int]]:
    """Configuration model: uniform pairing of half-edges, rejecting any loop or multi-edge."""
    if d < 1 or n <= d:
        raise ValueError(f"need 1 <= d < n, got n={n}, d={d}")
    if (n * d) % 2:
        raise ValueError(f"n*d = {n * d} must be even")
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_attempts):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        u, v = pairs.min(axis=1), pairs.max(axis=1)
        if np.any(u == v):
            continue
        keys = u * n + v
        if np.unique(keys).size != keys.size:
            continue
        order = np.argsort(keys)
        return [(int(a), int(b)) for a, b in zip(u[order], v[order])]
    raise RuntimeError(f"no simple graph after {max_attempts} pairings")


def build_regular_gadget(n: int, d: int, seed: int, t: int = 1, beta: float = 1.0,
                         max_attempts: int = 10_000) -> RegularGadget:
    if d < 3:
        raise ValueError(f"d must be at least 3, got {d}")
    rng = np.random.default_rng(seed)
    edges = sample_regular_graph(n, d, rng, max_attempts)
    return RegularGadget(n, d, t, beta, tuple(edges), seed)


def adjacency_gap(g: RegularGadget) -> float:
    ev = np.linalg.eigvalsh(g.adjacency())
    return float(ev[-1] - ev[0])


def sample_phase_terminals(g: RegularGadget, phase: str, sweeps: int, seed: int,
                           burn_in: int = 200) -> np.ndarray:
    """Terminal codes along a phase-restricted heat-bath chain, one per sweep after burn-in."""
    _check_phase(phase)
    J = g.interaction()
    indptr, indices, data = J.csr
    sign = 1 if phase == PLUS else -1
    sigma = np.full(g.n, sign, dtype=np.int64)
    h = J.local_fields(sigma)
    member = np.ones(g.n, dtype=np.bool_)
    member[list(g.terminals)] = False
    return _kernels.glauber_terminal_codes(sigma, h, indptr, indices, data, burn_in, sweeps, seed,
                                           member, sign, g.t)


def verify_regular_gadget(g: RegularGadget, epsilon_target: float = 0.1, samples: int = 20_000,
                          seed: int = 0, chains: int = 8) -> dict:
    """Check the three gadget properties of a regular gadget.

    Spectral range of beta*A against beta*(d + 2 sqrt(d-1)) + epsilon_target,
    phase balance, and terminal conditionals against the tree product measures
    (exact for n <= 24, otherwise phase-restricted Glauber chains).
    """
    if g.beta <= tree_threshold(g.d) + 1e-9:
        raise ValueError("beta must exceed the tree threshold for this degree")
    tree = solve_tree_fixed_points(g.d, g.beta)
    gap = g.beta * adjacency_gap(g)
    bound = g.beta * friedman_lambda(g.d) + epsilon_target
    report = {
        "n": g.n, "d": g.d, "t": g.t, "beta": g.beta, "seed": g.seed,
        "spectral_gap": gap, "spectral_bound": bound, "spectral_ok": bool(gap <= bound),
        "q_plus": tree.q_plus, "q_minus": tree.q_minus,
    }
    q_tables = {PLUS: product_measure_table(tree.q_plus, g.t), MINUS: product_measure_table(tree.q_minus, g.t)}
    if g.n <= REGULAR_EXACT_CAP:
        table = brute_force_terminal_table(g.interaction(), g.terminals)
        lp, lm = table["log_mass"]
        report["method"] = "exact"
        report["phase_plus_probability"] = float(1.0 / (1.0 + math.exp(lm - lp)))
        conditionals = {PLUS: table[PLUS], MINUS: table[MINUS]}
        stderr = {PLUS: np.zeros(1 << g.t), MINUS: np.zeros(1 << g.t)}
        report["samples"] = 0
    else:
        report["method"] = "glauber"
        report["phase_plus_probability"] = 0.5  # flip symmetry with odd n - t
        per_chain = max(1, samples // chains)
        conditionals, stderr = {}, {}
        for k, ph in enumerate((PLUS, MINUS)):
            counts = np.zeros((chains, 1 << g.t))
            for c in range(chains):
                codes = sample_phase_terminals(g, ph, per_chain, seed * 7919 + 2 * c + k)
                counts[c] = np.bincount(codes, minlength=1 << g.t) / per_chain
            conditionals[ph] = counts.mean(axis=0)
            stderr[ph] = counts.std(axis=0, ddof=1) / math.sqrt(chains) if chains > 1 else np.full(1 << g.t, np.inf)
        report["samples"] = per_chain * chains
    report["phase_balance_structural"] = True
    dev = {ph: float(np.max(np.abs(conditionals[ph] / q_tables[ph] - 1.0))) for ph in (PLUS, MINUS)}
    report["epsilon"] = max(dev.values())
    report["epsilon_by_phase"] = dev
    flip = np.arange(1 << g.t)[::-1]  # code of -tau is the bitwise complement
    report["flip_asymmetry"] = float(np.max(np.abs(conditionals[PLUS] - conditionals[MINUS][flip])))
    report["conditionals"] = {ph: conditionals[ph].tolist() for ph in (PLUS, MINUS)}
    report["stderr"] = {ph: stderr[ph].tolist() for ph in (PLUS, MINUS)}
    rel_err = max(float(np.max(stderr[ph] / q_tables[ph])) for ph in (PLUS, MINUS))
    report["relative_stderr"] = rel_err
    report["insufficient_samples"] = bool(rel_err > epsilon_target)
    return report
