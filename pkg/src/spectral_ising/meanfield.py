"""Phase biases of the complete-graph and regular-tree Ising models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NEAR_CRITICAL_GAP = 1e-4


@dataclass(frozen=True)
class MeanFieldSolution:
    beta: float
    roots: tuple[float, ...]
    q_minus: float | None = None
    q_plus: float | None = None

    @property
    def near_critical(self) -> bool:
        return self.q_plus is not None and self.q_plus - 0.5 < NEAR_CRITICAL_GAP

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "roots": list(self.roots),
            "q_plus": self.q_plus,
            "q_minus": self.q_minus,
            "near_critical": self.near_critical,
        }


@dataclass(frozen=True)
class TreeFixedPoint:
    d: int
    beta: float
    tilde_q_plus: float
    tilde_q_minus: float
    q_plus: float
    q_minus: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ThresholdConstants:
    d: int
    beta_d: float
    lambda_d: float
    theorem2_threshold: float | None = field(default=None)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def mean_field_residual(beta: float, alpha: float) -> float:
    """ln((1 - a)/a) + 2 beta (2a - 1); zero at the clique fixed points."""
    return math.log((1.0 - alpha) / alpha) + 2.0 * beta * (2.0 * alpha - 1.0)


def _bisect(fn, lo: float, hi: float, xtol: float, max_iter: int = 500) -> float:
    flo = fn(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid in (lo, hi):
            return mid
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    raise RuntimeError("bisection did not converge")


def solve_clique_fixed_points(beta: float, xtol: float = 1e-13, scan_points: int = 10_000) -> MeanFieldSolution:
    """Solutions of ln((1 - a)/a) + 2 beta (2a - 1) = 0 on [0, 1].

    For beta <= 1 the only solution is 1/2.  For beta > 1 the unique root above
    1/2 is bracketed on a scan grid and bisected; the lower root is its mirror.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if beta <= 1.0:
        return MeanFieldSolution(beta, (0.5,))
    g = lambda a: mean_field_residual(beta, a)
    # in log-odds z = ln(a/(1-a)) the equation reads h(z) = 2 beta tanh(z/2) - z = 0
    h = lambda z: 2.0 * beta * math.tanh(0.5 * z) - z
    # g > 0 just above 1/2 (local minimum of f) and g -> -inf at 1.
    grid = np.linspace(0.5 + 1e-12, 1.0 - 1e-12, scan_points)
    vals = np.log((1.0 - grid) / grid) + 2.0 * beta * (2.0 * grid - 1.0)
    sign_change = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
    if sign_change.size:
        k = sign_change[0]
        a = _bisect(g, float(grid[k]), float(grid[k + 1]), xtol)
        z = math.log(a / (1.0 - a))
    elif vals[-1] > 0:
        # root beyond the grid (large beta): h changes sign on [logit(grid end), 2 beta]
        z_lo = math.log(grid[-1] / (1.0 - grid[-1]))
        z = _bisect(h, z_lo, 2.0 * beta, xtol * 2.0 * beta)
    else:
        lo, hi = 0.5 + 1e-15, float(grid[0])
        if not g(lo) > 0:
            # numerically indistinguishable from the critical point
            return MeanFieldSolution(beta, (0.5, 0.5, 0.5), 0.5, 0.5)
        a = _bisect(g, lo, hi, xtol)
        z = math.log(a / (1.0 - a))
    # Newton polish in z keeps the residual tiny at both roots even when q- is close to 0
    for _ in range(3):
        dh = beta * (1.0 - math.tanh(0.5 * z) ** 2) - 1.0
        if dh >= 0:
            break
        z_new = z - h(z) / dh
        if not z_new > 0:
            break
        z = z_new
    q_plus, q_minus = _sigmoid(z), _sigmoid(-z)
    return MeanFieldSolution(beta, (q_minus, 0.5, q_plus), q_minus, q_plus)


def tree_threshold(d: int) -> float:
    """beta_d = 1/2 ln(1 + 2/(d - 2)), the tree uniqueness threshold."""
    if d < 3:
        raise ValueError(f"d must be at least 3, got {d}")
    return 0.5 * math.log1p(2.0 / (d - 2))


def friedman_lambda(d: int) -> float:
    """d + 2 sqrt(d - 1): Friedman's bound on the adjacency spectral range."""
    if d < 3:
        raise ValueError(f"d must be at least 3, got {d}")
    return d + 2.0 * math.sqrt(d - 1)


def thresholds(d: int) -> ThresholdConstants:
    if d < 3:
        raise ValueError(f"d must be at least 3, got {d}")
    t2 = tree_threshold(d - 1) * friedman_lambda(d - 1) if d >= 4 else None
    return ThresholdConstants(d, tree_threshold(d), friedman_lambda(d), t2)


def tree_map(d: int, beta: float, x: float) -> float:
    """x -> ((e^{2b} x + 1)/(x + e^{2b}))^{d-1}."""
    e2b = math.exp(2.0 * beta)
    return ((e2b * x + 1.0) / (x + e2b)) ** (d - 1)


def _half_log_message(d, theta, u):
    # x = exp(2u); the recursion reads u = (d-1) artanh(theta tanh u)
    return u - (d - 1) * math.atanh(theta * math.tanh(u))


def solve_tree_fixed_points(d: int, beta: float, xtol: float = 1e-13, max_doublings: int = 200) -> TreeFixedPoint:
    """Non-trivial fixed points of the (d-1)-ary tree recursion and the induced biases.

    Bisection runs in u = ln(x)/2, where the map is u -> (d-1) artanh(tanh(beta) tanh(u)),
    and each of the two roots is bracketed separately by doubling.
    """
    if d < 3:
        raise ValueError(f"d must be at least 3, got {d}")
    bd = tree_threshold(d)
    if not beta > bd + 1e-9:
        raise ValueError(f"beta={beta} is not above the tree threshold {bd:.12g}")
    theta = math.tanh(beta)
    slope = 1.0 - (d - 1) * theta  # G(u)/u as u -> 0, negative above threshold

    def scaled(u):
        if abs(u) < 1e-8:
            return slope
        return _half_log_message(d, theta, u) / u

    roots = []
    for sign in (1.0, -1.0):
        hi = 1e-3
        for _ in range(max_doublings):
            if scaled(sign * hi) > 0:
                break
            hi *= 2.0
        else:
            raise RuntimeError("could not bracket the tree fixed point")
        u = _bisect(lambda v: scaled(sign * v), 0.0, hi, xtol * max(1.0, hi))
        roots.append(sign * u)
    u_plus, u_minus = roots
    x_plus, x_minus = math.exp(2.0 * u_plus), math.exp(2.0 * u_minus)
    for x in (x_plus, x_minus):
        if abs(x - tree_map(d, beta, x)) > 1e-10 * max(1.0, x):
            raise RuntimeError("tree fixed point residual too large")
    # q/(1-q) = x (e^{2b}x+1)/(x+e^{2b}); ln of the second factor is 2 artanh(theta tanh u)
    q_plus = _sigmoid(2.0 * u_plus + 2.0 * math.atanh(theta * math.tanh(u_plus)))
    q_minus = _sigmoid(2.0 * u_minus + 2.0 * math.atanh(theta * math.tanh(u_minus)))
    return TreeFixedPoint(d, beta, x_plus, x_minus, q_plus, q_minus)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)
