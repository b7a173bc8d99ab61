"""Interaction matrices, energies and exact partition functions.

The Ising measure on {-1,+1}^N is mu_J(s) proportional to exp(1/2 s^T J s).
Diagonal entries are allowed; since s_i^2 = 1 they only shift the energy by
1/2 sum_i J_ii.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from spectral_ising import _kernels

BRUTE_FORCE_CAP = 30
TABLE_CAP = 25
EXACT_CAP = 20
_LEVEL_CAP = 50_000_000


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SymmetricInteraction:
    """Sparse symmetric coupling matrix, stored as its upper triangle.

    An entry (i, j, w) with i != j sets J_ij = J_ji = w; (i, i, w) sets J_ii = w.
    Weights may be floats or exact rationals (int / Fraction); the latter
    enables :func:`exact_level_counts`.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    exact_weights: tuple | None = field(default=None, repr=False)

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[Sequence]) -> "SymmetricInteraction":
        if int(n) != n or n < 1:
            raise DimensionError(f"dimension must be a positive integer, got {n!r}")
        n = int(n)
        seen = set()
        rows, cols, ws = [], [], []
        for entry in entries:
            i, j, w = entry
            i, j = int(i), int(j)
            if i > j:
                i, j = j, i
            if i < 0 or j >= n:
                raise IndexError(f"entry ({i}, {j}) out of range for N={n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate entry ({i}, {j})")
            seen.add((i, j))
            rows.append(i)
            cols.append(j)
            ws.append(w)
        order = sorted(range(len(rows)), key=lambda k: (rows[k], cols[k]))
        rows = [rows[k] for k in order]
        cols = [cols[k] for k in order]
        ws = [ws[k] for k in order]
        exact = None
        if all(isinstance(w, numbers.Rational) for w in ws):
            exact = tuple(Fraction(w) for w in ws)
        r = np.array(rows, dtype=np.int64)
        c = np.array(cols, dtype=np.int64)
        v = np.array([float(w) for w in ws], dtype=float)
        for arr in (r, c, v):
            arr.setflags(write=False)
        return cls(n, r, c, v, exact)

    @classmethod
    def from_dense(cls, matrix, atol: float = 0.0) -> "SymmetricInteraction":
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError("matrix must be square")
        if not np.allclose(a, a.T, rtol=0.0, atol=atol):
            raise ValueError("matrix is not symmetric")
        iu, ju = np.nonzero(np.triu(np.abs(a) > atol))
        return cls.from_entries(a.shape[0], ((i, j, a[i, j]) for i, j in zip(iu, ju)))

    @classmethod
    def zeros(cls, n: int) -> "SymmetricInteraction":
        return cls.from_entries(n, [])

    @property
    def nnz(self) -> int:
        return len(self.rows)

    def entries(self) -> list[tuple]:
        ws = self.exact_weights if self.exact_weights is not None else self.weights.tolist()
        return list(zip(self.rows.tolist(), self.cols.tolist(), ws))

    def dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.rows, self.cols] = self.weights
        a[self.cols, self.rows] = self.weights
        return a

    def sparse(self):
        from scipy.sparse import coo_matrix

        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.weights, self.weights[off]])
        return coo_matrix((v, (r, c)), shape=(self.n, self.n)).tocsr()

    def row_support(self, include_diagonal: bool = True) -> np.ndarray:
        """Number of non-zero entries in each row."""
        nz = self.weights != 0.0
        diag = self.rows == self.cols
        counts = np.zeros(self.n, dtype=np.int64)
        off = nz & ~diag
        np.add.at(counts, self.rows[off], 1)
        np.add.at(counts, self.cols[off], 1)
        if include_diagonal:
            np.add.at(counts, self.rows[nz & diag], 1)
        return counts

    @cached_property
    def diagonal_constant(self) -> float:
        diag = self.rows == self.cols
        return 0.5 * float(self.weights[diag].sum())

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Off-diagonal adjacency (indptr, indices, data), both directions."""
        off = (self.rows != self.cols) & (self.weights != 0.0)
        r = np.concatenate([self.rows[off], self.cols[off]])
        c = np.concatenate([self.cols[off], self.rows[off]])
        v = np.concatenate([self.weights[off], self.weights[off]])
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        indptr = np.cumsum(indptr)
        return indptr, c.astype(np.int64), v.astype(float)

    def local_fields(self, sigma) -> np.ndarray:
        """h_i = sum_{j != i} J_ij s_j."""
        s = as_spins(sigma, self.n).astype(float)
        indptr, indices, data = self.csr
        owner = np.repeat(np.arange(self.n), np.diff(indptr))
        return np.bincount(owner, weights=data * s[indices], minlength=self.n)


@dataclass(frozen=True)
class ExactLevels:
    """Exact partition function Z = exp(constant) * sum_k count_k * exp(unit * k)."""

    constant: Fraction
    unit: Fraction
    counts: dict

    def log_z(self) -> float:
        if not self.counts:
            return -math.inf
        terms = [float(self.unit) * k + math.log(c) for k, c in self.counts.items()]
        m = max(terms)
        return float(self.constant) + m + math.log(math.fsum(math.exp(x - m) for x in terms))


@dataclass
class GibbsSummary:
    log_z: float
    probabilities: np.ndarray | None = None
    exact: ExactLevels | None = None


def as_spins(sigma, n: int | None = None) -> np.ndarray:
    s = np.asarray(sigma)
    if s.ndim != 1:
        raise DimensionError("spin configuration must be a vector")
    if n is not None and s.shape[0] != n:
        raise DimensionError(f"configuration has length {s.shape[0]}, model has N={n}")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be +1 or -1")
    return s.astype(np.int64)


def spins_from_code(code: int, n: int) -> np.ndarray:
    """Configuration with spin i = +1 iff bit i of ``code`` is set."""
    return np.array([1 if (code >> i) & 1 else -1 for i in range(n)], dtype=np.int64)


def energy(J: SymmetricInteraction, sigma) -> float:
    """Return 1/2 s^T J s."""
    s = as_spins(sigma, J.n)
    factor = np.where(J.rows == J.cols, 0.5, 1.0)
    return float(np.sum(factor * J.weights * s[J.rows] * s[J.cols]))


def _check_cap(J: SymmetricInteraction, cap: int):
    if J.n > cap:
        raise DimensionError(f"N={J.n} exceeds the brute-force cap of {cap}")


def log_bins(J: SymmetricInteraction, terminals: Sequence[int] = (), phase_vertices: Sequence[int] | None = None,
             cap: int = BRUTE_FORCE_CAP) -> np.ndarray:
    """Log partition mass split by (phase, terminal configuration).

    Returns an array of shape (2, 2**t); row 0 collects states whose spin sum
    over ``phase_vertices`` is positive, row 1 the rest.  Column index is the
    terminal code (bit k set iff spin ``terminals[k]`` is +1).  Without
    ``phase_vertices`` everything lands in row 0 and row 1 is -inf.
    """
    _check_cap(J, cap)
    term_pos, member, track = _bin_layout(J.n, terminals, phase_vertices)
    indptr, indices, data = J.csr
    gm, gs = _kernels.enumerate_log_bins(J.n, indptr, indices, data, J.diagonal_constant,
                                         term_pos, member, track, len(terminals))
    with np.errstate(divide="ignore"):
        out = np.where(gs > 0, gm + np.log(np.where(gs > 0, gs, 1.0)), -np.inf)
    return out.reshape(2, 1 << len(terminals))


def _bin_layout(n, terminals, phase_vertices):
    term_pos = -np.ones(n, dtype=np.int64)
    for k, i in enumerate(terminals):
        if not 0 <= i < n:
            raise IndexError(f"terminal {i} out of range")
        if term_pos[i] >= 0:
            raise ValueError(f"terminal {i} listed twice")
        term_pos[i] = k
    member = np.zeros(n, dtype=np.bool_)
    track = phase_vertices is not None
    if track:
        member[np.asarray(list(phase_vertices), dtype=np.int64)] = True
    return term_pos, member, track


def logsumexp(values) -> float:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return -math.inf
    m = np.max(v)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(v - m))))


def brute_force_log_z(J: SymmetricInteraction, *, table: bool = False, exact: bool = False,
                      cap: int = BRUTE_FORCE_CAP) -> GibbsSummary:
    """log Z by full enumeration, accumulated in the log domain.

    ``table`` adds the probability of every state (indexed by state code,
    N <= 25).  ``exact`` adds the exact level histogram (N <= 20, rational
    weights only).
    """
    _check_cap(J, cap)
    summary = GibbsSummary(log_z=float(logsumexp(log_bins(J, cap=cap))))
    if table:
        _check_cap(J, TABLE_CAP)
        indptr, indices, data = J.csr
        energies = _kernels.enumerate_energies(J.n, indptr, indices, data, J.diagonal_constant)
        summary.probabilities = np.exp(energies - summary.log_z)
    if exact:
        summary.exact = exact_level_counts(J)[0][0]
    return summary


def _rational_gcd(values: Iterable[Fraction]) -> Fraction:
    num = 0
    den = 1
    for v in values:
        if v == 0:
            continue
        num = math.gcd(num, abs(v.numerator))
        den = den * v.denominator // math.gcd(den, v.denominator)
    return Fraction(num, den) if num else Fraction(0)


def exact_level_counts(J: SymmetricInteraction, terminals: Sequence[int] = (),
                       phase_vertices: Sequence[int] | None = None) -> list[list[ExactLevels]]:
    """Exact counterpart of :func:`log_bins`: one :class:`ExactLevels` per bin.

    Requires rational weights.  Every off-diagonal weight is an integer multiple
    of their rational gcd ``u``, so each state energy is constant + u*k with k an
    integer and Z is an integer-coefficient sum of exp(u*k).
    """
    if J.exact_weights is None:
        raise TypeError("exact mode needs rational (int or Fraction) weights")
    _check_cap(J, EXACT_CAP)
    w = J.exact_weights
    diag = [wi for wi, r, c in zip(w, J.rows, J.cols) if r == c]
    off = [(r, c, wi) for wi, r, c in zip(w, J.rows.tolist(), J.cols.tolist()) if r != c and wi != 0]
    constant = sum(diag, Fraction(0)) / 2
    unit = _rational_gcd(wi for _, _, wi in off)
    ints = [(r, c, int(wi / unit)) for r, c, wi in off]
    kmax = sum(abs(k) for _, _, k in ints)
    nt = 1 << len(terminals)
    if 2 * nt * (2 * kmax + 1) > _LEVEL_CAP:
        raise ValueError("energy grid too fine for exact enumeration")
    n = J.n
    r = np.array([a for a, _, _ in ints] + [b for _, b, _ in ints], dtype=np.int64)
    c = np.array([b for _, b, _ in ints] + [a for a, _, _ in ints], dtype=np.int64)
    v = np.array([k for _, _, k in ints] * 2, dtype=np.int64)
    order = np.lexsort((c, r))
    r, c, v = r[order], c[order], v[order]
    indptr = np.cumsum(np.concatenate([[0], np.bincount(r, minlength=n)])).astype(np.int64)
    term_pos, member, track = _bin_layout(n, terminals, phase_vertices)
    counts = _kernels.enumerate_level_counts(n, indptr, c, v, term_pos, member, track,
                                             len(terminals), kmax)
    out = []
    for phase in range(2):
        row = []
        for code in range(nt):
            hist = counts[phase * nt + code]
            nzk = np.nonzero(hist)[0]
            row.append(ExactLevels(constant, unit, {int(k) - kmax: int(hist[k]) for k in nzk}))
        out.append(row)
    return out


def conditional_spin_probability(J: SymmetricInteraction, sigma, i: int) -> float:
    """mu_J(s_i = +1 | s_{-i}) = 1 / (1 + exp(-2 h_i))."""
    s = as_spins(sigma, J.n)
    if not 0 <= i < J.n:
        raise IndexError(f"site {i} out of range for N={J.n}")
    indptr, indices, data = J.csr
    lo, hi = indptr[i], indptr[i + 1]
    h = float(np.dot(data[lo:hi], s[indices[lo:hi]]))
    return float(expit(2.0 * h))


def total_variation(p, q, atol: float = 1e-9) -> float:
    """Half the L1 distance between two distributions on the same support."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValueError(f"support sizes differ: {p.size} vs {q.size}")
    for name, x in (("p", p), ("q", q)):
        if np.any(x < -atol) or abs(x.sum() - 1.0) > atol:
            raise ValueError(f"{name} is not a probability distribution")
    return float(0.5 * np.abs(p - q).sum())
