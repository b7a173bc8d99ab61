"""Extreme eigenvalues and spectral-range certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from spectral_ising.core import SymmetricInteraction

DENSE_LIMIT = 2000


@dataclass(frozen=True)
class SpectrumSummary:
    lambda_min: float
    lambda_max: float
    tolerance: float
    method: str

    @property
    def gap(self) -> float:
        return max(0.0, self.lambda_max - self.lambda_min)

    def to_dict(self) -> dict:
        return {"lambda_min": self.lambda_min, "lambda_max": self.lambda_max, "gap": self.gap,
                "tolerance": self.tolerance, "method": self.method}


@dataclass(frozen=True)
class WeylCertificate:
    """Certified bound gap(J) <= gap(D) + 2 ||E|| for J = D + E."""

    e_norm: float
    block_gap: float
    measured_gap: float
    admissible: bool | None = None

    @property
    def bound(self) -> float:
        return 2.0 * self.e_norm + self.block_gap

    def to_dict(self) -> dict:
        return {"e_norm": self.e_norm, "block_gap": self.block_gap, "bound": self.bound,
                "measured_gap": self.measured_gap, "admissible": self.admissible}


def _row_norm(J: SymmetricInteraction) -> float:
    s = np.abs(J.sparse()).sum(axis=1)
    return float(np.max(s)) if J.n else 0.0


def extreme_eigenvalues(J: SymmetricInteraction | np.ndarray, tol: float = 1e-10,
                        method: str = "auto", max_iter: int | None = None) -> SpectrumSummary:
    """lambda_min and lambda_max to absolute accuracy tol * max(1, max row l1 norm).

    Dense symmetric eigensolve up to 2000 rows; implicitly restarted Lanczos
    (ARPACK) above, or when ``method="lanczos"``.
    """
    if isinstance(J, np.ndarray):
        J = SymmetricInteraction.from_dense(J)
    if not tol > 0:
        raise ValueError("tol must be positive")
    scale = max(1.0, _row_norm(J))
    if method == "auto":
        method = "dense" if J.n <= DENSE_LIMIT else "lanczos"
    if method == "dense" or J.n < 3:
        ev = np.linalg.eigvalsh(J.dense())
        return SpectrumSummary(float(ev[0]), float(ev[-1]), tol * scale, "dense")
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")
    A = J.sparse()
    kw = dict(k=1, tol=tol * 1e-2, maxiter=max_iter or 100 * J.n)
    try:
        hi = spla.eigsh(A, which="LA", return_eigenvectors=False, **kw)[0]
        lo = spla.eigsh(A, which="SA", return_eigenvectors=False, **kw)[0]
    except spla.ArpackNoConvergence as exc:
        raise RuntimeError("Lanczos iteration did not converge") from exc
    return SpectrumSummary(float(lo), float(hi), tol * scale, "lanczos")


def matching_norm(edges) -> float:
    """Spectral norm of a perturbation supported on a matching: max |w|.

    Raises if two edges share an endpoint (then the blocks are not disjoint).
    """
    seen = set()
    norm = 0.0
    for i, j, w in edges:
        if i == j or i in seen or j in seen:
            raise ValueError("perturbation is not a disjoint matching")
        seen.update((i, j))
        norm = max(norm, abs(float(w)))
    return norm


def dense_admissible(n: int, r: int, gamma: float) -> bool:
    """n/r < (6 gamma + 4)/(5 gamma + 5), which makes the Weyl bound drop below gamma."""
    return n * (5.0 * gamma + 5.0) < r * (6.0 * gamma + 4.0)


def weyl_certificate(inst, tol: float = 1e-10) -> WeylCertificate:
    """Certificate for a reduced instance carrying its block/matching decomposition."""
    e_norm = matching_norm(inst.matchings)
    params = inst.params
    if params.variant == "dense":
        block_gap = inst.n / inst.r * float(params.beta)
        admissible = dense_admissible(inst.n, inst.r, params.gamma)
    else:
        block_gap = extreme_eigenvalues(inst.block_interaction(), tol).gap
        admissible = None
    measured = extreme_eigenvalues(inst.J, tol).gap
    return WeylCertificate(e_norm, block_gap, measured, admissible)


def validate_instance(J: SymmetricInteraction, gamma: float, d: int | None = None,
                      tol: float = 1e-10, include_diagonal: bool = True) -> dict:
    """Membership report for the gap < gamma (and optional row-support <= d) input class."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    spec = extreme_eigenvalues(J, tol)
    report = {**spec.to_dict(), "gamma": gamma, "gap_ok": bool(spec.gap < gamma)}
    if d is not None:
        support = J.row_support(include_diagonal)
        report["d"] = d
        report["max_row_support"] = int(support.max()) if support.size else 0
        report["support_ok"] = bool(np.all(support <= d))
    report["pass"] = bool(report["gap_ok"] and report.get("support_ok", True))
    return report


def friedman_sweep(n: int, d: int, seeds, slack: float = 0.5) -> dict:
    """Adjacency spectral range of sampled d-regular graphs against d + 2 sqrt(d-1) + slack."""
    from spectral_ising.gadget import sample_regular_graph
    from spectral_ising.meanfield import friedman_lambda

    bound = friedman_lambda(d) + slack
    gaps = []
    for seed in seeds:
        edges = sample_regular_graph(n, d, np.random.default_rng(seed))
        J = SymmetricInteraction.from_entries(n, ((u, v, 1.0) for u, v in edges))
        gaps.append(extreme_eigenvalues(J).gap)
    gaps = np.array(gaps)
    return {"n": n, "d": d, "bound": bound, "gaps": gaps.tolist(),
            "within": int(np.sum(gaps <= bound)), "runs": len(gaps)}
