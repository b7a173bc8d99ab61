"""End-to-end reduction run: biases, gadget check, instance, certificate, exact Z, window, MaxCut bounds."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from spectral_ising import io, reduction
from spectral_ising.gadget import CliqueGadget, exact_phase_masses, gadget_epsilon, verify_regular_gadget
from spectral_ising.meanfield import solve_clique_fixed_points, solve_tree_fixed_points
from spectral_ising.spectral import validate_instance, weyl_certificate

BUILTIN_GRAPHS = {
    "k4": reduction.complete_graph_k4,
    "k33": reduction.complete_bipartite_k33,
    "prism": reduction.triangular_prism,
    "petersen": reduction.petersen_graph,
}


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage, self.cause = stage, cause
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class ExperimentConfig:
    graph: str = "k4"
    variant: str = "dense"
    gamma: float = 1.5
    t: int = 3
    n: int | None = None
    d: int | None = None
    eta: float | None = None
    seed: int = 0
    max_epsilon: float = 0.1
    psi_scale: float = 1.0
    exponent: str = "construction"
    delta: float = 0.0
    tol: float = 1e-10
    strict: bool = True

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data).validate()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_mapping(json.loads(Path(path).read_text()))

    def load_graph(self) -> reduction.MaxCutInstance:
        if self.graph.lower() in BUILTIN_GRAPHS:
            return BUILTIN_GRAPHS[self.graph.lower()]()
        return io.parse_graph(self.graph)

    def resolve_n(self) -> int:
        if self.n is not None:
            return self.n
        if self.variant == "dense":
            return reduction.choose_dense_n(self.gamma, self.t, self.max_epsilon)
        # smallest even n >= 4t: (d - 1) n even and n - t odd for t = 3k odd
        n = max(4 * self.t, self.d + 1)
        while (n - self.t) % 2 == 0 or ((self.d - 1) * n) % 2:
            n += 1
        return n

    def params(self) -> reduction.ReductionParams:
        eta = self.eta
        if self.variant == "sparse" and eta is None:
            eta = reduction.default_eta(self.gamma, self.d)
        return reduction.ReductionParams(self.variant, self.gamma, self.t, self.resolve_n(), self.d, eta,
                                         self.seed, self.strict)

    def validate(self) -> "ExperimentConfig":
        if self.exponent not in ("construction", "tripled"):
            raise ValueError("exponent must be 'construction' or 'tripled'")
        if not 0 < self.max_epsilon < 0.25:
            raise ValueError("max_epsilon must lie in (0, 1/4)")
        if self.delta < 0 or self.tol <= 0:
            raise ValueError("delta must be >= 0 and tol > 0")
        if self.variant == "sparse" and self.d is None:
            raise ValueError("sparse variant needs d")
        self.params().validate()
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _stage(name, fn, out_dir, reports):
    try:
        result = fn()
    except Exception as exc:  # any failure aborts; earlier stage files stay on disk
        error = {"schema_version": io.SCHEMA_VERSION, "stage": name,
                 "error": {"type": type(exc).__name__, "message": str(exc)}}
        if out_dir is not None:
            (out_dir / f"{name}.error.json").write_text(io.dumps(error))
        raise StageError(name, exc) from exc
    reports[name] = result
    if out_dir is not None:
        (out_dir / f"{name}.json").write_text(io.dumps({"schema_version": io.SCHEMA_VERSION, "stage": name,
                                                        "result": result}))
    return result


def run_pipeline(config: ExperimentConfig, out_dir=None) -> dict:
    """Run all stages in order and return the summary (also written to out_dir/summary.json)."""
    config.validate()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    reports: dict = {}
    H = config.load_graph()
    params = config.params()
    state: dict = {}

    def meanfield():
        if params.variant == "dense":
            return solve_clique_fixed_points(float(params.beta)).to_dict()
        return solve_tree_fixed_points(params.d - 1, params.beta).to_dict()

    def gadget():
        if params.variant == "dense":
            g = CliqueGadget(params.n, params.t, params.beta, strict=params.strict)
            masses = exact_phase_masses(g)
            return {"kind": "clique", "n": g.n, "t": g.t, "beta": params.beta, "epsilon": gadget_epsilon(g),
                    "phase_balance_exact": masses["+"].counts == masses["-"].counts}
        inst = state["instance"] = reduction.build_reduction(H, params)
        rep = verify_regular_gadget(inst.block, seed=config.seed)
        rep["kind"] = "regular"
        return rep

    def build():
        inst = state.get("instance") or reduction.build_reduction(H, params)
        state["instance"] = inst
        if out_dir is not None:
            io.write_matrix(inst.J, out_dir / "instance.sym")
            (out_dir / "instance.meta.json").write_text(io.dumps(io.instance_meta(inst)))
        return {"m": inst.m, "n": inst.n, "t": inst.t, "size": inst.size, "params": inst.params.to_dict(),
                "audit": inst.audit()}

    def spectral():
        inst = state["instance"]
        cert = weyl_certificate(inst, config.tol)
        member = validate_instance(inst.J, params.gamma, params.d if params.variant == "sparse" else None,
                                   config.tol)
        ok = cert.measured_gap <= cert.bound + 1e-9
        return {**cert.to_dict(), "weyl_holds": ok, "membership": member}

    def exactz():
        inst = state["instance"]
        return {"log_z": reduction.structured_log_z(inst, True),
                "log_z_free": reduction.structured_log_z(inst, False), "method": "structured"}

    def lemma4():
        rep = reduction.lemma4_check(state["instance"], config.psi_scale, config.exponent)
        state["lemma4"] = rep
        return rep

    def maxcut():
        rep = state["lemma4"]
        inst = state["instance"]
        out = {"maxcut": rep["maxcut"], "epsilon": rep["epsilon"]}
        if not rep["epsilon"] < 0.25:
            out.update({"bounded": False, "reason": f"epsilon={rep['epsilon']:.6g} is not below 1/4"})
            return out
        lo, hi = reduction.maxcut_bounds(rep["log_ratio"], rep["A"], rep["B"], rep["epsilon"], inst.m, inst.t,
                                         rep["e_match"], config.delta, inst.n)
        out.update({"bounded": True, "lower": lo, "upper": hi, "width": hi - lo,
                    "contains": bool(lo <= rep["maxcut"] <= hi)})
        return out

    for name, fn in [("meanfield", meanfield), ("gadget", gadget), ("reduction", build), ("spectral", spectral),
                     ("exactz", exactz), ("lemma4", lemma4), ("maxcut", maxcut)]:
        _stage(name, fn, out_dir, reports)

    mf, mc, sp = reports["meanfield"], reports["maxcut"], reports["spectral"]
    verdict = (f"contains maxcut={mc['maxcut']}: {'true' if mc.get('contains') else 'false'}"
               if mc.get("bounded") else f"no interval ({mc['reason']})")
    summary = {
        "schema_version": io.SCHEMA_VERSION,
        "config": config.to_dict(),
        "q_plus": mf["q_plus"], "q_minus": mf["q_minus"],
        "epsilon": reports["lemma4"]["epsilon"],
        "certified_gap": sp["bound"], "measured_gap": sp["measured_gap"], "gap_below_gamma": sp["membership"]["gap_ok"],
        "log_z": reports["exactz"]["log_z"], "log_z_free": reports["exactz"]["log_z_free"],
        "ratio_window": {"log_ratio_over_center": reports["lemma4"]["log_ratio_over_center"],
                         "log_window": reports["lemma4"]["log_window"], "pass": reports["lemma4"]["pass"]},
        "maxcut": mc,
        "verdict": verdict,
    }
    if out_dir is not None:
        (out_dir / "summary.json").write_text(io.dumps(summary))
    return summary
