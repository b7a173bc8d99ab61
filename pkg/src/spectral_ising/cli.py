"""Command-line front end. Every command prints one JSON report (or key: value text)."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from spectral_ising import io, reduction
from spectral_ising.core import brute_force_log_z
from spectral_ising.gadget import (
    CliqueGadget,
    brute_force_phase_balance,
    build_regular_gadget,
    exact_phase_masses,
    gadget_epsilon,
    terminal_distribution,
    verify_regular_gadget,
)
from spectral_ising.glauber import STARTS, UniformCoupling, mixing_experiment
from spectral_ising.meanfield import solve_clique_fixed_points, solve_tree_fixed_points, thresholds
from spectral_ising.pipeline import BUILTIN_GRAPHS, ExperimentConfig, StageError, run_pipeline
from spectral_ising.spectral import extreme_eigenvalues, validate_instance, weyl_certificate


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message)


def _number(text: str):
    """int, p/q Fraction, or float; rationals keep gadget weights exact."""
    try:
        return io.parse_weight(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _graph(path: str):
    return BUILTIN_GRAPHS[path.lower()]() if path.lower() in BUILTIN_GRAPHS else io.parse_graph(path)


# ---------------------------------------------------------------- commands


def cmd_meanfield(a):
    if a.d is None:
        return solve_clique_fixed_points(float(a.beta), xtol=min(a.tol, 1e-13)).to_dict()
    tree = solve_tree_fixed_points(a.d, float(a.beta))
    out = tree.to_dict()
    out.update({"roots": [tree.tilde_q_minus, 1.0, tree.tilde_q_plus], "near_critical": False})
    return out


def cmd_thresholds(a):
    return thresholds(a.d).to_dict()


def _clique(a):
    return CliqueGadget(a.n, a.t, a.beta, strict=not a.no_strict)


def cmd_gadget(a):
    if a.action == "build-clique":
        g = _clique(a)
        J = g.interaction()
        io.write_matrix(J, a.out)
        return {"n": g.n, "t": g.t, "r": g.r, "beta": g.beta, "out": str(a.out), "nnz": J.nnz}
    if a.action == "verify-clique":
        g = _clique(a)
        plus, minus = terminal_distribution(g, "+"), terminal_distribution(g, "-")
        masses = exact_phase_masses(g)
        out = {"n": g.n, "t": g.t, "beta": g.beta, "epsilon": gadget_epsilon(g),
               "phase_balance": {"exact_equal": masses["+"].counts == masses["-"].counts,
                                 "log_mass_plus": plus.log_phase_mass, "log_mass_minus": minus.log_phase_mass},
               "per_tau": {"+": plus.per_tau(), "-": minus.per_tau()}}
        if a.brute:
            lp, lm = brute_force_phase_balance(g.interaction(), g.terminals)
            out["phase_balance"]["brute_force_equal"] = lp.counts == lm.counts
        return out
    g = build_regular_gadget(a.n, a.d, a.seed, t=a.t, beta=float(a.beta))
    if a.action == "build-regular":
        io.write_matrix(g.interaction(), a.out)
        if a.graph_out:
            io.write_graph(reduction.MaxCutInstance.from_edges(g.n, g.edges), a.graph_out)
        return {"n": g.n, "d": g.d, "t": g.t, "beta": g.beta, "seed": g.seed, "out": str(a.out)}
    return verify_regular_gadget(g, a.epsilon_target, a.samples, a.seed, a.chains)


def cmd_spectrum(a):
    J = io.parse_matrix(a.input)
    if a.gamma is None and a.d is None:
        return extreme_eigenvalues(J, a.tol, a.method).to_dict()
    return validate_instance(J, a.gamma if a.gamma is not None else float("inf"), a.d, a.tol)


def cmd_reduce(a):
    H = _graph(a.graph)
    if a.variant == "sparse" and a.d is None:
        raise UsageError("--variant sparse needs --d")
    cfg = ExperimentConfig(graph=a.graph, variant=a.variant, gamma=float(a.gamma), t=a.t, n=a.n, d=a.d,
                           eta=a.eta, seed=a.seed, max_epsilon=a.max_epsilon, strict=not a.no_strict)
    params = cfg.params()
    inst = reduction.build_reduction(H, params)
    if a.out:
        io.write_matrix(inst.J, a.out)
    if a.meta:
        Path(a.meta).write_text(io.dumps(io.instance_meta(inst)))
    cert = weyl_certificate(inst, a.tol)
    return {"params": inst.params.to_dict(), "size": inst.size, "m": inst.m, "audit": inst.audit(),
            "certificate": cert.to_dict(), "out": a.out, "meta": a.meta}


def cmd_exactz(a):
    if a.method == "structured":
        if not a.meta:
            raise UsageError("--method structured needs --meta")
        inst = io.load_meta(a.meta)
        return {"method": "structured", "log_z": reduction.structured_log_z(inst, True),
                "log_z_free": reduction.structured_log_z(inst, False), "size": inst.size}
    if a.input:
        J = io.parse_matrix(a.input)
    elif a.meta:
        J = io.load_meta(a.meta).J
    else:
        raise UsageError("--method brute needs --in or --meta")
    return {"method": "brute", "log_z": brute_force_log_z(J).log_z, "size": J.n}


def cmd_lemma4(a):
    return reduction.lemma4_check(io.load_meta(a.meta), a.psi_scale, a.exponent)


def cmd_maxcut(a):
    if a.action == "brute":
        H = _graph(a.graph)
        return {"m": H.m, "edges": len(H.edges), "cubic": H.is_cubic, "maxcut": reduction.brute_force_maxcut(H),
                "random_cut_floor": reduction.random_cut_floor(H)}
    return reduction.estimate_maxcut(io.load_meta(a.meta), a.delta, a.psi_scale)


def cmd_glauber(a):
    if a.input:
        J = io.parse_matrix(a.input)
    elif a.clique_n:
        if a.beta is None:
            raise UsageError("--clique-n needs --beta")
        J = UniformCoupling.clique(a.clique_n, float(a.beta))
    else:
        raise UsageError("give --in file.sym or --clique-n N --beta B")
    rep = mixing_experiment(J, a.start, a.sweeps, a.seed, debug=a.debug).to_dict()
    if a.report:
        Path(a.report).write_text(io.dumps({"schema_version": io.SCHEMA_VERSION, "command": "glauber",
                                            "result": rep}))
    return rep


def cmd_pipeline(a):
    data = {}
    if a.config:
        import json

        data = json.loads(Path(a.config).read_text())
    for key in ("graph", "variant", "gamma", "t", "n", "d", "eta", "max_epsilon", "psi_scale", "exponent", "delta"):
        val = getattr(a, key)
        if val is not None:
            data[key] = val
    data.setdefault("seed", a.seed)
    data.setdefault("tol", a.tol)
    cfg = ExperimentConfig.from_mapping(data)
    return run_pipeline(cfg, a.out_dir)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress):
        # subcommands repeat the global flags without defaults so they do not mask earlier values
        g = _Parser(add_help=False)
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=dflt(0))
        g.add_argument("--threads", type=int, default=dflt(1), help="worker threads (kernels are serial)")
        g.add_argument("--tol", type=float, default=dflt(1e-10))
        g.add_argument("--format", choices=("json", "text"), default=dflt("json"))
        return g

    common = global_flags(True)
    p = _Parser(prog="spectral-ising", description="Ising partition functions under a spectral-gap constraint.",
                parents=[global_flags(False)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("meanfield", parents=[common], help="clique or tree phase biases")
    s.add_argument("--beta", type=_number, required=True)
    s.add_argument("--d", type=int)
    s.set_defaults(func=cmd_meanfield)

    s = sub.add_parser("thresholds", parents=[common], help="beta_d, lambda_d and the sparse gamma threshold")
    s.add_argument("--d", type=int, required=True)
    s.set_defaults(func=cmd_thresholds)

    s = sub.add_parser("gadget", parents=[common], help="build or verify clique / regular gadgets")
    s.add_argument("action", choices=("build-clique", "verify-clique", "build-regular", "verify-regular"))
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--t", type=int, default=1)
    s.add_argument("--beta", type=_number, required=True)
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--out")
    s.add_argument("--graph-out")
    s.add_argument("--no-strict", action="store_true", help="allow even r and beta <= 1 for clique gadgets")
    s.add_argument("--brute", action="store_true", help="also check phase balance by full enumeration")
    s.add_argument("--epsilon-target", type=float, default=0.1)
    s.add_argument("--samples", type=int, default=20_000)
    s.add_argument("--chains", type=int, default=8)
    s.set_defaults(func=cmd_gadget)

    s = sub.add_parser("spectrum", parents=[common], help="extreme eigenvalues and class membership")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--gamma", type=float)
    s.add_argument("--d", type=int)
    s.add_argument("--method", choices=("auto", "dense", "lanczos"), default="auto")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("reduce", parents=[common], help="build the reduced instance of a cubic graph")
    s.add_argument("--graph", required=True, help="a .graph file or one of " + ", ".join(BUILTIN_GRAPHS))
    s.add_argument("--gamma", type=_number, required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--variant", choices=("dense", "sparse"), default="dense")
    s.add_argument("--d", type=int)
    s.add_argument("--eta", type=float)
    s.add_argument("--max-epsilon", type=float, default=0.1)
    s.add_argument("--no-strict", action="store_true")
    s.add_argument("--out")
    s.add_argument("--meta")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("exactz", parents=[common], help="exact log Z")
    s.add_argument("--method", choices=("brute", "structured"), default="brute")
    s.add_argument("--in", dest="input")
    s.add_argument("--meta")
    s.set_defaults(func=cmd_exactz)

    s = sub.add_parser("lemma4", parents=[common], help="ratio window check on a reduced instance")
    s.add_argument("--meta", required=True)
    s.add_argument("--psi-scale", type=float, default=1.0)
    s.add_argument("--exponent", choices=("construction", "tripled"), default="construction")
    s.set_defaults(func=cmd_lemma4)

    s = sub.add_parser("maxcut", parents=[common], help="exact MaxCut or the interval from exact Z")
    s.add_argument("action", choices=("brute", "estimate"))
    s.add_argument("--graph")
    s.add_argument("--meta")
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--psi-scale", type=float, default=1.0)
    s.set_defaults(func=cmd_maxcut)

    s = sub.add_parser("glauber", parents=[common], help="heat-bath chain with phase diagnostics")
    s.add_argument("--in", dest="input")
    s.add_argument("--clique-n", type=int)
    s.add_argument("--beta", type=_number)
    s.add_argument("--start", choices=STARTS, default="all-plus")
    s.add_argument("--sweeps", type=int, default=1000)
    s.add_argument("--report")
    s.add_argument("--debug", action="store_true", help="audit cached local fields every 1000 sweeps")
    s.set_defaults(func=cmd_glauber)

    s = sub.add_parser("pipeline", parents=[common], help="run every stage and write per-stage reports")
    s.add_argument("--config")
    s.add_argument("--out-dir")
    s.add_argument("--graph")
    s.add_argument("--variant", choices=("dense", "sparse"))
    s.add_argument("--gamma", type=float)
    s.add_argument("--t", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--d", type=int)
    s.add_argument("--eta", type=float)
    s.add_argument("--max-epsilon", type=float)
    s.add_argument("--psi-scale", type=float)
    s.add_argument("--exponent", choices=("construction", "tripled"))
    s.add_argument("--delta", type=float)
    s.set_defaults(func=cmd_pipeline)
    return p


def _as_text(obj, prefix="") -> list[str]:
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            key = f"{prefix}.{k}" if prefix else str(k)
            if isinstance(v, dict) or (isinstance(v, list) and v and isinstance(v[0], dict)):
                lines += _as_text(v, key)
            else:
                lines.append(f"{key}: {v}")
    elif isinstance(obj, list):
        for k, v in enumerate(obj):
            lines += _as_text(v, f"{prefix}[{k}]")
    else:
        lines.append(f"{prefix}: {obj}")
    return lines


def _emit(payload, fmt, stream):
    if fmt == "text":
        body = payload.get("result", payload.get("error"))
        stream.write("\n".join(_as_text(io.jsonable(body))) + "\n")
    else:
        stream.write(io.dumps(payload))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    fmt = "text" if "--format" in argv and argv[argv.index("--format") + 1:][:1] == ["text"] else "json"
    command = next((x for x in argv if not x.startswith("-")), None)
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        result = args.func(args)
    except StageError as exc:
        payload = {"schema_version": io.SCHEMA_VERSION, "command": command,
                   "error": {"type": type(exc.cause).__name__, "stage": exc.stage, "message": str(exc.cause)}}
        _emit(payload, fmt, sys.stderr)
        return 1
    except (ValueError, IndexError, OSError, KeyError) as exc:
        payload = {"schema_version": io.SCHEMA_VERSION, "command": command,
                   "error": {"type": type(exc).__name__, "message": str(exc)}}
        _emit(payload, fmt, sys.stderr)
        return 2
    except RuntimeError as exc:
        payload = {"schema_version": io.SCHEMA_VERSION, "command": command,
                   "error": {"type": type(exc).__name__, "message": str(exc)}}
        _emit(payload, fmt, sys.stderr)
        return 1
    _emit({"schema_version": io.SCHEMA_VERSION, "command": command, "result": result}, args.format, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
