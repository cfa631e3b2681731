"""Command-line interface.

Subcommands: spectrum, kernel, coupling, residual-sweep, graph-limit,
oracle-compare, run.  Exit codes: 0 success, 2 validation error,
3 numerical failure.  WGL_THREADS caps the sweep worker pool.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .coupling import SingularSystemError, kirchhoff_projector
from .experiments import (
    ConfigError,
    ExperimentConfig,
    FitError,
    edge_function_from_spec,
    run_sweep,
)
from .fd_oracle import OracleError, WaveguideGrid, fd_resolvent
from .graph_limit import (
    apply_resolvent_grid,
    decoupled_resolvent,
    kirchhoff_resolvent,
)
from .kernels import KernelError, NearEigenvalueError, vertex_kernel_at
from .profile import CurvatureProfile, ProfileError, tune_to_resonance
from .residual import assemble, data_norm
from .vertex_spectrum import IntegrationError, SpectrumError, eigenvalues

VALIDATION_ERRORS = (ConfigError, ProfileError, FitError, ValueError)
NUMERICAL_ERRORS = (NearEigenvalueError, SingularSystemError, IntegrationError,
                    SpectrumError, KernelError, OracleError)


def _parse_profile(text: str) -> CurvatureProfile:
    if text == "zero":
        return CurvatureProfile.zero()
    if text.startswith("bump:"):
        return CurvatureProfile.bump(float(text.split(":", 1)[1]))
    if text.startswith("tuned:"):
        return tune_to_resonance(CurvatureProfile.bump(0.5),
                                 int(text.split(":", 1)[1]))
    if text.startswith("{"):
        return CurvatureProfile.from_json_fragment(json.loads(text))
    raise ConfigError(f"cannot parse profile {text!r} "
                      "(use zero | bump:A | tuned:K | JSON fragment)")


def _parse_z(text: str) -> complex:
    re, im = text.split(",")
    return complex(float(re), float(im))


def _parse_eps_grid(text: str) -> tuple[float, ...]:
    if text.startswith("2^-") and ".." in text:
        lo, hi = text[3:].split("..2^-")
        return tuple(2.0**-k for k in range(int(lo), int(hi) + 1))
    return tuple(float(v) for v in text.split(","))


def _parse_delta_rule(text: str) -> tuple[str, float]:
    kind, _, value = text.partition(":")
    if kind == "fixed-ratio":
        return ("ratio", float(value))
    if kind == "power":
        return ("power", float(value))
    raise ConfigError(f"cannot parse delta rule {text!r} "
                      "(use fixed-ratio:R | power:A)")


def _parse_edge_fn(text: str | None):
    if text is None or text == "none":
        return None
    kind, _, rest = text.partition(":")
    if kind == "exp":
        return {"type": "exp", "rate": float(rest or 1.0)}
    if kind == "gaussian":
        c, w = (rest or "3,0.5").split(",")
        return {"type": "gaussian", "center": float(c), "width": float(w)}
    if kind == "indicator":
        lo, hi = (rest or "0,1").split(",")
        return {"type": "indicator", "lo": float(lo), "hi": float(hi)}
    raise ConfigError(f"cannot parse edge function {text!r}")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _cmd_spectrum(args) -> int:
    profile = _parse_profile(args.profile)
    spec = eigenvalues(profile, args.count, args.tol)
    rows = [
        (n + 1, float(spec.eigenvalues[n]), spec.functions[n].at_minus1,
         spec.functions[n].at_plus1)
        for n in range(args.count)
    ]
    _write_csv(args.out, ["n", "lambda", "y_at_minus1", "y_at_plus1"], rows)
    print(f"wrote {args.out} ({args.count} eigenvalues, "
          f"case={'2' if spec.resonant else '1'})")
    return 0


def _cmd_kernel(args) -> int:
    profile = _parse_profile(args.profile)
    kernel = vertex_kernel_at(profile, _parse_z(args.z), mode=args.mode,
                              n_terms=args.n_terms)
    grid = np.linspace(-1.0, 1.0, args.grid)
    rows = []
    for s in grid:
        vals = kernel.value(np.full(args.grid, s), grid)
        for sp, v in zip(grid, np.atleast_1d(vals)):
            rows.append((float(s), float(sp), v.real, v.imag))
    _write_csv(args.out, ["s", "s_prime", "re", "im"], rows)
    print(f"wrote {args.out} ({args.grid}x{args.grid} kernel grid)")
    return 0


def _build_config(args, metric: str) -> ExperimentConfig:
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = ExperimentConfig.from_json_dict(json.load(fh))
        return cfg
    kwargs = dict(
        profile=_parse_profile(args.profile),
        metric=metric,
        z=_parse_z(args.z),
        eps_grid=_parse_eps_grid(args.eps_grid),
        delta_rule=_parse_delta_rule(args.delta_rule),
        window_policy=args.window_policy,
    )
    if metric == "coupling":
        p1 = _parse_z(args.p1)
        p2 = _parse_z(args.p2)
        kwargs["p"] = (p1, p2)
    else:
        kwargs["n"] = args.n
        kwargs["f1"] = _parse_edge_fn(args.f1)
        kwargs["f2"] = _parse_edge_fn(args.f2)
        kwargs["p"] = None
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def _run_and_persist(cfg: ExperimentConfig, out: str) -> int:
    result = run_sweep(cfg)
    result.to_csv(out)
    json_path = out + ".json" if not out.endswith(".json") else out
    result.to_json(json_path)
    for col, fit in sorted(result.slopes.items()):
        print(f"{col}: slope={fit.slope:.4f} +- {fit.half_width:.4f} "
              f"(window from point {fit.window_start}, {fit.n_points} pts)")
    if result.failures:
        print(f"{len(result.failures)} point(s) failed and were excluded")
    print(f"wrote {out} and {json_path}")
    return 0


def _cmd_coupling(args) -> int:
    return _run_and_persist(_build_config(args, "coupling"), args.out)


def _cmd_residual_sweep(args) -> int:
    return _run_and_persist(_build_config(args, "residual"), args.out)


def _cmd_graph_limit(args) -> int:
    return _run_and_persist(_build_config(args, "graph-limit"), args.out)


def _cmd_run(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        cfg = ExperimentConfig.from_json_dict(json.load(fh))
    return _run_and_persist(cfg, args.out)


def _cmd_oracle_compare(args) -> int:
    profile = _parse_profile(args.profile)
    z = _parse_z(args.z)
    f1 = edge_function_from_spec(_parse_edge_fn(args.f1))
    f2 = edge_function_from_spec(_parse_edge_fn(args.f2))
    eps = args.epsilon
    delta = args.delta if args.delta is not None else eps**args.delta_power
    grid = WaveguideGrid.build(eps, delta, z, h_u=args.h_u, h_s=args.h_s)
    sol = assemble(profile, args.n, z, eps, delta, f1, f2)
    if sol.case.resonant:
        res = kirchhoff_resolvent(z, kirchhoff_projector(sol.case.alpha1,
                                                         sol.case.alpha2))
    else:
        res = decoupled_resolvent(z)
    fd = fd_resolvent(grid, profile, args.n, z, f1, f2)
    s_nodes = grid.edge_s
    he = grid.h_edge

    def edge_l2_sq(values: np.ndarray) -> float:
        w = np.full(len(values), he)
        w[0] = w[-1] = he / 2.0
        return float(np.sum(w * np.abs(values) ** 2))

    fnorm = data_norm(f1, f2)
    mismatch_sq = 0.0
    hat_sq = 0.0
    for edge, f in ((1, f1), (2, f2)):
        proj = fd.edge_projection(edge)
        graph_vals = apply_resolvent_grid(res, f1, f2, s_nodes, edge)
        hat_vals = sol.edge_profile(edge, s_nodes)
        mismatch_sq += edge_l2_sq(proj - graph_vals)
        hat_sq += edge_l2_sq(proj - hat_vals)
    report = {
        "schema_version": 1,
        "grid": {
            "h_u": grid.h_u, "h_s": grid.h_edge, "s_max": grid.s_max,
            "unknowns": grid.n_unknowns,
        },
        "tolerances": {"solve_residual": fd.solve_residual,
                       "truncation": 1e-8},
        "norms": {"data": fnorm, "fd_energy": fd.energy_norm()},
        "mismatch": float(np.sqrt(mismatch_sq)) / fnorm,
        "hat_vs_discrete": float(np.sqrt(hat_sq)),
        "case": "2" if sol.case.resonant else "1",
        "refinement_factor": None,
    }
    if args.refine:
        fine = grid.refined(s_factor=2)
        fd2 = fd_resolvent(fine, profile, args.n, z, f1, f2)
        hat2_sq = 0.0
        for edge in (1, 2):
            proj = fd2.edge_projection(edge)
            hat_vals = sol.edge_profile(edge, fine.edge_s)
            w = np.full(len(proj), fine.h_edge)
            w[0] = w[-1] = fine.h_edge / 2.0
            hat2_sq += float(np.sum(w * np.abs(proj - hat_vals) ** 2))
        report["refinement_factor"] = float(np.sqrt(hat_sq / hat2_sq))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    print(f"mismatch={report['mismatch']:.4f} "
          f"refinement_factor={report['refinement_factor']}")
    print(f"wrote {args.out}")
    return 0


def _add_sweep_flags(sub, coupling: bool) -> None:
    sub.add_argument("--config", help="JSON config file (overrides flags)")
    sub.add_argument("--profile", default="zero")
    sub.add_argument("--z", default="0,1", help="RE,IM")
    sub.add_argument("--eps-grid", default="2^-6..2^-14")
    sub.add_argument("--delta-rule", default="power:1.5")
    sub.add_argument("--window-policy", default="drop:2")
    sub.add_argument("--out", required=True)
    if coupling:
        sub.add_argument("--case", default="auto", choices=["auto"],
                         help="case detection (always auto)")
        sub.add_argument("--p1", default="1,0")
        sub.add_argument("--p2", default="0,0")
    else:
        sub.add_argument("--n", type=int, default=1)
        sub.add_argument("--f1", default="gaussian:3,0.5")
        sub.add_argument("--f2", default="none")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wglimit",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    subs = ap.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("spectrum", help="vertex eigenvalues to CSV")
    sp.add_argument("--profile", default="zero")
    sp.add_argument("--count", type=int, default=6)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_spectrum)

    kp = subs.add_parser("kernel", help="vertex kernel grid to CSV")
    kp.add_argument("--profile", default="zero")
    kp.add_argument("--z", default="0,1")
    kp.add_argument("--grid", type=int, default=21)
    kp.add_argument("--mode", default="wronskian", choices=["wronskian", "series"])
    kp.add_argument("--n-terms", type=int, default=200)
    kp.add_argument("--out", required=True)
    kp.set_defaults(func=_cmd_kernel)

    cp = subs.add_parser("coupling", help="coupling deviation sweep")
    _add_sweep_flags(cp, coupling=True)
    cp.set_defaults(func=_cmd_coupling)

    rp = subs.add_parser("residual-sweep", help="residual norm sweep")
    _add_sweep_flags(rp, coupling=False)
    rp.set_defaults(func=_cmd_residual_sweep)

    gp = subs.add_parser("graph-limit", help="graph resolvent comparison sweep")
    _add_sweep_flags(gp, coupling=False)
    gp.set_defaults(func=_cmd_graph_limit)

    op = subs.add_parser("oracle-compare", help="FD oracle vs graph limit")
    op.add_argument("--profile", default="zero")
    op.add_argument("--z", default="0,1")
    op.add_argument("--epsilon", type=float, default=0.3)
    op.add_argument("--delta", type=float, default=None)
    op.add_argument("--delta-power", type=float, default=3.0)
    op.add_argument("--h-u", type=float, default=1.0 / 32)
    op.add_argument("--h-s", type=float, default=1.0 / 64)
    op.add_argument("--n", type=int, default=1)
    op.add_argument("--f1", default="gaussian:3,0.5")
    op.add_argument("--f2", default="none")
    op.add_argument("--refine", action="store_true")
    op.add_argument("--out", required=True)
    op.set_defaults(func=_cmd_oracle_compare)

    rn = subs.add_parser("run", help="run a sweep from a JSON config")
    rn.add_argument("--config", required=True)
    rn.add_argument("--out", required=True)
    rn.set_defaults(func=_cmd_run)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
