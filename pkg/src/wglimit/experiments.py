"""Parameter sweeps, slope fitting and result persistence.

A sweep walks eps down a strictly decreasing grid, pairs it with a width
delta through a rule (fixed ratio delta = r*eps or power delta = eps^a),
evaluates one of the registered metrics per point, and fits log-log
slopes on a stabilised window.  Results persist as CSV (rows plus a
trailing slope summary) and JSON; both embed the fully resolved config
so outputs are self-describing and bitwise reproducible.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .coupling import (
    SingularSystemError,
    asymptotic_deviation,
    kirchhoff_projector,
    resonant_projector,
    solve_coupling,
)
from .graph_limit import (
    boundary_limits,
    decoupled_resolvent,
    kirchhoff_resolvent,
    limit_comparison,
)
from .kernels import (
    ExpDecay,
    GaussianPulse,
    HalfLineResolvent,
    Indicator,
    KernelError,
    NearEigenvalueError,
    boundary_derivative,
)
from .profile import CurvatureProfile, ProfileError
from .residual import assemble, residual_norms
from .vertex_spectrum import IntegrationError, SpectrumError

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "FitError",
    "SCHEMA_VERSION",
    "SlopeFit",
    "SweepResult",
    "default_eps_grid",
    "delta_for",
    "edge_function_from_spec",
    "fit_slope",
    "run_sweep",
]

SCHEMA_VERSION = 1
POINT_ERRORS = (NearEigenvalueError, SingularSystemError, IntegrationError,
                SpectrumError, KernelError, ProfileError, OverflowError)


class ConfigError(ValueError):
    pass


class FitError(ValueError):
    pass


def default_eps_grid(k_min: int = 6, k_max: int = 14) -> tuple[float, ...]:
    return tuple(2.0**-k for k in range(k_min, k_max + 1))


def edge_function_from_spec(spec: dict | None):
    """Build an edge data record from its JSON descriptor."""
    if spec is None:
        return None
    kind = spec.get("type")
    if kind == "exp":
        return ExpDecay(rate=float(spec.get("rate", 1.0)))
    if kind == "gaussian":
        return GaussianPulse(center=float(spec.get("center", 3.0)),
                             width=float(spec.get("width", 0.5)))
    if kind == "indicator":
        return Indicator(lo=float(spec.get("lo", 0.0)), hi=float(spec.get("hi", 1.0)))
    raise ConfigError(f"unknown edge function spec {spec!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved sweep description; serialises losslessly to JSON."""

    profile: CurvatureProfile
    metric: str = "coupling"
    z: complex = 1j
    n: int = 1
    eps_grid: tuple[float, ...] = field(default_factory=default_eps_grid)
    delta_rule: tuple[str, float] = ("power", 1.5)
    p: tuple[complex, complex] | None = (1.0 + 0j, 0.0 + 0j)
    f1: dict | None = None
    f2: dict | None = None
    quadrature_panels: tuple[int, int] = (64, 16)
    quadrature_order: int = 8
    zero_tolerance: float = 1e-9
    window_policy: str = "drop:2"
    seed: int = 0

    def validate(self) -> None:
        if self.metric not in ("coupling", "residual", "graph-limit"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if not self.eps_grid:
            raise ConfigError("eps_grid must be nonempty")
        eps = np.asarray(self.eps_grid, dtype=float)
        if np.any(eps <= 0) or np.any(eps > 1):
            raise ConfigError("eps values must lie in (0, 1]")
        if np.any(np.diff(eps) >= 0):
            raise ConfigError("eps_grid must be strictly decreasing")
        kind, value = self.delta_rule
        if kind == "power":
            if value < 1.0:
                raise ConfigError("power rule needs exponent >= 1 (delta <= eps)")
        elif kind == "ratio":
            if not 0.0 < value <= 1.0:
                raise ConfigError("ratio rule needs 0 < r <= 1")
        else:
            raise ConfigError(f"unknown delta rule {kind!r}")
        if self.metric in ("residual", "graph-limit") and self.f1 is None and self.f2 is None:
            raise ConfigError(f"metric {self.metric!r} needs edge data f1/f2")
        if self.n < 1:
            raise ConfigError("transverse index n must be >= 1")
        if self.quadrature_order < 4:
            raise ConfigError("quadrature order must be >= 4")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "profile": self.profile.to_json_fragment(),
            "metric": self.metric,
            "z": [self.z.real, self.z.imag],
            "n": self.n,
            "eps_grid": list(self.eps_grid),
            "delta_rule": [self.delta_rule[0], self.delta_rule[1]],
            "p": None if self.p is None else [[c.real, c.imag] for c in self.p],
            "f1": self.f1,
            "f2": self.f2,
            "quadrature_panels": list(self.quadrature_panels),
            "quadrature_order": self.quadrature_order,
            "zero_tolerance": self.zero_tolerance,
            "window_policy": self.window_policy,
            "seed": self.seed,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ExperimentConfig":
        try:
            profile = CurvatureProfile.from_json_fragment(d["profile"])
            z = complex(d["z"][0], d["z"][1])
            p = d.get("p")
            if p is not None:
                p = (complex(p[0][0], p[0][1]), complex(p[1][0], p[1][1]))
            cfg = ExperimentConfig(
                profile=profile,
                metric=d.get("metric", "coupling"),
                z=z,
                n=int(d.get("n", 1)),
                eps_grid=tuple(float(e) for e in d["eps_grid"]),
                delta_rule=(d["delta_rule"][0], float(d["delta_rule"][1])),
                p=p,
                f1=d.get("f1"),
                f2=d.get("f2"),
                quadrature_panels=tuple(d.get("quadrature_panels", (64, 16))),
                quadrature_order=int(d.get("quadrature_order", 8)),
                zero_tolerance=float(d.get("zero_tolerance", 1e-9)),
                window_policy=d.get("window_policy", "drop:2"),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError, ProfileError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg


def delta_for(rule: tuple[str, float], eps: float) -> float:
    kind, value = rule
    if kind == "power":
        return eps**value
    if kind == "ratio":
        return value * eps
    raise ConfigError(f"unknown delta rule {kind!r}")


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    half_width: float
    window_start: int
    n_points: int


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    n = len(x)
    xm = x - x.mean()
    sxx = float(np.sum(xm * xm))
    slope = float(np.sum(xm * y) / sxx)
    icept = float(y.mean() - slope * x.mean())
    r = y - (icept + slope * x)
    se = math.sqrt(float(np.sum(r * r)) / max(n - 2, 1) / sxx)
    return slope, 2.0 * se


def fit_slope(eps, values, window_policy: str = "stabilize",
              min_points: int = 4) -> SlopeFit:
    """Log-log OLS slope of values against eps on a stabilised window.

    Rows must be ordered by decreasing eps.  Policy ``drop:k`` discards
    the k largest-eps points; ``stabilize`` drops leading points until
    the slope moves by less than 0.02 between successive windows.
    """
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    good = np.isfinite(values) & (values > 0.0) & np.isfinite(eps)
    eps, values = eps[good], values[good]
    if len(eps) < min_points:
        raise FitError(f"need at least {min_points} usable points, have {len(eps)}")
    x = np.log(eps)
    y = np.log(values)
    if window_policy.startswith("drop:"):
        k = int(window_policy.split(":", 1)[1])
        if len(x) - k < min_points:
            raise FitError("window policy drops too many points")
        slope, hw = _ols(x[k:], y[k:])
        return SlopeFit(slope, hw, k, len(x) - k)
    if window_policy != "stabilize":
        raise FitError(f"unknown window policy {window_policy!r}")
    prev = None
    best = None
    for k in range(0, len(x) - min_points + 1):
        slope, hw = _ols(x[k:], y[k:])
        if prev is not None and abs(prev[0] - slope) < 0.02:
            return SlopeFit(prev[0], prev[1], k - 1, len(x) - (k - 1))
        prev = (slope, hw)
        best = SlopeFit(slope, hw, k, len(x) - k)
    return best


def _edge_data(config: ExperimentConfig):
    return edge_function_from_spec(config.f1), edge_function_from_spec(config.f2)


def _coupling_p(config: ExperimentConfig) -> np.ndarray:
    if config.p is not None:
        return np.asarray(config.p, dtype=complex)
    f1, f2 = _edge_data(config)
    r0 = HalfLineResolvent(config.z)
    return np.array([
        0.0 if f1 is None else boundary_derivative(r0, f1),
        0.0 if f2 is None else boundary_derivative(r0, f2),
    ], dtype=complex)


def _point_row(config: ExperimentConfig, eps: float) -> dict:
    delta = delta_for(config.delta_rule, eps)
    row: dict = {"epsilon": eps, "delta": delta}
    if config.metric == "coupling":
        p = _coupling_p(config)
        coeffs = solve_coupling(config.profile, config.z, eps, p,
                                config.zero_tolerance)
        proj = None
        if coeffs.case.resonant:
            proj = resonant_projector(config.profile, config.z, config.zero_tolerance)
        dev = asymptotic_deviation(coeffs, proj)
        row["dev_q"] = dev.dev_q
        row["dev_xi"] = dev.dev_xi
        if dev.dev_xi_naive is not None:
            row["dev_xi_naive"] = dev.dev_xi_naive
        return row
    f1, f2 = _edge_data(config)
    sol = assemble(config.profile, config.n, config.z, eps, delta, f1, f2,
                   config.zero_tolerance)
    if config.metric == "residual":
        rep = residual_norms(sol, config.quadrature_order, config.quadrature_panels)
        bound = rep.bound_case2 if sol.case.resonant else rep.bound_case1
        row["residual_Hnorm"] = rep.residual_Hnorm
        row["residual_l2_V"] = rep.residual_l2_V
        row["xi_norm"] = rep.xi_norms[0] + rep.xi_norms[1]
        row["data_norm"] = rep.data_norm
        row["bound_ratio"] = rep.residual_l2_V / bound if bound > 0 else float("nan")
        return row
    # graph-limit
    if sol.case.resonant:
        res = kirchhoff_resolvent(config.z, kirchhoff_projector(
            sol.case.alpha1, sol.case.alpha2))
    else:
        res = decoupled_resolvent(config.z)
    row["comparison_norm"] = limit_comparison(sol, res)
    lims = boundary_limits(sol)
    if sol.case.resonant:
        row["kirchhoff_value_defect"] = lims["kirchhoff_value_defect"]
        row["kirchhoff_flux_defect"] = lims["kirchhoff_flux_defect"]
    else:
        row["value_defect_1"], row["value_defect_2"] = lims["value_defects"]
        row["deriv_defect_1"], row["deriv_defect_2"] = lims["derivative_defects"]
    return row


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    rows: tuple[dict, ...]
    slopes: dict
    failures: tuple[dict, ...]
    schema_version: int = SCHEMA_VERSION
    version: str = __version__

    def columns(self) -> list[str]:
        cols: list[str] = []
        for row in self.rows:
            for key in row:
                if key not in cols:
                    cols.append(key)
        return cols

    def to_csv(self, path) -> None:
        cols = self.columns()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# wglimit sweep schema_version={self.schema_version} "
                     f"version={self.version}\n")
            fh.write("# config: " + json.dumps(self.config.to_json_dict(),
                                               sort_keys=True) + "\n")
            writer = csv.writer(fh)
            writer.writerow(cols)
            for row in self.rows:
                writer.writerow([repr(row.get(c, "")) if isinstance(row.get(c), float)
                                 else row.get(c, "") for c in cols])
            slope_row = ["slope"] + [
                repr(self.slopes[c].slope) if c in self.slopes else ""
                for c in cols[1:]
            ]
            writer.writerow(slope_row)
            hw_row = ["slope_half_width"] + [
                repr(self.slopes[c].half_width) if c in self.slopes else ""
                for c in cols[1:]
            ]
            writer.writerow(hw_row)

    def to_json(self, path) -> None:
        payload = {
            "schema_version": self.schema_version,
            "version": self.version,
            "config": self.config.to_json_dict(),
            "rows": list(self.rows),
            "slopes": {
                k: {"slope": v.slope, "half_width": v.half_width,
                    "window_start": v.window_start, "n_points": v.n_points}
                for k, v in self.slopes.items()
            },
            "failures": list(self.failures),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def _workers(n_points: int) -> int:
    env = os.environ.get("WGL_THREADS")
    if env is None:
        return 1
    try:
        cap = int(env)
    except ValueError as exc:
        raise ConfigError(f"WGL_THREADS must be an integer, got {env!r}") from exc
    return max(1, min(cap, n_points))


def run_sweep(config: ExperimentConfig) -> SweepResult:
    """Evaluate the configured metric over the eps grid and fit slopes.

    Per-point numerical failures are recorded and excluded from the fit;
    they do not abort the sweep.
    """
    config.validate()
    eps_list = list(config.eps_grid)
    workers = _workers(len(eps_list))
    results: list[tuple[float, dict | None, str | None]] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [(eps, pool.submit(_point_row, config, eps)) for eps in eps_list]
            for eps, fut in futs:
                try:
                    results.append((eps, fut.result(), None))
                except POINT_ERRORS as exc:
                    results.append((eps, None, str(exc)))
    else:
        for eps in eps_list:
            try:
                results.append((eps, _point_row(config, eps), None))
            except POINT_ERRORS as exc:
                results.append((eps, None, str(exc)))
    results.sort(key=lambda t: -t[0])
    rows = tuple(r for _, r, err in results if err is None)
    failures = tuple({"epsilon": eps, "error": err}
                     for eps, _, err in results if err is not None)
    slopes: dict = {}
    if rows:
        eps_arr = np.array([r["epsilon"] for r in rows])
        for col in rows[0]:
            if col in ("epsilon", "delta"):
                continue
            vals = np.array([r.get(col, float("nan")) for r in rows], dtype=float)
            try:
                slopes[col] = fit_slope(eps_arr, vals, config.window_policy)
            except FitError:
                continue
    return SweepResult(config, rows, slopes, failures)
