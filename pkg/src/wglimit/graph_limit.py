"""Limit operators on the two-edge graph and their resolvents.

Two self-adjoint realizations of -d^2/ds^2 on two half-lines joined at a
vertex appear as collapse limits:

  * decoupled:  x1(0) = x2(0) = 0 (Dirichlet on both edges), resolvent
    acts edgewise as r0(z);
  * weighted Kirchhoff with weights (a1, a2):  P0perp x(0) = 0 and
    P0 x'(0) = 0, resolvent  r0(z) f_j + q_j exp(i sqrt(z) s)  with
    q = (i/sqrt(z)) P0 p  and  p_j = (r0(z) f_j)'(0).

The comparison against an assembled trial field reduces analytically:
the r0 parts cancel edgewise, leaving pure outgoing tails whose L2 norm
is |q_eps - q| / sqrt(2 Im sqrt(z)) per edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import KirchhoffProjector
from .kernels import HalfLineResolvent, boundary_derivative, half_line_apply, half_line_apply_grid
from .residual import ApproxSolution, chi_mode

__all__ = [
    "GraphResolvent",
    "KindMismatchError",
    "apply_resolvent",
    "apply_resolvent_grid",
    "boundary_limits",
    "decoupled_resolvent",
    "graph_q",
    "kirchhoff_resolvent",
    "limit_comparison",
    "pi_theta_projector",
    "transverse_projection",
]


class KindMismatchError(ValueError):
    """A generic solution was compared against the resonant limit or vice versa."""


@dataclass(frozen=True)
class GraphResolvent:
    """Resolvent of one of the two limit operators at z."""

    kind: str  # "decoupled" | "kirchhoff"
    z: complex
    projector: KirchhoffProjector | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("decoupled", "kirchhoff"):
            raise ValueError(f"unknown graph operator kind {self.kind!r}")
        if self.kind == "kirchhoff" and self.projector is None:
            raise ValueError("weighted Kirchhoff resolvent needs a projector")
        if self.kind == "decoupled" and self.projector is not None:
            raise ValueError("decoupled resolvent takes no projector")


def decoupled_resolvent(z: complex) -> GraphResolvent:
    return GraphResolvent("decoupled", complex(z))


def kirchhoff_resolvent(z: complex, projector: KirchhoffProjector) -> GraphResolvent:
    return GraphResolvent("kirchhoff", complex(z), projector)


def graph_q(res: GraphResolvent, f1, f2) -> np.ndarray:
    """Outgoing amplitudes of the graph resolvent: 0 or (i/sqrt(z)) P0 p."""
    if res.kind == "decoupled":
        return np.zeros(2, dtype=complex)
    r0 = HalfLineResolvent(res.z)
    p = np.array([
        0.0 if f1 is None else boundary_derivative(r0, f1),
        0.0 if f2 is None else boundary_derivative(r0, f2),
    ], dtype=complex)
    return (1j / r0.sqrt_z) * (res.projector.lambda0 @ p)


def apply_resolvent(res: GraphResolvent, f1, f2, s: float, edge: int) -> complex:
    """Edge value of the graph resolvent applied to (f1, f2)."""
    if edge not in (1, 2):
        raise ValueError("edge must be 1 or 2")
    r0 = HalfLineResolvent(res.z)
    f = f1 if edge == 1 else f2
    base = 0.0 if f is None else half_line_apply(r0, f, s)
    if res.kind == "decoupled":
        return complex(base)
    q = graph_q(res, f1, f2)
    return complex(base + q[edge - 1] * np.exp(1j * r0.sqrt_z * s))


def apply_resolvent_grid(res: GraphResolvent, f1, f2, s: np.ndarray,
                         edge: int) -> np.ndarray:
    """Vectorised edge values on a grid of points."""
    r0 = HalfLineResolvent(res.z)
    f = f1 if edge == 1 else f2
    s = np.asarray(s, dtype=float)
    base = np.zeros(s.shape, dtype=complex) if f is None else \
        half_line_apply_grid(r0, f, s)
    if res.kind == "decoupled":
        return base
    q = graph_q(res, f1, f2)
    return base + q[edge - 1] * np.exp(1j * r0.sqrt_z * s)


def _check_kinds(sol: ApproxSolution, res: GraphResolvent) -> None:
    if sol.case.resonant and res.kind != "kirchhoff":
        raise KindMismatchError("resonant solution must be compared to the "
                                "weighted Kirchhoff limit")
    if not sol.case.resonant and res.kind != "decoupled":
        raise KindMismatchError("generic solution must be compared to the "
                                "decoupled limit")
    if res.z != sol.z:
        raise KindMismatchError("solution and resolvent must share z")


def limit_comparison(sol: ApproxSolution, res: GraphResolvent) -> float:
    """L2 distance (both edges) between trial and graph edge profiles.

    The r0 parts agree identically, so the distance is carried by the
    outgoing tails:  ||(q_eps - q) exp(i sqrt(z) .)||  per edge.
    """
    _check_kinds(sol, res)
    q_g = graph_q(res, sol.f1, sol.f2)
    sq = sol.resolvent0.sqrt_z
    tail_sq = 1.0 / (2.0 * sq.imag)
    diff = sol.coeffs.q - q_g
    return float(np.sqrt(float(np.sum(np.abs(diff) ** 2)) * tail_sq))


def boundary_limits(sol: ApproxSolution) -> dict:
    """Vertex boundary-value diagnostics of the edge profiles.

    Generic case: both boundary values must vanish in the limit while
    the derivatives approach p.  Resonant case: the weighted-Kirchhoff
    combinations a2 x1(0) - a1 x2(0) and a1 x1'(0) + a2 x2'(0) vanish.
    """
    q = sol.coeffs.q
    xi = sol.coeffs.xi
    p = sol.coeffs.p
    if not sol.case.resonant:
        return {
            "value_defects": (float(abs(q[0])), float(abs(q[1]))),
            "derivative_defects": (float(abs(xi[0] - p[0])), float(abs(xi[1] - p[1]))),
        }
    a1, a2 = sol.case.alpha1, sol.case.alpha2
    return {
        "kirchhoff_value_defect": float(abs(a2 * q[0] - a1 * q[1])),
        "kirchhoff_flux_defect": float(abs(a1 * xi[0] + a2 * xi[1])),
    }


def pi_theta_projector(alphas) -> np.ndarray:
    """General weighted-Kirchhoff projector  1 - alpha alpha^H / |alpha|^2.

    For two real weights this equals the complement of the rank-one
    vertex projector, bridging the N-edge parameterisation to the
    two-edge limit used here.
    """
    a = np.asarray(alphas, dtype=complex)
    nsq = float(np.sum(np.abs(a) ** 2))
    if nsq <= 0.0:
        raise ValueError("weight vector must be nonzero")
    n = a.size
    return np.eye(n, dtype=complex) - np.outer(a, np.conj(a)) / nsq


def transverse_projection(values: np.ndarray, u_nodes: np.ndarray, n: int,
                          h_u: float) -> np.ndarray:
    """(chi_n, psi)_{L2(0,1)} per s-line for a field sampled on interior u nodes.

    With uniform interior nodes and Dirichlet walls this midpoint sum is
    exactly the discrete-sine expansion coefficient.
    """
    chi = chi_mode(n, u_nodes)
    return h_u * (values @ chi)
