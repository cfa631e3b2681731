"""Resolvent kernels: vertex Green's function, free Neumann kernel and
the half-line Dirichlet resolvent with its boundary derivative.

Vertex kernel.  With the shooting solutions zeta, eta of the vertex
problem and their Wronskian Wv,

    r(z; s, s') = zeta(z; min) * eta(z; max) / Wv(z),

valid for z away from the eigenvalues.  A second, independent route
evaluates the eigenfunction expansion sum y_n(s) y_n(s') / (lambda_n - z)
from a cosine-Galerkin diagonalisation; its slowly convergent free part
is resummed in closed form so finite truncations are accurate at the
corners as well.

Half line.  For Im sqrt(z) > 0 the Dirichlet resolvent on (0, inf) has
the method-of-images kernel

    K(s, t) = (i / (2 k)) [exp(i k |s-t|) - exp(i k (s+t))],  k = sqrt(z)

(at z = -mu^2 this is the classical (exp(-mu|s-t|) - exp(-mu(s+t)))/(2 mu),
which fixes the sign of the prefactor), and its boundary derivative
functional reduces analytically to

    p = (r0(z) f)'(0) = Integral_0^inf exp(i k t) f(t) dt.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh
from scipy.special import roots_legendre

from .profile import CurvatureProfile
from .vertex_spectrum import ShootingSolution, shoot

__all__ = [
    "ExpDecay",
    "GaussianPulse",
    "HalfLineResolvent",
    "Indicator",
    "KernelError",
    "NearEigenvalueError",
    "QuadratureError",
    "TabulatedFunction",
    "VertexKernel",
    "boundary_derivative",
    "half_line_apply",
    "half_line_apply_grid",
    "kernel_s_derivative",
    "neumann_free_kernel",
    "sqrt_upper",
    "vertex_kernel",
    "vertex_kernel_at",
]

WRONSKIAN_FLOOR = 1e-13
SERIES_DEFAULT_TERMS = 200


class KernelError(RuntimeError):
    pass


class NearEigenvalueError(KernelError):
    """Spectral parameter too close to an eigenvalue for kernel evaluation."""


class QuadratureError(KernelError):
    """Adaptive quadrature failed to reach the requested accuracy."""


def sqrt_upper(z: complex) -> complex:
    """Square root with nonnegative imaginary part."""
    r = cmath.sqrt(z)
    if r.imag < 0.0:
        r = -r
    return r


# ----------------------------------------------------------------------
# Free Neumann kernel on (-1, 1)
# ----------------------------------------------------------------------

def neumann_free_kernel(z: complex, s: float, sp: float) -> complex:
    """Closed-form Neumann resolvent kernel of -d^2/ds^2 on (-1, 1)."""
    sq = sqrt_upper(z)
    den = sq * cmath.sin(2.0 * sq)
    if abs(den) < WRONSKIAN_FLOOR:
        raise NearEigenvalueError(f"z={z} too close to a Neumann eigenvalue")
    lo, hi = (s, sp) if s <= sp else (sp, s)
    return -cmath.cos(sq * (lo + 1.0)) * cmath.cos(sq * (hi - 1.0)) / den


# ----------------------------------------------------------------------
# Cosine-Galerkin eigexpansion (series route, independent of shooting)
# ----------------------------------------------------------------------

def _free_mode_values(s: np.ndarray, n_basis: int) -> np.ndarray:
    """Matrix of the Neumann cosine modes, shape (len(s), n_basis)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty((s.size, n_basis))
    out[:, 0] = 1.0 / math.sqrt(2.0)
    for k in range(2, n_basis + 1):
        out[:, k - 1] = np.cos((k - 1) * np.pi * (s + 1.0) / 2.0)
    return out


@lru_cache(maxsize=8)
def _galerkin_eigenpairs(profile: CurvatureProfile, n_modes: int):
    """Eigenpairs of the vertex Hamiltonian in the cosine basis."""
    n_basis = n_modes + 60
    nodes, weights = roots_legendre(10)
    n_panels = 200
    edges = np.linspace(-1.0, 1.0, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    wts = (half[:, None] * weights[None, :]).ravel()
    basis = _free_mode_values(pts, n_basis)
    v = -0.25 * profile.gamma(pts) ** 2
    ham = basis.T @ (basis * (wts * v)[:, None])
    mu = np.array([((k - 1) * np.pi / 2.0) ** 2 for k in range(1, n_basis + 1)])
    ham[np.diag_indices_from(ham)] += mu
    lams, coef = eigh(ham)
    # Align eigenvector signs with the free modes they perturb.
    for n in range(n_basis):
        if coef[n, n] < 0:
            coef[:, n] = -coef[:, n]
    return lams[:n_modes], coef[:, :n_modes], n_basis, mu


def _series_mode_values(profile: CurvatureProfile, n_modes: int, s) -> np.ndarray:
    lams, coef, n_basis, _ = _galerkin_eigenpairs(profile, n_modes)
    return _free_mode_values(np.asarray(s, dtype=float), n_basis) @ coef


# ----------------------------------------------------------------------
# Vertex kernel
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class VertexKernel:
    """Immutable kernel snapshot at one spectral parameter.

    mode ``wronskian`` evaluates the shooting-based Green's function;
    mode ``series`` evaluates the eigenfunction expansion truncated at
    ``n_terms`` with the free part resummed through the closed-form
    Neumann kernel (plain truncation leaves an O(1/n_terms) tail at the
    corners, far above the accuracy the expansion route is used for).
    """

    profile: CurvatureProfile
    z: complex
    shooting: ShootingSolution
    mode: str = "wronskian"
    n_terms: int = SERIES_DEFAULT_TERMS

    def __post_init__(self) -> None:
        if self.mode not in ("wronskian", "series"):
            raise KernelError(f"unknown kernel mode {self.mode!r}")

    def _guard(self) -> complex:
        w = self.shooting.wronskian
        if abs(w) < WRONSKIAN_FLOOR:
            raise NearEigenvalueError(
                f"|Wronskian|={abs(w):.2e} at z={self.z}; kernel undefined")
        return w

    def value(self, s, sp):
        if self.mode == "series":
            return self._series_value(s, sp)
        w = self._guard()
        s = np.asarray(s, dtype=float)
        sp = np.asarray(sp, dtype=float)
        lo, hi = np.broadcast_arrays(np.minimum(s, sp), np.maximum(s, sp))
        shape = lo.shape
        out = (self.shooting.zeta(lo.ravel()) * self.shooting.eta(hi.ravel()) / w)
        out = np.asarray(out).reshape(shape)
        return complex(out) if out.ndim == 0 else out

    def _series_value(self, s, sp):
        lams, coef, n_basis, mu = _galerkin_eigenpairs(self.profile, self.n_terms)
        ys = _series_mode_values(self.profile, self.n_terms, s)
        ysp = _series_mode_values(self.profile, self.n_terms, sp)
        cs = _free_mode_values(np.asarray(s, dtype=float), self.n_terms)
        csp = _free_mode_values(np.asarray(sp, dtype=float), self.n_terms)
        pert = (ys / (lams - self.z)[None, :] * ysp).sum(axis=1)
        free = (cs / (mu[: self.n_terms] - self.z)[None, :] * csp).sum(axis=1)
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        sp_arr = np.atleast_1d(np.asarray(sp, dtype=float))
        base = np.array([
            neumann_free_kernel(self.z, float(a), float(b))
            for a, b in zip(np.broadcast_to(s_arr, pert.shape),
                            np.broadcast_to(sp_arr, pert.shape))
        ])
        out = base + pert - free
        return complex(out[0]) if np.isscalar(s) or np.ndim(s) == 0 else out

    def s_derivative(self, s, endpoint: int):
        """d/ds r(z; s, endpoint) from the stored shooting derivatives."""
        if endpoint not in (-1, 1):
            raise KernelError("endpoint must be -1 or +1")
        w = self._guard()
        s = np.asarray(s, dtype=float)
        shape = s.shape
        if endpoint == 1:
            out = self.shooting.zeta_prime(s.ravel()) / w
        else:
            out = self.shooting.eta_prime(s.ravel()) / w
        out = np.asarray(out).reshape(shape)
        return complex(out) if out.ndim == 0 else out

    def corners(self) -> np.ndarray:
        """The 2x2 matrix of kernel values at the four endpoint pairs."""
        self._guard()
        return np.array([
            [self.value(-1.0, -1.0), self.value(-1.0, 1.0)],
            [self.value(1.0, -1.0), self.value(1.0, 1.0)],
        ])


def vertex_kernel_at(profile: CurvatureProfile, z: complex,
                     mode: str = "wronskian",
                     n_terms: int = SERIES_DEFAULT_TERMS) -> VertexKernel:
    """Shoot once at z and wrap the dense output as a kernel."""
    return VertexKernel(profile, complex(z), shoot(profile, z), mode, n_terms)


def vertex_kernel(kernel: VertexKernel, s: float, sp: float) -> complex:
    return kernel.value(s, sp)


def kernel_s_derivative(kernel: VertexKernel, s: float, endpoint: int) -> complex:
    return kernel.s_derivative(s, endpoint)


# ----------------------------------------------------------------------
# Edge data records
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExpDecay:
    """f(s) = coefficient * exp(-rate * s) on (0, inf)."""

    rate: float = 1.0
    coefficient: float = 1.0
    cutoff: float | None = None

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = self.coefficient * np.exp(-self.rate * s)
        return float(out) if out.ndim == 0 else out

    def effective_cutoff(self) -> float:
        return self.cutoff if self.cutoff is not None else 40.0 / self.rate


@dataclass(frozen=True)
class GaussianPulse:
    """f(s) = exp(-((s - center)/width)^2)."""

    center: float = 3.0
    width: float = 0.5
    cutoff: float | None = None

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.exp(-(((s - self.center) / self.width) ** 2))
        return float(out) if out.ndim == 0 else out

    def effective_cutoff(self) -> float:
        return self.cutoff if self.cutoff is not None else self.center + 7.0 * self.width


@dataclass(frozen=True)
class Indicator:
    """Characteristic function of [lo, hi]."""

    lo: float = 0.0
    hi: float = 1.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where((s >= self.lo) & (s <= self.hi), 1.0, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def cutoff(self) -> float:
        return self.hi

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.lo, self.hi)

    def effective_cutoff(self) -> float:
        return self.hi


class TabulatedFunction:
    """Cubic-spline samples with a declared cutoff beyond which f = 0."""

    def __init__(self, nodes, values, cutoff: float):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        self.cutoff = float(cutoff)
        self._spline = CubicSpline(nodes, values, extrapolate=False)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.nan_to_num(self._spline(np.clip(s, None, self.cutoff)), nan=0.0)
        out = np.where(s > self.cutoff, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def effective_cutoff(self) -> float:
        return self.cutoff


def _cutoff_of(f) -> float:
    eff = getattr(f, "effective_cutoff", None)
    if eff is not None:
        return float(eff())
    cut = getattr(f, "cutoff", None)
    if cut is None:
        raise KernelError("edge data needs a cutoff or effective_cutoff()")
    return float(cut)


# ----------------------------------------------------------------------
# Half-line Dirichlet resolvent
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HalfLineResolvent:
    """Resolvent of the Dirichlet Laplacian on (0, inf) at z, Im sqrt(z) > 0."""

    z: complex
    sqrt_z: complex = field(init=False)

    def __post_init__(self) -> None:
        sq = sqrt_upper(self.z)
        if sq.imag <= 0.0:
            raise KernelError(f"z={self.z} has no square root with Im > 0")
        object.__setattr__(self, "sqrt_z", sq)


def _complex_quad(fn, a, b, points=None, rel=1e-10) -> complex:
    kw = {"epsabs": 1e-13, "epsrel": rel, "limit": 200}
    if points is not None and b != np.inf:
        kw["points"] = points
    re, re_err = quad(lambda t: fn(t).real, a, b, **kw)
    im, im_err = quad(lambda t: fn(t).imag, a, b, **kw)
    scale = max(1.0, abs(re) + abs(im))
    if max(re_err, im_err) > 1e-6 * scale:
        raise QuadratureError(
            f"half-line quadrature error {max(re_err, im_err):.2e} too large")
    return complex(re, im)


def half_line_apply(res: HalfLineResolvent, f, s: float) -> complex:
    """(r0(z) f)(s) by adaptive quadrature; identically 0 at s = 0."""
    if s == 0.0:
        return 0.0 + 0.0j
    k = res.sqrt_z
    cut = getattr(f, "cutoff", None)
    upper = float(cut) if cut is not None else np.inf

    def integrand(t):
        return (0.5j / k) * (np.exp(1j * k * abs(s - t))
                             - np.exp(1j * k * (s + t))) * f(t)

    # split at the kernel kink and at any discontinuities of the data
    points = sorted({p for p in (s, *getattr(f, "breakpoints", ()))
                     if 0.0 < p < upper})
    return _complex_quad(integrand, 0.0, upper, points=points or None)


def boundary_derivative(res: HalfLineResolvent, f) -> complex:
    """p = (r0(z) f)'(0) = Integral exp(i sqrt(z) t) f(t) dt."""
    k = res.sqrt_z
    cut = getattr(f, "cutoff", None)
    upper = float(cut) if cut is not None else np.inf
    return _complex_quad(lambda t: np.exp(1j * k * t) * f(t), 0.0, upper)


def _panel_grid(cutoff: float, k_abs: float, breakpoints=()):
    width = min(0.25, 1.5 / max(k_abs, 1e-6))
    n_panels = max(8, int(np.ceil(cutoff / width)))
    edges = np.linspace(0.0, cutoff, n_panels + 1)
    inner = [p for p in breakpoints if 0.0 < p < cutoff]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
    nodes, weights = roots_legendre(8)
    return edges, nodes, weights


def half_line_apply_grid(res: HalfLineResolvent, f, s: np.ndarray) -> np.ndarray:
    """(r0(z) f) on an array of points via cumulative panel quadrature.

    Equivalent to half_line_apply but O(panels + targets); used for
    edge-profile comparisons on dense grids.
    """
    k = res.sqrt_z
    s = np.asarray(s, dtype=float)
    cutoff = _cutoff_of(f)
    edges, nodes, weights = _panel_grid(cutoff, abs(k),
                                        getattr(f, "breakpoints", ()))
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    wts = half[:, None] * weights[None, :]
    fv = f(pts)
    ep = np.exp(1j * k * pts) * fv * wts
    em = np.exp(-1j * k * pts) * fv * wts
    cum_plus = np.concatenate([[0.0], np.cumsum(ep.sum(axis=1))])
    cum_minus = np.concatenate([[0.0], np.cumsum(em.sum(axis=1))])
    f_plus = cum_plus[-1]

    s_in = np.clip(s, 0.0, cutoff)
    idx = np.clip(np.searchsorted(edges, s_in, side="right") - 1, 0, len(edges) - 2)
    lo = edges[idx]
    phalf = 0.5 * (s_in - lo)
    pmid = lo + phalf
    ppts = pmid[:, None] + phalf[:, None] * nodes[None, :]
    pwts = phalf[:, None] * weights[None, :]
    pfv = f(ppts)
    a_plus = cum_plus[idx] + (np.exp(1j * k * ppts) * pfv * pwts).sum(axis=1)
    a_minus = cum_minus[idx] + (np.exp(-1j * k * ppts) * pfv * pwts).sum(axis=1)

    b_plus = f_plus - a_plus
    out = (0.5j / k) * (np.exp(1j * k * s) * a_minus
                        + np.exp(-1j * k * s) * b_plus
                        - np.exp(1j * k * s) * f_plus)
    return out
