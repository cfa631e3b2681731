"""Neumann Sturm-Liouville spectrum of the effective vertex Hamiltonian.

The operator is  h = -d^2/ds^2 - gamma(s)^2/4  on (-1, 1) with Neumann
ends.  Two shooting solutions are integrated,

    zeta:  zeta(-1) = 1, zeta'(-1) = 0   (left-normalised),
    eta:   eta(1)  = 1, eta'(1)  = 0     (right-normalised),

whose s-independent Wronskian  Wv = eta*zeta' - zeta*eta'  vanishes
exactly at the eigenvalues.  With these initial conditions Wv equals
zeta'(+1), which is the classical shooting function; eigenvalues are
bracketed by a vectorised fixed-step scan and refined with brentq on an
adaptive high-order integration.

Eigenfunctions are the normalised zeta at the root; their boundary
values alpha1 = y(-1), alpha2 = y(+1) feed the weighted Kirchhoff
projector when zero is (numerically) an eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import brentq

from .profile import CurvatureProfile

__all__ = [
    "EigenFunction",
    "IntegrationError",
    "SpectrumError",
    "ShootingSolution",
    "VertexSpectrum",
    "CaseLabel",
    "classify",
    "classify_case",
    "eigenvalue_by_index",
    "eigenvalues",
    "shoot",
    "wronskian_values",
]

DEFAULT_ZERO_TOLERANCE = 1e-9
_SHOOT_RTOL = 1e-10
_SHOOT_ATOL = 1e-13
_REFINE_RTOL = 1e-12
_REFINE_ATOL = 1e-14
_SCAN_POINTS_PER_BRACKET = 400
_SCAN_STEPS = 2500


class IntegrationError(RuntimeError):
    """The shooting integrator failed (step underflow or stiffness)."""


class SpectrumError(RuntimeError):
    """Eigenvalue search could not locate the requested spectrum."""


@dataclass(frozen=True)
class ShootingSolution:
    """Dense shooting output at one complex spectral parameter."""

    profile: CurvatureProfile
    z: complex
    zeta_sol: object  # scipy OdeSolution for (zeta, zeta')
    eta_sol: object
    wronskian: complex
    mesh: np.ndarray

    def zeta(self, s):
        """zeta values at s (vectorised)."""
        return self.zeta_sol(np.asarray(s))[0]

    def zeta_prime(self, s):
        return self.zeta_sol(np.asarray(s))[1]

    def eta(self, s):
        return self.eta_sol(np.asarray(s))[0]

    def eta_prime(self, s):
        return self.eta_sol(np.asarray(s))[1]


def _integrate(profile: CurvatureProfile, z: complex, s0: float, s1: float,
               rtol: float, atol: float, dense: bool):
    """Integrate  w'' = (-gamma^2/4 - z) w  from s0 to s1 with w(s0)=1, w'(s0)=0."""

    def rhs(s, y):
        v = -0.25 * profile.gamma(s) ** 2
        return [y[1], (v - z) * y[0]]

    y0 = np.array([1.0 + 0.0j, 0.0 + 0.0j])
    sol = solve_ivp(rhs, (s0, s1), y0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=dense)
    if not sol.success:
        raise IntegrationError(f"shooting failed at z={z}: {sol.message}")
    return sol


def shoot(profile: CurvatureProfile, z: complex,
          rtol: float = _SHOOT_RTOL, atol: float = _SHOOT_ATOL) -> ShootingSolution:
    """Both shooting solutions with dense output over [-1, 1]."""
    left = _integrate(profile, z, -1.0, 1.0, rtol, atol, dense=True)
    right = _integrate(profile, z, 1.0, -1.0, rtol, atol, dense=True)
    # At s = +1 the right solution is exactly (1, 0), so Wv = zeta'(+1).
    wr = complex(left.y[1, -1])
    mesh = np.union1d(left.t, right.t[::-1])
    return ShootingSolution(profile, complex(z), left.sol, right.sol, wr, mesh)


def wronskian_values(solution: ShootingSolution, s) -> np.ndarray:
    """eta*zeta' - zeta*eta' sampled at s; constant in exact arithmetic."""
    s = np.asarray(s)
    zl = solution.zeta_sol(s)
    et = solution.eta_sol(s)
    return et[0] * zl[1] - zl[0] * et[1]


def _wronskian_scan(profile: CurvatureProfile, lams: np.ndarray,
                    n_steps: int = _SCAN_STEPS) -> np.ndarray:
    """zeta'(+1) for a batch of real spectral parameters (fixed-step RK4)."""
    lams = np.asarray(lams, dtype=float)
    h = 2.0 / n_steps
    nodes = -1.0 + h * np.arange(n_steps + 1)
    half = nodes[:-1] + 0.5 * h
    v_nodes = -0.25 * profile.gamma(nodes) ** 2
    v_half = -0.25 * profile.gamma(half) ** 2
    y = np.ones_like(lams)
    dy = np.zeros_like(lams)
    for k in range(n_steps):
        c0 = v_nodes[k] - lams
        ch = v_half[k] - lams
        c1 = v_nodes[k + 1] - lams
        k1y, k1d = dy, c0 * y
        y2 = y + 0.5 * h * k1y
        k2y, k2d = dy + 0.5 * h * k1d, ch * y2
        y3 = y + 0.5 * h * k2y
        k3y, k3d = dy + 0.5 * h * k2d, ch * y3
        y4 = y + h * k3y
        k4y, k4d = dy + h * k3d, c1 * y4
        y = y + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        dy = dy + (h / 6.0) * (k1d + 2 * k2d + 2 * k3d + k4d)
    return dy


def _wronskian_accurate(profile: CurvatureProfile, lam: float) -> float:
    sol = _integrate(profile, lam, -1.0, 1.0, _REFINE_RTOL, _REFINE_ATOL, dense=False)
    return float(sol.y[1, -1].real)


def _refine_root(profile: CurvatureProfile, a: float, b: float,
                 step: float) -> float | None:
    """brentq on the accurate shooting function, widening the bracket once
    if the coarse scan's endpoint signs disagree with it."""
    fn = lambda lam: _wronskian_accurate(profile, lam)  # noqa: E731
    fa, fb = fn(a), fn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        a, b = a - step, b + step
        fa, fb = fn(a), fn(b)
        if fa * fb > 0.0:
            return None
    return float(brentq(fn, a, b, xtol=1e-13, rtol=8.9e-16))


def _scan_roots(profile: CurvatureProfile, lo: float, hi: float,
                n_points: int) -> list[float]:
    grid = np.linspace(lo, hi, n_points)
    step = float(grid[1] - grid[0])
    w = _wronskian_scan(profile, grid)
    roots: list[float] = []
    for k in range(len(grid) - 1):
        a, b = w[k], w[k + 1]
        if a == 0.0 or a * b < 0.0:
            r = _refine_root(profile, float(grid[k]), float(grid[k + 1]), step)
            if r is not None:
                roots.append(r)
    # Deduplicate near-coincident detections.
    out: list[float] = []
    for r in sorted(roots):
        if not out or abs(r - out[-1]) > 1e-10 * max(1.0, abs(r)):
            out.append(r)
    return out


def _free_eigenvalue(n: int) -> float:
    """Neumann eigenvalue ((n-1) pi / 2)^2 of the zero-potential problem."""
    return ((n - 1) * np.pi / 2.0) ** 2


def eigenvalue_by_index(profile: CurvatureProfile, index: int) -> float:
    """The index-th eigenvalue alone (1-based); used by resonance tuning."""
    sup_v = profile.sup_gamma**2 / 4.0
    lo = -sup_v - 0.5
    hi = _free_eigenvalue(index) + 0.5
    n_points = max(800, _SCAN_POINTS_PER_BRACKET * index)
    roots = _scan_roots(profile, lo, hi, n_points)
    if len(roots) < index:
        raise SpectrumError(
            f"found only {len(roots)} eigenvalues below {hi}, need {index}")
    return roots[index - 1]


@dataclass(frozen=True)
class EigenFunction:
    """Normalised eigenfunction built from the left shooting solution."""

    n: int
    lam: float
    _sol: object
    scale: float  # sign/norm applied to zeta

    def value(self, s):
        return self._sol(np.asarray(s))[0].real * self.scale

    def derivative(self, s):
        return self._sol(np.asarray(s))[1].real * self.scale

    @property
    def at_minus1(self) -> float:
        return float(self.value(-1.0))

    @property
    def at_plus1(self) -> float:
        return float(self.value(1.0))


@dataclass(frozen=True)
class VertexSpectrum:
    """Eigenvalues, eigenfunctions and the resonance classification."""

    profile: CurvatureProfile
    eigenvalues: np.ndarray
    functions: tuple[EigenFunction, ...]
    zero_tolerance: float
    n_star: int | None  # 1-based index of the zero eigenvalue, if any
    alpha1: float | None
    alpha2: float | None

    @property
    def resonant(self) -> bool:
        return self.n_star is not None

    def eigenfunction(self, n: int) -> EigenFunction:
        return self.functions[n - 1]

    @property
    def star_function(self) -> EigenFunction:
        if self.n_star is None:
            raise SpectrumError("generic spectrum has no zero-mode")
        return self.functions[self.n_star - 1]


def _build_eigenfunction(profile: CurvatureProfile, n: int, lam: float) -> EigenFunction:
    sol = _integrate(profile, lam, -1.0, 1.0, _REFINE_RTOL, _REFINE_ATOL, dense=True)
    grid = np.linspace(-1.0, 1.0, 4001)
    vals = sol.sol(grid)[0].real
    norm = float(np.sqrt(simpson(vals * vals, x=grid)))
    # Sign convention: positive at s=-1 when the boundary value is
    # resolvable, else positive at the first resolvable mesh point.
    thresh = 1e-8 * float(np.max(np.abs(vals)))
    anchor = vals[0]
    if abs(anchor) <= thresh:
        idx = np.argmax(np.abs(vals) > thresh)
        anchor = vals[idx]
    sign = 1.0 if anchor > 0 else -1.0
    return EigenFunction(n, lam, sol.sol, sign / norm)


def eigenvalues(profile: CurvatureProfile, count: int,
                zero_tolerance: float = DEFAULT_ZERO_TOLERANCE) -> VertexSpectrum:
    """First ``count`` eigenpairs, ordered, with resonance classification."""
    if count < 1:
        raise SpectrumError("count must be >= 1")
    return _eigenvalues_cached(profile, count, zero_tolerance)


@lru_cache(maxsize=64)
def _eigenvalues_cached(profile: CurvatureProfile, count: int,
                        zero_tolerance: float) -> VertexSpectrum:
    sup_v = profile.sup_gamma**2 / 4.0
    lo = -sup_v - 0.5
    hi = _free_eigenvalue(count) + 0.5
    n_points = max(800, _SCAN_POINTS_PER_BRACKET * (count + 1))
    roots = _scan_roots(profile, lo, hi, n_points)
    extensions = 0
    while len(roots) < count and extensions < 2:
        extensions += 1
        new_lo = hi
        hi = hi + (_free_eigenvalue(count + 2 * extensions) - _free_eigenvalue(count)) + 1.0
        roots += _scan_roots(profile, new_lo, hi, n_points)
        roots = sorted(roots)
    if len(roots) < count:
        raise SpectrumError(
            f"found {len(roots)} eigenvalues in [{lo}, {hi}], need {count}")
    lams = np.array(roots[:count])
    lams.setflags(write=False)
    funcs = tuple(_build_eigenfunction(profile, n + 1, lams[n]) for n in range(count))
    n_star = None
    alpha1 = alpha2 = None
    k = int(np.argmin(np.abs(lams)))
    if abs(lams[k]) <= zero_tolerance:
        n_star = k + 1
        alpha1 = funcs[k].at_minus1
        alpha2 = funcs[k].at_plus1
    return VertexSpectrum(profile, lams, funcs, zero_tolerance, n_star, alpha1, alpha2)


@dataclass(frozen=True)
class CaseLabel:
    """Generic (decoupling) vs resonant (weighted Kirchhoff) label."""

    resonant: bool
    n_star: int | None = None
    alpha1: float | None = None
    alpha2: float | None = None

    @property
    def name(self) -> str:
        return "case2" if self.resonant else "case1"


def classify_case(spectrum: VertexSpectrum) -> CaseLabel:
    """Strict-threshold classification from a computed spectrum."""
    lams = spectrum.eigenvalues
    k = int(np.argmin(np.abs(lams)))
    if abs(lams[k]) <= spectrum.zero_tolerance:
        f = spectrum.functions[k]
        return CaseLabel(True, k + 1, f.at_minus1, f.at_plus1)
    return CaseLabel(False)


def _count_for_classification(profile: CurvatureProfile) -> int:
    """Eigenvalues needed to cover [-sup(gamma^2/4), 1]."""
    sup_v = profile.sup_gamma**2 / 4.0
    n = 2
    while _free_eigenvalue(n) - sup_v <= 1.0:
        n += 1
    return n


def classify(profile: CurvatureProfile,
             zero_tolerance: float = DEFAULT_ZERO_TOLERANCE) -> CaseLabel:
    """Classification with an automatically sufficient eigenvalue count."""
    spec = eigenvalues(profile, _count_for_classification(profile), zero_tolerance)
    return classify_case(spec)


def spectrum_for_case(profile: CurvatureProfile,
                      zero_tolerance: float = DEFAULT_ZERO_TOLERANCE) -> VertexSpectrum:
    """Spectrum with enough eigenvalues for classification (cached)."""
    return eigenvalues(profile, _count_for_classification(profile), zero_tolerance)
