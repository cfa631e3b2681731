"""Curvature profiles of the vertex region and derived geometric fields.

The vertex strip carries the metric factor

    g(s, u) = (1 + u * rho * gamma(s))**2,     rho = delta/eps in (0, 1],

built from a smooth curvature function gamma compactly supported in
(-1, 1).  Everything downstream (effective potential W, the operator
coefficients 1/g and d/ds(1/g)) is evaluated here with closed-form
derivatives; numerical differentiation is reserved for test oracles.

The manufactured profile family is the classical bump

    gamma(s) = amplitude * exp(1 - 1/(1 - s**2))      for |s| < 1,

normalised so the peak value equals ``amplitude``.  Plain bumps respect
the standing geometric bound sup|gamma| < 1.  Resonance-tuned bumps
(``tuned_bump``) carry larger amplitudes and are therefore only valid
for aspect ratios rho < 1/sup|gamma|; evaluation enforces this.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

__all__ = [
    "AMPLITUDE_CAP",
    "TUNED_AMPLITUDE_CAP",
    "CurvatureProfile",
    "GeometryAt",
    "ProfileError",
    "check_potential_identity",
    "eval_gamma",
    "eval_geometry",
    "geometry_fields",
    "geometry_residual_fields",
    "tune_to_resonance",
]

# Strict version of the standing bound sup|gamma| < 1 for plain bumps.
AMPLITUDE_CAP = 0.999
# Resonance tuning needs amplitudes ~6; geometry is then restricted to
# rho < 1/amplitude instead of the uniform rho <= 1.
TUNED_AMPLITUDE_CAP = 8.0


class ProfileError(ValueError):
    """Invalid profile construction or evaluation outside the valid range."""


@dataclass(frozen=True)
class CurvatureProfile:
    """Curvature function gamma with exact derivatives.

    kind is one of ``zero``, ``bump``, ``tuned_bump``.  ``target_index``
    is only meaningful for tuned bumps and records which eigenvalue of
    the vertex Hamiltonian was driven to zero.
    """

    kind: str
    amplitude: float = 0.0
    target_index: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "bump", "tuned_bump"):
            raise ProfileError(f"unknown profile kind {self.kind!r}")
        if self.kind == "zero":
            if self.amplitude != 0.0:
                raise ProfileError("zero profile has no amplitude")
        elif self.kind == "bump":
            if not 0.0 < abs(self.amplitude) <= AMPLITUDE_CAP:
                raise ProfileError(
                    f"bump amplitude {self.amplitude} outside (0, {AMPLITUDE_CAP}]"
                )
        else:
            if not 0.0 < abs(self.amplitude) <= TUNED_AMPLITUDE_CAP:
                raise ProfileError(
                    f"tuned bump amplitude {self.amplitude} outside "
                    f"(0, {TUNED_AMPLITUDE_CAP}]"
                )
            if self.target_index is None or self.target_index < 2:
                raise ProfileError("tuned bump requires target_index >= 2")

    @staticmethod
    def zero() -> "CurvatureProfile":
        return CurvatureProfile("zero", 0.0)

    @staticmethod
    def bump(amplitude: float) -> "CurvatureProfile":
        return CurvatureProfile("bump", amplitude)

    @property
    def sup_gamma(self) -> float:
        """Peak of |gamma|; the bump attains |amplitude| at s = 0."""
        return abs(self.amplitude)

    @property
    def max_ratio(self) -> float:
        """Largest aspect ratio rho = delta/eps with 1 + u*rho*gamma > 0."""
        if self.sup_gamma < 1.0:
            return 1.0
        return 1.0 / self.sup_gamma

    def gamma(self, s, order: int = 0):
        """gamma and its first two derivatives, vectorised over s."""
        if order not in (0, 1, 2):
            raise ProfileError("order must be 0, 1 or 2")
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        if self.kind == "zero":
            return out if out.ndim else float(out)
        inside = np.abs(s) < 1.0
        si = s[inside]
        t = 1.0 - si * si
        base = np.exp(1.0 - 1.0 / t)
        if order == 0:
            out[inside] = base
        elif order == 1:
            # d/ds exp(w), w = 1 - 1/(1-s^2), w' = -2s/(1-s^2)^2
            out[inside] = base * (-2.0 * si / t**2)
        else:
            wp = -2.0 * si / t**2
            wpp = -2.0 / t**2 - 8.0 * si * si / t**3
            out[inside] = base * (wpp + wp * wp)
        out *= self.amplitude
        return out if out.ndim else float(out)

    def to_json_fragment(self) -> dict:
        frag = {"kind": self.kind, "amplitude": self.amplitude}
        if self.target_index is not None:
            frag["target_index"] = self.target_index
        return frag

    @staticmethod
    def from_json_fragment(frag: dict) -> "CurvatureProfile":
        try:
            kind = frag["kind"]
        except (TypeError, KeyError) as exc:
            raise ProfileError(f"malformed profile fragment {frag!r}") from exc
        return CurvatureProfile(
            kind,
            float(frag.get("amplitude", 0.0)),
            frag.get("target_index"),
        )


@dataclass(frozen=True)
class GeometryAt:
    """Pointwise geometric data of the vertex strip."""

    s: float
    u: float
    ratio: float
    g: float
    inv_g: float
    ds_inv_g: float
    W: float


def eval_gamma(profile: CurvatureProfile, s: float, order: int = 0) -> float:
    """gamma, gamma' or gamma'' at s (zero outside (-1, 1))."""
    return profile.gamma(s, order)


def _check_ratio(profile: CurvatureProfile, ratio: float) -> None:
    if not 0.0 < ratio <= 1.0:
        raise ProfileError(f"ratio {ratio} outside (0, 1]")
    if ratio * profile.sup_gamma >= 1.0:
        raise ProfileError(
            f"ratio {ratio} too large for amplitude {profile.amplitude}: "
            "metric factor would vanish"
        )


def geometry_fields(profile: CurvatureProfile, s, u, ratio: float) -> dict:
    """Vectorised g, 1/g, d/ds(1/g) and W on broadcastable arrays s, u.

    W carries the three closed-form terms (gamma^2, gamma'' and gamma'^2
    contributions with their powers of a = 1 + u*rho*gamma).
    """
    _check_ratio(profile, ratio)
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    gam = profile.gamma(s, 0)
    gam1 = profile.gamma(s, 1)
    gam2 = profile.gamma(s, 2)
    a = 1.0 + u * ratio * gam
    g = a * a
    inv_g = 1.0 / g
    ds_inv_g = -2.0 * u * ratio * gam1 / a**3
    urg1 = u * ratio * gam1
    W = (
        -0.25 * gam * gam / g
        + 0.5 * (u * ratio * gam2) / a**3
        - 1.25 * urg1 * urg1 / a**4
    )
    return {"g": g, "inv_g": inv_g, "ds_inv_g": ds_inv_g, "W": W, "a": a}


def geometry_residual_fields(profile: CurvatureProfile, s, u, ratio: float) -> dict:
    """1/g - 1, W + gamma^2/4 and d/ds(1/g), free of small-ratio cancellation.

    All three fields are O(ratio); they are assembled from b = u*rho*gamma
    directly (1/g - 1 = -b(2+b)/a^2 etc.) so they stay accurate down to
    ratio ~ 1e-12 where the naive differences would lose all digits.
    """
    _check_ratio(profile, ratio)
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    gam = profile.gamma(s, 0)
    gam1 = profile.gamma(s, 1)
    gam2 = profile.gamma(s, 2)
    b = u * ratio * gam
    a = 1.0 + b
    inv_g_minus_1 = -b * (2.0 + b) / (a * a)
    urg1 = u * ratio * gam1
    w_plus = (
        0.25 * gam * gam * b * (2.0 + b) / (a * a)
        + 0.5 * (u * ratio * gam2) / a**3
        - 1.25 * urg1 * urg1 / a**4
    )
    ds_inv_g = -2.0 * urg1 / a**3
    return {
        "inv_g_minus_1": inv_g_minus_1,
        "w_plus_quarter_gamma_sq": w_plus,
        "ds_inv_g": ds_inv_g,
        "gamma_sq": gam * gam,
    }


def eval_geometry(profile: CurvatureProfile, s: float, u: float, ratio: float) -> GeometryAt:
    """Metric factor, its reciprocal and derivative, and the potential W."""
    if not -1.0 <= s <= 1.0:
        raise ProfileError(f"s {s} outside [-1, 1]")
    if not 0.0 <= u <= 1.0:
        raise ProfileError(f"u {u} outside [0, 1]")
    f = geometry_fields(profile, s, u, ratio)
    return GeometryAt(
        s=s,
        u=u,
        ratio=ratio,
        g=float(f["g"]),
        inv_g=float(f["inv_g"]),
        ds_inv_g=float(f["ds_inv_g"]),
        W=float(f["W"]),
    )


def check_potential_identity(
    profile: CurvatureProfile,
    ratio: float,
    sample_grid: Iterable[tuple[float, float]],
) -> float:
    """Max defect of the quadratic-form potential identity on a grid.

    The multiplication potential produced by conjugating the form with
    g**(1/4) splits into an s-part Ws and a u-part Wu,

        Ws = -d/ds[g^(-3/4) d/ds g^(-1/4)] + g^(-1/2) (d/ds g^(-1/4))^2,
        Wu = -d/du[g^(1/4)  d/du g^(-1/4)] + g^(1/2)  (d/du g^(-1/4))^2,

    and must reassemble W:  Ws + Wu/rho^2 = W.  The pieces below keep the
    un-cancelled expression trees so the check is a real floating-point
    cross-validation, not an algebraic tautology.
    """
    grid = list(sample_grid)
    if not grid:
        raise ProfileError("sample grid must be nonempty")
    s = np.array([p[0] for p in grid], dtype=float)
    u = np.array([p[1] for p in grid], dtype=float)
    _check_ratio(profile, ratio)
    gam = profile.gamma(s, 0)
    gam1 = profile.gamma(s, 1)
    gam2 = profile.gamma(s, 2)
    a = 1.0 + u * ratio * gam

    # s-part: A = d/ds g^(-1/4) = -(1/2) a^(-3/2) u rho gamma'
    A = -0.5 * a ** (-1.5) * u * ratio * gam1
    dA = -0.5 * u * ratio * gam2 * a ** (-1.5) + 0.75 * (u * ratio * gam1) ** 2 * a ** (-2.5)
    d_g34A = a ** (-1.5) * dA - 1.5 * a ** (-2.5) * (u * ratio * gam1) * A
    Ws = -d_g34A + a ** (-1.0) * A * A

    # u-part: B = d/du g^(-1/4) = -(1/2) a^(-3/2) rho gamma
    B = -0.5 * a ** (-1.5) * ratio * gam
    dB = 0.75 * a ** (-2.5) * (ratio * gam) ** 2
    d_g14B = a**0.5 * dB + 0.5 * a ** (-0.5) * (ratio * gam) * B
    Wu = -d_g14B + a * B * B

    W = geometry_fields(profile, s, u, ratio)["W"]
    defect = np.abs(Ws + Wu / ratio**2 - W)
    return float(np.max(defect))


@lru_cache(maxsize=16)
def _tuned_amplitude(target_index: int) -> float:
    """Root of lambda_{target_index}(amplitude) = 0 over the bump family."""
    # Lazy import: the eigenvalue solver depends on this module.
    from . import vertex_spectrum as vs

    def lam_k(amp: float) -> float:
        prof = CurvatureProfile("tuned_bump", amp, target_index)
        return vs.eigenvalue_by_index(prof, target_index)

    lo, flo = None, None
    for amp in np.linspace(0.5, TUNED_AMPLITUDE_CAP, 16):
        val = lam_k(float(amp))
        if flo is not None and flo * val <= 0.0:
            lo = (prev, float(amp))
            break
        prev, flo = float(amp), val
    if lo is None:
        raise ProfileError(
            f"no amplitude in (0, {TUNED_AMPLITUDE_CAP}] brackets a zero of "
            f"eigenvalue {target_index}"
        )
    from scipy.optimize import brentq

    a_star = brentq(lam_k, lo[0], lo[1], xtol=1e-13, rtol=8.9e-16)
    # Secant polish straight on the shooting eigenvalue.
    f0 = lam_k(a_star)
    if abs(f0) > 1e-12:
        a1 = a_star * (1 + 1e-8)
        f1 = lam_k(a1)
        if f1 != f0:
            a_star = a_star - f0 * (a1 - a_star) / (f1 - f0)
    return float(a_star)


def tune_to_resonance(base: CurvatureProfile, target_index: int) -> CurvatureProfile:
    """Bump profile whose eigenvalue ``target_index`` sits at zero.

    The first eigenvalue cannot be tuned: any nonzero bump pushes it
    strictly negative.  Amplitudes above 1 are required (min-max pins
    lambda_2 >= pi^2/4 - sup(gamma^2)/4), so the result is a
    ``tuned_bump`` with geometry restricted to rho < 1/amplitude.
    """
    if base.kind == "zero":
        raise ProfileError("zero family has no amplitude to tune")
    if target_index < 2:
        raise ProfileError("target_index must be >= 2")
    amp = _tuned_amplitude(target_index)
    return CurvatureProfile("tuned_bump", amp, target_index)
