"""Independent finite-difference oracles.

Two brute-force cross-checks validate the semi-analytic machinery:

  * a 1-D eigensolver for the vertex Hamiltonian on a midpoint mesh with
    mirrored Neumann ghosts (symmetric tridiagonal, LAPACK bisection on
    Sturm sequences, Richardson-extrapolated eigenvalues);

  * a 2-D resolvent of the full waveguide operator on truncated edges
    plus the vertex strip.  Interior rows are plain second-order stencils
    of the strong form (the vertex s-part in conservative flux form);
    the interface lines eliminate mirrored ghosts through the value and
    eps-scaled derivative matching, which keeps the scaled system
    complex symmetric.  The transverse shift is taken discretely
    ((4/h_u^2) sin^2(n pi h_u / 2) / delta^2) so the comparison is not
    polluted by the O(h_u^2)/delta^2 eigenvalue defect of the u-stencil;
    the continuum shift n^2 pi^2 / delta^2 remains available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from .profile import CurvatureProfile, geometry_fields
from .residual import chi_mode

__all__ = [
    "FDEigenResult",
    "FDSolution",
    "Grid1D",
    "OracleError",
    "WaveguideField",
    "WaveguideGrid",
    "fd_resolvent",
    "fd_vertex_eigen",
    "suggest_edge_length",
    "unitary_map_check",
]

TRUNCATION_TOL = 1e-8
SOLVE_RESIDUAL_TOL = 1e-10


class OracleError(RuntimeError):
    pass


# ----------------------------------------------------------------------
# 1-D vertex eigensolver
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    """Midpoint mesh on [-1, 1]; Neumann ends close by mirrored ghosts."""

    n: int

    @property
    def h(self) -> float:
        return 2.0 / self.n

    @property
    def points(self) -> np.ndarray:
        return -1.0 + (np.arange(self.n) + 0.5) * self.h


@dataclass(frozen=True)
class FDEigenResult:
    lams: np.ndarray          # Richardson-extrapolated eigenvalues
    lams_coarse: np.ndarray   # raw eigenvalues of the n-mesh
    vectors: np.ndarray       # columns: L2-normalised eigenvectors on `grid`
    grid: Grid1D


def _tridiag_eigen(profile: CurvatureProfile, grid: Grid1D, count: int,
                   vectors: bool):
    h = grid.h
    pts = grid.points
    v = -0.25 * profile.gamma(pts) ** 2
    d = np.full(grid.n, 2.0) / h**2 + v
    d[0] -= 1.0 / h**2
    d[-1] -= 1.0 / h**2
    e = np.full(grid.n - 1, -1.0) / h**2
    if vectors:
        w, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
        return w, vecs
    w = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1),
                         eigvals_only=True)
    return w, None


def fd_vertex_eigen(profile: CurvatureProfile, n_points: int, count: int) -> FDEigenResult:
    """First ``count`` eigenpairs by central differences with extrapolation."""
    if n_points < 200:
        raise OracleError("need at least 200 mesh points")
    coarse = Grid1D(n_points)
    fine = Grid1D(2 * n_points)
    w_c, _ = _tridiag_eigen(profile, coarse, count, vectors=False)
    w_f, vecs = _tridiag_eigen(profile, fine, count, vectors=True)
    lams = (4.0 * w_f - w_c) / 3.0
    vecs = vecs / math.sqrt(fine.h)
    for k in range(count):
        if vecs[0, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return FDEigenResult(lams, w_c, vecs, fine)


# ----------------------------------------------------------------------
# 2-D waveguide grid and resolvent
# ----------------------------------------------------------------------

def suggest_edge_length(z: complex, tol: float = TRUNCATION_TOL) -> float:
    """Edge truncation length with exp(-Im sqrt(z) * S) <= tol."""
    sq = np.lib.scimath.sqrt(complex(z))
    imk = abs(sq.imag)
    if imk <= 0.0:
        raise OracleError("z must have Im sqrt(z) != 0 for truncation")
    return -math.log(tol) / imk


@dataclass(frozen=True)
class WaveguideGrid:
    """Uniform grids for the two truncated edges and the vertex strip."""

    epsilon: float
    delta: float
    s_max: float
    h_edge: float
    h_vertex: float
    h_u: float
    n_u: int = field(init=False)
    n_edge: int = field(init=False)
    n_vertex: int = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.delta <= self.epsilon <= 1.0:
            raise OracleError("need 0 < delta <= epsilon <= 1")
        m = round(1.0 / self.h_u) - 1
        if m < 2 or abs((m + 1) * self.h_u - 1.0) > 1e-12:
            raise OracleError("h_u must divide 1")
        k = round(self.s_max / self.h_edge)
        if abs(k * self.h_edge - self.s_max) > 1e-9:
            raise OracleError("h_edge must divide s_max")
        j = round(2.0 / self.h_vertex)
        if abs(j * self.h_vertex - 2.0) > 1e-12:
            raise OracleError("h_vertex must divide 2")
        object.__setattr__(self, "n_u", m)
        object.__setattr__(self, "n_edge", k)
        object.__setattr__(self, "n_vertex", j)

    @staticmethod
    def build(epsilon: float, delta: float, z: complex, h_u: float = 1.0 / 32,
              h_s: float = 1.0 / 64, s_max: float | None = None) -> "WaveguideGrid":
        if s_max is None:
            s_max = suggest_edge_length(z)
            s_max = math.ceil(s_max / h_s) * h_s
        return WaveguideGrid(epsilon, delta, s_max, h_s, h_s, h_u)

    def refined(self, s_factor: int = 2, u_factor: int = 1) -> "WaveguideGrid":
        return WaveguideGrid(self.epsilon, self.delta, self.s_max,
                             self.h_edge / s_factor, self.h_vertex / s_factor,
                             self.h_u / u_factor)

    @property
    def u_nodes(self) -> np.ndarray:
        return (np.arange(self.n_u) + 1) * self.h_u

    @property
    def edge_s(self) -> np.ndarray:
        return np.arange(self.n_edge + 1) * self.h_edge

    @property
    def vertex_s(self) -> np.ndarray:
        return -1.0 + np.arange(self.n_vertex + 1) * self.h_vertex

    @property
    def n_lines(self) -> int:
        return 2 * self.n_edge + self.n_vertex - 1

    @property
    def n_unknowns(self) -> int:
        return self.n_lines * self.n_u


@dataclass(frozen=True)
class WaveguideField:
    """Fields on the waveguide grid; edge rows run outward from the vertex."""

    grid: WaveguideGrid
    edge1: np.ndarray   # (n_edge + 1, n_u)
    edge2: np.ndarray
    vertex: np.ndarray  # (n_vertex + 1, n_u)


def transverse_eigenvalue(n: int, h_u: float, discrete: bool) -> float:
    if discrete:
        return (2.0 / h_u * math.sin(n * math.pi * h_u / 2.0)) ** 2
    return (n * math.pi) ** 2


def _assemble(grid: WaveguideGrid, profile: CurvatureProfile, n: int, z: complex,
              f1, f2, transverse_shift: str):
    eps, delta = grid.epsilon, grid.delta
    he, hv, hu = grid.h_edge, grid.h_vertex, grid.h_u
    K, J, M = grid.n_edge, grid.n_vertex, grid.n_u
    u = grid.u_nodes
    ratio = delta / eps
    if transverse_shift not in ("discrete", "continuum"):
        raise OracleError(f"unknown transverse shift {transverse_shift!r}")
    lam_u = transverse_eigenvalue(n, hu, transverse_shift == "discrete")
    shift = lam_u / delta**2 + z

    sigma = grid.vertex_s
    mid = sigma[:-1] + 0.5 * hv
    amid = geometry_fields(profile, mid[:, None], u[None, :], ratio)["inv_g"]
    w_pot = geometry_fields(profile, sigma[1:-1, None], u[None, :], ratio)["W"]
    c_cell = 0.5 * (he + eps * hv)

    n_lines = grid.n_lines
    iface1 = K - 1
    iface2 = K + J - 1
    vertex_lines = np.arange(K, K + J - 1)
    edge1_lines = np.arange(0, K - 1)
    edge2_lines = np.arange(K + J, n_lines)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def add(r, c, v):
        rows.append(np.asarray(r, dtype=np.int64).ravel())
        cols.append(np.asarray(c, dtype=np.int64).ravel())
        vals.append(np.asarray(v, dtype=complex).ravel())

    m_idx = np.arange(M)

    # Diagonals.
    diag_edge = he * hu * (2.0 / he**2 + 2.0 / (delta**2 * hu**2) - shift)
    for lines in (edge1_lines, edge2_lines):
        r = (lines[:, None] * M + m_idx[None, :])
        add(r, r, np.full(r.shape, diag_edge))

    r = (vertex_lines[:, None] * M + m_idx[None, :])
    diag_v = eps * hv * hu * (
        (amid[:-1, :] + amid[1:, :]) / (eps**2 * hv**2)
        + w_pot / eps**2
        + 2.0 / (delta**2 * hu**2)
        - shift
    )
    add(r, r, diag_v)

    for iface, a_edge in ((iface1, amid[0, :]), (iface2, amid[-1, :])):
        r = iface * M + m_idx
        diag_i = hu * (1.0 / he + a_edge / (eps * hv)
                       + 2.0 * c_cell / (delta**2 * hu**2) - c_cell * shift)
        add(r, r, diag_i)

    # s-coupling between adjacent lines of the chain.
    pair_l = np.arange(n_lines - 1)
    left = pair_l[:, None] * M + m_idx[None, :]
    right = (pair_l[:, None] + 1) * M + m_idx[None, :]
    coup = np.empty((n_lines - 1, M), dtype=complex)
    coup[: K - 1, :] = -hu / he
    coup[K - 1: K + J - 1, :] = -hu * amid / (eps * hv)
    coup[K + J - 1:, :] = -hu / he
    add(left, right, coup)
    add(right, left, coup)

    # u-coupling within each line.
    w_edge = -he / (delta**2 * hu)
    w_vert = -eps * hv / (delta**2 * hu)
    w_ifc = -c_cell / (delta**2 * hu)
    line_wu = np.empty(n_lines)
    line_wu[edge1_lines] = w_edge
    line_wu[edge2_lines] = w_edge
    line_wu[vertex_lines] = w_vert
    line_wu[[iface1, iface2]] = w_ifc
    all_lines = np.arange(n_lines)
    lo = all_lines[:, None] * M + m_idx[None, :-1]
    hi = lo + 1
    wv = np.broadcast_to(line_wu[:, None], lo.shape)
    add(lo, hi, wv)
    add(hi, lo, wv)

    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_unknowns, grid.n_unknowns),
    ).tocsc()

    # Right-hand side: edge data f_j chi_n.
    chi = chi_mode(n, u)
    b = np.zeros(grid.n_unknowns, dtype=complex)
    for lines, f, iface in ((edge1_lines, f1, iface1), (edge2_lines, f2, iface2)):
        if f is None:
            continue
        k_of_line = np.abs(lines - iface)  # edge coordinate index per line
        s_vals = k_of_line * he
        fv = np.asarray(f(s_vals), dtype=float)
        b[(lines[:, None] * M + m_idx[None, :]).ravel()] = \
            (he * hu * fv[:, None] * chi[None, :]).ravel()
        b[iface * M + m_idx] = hu * (he / 2.0) * float(f(0.0)) * chi
    return a, b


@dataclass(frozen=True)
class FDSolution:
    """Discrete resolvent application on the waveguide grid."""

    grid: WaveguideGrid
    profile: CurvatureProfile
    n: int
    z: complex
    field: WaveguideField
    solve_residual: float
    transverse_shift: str

    def edge_projection(self, edge: int, n: int | None = None) -> np.ndarray:
        """(chi_n, psi_edge) per s node, by midpoint u-quadrature."""
        n = self.n if n is None else n
        values = self.field.edge1 if edge == 1 else self.field.edge2
        chi = chi_mode(n, self.grid.u_nodes)
        return self.grid.h_u * (values @ chi)

    def vertex_projection(self, n: int | None = None) -> np.ndarray:
        n = self.n if n is None else n
        chi = chi_mode(n, self.grid.u_nodes)
        return self.grid.h_u * (self.field.vertex @ chi)

    def energy_norm(self) -> float:
        """Discrete norm of the flat-measure energy space."""
        return _energy_norm(self.grid, self.field)


def _line_weights(grid: WaveguideGrid) -> np.ndarray:
    w = np.empty(grid.n_lines)
    K, J = grid.n_edge, grid.n_vertex
    w[: K - 1] = grid.h_edge
    w[K + J:] = grid.h_edge
    w[K: K + J - 1] = grid.epsilon * grid.h_vertex
    w[[K - 1, K + J - 1]] = 0.5 * (grid.h_edge + grid.epsilon * grid.h_vertex)
    return w


def _flatten(grid: WaveguideGrid, field: WaveguideField) -> np.ndarray:
    K, J, M = grid.n_edge, grid.n_vertex, grid.n_u
    psi = np.zeros(grid.n_unknowns, dtype=complex)
    lines_e1 = K - 1 - np.arange(K)
    psi = psi.reshape(grid.n_lines, M)
    psi[lines_e1, :] = field.edge1[: K, :]
    psi[K - 1 + np.arange(J + 1), :] = field.vertex
    psi[K + J - 1 + np.arange(K), :] = field.edge2[: K, :]
    return psi.ravel()


def _unflatten(grid: WaveguideGrid, psi: np.ndarray) -> WaveguideField:
    K, J, M = grid.n_edge, grid.n_vertex, grid.n_u
    lines = psi.reshape(grid.n_lines, M)
    edge1 = np.zeros((K + 1, M), dtype=complex)
    edge2 = np.zeros((K + 1, M), dtype=complex)
    edge1[: K, :] = lines[K - 1 - np.arange(K), :]
    edge2[: K, :] = lines[K + J - 1 + np.arange(K), :]
    vertex = lines[K - 1 + np.arange(J + 1), :].copy()
    return WaveguideField(grid, edge1, edge2, vertex)


def _energy_norm(grid: WaveguideGrid, field: WaveguideField) -> float:
    psi = _flatten(grid, field).reshape(grid.n_lines, grid.n_u)
    w = _line_weights(grid)
    return float(np.sqrt(grid.h_u * np.sum(w[:, None] * np.abs(psi) ** 2)))


def fd_resolvent(grid: WaveguideGrid, profile: CurvatureProfile, n: int,
                 z: complex, f1, f2,
                 transverse_shift: str = "discrete") -> FDSolution:
    """Solve the discrete shifted resolvent equation with data (f1, f2)."""
    if complex(z).imag == 0.0:
        raise OracleError("z must have nonzero imaginary part")
    sq = np.lib.scimath.sqrt(complex(z))
    trunc = math.exp(-abs(sq.imag) * grid.s_max)
    if trunc > 10.0 * TRUNCATION_TOL:
        raise OracleError(
            f"edge truncation error {trunc:.2e} exceeds bound; increase s_max")
    a, b = _assemble(grid, profile, n, z, f1, f2, transverse_shift)
    lu = spla.splu(a)
    psi = lu.solve(b)
    psi += lu.solve(b - a @ psi)  # one step of iterative refinement
    # Normwise backward error; the raw residual-to-|b| ratio saturates at
    # eps * ||A|| ||psi|| / ||b|| ~ 1e-9 because of the 1/delta^2 scale.
    a_norm = float(np.max(np.abs(a).sum(axis=0)))
    denom = a_norm * float(np.linalg.norm(psi)) + float(np.linalg.norm(b))
    resid = float(np.linalg.norm(a @ psi - b)) / max(denom, 1e-300)
    if resid > SOLVE_RESIDUAL_TOL:
        raise OracleError(f"sparse solve backward error {resid:.2e} above tolerance")
    return FDSolution(grid, profile, n, complex(z), _unflatten(grid, psi),
                      resid, transverse_shift)


def assemble_operator(grid: WaveguideGrid, profile: CurvatureProfile, n: int,
                      z: complex, transverse_shift: str = "discrete"):
    """The scaled system matrix alone (symmetry diagnostics)."""
    a, _ = _assemble(grid, profile, n, z, None, None, transverse_shift)
    return a


def unitary_map_check(grid: WaveguideGrid, profile: CurvatureProfile,
                      field: WaveguideField) -> dict:
    """Round-trip and norm-preservation defects of the metric flattening map.

    Forward map: edges scale by delta^(1/2), the vertex by
    delta^(1/2) g^(1/4); the physical norm carries the metric weights
    (delta on edges, delta*eps*g^(1/2) in the vertex).
    """
    ratio = grid.delta / grid.epsilon
    g = geometry_fields(profile, grid.vertex_s[:, None], grid.u_nodes[None, :],
                        ratio)["g"]
    root_delta = math.sqrt(grid.delta)
    g4 = g**0.25
    mapped = WaveguideField(
        grid,
        root_delta * field.edge1,
        root_delta * field.edge2,
        root_delta * g4 * field.vertex,
    )
    back = WaveguideField(
        grid,
        mapped.edge1 / root_delta,
        mapped.edge2 / root_delta,
        mapped.vertex / (root_delta * g4),
    )
    round_trip = max(
        float(np.max(np.abs(back.edge1 - field.edge1))) if field.edge1.size else 0.0,
        float(np.max(np.abs(back.edge2 - field.edge2))) if field.edge2.size else 0.0,
        float(np.max(np.abs(back.vertex - field.vertex))) if field.vertex.size else 0.0,
    )

    he, hv, hu = grid.h_edge, grid.h_vertex, grid.h_u

    def _edge_cells(values: np.ndarray) -> np.ndarray:
        w = np.full(values.shape[0], he)
        w[0] = he / 2.0
        w[-1] = he / 2.0
        return w

    def _vertex_cells(values: np.ndarray) -> np.ndarray:
        w = np.full(values.shape[0], hv)
        w[0] = hv / 2.0
        w[-1] = hv / 2.0
        return w

    # Physical norm of the original field.
    phys_sq = 0.0
    for e in (field.edge1, field.edge2):
        phys_sq += grid.delta * hu * float(np.sum(_edge_cells(e)[:, None] * np.abs(e) ** 2))
    phys_sq += grid.delta * grid.epsilon * hu * float(
        np.sum(_vertex_cells(field.vertex)[:, None] * np.sqrt(g) * np.abs(field.vertex) ** 2))

    flat_sq = 0.0
    for e in (mapped.edge1, mapped.edge2):
        flat_sq += hu * float(np.sum(_edge_cells(e)[:, None] * np.abs(e) ** 2))
    flat_sq += grid.epsilon * hu * float(
        np.sum(_vertex_cells(mapped.vertex)[:, None] * np.abs(mapped.vertex) ** 2))

    return {
        "round_trip": round_trip,
        "norm_defect": abs(math.sqrt(flat_sq) - math.sqrt(phys_sq)),
    }
