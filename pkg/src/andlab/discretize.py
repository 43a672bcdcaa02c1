"""Uniform grids and sparse finite-volume Hamiltonians.

The continuum operator ``-Lap + V_per + U + sum_zeta omega_zeta u(.-zeta)``
is discretized on a uniform tensor grid over an open box with the standard
second-order ``2d+1``-point stencil.  Dirichlet keeps the interior nodes
only; periodic identifies opposite faces.  Norms and inner products carry
the ``h^d`` weight so constants are comparable across meshes.

Potentials are sampled pointwise at grid nodes (no cell averaging); the
inequalities checked downstream are sandwich-stable under pointwise sampling.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .errors import GridError, ValidationError
from .model import AnnulusSpec, BoxSpec, Configuration, SiteProfile

_FIT_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Mesh with ``points_per_unit`` nodes per lattice unit (h = 1/n)."""

    points_per_unit: int
    boundary: str = "dirichlet"

    def __post_init__(self):
        if int(self.points_per_unit) != self.points_per_unit or self.points_per_unit < 2:
            raise ValidationError("points_per_unit must be an integer >= 2")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValidationError(f"unknown boundary condition {self.boundary!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.points_per_unit


@dataclass(frozen=True)
class PeriodicField:
    """Scalar field with declared period (checked against periodic boxes)."""

    fn: Callable
    period: int = 1

    def __call__(self, points):
        return np.asarray(self.fn(points), dtype=float)


class Grid:
    """Node geometry of a box under a :class:`GridSpec`."""

    def __init__(self, box: BoxSpec, spec: GridSpec):
        self.box = box
        self.spec = spec
        n = spec.points_per_unit
        per_axis = box.side * n
        if abs(per_axis - round(per_axis)) > _FIT_TOL:
            raise GridError(f"box side {box.side} not an integer number of cells at h=1/{n}")
        cells = int(round(per_axis))
        if cells < 2:
            raise GridError("box too small for the mesh")
        h = spec.h
        axes = []
        for c in box.center:
            lo = c - box.side / 2.0
            if spec.boundary == "dirichlet":
                idx = np.arange(1, cells)
            else:
                idx = np.arange(0, cells)
            axes.append(lo + idx * h)
        self.axes = tuple(axes)
        self.h = h
        self.cells = cells
        self.shape = tuple(len(a) for a in axes)
        self.size = int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        """All node coordinates, shape (size, d), C-order raveling."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def weight(self) -> float:
        """Quadrature weight of one node in the h^d-weighted inner product."""
        return self.h ** self.box.dimension

    def norm(self, vec: np.ndarray) -> float:
        """h^d-weighted L2 norm."""
        return float(np.sqrt(self.weight()) * np.linalg.norm(vec))


def region_mask(grid: Grid, region: Union[BoxSpec, AnnulusSpec]) -> np.ndarray:
    """Boolean diagonal mask of grid nodes inside an open region."""
    return np.asarray(region.contains(grid.points()), dtype=bool)


def indicator_operator(grid: Grid, region: Union[BoxSpec, AnnulusSpec]):
    """Diagonal 0/1 mask for a region; flags an empty intersection.

    Returns ``(mask, empty_warning)`` with ``mask`` a boolean vector over
    grid nodes (open-set semantics).
    """
    mask = region_mask(grid, region)
    return mask, not bool(mask.any())


def unit_box_mask(grid: Grid, x) -> np.ndarray:
    """Mask of the unit box centered at ``x`` (the chi_x of resolvent probes)."""
    return region_mask(grid, BoxSpec(grid.box.dimension, tuple(np.atleast_1d(x)), 1.0))


def annulus_shell_mask(grid: Grid, x, L: float) -> np.ndarray:
    """Mask of the slightly enlarged annulus of sides (L-1, 2L+1) around x."""
    return region_mask(grid, AnnulusSpec(grid.box.dimension, tuple(np.atleast_1d(x)),
                                         L - 1.0, 2.0 * L + 1.0))


def _laplacian_1d(m: int, h: float, periodic: bool) -> sp.csr_matrix:
    main = np.full(m, 2.0 / h**2)
    off = np.full(m - 1, -1.0 / h**2)
    T = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if periodic and m > 2:
        T[0, m - 1] = -1.0 / h**2
        T[m - 1, 0] = -1.0 / h**2
    return T.tocsr()


def _laplacian(grid: Grid) -> sp.csr_matrix:
    periodic = grid.spec.boundary == "periodic"
    mats = [_laplacian_1d(m, grid.h, periodic) for m in grid.shape]
    lap = None
    for a, T in enumerate(mats):
        left = int(np.prod(grid.shape[:a], dtype=int)) if a > 0 else 1
        right = int(np.prod(grid.shape[a + 1:], dtype=int)) if a + 1 < len(mats) else 1
        term = sp.kron(sp.identity(left, format="csr"),
                       sp.kron(T, sp.identity(right, format="csr"), format="csr"),
                       format="csr")
        lap = term if lap is None else lap + term
    return lap.tocsr()


class HamiltonianMatrix:
    """Sparse symmetric finite-volume Hamiltonian with its grid geometry."""

    def __init__(self, matrix: sp.csr_matrix, grid: Grid, potential: np.ndarray,
                 config_digest: str = "", potential_digest: str = ""):
        self.matrix = matrix
        self.grid = grid
        self.potential = potential
        self.size = matrix.shape[0]
        self.config_digest = config_digest
        self.potential_digest = potential_digest

    @property
    def boundary(self) -> str:
        return self.grid.spec.boundary

    def norm_bound(self) -> float:
        """Cheap upper bound on the operator norm (row-sum bound)."""
        return float(abs(self.matrix).sum(axis=1).max())

    def shifted(self, c: float) -> "HamiltonianMatrix":
        return HamiltonianMatrix(
            (self.matrix + c * sp.identity(self.size, format="csr")).tocsr(),
            self.grid, self.potential + c, self.config_digest, self.potential_digest)

    def export_triplets(self, path) -> None:
        """Coordinate (row, col, value) text format for external cross-checks."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# size {self.size} h {self.grid.h} boundary {self.boundary}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {float(v)!r}\n")


def _site_potential(grid: Grid, profile: SiteProfile, sites: np.ndarray,
                    couplings: np.ndarray) -> np.ndarray:
    """Sum of coupling * u(. - site) sampled on the grid, shape grid.shape."""
    out = np.zeros(grid.shape, dtype=float)
    if len(sites) == 0:
        return out
    half = profile.delta_plus / 2.0
    default_box = profile.shape is None
    for site, coupling in zip(np.atleast_2d(sites), couplings):
        if coupling == 0.0:
            continue
        sub = []
        for a, axis in enumerate(grid.axes):
            lo = np.searchsorted(axis, site[a] - half, side="right")
            hi = np.searchsorted(axis, site[a] + half, side="left")
            # strict inequality at the support edge
            while lo < len(axis) and axis[lo] <= site[a] - half:
                lo += 1
            while hi > lo and axis[hi - 1] >= site[a] + half:
                hi -= 1
            sub.append((lo, hi))
        if any(hi <= lo for lo, hi in sub):
            continue
        block = tuple(slice(lo, hi) for lo, hi in sub)
        if default_box:
            out[block] += coupling * profile.u_plus
        else:
            local_axes = [grid.axes[a][s] - site[a] for a, s in enumerate(block)]
            mesh = np.meshgrid(*local_axes, indexing="ij")
            offsets = np.stack([g.ravel() for g in mesh], axis=1)
            out[block] += coupling * profile.evaluate(offsets).reshape(
                tuple(hi - lo for lo, hi in sub))
    return out


def assemble_hamiltonian(
    box: BoxSpec,
    grid_spec: GridSpec,
    profile: SiteProfile,
    config: Configuration,
    v_per: Optional[PeriodicField] = None,
    u_background: Optional[Callable] = None,
    u_plus_bound: Optional[float] = None,
) -> HamiltonianMatrix:
    """Assemble ``-Lap + V_per + U + V_{omega,t_S}`` on the grid over ``box``.

    Parameters
    ----------
    box, grid_spec : geometry and mesh; the configuration region must be
        contained in ``box``.
    profile : single-site bump shape shared by all sites.
    config : coupling realization; assigned free-site values are included.
    v_per : optional periodic background (period must divide a periodic box).
    u_background : optional callable ``points -> values`` with values in
        ``[0, u_plus_bound]``.
    """
    region = config.region
    cb, cr = np.asarray(box.center), np.asarray(region.center)
    if np.any(np.abs(cr - cb) + region.side / 2.0 > box.side / 2.0 + 1e-12):
        raise ValidationError("configuration region is not contained in the box")

    if grid_spec.boundary == "periodic" and v_per is not None:
        ratio = box.side / v_per.period
        if abs(ratio - round(ratio)) > _FIT_TOL:
            raise GridError(
                f"periodic box side {box.side} is not a multiple of the potential period "
                f"{v_per.period}")

    grid = Grid(box, grid_spec)
    pts = grid.points()

    potential = np.zeros(grid.shape, dtype=float)
    if v_per is not None:
        potential += np.asarray(v_per(pts), dtype=float).reshape(grid.shape)
    if u_background is not None:
        u_vals = np.asarray(u_background(pts), dtype=float).reshape(grid.shape)
        cap = u_plus_bound if u_plus_bound is not None else np.inf
        if np.any(u_vals < -1e-12) or np.any(u_vals > cap + 1e-12):
            raise ValidationError("background potential U outside [0, U_plus]")
        potential += u_vals

    sites, values = config.all_sites_and_values()
    potential += _site_potential(grid, profile, sites, values)

    H = _laplacian(grid) + sp.diags(potential.ravel(), format="csr")
    H = ((H + H.T) * 0.5).tocsr()  # symmetrize away roundoff

    cfg_digest = hashlib.sha256(config.to_json().encode()).hexdigest()[:16]
    pot_digest = hashlib.sha256(np.ascontiguousarray(potential).tobytes()).hexdigest()[:16]
    return HamiltonianMatrix(H, grid, potential.ravel(), cfg_digest, pot_digest)


def empty_configuration(box: BoxSpec) -> Configuration:
    """All-zero couplings on the box (the free operator's configuration)."""
    from .model import lattice_sites

    sites = lattice_sites(box)
    return Configuration(box, sites, np.zeros(len(sites)))
