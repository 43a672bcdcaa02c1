"""Probabilistic model: single-site laws, site profiles, boxes, configurations.

The random couplings live on the integer lattice points strictly inside an
open box.  All sampling is reproducible through counter-based streams keyed
by ``(root_seed, trial, site index)``, see :mod:`andlab.rng`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .rng import site_uniforms

_WEIGHT_TOL = 1e-12


# ---------------------------------------------------------------------------
# single-site distributions (support must sit inside [0,1])
# ---------------------------------------------------------------------------

class SingleSiteDistribution:
    """Common law of the site couplings; support contained in [0,1].

    Concrete laws: :class:`Bernoulli`, :class:`Uniform01`, :class:`Atoms`,
    :class:`Mixture`.  ``is_degenerate`` is True when the law has fewer than
    two support points; degenerate laws are allowed (test fixtures) but carry
    the flag as a warning.
    """

    def validate(self) -> None:
        raise NotImplementedError

    def cdf(self, t: float) -> float:
        """P{value <= t}."""
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    @property
    def is_degenerate(self) -> bool:
        raise NotImplementedError

    @property
    def normalized_support(self) -> bool:
        """Whether {0,1} is contained in the support (normalized-model check)."""
        return False

    def sample(self, uniform_at_level) -> np.ndarray:
        """Draw one value per site given ``uniform_at_level(level) -> array``."""
        raise NotImplementedError

    def __post_init__(self):  # dataclass hook in subclasses
        self.validate()


@dataclass(frozen=True)
class Bernoulli(SingleSiteDistribution):
    q: float = 0.5  # probability of value 1

    def validate(self):
        if not (0.0 <= self.q <= 1.0):
            raise ValidationError(f"Bernoulli parameter q={self.q} outside [0,1]")

    def cdf(self, t):
        if t < 0.0:
            return 0.0
        if t < 1.0:
            return 1.0 - self.q
        return 1.0

    def mean(self):
        return self.q

    @property
    def is_degenerate(self):
        return self.q in (0.0, 1.0)

    @property
    def normalized_support(self):
        return 0.0 < self.q < 1.0

    def sample(self, uniform_at_level):
        return (uniform_at_level(0) < self.q).astype(np.float64)


@dataclass(frozen=True)
class Uniform01(SingleSiteDistribution):
    def validate(self):
        pass

    def cdf(self, t):
        return float(np.clip(t, 0.0, 1.0))

    def mean(self):
        return 0.5

    @property
    def is_degenerate(self):
        return False

    @property
    def normalized_support(self):
        return True

    def sample(self, uniform_at_level):
        return uniform_at_level(0)


@dataclass(frozen=True)
class Atoms(SingleSiteDistribution):
    """Finitely many atoms (value, weight) with values in [0,1]."""

    points: tuple = ()  # ((value, weight), ...)

    def validate(self):
        if not self.points:
            raise ValidationError("Atoms requires at least one (value, weight) pair")
        values = np.array([v for v, _ in self.points], dtype=float)
        weights = np.array([w for _, w in self.points], dtype=float)
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValidationError(f"atom values {values.tolist()} outside [0,1]")
        if np.any(weights < 0.0):
            raise ValidationError("atom weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValidationError(f"atom weights sum to {weights.sum()}, not 1")

    def _arrays(self):
        values = np.array([v for v, _ in self.points], dtype=float)
        weights = np.array([w for _, w in self.points], dtype=float)
        order = np.argsort(values)
        return values[order], weights[order]

    def cdf(self, t):
        values, weights = self._arrays()
        return float(weights[values <= t].sum())

    def mean(self):
        values, weights = self._arrays()
        return float(values @ weights)

    @property
    def is_degenerate(self):
        values, weights = self._arrays()
        return np.count_nonzero(weights > 0.0) < 2

    @property
    def normalized_support(self):
        values, weights = self._arrays()
        live = values[weights > 0.0]
        return bool(np.any(live == 0.0) and np.any(live == 1.0))

    def sample(self, uniform_at_level):
        values, weights = self._arrays()
        edges = np.cumsum(weights)
        idx = np.searchsorted(edges, uniform_at_level(0), side="right")
        idx = np.minimum(idx, len(values) - 1)
        return values[idx]


@dataclass(frozen=True)
class Mixture(SingleSiteDistribution):
    """Convex combination of component laws: ((weight, distribution), ...)."""

    components: tuple = ()

    def validate(self):
        if not self.components:
            raise ValidationError("Mixture requires at least one component")
        weights = np.array([w for w, _ in self.components], dtype=float)
        if np.any(weights < 0.0):
            raise ValidationError("mixture weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValidationError(f"mixture weights sum to {weights.sum()}, not 1")
        for _, comp in self.components:
            comp.validate()

    def cdf(self, t):
        return float(sum(w * comp.cdf(t) for w, comp in self.components))

    def mean(self):
        return float(sum(w * comp.mean() for w, comp in self.components))

    @property
    def is_degenerate(self):
        # degenerate iff the mixed law has < 2 support points: all live
        # components degenerate with one common support point
        live = [comp for w, comp in self.components if w > 0.0]
        if any(not comp.is_degenerate for comp in live):
            return False
        points = set()
        for comp in live:
            if isinstance(comp, Bernoulli):
                points.add(1.0 if comp.q == 1.0 else 0.0)
            elif isinstance(comp, Atoms):
                values, weights = comp._arrays()
                points.update(values[weights > 0.0].tolist())
            else:
                return False
        return len(points) < 2

    @property
    def normalized_support(self):
        lo = any(comp.cdf(0.0) > 0.0 for w, comp in self.components if w > 0.0)
        hi = any(comp.cdf(1.0 - 1e-15) < 1.0 for w, comp in self.components if w > 0.0)
        return lo and hi

    def sample(self, uniform_at_level):
        weights = np.array([w for w, _ in self.components], dtype=float)
        edges = np.cumsum(weights)
        pick = np.searchsorted(edges, uniform_at_level(0), side="right")
        pick = np.minimum(pick, len(self.components) - 1)
        out = np.empty(pick.shape, dtype=np.float64)
        for i, (_, comp) in enumerate(self.components):
            mask = pick == i
            if not np.any(mask):
                continue
            shifted = _shift_levels(uniform_at_level, 1, mask)
            out[mask] = comp.sample(shifted)
        return out


def _shift_levels(uniform_at_level, offset, mask):
    def inner(level):
        return uniform_at_level(level + offset)[mask]

    return inner


def distribution_cdf(dist: SingleSiteDistribution, t: float) -> float:
    """mu(]-inf, t]) for the given single-site law."""
    return dist.cdf(t)


# ---------------------------------------------------------------------------
# site profile u (pointwise sandwich u_- 1_{box(d-)} <= u <= u_+ 1_{box(d+)})
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SiteProfile:
    """Single-site bump u placed at every lattice site.

    The default shape is the indicator box ``u = u_plus * 1_{side delta_plus}``
    with ``u_minus = u_plus`` and ``delta_minus = delta_plus``; other shapes
    are accepted as a callable ``shape(offsets) -> values`` provided the
    two-sided indicator sandwich holds at every evaluated point.
    """

    u_plus: float = 1.0
    delta_plus: float = 1.0
    u_minus: Optional[float] = None
    delta_minus: Optional[float] = None
    shape: Optional[object] = None  # callable (n,d) offsets -> (n,) values

    def __post_init__(self):
        if self.u_minus is None:
            object.__setattr__(self, "u_minus", self.u_plus)
        if self.delta_minus is None:
            object.__setattr__(self, "delta_minus", self.delta_plus)
        if not (0.0 < self.u_minus <= self.u_plus):
            raise ValidationError(f"need 0 < u_minus <= u_plus, got {self.u_minus}, {self.u_plus}")
        if not (0.0 < self.delta_minus <= self.delta_plus):
            raise ValidationError(
                f"need 0 < delta_minus <= delta_plus, got {self.delta_minus}, {self.delta_plus}"
            )

    def evaluate(self, offsets: np.ndarray) -> np.ndarray:
        """u at points ``offsets`` (n,d) measured from the site center."""
        offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
        sup = np.max(np.abs(offsets), axis=1)
        if self.shape is None:
            return np.where(sup < self.delta_plus / 2.0, self.u_plus, 0.0)
        values = np.asarray(self.shape(offsets), dtype=float)
        lower = np.where(sup < self.delta_minus / 2.0, self.u_minus, 0.0)
        upper = np.where(sup < self.delta_plus / 2.0, self.u_plus, 0.0)
        if np.any(values < lower - 1e-12) or np.any(values > upper + 1e-12):
            raise ValidationError("site profile violates the indicator sandwich")
        return values


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxSpec:
    """Open box of side L centered at x0 (sup-norm, strict inequalities)."""

    dimension: int
    center: tuple
    side: float

    def __post_init__(self):
        if self.dimension < 1:
            raise ValidationError("dimension must be >= 1")
        if self.side <= 0.0:
            raise ValidationError("box side must be positive")
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        if len(c) != self.dimension:
            raise ValidationError(f"center has {len(c)} coordinates, dimension is {self.dimension}")
        object.__setattr__(self, "center", c)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.max(np.abs(points - np.asarray(self.center)), axis=1) < self.side / 2.0

    def scaled(self, factor: float) -> "BoxSpec":
        return BoxSpec(self.dimension, self.center, self.side * factor)


@dataclass(frozen=True)
class AnnulusSpec:
    """Open annulus L1/2 < ||y - x0|| < L2/2 in sup-norm."""

    dimension: int
    center: tuple
    inner_side: float
    outer_side: float

    def __post_init__(self):
        if not (0.0 < self.inner_side < self.outer_side):
            raise ValidationError(
                f"need 0 < L1 < L2, got L1={self.inner_side}, L2={self.outer_side}"
            )
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        if len(c) != self.dimension:
            raise ValidationError(f"center has {len(c)} coordinates, dimension is {self.dimension}")
        object.__setattr__(self, "center", c)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        dist = np.max(np.abs(points - np.asarray(self.center)), axis=1)
        return (dist > self.inner_side / 2.0) & (dist < self.outer_side / 2.0)


def lattice_sites(box: BoxSpec) -> np.ndarray:
    """Integer points strictly inside the open box, lexicographic order.

    Returns an ``(m, d)`` integer array; ``m`` may be zero.
    """
    axes = []
    for c in box.center:
        lo, hi = c - box.side / 2.0, c + box.side / 2.0
        first = int(np.floor(lo)) + 1 if float(np.floor(lo)) == lo else int(np.ceil(lo))
        last = int(np.ceil(hi)) - 1 if float(np.ceil(hi)) == hi else int(np.floor(hi))
        # strict inequalities: endpoints landing exactly on integers are excluded
        if float(first) <= lo:
            first += 1
        if float(last) >= hi:
            last -= 1
        axes.append(np.arange(first, last + 1, dtype=np.int64))
    if any(len(a) == 0 for a in axes):
        return np.empty((0, box.dimension), dtype=np.int64)
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Configuration:
    """One realization of the couplings on a box, with optional free sites.

    ``sites``/``values`` carry omega on the non-free lattice sites;
    ``free_sites``/``free_values`` carry the adjustable couplings t_S
    (``free_values`` may be None while the assignment is left open).
    """

    region: BoxSpec
    sites: np.ndarray          # (m, d) int lattice sites carrying omega
    values: np.ndarray         # (m,) floats in [0,1]
    free_sites: Optional[np.ndarray] = None    # (s, d) int
    free_values: Optional[np.ndarray] = None   # (s,) floats in [0,1] or None
    seed_provenance: tuple = (0, 0)            # (root_seed, trial)
    degenerate_warning: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValidationError("configuration values must lie in [0,1]")
        if self.free_values is not None:
            fv = np.asarray(self.free_values, dtype=float)
            if np.any(fv < 0.0) or np.any(fv > 1.0):
                raise ValidationError("free-site values must lie in [0,1]")
        if self.free_sites is not None and len(self.free_sites) and len(self.sites):
            joint = {tuple(s) for s in np.asarray(self.sites)} & {
                tuple(s) for s in np.asarray(self.free_sites)
            }
            if joint:
                raise ValidationError(f"free sites overlap omega domain: {sorted(joint)[:3]}")

    def with_free_values(self, t: np.ndarray) -> "Configuration":
        """Same configuration with the free couplings set to ``t``."""
        if self.free_sites is None:
            raise ValidationError("configuration has no free sites")
        t = np.asarray(t, dtype=float)
        if t.shape != (len(self.free_sites),):
            raise ValidationError(f"expected {len(self.free_sites)} free values, got {t.shape}")
        return Configuration(
            self.region, self.sites, self.values, self.free_sites, t,
            self.seed_provenance, self.degenerate_warning,
        )

    def all_sites_and_values(self) -> tuple:
        """Concatenated (sites, values) over omega and assigned free sites."""
        if self.free_sites is None or len(self.free_sites) == 0:
            return self.sites, self.values
        if self.free_values is None:
            raise ValidationError("free sites present but no t_S assigned")
        sites = np.vstack([self.sites, self.free_sites])
        values = np.concatenate([self.values, self.free_values])
        return sites, values

    def to_json(self) -> str:
        payload = {
            "region": {"dimension": self.region.dimension,
                       "center": list(self.region.center),
                       "side": self.region.side},
            "sites": np.asarray(self.sites).tolist(),
            "values": np.asarray(self.values).tolist(),
            "free_sites": {} if self.free_sites is None else {
                "sites": np.asarray(self.free_sites).tolist(),
                "values": None if self.free_values is None
                else np.asarray(self.free_values).tolist(),
            },
            "seed": list(self.seed_provenance),
        }
        return json.dumps(payload, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "Configuration":
        raw = json.loads(text)
        region = BoxSpec(raw["region"]["dimension"], tuple(raw["region"]["center"]),
                         raw["region"]["side"])
        free = raw.get("free_sites") or {}
        return Configuration(
            region,
            np.asarray(raw["sites"], dtype=np.int64).reshape(-1, region.dimension),
            np.asarray(raw["values"], dtype=float),
            None if not free else np.asarray(free["sites"], dtype=np.int64).reshape(
                -1, region.dimension),
            None if not free or free["values"] is None else np.asarray(free["values"], dtype=float),
            tuple(raw.get("seed", (0, 0))),
        )


def sample_configuration(
    dist: SingleSiteDistribution,
    box: BoxSpec,
    free_sites: Optional[Sequence] = None,
    root_seed: int = 0,
    trial: int = 0,
) -> Configuration:
    """Draw an i.i.d. configuration on the lattice sites of ``box``.

    Free sites (a subset of the lattice sites) are excluded from the omega
    domain and left unassigned.  The draw at a site depends only on
    ``(root_seed, trial, site index)`` where the index refers to the
    lexicographic ordering of the full site list, so adding or removing free
    sites does not reshuffle the remaining draws.
    """
    dist.validate()
    all_sites = lattice_sites(box)
    n = len(all_sites)

    def uniform_at_level(level):
        return site_uniforms(root_seed, trial, n, level)

    values = dist.sample(uniform_at_level)
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ValidationError("distribution produced values outside [0,1]")

    if free_sites is not None:
        fs = np.atleast_2d(np.asarray(free_sites, dtype=np.int64))
        site_set = {tuple(s) for s in all_sites}
        for s in fs:
            if tuple(s) not in site_set:
                raise ValidationError(f"free site {tuple(s)} not a lattice site of the box")
        free_set = {tuple(s) for s in fs}
        keep = np.array([tuple(s) not in free_set for s in all_sites], dtype=bool)
        omega_sites, omega_values = all_sites[keep], values[keep]
    else:
        fs = None
        omega_sites, omega_values = all_sites, values

    return Configuration(
        region=box,
        sites=omega_sites,
        values=omega_values,
        free_sites=fs,
        free_values=None,
        seed_provenance=(int(root_seed), int(trial)),
        degenerate_warning=dist.is_degenerate,
    )
