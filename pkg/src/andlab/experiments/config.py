"""Experiment configuration: strict JSON schema and model builders.

Configs are flat JSON documents with four sections; unknown keys are
rejected by name.  Physics parameters have no silent defaults -- each
experiment declares which are required.  Solver knobs default and are echoed
into the manifest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..discretize import GridSpec, PeriodicField
from ..errors import ValidationError
from ..model import Atoms, Bernoulli, Mixture, SingleSiteDistribution, SiteProfile, Uniform01

EXPERIMENT_KINDS = (
    "covering-suite", "constants", "initial-scale", "goodness-ladder",
    "dichotomy", "ids", "dynamical", "qucp", "periodic-gap",
)

_TOP_KEYS = {"experiment", "model", "params", "run"}
_MODEL_KEYS = {"distribution", "profile", "v_per", "u_background", "grid"}
_RUN_KEYS = {"root_seed", "n_samples", "workers", "out", "verbose"}

_REQUIRED_PARAMS = {
    "covering-suite": {"n_instances", "dims"},
    "constants": {"d", "p"},
    "initial-scale": {"scales", "p", "eps"},
    "goodness-ladder": {"scales", "energy_rule", "m_rule", "varsigma", "p"},
    "dichotomy": {"L", "interval", "M", "vartheta", "nu"},
    "ids": {"L", "energy_grid"},
    "dynamical": {"L", "interval", "b", "x0"},
    "qucp": {"L", "delta", "theta_side", "probe_count"},
    "periodic-gap": {"benchmarks"},
}
_OPTIONAL_PARAMS = {
    "covering-suite": {"annulus_instances"},
    "constants": {"p_tilde", "varsigma", "varsigma_prime", "tau", "rho1", "n1",
                  "rho", "eta", "gamma", "m", "eps", "delta_plus", "q", "L_ref"},
    "initial-scale": {"delta_plus", "q", "energy_factor"},
    "goodness-ladder": {"pair_cap"},
    "dichotomy": {"x0", "outer_factor"},
    "ids": {"modulus_fit"},
    "dynamical": {"t_grid"},
    "qucp": {"theta_center", "D"},
    "periodic-gap": set(),
}

_NEEDS_MODEL = {"initial-scale", "goodness-ladder", "dichotomy", "ids",
                "dynamical", "qucp"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: dict
    params: dict
    run: dict
    raw: dict = field(repr=False, default_factory=dict)

    def digest(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    @property
    def root_seed(self) -> int:
        return int(self.run.get("root_seed", 0))

    @property
    def n_samples(self) -> int:
        return int(self.run.get("n_samples", 1))

    @property
    def workers(self) -> int:
        return int(self.run.get("workers", 1))


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    for key in section:
        if key not in allowed:
            raise ValidationError(f"unknown key {key!r} in {where}")


def validate_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    kind = raw.get("experiment")
    if kind not in EXPERIMENT_KINDS:
        raise ValidationError(f"unknown experiment kind {kind!r}; "
                              f"expected one of {EXPERIMENT_KINDS}")
    model = raw.get("model", {})
    _reject_unknown(model, _MODEL_KEYS, "model")
    if kind in _NEEDS_MODEL:
        for required in ("distribution", "profile", "grid"):
            if required not in model:
                raise ValidationError(f"experiment {kind!r} requires model.{required}")
    params = raw.get("params", {})
    allowed = _REQUIRED_PARAMS[kind] | _OPTIONAL_PARAMS[kind]
    _reject_unknown(params, allowed, "params")
    missing = _REQUIRED_PARAMS[kind] - set(params)
    if missing:
        raise ValidationError(f"experiment {kind!r} missing params: {sorted(missing)}")
    run = raw.get("run", {})
    _reject_unknown(run, _RUN_KEYS, "run")
    return ExperimentConfig(kind, dict(model), dict(params), dict(run), raw=raw)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    return validate_config(raw)


# ---------------------------------------------------------------------------
# builders from spec dicts (picklable inputs for worker processes)
# ---------------------------------------------------------------------------

def build_distribution(spec: dict) -> SingleSiteDistribution:
    kind = spec.get("kind")
    if kind == "bernoulli":
        _reject_unknown(spec, {"kind", "q"}, "distribution")
        return Bernoulli(float(spec.get("q", 0.5)))
    if kind == "uniform01":
        _reject_unknown(spec, {"kind"}, "distribution")
        return Uniform01()
    if kind == "atoms":
        _reject_unknown(spec, {"kind", "points"}, "distribution")
        return Atoms(tuple((float(v), float(w)) for v, w in spec["points"]))
    if kind == "mixture":
        _reject_unknown(spec, {"kind", "components"}, "distribution")
        return Mixture(tuple((float(w), build_distribution(c))
                             for w, c in spec["components"]))
    raise ValidationError(f"unknown distribution kind {kind!r}")


def build_profile(spec: dict) -> SiteProfile:
    _reject_unknown(spec, {"u_plus", "delta_plus", "u_minus", "delta_minus"}, "profile")
    return SiteProfile(
        u_plus=float(spec.get("u_plus", 1.0)),
        delta_plus=float(spec.get("delta_plus", 1.0)),
        u_minus=None if "u_minus" not in spec else float(spec["u_minus"]),
        delta_minus=None if "delta_minus" not in spec else float(spec["delta_minus"]),
    )


def build_grid(spec: dict) -> GridSpec:
    _reject_unknown(spec, {"points_per_unit", "boundary"}, "grid")
    return GridSpec(int(spec["points_per_unit"]), spec.get("boundary", "dirichlet"))


def build_v_per(spec: Optional[dict]) -> Optional[PeriodicField]:
    if spec is None:
        return None
    kind = spec.get("kind", "zero")
    if kind == "zero":
        _reject_unknown(spec, {"kind"}, "v_per")
        return None
    if kind == "cosine":
        _reject_unknown(spec, {"kind", "amplitude", "period", "offset",
                               "auto_shift", "dimension"}, "v_per")
        amp = float(spec.get("amplitude", 1.0))
        period = int(spec.get("period", 1))
        off = float(spec.get("offset", 0.0))

        def fn(points, _amp=amp, _p=period, _off=off):
            points = np.atleast_2d(np.asarray(points, dtype=float))
            return _off + _amp * np.sum(np.cos(2.0 * np.pi * points / _p), axis=1)

        field = PeriodicField(fn, period)
        if spec.get("auto_shift", False):
            # normalize inf spec(-Lap + V_per) to zero (off by default)
            shift = periodic_ground_energy(field, int(spec.get("dimension", 1)))
            shifted = PeriodicField(
                lambda pts, _f=fn, _s=shift: _f(pts) - _s, period)
            return shifted
        return field
    raise ValidationError(f"unknown v_per kind {kind!r}")


def periodic_ground_energy(field: PeriodicField, dimension: int,
                           supercell_periods: int = 8,
                           points_per_unit: int = 8) -> float:
    """inf spec(-Lap + V_per) approximated on a periodic supercell."""
    from ..discretize import assemble_hamiltonian, empty_configuration
    from ..model import BoxSpec
    from ..spectral import lowest_eigenvalue

    side = float(field.period * supercell_periods)
    box = BoxSpec(dimension, tuple([0.0] * dimension), side)
    H = assemble_hamiltonian(box, GridSpec(points_per_unit, "periodic"),
                             SiteProfile(), empty_configuration(box), field)
    return lowest_eigenvalue(H)
