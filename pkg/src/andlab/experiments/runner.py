"""Experiment execution: deterministic trial scheduling and persistence.

Each experiment is a pure function of (config, root seed); Monte Carlo
trials are independent, keyed by trial index, and may run in worker
processes -- results are aggregated in index order, so output bytes do not
depend on the worker count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from .. import __version__
from ..covering import standard_covering_annulus, standard_covering_box
from ..discretize import assemble_hamiltonian
from ..errors import ValidationError
from ..ids import log_holder_modulus
from ..model import AnnulusSpec, BoxSpec, sample_configuration
from ..msa import (check_goodness, FreeSitePolicy, initial_scale_values,
                   msa_constants, wilson_interval)
from ..observables import dichotomy_check, dynamical_moment
from ..qucp import periodic_projection_gap, qucp_verify
from ..rng import derive_key, uniforms
from ..spectral import eigs_window, lowest_eigenvalue
from .config import (ExperimentConfig, build_distribution, build_grid,
                     build_profile, build_v_per)
from .emit import emit_plotdata, file_digest, write_csv, write_json


def map_trials(fn: Callable, payloads: List[dict], workers: int) -> list:
    """Order-preserving map over payloads, optionally across processes."""
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    chunk = max(1, len(payloads) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads, chunksize=chunk))


def _model_objects(model: dict):
    dist = build_distribution(model["distribution"])
    profile = build_profile(model["profile"])
    grid = build_grid(model["grid"])
    v_per = build_v_per(model.get("v_per"))
    return dist, profile, grid, v_per


# ---------------------------------------------------------------------------
# per-trial workers (top level: picklable)
# ---------------------------------------------------------------------------

def _trial_initial_scale(payload: dict) -> bool:
    dist, profile, grid, v_per = _model_objects(payload["model"])
    L = payload["scale"]
    d = payload["d"]
    box = BoxSpec(d, tuple([0.0] * d), float(L))
    cfg = sample_configuration(dist, box, None, payload["root_seed"], payload["trial"])
    H = assemble_hamiltonian(box, grid, profile, cfg, v_per)
    return bool(lowest_eigenvalue(H) >= payload["threshold"])


def _trial_goodness(payload: dict) -> bool:
    dist, profile, grid, v_per = _model_objects(payload["model"])
    L = payload["scale"]
    d = payload["d"]
    box = BoxSpec(d, tuple([0.0] * d), float(L))
    cfg = sample_configuration(dist, box, None, payload["root_seed"], payload["trial"])
    rep = check_goodness(box, grid, profile, cfg, payload["energy"], payload["m"],
                         payload["varsigma"], FreeSitePolicy(seed=payload["root_seed"]),
                         "good", v_per, pair_cap=payload["pair_cap"])
    return bool(rep.is_good)


def _trial_ids_counts(payload: dict) -> list:
    dist, profile, grid, v_per = _model_objects(payload["model"])
    d = payload["d"]
    box = BoxSpec(d, tuple([0.0] * d), float(payload["L"]))
    cfg = sample_configuration(dist, box, None, payload["root_seed"], payload["trial"])
    H = assemble_hamiltonian(box, grid, profile, cfg, v_per)
    from ..ids import full_spectrum

    spec = np.sort(full_spectrum(H))
    return np.searchsorted(spec, np.asarray(payload["energy_grid"]),
                           side="right").tolist()


def _trial_dichotomy(payload: dict) -> list:
    dist, profile, grid, v_per = _model_objects(payload["model"])
    d = payload["d"]
    L = payload["L"]
    outer = BoxSpec(d, tuple([0.0] * d), float(payload["outer_factor"]) * L)
    cfg = sample_configuration(dist, outer, None, payload["root_seed"], payload["trial"])
    records = dichotomy_check(outer, grid, profile, cfg, payload["x0"], L,
                              tuple(payload["interval"]), payload["M"],
                              payload["vartheta"], payload["nu"], v_per)
    return [{"trial": payload["trial"], "energy": r.energy, "w_x": r.w_x,
             "w_x_L": r.w_x_L, "branch_point": r.branch_point,
             "branch_annulus": r.branch_annulus, "product_ok": r.product_ok}
            for r in records]


def _trial_dynamical(payload: dict) -> dict:
    dist, profile, grid, v_per = _model_objects(payload["model"])
    d = payload["d"]
    box = BoxSpec(d, tuple([0.0] * d), float(payload["L"]))
    cfg = sample_configuration(dist, box, None, payload["root_seed"], payload["trial"])
    H = assemble_hamiltonian(box, grid, profile, cfg, v_per)
    dm = dynamical_moment(H, tuple(payload["interval"]), payload["b"],
                          payload["x0"], tuple(payload["t_grid"]))
    return {"trial": payload["trial"], "proxy": dm.proxy,
            "samples": dm.samples, "count": dm.window_count}


def _trial_qucp(payload: dict) -> list:
    dist, profile, grid, v_per = _model_objects(payload["model"])
    d = payload["d"]
    box = BoxSpec(d, tuple([0.0] * d), float(payload["L"]))
    cfg = sample_configuration(dist, box, None, payload["root_seed"], payload["trial"])
    H = assemble_hamiltonian(box, grid, profile, cfg, v_per)
    upper = 4.0 * (np.pi / payload["L"]) ** 2 + float(np.max(H.potential)) + 1.0
    res = eigs_window(H, (-0.1, upper), max_count=4)
    if len(res.energies) == 0:
        return []
    theta = BoxSpec(d, tuple(payload["theta_center"]), payload["theta_side"])
    probes = payload["probes"]
    fit = qucp_verify(H, res.vectors[:, 0], float(res.energies[0]), theta,
                      payload["delta"], probes, payload.get("D"))
    rows = []
    for r in fit.records:
        rows.append({"trial": payload["trial"], "x": r.x[0] if d == 1 else str(r.x),
                     "R": r.R, "K": r.K, "lhs": r.lhs, "rhs": r.rhs,
                     "ratio": r.ratio, "kappa": r.kappa, "skipped": r.skipped})
    return rows


# ---------------------------------------------------------------------------
# experiment bodies
# ---------------------------------------------------------------------------

def _run_covering_suite(cfg: ExperimentConfig, out: Path) -> list:
    n = int(cfg.params["n_instances"])
    dims = [int(v) for v in cfg.params["dims"]]
    n_ann = int(cfg.params.get("annulus_instances", max(1, n // 5)))
    key = derive_key(cfg.root_seed, 0xC0FE)
    u = uniforms(key, np.arange(6 * (n + n_ann), dtype=np.uint64)).reshape(-1, 6)
    rows = []
    for i in range(n):
        d = dims[i % len(dims)]
        L = 12.0 + 188.0 * u[i, 0]
        ell = L / 6.0 * (0.3 + 0.7 * u[i, 1])
        x0 = tuple(20.0 * (u[i, 2 + a] - 0.5) for a in range(d))
        box = BoxSpec(d, x0, L)
        cov = standard_covering_box(box, ell, max_centers=300_000)
        per_axis = 2 * cov.steps_per_axis + 1
        rows.append({"instance": i, "kind": "box", "d": d, "L": L, "ell": ell,
                     "alpha": float(cov.alpha), "centers": per_axis ** d})
    for j in range(n_ann):
        d = dims[j % len(dims)]
        L2 = 30.0 + 100.0 * u[n + j, 0]
        L1 = L2 * (0.15 + 0.4 * u[n + j, 1])
        ell = (L2 - L1) / 7.0 * (0.4 + 0.55 * u[n + j, 2])
        ann = AnnulusSpec(d, tuple([0.0] * d), L1, L2)
        cov = standard_covering_annulus(ann, ell, max_centers=300_000)
        rows.append({"instance": n + j, "kind": "annulus", "d": d, "L": L2,
                     "ell": ell, "alpha": float(cov.alpha), "centers": len(cov)})
    write_csv(out / "covering_identities.csv",
              ("instance", "kind", "d", "L", "ell", "alpha", "centers"), rows,
              comment="standard coverings constructed per instance")
    return ["covering_identities.csv"]


def _run_constants(cfg: ExperimentConfig, out: Path) -> list:
    params = msa_constants(**{k: v for k, v in cfg.params.items()})
    write_json(out / "constants.json", params.to_dict())
    return ["constants.json"]


def _run_initial_scale(cfg: ExperimentConfig, out: Path, workers: int) -> list:
    p = float(cfg.params["p"])
    eps = float(cfg.params["eps"])
    dp = float(cfg.params.get("delta_plus", 1.0))
    q = int(cfg.params.get("q", 1))
    factor = float(cfg.params.get("energy_factor", 2.0))
    d = 1  # CLI experiments run the 1-d desk bench; the library API is d-general
    rows = []
    for L in cfg.params["scales"]:
        E_L, m_L = initial_scale_values(float(L), p, d, eps, dp, q)
        payloads = [{"model": cfg.model, "scale": float(L), "d": d,
                     "threshold": factor * E_L, "root_seed": cfg.root_seed,
                     "trial": t} for t in range(cfg.n_samples)]
        hits = map_trials(_trial_initial_scale, payloads, workers)
        succ = sum(hits)
        lo, hi = wilson_interval(succ, len(hits))
        target = 1.0 - float(L) ** (-p * d)
        rows.append({"L": float(L), "E_L": E_L, "m_L": m_L, "n": len(hits),
                     "successes": succ, "p_hat": succ / len(hits),
                     "wilson_low": lo, "wilson_high": hi, "target": target,
                     "verdict": (lo >= target) or (succ / len(hits) >= target)})
    write_csv(out / "ladder.csv",
              ("L", "E_L", "m_L", "n", "successes", "p_hat", "wilson_low",
               "wilson_high", "target", "verdict"), rows,
              comment="P{lambda_min >= factor * E_L} per scale")
    emit_plotdata([{"L": r["L"], "p_hat": r["p_hat"],
                    "halfwidth": (r["wilson_high"] - r["wilson_low"]) / 2.0}
                   for r in rows], "ladder", out / "plot_ladder.csv")
    return ["ladder.csv", "plot_ladder.csv"]


def _rule_value(rule: dict, L: float, p: float, d: int) -> tuple:
    kind = rule.get("kind")
    if kind == "initial-scale":
        E_L, m_L = initial_scale_values(L, p, d, float(rule.get("eps", 1.0)),
                                        float(rule.get("delta_plus", 1.0)),
                                        int(rule.get("q", 1)))
        return E_L, m_L
    if kind == "fixed":
        return float(rule["energy"]), float(rule["m"])
    raise ValidationError(f"unknown rule kind {rule.get('kind')!r}")


def _run_goodness_ladder(cfg: ExperimentConfig, out: Path, workers: int) -> list:
    p = float(cfg.params["p"])
    varsigma = float(cfg.params["varsigma"])
    pair_cap = int(cfg.params.get("pair_cap", 400))
    d = 1
    rows = []
    for L in cfg.params["scales"]:
        energy, _ = _rule_value(cfg.params["energy_rule"], float(L), p, d)
        _, m = _rule_value(cfg.params["m_rule"], float(L), p, d)
        payloads = [{"model": cfg.model, "scale": float(L), "d": d,
                     "energy": energy, "m": m, "varsigma": varsigma,
                     "pair_cap": pair_cap, "root_seed": cfg.root_seed,
                     "trial": t} for t in range(cfg.n_samples)]
        hits = map_trials(_trial_goodness, payloads, workers)
        succ = sum(hits)
        lo, hi = wilson_interval(succ, len(hits))
        target = 1.0 - float(L) ** (-p * d)
        rows.append({"L": float(L), "E": energy, "m": m, "n": len(hits),
                     "good": succ, "p_hat": succ / len(hits), "wilson_low": lo,
                     "wilson_high": hi, "target": target,
                     "verdict": (lo >= target) or (succ / len(hits) >= target)})
    write_csv(out / "ladder.csv",
              ("L", "E", "m", "n", "good", "p_hat", "wilson_low", "wilson_high",
               "target", "verdict"), rows,
              comment="Monte Carlo goodness probability per scale")
    emit_plotdata([{"L": r["L"], "p_hat": r["p_hat"],
                    "halfwidth": (r["wilson_high"] - r["wilson_low"]) / 2.0}
                   for r in rows], "ladder", out / "plot_ladder.csv")
    return ["ladder.csv", "plot_ladder.csv"]


def _run_dichotomy(cfg: ExperimentConfig, out: Path, workers: int) -> list:
    d = 1
    x0 = cfg.params.get("x0", [0.0] * d)
    payloads = [{"model": cfg.model, "d": d, "L": float(cfg.params["L"]),
                 "interval": list(cfg.params["interval"]),
                 "M": float(cfg.params["M"]), "vartheta": float(cfg.params["vartheta"]),
                 "nu": float(cfg.params["nu"]),
                 "outer_factor": float(cfg.params.get("outer_factor", 3.0)),
                 "x0": list(x0), "root_seed": cfg.root_seed, "trial": t}
                for t in range(cfg.n_samples)]
    results = map_trials(_trial_dichotomy, payloads, workers)
    rows = [row for chunk in results for row in chunk]
    write_csv(out / "dichotomy.csv",
              ("trial", "energy", "w_x", "w_x_L", "branch_point",
               "branch_annulus", "product_ok"), rows,
              comment="either/or concentration records per outer-box eigenvalue")
    return ["dichotomy.csv"]


def _run_ids(cfg: ExperimentConfig, out: Path, workers: int) -> list:
    d = 1
    grid_spec = cfg.params["energy_grid"]
    if isinstance(grid_spec, dict):
        energies = np.linspace(float(grid_spec["start"]), float(grid_spec["stop"]),
                               int(grid_spec["num"]))
    else:
        energies = np.asarray([float(v) for v in grid_spec])
    payloads = [{"model": cfg.model, "d": d, "L": float(cfg.params["L"]),
                 "energy_grid": energies.tolist(), "root_seed": cfg.root_seed,
                 "trial": t} for t in range(cfg.n_samples)]
    counts = np.asarray(map_trials(_trial_ids_counts, payloads, workers), dtype=float)
    volume = float(cfg.params["L"]) ** d
    values = counts.mean(axis=0) / volume
    values = np.maximum.accumulate(values)
    stderr = (counts.std(axis=0, ddof=1) / math.sqrt(len(counts)) / volume
              if len(counts) > 1 else np.zeros_like(values))
    rows = [{"E": float(e), "N_hat": float(v), "se": float(s)}
            for e, v, s in zip(energies, values, stderr)]
    files = ["ids_curve.csv", "plot_ids.csv"]
    write_csv(out / "ids_curve.csv", ("E", "N_hat", "se"), rows,
              comment="volume-normalized mean eigenvalue counts")
    emit_plotdata(rows, "ids", out / "plot_ids.csv")
    if cfg.params.get("modulus_fit", False):
        from ..ids import IdsCurve

        curve = IdsCurve(energies, values, stderr, cfg.n_samples, volume, False)
        fit = log_holder_modulus(curve)
        write_json(out / "modulus.json", {"constant": fit.constant,
                                          "slope": fit.slope,
                                          "n_pairs": fit.n_pairs})
        files.append("modulus.json")
    return files


def _run_dynamical(cfg: ExperimentConfig, out: Path, workers: int) -> list:
    d = 1
    payloads = [{"model": cfg.model, "d": d, "L": float(cfg.params["L"]),
                 "interval": list(cfg.params["interval"]),
                 "b": float(cfg.params["b"]), "x0": list(cfg.params["x0"]),
                 "t_grid": list(cfg.params.get("t_grid", (0.0, 0.5, 1.0, 2.0, 5.0))),
                 "root_seed": cfg.root_seed, "trial": t}
                for t in range(cfg.n_samples)]
    results = map_trials(_trial_dynamical, payloads, workers)
    rows = []
    for res in results:
        for t, val in res["samples"]:
            rows.append({"trial": res["trial"], "t": t, "moment": val,
                         "proxy": res["proxy"], "count": res["count"],
                         "bounded": val <= res["proxy"] + 1e-10})
    write_csv(out / "dynamical.csv",
              ("trial", "t", "moment", "proxy", "count", "bounded"), rows,
              comment="evolved moment samples against the time-uniform proxy")
    return ["dynamical.csv"]


def _run_qucp(cfg: ExperimentConfig, out: Path, workers: int) -> list:
    d = 1
    L = float(cfg.params["L"])
    count = int(cfg.params["probe_count"])
    delta = float(cfg.params["delta"])
    probes = [[-L / 2.0 + delta + (L - 2 * delta) * (k + 0.5) / count]
              for k in range(count)]
    payloads = [{"model": cfg.model, "d": d, "L": L, "delta": delta,
                 "theta_side": float(cfg.params["theta_side"]),
                 "theta_center": list(cfg.params.get("theta_center", [0.0] * d)),
                 "probes": probes, "D": cfg.params.get("D"),
                 "root_seed": cfg.root_seed, "trial": t}
                for t in range(cfg.n_samples)]
    results = map_trials(_trial_qucp, payloads, workers)
    rows = [row for chunk in results for row in chunk]
    write_csv(out / "qucp_records.csv",
              ("trial", "x", "R", "K", "lhs", "rhs", "ratio", "kappa", "skipped"),
              rows, comment="local-mass records per probe point")
    kappas = [r["kappa"] for r in rows if r["kappa"] is not None and r["skipped"] is None]
    write_json(out / "qucp_fit.json", {
        "kappa_max": max(kappas) if kappas else None,
        "n_records": len(rows),
        "n_used": len(kappas),
    })
    return ["qucp_records.csv", "qucp_fit.json"]


def _run_periodic_gap(cfg: ExperimentConfig, out: Path) -> list:
    rows = []
    for bench in cfg.params["benchmarks"]:
        allowed = {"q", "L", "delta", "interval", "points_per_unit", "dimension",
                   "v_per"}
        unknown = set(bench) - allowed
        if unknown:
            raise ValidationError(f"unknown key {sorted(unknown)[0]!r} in benchmark")
        from ..discretize import GridSpec

        v_per = build_v_per(bench.get("v_per"))
        res = periodic_projection_gap(
            v_per, float(bench["L"]), GridSpec(int(bench["points_per_unit"]),
                                               "periodic"),
            tuple(bench["interval"]), float(bench["delta"]),
            int(bench.get("dimension", 1)))
        rows.append({"q": bench.get("q", 1), "L": bench["L"], "delta": bench["delta"],
                     "lo": bench["interval"][0], "hi": bench["interval"][1],
                     "count": res.count, "gap": res.gap, "empty": res.empty})
    write_csv(out / "periodic_gap.csv",
              ("q", "L", "delta", "lo", "hi", "count", "gap", "empty"),
              [dict(r, gap="" if r["gap"] is None else r["gap"]) for r in rows],
              comment="compressed-projection smallest eigenvalues")
    write_json(out / "periodic_gap.json", {"benchmarks": [
        {"window": [r["lo"], r["hi"]], "delta": r["delta"], "q": r["q"],
         "L": r["L"], "gap": r["gap"], "count": r["count"], "empty": r["empty"]}
        for r in rows]})
    return ["periodic_gap.csv", "periodic_gap.json"]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None,
                   seed_override: Optional[int] = None,
                   workers_override: Optional[int] = None) -> Path:
    """Execute one experiment; returns the output directory with a manifest."""
    raw = dict(cfg.raw)
    run = dict(raw.get("run", {}))
    if seed_override is not None:
        run["root_seed"] = int(seed_override)
    if workers_override is not None:
        run["workers"] = int(workers_override)
    raw["run"] = run
    from .config import validate_config

    cfg = validate_config(raw)
    workers = cfg.workers

    root = Path(out_dir) if out_dir else \
        Path(cfg.run.get("out") or os.environ.get("ANDLAB_OUT", "andlab_out"))
    out = root / f"{cfg.kind}-{cfg.digest()[:8]}"
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.monotonic()
    if cfg.kind == "covering-suite":
        files = _run_covering_suite(cfg, out)
    elif cfg.kind == "constants":
        files = _run_constants(cfg, out)
    elif cfg.kind == "initial-scale":
        files = _run_initial_scale(cfg, out, workers)
    elif cfg.kind == "goodness-ladder":
        files = _run_goodness_ladder(cfg, out, workers)
    elif cfg.kind == "dichotomy":
        files = _run_dichotomy(cfg, out, workers)
    elif cfg.kind == "ids":
        files = _run_ids(cfg, out, workers)
    elif cfg.kind == "dynamical":
        files = _run_dynamical(cfg, out, workers)
    elif cfg.kind == "qucp":
        files = _run_qucp(cfg, out, workers)
    elif cfg.kind == "periodic-gap":
        files = _run_periodic_gap(cfg, out)
    else:  # pragma: no cover - validate_config guards this
        raise ValidationError(f"unhandled experiment {cfg.kind!r}")
    elapsed = time.monotonic() - t0

    manifest = {
        "experiment": cfg.kind,
        "config": cfg.raw,
        "config_digest": cfg.digest(),
        "code_version": __version__,
        "root_seed": cfg.root_seed,
        "workers": workers,
        "files": {name: file_digest(out / name) for name in sorted(files)},
        "wall_clock_s": elapsed,
        "module_versions": {"andlab": __version__},
    }
    write_json(out / "manifest.json", manifest)
    return out
