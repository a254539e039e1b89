"""Command-line orchestration: configs, seeds, replicate pools, file outputs.

Every subcommand writes its documented delimited files plus a run manifest
(JSON) recording the config hash, master seed, replicate range, and output
names, so a rerun with an identical manifest is byte-identical.  Exit codes:
0 all assertions passed, 1 statistical failure, 2 configuration error.

The default output directory is the current directory, overridable with the
BBMFLUCT_OUT environment variable or the --out flag.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from functools import partial
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from . import __version__, bessel, harness
from .engine import (
    FMT,
    ReplicateResult,
    hitting_counts,
    simulate_replicate,
    write_line_jsonl,
    write_martingale_csv,
)
from .model import BarrierSpec, OffspringLaw, PrunePhase, SimConfig
from .spine import FUNCTIONALS, many_to_one_check
from .stable import cdf_by_inversion, cf_levy, sample_stable
from .rng import stream

ENV_OUT = "BBMFLUCT_OUT"
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Bad config file, bad flags, or unsafe run layout."""


# ---------------------------------------------------------------------------
# small parsing helpers


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v != "")
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


def _parse_window(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window must be lo:hi, got {text!r}")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad window {text!r}") from exc
    return lo, hi


def _parse_windows(text: str) -> tuple[tuple[float, float], ...]:
    return tuple(_parse_window(part) for part in text.split(",") if part)


# ---------------------------------------------------------------------------
# TOML config


def _law_from_config(node) -> OffspringLaw:
    if node == "binary":
        return OffspringLaw.binary()
    if isinstance(node, dict):
        try:
            probs = {int(k): float(v) for k, v in node.items()}
        except ValueError as exc:
            raise ConfigError("offspring table keys must be integers") from exc
        return OffspringLaw.from_dict(probs)
    raise ConfigError("model.offspring must be 'binary' or a {count = prob} table")


_MODEL_KEYS = {"offspring", "x0"}
_RUN_KEYS = {
    "horizon",
    "observe",
    "replicates",
    "master_seed",
    "thetas",
    "max_particles",
    "stop_when_empty",
    "keep_line_records",
    "step_dt",
    "prune_dt",
    "prune_cap",
}
_RECORD_KEYS = {"particles_at", "hit_windows"}
_BARRIER_KEYS = {"mode", "level", "start", "end"}
_PRUNE_KEYS = {"start", "eps", "absolute"}


def _check_keys(table: dict, allowed: set[str], where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


def load_config(path: str | Path) -> SimConfig:
    """Parse and schema-check a TOML run config."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"config must declare schema = {SCHEMA_VERSION}")
    _check_keys(doc, {"schema", "model", "run", "barrier", "prune", "record"}, "")

    model = doc.get("model")
    run = doc.get("run")
    if not isinstance(model, dict) or not isinstance(run, dict):
        raise ConfigError("config needs [model] and [run] tables")
    _check_keys(model, _MODEL_KEYS, "model")
    _check_keys(run, _RUN_KEYS, "run")
    record = doc.get("record", {})
    _check_keys(record, _RECORD_KEYS, "record")

    barriers = []
    for b in doc.get("barrier", ()):
        _check_keys(b, _BARRIER_KEYS, "barrier")
        barriers.append(
            BarrierSpec(
                level=float(b.get("level", 0.0)),
                start=float(b.get("start", 0.0)),
                mode=str(b.get("mode", "kill")),
                end=float(b["end"]) if "end" in b else None,
            )
        )
    prune = []
    for p in doc.get("prune", ()):
        _check_keys(p, _PRUNE_KEYS, "prune")
        prune.append(
            PrunePhase(
                start=float(p.get("start", 0.0)),
                eps=float(p["eps"]),
                absolute=bool(p.get("absolute", False)),
            )
        )

    try:
        return SimConfig(
            law=_law_from_config(model.get("offspring", "binary")),
            x0=float(model.get("x0", 0.0)),
            horizon=float(run["horizon"]),
            observe=tuple(float(t) for t in run.get("observe", ())),
            thetas=tuple(float(v) for v in run.get("thetas", ())),
            barriers=tuple(barriers),
            prune=tuple(prune),
            prune_dt=float(run.get("prune_dt", 1.0)),
            prune_cap=int(run["prune_cap"]) if "prune_cap" in run else None,
            step_dt=float(run["step_dt"]) if "step_dt" in run else None,
            replicates=int(run.get("replicates", 1)),
            master_seed=int(run.get("master_seed", 0)),
            max_particles=int(run.get("max_particles", 10_000_000)),
            record_particles_at=tuple(
                float(t) for t in record.get("particles_at", ())
            ),
            hit_windows=tuple(
                (float(a), float(b)) for a, b in record.get("hit_windows", ())
            ),
            stop_when_empty=bool(run.get("stop_when_empty", True)),
            keep_line_records=bool(run.get("keep_line_records", True)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _config_payload(cfg: SimConfig) -> dict:
    """JSON-stable rendering of everything that determines the outputs."""
    return {
        "law": {str(k): v for k, v in cfg.law.pmf},
        "x0": cfg.x0,
        "horizon": cfg.horizon,
        "observe": list(cfg.observe),
        "thetas": list(cfg.thetas),
        "barriers": [
            {"level": b.level, "start": b.start, "mode": b.mode, "end": b.end}
            for b in cfg.barriers
        ],
        "prune": [
            {"start": p.start, "eps": p.eps, "absolute": p.absolute}
            for p in cfg.prune
        ],
        "prune_dt": cfg.prune_dt,
        "prune_cap": cfg.prune_cap,
        "step_dt": cfg.step_dt,
        "replicates": cfg.replicates,
        "master_seed": cfg.master_seed,
        "max_particles": cfg.max_particles,
        "record_particles_at": list(cfg.record_particles_at),
        "hit_windows": [list(w) for w in cfg.hit_windows],
        "stop_when_empty": cfg.stop_when_empty,
        "keep_line_records": cfg.keep_line_records,
    }


# ---------------------------------------------------------------------------
# manifests and output layout


@dataclass
class RunManifest:
    """Reproducibility record written next to every subcommand's outputs."""

    subcommand: str
    config_hash: str
    master_seed: int
    replicate_range: list[int]
    outputs: list[str]
    engine_version: str = __version__

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _out_dir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get(ENV_OUT) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _claim_outputs(directory: Path, names: Sequence[str], force: bool) -> dict[str, Path]:
    paths = {name: directory / name for name in names}
    if not force:
        taken = [str(p) for p in paths.values() if p.exists()]
        if taken:
            raise ConfigError(
                "output collision (pass --force to overwrite): " + ", ".join(taken)
            )
    return paths


def _write_manifest(
    directory: Path,
    tag: str,
    subcommand: str,
    payload: dict,
    seed: int,
    replicate_range: tuple[int, int],
    outputs: Iterable[str],
) -> None:
    manifest = RunManifest(
        subcommand=subcommand,
        config_hash=config_hash(payload),
        master_seed=seed,
        replicate_range=list(replicate_range),
        outputs=sorted(outputs),
    )
    manifest.write(directory / f"{tag}_manifest.json")


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    FMT % v if isinstance(v, float) else str(v) for v in row
                )
                + "\n"
            )


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _run_pool(fn: Callable[[int], object], replicates: Sequence[int], jobs: int):
    """Order-stable replicate map; parallelism never changes the merge order."""
    if jobs <= 1:
        return [fn(r) for r in replicates]
    chunk = max(1, len(replicates) // (4 * jobs))
    with Pool(jobs) as pool:
        return pool.map(fn, replicates, chunksize=chunk)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = SimConfig(**{**_kwargs_of(cfg), "master_seed": args.seed})
    if args.replicates is not None:
        cfg = SimConfig(**{**_kwargs_of(cfg), "replicates": args.replicates})

    directory = _out_dir(args)
    tag = args.tag
    names = [f"{tag}.csv"]
    if cfg.keep_line_records:
        names.append(f"{tag}_lines.jsonl")
    paths = _claim_outputs(directory, names, args.force)

    results: list[ReplicateResult] = _run_pool(
        partial(simulate_replicate, cfg), range(cfg.replicates), args.jobs
    )
    with open(paths[f"{tag}.csv"], "w") as fh:
        write_martingale_csv(fh, results, cfg.thetas)
    if cfg.keep_line_records:
        with open(paths[f"{tag}_lines.jsonl"], "w") as fh:
            write_line_jsonl(fh, results)

    _write_manifest(
        directory,
        tag,
        "simulate",
        _config_payload(cfg),
        cfg.master_seed,
        (0, cfg.replicates),
        names,
    )
    return 0


def _kwargs_of(cfg: SimConfig) -> dict:
    return {
        "law": cfg.law,
        "x0": cfg.x0,
        "horizon": cfg.horizon,
        "observe": cfg.observe,
        "thetas": cfg.thetas,
        "barriers": cfg.barriers,
        "prune": cfg.prune,
        "prune_dt": cfg.prune_dt,
        "prune_cap": cfg.prune_cap,
        "step_dt": cfg.step_dt,
        "replicates": cfg.replicates,
        "master_seed": cfg.master_seed,
        "max_particles": cfg.max_particles,
        "record_particles_at": cfg.record_particles_at,
        "hit_windows": cfg.hit_windows,
        "stop_when_empty": cfg.stop_when_empty,
        "keep_line_records": cfg.keep_line_records,
    }


# ---------------------------------------------------------------------------
# hitting


def cmd_hitting(args) -> int:
    windows = _parse_windows(args.windows)
    law = OffspringLaw.binary() if args.law == "binary" else _law_from_config(
        dict(tomllib.loads(Path(args.law).read_text()))
    )
    directory = _out_dir(args)
    tag = args.tag
    paths = _claim_outputs(directory, [f"{tag}.csv", f"{tag}_summary.json"], args.force)

    runner = partial(
        hitting_counts, law, args.x, windows, args.seed, horizon=args.horizon
    )
    samples = _run_pool(runner, range(args.replicates), args.jobs)

    rows = []
    for rep, sample in enumerate(samples):
        for j, (lo, hi) in enumerate(sample.windows):
            rows.append(
                (rep, lo, hi, sample.counts[j], sample.folded[j], sample.estimates[j])
            )
        rows.append(
            (rep, 0.0, math.inf, sample.total_count, sample.total_folded,
             sample.total_estimate)
        )
    _write_rows(
        paths[f"{tag}.csv"],
        ("replicate", "window_lo", "window_hi", "count", "folded", "estimate"),
        rows,
    )

    summary = {"x": args.x, "replicates": args.replicates, "windows": []}
    worst = True
    full = windows + ((0.0, math.inf),)
    for j, (lo, hi) in enumerate(full):
        if j < len(windows):
            vals = np.array([s.estimates[j] for s in samples])
        else:
            vals = np.array([s.total_estimate for s in samples])
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        entry = {
            "window": [lo, hi],
            "mean_estimate": mean,
            "se": se,
        }
        if args.x > 0.0:
            oracle = harness.hit_count_mean(args.x, (lo, hi))
            ok = abs(mean - oracle) <= 3.0 * se if se > 0 else mean == oracle
            entry.update({"oracle": oracle, "pass": ok})
            worst = worst and ok
        summary["windows"].append(entry)
    summary["pass"] = worst
    _write_json(paths[f"{tag}_summary.json"], summary)

    payload = {
        "law": {str(k): v for k, v in law.pmf},
        "x": args.x,
        "windows": [list(w) for w in windows],
        "horizon": args.horizon,
        "replicates": args.replicates,
        "master_seed": args.seed,
    }
    _write_manifest(
        directory, tag, "hitting", payload, args.seed, (0, args.replicates),
        [f"{tag}.csv", f"{tag}_summary.json"],
    )
    return 0 if worst else 1


# ---------------------------------------------------------------------------
# spine-check


def cmd_spine_check(args) -> int:
    law = OffspringLaw.binary() if args.law == "binary" else _law_from_config(
        dict(tomllib.loads(Path(args.law).read_text()))
    )
    if args.seed_direct == args.seed_spine:
        raise ConfigError("direct and spine routes need distinct seeds")
    names = list(args.functional) or ["const_Q"]
    unknown = [n for n in names if n not in FUNCTIONALS]
    if unknown:
        raise ConfigError(
            f"unknown functional(s) {unknown}; choices: {sorted(FUNCTIONALS)}"
        )

    directory = _out_dir(args)
    tag = args.tag
    paths = _claim_outputs(directory, [f"{tag}.json"], args.force)

    reports = []
    all_ok = True
    for j, name in enumerate(names):
        rep = many_to_one_check(
            law,
            name,
            x=args.x,
            s=args.s,
            n_direct=args.n_direct,
            n_spine=args.n_spine,
            seed_direct=args.seed_direct + 2 * j,
            seed_spine=args.seed_spine + 2 * j,
            dt=args.dt,
        )
        reports.append(rep.as_dict())
        all_ok = all_ok and rep.passed
    _write_json(paths[f"{tag}.json"], {"checks": reports, "pass": all_ok})

    payload = {
        "law": {str(k): v for k, v in law.pmf},
        "functionals": names,
        "x": args.x,
        "s": args.s,
        "n_direct": args.n_direct,
        "n_spine": args.n_spine,
        "seed_direct": args.seed_direct,
        "seed_spine": args.seed_spine,
        "dt": args.dt,
    }
    _write_manifest(
        directory, tag, "spine-check", payload, args.seed_direct,
        (0, args.n_direct), [f"{tag}.json"],
    )
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# stable toolkit


def cmd_stable_sample(args) -> int:
    directory = _out_dir(args)
    tag = args.tag
    paths = _claim_outputs(directory, [f"{tag}.csv"], args.force)
    rng = stream(args.seed, 0)
    draws = sample_stable(rng, args.n, args.sigma, args.mu)
    _write_rows(paths[f"{tag}.csv"], ("value",), ((float(v),) for v in draws))
    payload = {"sigma": args.sigma, "mu": args.mu, "n": args.n, "seed": args.seed}
    _write_manifest(
        directory, tag, "stable-sample", payload, args.seed, (0, args.n),
        [f"{tag}.csv"],
    )
    return 0


def cmd_stable_cf(args) -> int:
    directory = _out_dir(args)
    tag = args.tag
    paths = _claim_outputs(directory, [f"{tag}.csv"], args.force)
    lam = np.linspace(-args.lambda_max, args.lambda_max, args.points)
    vals = cf_levy(lam, args.time, args.sigma, args.mu)
    _write_rows(
        paths[f"{tag}.csv"],
        ("lambda", "re", "im"),
        ((float(l), float(v.real), float(v.imag)) for l, v in zip(lam, vals)),
    )
    payload = {
        "sigma": args.sigma, "mu": args.mu, "time": args.time,
        "lambda_max": args.lambda_max, "points": args.points,
    }
    _write_manifest(
        directory, tag, "stable-cf", payload, 0, (0, 0), [f"{tag}.csv"]
    )
    return 0


def cmd_stable_cdf(args) -> int:
    directory = _out_dir(args)
    tag = args.tag
    paths = _claim_outputs(directory, [f"{tag}.csv"], args.force)
    xs = np.linspace(args.x_min, args.x_max, args.points)
    ps = cdf_by_inversion(xs, args.sigma, args.mu)
    _write_rows(
        paths[f"{tag}.csv"],
        ("x", "probability"),
        ((float(x), float(p)) for x, p in zip(xs, ps)),
    )
    payload = {
        "sigma": args.sigma, "mu": args.mu,
        "x_min": args.x_min, "x_max": args.x_max, "points": args.points,
    }
    _write_manifest(
        directory, tag, "stable-cdf", payload, 0, (0, 0), [f"{tag}.csv"]
    )
    return 0


# ---------------------------------------------------------------------------
# bessel-check


def _bessel_battery(x: float):
    return (
        ("exp_neg_endpoint", lambda paths, times: np.exp(-paths[:, -1])),
        ("endpoint_above_start", lambda paths, times: (paths[:, -1] > x) * 1.0),
        ("min_above_half_start",
         lambda paths, times: (paths.min(axis=1) > 0.5 * x) * 1.0),
    )


def cmd_bessel_check(args) -> int:
    directory = _out_dir(args)
    tag = args.tag
    paths = _claim_outputs(directory, [f"{tag}.json"], args.force)
    rng = stream(args.seed, 0)
    rows = []
    all_ok = True
    for label, fn in _bessel_battery(args.x):
        res = bessel.imhof_check(rng, args.x, args.t, fn, args.n, label=label)
        rows.append(
            {
                "label": res.label,
                "bm_side": res.bm_side,
                "bm_se": res.bm_se,
                "bessel_side": res.bessel_side,
                "bessel_se": res.bessel_se,
                "pass": res.passed,
            }
        )
        all_ok = all_ok and res.passed
    _write_json(paths[f"{tag}.json"], {"checks": rows, "pass": all_ok})
    payload = {"x": args.x, "t": args.t, "n": args.n, "seed": args.seed}
    _write_manifest(
        directory, tag, "bessel-check", payload, args.seed, (0, args.n),
        [f"{tag}.json"],
    )
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# pool-reading experiment commands


def cmd_fluctuation(args) -> int:
    directory = _out_dir(args)
    tag = args.tag
    names = [f"{tag}_cells.csv", f"{tag}_summary.json"]
    paths = _claim_outputs(directory, names, args.force)

    frame = harness.load_pool(args.pool)
    cells = harness.fluctuation_statistics(
        frame, _parse_floats(args.t_grid), _parse_floats(args.a_grid), args.T
    )
    header = (
        "replicate", "t", "a", "zinf", "Z_at", "W_at",
        "statistic_theorem", "statistic_bis",
    )
    rows = []
    summary = []
    ok = True
    for (t, a), cell in sorted(cells.items()):
        gap = cell.max_coupling_gap()
        scale = max(1.0, float(np.max(np.abs(cell.theorem))))
        good = gap <= 1e-9 * scale
        ok = ok and good
        summary.append(
            {"t": t, "a": a, "n": cell.n, "max_coupling_gap": gap, "pass": good}
        )
        for r in cell.rows():
            rows.append(tuple(r[h] for h in header))
    _write_rows(paths[f"{tag}_cells.csv"], header, rows)
    _write_json(paths[f"{tag}_summary.json"], {"cells": summary, "pass": ok})

    payload = {
        "pool": str(args.pool), "T": args.T,
        "t_grid": list(_parse_floats(args.t_grid)),
        "a_grid": list(_parse_floats(args.a_grid)),
    }
    _write_manifest(
        directory, tag, "fluctuation", payload, 0,
        (0, frame.n_replicates()), names,
    )
    return 0 if ok else 1


def cmd_mu_z(args) -> int:
    directory = _out_dir(args)
    tag = args.tag
    names = [f"{tag}.json", f"{tag}_curve.csv"]
    paths = _claim_outputs(directory, names, args.force)

    frame = harness.load_pool(args.pool)
    zinf = harness.estimate_Zinf(frame, T=args.T, fit_times=_parse_floats(args.fit_times))
    est = harness.estimate_mu_Z(zinf, _parse_window(args.window), points=args.points)
    _write_json(
        paths[f"{tag}.json"],
        {
            "window": list(est.window),
            "c_Z_hat": est.c_Z_hat,
            "mu_Z_hat": est.mu_Z_hat,
            "slope": est.slope,
            "se": est.se,
            "no_plateau": est.no_plateau,
            "n_samples": zinf.n,
            "frozen_fraction": zinf.frozen_fraction,
            "budget_exceeded": zinf.budget_exceeded,
        },
    )
    _write_rows(
        paths[f"{tag}_curve.csv"],
        ("x", "c_of_x"),
        ((r["x"], r["c_of_x"]) for r in est.rows()),
    )
    payload = {
        "pool": str(args.pool), "T": args.T, "window": args.window,
        "points": args.points, "fit_times": args.fit_times,
    }
    _write_manifest(
        directory, tag, "mu-z", payload, 0, (0, zinf.n), names
    )
    # recorded, not asserted: the flag travels in the JSON, not the exit code
    return 0


def cmd_tail(args) -> int:
    directory = _out_dir(args)
    tag = args.tag
    names = [f"{tag}.csv", f"{tag}_summary.json"]
    paths = _claim_outputs(directory, names, args.force)

    frame = harness.load_pool(args.pool)
    zinf = harness.estimate_Zinf(frame, T=args.T, fit_times=_parse_floats(args.fit_times))
    table = harness.tail_check(zinf, _parse_window(args.window), points=args.points)
    lo, hi = _parse_window(args.band)
    verdict = table.in_band(lo, hi)
    _write_rows(
        paths[f"{tag}.csv"],
        ("x", "survival", "value", "ci_lo", "ci_hi"),
        (tuple(r[k] for k in ("x", "survival", "value", "ci_lo", "ci_hi"))
         for r in table.rows()),
    )
    _write_json(
        paths[f"{tag}_summary.json"],
        {
            "band": [lo, hi],
            "in_band": verdict,
            "n_samples": table.n,
            "frozen_fraction": zinf.frozen_fraction,
            "budget_exceeded": zinf.budget_exceeded,
            "pass": verdict,
        },
    )
    payload = {
        "pool": str(args.pool), "T": args.T, "window": args.window,
        "band": args.band, "points": args.points, "fit_times": args.fit_times,
    }
    _write_manifest(directory, tag, "tail", payload, 0, (0, zinf.n), names)
    return 0 if verdict else 1


def cmd_speed_bound(args) -> int:
    directory = _out_dir(args)
    tag = args.tag
    names = [f"{tag}.csv", f"{tag}_summary.json"]
    paths = _claim_outputs(directory, names, args.force)

    frame = harness.load_pool(args.pool)
    table = harness.speed_bound_check(
        frame, T=args.T, t_grid=_parse_floats(args.t_grid),
        deltas=_parse_floats(args.deltas),
    )
    ok = table.p_against_increase > 0.05
    _write_rows(
        paths[f"{tag}.csv"],
        ("t", "delta", "p_hat", "C_hat"),
        (tuple(r[k] for k in ("t", "delta", "p_hat", "C_hat"))
         for r in table.rows()),
    )
    _write_json(
        paths[f"{tag}_summary.json"],
        {
            "max_C": table.max_C,
            "kendall_tau": table.kendall_tau,
            "p_against_increase": table.p_against_increase,
            "pass": ok,
        },
    )
    payload = {
        "pool": str(args.pool), "T": args.T,
        "t_grid": args.t_grid, "deltas": args.deltas,
    }
    _write_manifest(
        directory, tag, "speed-bound", payload, 0,
        (0, frame.n_replicates()), names,
    )
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# ngood


def ngood_config(
    law: OffspringLaw,
    t: float,
    a: float,
    gamma: float,
    seed: int,
    replicates: int,
    horizon_pad: float,
) -> SimConfig:
    """Stopping-line experiment: kill at gamma from a*t, flag dips on [t, a*t]."""
    barriers = [BarrierSpec(level=gamma, start=a * t, mode="kill")]
    if a > 1.0:
        barriers.append(BarrierSpec(level=gamma, start=t, end=a * t, mode="flag"))
    return SimConfig(
        law=law,
        x0=0.0,
        horizon=a * t + horizon_pad,
        observe=(a * t,),
        barriers=tuple(barriers),
        master_seed=seed,
        replicates=replicates,
        keep_line_records=True,
    )


def _activation_hits(res: ReplicateResult, at: float) -> int:
    """Good-classified line hits exactly at the barrier activation time.

    Particles already at or below the level when the kill switches on hit the
    line immediately; with a flag window ending there they classify bad, so
    this count is nonzero only in the unflagged (a = 1) geometry.
    """
    return sum(
        1
        for h in res.line_hits
        if h.classification == "good" and abs(h.hit_time - at) <= 1e-9
    )


def cmd_ngood(args) -> int:
    if (args.gamma is None) == (args.beta is None):
        raise ConfigError("pass exactly one of --gamma or --beta")
    gamma = args.gamma if args.gamma is not None else 0.5 * math.log(args.t) + args.beta
    beta = gamma - 0.5 * math.log(args.t)
    law = OffspringLaw.binary() if args.law == "binary" else _law_from_config(
        dict(tomllib.loads(Path(args.law).read_text()))
    )
    directory = _out_dir(args)
    tag = args.tag
    names = [f"{tag}.csv", f"{tag}_summary.json"]
    paths = _claim_outputs(directory, names, args.force)

    pad = args.horizon_pad if args.horizon_pad is not None else args.t
    cfg = ngood_config(law, args.t, args.a, gamma, args.seed, args.replicates, pad)
    results = _run_pool(
        partial(simulate_replicate, cfg), range(cfg.replicates), args.jobs
    )

    rows = []
    n = len(results)
    n_good = np.empty(n)
    n_bad = np.empty(n)
    n_act = np.empty(n)
    w_at = np.empty(n)
    wt_at = np.empty(n)
    for i, res in enumerate(results):
        gb = res.good_bad
        rec = res.records[0]
        n_good[i] = gb.good_estimate
        n_bad[i] = gb.bad_estimate
        n_act[i] = _activation_hits(res, args.a * args.t)
        w_at[i] = rec.W
        wt_at[i] = rec.W_tilde
        rows.append(
            (res.replicate, float(gb.good), gb.folded_good, float(gb.bad),
             gb.folded_bad, int(n_act[i]), rec.W, rec.W_tilde)
        )
    _write_rows(
        paths[f"{tag}.csv"],
        ("replicate", "n_good", "folded_good", "n_bad", "folded_bad",
         "n_activation", "W_at", "W_tilde_at"),
        rows,
    )

    run = harness.NGoodRun(
        t=args.t, a=args.a, beta_t=beta, n_good=n_good, n_bad=n_bad, w_at=w_at
    )
    table = harness.n_good_scaling_check([run])
    row = table.rows()[0]

    # exact conditional-mean identity: particles hitting the line after the
    # activation time have expected count exp(gamma) * W_tilde_at per path
    num = n_good - n_act
    den = math.exp(gamma) * wt_at
    num_m, den_m = float(num.mean()), float(den.mean())
    identity_ratio = num_m / den_m if den_m != 0.0 else math.inf
    identity_se = (
        math.sqrt(
            float(num.var(ddof=1)) / n
            + identity_ratio**2 * float(den.var(ddof=1)) / n
        )
        / abs(den_m)
        if den_m != 0.0 and n > 1
        else math.inf
    )
    row.update(
        {
            "gamma": gamma,
            "beta": beta,
            "replicates": args.replicates,
            "identity_ratio": identity_ratio,
            "identity_se": identity_se,
            "mean_activation_hits": float(n_act.mean()),
        }
    )
    _write_json(paths[f"{tag}_summary.json"], row)

    payload = {
        "law": {str(k): v for k, v in law.pmf},
        "t": args.t, "a": args.a, "gamma": gamma,
        "replicates": args.replicates, "master_seed": args.seed,
        "horizon_pad": pad,
    }
    _write_manifest(
        directory, tag, "ngood", payload, args.seed, (0, args.replicates), names
    )
    return 0


# ---------------------------------------------------------------------------
# report


FIGURE_KINDS = ("tail-plateau", "trend", "ecf-curves", "hist-vs-density", "qq")


def _figure_specs(tag: str, t_grid: Sequence[float]) -> list[dict]:
    """Figure-spec JSON payloads pairing report CSVs with plot kinds."""
    t_top = max(t_grid)
    specs: list[dict] = [
        {
            "kind": "tail-plateau",
            "input": f"{tag}_tail.csv",
            "output": f"{tag}_tail.png",
            "reference": 1.0,
        },
        {
            "kind": "trend",
            "input": f"{tag}_mu_z_curve.csv",
            "output": f"{tag}_mu_z_curve.png",
            "x": "x",
            "y": "c_of_x",
            "logx": True,
        },
    ]
    for t in t_grid:
        specs.append(
            {
                "kind": "ecf-curves",
                "input": f"{tag}_ecf_theorem_t{t:g}_a1.csv",
                "output": f"{tag}_ecf_t{t:g}.png",
            }
        )
    specs += [
        {
            "kind": "hist-vs-density",
            "input": f"{tag}_cells.csv",
            "output": f"{tag}_hist_t{t_top:g}.png",
            "column": "statistic_theorem",
            "where": {"t": t_top, "a": 1.0},
            "cdf_input": f"{tag}_target_cdf.csv",
        },
        {
            "kind": "qq",
            "input": f"{tag}_cells.csv",
            "output": f"{tag}_qq_t{t_top:g}.png",
            "column": "statistic_theorem",
            "where": {"t": t_top, "a": 1.0},
            "cdf_input": f"{tag}_target_cdf.csv",
        },
        {
            "kind": "trend",
            "input": f"{tag}_speed_bound.csv",
            "output": f"{tag}_speed_bound.png",
            "x": "t",
            "y": "C_hat",
        },
    ]
    return specs


def _render_figures(directory: Path, specs: list[dict]) -> list[str]:
    """Render figure specs with the plots package when it is installed."""
    try:
        from plots import render
    except ImportError:
        return []
    rendered = []
    for spec in specs:
        render(spec, base_dir=directory)
        rendered.append(spec["output"])
    return rendered


def cmd_report(args) -> int:
    directory = _out_dir(args)
    tag = args.tag
    harness.require_independent_pools(args.tail_seed, args.fluct_seed)

    t_grid = _parse_floats(args.t_grid)
    a_grid = _parse_floats(args.a_grid)
    if 1.0 not in a_grid:
        raise ConfigError("the a grid must contain 1 (bis variant lives at a = 1)")
    lam = np.linspace(-args.lambda_max, args.lambda_max, args.lambda_points)

    tail_frame = harness.load_pool(args.pool_tail)
    fluct_frame = harness.load_pool(args.pool_fluct)

    names = [
        f"{tag}_tail.csv",
        f"{tag}_mu_z.json",
        f"{tag}_mu_z_curve.csv",
        f"{tag}_cells.csv",
        f"{tag}_ecf_summary.json",
        f"{tag}_ecf_sensitivity.csv",
        f"{tag}_wt_convergence.csv",
        f"{tag}_speed_bound.csv",
        f"{tag}_target_cdf.csv",
        f"{tag}.json",
    ]
    ecf_csvs = []
    for t in t_grid:
        for a in a_grid:
            ecf_csvs.append(f"{tag}_ecf_theorem_t{t:g}_a{a:g}.csv")
        ecf_csvs.append(f"{tag}_ecf_bis_t{t:g}_a1.csv")
    names += ecf_csvs
    spec_names = [f"{tag}_figures.json"]
    paths = _claim_outputs(directory, names + spec_names, args.force)

    passes: dict[str, bool] = {}

    # tail of the limit proxy
    tail_zinf = harness.estimate_Zinf(tail_frame, T=args.T_tail)
    table = harness.tail_check(tail_zinf, _parse_window(args.tail_window))
    band_lo, band_hi = _parse_window(args.band)
    passes["tail_in_band"] = table.in_band(band_lo, band_hi)
    passes["tail_frozen_budget"] = not tail_zinf.budget_exceeded
    _write_rows(
        paths[f"{tag}_tail.csv"],
        ("x", "survival", "value", "ci_lo", "ci_hi"),
        (tuple(r[k] for k in ("x", "survival", "value", "ci_lo", "ci_hi"))
         for r in table.rows()),
    )

    # location constant (recorded, not asserted)
    mu_est = harness.estimate_mu_Z(tail_zinf, _parse_window(args.mu_window))
    _write_json(
        paths[f"{tag}_mu_z.json"],
        {
            "window": list(mu_est.window),
            "c_Z_hat": mu_est.c_Z_hat,
            "mu_Z_hat": mu_est.mu_Z_hat,
            "slope": mu_est.slope,
            "se": mu_est.se,
            "no_plateau": mu_est.no_plateau,
        },
    )
    _write_rows(
        paths[f"{tag}_mu_z_curve.csv"],
        ("x", "c_of_x"),
        ((r["x"], r["c_of_x"]) for r in mu_est.rows()),
    )

    # fluctuation cells and their exact coupling
    cells = harness.fluctuation_statistics(
        fluct_frame, t_grid, a_grid, T=args.T_fluct
    )
    header = (
        "replicate", "t", "a", "zinf", "Z_at", "W_at",
        "statistic_theorem", "statistic_bis",
    )
    cell_rows = []
    coupling_ok = True
    for key in sorted(cells):
        cell = cells[key]
        scale = max(1.0, float(np.max(np.abs(cell.theorem))))
        coupling_ok = coupling_ok and cell.max_coupling_gap() <= 1e-9 * scale
        for r in cell.rows():
            cell_rows.append(tuple(r[h] for h in header))
    passes["coupling_identity"] = coupling_ok
    _write_rows(paths[f"{tag}_cells.csv"], header, cell_rows)

    # ECF distances against the mixed stable target
    mu_hat = mu_est.mu_Z_hat
    ecf_summary: dict[str, object] = {
        "mu_Z_hat": mu_hat,
        "mu_no_plateau": mu_est.no_plateau,
        "lambda_max": args.lambda_max,
        "cells": [],
    }
    sup_by_t: dict[float, float] = {}
    for t in t_grid:
        for a in a_grid:
            cell = cells[(t, a)]
            target = harness.mixed_stable_target_cf(tail_zinf, lam, mu_hat, a=a)
            rep = harness.ecf_compare(cell.theorem, target, n_boot=args.n_boot)
            _write_rows(
                paths[f"{tag}_ecf_theorem_t{t:g}_a{a:g}.csv"],
                ("lambda", "ecf_re", "ecf_im", "target_re", "target_im", "absdiff"),
                (tuple(r[k] for k in (
                    "lambda", "ecf_re", "ecf_im", "target_re", "target_im", "absdiff"
                )) for r in rep.rows()),
            )
            ecf_summary["cells"].append(
                {
                    "variant": "theorem", "t": t, "a": a,
                    "sup_distance": rep.sup_distance,
                    "ci_lo": rep.ci_lo, "ci_hi": rep.ci_hi, "n": rep.n,
                }
            )
            if a == 1.0:
                sup_by_t[t] = rep.sup_distance
        cell = cells[(t, 1.0)]
        target = harness.mixed_stable_target_cf(tail_zinf, lam, mu_hat, a=1.0)
        rep = harness.ecf_compare(cell.bis, target, n_boot=args.n_boot)
        _write_rows(
            paths[f"{tag}_ecf_bis_t{t:g}_a1.csv"],
            ("lambda", "ecf_re", "ecf_im", "target_re", "target_im", "absdiff"),
            (tuple(r[k] for k in (
                "lambda", "ecf_re", "ecf_im", "target_re", "target_im", "absdiff"
            )) for r in rep.rows()),
        )
        ecf_summary["cells"].append(
            {
                "variant": "bis", "t": t, "a": 1.0,
                "sup_distance": rep.sup_distance,
                "ci_lo": rep.ci_lo, "ci_hi": rep.ci_hi, "n": rep.n,
            }
        )

    ts = sorted(sup_by_t)
    finite = all(math.isfinite(sup_by_t[t]) for t in ts)
    nonincreasing = all(
        sup_by_t[b] <= sup_by_t[a] + 1e-12 for a, b in zip(ts, ts[1:])
    )
    passes["ecf_finite"] = finite
    passes["ecf_nonincreasing_in_t"] = nonincreasing

    # joint check over the a grid at the largest t
    if len(a_grid) >= 2:
        t_top = max(t_grid)
        a1, a2 = sorted(a_grid)[:2]
        pair = harness.mixed_stable_cf_pair(
            tail_zinf, lam, lam[::-1], mu_hat, a1=a1, a2=a2
        )
        rep = harness.ecf_compare_pair(
            cells[(t_top, a1)].theorem, cells[(t_top, a2)].theorem, pair,
            n_boot=args.n_boot,
        )
        ecf_summary["joint"] = {
            "t": t_top, "a1": a1, "a2": a2,
            "sup_distance": rep.sup_distance,
            "ci_lo": rep.ci_lo, "ci_hi": rep.ci_hi,
        }
        passes["ecf_joint_finite"] = math.isfinite(rep.sup_distance)

    # sensitivity of the distances to the location estimate
    sens_rows = []
    mu_probe = [mu_hat - 2 * mu_est.se, mu_hat + 2 * mu_est.se]
    if args.mu_grid:
        mu_probe += list(_parse_floats(args.mu_grid))
    for mu in mu_probe:
        for t in ts:
            target = harness.mixed_stable_target_cf(tail_zinf, lam, mu, a=1.0)
            rep = harness.ecf_compare(cells[(t, 1.0)].theorem, target, n_boot=10)
            sens_rows.append((mu, t, rep.sup_distance))
    _write_rows(
        paths[f"{tag}_ecf_sensitivity.csv"],
        ("mu_Z", "t", "sup_distance"),
        sens_rows,
    )
    _write_json(paths[f"{tag}_ecf_summary.json"], ecf_summary)

    # secondary KS diagnostic at the deepest cell
    t_top = max(ts)
    ks_stat, ks_p = harness.ks_rank_diagnostic(
        cells[(t_top, 1.0)].theorem, cells[(t_top, 1.0)].zinf, mu_hat
    )

    # convergence-rate checks on the fluctuation pool
    wt = harness.wt_convergence_check(
        fluct_frame, theta=args.theta,
        t_grid=_parse_floats(args.wt_grid), T=args.T_fluct,
    )
    passes["wt_nonincreasing"] = wt.nonincreasing
    _write_rows(
        paths[f"{tag}_wt_convergence.csv"],
        ("t", "threshold", "p_hat", "ci_lo", "ci_hi"),
        (tuple(r[k] for k in ("t", "threshold", "p_hat", "ci_lo", "ci_hi"))
         for r in wt.rows()),
    )

    speed = harness.speed_bound_check(
        fluct_frame, T=args.T_fluct, t_grid=_parse_floats(args.speed_grid),
        deltas=_parse_floats(args.deltas),
    )
    passes["speed_bound_trend_free"] = speed.p_against_increase > 0.05
    _write_rows(
        paths[f"{tag}_speed_bound.csv"],
        ("t", "delta", "p_hat", "C_hat"),
        (tuple(r[k] for k in ("t", "delta", "p_hat", "C_hat"))
         for r in speed.rows()),
    )

    # presentation-only marginal target at the median mixing time; the
    # histogram and QQ figures difference this grid instead of recomputing
    stat = cells[(t_top, 1.0)].theorem
    z_med = float(np.median(tail_zinf.values[tail_zinf.values > 0.0]))
    q_lo, q_hi = np.quantile(stat, (0.01, 0.99))
    pad = 0.25 * (q_hi - q_lo)
    grid = np.linspace(q_lo - pad, q_hi + pad, 257)
    cdf_vals = cdf_by_inversion(
        grid, z_med * harness.SIGMA_THEOREM,
        z_med * mu_hat * math.sqrt(2.0 / math.pi),
    )
    _write_rows(paths[f"{tag}_target_cdf.csv"], ("x", "cdf"), zip(grid, cdf_vals))

    specs = _figure_specs(tag, t_grid)
    _write_json(paths[f"{tag}_figures.json"], {"figures": specs})
    rendered = _render_figures(directory, specs)

    _write_json(
        paths[f"{tag}.json"],
        {
            "passes": passes,
            "pass": all(passes.values()),
            "mu_Z_hat": mu_hat,
            "mu_no_plateau": mu_est.no_plateau,
            "tail_frozen_fraction": tail_zinf.frozen_fraction,
            "zinf_error_budget_p10": tail_zinf.error_budget(0.1),
            "ks_rank": {"t": t_top, "a": 1.0, "statistic": ks_stat, "p": ks_p},
            "speed_bound": {
                "max_C": speed.max_C,
                "kendall_tau": speed.kendall_tau,
                "p_against_increase": speed.p_against_increase,
            },
            "figures_rendered": rendered,
            "outputs": sorted(names + spec_names + rendered),
        },
    )

    payload = {
        "pool_tail": str(args.pool_tail), "pool_fluct": str(args.pool_fluct),
        "T_tail": args.T_tail, "T_fluct": args.T_fluct,
        "t_grid": args.t_grid, "a_grid": args.a_grid,
        "tail_window": args.tail_window, "band": args.band,
        "mu_window": args.mu_window, "lambda_max": args.lambda_max,
        "lambda_points": args.lambda_points, "n_boot": args.n_boot,
        "theta": args.theta, "wt_grid": args.wt_grid,
        "speed_grid": args.speed_grid, "deltas": args.deltas,
        "mu_grid": args.mu_grid,
        "tail_seed": args.tail_seed, "fluct_seed": args.fluct_seed,
    }
    _write_manifest(
        directory, tag, "report", payload, args.fluct_seed,
        (0, fluct_frame.n_replicates()), names + spec_names,
    )
    return 0 if all(passes.values()) else 1


# ---------------------------------------------------------------------------
# argument wiring


def _add_common(p: argparse.ArgumentParser, tag: str) -> None:
    p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or .)")
    p.add_argument("--tag", default=tag, help="output filename prefix")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bbmfluct",
        description="Monte Carlo toolkit for critical branching Brownian "
        "motion martingale fluctuations",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="run a trajectory pool from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override [run].master_seed")
    p.add_argument("--replicates", type=int, help="override [run].replicates")
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p, "simulate")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("hitting", help="barrier hit counts vs the quadrature oracle")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--windows", default="0.5:2", help="comma list of lo:hi")
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=8.0)
    p.add_argument("--law", default="binary", help="'binary' or a TOML offspring table")
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p, "hitting")
    p.set_defaults(fn=cmd_hitting)

    p = sub.add_parser("spine-check", help="many-to-one identity cross-checks")
    p.add_argument("--functional", action="append", default=[],
                   help=f"repeatable; choices: {sorted(FUNCTIONALS)}")
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--s", type=float, default=4.0)
    p.add_argument("--n-direct", type=int, default=2000)
    p.add_argument("--n-spine", type=int, default=8000)
    p.add_argument("--seed-direct", type=int, default=11)
    p.add_argument("--seed-spine", type=int, default=12)
    p.add_argument("--dt", type=float, default=0.25)
    p.add_argument("--law", default="binary")
    _add_common(p, "spine_check")
    p.set_defaults(fn=cmd_spine_check)

    p = sub.add_parser("stable-sample", help="draws from the 1-stable family")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p, "stable_sample")
    p.set_defaults(fn=cmd_stable_sample)

    p = sub.add_parser("stable-cf", help="characteristic function on a lambda grid")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--time", type=float, default=1.0)
    p.add_argument("--lambda-max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=101)
    _add_common(p, "stable_cf")
    p.set_defaults(fn=cmd_stable_cf)

    p = sub.add_parser("stable-cdf", help="distribution function by CF inversion")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--x-min", type=float, default=-10.0)
    p.add_argument("--x-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=101)
    _add_common(p, "stable_cdf")
    p.set_defaults(fn=cmd_stable_cdf)

    p = sub.add_parser("bessel-check", help="Imhof identity Monte Carlo checks")
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--n", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p, "bessel_check")
    p.set_defaults(fn=cmd_bessel_check)

    p = sub.add_parser("fluctuation", help="fluctuation statistics from a pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--t-grid", default="8,16")
    p.add_argument("--a-grid", default="1,2")
    _add_common(p, "fluctuation")
    p.set_defaults(fn=cmd_fluctuation)

    p = sub.add_parser("mu-z", help="capped-mean location constant from a pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--window", default="5:50")
    p.add_argument("--points", type=int, default=12)
    p.add_argument("--fit-times", default="4,8,16")
    _add_common(p, "mu_z")
    p.set_defaults(fn=cmd_mu_z)

    p = sub.add_parser("tail", help="scaled survival table from a pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--window", default="5:30")
    p.add_argument("--band", default="0.8:1.2")
    p.add_argument("--points", type=int, default=12)
    p.add_argument("--fit-times", default="4,8,16")
    _add_common(p, "tail")
    p.set_defaults(fn=cmd_tail)

    p = sub.add_parser("speed-bound", help="convergence-rate constants from a pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--t-grid", default="4,8,16")
    p.add_argument("--deltas", default="0.1,0.5,1")
    _add_common(p, "speed_bound")
    p.set_defaults(fn=cmd_speed_bound)

    p = sub.add_parser("ngood", help="stopping-line good-particle counts")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--gamma", type=float, help="absolute barrier level")
    p.add_argument("--beta", type=float, help="level offset: gamma = log(t)/2 + beta")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon-pad", type=float, help="line collection span (default t)")
    p.add_argument("--law", default="binary")
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p, "ngood")
    p.set_defaults(fn=cmd_ngood)

    p = sub.add_parser("report", help="full verification report from two pools")
    p.add_argument("--pool-tail", required=True)
    p.add_argument("--pool-fluct", required=True)
    p.add_argument("--T-tail", type=float, default=30.0)
    p.add_argument("--T-fluct", type=float, default=64.0)
    p.add_argument("--tail-seed", type=int, default=harness.TAIL_POOL_SEED)
    p.add_argument("--fluct-seed", type=int, default=harness.FLUCT_POOL_SEED)
    p.add_argument("--t-grid", default="8,16")
    p.add_argument("--a-grid", default="1,2")
    p.add_argument("--tail-window", default="5:30")
    p.add_argument("--band", default="0.8:1.2")
    p.add_argument("--mu-window", default="5:50")
    p.add_argument("--mu-grid", default="-3,-2,-1,-0.5,0,0.5",
                   help="extra location values for the sensitivity table")
    p.add_argument("--lambda-max", type=float, default=5.0)
    p.add_argument("--lambda-points", type=int, default=41)
    p.add_argument("--n-boot", type=int, default=200)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--wt-grid", default="4,8,16,32,64")
    p.add_argument("--speed-grid", default="4,8,16")
    p.add_argument("--deltas", default="0.1,0.5,1")
    _add_common(p, "report")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
