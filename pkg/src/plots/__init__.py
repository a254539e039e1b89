"""Offline figure rendering for the simulation CLI's CSV/JSON outputs.

Read-only presentation: every number drawn comes from an input file.  The
only transforms applied are plotting ones: log scales, histogram binning
over a quantile-clipped range, differencing a CDF grid into a density
curve, and quantile interpolation for QQ panels.  Nothing statistical is
recomputed here, and nothing from the simulation library is imported;
the CSV/JSON contract is the whole interface.

A figure spec is a small dict (normally read from the ``*_figures.json``
file the report command writes):

    {"kind": "tail-plateau", "input": "report_tail.csv",
     "output": "report_tail.png", "reference": 1.0}

Kinds: ``tail-plateau`` (log-x plateau with CI band and a reference line),
``trend`` (one column against another), ``ecf-curves`` (empirical vs
target CF, Re/Im panels), ``hist-vs-density`` (quantile-clipped histogram
with a density differenced from a CDF grid), and ``qq`` (sample quantiles
against quantiles interpolated from the same grid).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render", "read_columns", "KINDS"]


def read_columns(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a delimited file into float column arrays keyed by header name."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"empty input: {path}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"no data rows in {path}")
    names = reader.fieldnames
    return {n: np.array([float(r[n]) for r in rows]) for n in names}


def _need(cols: dict[str, np.ndarray], names: tuple[str, ...], src) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise ValueError(f"missing columns {missing} in {src}")


def _where(cols: dict[str, np.ndarray], clause: dict) -> dict[str, np.ndarray]:
    keep = np.ones(len(next(iter(cols.values()))), dtype=bool)
    for name, val in clause.items():
        keep &= np.abs(cols[name] - float(val)) <= 1e-9
    if not np.any(keep):
        raise ValueError(f"where-clause {clause} selects no rows")
    return {k: v[keep] for k, v in cols.items()}


def _tail_plateau(spec: dict, base: Path):
    cols = read_columns(base / spec["input"])
    _need(cols, ("x", "value", "ci_lo", "ci_hi"), spec["input"])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.fill_between(cols["x"], cols["ci_lo"], cols["ci_hi"], alpha=0.25, lw=0)
    ax.plot(cols["x"], cols["value"], "o-", ms=4)
    ax.axhline(float(spec.get("reference", 1.0)), color="tab:red", ls="--", lw=1)
    ax.set_xscale("log")
    ax.set_xlabel("x")
    ax.set_ylabel("x P(Z > x)")
    ax.set_title("tail plateau")
    fig.tight_layout()
    return fig


def _trend(spec: dict, base: Path):
    cols = read_columns(base / spec["input"])
    xname, yname = spec["x"], spec["y"]
    _need(cols, (xname, yname), spec["input"])
    order = np.argsort(cols[xname], kind="stable")
    x, y = cols[xname][order], cols[yname][order]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    # repeated x values (several series points per abscissa) get markers only
    style = "o" if len(np.unique(x)) < len(x) else "o-"
    ax.plot(x, y, style, ms=4)
    if spec.get("logx"):
        ax.set_xscale("log")
    ax.set_xlabel(xname)
    ax.set_ylabel(yname)
    ax.set_title(f"{yname} vs {xname}")
    fig.tight_layout()
    return fig


def _ecf_curves(spec: dict, base: Path):
    cols = read_columns(base / spec["input"])
    _need(cols, ("lambda", "ecf_re", "ecf_im", "target_re", "target_im"), spec["input"])
    lam = cols["lambda"]
    fig, (ax_re, ax_im) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.6))
    for ax, part in ((ax_re, "re"), (ax_im, "im")):
        emp, tgt = cols[f"ecf_{part}"], cols[f"target_{part}"]
        ax.plot(lam, emp, "-", label="empirical")
        ax.plot(lam, tgt, "--", label="target")
        ax.fill_between(lam, emp, tgt, alpha=0.2, lw=0)
        ax.set_ylabel(f"{part.capitalize()} CF")
    ax_im.set_xlabel("lambda")
    ax_re.legend(loc="upper right", fontsize=8)
    ax_re.set_title("empirical vs target characteristic function")
    fig.tight_layout()
    return fig


def _density_from_cdf(spec: dict, base: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    grid = read_columns(base / spec["cdf_input"])
    _need(grid, ("x", "cdf"), spec["cdf_input"])
    gx, gc = grid["x"], grid["cdf"]
    mid = 0.5 * (gx[1:] + gx[:-1])
    dens = np.diff(gc) / np.diff(gx)
    return gx, gc, mid, dens


def _hist_vs_density(spec: dict, base: Path):
    cols = read_columns(base / spec["input"])
    _need(cols, (spec["column"],), spec["input"])
    vals = _where(cols, spec.get("where", {}))[spec["column"]]
    _, _, mid, dens = _density_from_cdf(spec, base)

    q_lo, q_hi = np.quantile(vals, (0.01, 0.99))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.hist(vals, bins=40, range=(q_lo, q_hi), density=True, alpha=0.6,
            label="samples")
    ax.plot(mid, dens, color="tab:red", lw=1.5, label="target density")
    ax.set_xlim(q_lo, q_hi)
    ax.set_xlabel(spec["column"])
    ax.set_ylabel("density")
    ax.set_title("histogram vs target density")
    ax.legend(loc="upper right", fontsize=8)
    ax.text(0.02, 0.98, "range clipped to [q0.01, q0.99]",
            transform=ax.transAxes, va="top", fontsize=7, color="gray")
    fig.tight_layout()
    return fig


def _qq(spec: dict, base: Path):
    cols = read_columns(base / spec["input"])
    _need(cols, (spec["column"],), spec["input"])
    vals = _where(cols, spec.get("where", {}))[spec["column"]]
    gx, gc, _, _ = _density_from_cdf(spec, base)

    m = min(len(vals), 199)
    probs = (np.arange(1, m + 1) - 0.5) / m
    lo, hi = float(gc[0]), float(gc[-1])
    inside = (probs >= lo) & (probs <= hi)  # stay on the tabulated grid
    sample_q = np.quantile(vals, probs[inside])
    target_q = np.interp(probs[inside], gc, gx)

    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    ax.plot(target_q, sample_q, "o", ms=3)
    span = (min(target_q.min(), sample_q.min()), max(target_q.max(), sample_q.max()))
    ax.plot(span, span, color="tab:red", ls="--", lw=1)
    ax.set_xlabel("target quantiles")
    ax.set_ylabel("sample quantiles")
    ax.set_title("QQ against the target law")
    fig.tight_layout()
    return fig


KINDS = {
    "tail-plateau": _tail_plateau,
    "trend": _trend,
    "ecf-curves": _ecf_curves,
    "hist-vs-density": _hist_vs_density,
    "qq": _qq,
}


def render(spec: dict, base_dir: str | Path = ".") -> Path:
    """Render one figure spec; input and output paths resolve under base_dir."""
    kind = spec.get("kind")
    if kind not in KINDS:
        raise ValueError(f"unknown figure kind {kind!r}")
    base = Path(base_dir)
    fig = KINDS[kind](spec, base)
    out = base / spec["output"]
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out
