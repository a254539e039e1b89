"""Bessel-3 process, Brownian first-passage laws, and the Imhof identity.

The Bessel-3 process is the norm of a three-dimensional Brownian motion; it
is the h-transform of Brownian motion conditioned to stay positive, which is
exactly how the derivative-weighted spine moves.  The Imhof absolute
continuity relation

    E_x[ H(B) 1{min_{[0,t]} B > 0} ] = E_x[ (x / R_t) H(R) ]

(B Brownian from x, R Bessel-3 from x) is the workhorse identity checked
here by Monte Carlo from both ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "bessel3_density",
    "sample_bessel3",
    "sample_bessel3_path",
    "bm_hit_time_density",
    "bm_hit_time_cdf",
    "F_gauss",
    "bm_survival_paths",
    "ImhofResult",
    "imhof_check",
]


def bessel3_density(z, t: float, x: float) -> np.ndarray:
    """Density of the Bessel-3 process at time t started from x >= 0.

    For x > 0:  exp(-(z-x)^2/2t)/sqrt(2 pi) * z/(x sqrt(t)) * (1 - exp(-2xz/t))
    For x = 0:  exp(-z^2/2t)/sqrt(2 pi) * 2 z^2 / t^{3/2}
    """
    if t <= 0 or x < 0:
        raise ValueError("need t > 0 and x >= 0")
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros_like(z)
    pos = z > 0
    zp = z[pos]
    if x == 0.0:
        out[pos] = np.exp(-zp**2 / (2 * t)) / math.sqrt(2 * math.pi) * 2 * zp**2 / t**1.5
    else:
        out[pos] = (
            np.exp(-((zp - x) ** 2) / (2 * t))
            / math.sqrt(2 * math.pi)
            * zp
            / (x * math.sqrt(t))
            * (1.0 - np.exp(-2 * x * zp / t))
        )
    return out


def sample_bessel3(rng: np.random.Generator, x: float, t: float, n: int) -> np.ndarray:
    """Exact Bessel-3 marginals at time t: |(x,0,0) + 3d Brownian motion|."""
    if t <= 0 or x < 0:
        raise ValueError("need t > 0 and x >= 0")
    g = rng.standard_normal((3, n)) * math.sqrt(t)
    g[0] += x
    return np.sqrt((g * g).sum(axis=0))


def sample_bessel3_path(
    rng: np.random.Generator, x: float, times: np.ndarray, n: int
) -> np.ndarray:
    """n Bessel-3 paths from x observed at `times`; exact at the grid.

    Returns shape (n, len(times)).  Built as the norm of a 3d Brownian path,
    so the joint law at the grid times is exact, not Euler-approximate.
    """
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) <= 0) or times[0] <= 0:
        raise ValueError("times must be strictly increasing and positive")
    dts = np.diff(np.concatenate([[0.0], times]))
    out = np.empty((n, times.size))
    coords = np.zeros((3, n))
    coords[0] = x
    for j, dt in enumerate(dts):
        coords += rng.standard_normal((3, n)) * math.sqrt(dt)
        out[:, j] = np.sqrt((coords * coords).sum(axis=0))
    return out


def bm_hit_time_density(s, x: float) -> np.ndarray:
    """First-passage density to 0 of driftless Brownian motion from x > 0."""
    if x <= 0:
        raise ValueError("start must be above the barrier")
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = x / (math.sqrt(2 * math.pi) * sp**1.5) * np.exp(-(x**2) / (2 * sp))
    return out


def bm_hit_time_cdf(s, x: float) -> np.ndarray:
    """P(first passage to 0 <= s) = 2 Phi(-x / sqrt(s)) for driftless BM."""
    if x <= 0:
        raise ValueError("start must be above the barrier")
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = 2.0 * ndtr(-x / np.sqrt(s[pos]))
    return out if out.ndim else float(out)


def F_gauss(y) -> np.ndarray:
    """F(y) = P(|N(0,1)| <= y) = sqrt(2/pi) int_0^y exp(-z^2/2) dz, clipped at 0.

    This is the no-passage probability P_x(min_{[0,s]} B > 0) at y = x/sqrt(s),
    and satisfies F(y) <= min(1, sqrt(2/pi) y).
    """
    y = np.asarray(y, dtype=np.float64)
    out = 2.0 * ndtr(np.maximum(y, 0.0)) - 1.0
    return out if out.ndim else float(out)


def bm_survival_paths(
    rng: np.random.Generator, x: float, times: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Driftless BM paths from x with exact barrier-at-0 survival flags.

    Returns (paths, alive) with paths shape (n, len(times)).  Survival over
    each grid step is resolved by the Brownian bridge hit probability
    exp(-2 d1 d2 / dt), so the flag's law does not depend on the grid.
    """
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) <= 0) or times[0] <= 0:
        raise ValueError("times must be strictly increasing and positive")
    dts = np.diff(np.concatenate([[0.0], times]))
    out = np.empty((n, times.size))
    pos = np.full(n, float(x))
    alive = np.full(n, x > 0)
    for j, dt in enumerate(dts):
        new = pos + rng.standard_normal(n) * math.sqrt(dt)
        d1 = pos
        d2 = new
        both = (d1 > 0) & (d2 > 0)
        with np.errstate(over="ignore"):
            p_hit = np.where(both, np.exp(-2.0 * d1 * d2 / dt), 1.0)
        alive &= rng.random(n) >= p_hit
        pos = new
        out[:, j] = pos
    return out, alive


@dataclass(frozen=True)
class ImhofResult:
    label: str
    bm_side: float
    bm_se: float
    bessel_side: float
    bessel_se: float
    passed: bool

    @property
    def gap(self) -> float:
        return abs(self.bm_side - self.bessel_side)


def imhof_check(
    rng: np.random.Generator,
    x: float,
    t: float,
    functional,
    n: int,
    label: str = "",
    grid_points: int = 16,
) -> ImhofResult:
    """Monte Carlo check of the Imhof identity for a path functional.

    `functional(paths, times)` maps (n, m) path arrays to n values; it is
    evaluated on Brownian survivors (weight 1) and on Bessel-3 paths with
    weight x / R_t.  Passing means the two estimates agree within three
    combined standard errors.
    """
    if x <= 0:
        raise ValueError("Imhof weight needs x > 0")
    times = np.linspace(t / grid_points, t, grid_points)
    paths, alive = bm_survival_paths(rng, x, times, n)
    vals = functional(paths, times) * alive
    bm_side = float(vals.mean())
    bm_se = float(vals.std(ddof=1) / math.sqrt(n))
    rpaths = sample_bessel3_path(rng, x, times, n)
    wvals = functional(rpaths, times) * (x / rpaths[:, -1])
    bessel_side = float(wvals.mean())
    bessel_se = float(wvals.std(ddof=1) / math.sqrt(n))
    se = math.hypot(bm_se, bessel_se)
    return ImhofResult(
        label=label or "imhof",
        bm_side=bm_side,
        bm_se=bm_se,
        bessel_side=bessel_side,
        bessel_se=bessel_se,
        passed=abs(bm_side - bessel_side) <= 3.0 * se,
    )
