"""Spine importance samplers and many-to-one cross-validation.

Each branching-system expectation of the form

    E_x[ sum_u  weight_u(s) * H(particle u) ]

has a single-path representation: a prefactor times the expectation of H
along one distinguished path (the spine) under a changed measure.  Three
measures are supported:

* ``Q``: weight e^{-X_u(s)}, spine = driftless standard Brownian motion,
  prefactor e^{-x}.
* ``Qtilde``: weight X_u(s) e^{-X_u(s)} restricted to paths that stayed
  positive, spine = 3-dimensional Bessel process, prefactor x e^{-x}.
* ``Q0``: the system with particles absorbed at the origin, weight
  e^{-X_u(s && tau)}, spine = Brownian motion stopped at 0, prefactor e^{-x}.

Under every measure the spine branches at rate m1 * lambda carrying
size-biased offspring counts; branch events do not alter the spine motion,
so they are sampled independently of the path and carried on the
realization for distributional self-tests.

Exactness: Gaussian increments make the grid marginals exact at any step
size; the running minimum of Brownian spines is sampled from the exact
bridge-minimum law segment by segment, so barrier functionals carry no
discretization bias.  The Bessel spine is the norm of an exactly sampled
3-dimensional Brownian motion.  Only the absorption *time* under Q0 is
grid-resolution (the absorption indicator itself is exact).

Draw order per replicate (determinism contract): for each grid segment one
position draw (one normal for Brownian spines, three for Bessel) then one
bridge-minimum uniform (Brownian spines only); afterwards the branch-event
count, times, offspring counts, and spine-child picks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import BarrierSpec, OffspringLaw, SimConfig, normalize_params
from .engine import simulate
from .rng import stream

__all__ = [
    "SpinePath",
    "BranchEvent",
    "SpineRealization",
    "SpineEstimate",
    "ManyToOneReport",
    "FUNCTIONALS",
    "sample_spine_Q",
    "sample_spine_Qtilde",
    "sample_spine_Q0",
    "spine_expectation_Q",
    "spine_expectation_Qtilde",
    "spine_expectation_Q0",
    "many_to_one_check",
]


# ---------------------------------------------------------------------------
# realizations


@dataclass(frozen=True)
class SpinePath:
    """One spine path on a time grid.

    ``running_min`` is the exact continuous-time running minimum for
    Brownian spines; for the Bessel spine it is the grid minimum (no shipped
    functional reads it there).  ``stopped_at`` is the absorption time under
    Q0 at grid resolution, None when the path was never absorbed.
    """

    times: np.ndarray
    positions: np.ndarray
    running_min: np.ndarray
    stopped_at: float | None = None

    @property
    def endpoint(self) -> float:
        return float(self.positions[-1])

    @property
    def min_value(self) -> float:
        return float(self.running_min[-1])

    @property
    def stopped(self) -> bool:
        return self.stopped_at is not None


@dataclass(frozen=True)
class BranchEvent:
    """One spine branching: time, offspring count, which child is the spine,
    and the spine position at the event (= every child's birth position)."""

    time: float
    count: int
    child_index: int
    position: float


@dataclass(frozen=True)
class SpineRealization:
    path: SpinePath
    events: tuple[BranchEvent, ...]


@dataclass(frozen=True)
class SpineEstimate:
    value: float
    se: float
    n: int


# ---------------------------------------------------------------------------
# samplers


def _bridge_min(a: float, b: float, dt: float, u: float) -> float:
    # exact conditional minimum of a Brownian bridge given its endpoints
    d = a - b
    return 0.5 * (a + b - math.sqrt(d * d - 2.0 * dt * math.log(u)))


def _grid(s: float, dt: float) -> np.ndarray:
    n = max(1, int(math.ceil(s / dt - 1e-9)))
    return np.linspace(0.0, s, n + 1)


def _branch_events(
    law: OffspringLaw, s: float, rng: np.random.Generator, path: SpinePath
) -> tuple[BranchEvent, ...]:
    params = normalize_params(law)
    rate = params.branch_rate * law.mean
    horizon = s if path.stopped_at is None else path.stopped_at
    n = int(rng.poisson(rate * horizon))
    times = np.sort(rng.uniform(0.0, horizon, n))
    sb = law.size_biased()
    counts = sb.sample(rng, n)
    picks = np.array([rng.integers(0, int(c)) for c in counts], dtype=np.int64)
    positions = np.interp(times, path.times, path.positions)
    return tuple(
        BranchEvent(float(t), int(c), int(k), float(p))
        for t, c, k, p in zip(times, counts, picks, positions)
    )


def sample_spine_Q(
    law: OffspringLaw, x: float, s: float, rng: np.random.Generator, dt: float = 0.25
) -> SpineRealization:
    """Driftless Brownian spine from x with exact running minimum."""
    times = _grid(s, dt)
    pos = np.empty(len(times))
    rmin = np.empty(len(times))
    pos[0] = rmin[0] = x
    for i in range(1, len(times)):
        h = times[i] - times[i - 1]
        nxt = pos[i - 1] + math.sqrt(h) * rng.standard_normal()
        m = _bridge_min(pos[i - 1], nxt, h, rng.uniform())
        pos[i] = nxt
        rmin[i] = min(rmin[i - 1], m)
    path = SpinePath(times, pos, rmin)
    return SpineRealization(path, _branch_events(law, s, rng, path))


def sample_spine_Qtilde(
    law: OffspringLaw, x: float, s: float, rng: np.random.Generator, dt: float = 0.25
) -> SpineRealization:
    """Bessel-3 spine from x > 0, simulated as the norm of a 3-d Brownian
    motion started at (x, 0, 0); exact in distribution, stays positive."""
    if x <= 0:
        raise ValueError("Qtilde spine needs x > 0")
    times = _grid(s, dt)
    pos = np.empty(len(times))
    pos[0] = x
    r = x
    for i in range(1, len(times)):
        h = times[i] - times[i - 1]
        g = rng.standard_normal(3)
        # rotation invariance: restart the 3-d motion at (r, 0, 0)
        r = math.sqrt((r + math.sqrt(h) * g[0]) ** 2 + h * (g[1] ** 2 + g[2] ** 2))
        pos[i] = r
    rmin = np.minimum.accumulate(pos)
    path = SpinePath(times, pos, rmin)
    return SpineRealization(path, _branch_events(law, s, rng, path))


def sample_spine_Q0(
    law: OffspringLaw, x: float, s: float, rng: np.random.Generator, dt: float = 0.25
) -> SpineRealization:
    """Brownian spine from x >= 0 absorbed at the origin."""
    if x < 0:
        raise ValueError("Q0 spine needs x >= 0")
    times = _grid(s, dt)
    pos = np.empty(len(times))
    rmin = np.empty(len(times))
    pos[0] = rmin[0] = x
    stopped_at = 0.0 if x == 0.0 else None
    for i in range(1, len(times)):
        if stopped_at is not None:
            pos[i] = 0.0
            rmin[i] = min(rmin[i - 1], 0.0)
            continue
        h = times[i] - times[i - 1]
        nxt = pos[i - 1] + math.sqrt(h) * rng.standard_normal()
        m = _bridge_min(pos[i - 1], nxt, h, rng.uniform())
        if m <= 0.0:
            stopped_at = float(times[i])
            pos[i] = 0.0
            rmin[i] = min(rmin[i - 1], 0.0)
        else:
            pos[i] = nxt
            rmin[i] = min(rmin[i - 1], m)
    path = SpinePath(times, pos, rmin, stopped_at=stopped_at)
    return SpineRealization(path, _branch_events(law, s, rng, path))


# ---------------------------------------------------------------------------
# estimators


def _estimate(
    sampler: Callable[[np.random.Generator], SpineRealization],
    H: Callable[[SpinePath], float],
    prefactor: float,
    n: int,
    seed: int,
) -> SpineEstimate:
    vals = np.empty(n)
    for i in range(n):
        vals[i] = H(sampler(stream(seed, i)).path)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SpineEstimate(prefactor * mean, abs(prefactor) * se, n)


def spine_expectation_Q(
    law: OffspringLaw,
    x: float,
    s: float,
    H: Callable[[SpinePath], float],
    n: int,
    seed: int,
    dt: float = 0.25,
) -> SpineEstimate:
    """Estimate E_x[sum_u e^{-X_u(s)} H(path of u)] for bounded H."""
    return _estimate(
        lambda rng: sample_spine_Q(law, x, s, rng, dt), H, math.exp(-x), n, seed
    )


def spine_expectation_Qtilde(
    law: OffspringLaw,
    x: float,
    s: float,
    H: Callable[[SpinePath], float],
    n: int,
    seed: int,
    dt: float = 0.25,
) -> SpineEstimate:
    """Estimate E_x[sum_u X_u(s) e^{-X_u(s)} 1{path stayed > 0} H] for x > 0."""
    return _estimate(
        lambda rng: sample_spine_Qtilde(law, x, s, rng, dt),
        H,
        x * math.exp(-x),
        n,
        seed,
    )


def spine_expectation_Q0(
    law: OffspringLaw,
    x: float,
    s: float,
    H: Callable[[SpinePath], float],
    n: int,
    seed: int,
    dt: float = 0.25,
) -> SpineEstimate:
    """Estimate for the system with particles absorbed at the origin."""
    return _estimate(
        lambda rng: sample_spine_Q0(law, x, s, rng, dt), H, math.exp(-x), n, seed
    )


# ---------------------------------------------------------------------------
# shipped functionals and their direct-engine counterparts


@dataclass(frozen=True)
class Functional:
    """A named bounded functional with both estimator routes.

    ``measure`` picks the spine sampler; ``spine_H`` evaluates on a
    SpinePath; ``direct_kind`` names how the engine-side estimate is formed:

    * ``snapshot``: barrier-free run, per-replicate sum of
      e^{-x_i} endpoint_H(x_i) over the particle snapshot at s.
    * ``snapshot_tilde``: run killed at 0, per-replicate sum of
      x_i e^{-x_i} endpoint_H(x_i) over survivors at s.
    * ``snapshot_killed``: run killed at 0, per-replicate sum of
      e^{-x_i} endpoint_H(x_i) over survivors at s.
    * ``hits``: run killed at 0, per-replicate count of absorptions by s.
    * ``stopped_mass``: run killed at 0, absorption count plus live
      e^{-x} mass at s (endpoint_H must be constant 1).
    """

    name: str
    measure: str
    spine_H: Callable[[SpinePath], float]
    direct_kind: str
    endpoint_H: Callable[[np.ndarray], np.ndarray] | None = None


FUNCTIONALS: dict[str, Functional] = {
    f.name: f
    for f in (
        Functional("const_Q", "Q", lambda p: 1.0, "snapshot", lambda x: np.ones_like(x)),
        Functional(
            "min_above_zero",
            "Q",
            lambda p: 1.0 if p.min_value > 0.0 else 0.0,
            "snapshot_tilde_unweighted",
        ),
        Functional(
            "endpoint_below_zero",
            "Q",
            lambda p: 1.0 if p.endpoint <= 0.0 else 0.0,
            "snapshot",
            lambda x: (x <= 0.0).astype(float),
        ),
        Functional(
            "endpoint_in_unit_interval",
            "Q",
            lambda p: 1.0 if 0.0 <= p.endpoint <= 1.0 else 0.0,
            "snapshot",
            lambda x: ((x >= 0.0) & (x <= 1.0)).astype(float),
        ),
        Functional("const_Qtilde", "Qtilde", lambda p: 1.0, "snapshot_tilde", lambda x: np.ones_like(x)),
        Functional(
            "endpoint_recip_capped",
            "Qtilde",
            lambda p: min(1.0 / p.endpoint, 1.0),
            "snapshot_tilde",
            lambda x: np.minimum(1.0 / np.maximum(x, 1e-300), 1.0),
        ),
        Functional(
            "endpoint_above_one",
            "Qtilde",
            lambda p: 1.0 if p.endpoint > 1.0 else 0.0,
            "snapshot_tilde",
            lambda x: (x > 1.0).astype(float),
        ),
        Functional(
            "stopped_by_horizon",
            "Q0",
            lambda p: 1.0 if p.stopped else 0.0,
            "hits",
        ),
        Functional("const_Q0", "Q0", lambda p: 1.0, "stopped_mass"),
        Functional(
            "alive_above_one",
            "Q0",
            lambda p: 1.0 if not p.stopped and p.endpoint > 1.0 else 0.0,
            "snapshot_killed",
            lambda x: (x > 1.0).astype(float),
        ),
    )
}


_SPINE_EXPECTATION = {
    "Q": spine_expectation_Q,
    "Qtilde": spine_expectation_Qtilde,
    "Q0": spine_expectation_Q0,
}


def _direct_estimate(
    f: Functional, law: OffspringLaw, x: float, s: float, n: int, seed: int
) -> SpineEstimate:
    killed = f.direct_kind in (
        "snapshot_tilde",
        "snapshot_tilde_unweighted",
        "snapshot_killed",
        "hits",
        "stopped_mass",
    )
    cfg = SimConfig(
        law=law,
        x0=x,
        horizon=s,
        observe=(s,),
        barriers=(BarrierSpec(level=0.0, mode="kill"),) if killed else (),
        record_particles_at=(s,),
        master_seed=seed,
        replicates=n,
        keep_line_records=False,
    )
    vals = np.empty(n)
    for res in simulate(cfg):
        pos, _ = res.particles[s]
        if f.direct_kind == "snapshot":
            v = float(np.sum(np.exp(-pos) * f.endpoint_H(pos)))
        elif f.direct_kind == "snapshot_tilde":
            v = float(np.sum(pos * np.exp(-pos) * f.endpoint_H(pos)))
        elif f.direct_kind == "snapshot_tilde_unweighted":
            # survivors of the kill barrier are exactly the paths that
            # stayed positive: sum of plain weights matches the Q-side
            # indicator of the path minimum
            v = float(np.sum(np.exp(-pos)))
        elif f.direct_kind == "snapshot_killed":
            v = float(np.sum(np.exp(-pos) * f.endpoint_H(pos)))
        elif f.direct_kind == "hits":
            v = float(res.hit_counts.total_count)
        elif f.direct_kind == "stopped_mass":
            v = float(res.hit_counts.total_count) + float(np.sum(np.exp(-pos)))
        else:
            raise ValueError(f"unknown direct kind {f.direct_kind}")
        vals[res.replicate] = v
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SpineEstimate(mean, se, n)


@dataclass(frozen=True)
class ManyToOneReport:
    functional: str
    x: float
    s: float
    direct: float
    direct_se: float
    spine: float
    spine_se: float
    combined_se: float
    passed: bool
    variance_blowup: bool

    def as_dict(self) -> dict:
        return {
            "functional": self.functional,
            "x": self.x,
            "s": self.s,
            "direct": self.direct,
            "spine": self.spine,
            "se": self.combined_se,
            "pass": self.passed,
            "variance_blowup": self.variance_blowup,
        }


def many_to_one_check(
    law: OffspringLaw,
    functional: str | Functional,
    x: float,
    s: float,
    n_direct: int,
    n_spine: int,
    seed_direct: int,
    seed_spine: int,
    dt: float = 0.25,
) -> ManyToOneReport:
    """Cross-validate the direct and spine estimators of one functional.

    Pass criterion: |direct - spine| <= 3 combined SE.  A zero-variance pair
    (constant functionals) must agree to float roundoff.  Seeds for the two
    routes must differ; estimates with SE above half their magnitude are
    flagged as variance blow-ups.
    """
    f = FUNCTIONALS[functional] if isinstance(functional, str) else functional
    if seed_direct == seed_spine:
        raise ValueError("direct and spine estimators need independent seeds")
    direct = _direct_estimate(f, law, x, s, n_direct, seed_direct)
    spine = _SPINE_EXPECTATION[f.measure](law, x, s, f.spine_H, n_spine, seed_spine, dt)
    combined = math.hypot(direct.se, spine.se)
    gap = abs(direct.value - spine.value)
    passed = gap <= 3.0 * combined if combined > 0 else gap <= 1e-12
    blowup = any(
        est.se > 0.5 * abs(est.value) and est.se > 0 for est in (direct, spine)
    )
    return ManyToOneReport(
        functional=f.name,
        x=x,
        s=s,
        direct=direct.value,
        direct_se=direct.se,
        spine=spine.value,
        spine_se=spine.se,
        combined_se=combined,
        passed=passed,
        variance_blowup=blowup,
    )
