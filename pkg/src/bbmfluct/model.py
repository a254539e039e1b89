"""Offspring laws, critical normalization, and simulation configuration.

Everything downstream works in the critical normalization: unit diffusion
coefficient, unit upward drift, and branching rate 1 / (2 E[L - 1]).  With
that choice the additive mass sum(exp(-X_u)) and the derivative-weighted sum
sum(X_u exp(-X_u)) are martingales, which is what the verification harness
exercises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "OffspringLaw",
    "ModelParams",
    "BarrierSpec",
    "PrunePhase",
    "SimConfig",
    "normalize_params",
]

PROB_TOL = 1e-12


@dataclass(frozen=True)
class OffspringLaw:
    """Finite-support law of the number of children at a branch event.

    `pmf` is stored as a sorted tuple of (k, p_k) pairs with p_k > 0.
    Supercritical mean (E[L] > 1) is required; k = 0 (death) is allowed.
    """

    pmf: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        if not self.pmf:
            raise ValueError("offspring law needs at least one atom")
        ks = [k for k, _ in self.pmf]
        ps = [p for _, p in self.pmf]
        if any(not isinstance(k, int) or k < 0 for k in ks):
            raise ValueError("offspring support must be non-negative integers")
        if len(set(ks)) != len(ks):
            raise ValueError("duplicate atoms in offspring law")
        if any(p <= 0 for p in ps):
            raise ValueError("atom probabilities must be positive")
        if abs(sum(ps) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {sum(ps)!r}, not 1")
        object.__setattr__(self, "pmf", tuple(sorted(self.pmf)))
        if self.mean <= 1.0:
            raise ValueError("offspring mean must exceed 1 (supercritical)")

    @classmethod
    def from_dict(cls, probs: dict[int, float]) -> "OffspringLaw":
        return cls(tuple(sorted(probs.items())))

    @classmethod
    def binary(cls) -> "OffspringLaw":
        return cls(((2, 1.0),))

    @cached_property
    def ks(self) -> np.ndarray:
        return np.array([k for k, _ in self.pmf], dtype=np.int64)

    @cached_property
    def ps(self) -> np.ndarray:
        return np.array([p for _, p in self.pmf], dtype=np.float64)

    @cached_property
    def _cdf(self) -> np.ndarray:
        c = np.cumsum(self.ps)
        c[-1] = 1.0  # guard searchsorted against rounding
        return c

    @cached_property
    def mean(self) -> float:
        return float(np.dot(self.ks, self.ps))

    @cached_property
    def second_moment(self) -> float:
        return float(np.dot(self.ks.astype(float) ** 2, self.ps))

    @cached_property
    def is_deterministic(self) -> bool:
        return len(self.pmf) == 1

    def llog3_moment(self) -> float:
        """E[L (log_+ L)^3]; finite support makes this a finite sum."""
        out = 0.0
        for k, p in self.pmf:
            if k >= 1:
                out += p * k * max(math.log(k), 0.0) ** 3
        return out

    def size_biased(self) -> "OffspringLaw":
        """Law of L-hat with P(L-hat = k) = k P(L = k) / E[L]; drops k = 0."""
        m = self.mean
        return OffspringLaw(
            tuple((k, k * p / m) for k, p in self.pmf if k >= 1)
        )

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.is_deterministic:
            return np.full(n, self.pmf[0][0], dtype=np.int64)
        idx = np.searchsorted(self._cdf, rng.random(n), side="right")
        return self.ks[np.minimum(idx, len(self.pmf) - 1)]


@dataclass(frozen=True)
class ModelParams:
    """Diffusion/branching parameters in the critical normalization."""

    sigma2: float
    rho: float
    branch_rate: float
    law: OffspringLaw

    def __post_init__(self) -> None:
        # lambda * E[L - 1] = 1/2 is the criticality constraint
        slack = abs(self.branch_rate * (self.law.mean - 1.0) - 0.5)
        if slack > 1e-12:
            raise ValueError("branch rate violates critical normalization")
        if not (self.sigma2 == 1.0 and self.rho == 1.0):
            raise ValueError("engine runs in the sigma2 = rho = 1 gauge")


def normalize_params(law: OffspringLaw) -> ModelParams:
    """Critical normalization for `law`: sigma2 = rho = 1, rate 1/(2 E[L-1])."""
    return ModelParams(
        sigma2=1.0,
        rho=1.0,
        branch_rate=1.0 / (2.0 * (law.mean - 1.0)),
        law=law,
    )


@dataclass(frozen=True)
class BarrierSpec:
    """A flat space barrier, active from `start` (to `end` for flag mode).

    mode "kill": particles touching the level from `start` on are removed and
    recorded as stopping-line hits; a particle sitting at or below the level
    when the barrier activates is killed immediately.
    mode "flag": crossings only clear a per-particle indicator (used for the
    good/bad split over a window [start, end]); nothing is removed.
    """

    level: float
    start: float = 0.0
    mode: str = "kill"
    end: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("kill", "flag"):
            raise ValueError(f"unknown barrier mode {self.mode!r}")
        if self.mode == "kill" and self.end is not None:
            raise ValueError("kill barriers stay active once started")
        if self.end is not None and self.end < self.start:
            raise ValueError("barrier end precedes start")


@dataclass(frozen=True)
class PrunePhase:
    """Pruning threshold eps active from time `start` onward.

    Relative mode (default) freezes particles whose combined weight
    e^{-x}(1+|x|) falls below eps divided by the current population size, so
    one sweep freezes at most eps of combined mass.  Absolute mode compares
    the weight to eps directly; it trades the per-sweep mass guarantee for a
    population profile that tracks a fixed spatial cutoff.
    """

    start: float
    eps: float
    absolute: bool = False

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError("prune eps must be positive")


@dataclass(frozen=True)
class SimConfig:
    """One simulation study: model, initial state, schedule, and budgets.

    observe: times at which martingale records are written (sorted, > 0
      entries allowed plus 0 itself).
    barriers: at most one kill and at most one flag barrier are supported.
    prune: piecewise schedule of contribution thresholds; empty = never prune.
      A pass at time s removes particles with exp(-X)(1+|X|) below the phase
      threshold (eps/alive in relative mode, eps in absolute mode) and adds
      their current conditional means to the frozen accumulators.
    prune_cap: optional hard population bound enforced at every prune pass by
      freezing the lightest particles beyond the cap (same fold accounting).
    step_dt: optional cap on segment length, for runs where barrier hit
      *times* must be resolved finely (hit probabilities are exact via the
      bridge correction at any segment length).
    """

    law: OffspringLaw
    x0: float = 0.0
    horizon: float = 1.0
    observe: tuple[float, ...] = ()
    thetas: tuple[float, ...] = ()
    barriers: tuple[BarrierSpec, ...] = ()
    prune: tuple[PrunePhase, ...] = ()
    prune_dt: float = 1.0
    prune_cap: int | None = None
    step_dt: float | None = None
    replicates: int = 1
    master_seed: int = 0
    max_particles: int = 10_000_000
    record_particles_at: tuple[float, ...] = ()
    hit_windows: tuple[tuple[float, float], ...] = ()
    stop_when_empty: bool = True
    keep_line_records: bool = True

    def __post_init__(self) -> None:
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        obs = tuple(sorted(self.observe))
        object.__setattr__(self, "observe", obs)
        if obs and (obs[0] < 0 or obs[-1] > self.horizon):
            raise ValueError("observation times must lie in [0, horizon]")
        kills = [b for b in self.barriers if b.mode == "kill"]
        flags = [b for b in self.barriers if b.mode == "flag"]
        if len(kills) > 1 or len(flags) > 1:
            raise ValueError("at most one kill and one flag barrier supported")
        if self.prune:
            starts = [p.start for p in self.prune]
            if starts != sorted(starts):
                raise ValueError("prune phases must be sorted by start time")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if self.prune_cap is not None and self.prune_cap < 1:
            raise ValueError("prune_cap must be at least 1")
        if self.step_dt is not None and self.step_dt <= 0:
            raise ValueError("step_dt must be positive")
        for a, b in self.hit_windows:
            if not (0 <= a < b):
                raise ValueError(f"bad hit window ({a}, {b})")

    @cached_property
    def params(self) -> ModelParams:
        return normalize_params(self.law)

    @property
    def kill_barrier(self) -> BarrierSpec | None:
        for b in self.barriers:
            if b.mode == "kill":
                return b
        return None

    @property
    def flag_barrier(self) -> BarrierSpec | None:
        for b in self.barriers:
            if b.mode == "flag":
                return b
        return None

    def phase_at(self, t: float) -> PrunePhase | None:
        """Prune phase in force at time t; None before the schedule starts."""
        current = None
        for ph in self.prune:
            if t >= ph.start - 1e-12:
                current = ph
        return current

    def eps_at(self, t: float) -> float:
        """Prune threshold in force at time t; 0.0 before the schedule starts."""
        ph = self.phase_at(t)
        return 0.0 if ph is None else ph.eps
