"""Experiment harness over recorded martingale trajectories.

Reads the engine's delimited trajectory output and turns it into the
limit-theorem diagnostics: survival tables for the 1/x tail, the capped-mean
location constant, fluctuation statistics with their mixed 1-stable target
CFs, empirical-CF distances, and the convergence-rate checks.

Heavy-tail discipline: the limiting objects here have infinite mean, so no
operation reports a raw sample mean of a heavy-tailed quantity.  The API
exposes probabilities, quantile-like tables, and characteristic functions
instead; `ZinfSamples.mean()` raises on purpose.

Location-constant convention: the constant c_Z is estimated from the capped
mean, c(x) = E[Z ^ x] - log x = integral_0^x P(Z > y) dy - log x, which is
the exact hypothesis of the CF asymptotic lemma and gives c = 1 for the
synthetic Pareto(1) self-test.  (The truncated mean E[Z 1{Z <= x}] - log x
converges to a value smaller by exactly lim x P(Z > x).)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.stats import kendalltau, kstest

from .model import OffspringLaw, PrunePhase, SimConfig
from .stable import EULER_GAMMA, TWO_OVER_PI, cdf_by_inversion, psi

__all__ = [
    "MartingaleFrame",
    "ZinfSamples",
    "TailTable",
    "MuZEstimate",
    "FluctuationCell",
    "CFGrid",
    "PairCFGrid",
    "EcfReport",
    "WtConvergenceTable",
    "SpeedBoundTable",
    "NGoodRun",
    "NGoodTable",
    "load_martingale_csv",
    "load_pool",
    "tail_pool_config",
    "fluctuation_pool_config",
    "require_independent_pools",
    "estimate_Zinf",
    "tail_check",
    "estimate_mu_Z",
    "statistic_theorem",
    "statistic_bis",
    "coupling_gap",
    "fluctuation_statistics",
    "mixed_stable_target_cf",
    "mixed_stable_cf_pair",
    "ecf_compare",
    "ecf_compare_pair",
    "ks_rank_diagnostic",
    "wt_convergence_check",
    "speed_bound_check",
    "n_good_scaling_check",
    "hit_count_mean",
]

# scale of the driving Levy process behind the "theorem" statistic variant
SIGMA_THEOREM = math.sqrt(math.pi / 2.0)

TAIL_POOL_SEED = 101
FLUCT_POOL_SEED = 202


# ---------------------------------------------------------------------------
# trajectory input


@dataclass
class MartingaleFrame:
    """Column store for martingale CSV rows (one row per replicate and time)."""

    columns: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.columns["t"])

    @property
    def times(self) -> np.ndarray:
        return np.unique(self.columns["t"])

    def at(self, t: float) -> dict[str, np.ndarray]:
        """All columns restricted to observation time t, sorted by replicate."""
        mask = self.columns["t"] == t
        if not mask.any():
            raise KeyError(f"no rows at observation time {t!r}")
        order = np.argsort(self.columns["replicate"][mask], kind="stable")
        return {k: v[mask][order] for k, v in self.columns.items()}

    def n_replicates(self) -> int:
        return len(np.unique(self.columns["replicate"]))


def load_martingale_csv(path: str | Path) -> MartingaleFrame:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(names):
        raise ValueError(f"{path}: header/row width mismatch")
    return MartingaleFrame({n: data[:, j].copy() for j, n in enumerate(names)})


def load_pool(directory: str | Path, pattern: str = "chunk_*.csv") -> MartingaleFrame:
    """Concatenate a chunked pool directory into one frame."""
    files = sorted(Path(directory).glob(pattern))
    if not files:
        raise FileNotFoundError(f"no {pattern} files under {directory}")
    frames = [load_martingale_csv(f) for f in files]
    names = list(frames[0].columns)
    if any(list(f.columns) != names for f in frames):
        raise ValueError("pool chunks disagree on columns")
    return MartingaleFrame(
        {n: np.concatenate([f.columns[n] for f in frames]) for n in names}
    )


def _jackpot_level(s: float, horizon: float, floor: float, rate: float) -> float:
    return floor + math.sqrt(rate * (horizon - s))


def tail_pool_config() -> SimConfig:
    """Frozen manifest of the T = 30 tail pool (seed pool 101).

    Relative pruning: a particle is cut when its W-weight drops below
    eps / alive, which only ever removes mass far above the bulk; the cut
    totals are folded into the frozen columns and the recorded W, Z.
    """
    return SimConfig(
        law=OffspringLaw.binary(),
        x0=0.0,
        horizon=30.0,
        observe=(4.0, 8.0, 16.0, 30.0),
        prune=(PrunePhase(start=2.0, eps=1e-4),),
        prune_dt=1.0,
        master_seed=TAIL_POOL_SEED,
        replicates=100_000,
        max_particles=30_000_000,
        keep_line_records=False,
    )


def fluctuation_pool_config() -> SimConfig:
    """Frozen manifest of the T = 64 fluctuation pool (seed pool 202).

    Absolute pruning under a receding barrier X_c(s) = 3.5 + sqrt(6 (64-s)):
    a frozen subtree rooted on the barrier would need its whole derivative
    mass concentrated ~e^{-3} deep in its own tail to shift any recorded
    statistic, so the cut bias is far below the Monte Carlo noise.  The
    population cap keeps jackpot replicates (population ~ e^{t/2} Exp(1))
    inside memory by dropping the lightest particles first.
    """
    phases = tuple(
        PrunePhase(
            start=float(s),
            eps=(1.0 + _jackpot_level(s, 64.0, 3.5, 6.0))
            * math.exp(-_jackpot_level(s, 64.0, 3.5, 6.0)),
            absolute=True,
        )
        for s in range(2, 64)
    )
    return SimConfig(
        law=OffspringLaw.binary(),
        x0=0.0,
        horizon=64.0,
        observe=(4.0, 8.0, 16.0, 32.0, 64.0),
        prune=phases,
        prune_dt=1.0,
        prune_cap=2_000_000,
        master_seed=FLUCT_POOL_SEED,
        replicates=10_000,
        max_particles=30_000_000,
        keep_line_records=False,
    )


def require_independent_pools(seed_a: int, seed_b: int) -> None:
    """Guard for the independence precondition of the mixed target CF."""
    if seed_a == seed_b:
        raise ValueError(
            "mixing samples and samples under test share a master seed; "
            "the mixed target requires disjoint seed pools"
        )


# ---------------------------------------------------------------------------
# Z_infinity proxy


@dataclass
class ZinfSamples:
    """Per-replicate proxies Zhat = Z_T with a fitted convergence budget.

    The budget uses the rate-of-convergence bound shape
    P(|Z_inf - Z_t| >= delta) <= C (log t)^2 / (delta sqrt(t)) with C fitted
    on the smaller-t grid, so `error_budget(p)` is the delta at which the
    fitted bound equals p at horizon T.
    """

    values: np.ndarray
    T: float
    C_hat: float
    frozen_fraction: float
    budget_exceeded: bool

    @property
    def n(self) -> int:
        return len(self.values)

    def error_budget(self, p: float) -> float:
        if not 0.0 < p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        return self.C_hat * math.log(self.T) ** 2 / (p * math.sqrt(self.T))

    def mean(self) -> float:
        raise RuntimeError(
            "the limit variable has a 1/x tail and no finite mean; "
            "use quantiles, tail tables, or characteristic functions"
        )


def estimate_Zinf(
    frame: MartingaleFrame,
    T: float,
    frozen_budget: float = 1e-3,
    fit_times: Sequence[float] = (4.0, 8.0, 16.0),
    fit_deltas: Sequence[float] = (0.1, 0.5, 1.0),
) -> ZinfSamples:
    """Extract Zhat := Z_T per replicate, with budget and pruning report."""
    if T < 2.0:
        raise ValueError("proxy horizon must satisfy T >= 2")
    end = frame.at(T)
    z_T = end["Z"]

    c_hat = 0.0
    for t in fit_times:
        if not 2.0 <= t < T:
            raise ValueError("fit grid must lie in [2, T)")
        z_t = frame.at(t)["Z"]
        for d in fit_deltas:
            p_hat = float(np.mean(np.abs(z_T - z_t) >= d))
            c_hat = max(c_hat, p_hat * d * math.sqrt(t) / math.log(t) ** 2)

    med = float(np.median(np.abs(z_T)))
    frozen = float(np.median(np.abs(end["frozen_Z"])))
    fraction = frozen / med if med > 0 else math.inf
    return ZinfSamples(
        values=z_T,
        T=T,
        C_hat=c_hat,
        frozen_fraction=fraction,
        budget_exceeded=fraction > frozen_budget,
    )


def _as_samples(samples: ZinfSamples | np.ndarray) -> np.ndarray:
    if isinstance(samples, ZinfSamples):
        return samples.values
    return np.asarray(samples, dtype=np.float64)


def _wilson(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    # Wilson score interval; well-behaved at k = 0 unlike the Wald interval
    p = k / n
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(mid - half, 0.0)
    hi = 1.0 if k == n else min(mid + half, 1.0)
    return lo, hi


# ---------------------------------------------------------------------------
# tail table and location constant


@dataclass
class TailTable:
    """Rows of x * empirical survival over a log grid, with binomial CIs."""

    x: np.ndarray
    survival: np.ndarray
    value: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n: int

    def rows(self) -> list[dict[str, float]]:
        return [
            {
                "x": float(self.x[i]),
                "survival": float(self.survival[i]),
                "value": float(self.value[i]),
                "ci_lo": float(self.ci_lo[i]),
                "ci_hi": float(self.ci_hi[i]),
            }
            for i in range(len(self.x))
        ]

    def in_band(self, lo: float, hi: float) -> bool:
        return bool(np.all((self.value >= lo) & (self.value <= hi)))


def tail_check(
    samples: ZinfSamples | np.ndarray,
    window: tuple[float, float],
    points: int = 12,
) -> TailTable:
    """Tabulate x * P(Zhat > x) on a log grid inside the window."""
    vals = _as_samples(samples)
    n = len(vals)
    if n < 10_000:
        raise ValueError("tail_check needs at least 1e4 samples")
    lo, hi = window
    if not 0.0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    top = float(np.max(vals))
    if lo > top or hi < float(np.min(vals)):
        raise ValueError("window outside sample support")
    xs = np.geomspace(lo, hi, points)
    surv = np.empty(points)
    lo_ci = np.empty(points)
    hi_ci = np.empty(points)
    for i, x in enumerate(xs):
        k = int(np.sum(vals > x))
        surv[i] = k / n
        lo_ci[i], hi_ci[i] = _wilson(k, n)
    return TailTable(
        x=xs, survival=surv, value=xs * surv, ci_lo=xs * lo_ci, ci_hi=xs * hi_ci, n=n
    )


@dataclass
class MuZEstimate:
    """Capped-mean location constant and the derived stable shift."""

    window: tuple[float, float]
    c_Z_hat: float
    mu_Z_hat: float
    slope: float
    se: float
    no_plateau: bool
    x: np.ndarray
    c_of_x: np.ndarray

    def rows(self) -> list[dict[str, float]]:
        return [
            {"x": float(self.x[i]), "c_of_x": float(self.c_of_x[i])}
            for i in range(len(self.x))
        ]


def estimate_mu_Z(
    samples: ZinfSamples | np.ndarray,
    window: tuple[float, float],
    points: int = 12,
    slope_tol: float = 0.1,
) -> MuZEstimate:
    """Estimate c_Z as the window average of E[Zhat ^ x] - log x.

    The slope of c(x) against log x diagnoses plateau quality: for an exact
    1/x tail the curve is flat, and `no_plateau` fires when |slope| exceeds
    `slope_tol`.  The estimate is always returned (finite-horizon pools are
    expected to drift; the flag, not an exception, reports it).
    """
    vals = _as_samples(samples)
    n = len(vals)
    if n < 100_000:
        raise ValueError("estimate_mu_Z needs at least 1e5 samples")
    lo, hi = window
    if not 0.0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    xs = np.geomspace(lo, hi, points)
    c = np.array([float(np.mean(np.minimum(vals, x))) - math.log(x) for x in xs])
    slope = float(np.polyfit(np.log(xs), c, 1)[0])
    c_hat = float(np.mean(c))
    mid = xs[len(xs) // 2]
    se = float(np.std(np.minimum(vals, mid), ddof=1) / math.sqrt(n))
    return MuZEstimate(
        window=window,
        c_Z_hat=c_hat,
        mu_Z_hat=c_hat - EULER_GAMMA,
        slope=slope,
        se=se,
        no_plateau=abs(slope) > slope_tol,
        x=xs,
        c_of_x=c,
    )


# ---------------------------------------------------------------------------
# fluctuation statistics


def statistic_theorem(t: float, a: float, z_at, zinf):
    """sqrt(t) (Zhat - Z_{at} + log t / sqrt(2 pi a t) * Zhat)."""
    return math.sqrt(t) * (
        zinf - z_at + math.log(t) / math.sqrt(2.0 * math.pi * a * t) * zinf
    )


def statistic_bis(t: float, a: float, z_at, w_at, zinf):
    """sqrt(t) (Zhat - Z_{at} + log t / 2 * W_{at})."""
    return math.sqrt(t) * (zinf - z_at + math.log(t) / 2.0 * w_at)


def coupling_gap(t: float, a: float, w_at, zinf, theorem, bis):
    """Exact algebra linking the two variants; zero up to rounding.

    theorem - bis = sqrt(t) log t (Zhat / sqrt(2 pi a t) - W_{at} / 2).
    """
    rhs = (
        math.sqrt(t)
        * math.log(t)
        * (zinf / math.sqrt(2.0 * math.pi * a * t) - w_at / 2.0)
    )
    return (theorem - bis) - rhs


@dataclass
class FluctuationCell:
    """Per-replicate fluctuation statistics at one (t, a) grid point."""

    t: float
    a: float
    replicate: np.ndarray
    zinf: np.ndarray
    Z_at: np.ndarray
    W_at: np.ndarray
    theorem: np.ndarray
    bis: np.ndarray

    @property
    def n(self) -> int:
        return len(self.theorem)

    def max_coupling_gap(self) -> float:
        gap = coupling_gap(self.t, self.a, self.W_at, self.zinf, self.theorem, self.bis)
        return float(np.max(np.abs(gap))) if len(gap) else 0.0

    def rows(self) -> list[dict[str, float]]:
        return [
            {
                "replicate": int(self.replicate[i]),
                "t": self.t,
                "a": self.a,
                "zinf": float(self.zinf[i]),
                "Z_at": float(self.Z_at[i]),
                "W_at": float(self.W_at[i]),
                "statistic_theorem": float(self.theorem[i]),
                "statistic_bis": float(self.bis[i]),
            }
            for i in range(self.n)
        ]


def fluctuation_statistics(
    frame: MartingaleFrame,
    t_grid: Sequence[float],
    a_grid: Sequence[float],
    T: float,
) -> dict[tuple[float, float], FluctuationCell]:
    """Compute both statistic variants for every (t, a) cell from one pool.

    The proxy Zhat = Z_T and the martingale values at time a*t come from the
    same trajectory, so the two variants are exactly coupled per replicate.
    """
    end = frame.at(T)
    zinf, rep = end["Z"], end["replicate"]
    cells: dict[tuple[float, float], FluctuationCell] = {}
    for t in t_grid:
        if t <= 1.0:
            raise ValueError("t grid must exceed 1 (log t enters the statistic)")
        for a in a_grid:
            if a < 1.0:
                raise ValueError("a must be >= 1")
            if a * t > T + 1e-12:
                raise ValueError(f"observation time a*t = {a * t} exceeds proxy horizon")
            try:
                obs = frame.at(a * t)
            except KeyError:
                raise ValueError(f"missing observation time a*t = {a * t}") from None
            if not np.array_equal(obs["replicate"], rep):
                raise ValueError("replicate sets differ between observation times")
            cells[(t, a)] = FluctuationCell(
                t=t,
                a=a,
                replicate=rep,
                zinf=zinf,
                Z_at=obs["Z"],
                W_at=obs["W"],
                theorem=statistic_theorem(t, a, obs["Z"], zinf),
                bis=statistic_bis(t, a, obs["Z"], obs["W"], zinf),
            )
    return cells


# ---------------------------------------------------------------------------
# mixed 1-stable targets


@dataclass
class CFGrid:
    """Characteristic function values over a lambda grid."""

    lam: np.ndarray
    values: np.ndarray
    n_mixing: int = 0

    def rows(self) -> list[dict[str, float]]:
        return [
            {
                "lambda": float(self.lam[i]),
                "re": float(self.values[i].real),
                "im": float(self.values[i].imag),
            }
            for i in range(len(self.lam))
        ]


@dataclass
class PairCFGrid:
    """Joint CF values over paired (lambda1, lambda2) nodes."""

    lam1: np.ndarray
    lam2: np.ndarray
    values: np.ndarray
    n_mixing: int = 0


def _positive_mixing(zinf: ZinfSamples | np.ndarray) -> np.ndarray:
    # the limit variable is a.s. positive; nonpositive proxies are
    # finite-horizon artifacts and would blow up exp(-z psi) anyway
    vals = _as_samples(zinf)
    return vals[vals > 0.0]


def mixed_stable_target_cf(
    zinf: ZinfSamples | np.ndarray,
    lam: np.ndarray,
    mu_Z: float,
    a: float = 1.0,
) -> CFGrid:
    """Limit CF of the "theorem" statistic at one a: mix exp(-(z/sqrt(a)) psi).

    psi is the exponent of the S(sqrt(pi/2), mu_Z sqrt(2/pi)) driving law,
    and the mixing variable enters through the Levy time z / sqrt(a).
    """
    if a < 1.0:
        raise ValueError("a must be >= 1")
    lam = np.asarray(lam, dtype=np.float64)
    z = _positive_mixing(zinf)
    if len(z) == 0:
        raise ValueError("no positive mixing samples")
    expo = psi(lam, SIGMA_THEOREM, mu_Z * math.sqrt(2.0 / math.pi))
    vals = np.exp(-np.outer(z / math.sqrt(a), expo)).mean(axis=0)
    return CFGrid(lam=lam, values=vals, n_mixing=len(z))


def mixed_stable_cf_pair(
    zinf: ZinfSamples | np.ndarray,
    lam1: np.ndarray,
    lam2: np.ndarray,
    mu_Z: float,
    a1: float,
    a2: float,
) -> PairCFGrid:
    """Joint target CF at two Levy times z/sqrt(a1) >= z/sqrt(a2).

    Independent increments over the decreasing times give, per mixing sample,
    exp(-(z/sqrt(a2)) psi(l1+l2) - z (1/sqrt(a1) - 1/sqrt(a2)) psi(l1)).
    Setting a1 = a2 collapses to the marginal at l1 + l2.
    """
    if not 1.0 <= a1 <= a2:
        raise ValueError("need 1 <= a1 <= a2")
    lam1 = np.asarray(lam1, dtype=np.float64)
    lam2 = np.asarray(lam2, dtype=np.float64)
    if lam1.shape != lam2.shape:
        raise ValueError("lambda grids must be paired")
    z = _positive_mixing(zinf)
    if len(z) == 0:
        raise ValueError("no positive mixing samples")
    mu = mu_Z * math.sqrt(2.0 / math.pi)
    p_sum = psi(lam1 + lam2, SIGMA_THEOREM, mu)
    p_one = psi(lam1, SIGMA_THEOREM, mu)
    gap = 1.0 / math.sqrt(a1) - 1.0 / math.sqrt(a2)
    expo = np.outer(z / math.sqrt(a2), p_sum) + np.outer(z * gap, p_one)
    return PairCFGrid(
        lam1=lam1, lam2=lam2, values=np.exp(-expo).mean(axis=0), n_mixing=len(z)
    )


# ---------------------------------------------------------------------------
# empirical CF comparison


@dataclass
class EcfReport:
    """Sup distance between an ECF and a target CF, with bootstrap CI."""

    lam: np.ndarray
    ecf: np.ndarray
    target: np.ndarray
    absdiff: np.ndarray
    sup_distance: float
    ci_lo: float
    ci_hi: float
    n: int
    n_boot: int

    def rows(self) -> list[dict[str, float]]:
        return [
            {
                "lambda": float(self.lam[i]),
                "ecf_re": float(self.ecf[i].real),
                "ecf_im": float(self.ecf[i].imag),
                "target_re": float(self.target[i].real),
                "target_im": float(self.target[i].imag),
                "absdiff": float(self.absdiff[i]),
            }
            for i in range(len(self.lam))
        ]


def _bootstrap_sup(
    phases: np.ndarray, target: np.ndarray, n_boot: int, seed: int
) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    n = phases.shape[0]
    sups = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        sups[b] = float(np.max(np.abs(phases[idx].mean(axis=0) - target)))
    return float(np.quantile(sups, 0.025)), float(np.quantile(sups, 0.975))


def ecf_compare(
    samples: np.ndarray,
    target: CFGrid,
    n_boot: int = 200,
    seed: int = 0,
    min_samples: int = 10_000,
) -> EcfReport:
    """Sup |ECF - target| over the grid, bootstrapped over replicates."""
    s = np.asarray(samples, dtype=np.float64)
    if len(s) < min_samples:
        raise ValueError(f"ecf_compare needs at least {min_samples} samples")
    phases = np.exp(1j * np.outer(s, target.lam))
    ecf = phases.mean(axis=0)
    absdiff = np.abs(ecf - target.values)
    lo, hi = _bootstrap_sup(phases, target.values, n_boot, seed)
    return EcfReport(
        lam=target.lam,
        ecf=ecf,
        target=target.values,
        absdiff=absdiff,
        sup_distance=float(np.max(absdiff)),
        ci_lo=lo,
        ci_hi=hi,
        n=len(s),
        n_boot=n_boot,
    )


def ecf_compare_pair(
    samples1: np.ndarray,
    samples2: np.ndarray,
    target: PairCFGrid,
    n_boot: int = 200,
    seed: int = 0,
    min_samples: int = 10_000,
) -> EcfReport:
    """Joint-ECF version of `ecf_compare` on paired (lambda1, lambda2) nodes."""
    s1 = np.asarray(samples1, dtype=np.float64)
    s2 = np.asarray(samples2, dtype=np.float64)
    if len(s1) != len(s2):
        raise ValueError("joint samples must be aligned")
    if len(s1) < min_samples:
        raise ValueError(f"ecf_compare_pair needs at least {min_samples} samples")
    phases = np.exp(1j * (np.outer(s1, target.lam1) + np.outer(s2, target.lam2)))
    ecf = phases.mean(axis=0)
    absdiff = np.abs(ecf - target.values)
    lo, hi = _bootstrap_sup(phases, target.values, n_boot, seed)
    return EcfReport(
        lam=target.lam1,
        ecf=ecf,
        target=target.values,
        absdiff=absdiff,
        sup_distance=float(np.max(absdiff)),
        ci_lo=lo,
        ci_hi=hi,
        n=len(s1),
        n_boot=n_boot,
    )


def ks_rank_diagnostic(
    statistic: np.ndarray,
    zinf: np.ndarray,
    mu_Z: float,
    a: float = 1.0,
    subsample: int = 2000,
    seed: int = 0,
) -> tuple[float, float]:
    """Secondary two-sample check: per-sample time change to a common law.

    Conditionally on its own proxy z, a statistic should follow the stable
    law at Levy time c = z / sqrt(a).  The exact 1-stable rescaling maps it
    back to the unit law, and the mapped ranks are tested against uniform.
    Heavier than the ECF route, hence subsampled; diagnostic only.
    """
    s = np.asarray(statistic, dtype=np.float64)
    z = np.asarray(zinf, dtype=np.float64)
    if s.shape != z.shape:
        raise ValueError("statistic and proxy arrays must be aligned")
    keep = z > 0.0
    s, z = s[keep], z[keep]
    rng = np.random.default_rng(seed)
    if len(s) > subsample:
        idx = rng.choice(len(s), size=subsample, replace=False)
        s, z = s[idx], z[idx]
    c = z / math.sqrt(a)
    mu = mu_Z * math.sqrt(2.0 / math.pi)
    # S(c sigma, c mu) equals c S(sigma, mu) + sigma (2/pi) c log c in law
    adj = (s - SIGMA_THEOREM * TWO_OVER_PI * c * np.log(c)) / c
    u = cdf_by_inversion(adj, SIGMA_THEOREM, mu)
    res = kstest(u, "uniform")
    return float(res.statistic), float(res.pvalue)


# ---------------------------------------------------------------------------
# convergence-rate checks


@dataclass
class WtConvergenceTable:
    """P(|sqrt(t) W_t - sqrt(2/pi) Zhat| >= t^-theta) over a t grid."""

    theta: float
    t: np.ndarray
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n: int

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.p_hat) <= 1e-12))

    def rows(self) -> list[dict[str, float]]:
        return [
            {
                "t": float(self.t[i]),
                "threshold": float(self.t[i] ** -self.theta),
                "p_hat": float(self.p_hat[i]),
                "ci_lo": float(self.ci_lo[i]),
                "ci_hi": float(self.ci_hi[i]),
            }
            for i in range(len(self.t))
        ]


def wt_convergence_check(
    frame: MartingaleFrame,
    theta: float,
    t_grid: Sequence[float],
    T: float,
) -> WtConvergenceTable:
    """Tabulate the renormalized-W deviation probabilities over t."""
    if not 0.0 < theta < 0.2:
        raise ValueError("theta must lie in (0, 0.2)")
    zinf = frame.at(T)["Z"]
    root = math.sqrt(2.0 / math.pi)
    ts = np.asarray(sorted(t_grid), dtype=np.float64)
    p = np.empty(len(ts))
    lo = np.empty(len(ts))
    hi = np.empty(len(ts))
    n = len(zinf)
    for i, t in enumerate(ts):
        w_t = frame.at(float(t))["W"]
        dev = np.abs(math.sqrt(t) * w_t - root * zinf)
        k = int(np.sum(dev >= t**-theta))
        p[i] = k / n
        lo[i], hi[i] = _wilson(k, n)
    return WtConvergenceTable(theta=theta, t=ts, p_hat=p, ci_lo=lo, ci_hi=hi, n=n)


@dataclass
class SpeedBoundTable:
    """Fitted constants C(t, delta) = P-hat * delta sqrt(t) / (log t)^2."""

    t: np.ndarray
    delta: np.ndarray
    p_hat: np.ndarray
    C_hat: np.ndarray
    max_C: float
    kendall_tau: float
    p_against_increase: float

    def rows(self) -> list[dict[str, float]]:
        return [
            {
                "t": float(self.t[i]),
                "delta": float(self.delta[i]),
                "p_hat": float(self.p_hat[i]),
                "C_hat": float(self.C_hat[i]),
            }
            for i in range(len(self.t))
        ]


def _kendall_against_increase(
    t: np.ndarray, c: np.ndarray, n_perm: int = 5000, seed: int = 0
) -> tuple[float, float]:
    # one-sided permutation test of "C grows with t"; ties in t are fine
    tau = kendalltau(t, c).statistic
    if np.isnan(tau):
        return 0.0, 1.0
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perm):
        perm = kendalltau(t, rng.permutation(c)).statistic
        if perm >= tau - 1e-15:
            hits += 1
    return float(tau), (1 + hits) / (n_perm + 1)


def speed_bound_check(
    frame: MartingaleFrame,
    T: float,
    t_grid: Sequence[float] = (4.0, 8.0, 16.0),
    deltas: Sequence[float] = (0.1, 0.5, 1.0),
) -> SpeedBoundTable:
    """Fit the convergence-rate constant on a (t, delta) grid.

    Uses Zhat = Z_T as the limit proxy; valid cells need t well below T,
    enforced as t <= T/2.
    """
    z_T = frame.at(T)["Z"]
    ts, ds, ps, cs = [], [], [], []
    for t in sorted(t_grid):
        if not 2.0 <= t <= T / 2.0:
            raise ValueError("t grid must lie in [2, T/2]")
        z_t = frame.at(float(t))["Z"]
        for d in deltas:
            if not 0.0 < d <= 1.0:
                raise ValueError("delta grid must lie in (0, 1]")
            p_hat = float(np.mean(np.abs(z_T - z_t) >= d))
            ts.append(t)
            ds.append(d)
            ps.append(p_hat)
            cs.append(p_hat * d * math.sqrt(t) / math.log(t) ** 2)
    t_arr = np.array(ts)
    c_arr = np.array(cs)
    tau, p_inc = _kendall_against_increase(t_arr, c_arr)
    return SpeedBoundTable(
        t=t_arr,
        delta=np.array(ds),
        p_hat=np.array(ps),
        C_hat=c_arr,
        max_C=float(np.max(c_arr)),
        kendall_tau=tau,
        p_against_increase=p_inc,
    )


# ---------------------------------------------------------------------------
# stopping-line counting


@dataclass
class NGoodRun:
    """Per-replicate good/bad hit counts for one (t, a) barrier experiment."""

    t: float
    a: float
    beta_t: float
    n_good: np.ndarray
    n_bad: np.ndarray
    w_at: np.ndarray


@dataclass
class NGoodTable:
    """Scaled good-particle counts against sqrt(t) W_{at}, by (t, a)."""

    t: np.ndarray
    a: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    ratio_se: np.ndarray
    bad_fraction: np.ndarray

    def rows(self) -> list[dict[str, float]]:
        return [
            {
                "t": float(self.t[i]),
                "a": float(self.a[i]),
                "scaled_n_good": float(self.lhs[i]),
                "sqrt_t_W_at": float(self.rhs[i]),
                "ratio": float(self.ratio[i]),
                "ratio_se": float(self.ratio_se[i]),
                "bad_fraction": float(self.bad_fraction[i]),
            }
            for i in range(len(self.t))
        ]

    def ratio_trend_ok(self) -> bool:
        """|ratio - 1| should not grow along t within each a."""
        ok = True
        for a in np.unique(self.a):
            sel = self.a == a
            order = np.argsort(self.t[sel])
            gap = np.abs(self.ratio[sel][order] - 1.0)
            ok = ok and bool(np.all(np.diff(gap) <= 1e-12))
        return ok


def n_good_scaling_check(runs: Iterable[NGoodRun]) -> NGoodTable:
    """Compare e^{-beta_t} N_good with sqrt(t) W_{at} across the grid."""
    ts, as_, lhs, rhs, ratio, se, badf = [], [], [], [], [], [], []
    for run in runs:
        n = len(run.n_good)
        scale = math.exp(-run.beta_t)
        left = scale * run.n_good
        right = math.sqrt(run.t) * run.w_at
        lm, rm = float(np.mean(left)), float(np.mean(right))
        ts.append(run.t)
        as_.append(run.a)
        lhs.append(lm)
        rhs.append(rm)
        if rm != 0.0:
            ratio.append(lm / rm)
            # delta method on the paired ratio of means
            diff = left - (lm / rm) * right
            se.append(float(np.std(diff, ddof=1) / math.sqrt(n)) / abs(rm))
        else:
            ratio.append(1.0 if lm == 0.0 else math.inf)
            se.append(0.0)
        tot = run.n_good + run.n_bad
        with np.errstate(invalid="ignore"):
            frac = np.where(tot > 0, run.n_bad / np.maximum(tot, 1), 0.0)
        badf.append(float(np.mean(frac)))
    return NGoodTable(
        t=np.array(ts),
        a=np.array(as_),
        lhs=np.array(lhs),
        rhs=np.array(rhs),
        ratio=np.array(ratio),
        ratio_se=np.array(se),
        bad_fraction=np.array(badf),
    )


# ---------------------------------------------------------------------------
# hitting-count oracle


def hit_count_mean(x: float, window: tuple[float, float]) -> float:
    """Quadrature of the first-moment integral for barrier hits in a window.

    E_x[N_[a,b]] = e^{-x} int_a^b x / sqrt(2 pi s^3) exp(-x^2 / 2s) ds; the
    total over [0, inf) is e^{-x}.
    """
    if x < 0.0:
        raise ValueError("start must be at or above the barrier")
    a, b = window
    if not 0.0 <= a <= b:
        raise ValueError("window must satisfy 0 <= a <= b")
    if x == 0.0:
        return 0.0

    # substituting u = 1/sqrt(s) turns the s^{-3/2} spike into a bounded
    # Gaussian profile, so the quadrature is stable on arbitrarily wide
    # (even unbounded) windows
    def integrand(u: float) -> float:
        return 2.0 * x / math.sqrt(2.0 * math.pi) * math.exp(-x * x * u * u / 2.0)

    u_lo = 0.0 if math.isinf(b) else 1.0 / math.sqrt(b)
    u_hi = np.inf if a == 0.0 else 1.0 / math.sqrt(a)
    val, _ = quad(integrand, u_lo, u_hi, limit=200)
    return math.exp(-x) * val
