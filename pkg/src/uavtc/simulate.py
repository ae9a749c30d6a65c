"""Monte Carlo engine: network sampling, SINR replication kernels, estimators.

Reproducibility contract: replication ``rep`` of an estimator draws from a
counter-based Philox stream keyed by (seed, estimator id) with the counter
set to ``rep``.  Per-replication statistics are small non-negative integers
accumulated by exact integer summation, so the final estimates are identical
bit for bit regardless of how replications are chunked across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .mobility import displaced_distance
from .model import NetworkParams, SpeedDistribution, ValidatedScenario, db_to_linear

_JOINT = 1
_PMF = 2
_COND_SUCCESS = 3
_ARR_DEP = 4
_MASK64 = (1 << 64) - 1


def _substream(seed: int, purpose: int, rep: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, purpose], dtype=np.uint64)
    counter = np.array([0, 0, 0, rep], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


# ---------------------------------------------------------------------------
# Realizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UavState:
    position0: tuple[float, float]
    is_mobile: bool
    speed: float
    angle: float  # 0 points toward the origin


@dataclass(frozen=True)
class NetworkRealization:
    """One sampled constellation with its mobility marks.

    Backed by parallel arrays for vectorized SINR evaluation; ``uavs``
    materializes the per-node record view.
    """

    x0: np.ndarray  # (n, 2) initial planar positions
    is_mobile: np.ndarray  # (n,) bool
    speeds: np.ndarray  # (n,)
    angles: np.ndarray  # (n,)
    region_radius: float
    t_gap: float
    n_inner: int = 0  # leading nodes placed inside the footprint by conditioning

    @property
    def n(self) -> int:
        return len(self.speeds)

    @property
    def uavs(self) -> list[UavState]:
        return [
            UavState(
                position0=(float(x), float(y)),
                is_mobile=bool(m),
                speed=float(v),
                angle=float(a),
            )
            for (x, y), m, v, a in zip(self.x0, self.is_mobile, self.speeds, self.angles)
        ]

    def distances(self, at_time: str) -> np.ndarray:
        """Ground distances from the origin at instant "0" or "t"."""
        r0 = np.hypot(self.x0[:, 0], self.x0[:, 1])
        if at_time == "0":
            return r0
        if at_time != "t":
            raise ValueError("at_time must be '0' or 't'")
        if self.t_gap == 0.0 or not self.is_mobile.any():
            return r0
        moved = displaced_distance(r0, self.speeds, self.angles, self.t_gap)
        return np.where(self.is_mobile, moved, r0)


def _mobility_marks(params: NetworkParams, speed: SpeedDistribution, n: int, rng):
    is_mobile = rng.random(n) < params.p_mobile
    speeds = speed.sample(rng, n)
    angles = rng.uniform(0.0, 2.0 * math.pi, n)
    return is_mobile, np.asarray(speeds, dtype=float), angles


def _disk_positions(rng, n: int, r_min: float, r_max: float) -> np.ndarray:
    # uniform over the annulus r_min <= r <= r_max (disk when r_min = 0)
    radii = np.sqrt(r_min * r_min + (r_max * r_max - r_min * r_min) * rng.random(n))
    bearing = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack((radii * np.cos(bearing), radii * np.sin(bearing)))


def sample_network(
    params: NetworkParams,
    speed: SpeedDistribution,
    t: float,
    rng: np.random.Generator,
    region_radius: float | None = None,
) -> NetworkRealization:
    """Homogeneous constellation over a disk large enough to be exact.

    Nodes beyond r_out + max_speed * t can neither interfere now nor reach
    the footprint by t, so truncating there changes no interference value.
    """
    r_sim = region_radius if region_radius is not None else (
        params.antenna.r_out + speed.support_max * t
    )
    n = rng.poisson(params.lam * math.pi * r_sim * r_sim)
    x0 = _disk_positions(rng, n, 0.0, r_sim)
    is_mobile, speeds, angles = _mobility_marks(params, speed, n, rng)
    return NetworkRealization(
        x0=x0, is_mobile=is_mobile, speeds=speeds, angles=angles,
        region_radius=r_sim, t_gap=t,
    )


def sample_conditioned(
    m: int,
    params: NetworkParams,
    speed: SpeedDistribution,
    t: float,
    rng: np.random.Generator,
) -> NetworkRealization:
    """Constellation conditioned on exactly m nodes inside the footprint.

    The first m nodes are uniform in the footprint; the rest follow the
    unconditioned process over the surrounding annulus.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    r_out = params.antenna.r_out
    r_sim = r_out + speed.support_max * t
    inner = _disk_positions(rng, m, 0.0, r_out)
    area = math.pi * (r_sim * r_sim - r_out * r_out)
    n_outer = rng.poisson(params.lam * area) if area > 0 else 0
    outer = _disk_positions(rng, n_outer, r_out, r_sim)
    x0 = np.vstack((inner, outer))
    is_mobile, speeds, angles = _mobility_marks(params, speed, m + n_outer, rng)
    return NetworkRealization(
        x0=x0, is_mobile=is_mobile, speeds=speeds, angles=angles,
        region_radius=r_sim, t_gap=t, n_inner=m,
    )


# ---------------------------------------------------------------------------
# Interference and SINR
# ---------------------------------------------------------------------------


def interference(
    realization: NetworkRealization,
    params: NetworkParams,
    at_time: str,
    fading_rng: np.random.Generator | None = None,
    fading: np.ndarray | None = None,
) -> float:
    """Aggregate interference power at the origin at the chosen instant.

    Fresh gamma fading is drawn unless an explicit ``fading`` vector is
    supplied (the deterministic test hook).
    """
    d = realization.distances(at_time)
    d2 = d * d
    gains = params.antenna.gain_at_sq(d2)
    if fading is None:
        if fading_rng is None:
            raise ValueError("either fading_rng or fading must be supplied")
        fading = fading_rng.gamma(params.fading.k, params.fading.omega, realization.n)
    # summing only active terms keeps the total bit-identical under any
    # enlargement of the sampling region (extra nodes carry zero gain)
    active = gains > 0.0
    path = (params.height * params.height + d2[active]) ** (-params.alpha / 2.0)
    return float(np.sum(np.asarray(fading)[active] * gains[active] * path))


def sinr(
    realization: NetworkRealization,
    params: NetworkParams,
    at_time: str,
    fading_rng: np.random.Generator | None = None,
    serving_fading: float | None = None,
    interferer_fading: np.ndarray | None = None,
) -> float:
    """SINR of the serving link; +inf when noise and interference both vanish."""
    if serving_fading is None:
        if fading_rng is None:
            raise ValueError("either fading_rng or serving_fading must be supplied")
        serving_fading = float(fading_rng.gamma(params.fading.k, params.fading.omega))
    power = params.antenna.g_main * serving_fading * params.height ** (-params.alpha)
    denom = interference(realization, params, at_time, fading_rng, interferer_fading) + params.noise
    if denom == 0.0:
        return math.inf
    return power / denom


# ---------------------------------------------------------------------------
# Replication engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorResult:
    estimate: float
    std_error: float
    replications: int
    seed: int


def _bernoulli_result(count: int, n: int, seed: int) -> EstimatorResult:
    p = count / n
    var = p * (1.0 - p) * n / (n - 1) if n > 1 else 0.0
    return EstimatorResult(p, math.sqrt(var / n), n, seed)


def _mean_result(total: int, total_sq: int, n: int, seed: int) -> EstimatorResult:
    mean = total / n
    var = (total_sq - total * total / n) / (n - 1) if n > 1 else 0.0
    return EstimatorResult(mean, math.sqrt(max(var, 0.0) / n), n, seed)


def _run_chunk(kernel, args, seed, purpose, lo, hi, width):
    acc = np.zeros(width, dtype=np.int64)
    for rep in range(lo, hi):
        acc += kernel(_substream(seed, purpose, rep), *args)
    return acc


def _accumulate(kernel: Callable, args: tuple, reps: int, seed: int, purpose: int,
                workers: int, width: int) -> np.ndarray:
    if workers <= 1 or reps < 2 * workers:
        return _run_chunk(kernel, args, seed, purpose, 0, reps, width)
    bounds = np.linspace(0, reps, workers + 1, dtype=int)
    acc = np.zeros(width, dtype=np.int64)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_chunk, kernel, args, seed, purpose, int(lo), int(hi), width)
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for fut in futures:
            acc += fut.result()
    return acc


# ---------------------------------------------------------------------------
# Kernels (module level so they pickle for the process pool)
# ---------------------------------------------------------------------------


def _two_instant_indicators(scenario: ValidatedScenario, rng, realization):
    """(success_0, success_t) indicator pair with fresh fading everywhere."""
    p = scenario.params
    k, omega = p.fading.k, p.fading.omega
    n = realization.n
    d0 = realization.distances("0")
    dt = realization.distances("t")
    fade0 = rng.gamma(k, omega, n)
    fade_t = rng.gamma(k, omega, n)
    serving0 = rng.gamma(k, omega)
    serving_t = rng.gamma(k, omega)
    h2 = p.height * p.height
    i0 = float(np.sum(fade0 * p.antenna.gain_at_sq(d0 * d0) * (h2 + d0 * d0) ** (-p.alpha / 2.0)))
    it = float(np.sum(fade_t * p.antenna.gain_at_sq(dt * dt) * (h2 + dt * dt) ** (-p.alpha / 2.0)))
    signal0 = p.antenna.g_main * serving0 * p.height ** (-p.alpha)
    signal_t = p.antenna.g_main * serving_t * p.height ** (-p.alpha)
    thr = scenario.threshold
    s0 = signal0 >= thr * (i0 + p.noise)
    st = signal_t >= thr * (it + p.noise)
    return s0, st


def _joint_kernel(rng, scenario: ValidatedScenario) -> np.ndarray:
    real = sample_network(scenario.params, scenario.speed, scenario.t_gap, rng)
    s0, st = _two_instant_indicators(scenario, rng, real)
    return np.array(
        [s0 and st, s0, st, st and not s0, not s0], dtype=np.int64
    )


def _pmf_kernel(rng, scenario: ValidatedScenario, m: int, n_max: int) -> np.ndarray:
    real = sample_conditioned(m, scenario.params, scenario.speed, scenario.t_gap, rng)
    dt = real.distances("t")
    count = int(np.sum(dt <= scenario.params.antenna.r_out))
    hist = np.zeros(n_max + 2, dtype=np.int64)
    hist[min(count, n_max + 1)] = 1
    return hist


def _cond_success_kernel(rng, scenario: ValidatedScenario, m: int, thresholds: np.ndarray) -> np.ndarray:
    p = scenario.params
    real = sample_conditioned(m, p, scenario.speed, scenario.t_gap, rng)
    dt = real.distances("t")
    fade = rng.gamma(p.fading.k, p.fading.omega, real.n)
    serving = rng.gamma(p.fading.k, p.fading.omega)
    h2 = p.height * p.height
    it = float(np.sum(fade * p.antenna.gain_at_sq(dt * dt) * (h2 + dt * dt) ** (-p.alpha / 2.0)))
    signal = p.antenna.g_main * serving * p.height ** (-p.alpha)
    return (signal >= thresholds * (it + p.noise)).astype(np.int64)


def _arr_dep_kernel(rng, scenario: ValidatedScenario, m: int) -> np.ndarray:
    p = scenario.params
    real = sample_conditioned(m, p, scenario.speed, scenario.t_gap, rng)
    dt = real.distances("t")
    inside = dt <= p.antenna.r_out
    departures = int(np.sum(~inside[:m]))
    arrivals = int(np.sum(inside[m:]))
    return np.array(
        [departures, departures * departures, arrivals, arrivals * arrivals],
        dtype=np.int64,
    )


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JointSuccessEstimate:
    joint: EstimatorResult
    marginal_0: EstimatorResult
    marginal_t: EstimatorResult
    retx_given_fail: EstimatorResult | None  # None when no failures occurred


def estimate_joint_success(
    scenario: ValidatedScenario,
    seed: int | None = None,
    workers: int = 1,
) -> JointSuccessEstimate:
    """Joint/marginal/conditional success estimates from one replication stream."""
    seed = scenario.seed if seed is None else seed
    reps = scenario.replications
    acc = _accumulate(_joint_kernel, (scenario,), reps, seed, _JOINT, workers, 5)
    joint_c, s0_c, st_c, retx_c, fail_c = (int(v) for v in acc)
    retx = _bernoulli_result(retx_c, fail_c, seed) if fail_c > 0 else None
    return JointSuccessEstimate(
        joint=_bernoulli_result(joint_c, reps, seed),
        marginal_0=_bernoulli_result(s0_c, reps, seed),
        marginal_t=_bernoulli_result(st_c, reps, seed),
        retx_given_fail=retx,
    )


def estimate_conditional_pmf(
    m: int,
    scenario: ValidatedScenario,
    n_max: int,
    seed: int | None = None,
    workers: int = 1,
):
    """Empirical pmf of the second-instant count given m initial interferers."""
    from .analytic import InterfererPmf

    seed = scenario.seed if seed is None else seed
    reps = scenario.replications
    acc = _accumulate(_pmf_kernel, (scenario, m, n_max), reps, seed, _PMF, workers, n_max + 2)
    probs = acc[: n_max + 1] / reps
    return InterfererPmf(m=m, t=scenario.t_gap, probs=probs, tail_mass=float(acc[-1] / reps))


def estimate_conditional_success(
    m: int,
    scenario: ValidatedScenario,
    thresholds: Sequence[float] | None = None,
    seed: int | None = None,
    workers: int = 1,
) -> list[EstimatorResult]:
    """Success probability at the second instant given m initial interferers.

    ``thresholds`` are linear SINR values; the default grid spans
    -20 dB to 10 dB in 2 dB steps.
    """
    if thresholds is None:
        thresholds = [db_to_linear(db) for db in range(-20, 12, 2)]
    grid = np.asarray(list(thresholds), dtype=float)
    seed = scenario.seed if seed is None else seed
    reps = scenario.replications
    acc = _accumulate(
        _cond_success_kernel, (scenario, m, grid), reps, seed, _COND_SUCCESS, workers, len(grid)
    )
    return [_bernoulli_result(int(c), reps, seed) for c in acc]


def estimate_arrivals_departures(
    m: int,
    scenario: ValidatedScenario,
    seed: int | None = None,
    workers: int = 1,
) -> tuple[EstimatorResult, EstimatorResult]:
    """Mean (arrivals, departures) of footprint crossings between the instants."""
    seed = scenario.seed if seed is None else seed
    reps = scenario.replications
    acc = _accumulate(_arr_dep_kernel, (scenario, m), reps, seed, _ARR_DEP, workers, 4)
    dep = _mean_result(int(acc[0]), int(acc[1]), reps, seed)
    arr = _mean_result(int(acc[2]), int(acc[3]), reps, seed)
    return arr, dep
