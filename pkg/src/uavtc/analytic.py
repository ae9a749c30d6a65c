"""Analytic results: interferer-count dynamics and correlated success.

Two families of results, both driven by the same geometry (nodes at a common
altitude, two-level sectorized gain over a circular footprint, a fraction of
nodes moving in a uniformly random direction between two observation
instants):

* Counting: the distribution of the number of in-footprint interferers at
  the second instant conditioned on the count at the first.  The survivors
  of the initial batch are binomially thinned by the per-node stay
  probability, while fresh arrivals from outside form an independent Poisson
  contribution.  Both rates reduce to one-dimensional integrals of the
  containment cdf.

* SINR: the probability that the serving link's SINR clears a threshold at
  both instants jointly, at each instant marginally, and at the second
  instant conditioned on a failure at the first.  With gamma fading of
  integer shape k the two-instant Laplace functional yields the joint
  probability as the sum of the first k x k Taylor coefficients, around
  (-1, -1), of

      exp(c*(s1+s2)*noise) * exp(E(s1, s2)),
      E(s1, s2) = -2*pi*lambda * int_0^inf [1 - A(x; s1) * B(x; s2)] x dx,

  where c = threshold * height^alpha / (omega * g_main), A is the
  gamma-fading factor of a static interferer at ground distance x and B
  averages the same factor over the interferer's random displacement.  The
  jets from :mod:`uavtc.numerics` compute those Taylor coefficients by
  carrying truncated series through the integrand itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .mobility import containment_cdf
from .model import NetworkParams, SpeedDistribution
from .numerics import (
    Jet2,
    QuadratureSpec,
    falling_factorial_log,
    integrate_detailed,
    integrate_jet,
    integrate_jet_detailed,
    jet_const,
    jet_exp,
    jet_mul,
    jet_powneg,
    jet_scale,
    jet_var1,
    jet_var2,
    log_binomial,
)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
_TAIL_EPS = 1e-9

# Tolerances tighten from the outermost (x) to the innermost (phi) level so
# inner noise never dominates the outer error estimate.
X_SPEC = QuadratureSpec(abs_tol=1e-9, rel_tol=1e-9, max_subdivisions=1000)
V_SPEC = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-10, max_subdivisions=1000)
PHI_SPEC = QuadratureSpec(abs_tol=1e-11, rel_tol=1e-11, max_subdivisions=1000)
RADIAL_SPEC = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-10, max_subdivisions=2000)


# ---------------------------------------------------------------------------
# Interferer counting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InterfererPmf:
    """Distribution of the in-footprint interferer count at the second instant.

    ``probs[n]`` is the probability of exactly n interferers; ``tail_mass``
    is whatever lies beyond the last computed index.
    """

    m: int
    t: float
    probs: np.ndarray
    tail_mass: float

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def mean(self) -> float:
        return float(np.arange(len(self.probs)) @ self.probs)


def _support_endpoints(speed: SpeedDistribution) -> tuple[float, ...]:
    if speed.atom is not None:
        return (speed.atom,)
    return (speed.support_min, speed.support_max)


def _radial_breakpoints(radii, speed: SpeedDistribution, t: float) -> set[float]:
    """Candidate kinks of x -> containment_cdf(r, x, ...) for r in radii."""
    pts: set[float] = set(radii)
    for r in radii:
        for s in _support_endpoints(speed):
            pts.update((abs(r - s * t), r + s * t, abs(s * t - r)))
    return pts


def footprint_ingress_integral(params: NetworkParams, speed: SpeedDistribution, t: float) -> float:
    """Probability that a node uniform in the footprint is still inside after t.

    Equals the integral of containment_cdf(r_out | x) against the uniform
    radial density 2x/r_out^2 over [0, r_out].
    """
    r_out = params.antenna.r_out
    if t == 0 or speed.support_max * t == 0:
        return 1.0
    kinks = _radial_breakpoints((r_out,), speed, t)

    def integrand(x: float) -> float:
        return containment_cdf(r_out, x, speed, t) * 2.0 * x / (r_out * r_out)

    value, _ = integrate_detailed(integrand, 0.0, r_out, RADIAL_SPEC, points=kinks)
    return min(max(value, 0.0), 1.0)


def footprint_egress_integral(params: NetworkParams, speed: SpeedDistribution, t: float) -> float:
    """Mean number of outside nodes that move into the footprint by t."""
    r_out = params.antenna.r_out
    reach = speed.support_max * t
    if params.lam == 0.0 or params.p_mobile == 0.0 or reach == 0.0:
        return 0.0
    upper = r_out + reach
    kinks = _radial_breakpoints((r_out,), speed, t)

    def integrand(x: float) -> float:
        return containment_cdf(r_out, x, speed, t) * x

    value, _ = integrate_detailed(integrand, r_out, upper, RADIAL_SPEC, points=kinks)
    return TWO_PI * params.lam * params.p_mobile * max(value, 0.0)


def mean_departures(m: int, params: NetworkParams, speed: SpeedDistribution, t: float) -> float:
    """Mean number of the m initial in-footprint nodes that leave by t."""
    if m < 0:
        raise ValueError("m must be >= 0")
    stay = footprint_ingress_integral(params, speed, t)
    return m * params.p_mobile * (1.0 - stay)


def _pow_log(base: float, exponent: int) -> float | None:
    """exponent*log(base) with the 0**0 = 1 convention; None marks a zero term."""
    if exponent == 0:
        return 0.0
    if base <= 0.0:
        return None
    return exponent * math.log(base)


def conditional_interferer_pmf(
    m: int,
    params: NetworkParams,
    speed: SpeedDistribution,
    t: float,
    n_max: int | None = None,
) -> InterfererPmf:
    """Pmf of the interferer count at the second instant given m at the first.

    Each term is assembled in the log domain and summed linearly; n_max
    defaults to the smallest index whose cumulative mass exceeds 1 - 1e-9,
    capped at m + ceil(A + 12*sqrt(A)) + 20 where A is the mean arrival count.
    """
    if m < 0 or not isinstance(m, int):
        raise ValueError("m must be a non-negative integer")
    stay_in = footprint_ingress_integral(params, speed, t)
    arrivals = footprint_egress_integral(params, speed, t)
    p = params.p_mobile
    depart_prob = p * (1.0 - stay_in)  # per initial node
    survive_prob = p * stay_in + (1.0 - p)

    cap = m + math.ceil(arrivals + 12.0 * math.sqrt(arrivals)) + 20
    limit = cap if n_max is None else n_max

    probs = []
    cum = 0.0
    for n in range(limit + 1):
        total = 0.0
        for i in range(min(n, m) + 1):
            pieces = [
                log_binomial(n, i),
                falling_factorial_log(m, i),
                -math.lgamma(n + 1),
                _pow_log(depart_prob, m - i),
                _pow_log(survive_prob, i),
                _pow_log(arrivals, n - i),
                -arrivals,
            ]
            if any(piece is None for piece in pieces):
                continue
            total += math.exp(sum(pieces))
        probs.append(total)
        cum += total
        if n_max is None and cum > 1.0 - _TAIL_EPS:
            break
    tail = max(0.0, 1.0 - cum)
    return InterfererPmf(m=m, t=float(t), probs=np.array(probs), tail_mass=tail)


def unconditional_interferer_pmf(params: NetworkParams, n_max: int | None = None) -> InterfererPmf:
    """Stationary Poisson count of in-footprint interferers (any instant)."""
    r_out = params.antenna.r_out
    mu = params.lam * math.pi * r_out * r_out
    cap = math.ceil(mu + 12.0 * math.sqrt(mu)) + 20
    limit = cap if n_max is None else n_max
    probs = []
    cum = 0.0
    for n in range(limit + 1):
        log_p = _pow_log(mu, n)
        val = 0.0 if log_p is None else math.exp(log_p - mu - math.lgamma(n + 1))
        if mu == 0.0 and n == 0:
            val = 1.0
        probs.append(val)
        cum += val
        if n_max is None and cum > 1.0 - _TAIL_EPS:
            break
    return InterfererPmf(m=0, t=0.0, probs=np.array(probs), tail_mass=max(0.0, 1.0 - cum))


# ---------------------------------------------------------------------------
# Correlated success probability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuccessReport:
    """Joint, marginal, and failure-conditioned success at one (t, threshold)."""

    p_joint: float
    p_marginal_0: float
    p_marginal_t: float
    p_retx_given_fail: float
    p_independent_joint: float
    quadrature_error_bound: float


class _ExponentContext:
    """Shared state for one Laplace-exponent integration."""

    def __init__(self, params, speed, t, threshold, s1_active, s2_active):
        self.params = params
        self.speed = speed
        self.t = float(t)
        self.threshold = float(threshold)
        k = params.fading.k
        orders = (k - 1, k - 1)
        point = (-1.0, -1.0)
        self.k = k
        self.one = jet_const(1.0, orders, point)
        self.s1 = jet_var1(orders, point) if s1_active else jet_const(0.0, orders, point)
        self.s2 = jet_var2(orders, point) if s2_active else jet_const(0.0, orders, point)
        self.s2_active = s2_active
        self.h2 = params.height * params.height
        self.half_alpha = params.alpha / 2.0
        self.mobile = (
            s2_active
            and params.p_mobile > 0.0
            and self.t > 0.0
            and speed.support_max > 0.0
        )
        self.x_max = (
            params.antenna.r_out + speed.support_max * self.t
            if self.mobile
            else params.antenna.r_out
        )

    def q_of_d2(self, d2: float) -> float:
        """Threshold-scaled received-power coefficient at squared distance d2."""
        g = self.params.antenna.gain_at_sq(d2)
        if g == 0.0:
            return 0.0
        ratio = (self.h2 / (self.h2 + d2)) ** self.half_alpha
        return (self.threshold / self.params.antenna.g_main) * ratio * g

    def factor(self, q: float, var: Jet2) -> Jet2:
        """Gamma-fading factor (1 - q*s)^(-k) as a jet in the given variable."""
        if q == 0.0:
            return self.one
        base = self.one - q * var
        # at s near -1 the constant term is 1 + q >= 1, never singular
        assert base.coeffs[0, 0] > 0.0
        return jet_powneg(base, self.k)

    # -- mobile interferer factor -------------------------------------------

    def _phi_splits(self, x: float, vt: float) -> list[float]:
        ant = self.params.antenna
        pts = []
        denom = 2.0 * x * vt
        for r in (ant.r_in, ant.r_out):
            arg = (x * x + vt * vt - r * r) / denom
            if -1.0 < arg < 1.0:
                pts.append(math.acos(arg))
        return pts

    def phi_average(self, x: float, v: float) -> Jet2:
        """Fading factor averaged over the uniform direction angle."""
        vt = v * self.t
        if x == 0.0 or vt == 0.0:
            return self.factor(self.q_of_d2(x * x + vt * vt), self.s2)
        if abs(x - vt) > self.params.antenna.r_out:
            # every direction leaves the node outside the footprint
            return self.one
        splits = self._phi_splits(x, vt)

        def integrand(phi: float) -> Jet2:
            d2 = x * x + vt * vt - 2.0 * x * vt * math.cos(phi)
            return self.factor(self.q_of_d2(d2), self.s2)

        avg = integrate_jet(integrand, 0.0, math.pi, PHI_SPEC, points=splits)
        return jet_scale(avg, 1.0 / math.pi)

    def _v_splits(self, x: float) -> set[float]:
        ant = self.params.antenna
        pts = set(self.speed.pdf_breakpoints)
        if self.t > 0.0:
            for r in (ant.r_in, ant.r_out):
                pts.update((abs(x - r) / self.t, (x + r) / self.t))
        return pts

    def mobile_factor(self, x: float) -> Jet2:
        atom = self.speed.atom
        if atom is not None:
            return self.phi_average(x, atom)

        def integrand(v: float) -> Jet2:
            return jet_scale(self.phi_average(x, v), self.speed.pdf(v))

        return integrate_jet(
            integrand,
            self.speed.support_min,
            self.speed.support_max,
            V_SPEC,
            points=self._v_splits(x),
        )

    # -- radial integrand ----------------------------------------------------

    def bracket(self, x: float) -> Jet2:
        q0 = self.q_of_d2(x * x)
        a_fac = self.factor(q0, self.s1)
        if self.mobile:
            p = self.params.p_mobile
            static_fac = self.factor(q0, self.s2) if p < 1.0 else None
            b_fac = jet_scale(self.mobile_factor(x), p)
            if static_fac is not None:
                b_fac = b_fac + jet_scale(static_fac, 1.0 - p)
        elif self.s2_active:
            b_fac = self.factor(q0, self.s2)
        else:
            b_fac = self.one
        return jet_scale(self.one - jet_mul(a_fac, b_fac), x)

    def x_breakpoints(self) -> set[float]:
        ant = self.params.antenna
        pts = {ant.r_in, ant.r_out}
        if self.mobile:
            pts |= _radial_breakpoints((ant.r_in, ant.r_out), self.speed, self.t)
        return pts


def _exponent_jet_detailed(params, speed, t, threshold, s1_active, s2_active):
    k = params.fading.k
    orders = (k - 1, k - 1)
    zero = jet_const(0.0, orders)
    if params.lam == 0.0 or threshold == 0.0:
        return zero, 0.0
    ctx = _ExponentContext(params, speed, t, threshold, s1_active, s2_active)
    raw, err = integrate_jet_detailed(ctx.bracket, 0.0, ctx.x_max, X_SPEC, points=ctx.x_breakpoints())
    scale = TWO_PI * params.lam
    return jet_scale(raw, -scale), err * scale


def laplace_exponent_jet(
    params: NetworkParams,
    speed: SpeedDistribution,
    t: float,
    threshold: float,
) -> Jet2:
    """Log of the two-instant interference Laplace functional as a jet.

    Evaluating exp of this jet at (s1, s2) = (-1, -1) and collecting Taylor
    coefficients yields the interference part of the success probability.
    """
    return _exponent_jet_detailed(params, speed, t, threshold, True, True)[0]


def _success_detailed(params, speed, t, threshold, s1_active, s2_active):
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    exponent, err = _exponent_jet_detailed(params, speed, t, threshold, s1_active, s2_active)
    ctx_orders = exponent.orders
    point = exponent.point
    s1 = jet_var1(ctx_orders, point) if s1_active else jet_const(0.0, ctx_orders, point)
    s2 = jet_var2(ctx_orders, point) if s2_active else jet_const(0.0, ctx_orders, point)
    h = params.height
    c = threshold * h**params.alpha / (params.fading.omega * params.antenna.g_main)
    noise_jet = jet_scale(s1 + s2, c * params.noise)
    full = jet_mul(jet_exp(noise_jet), jet_exp(exponent))
    value = float(full.coeffs.sum())
    if value > 1.0 + _TAIL_EPS or value < -_TAIL_EPS:
        log.warning("success probability %.3e outside [0, 1]; clamping", value)
    return min(max(value, 0.0), 1.0), err


def joint_success(
    params: NetworkParams,
    speed: SpeedDistribution,
    t: float,
    threshold: float,
) -> float:
    """P{SINR over threshold at both instants}."""
    return _success_detailed(params, speed, t, threshold, True, True)[0]


def marginal_success(
    params: NetworkParams,
    speed: SpeedDistribution,
    t: float,
    threshold: float,
    which: str = "time0",
) -> float:
    """Single-instant success probability; ``which`` is "time0" or "timeT".

    By stationarity of the displaced point process the two marginals agree;
    both routes are kept because they exercise different integrals.
    """
    if which == "time0":
        return _success_detailed(params, speed, t, threshold, True, False)[0]
    if which == "timeT":
        return _success_detailed(params, speed, t, threshold, False, True)[0]
    raise ValueError("which must be 'time0' or 'timeT'")


def retransmission_report(
    params: NetworkParams,
    speed: SpeedDistribution,
    t: float,
    threshold: float,
) -> SuccessReport:
    """Joint/marginal success and the failure-conditioned retry success.

    The conditional is (p_marginal_t - p_joint) / (1 - p_marginal_0); it is
    undefined when the first-instant failure event has vanishing probability.
    """
    p_m0, err0 = _success_detailed(params, speed, t, threshold, True, False)
    if p_m0 >= 1.0 - 1e-12:
        raise ValueError("failure event has vanishing probability; conditional undefined")
    p_mt, err_t = _success_detailed(params, speed, t, threshold, False, True)
    p_joint, err_j = _success_detailed(params, speed, t, threshold, True, True)
    if p_joint > min(p_m0, p_mt) + _TAIL_EPS:
        log.warning(
            "joint success %.12g exceeds a marginal (%.12g, %.12g)", p_joint, p_m0, p_mt
        )
    p_joint = min(p_joint, p_m0, p_mt)
    retx = (p_mt - p_joint) / (1.0 - p_m0)
    return SuccessReport(
        p_joint=p_joint,
        p_marginal_0=p_m0,
        p_marginal_t=p_mt,
        p_retx_given_fail=min(max(retx, 0.0), 1.0),
        p_independent_joint=p_m0 * p_mt,
        quadrature_error_bound=err0 + err_t + err_j,
    )
