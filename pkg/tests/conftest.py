"""Shared oracles and helpers.

The oracles deliberately avoid the library's fast paths: explicit braking
profile simulation, discretized acceleration search, and exhaustive joint
enumeration of envelope distributions.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from riskenv.rss import (
    AgentState,
    COMPONENTS,
    Envelope,
    RssParams,
    restrictive_sentinel,
    safe_distance_lat,
    safe_distance_lon,
)


def simulate_lon_profile(v_rear: float, v_front: float, gap0: float,
                         params: RssParams, dt: float = 1e-3) -> bool:
    """Braking-profile oracle: True iff the gap never goes negative.

    Rear accelerates at a_max for rho then brakes at b_min until stopped;
    front brakes at b_max until stopped.
    """
    vr, vf = v_rear, v_front
    gap = gap0
    t = 0.0
    while vr > 0.0 or vf > 0.0 or t <= params.rho:
        a_r = params.a_max_accel_lon if t < params.rho else -params.b_min_brake_lon
        if vr == 0.0 and a_r < 0.0:
            a_r = 0.0
        a_f = -params.b_max_brake_lon
        vr2 = max(vr + a_r * dt, 0.0)
        vf2 = max(vf + a_f * dt, 0.0)
        gap += 0.5 * (vf + vf2) * dt - 0.5 * (vr + vr2) * dt
        vr, vf = vr2, vf2
        t += dt
        if gap < 0.0:
            return False
        if t > 60.0:
            break
    return gap >= 0.0


def simulate_lat_profile(v1_toward: float, v2_toward: float, gap0: float,
                         params: RssParams, dt: float = 1e-3) -> float:
    """Worst-case lateral closing oracle: minimum gap reached when both sides
    accelerate toward each other for rho and then brake until their closing
    speed is gone.  Returns the minimum gap (can be negative)."""
    v1, v2 = v1_toward, v2_toward
    gap = gap0
    min_gap = gap0
    t = 0.0
    while True:
        a1 = params.a_max_accel_lat if t < params.rho else -params.b_min_brake_lat
        a2 = params.a_max_accel_lat if t < params.rho else -params.b_min_brake_lat
        if t >= params.rho and v1 <= 0.0:
            a1, v1 = 0.0, max(v1, 0.0)
        if t >= params.rho and v2 <= 0.0:
            a2, v2 = 0.0, max(v2, 0.0)
        v1n = v1 + a1 * dt
        v2n = v2 + a2 * dt
        gap -= 0.5 * (v1 + v1n) * dt + 0.5 * (v2 + v2n) * dt
        v1, v2 = v1n, v2n
        min_gap = min(min_gap, gap)
        t += dt
        if t >= params.rho and v1 <= 0.0 and v2 <= 0.0:
            return min_gap
        if t > 60.0:
            return min_gap


def oracle_max_lon_accel(ego: AgentState, other: AgentState, params: RssParams,
                         tau: float, n_grid: int = 3201) -> float:
    """Largest ego acceleration (discretized grid) keeping the longitudinal
    gap at tau at or above the safe distance at post-tau speeds; the ego is
    the rear vehicle and the front worst-case brakes at b_max."""
    u = ego.v * math.cos(ego.theta)
    w = other.v * math.cos(other.theta)
    gap = abs(other.x - ego.x) - params.length
    best = -params.a_lon_limit
    for a in np.linspace(-params.a_lon_limit, params.a_lon_limit, n_grid):
        t_stop = u / -a if a < 0.0 and u + a * tau < 0.0 else tau
        de = u * t_stop + 0.5 * a * t_stop * t_stop
        ue = max(u + a * tau, 0.0)
        tf = min(tau, w / params.b_max_brake_lon)
        df = w * tf - 0.5 * params.b_max_brake_lon * tf * tf
        wf = max(w - params.b_max_brake_lon * tau, 0.0)
        if gap + df - de >= safe_distance_lon(ue, wf, params):
            best = max(best, float(a))
    return best


def enumerate_risk_envelope(distributions, beta: float, params: RssParams) -> Envelope:
    """Brute-force oracle for the component-wise risk-bounded solve.

    Enumerates the full joint support (agents independent), computes the
    distribution of the component-wise most restrictive combination, and
    picks the least restrictive candidate whose probability of a strictly
    more restrictive combined value stays within beta.
    """
    sentinel = restrictive_sentinel(params)
    out = {}
    for name, orientation in COMPONENTS:
        supports = []
        for dist in distributions:
            support = [(getattr(e.envelope, name), e.probability_mass)
                       for e in dist.entries]
            if dist.residual_mass > 0.0:
                support.append((getattr(sentinel, name), dist.residual_mass))
            supports.append(support)
        combined = {}  # most restrictive value across agents -> mass
        for combo in itertools.product(*supports):
            mass = 1.0
            for _, m in combo:
                mass *= m
            worst = combo[0][0]
            for v, _ in combo[1:]:
                if orientation * v < orientation * worst:
                    worst = v
            combined[worst] = combined.get(worst, 0.0) + mass
        # Candidates are every support value of every agent, like the solver's
        # iteration rule; the CDF they are checked against comes from the
        # enumerated joint distribution.
        candidates = sorted({v for s in supports for v, _ in s},
                            key=lambda v: orientation * v)
        best = candidates[0]
        for cand in candidates:
            below = sum(m for v, m in combined.items()
                        if orientation * v < orientation * cand)
            if below <= beta and below < 1.0:
                best = cand
        out[name] = best
    return Envelope(**out)


@pytest.fixture
def rss_params() -> RssParams:
    return RssParams()


@pytest.fixture
def legacy_params() -> RssParams:
    """Parameter set used by several frozen-value examples."""
    return RssParams(rho=1.0, a_max_accel_lon=3.5, b_min_brake_lon=4.0,
                     b_max_brake_lon=8.0)
