"""Risk-bounded envelopes over uncertain observations.

Each observed agent carries a discrete distribution of worst-case envelopes,
one per confidence contour, with mass p_k - p_{k-1}; the mass outside the
outermost contour goes to a most-restrictive sentinel so risk is never
understated.  The combined envelope is solved component-wise so that the
probability of the true envelope being strictly more restrictive stays below
the requested risk level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rss import (
    AgentState,
    COMPONENTS,
    Envelope,
    RssParams,
    pair_analysis_batch,
    pairwise_envelope_batch,
    restrictive_sentinel,
    safety_violated,
    violation_batch,
    wrap_angle,
)
from .uncertainty import EigenBasis, StateDeviation, UncertaintySpec, sample_contour

MASS_TOL = 1e-12


@dataclass(frozen=True)
class ContourEnvelope:
    """Worst-case envelope over one confidence contour of one agent."""

    agent_id: int
    contour_index: int
    probability_mass: float  # p_k - p_{k-1}
    envelope: Envelope


@dataclass(frozen=True)
class EnvelopeDistribution:
    """Discrete distribution over worst-case envelopes for one agent.

    The residual mass (beyond the outermost contour) maps to the sentinel.
    """

    agent_id: int
    entries: tuple[ContourEnvelope, ...]
    residual_mass: float

    def __post_init__(self):
        total = sum(e.probability_mass for e in self.entries) + self.residual_mass
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"envelope distribution mass is {total}, expected 1")
        if self.residual_mass < 0.0:
            raise ValueError("residual mass must be >= 0")


def perturbed_state_arrays(obs: AgentState, deviations: np.ndarray):
    """Observed state plus deviations, with speeds clamped at 0 and headings
    wrapped.  ``deviations`` is an (n, 4) array of (dx, dy, dv, dtheta)."""
    d = np.asarray(deviations, dtype=float)
    if d.ndim != 2 or d.shape[1] != 4:
        raise ValueError(f"deviations must have shape (n, 4), got {d.shape}")
    ox = obs.x + d[:, 0]
    oy = obs.y + d[:, 1]
    ov = np.maximum(obs.v + d[:, 2], 0.0)
    ot = wrap_angle(obs.theta + d[:, 3])
    return ox, oy, ov, ot


def _as_deviation_array(deviations) -> np.ndarray:
    if isinstance(deviations, np.ndarray):
        return deviations
    rows = [d.as_array() if isinstance(d, StateDeviation) else np.asarray(d, dtype=float)
            for d in deviations]
    if not rows:
        return np.empty((0, 4))
    return np.stack(rows)


def worst_case_contour_envelope(ego: AgentState, obs: AgentState, deviations,
                                params: RssParams, tau: float) -> Envelope:
    """Component-wise most restrictive envelope over all perturbed states."""
    d = _as_deviation_array(deviations)
    if d.shape[0] == 0:
        raise ValueError("at least one deviation is required")
    ox, oy, ov, ot = perturbed_state_arrays(obs, d)
    lon_max, lat_min, lat_max = pairwise_envelope_batch(ego, ox, oy, ov, ot, params, tau)
    return Envelope(-params.a_lon_limit, float(lon_max.min()),
                    float(lat_min.max()), float(lat_max.min()))


def contour_deviation_sets(basis: EigenBasis, spec: UncertaintySpec) -> list[np.ndarray]:
    """Deviation samples for every contour level; cacheable per covariance."""
    return [sample_contour(basis, p, spec.n_phi) for p in spec.contour_levels]


def analyze_agent(ego: AgentState, obs: AgentState, spec: UncertaintySpec,
                  basis: EigenBasis, params: RssParams, tau: float,
                  agent_id: int = 0,
                  deviation_sets=None) -> tuple[EnvelopeDistribution, float]:
    """Envelope distribution and violation expectation of one agent in a
    single pass over all contour samples.

    Zero covariance collapses every contour onto the observation itself: the
    whole mass sits on the point envelope, the sentinel is bypassed, and the
    expectation is the plain violation indicator.
    """
    if basis.max_eigenvalue <= 0.0:
        point = worst_case_contour_envelope(ego, obs, np.zeros((1, 4)), params, tau)
        entry = ContourEnvelope(agent_id, 0, 1.0, point)
        dist = EnvelopeDistribution(agent_id, (entry,), 0.0)
        return dist, (1.0 if safety_violated(ego, [obs], params) else 0.0)
    if deviation_sets is None:
        deviation_sets = contour_deviation_sets(basis, spec)
    counts = [d.shape[0] for d in deviation_sets]
    ox, oy, ov, ot = perturbed_state_arrays(obs, np.concatenate(deviation_sets))
    lon_max, lat_min, lat_max, violated = pair_analysis_batch(
        ego, ox, oy, ov, ot, params, tau)
    entries = []
    expectation = 1.0 - spec.contour_levels[-1]  # residual counted as violated
    prev = 0.0
    start = 0
    for k, (p_k, m) in enumerate(zip(spec.contour_levels, counts)):
        sl = slice(start, start + m)
        start += m
        env = Envelope(-params.a_lon_limit, float(lon_max[sl].min()),
                       float(lat_min[sl].max()), float(lat_max[sl].min()))
        entries.append(ContourEnvelope(agent_id, k, p_k - prev, env))
        if violated[sl].any():
            expectation += p_k - prev
        prev = p_k
    return EnvelopeDistribution(agent_id, tuple(entries), 1.0 - prev), expectation


def envelope_distribution(ego: AgentState, obs: AgentState, spec: UncertaintySpec,
                          basis: EigenBasis, params: RssParams, tau: float,
                          agent_id: int = 0, deviation_sets=None) -> EnvelopeDistribution:
    """Per-agent random envelope over the confidence contours."""
    dist, _ = analyze_agent(ego, obs, spec, basis, params, tau,
                            agent_id=agent_id, deviation_sets=deviation_sets)
    return dist


def risk_bounded_envelope(distributions, beta: float, params: RssParams) -> Envelope:
    """Least restrictive envelope whose probability of being less restrictive
    than the combined worst-case envelope stays within ``beta``.

    Solved per component: walk candidate values from most to least
    restrictive, accumulating per-agent mass strictly more restrictive than
    the candidate; the combined probability 1 - prod_j(1 - P_j) must not
    exceed beta.
    """
    distributions = list(distributions)
    if not distributions:
        raise ValueError("at least one envelope distribution is required")
    if not (0.0 <= beta <= 1.0):
        raise ValueError(f"risk level must lie in [0, 1], got {beta}")
    sentinel = restrictive_sentinel(params)
    values = {}
    for name, orientation in COMPONENTS:
        # Per-agent support: value -> mass, including the sentinel residual.
        supports = []
        for dist in distributions:
            support: dict[float, float] = {}
            if dist.residual_mass > 0.0:
                support[getattr(sentinel, name)] = dist.residual_mass
            for entry in dist.entries:
                v = getattr(entry.envelope, name)
                support[v] = support.get(v, 0.0) + entry.probability_mass
            supports.append(support)
        candidates = sorted({v for s in supports for v in s},
                            key=lambda v: orientation * v)
        cum = [0.0] * len(supports)
        best = candidates[0]
        for v in candidates:
            survive = 1.0
            for c in cum:
                survive *= 1.0 - c
            # Mass that is certain to be more restrictive is never discarded,
            # so beta = 1 still respects any agent's full support.
            if 1.0 - survive <= beta and survive > 0.0:
                best = v
            else:
                break
            for j, s in enumerate(supports):
                cum[j] += s.get(v, 0.0)
        values[name] = best
    return Envelope(**values)


def violation_expectation(ego: AgentState, obs: AgentState, spec: UncertaintySpec,
                          basis: EigenBasis, params: RssParams,
                          deviation_sets=None) -> float:
    """Expected violation indicator for one agent over the contour masses.

    A contour counts as violated if any of its sampled perturbed states
    breaks both safe distances; the residual mass counts as violated.
    """
    if basis.max_eigenvalue <= 0.0:
        return 1.0 if safety_violated(ego, [obs], params) else 0.0
    if deviation_sets is None:
        deviation_sets = contour_deviation_sets(basis, spec)
    expectation = 1.0 - spec.contour_levels[-1]  # residual counted as violated
    prev = 0.0
    for p_k, devs in zip(spec.contour_levels, deviation_sets):
        ox, oy, ov, ot = perturbed_state_arrays(obs, devs)
        if violation_batch(ego, ox, oy, ov, ot, params).any():
            expectation += p_k - prev
        prev = p_k
    return expectation


def agent_analyses(ego: AgentState, observations, spec: UncertaintySpec,
                   basis: EigenBasis, params: RssParams, tau: float,
                   deviation_sets=None):
    """analyze_agent over a list of observed agents; returns
    (distributions, expectations)."""
    dists = []
    expectations = []
    for j, obs in enumerate(observations):
        dist, exp = analyze_agent(ego, obs, spec, basis, params, tau,
                                  agent_id=j, deviation_sets=deviation_sets)
        dists.append(dist)
        expectations.append(exp)
    return dists, expectations


def should_switch(expectations, beta: float) -> bool:
    """Probabilistic switch: some agent's expected violation strictly exceeds beta."""
    return any(e > beta for e in expectations)
