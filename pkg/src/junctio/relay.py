"""Delayed relay (thermostat) operator and hybrid trajectory integration.

The relay keeps a discrete mode (the active branch id) that switches only
when the position crosses the far threshold, so trajectories cannot
chatter. Twofold: the position is continuous across switches. Threefold:
a switch at x <= -eps_mode teleports the state to +eps_next on the next
branch of the cycle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import scalar_fn

__all__ = [
    "RelayState",
    "TrajectoryRecord",
    "RelayError",
    "relay_step",
    "simulate",
    "best_rollout",
]


class RelayError(ValueError):
    """Incoherent relay state or invalid simulation input."""


@dataclass(frozen=True)
class RelayState:
    """Discrete mode (branch id) plus continuous position."""

    mode: int
    position: float

    def check_coherent(self, config, slack=1e-9):
        eps = config.thresholds[self.mode]
        if config.kind == "twofold":
            # outside the hysteresis band the mode is forced
            if self.position > eps + slack and self.mode != 1:
                raise RelayError(f"x={self.position} > {eps} forces mode 1")
            if self.position < -eps - slack and self.mode != -1:
                raise RelayError(f"x={self.position} < {-eps} forces mode -1")
        else:
            if self.position < -eps - slack:
                raise RelayError(
                    f"x={self.position} below branch threshold {-eps}"
                )


@dataclass
class TrajectoryRecord:
    """Sampled hybrid trajectory with switch events and discounted cost.

    ``samples`` rows are (t, x, mode, control); ``switch_events`` rows are
    (t, from_mode, to_mode, x_before, x_after).
    """

    samples: list[tuple[float, float, int, float]]
    switch_events: list[tuple[float, int, int, float, float]]
    discounted_cost: float
    horizon: float
    running_cost: list[float] = field(default_factory=list)

    @property
    def final_state(self):
        t, x, mode, _ = self.samples[-1]
        return RelayState(mode=mode, position=x)

    def write_csv(self, path):
        events = {round(t, 12) for t, *_ in self.switch_events}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,x,mode,control,running_cost,switch\n")
            for (t, x, mode, a), rc in zip(self.samples, self.running_cost):
                flag = 1 if round(t, 12) in events else 0
                fh.write(f"{t:.12g},{x:.12g},{mode},{a:.12g},{rc:.12g},{flag}\n")


def relay_step(state, new_position, config):
    """Advance the relay given the next position; fires the switching rule.

    Returns the updated state. The position itself is taken as given
    (continuous dynamics are the caller's job) except for the threefold
    teleport, which overrides it.
    """
    state.check_coherent(config)
    mode = state.mode
    if config.kind == "twofold":
        eps = config.thresholds[mode]
        if mode == 1 and new_position < -eps:
            mode = -1
        elif mode == -1 and new_position > eps:
            mode = 1
        return RelayState(mode=mode, position=float(new_position))
    eps = config.thresholds[mode]
    if new_position <= -eps:
        nxt = config.next_mode(mode)
        return RelayState(mode=nxt, position=config.thresholds[nxt])
    return RelayState(mode=mode, position=float(new_position))


def _policy_control(policy, t, mode):
    """Resolve a control value from the supported policy shapes.

    A policy is a constant, a dict keyed by mode, a callable (t, mode) ->
    a, or a sorted list of (start_time, control) segments.
    """
    if callable(policy):
        return float(policy(t, mode))
    if isinstance(policy, dict):
        return float(policy[mode])
    if isinstance(policy, (list, tuple)):
        a = policy[0][1]
        for t0, val in policy:
            if t >= t0 - 1e-15:
                a = val
        return float(a)
    return float(policy)


def _crossing_fraction(x0, x1, threshold):
    """Fraction of the step at which the segment x0 -> x1 hits threshold."""
    return (threshold - x0) / (x1 - x0)


def simulate(scenario, config, start, policy, horizon, dt):
    """Integrate the thermostatic system with explicit first-order steps.

    Threshold crossings inside a step are located by linear interpolation
    and inserted as integration nodes, so switches happen at the
    (first-order accurate) crossing time rather than at the next grid
    time. The discounted cost uses the exact exponential weight over each
    constant-rate piece: ell * e^{-lam t} (1 - e^{-lam dt}) / lam.
    """
    if dt <= 0:
        raise RelayError("dt must be positive")
    if horizon < 0:
        raise RelayError("horizon must be nonnegative")
    config.check_against(scenario)
    start.check_coherent(config)
    lam = scenario.lam
    dyn = {b.id: (scalar_fn(b.dynamics), scalar_fn(b.cost)) for b in scenario.branches}
    t = 0.0
    # a start sitting on its own switching threshold fires immediately
    state = relay_step(start, start.position, config)
    events = []
    if state.mode != start.mode:
        events.append((0.0, start.mode, state.mode, start.position, state.position))
    a = _policy_control(policy, t, state.mode)
    samples = [(t, state.position, state.mode, a)]
    running = [0.0]
    cost = 0.0
    tol = 1e-15
    while t < horizon - tol:
        step = min(dt, horizon - t)
        a = _policy_control(policy, t, state.mode)
        f_fn, l_fn = dyn[state.mode]
        x0 = state.position
        fx = f_fn(x0, a)
        lx = l_fn(x0, a)
        if not (math.isfinite(fx) and math.isfinite(lx)):
            raise RelayError(f"non-finite dynamics/cost at x={x0}, a={a}")
        x1 = x0 + step * fx
        # event detection: does this step cross the active threshold?
        frac = None
        threshold = None
        if config.kind == "twofold":
            eps = config.thresholds[state.mode]
            target = -eps if state.mode == 1 else eps
            if state.mode == 1 and x0 > target and x1 < target:
                frac = _crossing_fraction(x0, x1, target)
                threshold = target
            elif state.mode == -1 and x0 < target and x1 > target:
                frac = _crossing_fraction(x0, x1, target)
                threshold = target
        else:
            target = -config.thresholds[state.mode]
            if x0 > target and x1 <= target:
                frac = _crossing_fraction(x0, x1, target)
                threshold = target
        if frac is not None:
            step *= frac
            x1 = threshold
        # exact discounted cost of a constant-rate piece
        cost += lx * math.exp(-lam * t) * (1.0 - math.exp(-lam * step)) / lam
        t += step
        if frac is not None and config.kind == "twofold":
            # the untruncated step strictly crossed the far threshold, so
            # the relay fires even though the event node sits exactly on it
            new_state = RelayState(mode=-state.mode, position=x1)
        else:
            new_state = relay_step(RelayState(state.mode, x0), x1, config)
        if new_state.mode != state.mode:
            events.append((t, state.mode, new_state.mode, x1, new_state.position))
        state = new_state
        samples.append((t, state.position, state.mode, a))
        running.append(cost)
    return TrajectoryRecord(
        samples=samples,
        switch_events=events,
        discounted_cost=cost,
        horizon=t,
        running_cost=running,
    )


_MAX_COMBOS = 200_000


def best_rollout(scenario, config, start, horizon, dt, switch_budget=3, n_durations=6):
    """Brute-force upper bound on the thermostatic value at ``start``.

    Enumerates piecewise-constant policies with at most ``switch_budget``
    segments; segment boundaries are drawn from a coarse quantization of
    the horizon. Returns (record, cost) of the cheapest trajectory.
    """
    if switch_budget > 6:
        raise RelayError("switch_budget capped at 6 segments")
    controls = list(scenario.controls)
    n_segments = switch_budget
    durations = np.linspace(horizon / n_durations, horizon, n_durations)
    n_combos = (len(controls) * n_durations) ** max(0, n_segments - 1) * len(controls)
    if n_combos > _MAX_COMBOS:
        raise RelayError(f"rollout search space {n_combos} exceeds cap {_MAX_COMBOS}")
    best = None
    best_cost = math.inf
    # last segment runs to the horizon, so only earlier segments need durations
    for seg_controls in itertools.product(controls, repeat=n_segments):
        for seg_durs in itertools.product(durations, repeat=n_segments - 1):
            schedule = []
            t0 = 0.0
            for k, a in enumerate(seg_controls):
                schedule.append((t0, a))
                if k < n_segments - 1:
                    t0 += seg_durs[k]
            if t0 > horizon:
                continue
            rec = simulate(scenario, config, start, schedule, horizon, dt)
            if rec.discounted_cost < best_cost:
                best_cost = rec.discounted_cost
                best = rec
    return best, best_cost
