"""Random-waypoint mobility.

Each node walks in a straight line toward its waypoint at its drawn speed,
pauses there, then draws a fresh uniform waypoint and a fresh uniform speed.
Positions never leave the rectangular field.  All randomness comes from the
caller-supplied rng so runs replay exactly.
"""

import math


class MobilityState:
    """Kinematic state of one node, advanced tick by tick."""

    __slots__ = ("x", "y", "wx", "wy", "speed", "pause_remaining_s")

    def __init__(self, x, y, wx, wy, speed, pause_remaining_s=0.0):
        self.x = x
        self.y = y
        self.wx = wx
        self.wy = wy
        self.speed = speed
        self.pause_remaining_s = pause_remaining_s

    def position(self):
        return (self.x, self.y)


def initial_state(area_w, area_h, params, rng) -> MobilityState:
    """Place a node uniformly and give it a first waypoint and speed."""
    x = rng.uniform(0.0, area_w)
    y = rng.uniform(0.0, area_h)
    wx = rng.uniform(0.0, area_w)
    wy = rng.uniform(0.0, area_h)
    speed = rng.uniform(params.v_min_m_s, params.v_max_m_s)
    return MobilityState(x, y, wx, wy, speed)


def _redraw(state, area_w, area_h, params, rng):
    state.wx = rng.uniform(0.0, area_w)
    state.wy = rng.uniform(0.0, area_h)
    state.speed = rng.uniform(params.v_min_m_s, params.v_max_m_s)


def advance(state: MobilityState, dt: float, area_w, area_h, params, rng) -> MobilityState:
    """Advance one node by dt seconds, in place.

    Consumes pause time first, then moves toward the waypoint, clamping at
    arrival.  Hitting the waypoint starts a pause of pause_time_s; once the
    pause is spent a new waypoint and speed are drawn from rng.  A node with
    speed 0 never arrives and therefore never redraws.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    remaining = dt
    while remaining > 0.0:
        if state.pause_remaining_s > 0.0:
            consumed = min(state.pause_remaining_s, remaining)
            state.pause_remaining_s -= consumed
            remaining -= consumed
            if state.pause_remaining_s > 0.0:
                break
            _redraw(state, area_w, area_h, params, rng)
            continue
        if state.speed <= 0.0:
            break
        dist = math.hypot(state.wx - state.x, state.wy - state.y)
        travel = state.speed * remaining
        if travel >= dist:
            # Arrive exactly at the waypoint, then start the pause.
            state.x = state.wx
            state.y = state.wy
            remaining -= dist / state.speed
            if params.pause_time_s > 0.0:
                state.pause_remaining_s = params.pause_time_s
            else:
                _redraw(state, area_w, area_h, params, rng)
        else:
            frac = travel / dist
            state.x += (state.wx - state.x) * frac
            state.y += (state.wy - state.y) * frac
            remaining = 0.0
    # Float drift can only come from the interpolation above; clamp anyway.
    state.x = min(max(state.x, 0.0), area_w)
    state.y = min(max(state.y, 0.0), area_h)
    return state
