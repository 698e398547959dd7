"""Random-waypoint mobility without the classic startup bias.

Two well-known pathologies of naive random waypoint are avoided here:

* speed decay: sampling per-leg speed uniformly makes the time-average
  speed drift downward forever (slow legs take longer, so slow speeds
  accumulate occupancy).  We sample per-leg speed with density
  proportional to v on (0, vmax], which makes the process stationary
  with a Uniform(0, vmax] time-average speed law and mean vmax / 2.

* startup transient: dropping nodes uniformly at random over-weights
  the border relative to the long-run position law.  Initial positions
  are drawn from the stationary distribution directly by picking a
  random leg with probability proportional to its length and placing
  the node uniformly along it; the initial speed comes from the
  stationary (uniform) speed law.

A max_speed of zero degrades to a static node whose position is still
drawn from the stationary spatial law, so static and mobile scenarios
share one placement density.
"""

from __future__ import annotations

import math
import random
from typing import Optional


def sample_leg(rng: random.Random, area_w: float, area_h: float
               ) -> tuple[float, float, float, float]:
    """Draw a waypoint pair with probability proportional to the leg
    length (rejection against the diagonal)."""
    diag = math.hypot(area_w, area_h)
    while True:
        x1 = rng.uniform(0.0, area_w)
        y1 = rng.uniform(0.0, area_h)
        x2 = rng.uniform(0.0, area_w)
        y2 = rng.uniform(0.0, area_h)
        length = math.hypot(x2 - x1, y2 - y1)
        if length > 0.0 and rng.random() < length / diag:
            return x1, y1, x2, y2


def stationary_position(rng: random.Random, area_w: float, area_h: float
                        ) -> tuple[float, float]:
    """One draw from the long-run random-waypoint position law."""
    x1, y1, x2, y2 = sample_leg(rng, area_w, area_h)
    u = rng.random()
    return x1 + u * (x2 - x1), y1 + u * (y2 - y1)


def _leg_speed(rng: random.Random, max_speed: float) -> float:
    """Per-leg speed with density proportional to v on (0, vmax]."""
    while True:
        v = max_speed * math.sqrt(rng.random())
        if v > 0.0:
            return v


def _stationary_speed(rng: random.Random, max_speed: float) -> float:
    """Time-average speed law of the stationary process: Uniform(0, vmax]."""
    while True:
        v = rng.uniform(0.0, max_speed)
        if v > 0.0:
            return v


class Walker:
    """Mobility state of a single node.

    ``advance(dt)`` moves the node dt seconds along its current leg,
    consuming pauses and re-sampling waypoints as needed, and returns
    the new position.  All randomness comes from the injected rng.
    """

    __slots__ = ("rng", "area_w", "area_h", "max_speed", "pause_s",
                 "x", "y", "wx", "wy", "speed", "pause_left")

    def __init__(self, rng: random.Random, area_w: float, area_h: float,
                 max_speed: float, pause_s: float = 0.0,
                 position: Optional[tuple[float, float]] = None):
        if max_speed < 0:
            raise ValueError("max_speed must be >= 0")
        self.rng = rng
        self.area_w = float(area_w)
        self.area_h = float(area_h)
        self.max_speed = float(max_speed)
        self.pause_s = float(pause_s)
        self.pause_left = 0.0
        if max_speed == 0.0:
            x, y = position if position is not None else \
                stationary_position(rng, area_w, area_h)
            self.x, self.y = x, y
            self.wx, self.wy = x, y
            self.speed = 0.0
            return
        if position is not None:
            self.x, self.y = float(position[0]), float(position[1])
            self.wx = rng.uniform(0.0, area_w)
            self.wy = rng.uniform(0.0, area_h)
        else:
            x1, y1, x2, y2 = sample_leg(rng, area_w, area_h)
            u = rng.random()
            self.x = x1 + u * (x2 - x1)
            self.y = y1 + u * (y2 - y1)
            self.wx, self.wy = x2, y2
        self.speed = _stationary_speed(rng, self.max_speed)

    @property
    def position(self) -> tuple[float, float]:
        return self.x, self.y

    def _next_leg(self) -> None:
        self.wx = self.rng.uniform(0.0, self.area_w)
        self.wy = self.rng.uniform(0.0, self.area_h)
        self.speed = _leg_speed(self.rng, self.max_speed)

    def advance(self, dt_s: float) -> tuple[float, float]:
        if self.max_speed == 0.0 or dt_s <= 0.0:
            return self.x, self.y
        remaining = dt_s
        while remaining > 1e-12:
            if self.pause_left > 0.0:
                wait = min(self.pause_left, remaining)
                self.pause_left -= wait
                remaining -= wait
                continue
            dx = self.wx - self.x
            dy = self.wy - self.y
            dist = math.hypot(dx, dy)
            if dist <= self.speed * remaining + 1e-12:
                # reaches the waypoint inside this step
                self.x, self.y = self.wx, self.wy
                if self.speed > 0.0:
                    remaining -= dist / self.speed
                self.pause_left = self.pause_s
                self._next_leg()
            else:
                frac = self.speed * remaining / dist
                self.x += dx * frac
                self.y += dy * frac
                remaining = 0.0
        return self.x, self.y
