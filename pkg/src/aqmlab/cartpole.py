"""Inverted-pendulum-on-cart benchmark used to validate the map before it
ever drives a queue.

A reference linear controller supplies the teaching signal; the map learns
the mapping (previous angle, current angle) -> force. A trained map must
keep the pole upright on its own, which exercises winner lookup,
neighbourhood learning and the supervised output layer end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import engine
from .som import LearnParams, SomMap

GRAVITY = 9.8  # m/s^2
CART_MASS = 1.0  # kg
POLE_MASS = 0.1  # kg
POLE_HALF_LENGTH = 0.5  # m
TIME_STEP = 0.02  # s
FAIL_ANGLE = 12.0 * math.pi / 180.0  # rad

FORCE_MAX = 10.0  # N
KP = 40.0  # teacher gain on angle, N/rad
KD = 8.0  # teacher gain on angular velocity, N s/rad


@dataclass
class CartPole:
    """Cart-pole state advanced by explicit Euler steps."""

    x: float = 0.0
    x_dot: float = 0.0
    theta: float = 0.0
    theta_dot: float = 0.0

    def step(self, force: float) -> None:
        total_mass = CART_MASS + POLE_MASS
        sin_t = math.sin(self.theta)
        cos_t = math.cos(self.theta)
        temp = (force + POLE_MASS * POLE_HALF_LENGTH * self.theta_dot ** 2 * sin_t) / total_mass
        theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
            POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t ** 2 / total_mass)
        )
        x_acc = temp - POLE_MASS * POLE_HALF_LENGTH * theta_acc * cos_t / total_mass
        self.x += TIME_STEP * self.x_dot
        self.x_dot += TIME_STEP * x_acc
        self.theta += TIME_STEP * self.theta_dot
        self.theta_dot += TIME_STEP * theta_acc

    @property
    def fallen(self) -> bool:
        return abs(self.theta) > FAIL_ANGLE


def reference_force(theta: float, theta_dot: float) -> float:
    """Stabilizing PD law: push the cart under the pole, damped."""
    return max(-FORCE_MAX, min(FORCE_MAX, KP * theta + KD * theta_dot))


def angle_input(theta_prev: float, theta: float) -> tuple[float, float]:
    """Normalize an angle pair onto the unit square the map works in."""
    lim = FAIL_ANGLE
    a = (min(lim, max(-lim, theta_prev)) + lim) / (2 * lim)
    b = (min(lim, max(-lim, theta)) + lim) / (2 * lim)
    return (a, b)


def force_to_output(force: float) -> float:
    return (force / FORCE_MAX + 1.0) / 2.0


def output_to_force(out: float) -> float:
    return (2.0 * out - 1.0) * FORCE_MAX


def pole_learn_params() -> LearnParams:
    # Slower decay than the queue schedule: pole episodes restart often and
    # the map needs coverage across the whole angle band first.
    return LearnParams(eta_in=0.3, eta_out=0.3, radius=6.0, decay=0.9995,
                       explore_sigma=0.1, eta_floor=0.02, radius_floor=1.0)


def _random_start(rng, max_angle: float = 3.0 * math.pi / 180.0,
                  max_rate: float = 0.3) -> CartPole:
    return CartPole(
        theta=rng.uniform(-max_angle, max_angle),
        theta_dot=rng.uniform(-max_rate, max_rate),
    )


def run_episode(som: SomMap, start: CartPole, max_steps: int) -> int:
    """Steps survived under map control before the pole falls."""
    pole = CartPole(start.x, start.x_dot, start.theta, start.theta_dot)
    theta_prev = pole.theta
    for step in range(max_steps):
        force = output_to_force(som.respond(angle_input(theta_prev, pole.theta)))
        theta_prev = pole.theta
        pole.step(force)
        if pole.fallen:
            return step + 1
    return max_steps


def train_pole_som(lp: LearnParams, seed: int, episodes: int,
                   max_steps: int = 300) -> SomMap:
    """Behaviour-clone the reference controller onto a fresh map.

    The teacher drives the cart with exploration noise on the applied
    force. Episodes restart from anywhere in the angle band, so the map
    sees the periphery and not just the balance manifold.
    """
    rng = engine.substream(seed, "pole-train")
    som = SomMap.random(rng, out_init=(0.35, 0.65), out_bounds=(0.0, 1.0))
    for _ in range(episodes):
        pole = _random_start(rng, max_angle=10.0 * math.pi / 180.0, max_rate=1.0)
        theta_prev = pole.theta
        for _ in range(max_steps):
            x = angle_input(theta_prev, pole.theta)
            target = force_to_output(reference_force(pole.theta, pole.theta_dot))
            som.train_step(x, target, lp)
            lp.decay_step()
            applied = min(1.0, max(0.0, target + rng.gauss(0.0, lp.explore_sigma)))
            theta_prev = pole.theta
            pole.step(output_to_force(applied))
            if pole.fallen:
                break
    som.freeze()
    return som


@dataclass
class ValidationReport:
    """Balanced-step counts before and after training, per start state."""

    untrained_steps: list[int] = field(default_factory=list)
    trained_steps: list[int] = field(default_factory=list)
    episodes: int = 0
    eval_cap: int = 0

    @property
    def untrained_mean(self) -> float:
        return sum(self.untrained_steps) / len(self.untrained_steps)

    @property
    def trained_min(self) -> int:
        return min(self.trained_steps)


def pole_balance_validate(lp: LearnParams | None = None, seed: int = 0,
                          episodes: int = 300, eval_starts: int = 20,
                          eval_cap: int = 1200) -> ValidationReport:
    """Train a fresh map on the pole task and measure before/after control."""
    if lp is None:
        lp = pole_learn_params()
    rng = engine.substream(seed, "pole-eval")
    starts = [_random_start(rng) for _ in range(eval_starts)]

    untrained = SomMap.random(engine.substream(seed, "pole-train"),
                              out_init=(0.35, 0.65), out_bounds=(0.0, 1.0))
    untrained.freeze()
    before = [run_episode(untrained, s, eval_cap) for s in starts]

    trained = train_pole_som(lp, seed, episodes)
    after = [run_episode(trained, s, eval_cap) for s in starts]
    return ValidationReport(untrained_steps=before, trained_steps=after,
                            episodes=episodes, eval_cap=eval_cap)
