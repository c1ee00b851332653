"""Classic queue disciplines: drop-tail, RED, FRED, ARED and PI.

All disciplines share one interface: ``on_arrival`` decides accept/drop for
each arriving packet (and is where the EWMA average is maintained), while
disciplines driven by a timer expose ``tick_period``/``on_tick``. Every
discipline enforces a forced tail drop when the physical queue is full.

RED here is drop-mode only; packets are never marked.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

# Clamp bounds applied to every adapted max_p. They keep the adaptive
# schemes out of the degenerate all-drop / never-drop regimes.
P_FLOOR = 0.001
P_CEIL = 0.5


@dataclass
class RedParams:
    """RED parameter set shared by RED, FRED, ARED and the SOM controller."""

    min_th: float = 100.0  # packets
    max_th: float = 150.0  # packets
    q_size: int = 200  # packets
    q_weight: float = 1e-4
    max_p: float = 0.1
    gentle: bool = False

    def __post_init__(self) -> None:
        if not (0 < self.min_th < self.max_th <= self.q_size):
            raise ValueError(
                f"thresholds must satisfy 0 < min_th < max_th <= q_size, "
                f"got {self.min_th}/{self.max_th}/{self.q_size}"
            )
        if not (0 < self.q_weight <= 1):
            raise ValueError(f"q_weight must be in (0, 1], got {self.q_weight}")
        if not (0 < self.max_p <= 1):
            raise ValueError(f"max_p must be in (0, 1], got {self.max_p}")


def ewma_update(avg: float, q: float, w_q: float) -> float:
    """One exponentially-weighted moving-average step: (1-w)*avg + w*q."""
    return (1.0 - w_q) * avg + w_q * q


def red_mark_prob(avg: float, p: RedParams, max_p: float | None = None) -> float:
    """Early-drop probability as a function of the average queue length.

    Zero below min_th, linear up to max_p at max_th. Above max_th the
    probability jumps to 1, unless gentle mode is on, in which case it
    climbs linearly from max_p to 1 between max_th and 2*max_th.
    """
    if max_p is None:
        max_p = p.max_p
    if avg < p.min_th:
        return 0.0
    if avg < p.max_th:
        return max_p * (avg - p.min_th) / (p.max_th - p.min_th)
    if not p.gentle:
        return 1.0
    if avg < 2 * p.max_th:
        return max_p + (1.0 - max_p) * (avg - p.max_th) / p.max_th
    return 1.0


def count_corrected_prob(p_b: float, count: int) -> float:
    """RED's inter-drop count correction: p_a = p_b / (1 - count*p_b), clamped to 1."""
    if p_b <= 0.0:
        return 0.0
    denom = 1.0 - count * p_b
    if denom <= 0.0:
        return 1.0
    return min(1.0, p_b / denom)


@dataclass
class FredState:
    """Per-enqueue multiplicative max_p adaptation with alternation."""

    max_p: float = 0.1
    last_action: str = "none"  # none | increased | decreased
    alpha: float = 3.0
    beta: float = 2.0
    p_floor: float = P_FLOOR
    p_ceil: float = P_CEIL


def fred_adapt(state: FredState, avg: float, p: RedParams) -> FredState:
    """Adapt max_p on an enqueue event, never twice in the same direction."""
    if avg > p.max_th and state.last_action != "increased":
        state.max_p = min(state.p_ceil, max(state.p_floor, state.max_p * state.alpha))
        state.last_action = "increased"
    elif avg < p.min_th and state.last_action != "decreased":
        state.max_p = min(state.p_ceil, max(state.p_floor, state.max_p / state.beta))
        state.last_action = "decreased"
    return state


@dataclass
class AredState:
    """Interval-based AIMD max_p adaptation."""

    max_p: float = 0.1
    alpha: float = 0.01  # additive increase
    beta: float = 0.09  # multiplicative decrease fraction (factor 1 - beta)
    interval: float = 0.3  # seconds
    next_update: float = 0.0
    p_floor: float = P_FLOOR
    p_ceil: float = P_CEIL


def ared_adapt(state: AredState, avg: float, p: RedParams, now: float) -> AredState:
    """Adapt max_p at most once per interval, targeting the centre of the band.

    The target band is the middle 20% of [min_th, max_th]; above it max_p
    grows additively, below it max_p shrinks multiplicatively. The next
    update is re-anchored to *now* so the once-per-interval guarantee holds
    even if the caller ticks irregularly.
    """
    if now < state.next_update:
        return state
    span = p.max_th - p.min_th
    lo = p.min_th + 0.4 * span
    hi = p.min_th + 0.6 * span
    if avg > hi:
        state.max_p = min(state.p_ceil, state.max_p + state.alpha)
    elif avg < lo:
        state.max_p = max(state.p_floor, state.max_p * (1.0 - state.beta))
    state.next_update = now + state.interval
    return state


@dataclass
class PiState:
    """Proportional-integral drop-probability controller state."""

    a: float = 1.822e-5
    b: float = 1.816e-5
    q_ref: float = 100.0  # packets
    w: float = 170.0  # sampling frequency, Hz
    p: float = 0.0
    q_prev: float = 0.0


def pi_update(state: PiState, q: float) -> PiState:
    """One sampling step: p += a*(q - q_ref) - b*(q_prev - q_ref), clamped to [0, 1]."""
    p = state.p + state.a * (q - state.q_ref) - state.b * (state.q_prev - state.q_ref)
    state.p = min(1.0, max(0.0, p))
    state.q_prev = q
    return state


class QueueDiscipline:
    """Base class: forced tail drop plus an EWMA average kept for reporting.

    Subclasses override :meth:`early_drop_prob` (and optionally adaptation
    hooks). ``on_arrival`` returns True when the packet is accepted.
    """

    name = "base"
    tick_period: float | None = None

    def __init__(self, params: RedParams, rng: random.Random):
        self.params = params
        self.rng = rng
        self.avg = 0.0
        self.count = 0  # packets accepted since the last drop

    @property
    def current_max_p(self) -> float:
        return 0.0

    def adapt_on_arrival(self, q_len: int, now: float) -> None:
        """Per-enqueue adaptation hook; runs after the EWMA update."""

    def early_drop_prob(self) -> float:
        return 0.0

    def on_arrival(self, q_len: int, now: float) -> bool:
        p = self.params
        self.avg = ewma_update(self.avg, q_len, p.q_weight)
        self.adapt_on_arrival(q_len, now)
        if q_len >= p.q_size:  # buffer full: forced drop for every discipline
            self.count = 0
            return False
        if self.avg < p.min_th:
            self.count = 0
            return True
        p_a = count_corrected_prob(self.early_drop_prob(), self.count)
        if p_a > 0.0 and self.rng.random() < p_a:
            self.count = 0
            return False
        self.count += 1
        return True

    def on_tick(self, q_len: int, now: float) -> None:
        """Periodic hook for timer-driven disciplines."""


class DropTail(QueueDiscipline):
    name = "droptail"


class RedQueue(QueueDiscipline):
    name = "red"

    @property
    def current_max_p(self) -> float:
        return self.params.max_p

    def early_drop_prob(self) -> float:
        return red_mark_prob(self.avg, self.params)


class FredQueue(QueueDiscipline):
    name = "fred"

    def __init__(self, params: RedParams, rng: random.Random, state: FredState | None = None):
        super().__init__(params, rng)
        self.state = state if state is not None else FredState(max_p=params.max_p)

    @property
    def current_max_p(self) -> float:
        return self.state.max_p

    def adapt_on_arrival(self, q_len: int, now: float) -> None:
        fred_adapt(self.state, self.avg, self.params)

    def early_drop_prob(self) -> float:
        return red_mark_prob(self.avg, self.params, max_p=self.state.max_p)


class AredQueue(QueueDiscipline):
    name = "ared"

    def __init__(self, params: RedParams, rng: random.Random, state: AredState | None = None):
        super().__init__(params, rng)
        self.state = state if state is not None else AredState(max_p=params.max_p)
        self.tick_period = self.state.interval

    @property
    def current_max_p(self) -> float:
        return self.state.max_p

    def early_drop_prob(self) -> float:
        return red_mark_prob(self.avg, self.params, max_p=self.state.max_p)

    def on_tick(self, q_len: int, now: float) -> None:
        ared_adapt(self.state, self.avg, self.params, now)


class PiQueue(QueueDiscipline):
    """PI controller: drops with the sampled probability, no thresholds.

    The EWMA average is still maintained for reporting, but plays no part
    in the drop decision.
    """

    name = "pi"

    def __init__(self, params: RedParams, rng: random.Random, state: PiState | None = None):
        super().__init__(params, rng)
        self.state = state if state is not None else PiState()
        self.tick_period = 1.0 / self.state.w

    @property
    def current_max_p(self) -> float:
        return self.state.p

    def on_arrival(self, q_len: int, now: float) -> bool:
        self.avg = ewma_update(self.avg, q_len, self.params.q_weight)
        if q_len >= self.params.q_size:
            return False
        if self.state.p > 0.0 and self.rng.random() < self.state.p:
            return False
        return True

    def on_tick(self, q_len: int, now: float) -> None:
        pi_update(self.state, q_len)


def make_discipline(name: str, rng: random.Random, params: RedParams | None = None,
                    som_map=None, **kwargs) -> QueueDiscipline:
    """Build a discipline by its config name.

    The SOM-driven discipline needs a trained map; everything else works
    from RedParams alone. Extra keyword arguments become fields on the
    discipline's adaptation state (e.g. ``alpha=0.02`` for ared).
    """
    params = params if params is not None else RedParams()
    name = name.lower()
    if name == "droptail":
        return DropTail(params, rng)
    if name == "red":
        return RedQueue(params, rng)
    if name == "fred":
        state = FredState(max_p=params.max_p, **kwargs)
        return FredQueue(params, rng, state)
    if name == "ared":
        state = AredState(max_p=params.max_p, **kwargs)
        return AredQueue(params, rng, state)
    if name == "pi":
        state = PiState(**kwargs)
        return PiQueue(params, rng, state)
    if name == "kred":
        from .kred import KredQueue  # avoids a module cycle

        if som_map is None:
            raise ValueError("the kred discipline requires a trained map")
        return KredQueue(params, rng, som_map, **kwargs)
    raise ValueError(f"unknown queue discipline {name!r}")
