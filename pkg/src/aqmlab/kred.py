"""Couples the self-organizing map to the RED queue.

On every enqueue the map answers with a max_p for the (previous, current)
average-queue pair; the drop test itself is ordinary RED with that value.
During training the output weights chase an exponential teacher curve and
the applied probability carries exploration noise; once the averaged queue
has held the threshold band for long enough, the map freezes and is used
unchanged from then on.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from . import engine
from .aqm import P_CEIL, P_FLOOR, QueueDiscipline, RedParams, red_mark_prob
from .som import LearnParams, SomMap

# Teacher curve: exponential in the queue's distance from an anchor point
# low in the threshold band. The anchor pins the lightest sustainable load
# (the training workload) just above min_th; the steep slope then keeps the
# equilibrium for every heavier load compressed into the lower half of the
# band, which is what makes the learned controller both stable and
# low-delay compared to a fixed RED curve.
TEACHER_ANCHOR_FRAC = 0.12  # anchor at min_th + frac * (max_th - min_th)
TEACHER_ANCHOR_P = 0.0167
TEACHER_K = 12.0

CONVERGENCE_SPAN = 30.0  # seconds of history the stability check needs
CONVERGENCE_STD_FRAC = 0.1  # of (max_th - min_th)


def teacher_max_p(avg: float, p: RedParams, anchor_p: float = TEACHER_ANCHOR_P,
                  k: float = TEACHER_K, p_floor: float = P_FLOOR,
                  p_ceil: float = P_CEIL) -> float:
    """Target drop probability for a given average queue length."""
    span = p.max_th - p.min_th
    anchor = p.min_th + TEACHER_ANCHOR_FRAC * span
    raw = anchor_p * math.exp(k * (avg - anchor) / span)
    return min(p_ceil, max(p_floor, raw))


def convergence_check(window, min_th: float = 100.0, max_th: float = 150.0,
                      span: float = CONVERGENCE_SPAN,
                      std_frac: float = CONVERGENCE_STD_FRAC) -> bool:
    """True when the recorded averages have settled inside the band.

    *window* is a sequence of (time, avg) samples. It must span at least
    ``span`` seconds (else the answer is False), every sample must lie in
    [min_th, max_th], and the standard deviation must not exceed
    ``std_frac`` of the band width.
    """
    if len(window) < 2:
        return False
    times = [t for t, _ in window]
    if times[-1] - times[0] < span - 0.05:  # half a sample of slack
        return False
    vals = [v for _, v in window]
    if min(vals) < min_th or max(vals) > max_th:
        return False
    n = len(vals)
    mean = sum(vals) / n
    var = sum((v - mean) ** 2 for v in vals) / n
    return math.sqrt(var) <= std_frac * (max_th - min_th)


class KredQueue(QueueDiscipline):
    """RED whose max_p comes from the map on every enqueue."""

    name = "kred"

    def __init__(self, params: RedParams, rng: random.Random, som_map: SomMap,
                 use_instantaneous: bool = False, training: bool = False,
                 lp: LearnParams | None = None,
                 explore_rng: random.Random | None = None,
                 teacher_anchor_p: float = TEACHER_ANCHOR_P,
                 teacher_k: float = TEACHER_K,
                 explore_gain: float = 1.2,
                 explore_period: float = 100.0,
                 explore_until: float = 300.0):
        super().__init__(params, rng)
        self.map = som_map
        self.use_instantaneous = use_instantaneous
        self.training = training
        self.lp = lp
        self.explore_rng = explore_rng
        self.teacher_anchor_p = teacher_anchor_p
        self.teacher_k = teacher_k
        # Annealed exploration. Early in training the behaviour policy pins
        # the averaged queue to a setpoint that sweeps the threshold band:
        # the teacher curve sharpened by a strong log-linear term in
        # (avg - setpoint), which drops hard above the setpoint and barely
        # at all below it. The behaviour blends back into the map's own
        # response as training fades out. Teaching is off-policy, so
        # exploration never corrupts the targets.
        self.explore_gain = explore_gain  # log-units per packet of error
        self.explore_period = explore_period
        self.explore_until = explore_until
        # The sweep tops out above max_th so the cells just under the
        # threshold see real traffic despite the setpoint-tracking offset.
        span = params.max_th - params.min_th
        self._sweep_lo = params.min_th + 0.06 * span
        self._sweep_hi = params.max_th + 0.1 * span
        self.prev_avg = 0.0
        self.max_p = P_FLOOR
        self.last_teacher = 0.0

    @property
    def current_max_p(self) -> float:
        return self.max_p

    def _setpoint(self, now: float) -> float:
        """Triangular sweep across the band, starting at the low edge."""
        u = now / self.explore_period
        tri = 4.0 * abs(u - math.floor(u + 0.5)) - 1.0  # -1 at cycle start
        return self._sweep_lo + (tri + 1.0) / 2.0 * (self._sweep_hi - self._sweep_lo)

    def _applied_prob(self, response: float, target: float, now: float) -> float:
        """Behaviour policy during training: annealed exploration plus noise."""
        ln_resp = math.log(max(response, 1e-9))
        noise = self.explore_rng.gauss(0.0, self.lp.explore_sigma)
        if self.explore_until <= 0 or now >= self.explore_until:
            return math.exp(ln_resp + noise)
        ln_explore = (math.log(max(target, 1e-9))
                      + self.explore_gain * (self.avg - self._setpoint(now)))
        # Full-strength exploration for most of the phase, then a linear
        # hand-over to the map's own policy.
        hold = 0.7 * self.explore_until
        lam = 1.0 if now < hold else (self.explore_until - now) / (self.explore_until - hold)
        return math.exp((1.0 - lam) * ln_resp + lam * ln_explore + noise)

    def adapt_on_arrival(self, q_len: int, now: float) -> None:
        qs = self.params.q_size
        cur = float(q_len) if self.use_instantaneous else self.avg
        x = (self.prev_avg / qs, cur / qs)
        response = self.map.respond(x)
        if self.training and not self.map.frozen:
            target = teacher_max_p(self.avg, self.params,
                                   self.teacher_anchor_p, self.teacher_k)
            self.last_teacher = target
            self.map.train_step(x, target, self.lp)
            self.lp.decay_step()
            response = self._applied_prob(response, target, now)
        self.max_p = min(P_CEIL, max(P_FLOOR, response))
        self.prev_avg = cur

    def early_drop_prob(self) -> float:
        return red_mark_prob(self.avg, self.params, max_p=self.max_p)


@dataclass
class TrainingResult:
    """Outcome of a training run; the map is frozen iff training converged."""

    map: SomMap
    converged: bool
    converged_at: float | None
    log: list[tuple[float, float, float, float]] = field(default_factory=list)
    # log rows: (time, avg queue, applied max_p, teacher max_p)


def kred_train(spec, lp: LearnParams | None = None, seed: int | None = None,
               min_train_time: float = 330.0) -> TrainingResult:
    """Train a fresh map by running the given scenario with learning on.

    The map freezes at the first moment the stability window passes, and the
    run continues under the frozen map. Convergence is not even considered
    until ``min_train_time``, which must cover the exploration sweep; the
    default leaves 30 s of settling after the sweep fades. A run that never
    converges returns the unfrozen map with ``converged`` False so the
    caller can report it.
    """
    from .scenario import DumbbellSim  # late import: scenario builds on this module

    if lp is None:
        # explore_sigma is log-scale here (see KredQueue._explore_factor).
        lp = LearnParams(explore_sigma=0.25)
    if seed is None:
        seed = spec.seed
    params = spec.red_params()
    som_map = SomMap.random(engine.substream(seed, "som"))
    disc = KredQueue(params, engine.substream(seed, "aqm"), som_map,
                     training=True, lp=lp,
                     explore_rng=engine.substream(seed, "explore"),
                     **spec.state_params())
    sim = DumbbellSim(spec, disc)

    window: list[tuple[float, float]] = []
    result = TrainingResult(map=som_map, converged=False, converged_at=None)
    max_keep = int(CONVERGENCE_SPAN / sim.sample_period) + 1

    def on_sample(now: float, q_len: int) -> None:
        result.log.append((now, disc.avg, disc.max_p, disc.last_teacher))
        if som_map.frozen:
            return
        window.append((now, disc.avg))
        if len(window) > max_keep:
            del window[0]
        if now >= min_train_time and convergence_check(
                window, params.min_th, params.max_th):
            som_map.freeze()
            disc.training = False
            result.converged = True
            result.converged_at = now

    sim.sample_listeners.append(on_sample)
    sim.run()
    if not som_map.frozen and result.converged:
        raise AssertionError("inconsistent freeze state")  # pragma: no cover
    return result


def write_training_log(result: TrainingResult, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("time_s,avg_queue_pkts,applied_max_p,teacher_max_p\n")
        for t, avg, applied, target in result.log:
            fh.write(f"{t!r},{avg!r},{applied!r},{target!r}\n")
