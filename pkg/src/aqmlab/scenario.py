"""Dumbbell-topology scenarios: traffic schedules, the bottleneck simulation
loop, metric collection and the CSV artifacts.

Many TCP NewReno sources share one bottleneck link guarded by a queue
discipline. Access links are modelled as pure propagation delay sized so
each flow hits its target round-trip time; acks return on an uncongested
reverse path. Everything is driven by one seeded event loop, so a run is
reproducible bit for bit.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import engine
from .aqm import RedParams, make_discipline
from .engine import (AQM_TICK, PACKET_ARRIVAL, PACKET_DEPARTURE,
                     SCENARIO_CHANGE, TIMER_EXPIRY, Packet)
from .newreno import NewRenoFlow

ACK_SIZE = 40  # bytes
SAMPLE_PERIOD = 0.1  # seconds between time-series samples
THROUGHPUT_WINDOW = 1.0  # seconds per throughput statistics window
FLOW_START_STAGGER = 0.05  # seconds between first sends within one batch
MAX_BURST = 4  # new packets released per ack, tames recovery-exit bursts

TIMESERIES_HEADER = "time_s,queue_pkts,avg_queue_pkts,max_p,drops_cum,throughput_bps"
SUMMARY_HEADER = "aqm,mean_delay_ms,std_delay_ms,mean_tput_bps,std_tput_bps,drop_rate"

AQM_NAMES = ("droptail", "red", "fred", "ared", "pi", "kred")
COMPARISON_AQMS = ("red", "fred", "ared", "pi", "kred")

# Fields of RedParams that may appear in aqm_params; anything else is
# forwarded to the discipline's adaptation state.
_RED_FIELDS = {"min_th", "max_th", "q_size", "q_weight", "max_p", "gentle"}


class ConfigError(ValueError):
    """Invalid scenario or discipline configuration."""


@dataclass
class RttModel:
    """Per-flow round-trip propagation: one fixed value or a uniform draw."""

    kind: str = "uniform-fixed"  # or "uniform-random"
    lo: float = 0.08  # seconds; the fixed value when kind is uniform-fixed
    hi: float = 0.08

    def __post_init__(self) -> None:
        if self.kind not in ("uniform-fixed", "uniform-random"):
            raise ConfigError(f"unknown rtt model {self.kind!r}")
        if self.kind == "uniform-fixed":
            self.hi = self.lo
        if not (0 < self.lo <= self.hi):
            raise ConfigError(f"rtt bounds must satisfy 0 < lo <= hi, got {self.lo}/{self.hi}")

    def draw(self, rng) -> float:
        if self.kind == "uniform-fixed":
            return self.lo
        return rng.uniform(self.lo, self.hi)


@dataclass
class ScenarioSpec:
    name: str = "custom"
    duration: float = 60.0
    bottleneck_bw: float = 5e6  # bits/s
    bottleneck_prop: float = 0.005  # seconds
    flow_schedule: list = field(default_factory=lambda: [(0.0, 10)])
    rtt_model: RttModel = field(default_factory=RttModel)
    aqm: str = "red"
    aqm_params: dict = field(default_factory=dict)
    seed: int = 42
    packet_size: int = 500  # bytes

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.bottleneck_bw <= 0 or self.bottleneck_prop < 0:
            raise ConfigError("bottleneck bandwidth must be positive, delay non-negative")
        if self.packet_size <= 0:
            raise ConfigError("packet size must be positive")
        if self.aqm not in AQM_NAMES:
            raise ConfigError(f"unknown aqm {self.aqm!r}, expected one of {AQM_NAMES}")
        sched = [(float(t), int(n)) for t, n in self.flow_schedule]
        if sched:
            if sched[0][0] != 0.0:
                raise ConfigError("flow schedule must start at t=0")
            times = [t for t, _ in sched]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ConfigError("flow schedule times must be strictly increasing")
            if any(n < 0 for _, n in sched):
                raise ConfigError("flow counts must be non-negative")
        self.flow_schedule = sched
        if self.rtt_model.lo <= self.bottleneck_prop:
            raise ConfigError("per-flow RTT must exceed the bottleneck propagation delay")

    @property
    def max_flows(self) -> int:
        return max((n for _, n in self.flow_schedule), default=0)

    def red_params(self) -> RedParams:
        kwargs = {k: v for k, v in self.aqm_params.items() if k in _RED_FIELDS}
        if self.aqm == "ared":
            kwargs.setdefault("gentle", True)
        return RedParams(**kwargs)

    def state_params(self) -> dict:
        return {k: v for k, v in self.aqm_params.items() if k not in _RED_FIELDS}


_SPEC_FIELDS = ("name", "duration", "bottleneck_bw", "bottleneck_prop",
                "flow_schedule", "rtt_model", "aqm", "aqm_params", "seed",
                "packet_size")


def spec_from_dict(data: dict) -> ScenarioSpec:
    """Build a spec from a parsed config mapping (one key per spec field)."""
    unknown = set(data) - set(_SPEC_FIELDS)
    if unknown:
        raise ConfigError(f"unknown scenario config keys: {sorted(unknown)}")
    data = dict(data)
    rtt = data.get("rtt_model")
    if isinstance(rtt, dict):
        data["rtt_model"] = RttModel(**rtt)
    return ScenarioSpec(**data)


def build_scenario(name: str, overrides: dict | None = None) -> ScenarioSpec:
    """One of the canned traffic patterns, with config-style overrides.

    train: 8 steady flows for 600 s (the learning workload).
    scenario1: load staircase from 50 to 250 flows, identical RTTs.
    scenario2: a new flow count every 50 s, per-flow RTT uniform in
               [64, 102] ms.
    custom: defaults only; the caller supplies everything via overrides.
    """
    if name == "train":
        # Bigger packets than the evaluation scenarios: the map's inputs are
        # normalized averages, so the learned curve transfers, and the
        # coarser workload both trains fast and demonstrates that the
        # deployment traffic differs from the learning traffic.
        base = dict(name=name, duration=600.0, flow_schedule=[(0.0, 8)],
                    rtt_model=RttModel("uniform-fixed", 0.08),
                    packet_size=1000)
    elif name == "scenario1":
        base = dict(name=name, duration=500.0,
                    flow_schedule=[(0.0, 50), (100.0, 100), (200.0, 150),
                                   (300.0, 200), (400.0, 250)],
                    rtt_model=RttModel("uniform-fixed", 0.08))
    elif name == "scenario2":
        base = dict(name=name, duration=400.0,
                    flow_schedule=[(0.0, 50), (50.0, 150), (100.0, 250),
                                   (150.0, 100), (200.0, 200), (250.0, 150),
                                   (300.0, 250), (350.0, 150)],
                    rtt_model=RttModel("uniform-random", 0.064, 0.102))
    elif name == "custom":
        base = dict(name=name)
    else:
        raise ConfigError(f"unknown scenario {name!r}")
    if overrides:
        base.update({k: v for k, v in overrides.items() if v is not None})
    return spec_from_dict(base)


@dataclass
class RunMetrics:
    """Everything a run reports: summary statistics plus the sampled series."""

    aqm: str = ""
    duration: float = 0.0
    bottleneck_bw: float = 0.0
    attempts: int = 0
    drops: int = 0
    delivered_bits: float = 0.0
    delay_count: int = 0
    mean_delay_ms: float = 0.0
    std_delay_ms: float = 0.0
    mean_tput_bps: float = 0.0
    std_tput_bps: float = 0.0
    # Parallel series sampled every SAMPLE_PERIOD seconds.
    t: list = field(default_factory=list)
    queue: list = field(default_factory=list)
    avg_queue: list = field(default_factory=list)
    max_p: list = field(default_factory=list)
    drops_cum: list = field(default_factory=list)
    tput_bps: list = field(default_factory=list)

    @property
    def drop_rate(self) -> float:
        return self.drops / self.attempts if self.attempts else 0.0

    @property
    def utilization(self) -> float:
        return self.delivered_bits / (self.bottleneck_bw * self.duration)

    def queue_stats(self) -> tuple[float, float]:
        """Mean and standard deviation of the instantaneous queue series."""
        n = len(self.queue)
        if n == 0:
            return (0.0, 0.0)
        mean = sum(self.queue) / n
        var = sum((q - mean) ** 2 for q in self.queue) / n
        return (mean, math.sqrt(var))

    def band_fraction(self, lo: float = 100.0, hi: float = 150.0,
                      warmup: float = 20.0) -> float:
        """Fraction of post-warmup samples whose EWMA average is in [lo, hi]."""
        picked = [a for t, a in zip(self.t, self.avg_queue) if t >= warmup]
        if not picked:
            return 0.0
        return sum(1 for a in picked if lo <= a <= hi) / len(picked)


class DumbbellSim(engine.Simulator):
    """All sources through one queue and one bottleneck link.

    The bottleneck serializes one packet at a time at ``bottleneck_bw``;
    every delivered data packet is answered by a 40-byte ack that returns
    after the flow's remaining propagation budget. Queue delay is the time
    a packet spends waiting before serialization starts.
    """

    def __init__(self, spec: ScenarioSpec, discipline):
        super().__init__()
        self.spec = spec
        self.disc = discipline
        self.sample_period = SAMPLE_PERIOD
        self.sample_listeners: list = []

        rtt_rng = engine.substream(spec.seed, "rtt")
        self.flows: list[NewRenoFlow] = []
        self.fwd_delay: list[float] = []
        self.ret_delay: list[float] = []
        for i in range(spec.max_flows):
            rtt = spec.rtt_model.draw(rtt_rng)
            one_way = (rtt - spec.bottleneck_prop) / 2.0
            self.flows.append(NewRenoFlow(i, rtt))
            self.fwd_delay.append(one_way)
            self.ret_delay.append(one_way)

        self.link = engine.Link(spec.bottleneck_bw, spec.bottleneck_prop)
        self.queue: deque[Packet] = deque()
        self.in_service: Packet | None = None
        self._pkt_id = 0
        self._serialize_s = spec.packet_size * 8 / self.link.bandwidth

        self.metrics = RunMetrics(aqm=spec.aqm, duration=spec.duration,
                                  bottleneck_bw=spec.bottleneck_bw)
        self._delay_sum = 0.0
        self._delay_sumsq = 0.0
        n_windows = max(1, int(spec.duration // THROUGHPUT_WINDOW))
        self._window_bits = [0.0] * n_windows
        self._subbucket = 0.0  # bits delivered since the last sample tick
        self._tput_ring: deque[float] = deque(maxlen=int(round(THROUGHPUT_WINDOW / SAMPLE_PERIOD)))

        self.on(PACKET_ARRIVAL, self._on_arrival)
        self.on(PACKET_DEPARTURE, self._on_departure)
        self.on(TIMER_EXPIRY, self._on_timer)
        self.on(SCENARIO_CHANGE, self._on_scenario_change)
        self.on(AQM_TICK, self._on_tick)

        self.schedule(0.0, AQM_TICK, ("sample", 0))
        if self.disc.tick_period is not None:
            self.schedule(self.disc.tick_period, AQM_TICK, ("discipline", 1))
        for t, count in spec.flow_schedule:
            self.schedule(t, SCENARIO_CHANGE, count)

    # -- data path ----------------------------------------------------------

    def _on_arrival(self, pkt: Packet) -> None:
        if pkt.is_ack:
            self._handle_ack(pkt)
            return
        self.metrics.attempts += 1
        if self.disc.on_arrival(len(self.queue), self.now):
            pkt.enqueue_time = self.now
            self.queue.append(pkt)
            if self.in_service is None:
                self._start_service()
        else:
            self.metrics.drops += 1

    def _start_service(self) -> None:
        pkt = self.queue.popleft()
        wait = self.now - pkt.enqueue_time
        self.metrics.delay_count += 1
        self._delay_sum += wait
        self._delay_sumsq += wait * wait
        self.in_service = pkt
        self.schedule(self.now + self._serialize_s, PACKET_DEPARTURE)

    def _on_departure(self, _payload) -> None:
        pkt = self.in_service
        self.in_service = None
        bits = pkt.size * 8
        self.metrics.delivered_bits += bits
        idx = min(int(self.now), len(self._window_bits) - 1)
        self._window_bits[idx] += bits
        self._subbucket += bits
        flow = self.flows[pkt.flow_id]
        if flow.active and pkt.epoch == flow.epoch:
            ack_no = flow.receiver_deliver(pkt.seq_no)
            ack = Packet(self._next_id(), flow.id, ACK_SIZE, ack_no,
                         is_ack=True, epoch=pkt.epoch)
            delay = self.link.prop_delay + self.ret_delay[flow.id]
            self.schedule(self.now + delay, PACKET_ARRIVAL, ack)
        if self.queue:
            self._start_service()

    # -- sender side --------------------------------------------------------

    def _next_id(self) -> int:
        self._pkt_id += 1
        return self._pkt_id

    def _transmit(self, flow: NewRenoFlow, seq: int) -> None:
        pkt = Packet(self._next_id(), flow.id, self.spec.packet_size, seq,
                     epoch=flow.epoch)
        flow.record_send(seq, self.now)
        self.schedule(self.now + self.fwd_delay[flow.id], PACKET_ARRIVAL, pkt)
        if not flow.timer_armed:
            self._arm_rto(flow)

    def _pump(self, flow: NewRenoFlow) -> None:
        for _ in range(min(flow.allowance(), MAX_BURST)):
            self._transmit(flow, flow.next_seq())

    def _handle_ack(self, pkt: Packet) -> None:
        flow = self.flows[pkt.flow_id]
        if not flow.active or pkt.epoch != flow.epoch:
            return
        prev_acked = flow.highest_acked
        for seq in flow.on_ack(pkt.seq_no, self.now):
            self._transmit(flow, seq)
        self._pump(flow)
        if flow.highest_acked > prev_acked:
            if flow.outstanding():
                self._arm_rto(flow)
            else:
                self._cancel_rto(flow)

    def _arm_rto(self, flow: NewRenoFlow) -> None:
        flow.timer_gen += 1
        flow.timer_armed = True
        self.schedule(self.now + flow.rto, TIMER_EXPIRY,
                      (flow.id, flow.timer_gen, "rto"))

    def _cancel_rto(self, flow: NewRenoFlow) -> None:
        flow.timer_gen += 1
        flow.timer_armed = False

    def _on_timer(self, payload) -> None:
        flow_id, gen, kind = payload
        flow = self.flows[flow_id]
        if gen != flow.timer_gen or not flow.active:
            return
        if kind == "start":  # deferred first send of a newly active flow
            self._pump(flow)
            return
        flow.timer_armed = False
        if not flow.outstanding():
            return
        for seq in flow.on_timeout(self.now):
            self._transmit(flow, seq)

    # -- control ------------------------------------------------------------

    def _on_scenario_change(self, count: int) -> None:
        # Flows change state exactly at the schedule time; first sends of a
        # newly activated batch are staggered a little to break the lockstep
        # that identical RTTs would otherwise impose.
        started = 0
        for i, flow in enumerate(self.flows):
            if i < count and not flow.active:
                flow.activate()
                offset = started * FLOW_START_STAGGER
                started += 1
                if offset == 0.0:
                    self._pump(flow)
                else:
                    self.schedule(self.now + offset, TIMER_EXPIRY,
                                  (flow.id, flow.timer_gen, "start"))
            elif i >= count and flow.active:
                flow.deactivate()

    def _on_tick(self, payload) -> None:
        kind, k = payload
        if kind == "sample":
            self._sample()
            self.schedule((k + 1) * SAMPLE_PERIOD, AQM_TICK, ("sample", k + 1))
        else:
            self.disc.on_tick(len(self.queue), self.now)
            period = self.disc.tick_period
            self.schedule((k + 1) * period, AQM_TICK, ("discipline", k + 1))

    def _sample(self) -> None:
        m = self.metrics
        q_len = len(self.queue)
        self._tput_ring.append(self._subbucket)
        self._subbucket = 0.0
        m.t.append(self.now)
        m.queue.append(q_len)
        m.avg_queue.append(self.disc.avg)
        m.max_p.append(self.disc.current_max_p)
        m.drops_cum.append(m.drops)
        m.tput_bps.append(sum(self._tput_ring) / THROUGHPUT_WINDOW)
        for listener in self.sample_listeners:
            listener(self.now, q_len)

    # -- orchestration ------------------------------------------------------

    def run(self) -> RunMetrics:
        self.run_until(self.spec.duration)
        return self._finalize()

    def _finalize(self) -> RunMetrics:
        m = self.metrics
        if m.delay_count:
            mean = self._delay_sum / m.delay_count
            var = max(0.0, self._delay_sumsq / m.delay_count - mean * mean)
            m.mean_delay_ms = mean * 1000.0
            m.std_delay_ms = math.sqrt(var) * 1000.0
        n = len(self._window_bits)
        mean_bits = sum(self._window_bits) / n
        var_bits = sum((b - mean_bits) ** 2 for b in self._window_bits) / n
        m.mean_tput_bps = mean_bits / THROUGHPUT_WINDOW
        m.std_tput_bps = math.sqrt(var_bits) / THROUGHPUT_WINDOW
        return m


def run_scenario(spec: ScenarioSpec, som_map=None) -> RunMetrics:
    """Execute one scenario under its configured discipline."""
    if spec.aqm == "kred" and som_map is None:
        raise ConfigError("the kred discipline needs a trained map file")
    disc = make_discipline(spec.aqm, engine.substream(spec.seed, "aqm"),
                           params=spec.red_params(), som_map=som_map,
                           **spec.state_params())
    return DumbbellSim(spec, disc).run()


def _run_one(args) -> RunMetrics:
    spec, som_map = args
    return run_scenario(spec, som_map)


def run_comparison(base: ScenarioSpec, som_map=None,
                   aqms: tuple = COMPARISON_AQMS, workers: int = 1) -> dict:
    """Run the same scenario once per discipline; returns name -> metrics.

    Runs are independent simulations and may execute in a process pool.
    Results are keyed and ordered by the requested aqm tuple either way.
    """
    specs = []
    for name in aqms:
        d = {f: getattr(base, f) for f in _SPEC_FIELDS}
        d["aqm"] = name
        specs.append(ScenarioSpec(**d))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, [(s, som_map) for s in specs]))
    else:
        results = [run_scenario(s, som_map) for s in specs]
    return {name: metrics for name, metrics in zip(aqms, results)}


# -- artifacts ---------------------------------------------------------------


def emit_timeseries(metrics: RunMetrics, path) -> None:
    """Write the sampled series as CSV, one row per sample."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(TIMESERIES_HEADER + "\n")
            rows = zip(metrics.t, metrics.queue, metrics.avg_queue,
                       metrics.max_p, metrics.drops_cum, metrics.tput_bps)
            for t, q, avg, mp, drops, tput in rows:
                fh.write(f"{t!r},{q},{avg!r},{mp!r},{drops},{tput!r}\n")
    except OSError as exc:
        raise OSError(f"cannot write time series to {path}: {exc}") from exc


def summary_row(metrics: RunMetrics) -> str:
    return (f"{metrics.aqm},{metrics.mean_delay_ms!r},{metrics.std_delay_ms!r},"
            f"{metrics.mean_tput_bps!r},{metrics.std_tput_bps!r},{metrics.drop_rate!r}")


def write_summary(results: dict, path) -> None:
    """Write one summary row per discipline, mirroring the report tables."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(SUMMARY_HEADER + "\n")
            for metrics in results.values():
                fh.write(summary_row(metrics) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write summary to {path}: {exc}") from exc
