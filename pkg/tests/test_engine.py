import pytest

from aqmlab.engine import (Link, Packet, SchedulingError, Simulator,
                           substream, transmit_time)


def make_sim_with_trace():
    sim = Simulator()
    trace = []
    sim.on("packet-arrival", lambda payload: trace.append((sim.now, payload)))
    return sim, trace


def test_dispatch_in_time_order():
    sim, trace = make_sim_with_trace()
    sim.schedule(5.0, "packet-arrival", "late")
    sim.schedule(3.0, "packet-arrival", "early")
    sim.run_until(10.0)
    assert [p for _, p in trace] == ["early", "late"]
    assert [t for t, _ in trace] == [3.0, 5.0]


def test_equal_times_dispatch_in_insertion_order():
    sim, trace = make_sim_with_trace()
    sim.schedule(3.0, "packet-arrival", "first")
    sim.schedule(3.0, "packet-arrival", "second")
    sim.run_until(10.0)
    assert [p for _, p in trace] == ["first", "second"]


def test_scheduling_in_the_past_is_rejected():
    sim, _ = make_sim_with_trace()
    sim.schedule(2.0, "packet-arrival", None)
    sim.run_until(2.0)
    with pytest.raises(SchedulingError):
        sim.schedule(1.0, "packet-arrival", None)


def test_run_until_with_empty_queue_advances_clock():
    sim = Simulator()
    report = sim.run_until(10.0)
    assert sim.now == 10.0
    assert report.clock == 10.0
    assert report.dispatched == 0


def test_clock_never_decreases_across_dispatch():
    sim = Simulator()
    seen = []
    sim.on("timer-expiry", lambda _: seen.append(sim.now))
    for t in (4.0, 1.0, 2.5, 2.5, 0.0):
        sim.schedule(t, "timer-expiry")
    sim.run_until(5.0)
    assert seen == sorted(seen)


def test_transmit_time_1000_bytes_at_5mbit():
    link = Link(bandwidth=5e6, prop_delay=0.0)
    pkt = Packet(1, 0, 1000, 1)
    expected = 1000 * 8 / 5e6
    assert transmit_time(pkt, link) == pytest.approx(expected, rel=1e-12)


def test_transmit_time_includes_propagation():
    link = Link(bandwidth=5e6, prop_delay=0.010)
    pkt = Packet(1, 0, 500, 1)
    expected = 500 * 8 / 5e6 + 0.010
    assert transmit_time(pkt, link) == pytest.approx(expected, rel=1e-12)


def test_transmit_time_zero_size_is_propagation_only():
    link = Link(bandwidth=5e6, prop_delay=0.007)
    pkt = Packet(1, 0, 0, 1)
    assert transmit_time(pkt, link) == pytest.approx(0.007, rel=1e-12)


def test_link_validation():
    with pytest.raises(ValueError):
        Link(bandwidth=0.0, prop_delay=0.0)
    with pytest.raises(ValueError):
        Link(bandwidth=1e6, prop_delay=-0.1)


def test_substream_is_deterministic_and_independent():
    a1 = [substream(7, "aqm").random() for _ in range(5)]
    a2 = [substream(7, "aqm").random() for _ in range(5)]
    b = [substream(7, "rtt").random() for _ in range(5)]
    assert a1 == a2
    assert a1 != b
