import math
import random

import numpy as np
import pytest

from aqmlab.aqm import P_CEIL, P_FLOOR, RedParams
from aqmlab.engine import substream
from aqmlab.kred import (KredQueue, convergence_check, kred_train,
                         teacher_max_p)
from aqmlab.scenario import build_scenario
from aqmlab.som import LearnParams, SomMap, save_map


def uniform_map(value):
    in_w = np.stack(np.meshgrid((np.arange(25) + 0.5) / 25,
                                (np.arange(25) + 0.5) / 25,
                                indexing="ij"), axis=-1)
    out_w = np.full((25, 25), float(value))
    return SomMap(in_w, out_w)


def make_kred(value, **kw):
    return KredQueue(RedParams(), random.Random(0), uniform_map(value), **kw)


def test_max_p_clamped_to_ceiling():
    disc = make_kred(1.5)  # out weights forced past the ceiling
    disc.adapt_on_arrival(q_len=120, now=0.0)
    assert disc.max_p == P_CEIL


def test_max_p_clamped_to_floor():
    disc = make_kred(1e-6)
    disc.adapt_on_arrival(q_len=120, now=0.0)
    assert disc.max_p == P_FLOOR


def test_response_passes_through_inside_bounds():
    disc = make_kred(0.07)
    disc.adapt_on_arrival(q_len=120, now=0.0)
    assert disc.max_p == pytest.approx(0.07)


def test_lookup_uses_normalized_averages_and_tracks_prev():
    som = uniform_map(0.1)
    som.out_w[15, 15] = 0.2  # the cell that owns x = (0.625, 0.625)
    disc = KredQueue(RedParams(), random.Random(0), som)
    disc.avg = 125.0
    disc.prev_avg = 125.0
    assert som.winner((0.625, 0.625)) == (15, 15)
    disc.adapt_on_arrival(q_len=125, now=0.0)
    assert disc.max_p == pytest.approx(0.2)
    assert disc.prev_avg == disc.avg


def test_instantaneous_mode_uses_queue_length():
    som = uniform_map(0.1)
    disc = KredQueue(RedParams(), random.Random(0), som, use_instantaneous=True)
    disc.avg = 50.0
    disc.adapt_on_arrival(q_len=180, now=0.0)
    assert disc.prev_avg == 180.0


def test_teacher_monotone_non_decreasing():
    p = RedParams()
    xs = np.linspace(0, 200, 500)
    ys = [teacher_max_p(x, p) for x in xs]
    assert all(b >= a for a, b in zip(ys, ys[1:]))
    assert all(P_FLOOR <= y <= P_CEIL for y in ys)


def test_convergence_check_happy_path():
    window = [(t / 10.0, 125.0) for t in range(0, 3001)]
    assert convergence_check(window) is True


def test_convergence_check_rejects_out_of_band_sample():
    window = [(t / 10.0, 125.0) for t in range(0, 3001)]
    window[1500] = (150.0, 160.0)
    assert convergence_check(window) is False


def test_convergence_check_rejects_high_variance():
    # samples uniform over [100, 150]: std = 50/sqrt(12) ~ 14.4 > 5
    n = 301
    vals = np.linspace(100.0, 150.0, n)
    window = [(t / 10.0, float(v)) for t, v in enumerate(vals)]
    assert np.std(vals) > 5.0
    assert convergence_check(window) is False


def test_convergence_check_needs_thirty_seconds():
    window = [(t / 10.0, 125.0) for t in range(0, 200)]  # 20 s
    assert convergence_check(window) is False


def test_kred_train_zero_rates_leave_map_unchanged():
    spec = build_scenario("train", dict(aqm="kred", seed=5, duration=5.0))
    lp = LearnParams(eta_in=0.0, eta_out=0.0, radius=0.0, decay=1.0,
                     eta_floor=0.0, radius_floor=0.0, explore_sigma=0.0)
    reference = SomMap.random(substream(5, "som"))
    result = kred_train(spec, lp=lp, seed=5)
    assert not result.converged  # 5 s cannot satisfy a 30 s window
    assert result.map == reference


def test_kred_train_is_deterministic(tmp_path):
    spec = build_scenario("train", dict(aqm="kred", seed=9, duration=40.0))
    maps = []
    for i in range(2):
        result = kred_train(spec, seed=9)
        path = tmp_path / f"m{i}.ksom"
        save_map(result.map, path)
        maps.append(path.read_bytes())
    assert maps[0] == maps[1]


def test_kred_train_reports_nonconvergence():
    spec = build_scenario("train", dict(aqm="kred", seed=5, duration=20.0))
    result = kred_train(spec, seed=5)
    assert result.converged is False
    assert result.converged_at is None
    assert result.map.frozen is False
    assert len(result.log) == int(20.0 / 0.1) + 1
