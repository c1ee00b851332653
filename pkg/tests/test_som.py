import math
import random

import numpy as np
import pytest

from aqmlab.engine import substream
from aqmlab.som import (FrozenMapError, LearnParams, SomFormatError, SomMap,
                        load_map, save_map)


def grid_map(rows=25, cols=25, out=0.1):
    """Map whose input weights form a regular grid over the unit square."""
    r = (np.arange(rows) + 0.5) / rows
    c = (np.arange(cols) + 0.5) / cols
    in_w = np.stack(np.meshgrid(r, c, indexing="ij"), axis=-1)
    out_w = np.full((rows, cols), out)
    return SomMap(in_w, out_w)


def test_winner_exact_match():
    som = grid_map()
    target = tuple(som.in_w[3, 7])
    assert som.winner(target) == (3, 7)


def test_winner_tie_breaks_to_smallest_row_major_index():
    in_w = np.zeros((4, 4, 2))
    out_w = np.zeros((4, 4))
    som = SomMap(in_w, out_w, out_bounds=(0.0, 1.0))
    assert som.winner((0.3, 0.3)) == (0, 0)


def test_winner_two_neuron_toy_map():
    in_w = np.array([[[0.0, 0.0], [1.0, 1.0]]])
    out_w = np.array([[0.2, 0.8]])
    som = SomMap(in_w, out_w, out_bounds=(0.0, 1.0))
    x = (0.1, 0.1)
    # squared distances: 0.02 vs 1.62
    d0 = (0.1 - 0.0) ** 2 * 2
    d1 = (0.1 - 1.0) ** 2 * 2
    assert d0 < d1
    assert som.winner(x) == (0, 0)


def test_respond_returns_winner_output():
    som = grid_map(out=0.07)
    assert som.respond((0.5, 0.5)) == pytest.approx(0.07)


def test_respond_frozen_map_is_reproducible():
    som = grid_map()
    som.freeze()
    x = (0.42, 0.77)
    assert som.respond(x) == som.respond(x)
    before = som.checksum()
    for _ in range(100):
        som.respond((random.random(), random.random()))
    assert som.checksum() == before


def test_train_step_zero_rates_change_nothing():
    som = grid_map()
    lp = LearnParams(eta_in=0.0, eta_out=0.0, radius=3.0, eta_floor=0.0)
    before_in = som.in_w.copy()
    before_out = som.out_w.copy()
    som.train_step((0.3, 0.6), 0.4, lp)
    assert np.array_equal(som.in_w, before_in)
    assert np.array_equal(som.out_w, before_out)


def test_train_step_radius_zero_moves_only_winner():
    som = grid_map()
    lp = LearnParams(eta_in=0.5, eta_out=0.5, radius=0.0, radius_floor=0.0)
    x = tuple(som.in_w[10, 10] + 0.001)
    before = som.in_w.copy()
    som.train_step(x, 0.4, lp)
    moved = np.argwhere(np.any(som.in_w != before, axis=2))
    assert moved.tolist() == [[10, 10]]


def test_train_step_winner_update_rule():
    in_w = np.zeros((1, 1, 2))
    out_w = np.array([[0.0]])
    som = SomMap(in_w, out_w, out_bounds=(0.0, 1.0))
    lp = LearnParams(eta_in=0.5, eta_out=0.25, radius=0.0, radius_floor=0.0)
    som.train_step((1.0, 1.0), 0.8, lp)
    # w += eta * (x - w)
    assert som.in_w[0, 0, 0] == pytest.approx(0.5, rel=1e-12)
    assert som.in_w[0, 0, 1] == pytest.approx(0.5, rel=1e-12)
    assert som.out_w[0, 0] == pytest.approx(0.2, rel=1e-12)


def test_train_step_fixpoint():
    som = grid_map()
    lp = LearnParams(eta_in=0.3, eta_out=0.3, radius=2.0)
    wr, wc = 5, 5
    x = tuple(som.in_w[wr, wc])
    target = float(som.out_w[wr, wc])
    before_in = som.in_w[wr, wc].copy()
    before_out = float(som.out_w[wr, wc])
    som.train_step(x, target, lp)
    assert som.in_w[wr, wc] == pytest.approx(before_in)
    assert som.out_w[wr, wc] == pytest.approx(before_out)


def test_neighborhood_monotone_in_grid_distance():
    som = grid_map()
    lp = LearnParams(eta_in=0.5, eta_out=0.0, radius=4.0, eta_floor=0.0)
    x = (som.in_w[12, 12, 0] + 1e-6, som.in_w[12, 12, 1])
    before = som.in_w.copy()
    som.train_step(x, 0.1, lp)
    # per-neuron applied factor eta*h = |w' - w| / |x - w|
    dist_to_x = np.linalg.norm(before - np.asarray(x), axis=2)
    shift = np.linalg.norm(som.in_w - before, axis=2)
    factor = shift / dist_to_x
    rr, cc = np.meshgrid(np.arange(25), np.arange(25), indexing="ij")
    cheb = np.maximum(np.abs(rr - 12), np.abs(cc - 12))
    ring_factor = [factor[cheb == d].max() for d in range(0, 5)]
    assert all(a >= b - 1e-12 for a, b in zip(ring_factor, ring_factor[1:]))
    # outside the radius nothing moves
    assert shift[cheb > 4].max() == 0.0


def test_training_converges_to_constant_mapping():
    rng = substream(3, "som-test")
    som = SomMap.random(rng, out_bounds=(0.0, 1.0), out_init=(0.4, 0.6))
    lp = LearnParams(eta_in=0.3, eta_out=0.3, radius=4.0, decay=0.999,
                     eta_floor=0.05, radius_floor=0.5)
    x, target = (0.3, 0.7), 0.85
    for _ in range(2000):
        som.train_step(x, target, lp)
        lp.decay_step()
    assert som.respond(x) == pytest.approx(target, abs=1e-3)


def test_inputs_stay_in_convex_hull():
    rng = substream(4, "som-test")
    som = SomMap.random(rng, out_bounds=(0.0, 1.0))
    lp = LearnParams(eta_in=0.4, eta_out=0.1, radius=5.0)
    lo = som.in_w.min()
    hi = som.in_w.max()
    points = [(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)) for _ in range(300)]
    lo = min([lo] + [min(p) for p in points])
    hi = max([hi] + [max(p) for p in points])
    for p in points:
        som.train_step(p, rng.random(), lp)
        lp.decay_step()
    assert som.in_w.min() >= lo - 1e-12
    assert som.in_w.max() <= hi + 1e-12


def test_train_frozen_map_raises():
    som = grid_map()
    som.freeze()
    with pytest.raises(FrozenMapError):
        som.train_step((0.5, 0.5), 0.3, LearnParams())


def test_out_weights_clamped_to_bounds():
    som = grid_map(out=0.45)
    lp = LearnParams(eta_in=0.0, eta_out=1.0, radius=0.0, radius_floor=0.0,
                     eta_floor=0.0)
    som.train_step((0.5, 0.5), 5.0, lp)
    assert som.out_w.max() <= som.out_hi


def test_learn_params_validation():
    with pytest.raises(ValueError):
        LearnParams(eta_in=-0.1)
    with pytest.raises(ValueError):
        LearnParams(radius=-1.0)
    with pytest.raises(ValueError):
        LearnParams(decay=0.0)


def test_decay_respects_floors():
    lp = LearnParams(eta_in=0.02, eta_out=0.02, radius=1.5, decay=0.5,
                     eta_floor=0.01, radius_floor=1.0)
    for _ in range(10):
        lp.decay_step()
    assert lp.eta_in == 0.01
    assert lp.radius == 1.0


def test_save_load_round_trip(tmp_path):
    rng = substream(5, "som-test")
    som = SomMap.random(rng)
    path = tmp_path / "map.ksom"
    save_map(som, path)
    loaded = load_map(path)
    assert loaded == som
    assert loaded.rows == som.rows and loaded.cols == som.cols


def test_round_trip_on_random_maps(tmp_path):
    rng = substream(6, "som-test")
    for i in range(100):
        rows = rng.randint(1, 8)
        cols = rng.randint(1, 8)
        som = SomMap.random(rng, rows=rows, cols=cols, out_init=(0.001, 0.5))
        path = tmp_path / f"m{i}.ksom"
        save_map(som, path)
        assert load_map(path) == som


def test_load_rejects_header_dimension_mismatch(tmp_path):
    som = grid_map(rows=3, cols=3)
    path = tmp_path / "bad.ksom"
    save_map(som, path)
    lines = path.read_text().splitlines()
    lines[0] = "KSOM 1 2 3 2 1"  # header claims fewer rows than the body has
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SomFormatError, match="mismatch"):
        load_map(path)


def test_load_rejects_out_of_range_output_weight(tmp_path):
    som = grid_map(rows=2, cols=2)
    path = tmp_path / "bad.ksom"
    save_map(som, path)
    lines = path.read_text().splitlines()
    parts = lines[1].split()
    parts[4] = "1.5"
    lines[1] = " ".join(parts)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SomFormatError, match="outside"):
        load_map(path)


def test_load_reports_line_numbers(tmp_path):
    som = grid_map(rows=2, cols=2)
    path = tmp_path / "bad.ksom"
    save_map(som, path)
    lines = path.read_text().splitlines()
    lines[2] = "0 1 not-a-number 0.5 0.1"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SomFormatError, match=":3:"):
        load_map(path)


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.ksom"
    path.write_text("NOTKSOM 1 2 2 2 1\n")
    with pytest.raises(SomFormatError):
        load_map(path)


def test_loaded_map_is_frozen(tmp_path):
    som = grid_map(rows=2, cols=2)
    path = tmp_path / "m.ksom"
    save_map(som, path)
    assert load_map(path).frozen
