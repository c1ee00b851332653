import math

import pytest

from aqmlab.cartpole import (FAIL_ANGLE, FORCE_MAX, CartPole, angle_input,
                             force_to_output, output_to_force,
                             pole_balance_validate, reference_force,
                             run_episode, train_pole_som)
from aqmlab.som import SomMap
from aqmlab.engine import substream


def test_upright_equilibrium_is_stationary():
    pole = CartPole()
    for _ in range(500):
        pole.step(0.0)
    assert pole.theta == 0.0
    assert pole.x == 0.0


def test_unforced_pole_falls_from_small_angle():
    pole = CartPole(theta=0.01)
    steps = 0
    while not pole.fallen and steps < 2000:
        pole.step(0.0)
        steps += 1
    assert pole.fallen
    assert steps < 200


def test_reference_controller_balances():
    pole = CartPole(theta=0.05, theta_dot=0.2)
    for _ in range(2000):
        pole.step(reference_force(pole.theta, pole.theta_dot))
        assert not pole.fallen


def test_reference_force_saturates():
    assert reference_force(1.0, 1.0) == FORCE_MAX
    assert reference_force(-1.0, -1.0) == -FORCE_MAX


def test_angle_normalization_round_trip():
    a, b = angle_input(-FAIL_ANGLE, FAIL_ANGLE)
    assert a == pytest.approx(0.0)
    assert b == pytest.approx(1.0)
    mid, _ = angle_input(0.0, 0.0)
    assert mid == pytest.approx(0.5)
    clipped, _ = angle_input(10 * FAIL_ANGLE, 0.0)
    assert clipped == 1.0


def test_force_output_mapping_is_inverse():
    for f in (-10.0, -3.0, 0.0, 7.5, 10.0):
        assert output_to_force(force_to_output(f)) == pytest.approx(f)


def test_untrained_map_falls_quickly():
    rng = substream(11, "pole-test")
    som = SomMap.random(rng, out_init=(0.35, 0.65), out_bounds=(0.0, 1.0))
    som.freeze()
    start = CartPole(theta=math.radians(2.5), theta_dot=0.1)
    assert run_episode(som, start, max_steps=1200) < 1200


def test_trained_map_beats_untrained():
    rng = substream(12, "pole-test")
    untrained = SomMap.random(rng, out_init=(0.35, 0.65), out_bounds=(0.0, 1.0))
    untrained.freeze()
    from aqmlab.cartpole import pole_learn_params

    trained = train_pole_som(pole_learn_params(), seed=12, episodes=150)
    starts = [CartPole(theta=math.radians(a), theta_dot=v)
              for a, v in ((2.0, 0.1), (-1.5, -0.2), (2.8, -0.1))]
    for start in starts:
        t_steps = run_episode(trained, start, max_steps=800)
        u_steps = run_episode(untrained, start, max_steps=800)
        assert t_steps >= u_steps


def test_pole_balance_validate_report_shape():
    rep = pole_balance_validate(seed=42, episodes=60, eval_starts=5, eval_cap=300)
    assert len(rep.untrained_steps) == 5
    assert len(rep.trained_steps) == 5
    assert all(1 <= s <= 300 for s in rep.untrained_steps + rep.trained_steps)
