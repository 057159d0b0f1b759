from __future__ import annotations

import numpy as np
import pytest

from synergrip.filters import EmaFilter, mean_contact_force


def primed(alpha, state):
    f = EmaFilter(alpha)
    f.update(state)
    return f


def test_midpoint_update():
    f = primed(0.5, 0.0)
    assert f.update(10.0) == pytest.approx(5.0)


def test_constant_stream_is_a_fixed_point():
    f = primed(0.7, 100.0)
    assert f.update(100.0) == pytest.approx(100.0)


def test_three_step_convergence_example():
    # hand-iterated: 0.7*100+0.3*0=70, then 91, then 97.3
    f = primed(0.7, 0.0)
    assert f.update(100.0) == pytest.approx(70.0, abs=1e-9)
    assert f.update(100.0) == pytest.approx(91.0, abs=1e-9)
    assert f.update(100.0) == pytest.approx(97.3, abs=1e-9)


def test_first_sample_seeds_state():
    f = EmaFilter(0.3)
    assert not f.initialized
    assert f.update(42.0) == 42.0
    assert f.initialized


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5, float("nan"), float("inf")])
def test_alpha_outside_open_interval_rejected(alpha):
    with pytest.raises(ValueError):
        EmaFilter(alpha)


def test_non_finite_sample_rejected_state_unchanged():
    f = primed(0.5, 10.0)
    with pytest.raises(ValueError, match="rejected"):
        f.update(float("nan"))
    assert f.state == 10.0


def test_reset_clears_history():
    f = primed(0.5, 10.0)
    f.reset()
    assert f.update(4.0) == 4.0


def test_output_is_convex_combination():
    rng = np.random.default_rng(123)
    for _ in range(300):
        alpha = rng.uniform(0.01, 0.99)
        prev = rng.uniform(-1e4, 1e4)
        s = rng.uniform(-1e4, 1e4)
        f = primed(alpha, prev)
        out = f.update(s)
        lo, hi = min(prev, s), max(prev, s)
        assert lo - 1e-9 <= out <= hi + 1e-9


def test_constant_input_error_shrinks_by_one_minus_alpha():
    rng = np.random.default_rng(321)
    for _ in range(100):
        alpha = rng.uniform(0.05, 0.95)
        c = rng.uniform(-100, 100)
        f = primed(alpha, rng.uniform(-100, 100))
        for _ in range(5):
            before = abs(f.state - c)
            f.update(c)
            after = abs(f.state - c)
            assert after == pytest.approx((1 - alpha) * before, rel=1e-9, abs=1e-12)


def test_mean_contact_force_examples():
    assert mean_contact_force([50.0]) == 50.0
    assert mean_contact_force([40.0, 60.0]) == 50.0
    assert mean_contact_force([30.0, 60.0, 90.0]) == 60.0


def test_mean_contact_force_rejects_empty_set():
    with pytest.raises(ValueError, match="empty"):
        mean_contact_force([])
