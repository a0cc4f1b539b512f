import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from cubic import evaluation as ev
from cubic.errors import DegenerateMetricError


def test_ic_examples(rng):
    x = rng.normal(size=50)
    assert ev.ic(x, x) == pytest.approx(1.0)
    assert ev.ic(-x, x) == pytest.approx(-1.0)
    assert ev.ic([1, 2, 3], [1, 2, 2]) == pytest.approx(0.8660254, abs=1e-6)


def test_ic_matches_oracle(rng):
    for _ in range(20):
        p, a = rng.normal(size=30), rng.normal(size=30)
        assert ev.ic(p, a) == pytest.approx(oracles.pearson(list(p), list(a)), abs=1e-12)


@settings(max_examples=50)
@given(st.floats(0.1, 100), st.floats(-10, 10), st.integers(0, 10**6))
def test_ic_affine_invariant(scale, shift, seed):
    r = np.random.default_rng(seed)
    p, a = r.normal(size=40), r.normal(size=40)
    assert ev.ic(scale * p + shift, a) == pytest.approx(ev.ic(p, a), abs=1e-9)


def test_ic_degenerate():
    with pytest.raises(DegenerateMetricError):
        ev.ic([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ev.ic([1.0], [2.0])


def test_icir_window_arithmetic():
    assert ev.icir_from_ics([0.2, 0.4]) == (pytest.approx(3.0), False)
    value, degenerate = ev.icir_from_ics([0.5, 0.5])
    assert degenerate and value == pytest.approx(0.5 / ev.EPS)


def test_icir_perfect_prediction_is_degenerate(rng):
    x = rng.normal(size=63)
    ics = ev.window_ics(x, x)
    assert np.allclose(ics, 1.0) and len(ics) == 3
    assert ev.icir(x, x)[1]


def test_icir_windows_are_non_overlapping(rng):
    p, a = rng.normal(size=50), rng.normal(size=50)
    ics = ev.window_ics(p, a, 21)
    assert ics.tolist() == pytest.approx([ev.ic(p[:21], a[:21]), ev.ic(p[21:42], a[21:42])])
    with pytest.raises(ValueError):
        ev.window_ics(p[:30], a[:30], 21)


def test_direction_accuracy():
    assert ev.direction_accuracy([1, -2, 3], [4, -5, 6]) == 1.0
    assert ev.direction_accuracy([1, -2, 3], [-4, 5, -6]) == 0.0
    assert ev.direction_accuracy([1, -1, 1, 1], [1, 1, 1, -1]) == 0.5
    # zero counts as positive
    assert ev.direction_accuracy([0.0], [0.1]) == 1.0


def test_metric_block_flags():
    blk = ev.metric_block(np.ones(10), np.arange(10.0))
    assert blk.ic is None and blk.icir is None and blk.da == 1.0
    assert any(f.startswith("ic:") for f in blk.flags)
    assert blk.to_dict()["n_days"] == 10
