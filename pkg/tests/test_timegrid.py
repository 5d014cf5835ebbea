"""Time grids and the L2 projection between them.

The projection is checked against an independent oracle that integrates the
source field over each target slab by brute-force overlap computation.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stokes_darcy_dd.timegrid import PiecewiseConstantTimeField, TimeGrid, project, uniform_grid


def overlap_oracle(src_bp, src_vals, tgt_bp):
    out = np.zeros((len(tgt_bp) - 1, src_vals.shape[1]))
    for j in range(len(tgt_bp) - 1):
        a, b = tgt_bp[j], tgt_bp[j + 1]
        for i in range(len(src_bp) - 1):
            ov = min(b, src_bp[i + 1]) - max(a, src_bp[i])
            if ov > 0:
                out[j] += ov * src_vals[i]
        out[j] /= b - a
    return out


def random_grid(rng, T, max_n=20):
    n = rng.integers(1, max_n + 1)
    inner = np.sort(rng.uniform(0, T, n - 1))
    bp = np.concatenate([[0.0], inner, [T]])
    if np.any(np.diff(bp) <= 1e-9 * T):
        return uniform_grid(T, n)
    return TimeGrid(bp)


def test_uniform_grid_examples():
    np.testing.assert_allclose(uniform_grid(1.0, 4).breakpoints, [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(uniform_grid(0.01, 5).steps, 0.002)
    np.testing.assert_allclose(uniform_grid(1.0, 1).breakpoints, [0, 1.0])


@pytest.mark.parametrize("bp", [[0.0], [0.1, 1.0], [0.0, 0.5, 0.5, 1.0], [0.0, 0.6, 0.4, 1.0]])
def test_invalid_grids(bp):
    with pytest.raises(ValueError):
        TimeGrid(bp)


def test_field_shape_is_checked():
    with pytest.raises(ValueError):
        PiecewiseConstantTimeField(uniform_grid(1.0, 3), np.zeros((2, 4)))


def test_fine_to_coarse_hand_example():
    f = PiecewiseConstantTimeField(uniform_grid(1.0, 2), [[1.0], [3.0]])
    np.testing.assert_allclose(project(f, uniform_grid(1.0, 1)).values, [[2.0]])


def test_shifted_grids_hand_example():
    f = PiecewiseConstantTimeField(TimeGrid([0.0, 0.4, 1.0]), [[1.0], [2.0]])
    np.testing.assert_allclose(project(f, uniform_grid(1.0, 2)).values, [[1.2], [2.0]], rtol=1e-14)


def test_identity_projection():
    f = PiecewiseConstantTimeField(uniform_grid(2.0, 7), np.random.default_rng(0).normal(size=(7, 3)))
    np.testing.assert_array_equal(project(f, uniform_grid(2.0, 7)).values, f.values)


def test_horizon_mismatch():
    f = PiecewiseConstantTimeField.zeros(uniform_grid(1.0, 2), 1)
    with pytest.raises(ValueError, match="horizon"):
        project(f, uniform_grid(1.5, 2))


def test_oracle_corpus_200_pairs():
    rng = np.random.default_rng(20240611)
    for _ in range(200):
        T = rng.uniform(0.1, 5.0)
        src, tgt = random_grid(rng, T), random_grid(rng, T)
        vals = rng.normal(size=(src.n, 3))
        f = PiecewiseConstantTimeField(src, vals)
        got = project(f, tgt).values
        want = overlap_oracle(src.breakpoints, vals, tgt.breakpoints)
        assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.abs(want).max())
        # identity, constants and integrals on the same corpus
        np.testing.assert_array_equal(project(f, src).values, vals)
        c = project(PiecewiseConstantTimeField.constant(src, [2.5]), tgt).values
        np.testing.assert_allclose(c, 2.5, rtol=1e-12)
        np.testing.assert_allclose(project(f, tgt).integral(), f.integral(), rtol=1e-12, atol=1e-12)


def test_round_trip_through_refinement():
    coarse = uniform_grid(1.0, 4)
    fine = TimeGrid(np.sort(np.concatenate([coarse.breakpoints, [0.1, 0.3, 0.33, 0.9]])))
    f = PiecewiseConstantTimeField(coarse, np.arange(8.0).reshape(4, 2))
    back = project(project(f, fine), coarse)
    np.testing.assert_allclose(back.values, f.values, rtol=1e-13)


def test_breakpoint_drift_is_absorbed():
    a = uniform_grid(0.3, 3)
    b = TimeGrid(np.array([0.0, 0.1 + 1e-15, 0.2 - 1e-15, 0.3]))
    f = PiecewiseConstantTimeField(a, [[1.0], [2.0], [3.0]])
    np.testing.assert_allclose(project(f, b).values.ravel(), [1.0, 2.0, 3.0], rtol=1e-12)


@st.composite
def grid_pairs(draw):
    T = draw(st.floats(0.1, 10.0))
    cuts = st.lists(st.floats(0.01, 0.99), max_size=19, unique=True)
    g1 = TimeGrid(np.concatenate([[0.0], np.sort(draw(cuts)) * T, [T]]))
    g2 = TimeGrid(np.concatenate([[0.0], np.sort(draw(cuts)) * T, [T]]))
    vals = draw(st.lists(st.floats(-100, 100), min_size=g1.n, max_size=g1.n))
    return g1, g2, np.array(vals)[:, None]


@settings(max_examples=150, deadline=None)
@given(grid_pairs())
def test_projection_properties(pair):
    g1, g2, vals = pair
    f = PiecewiseConstantTimeField(g1, vals)
    p = project(f, g2)
    scale = max(1.0, np.abs(vals).max())
    # max-norm contraction and integral preservation
    assert np.abs(p.values).max() <= np.abs(vals).max() * (1 + 1e-12) + 1e-300
    assert abs(p.integral()[0] - f.integral()[0]) <= 1e-12 * scale * g1.T
    np.testing.assert_allclose(p.values, overlap_oracle(g1.breakpoints, vals, g2.breakpoints),
                               rtol=1e-10, atol=1e-10 * scale)


def test_field_arithmetic():
    g = uniform_grid(1.0, 2)
    a = PiecewiseConstantTimeField(g, [[1.0, 2.0], [3.0, 4.0]])
    b = PiecewiseConstantTimeField.constant(g, [1.0, 1.0])
    np.testing.assert_allclose((a + b).values, [[2, 3], [4, 5]])
    np.testing.assert_allclose((a - b).values, [[0, 1], [2, 3]])
    np.testing.assert_allclose((a * 2).values, [[2, 4], [6, 8]])
    np.testing.assert_allclose(PiecewiseConstantTimeField.from_flat(g, a.ravel()).values, a.values)
    with pytest.raises(ValueError):
        a + PiecewiseConstantTimeField.zeros(uniform_grid(1.0, 3), 2)
