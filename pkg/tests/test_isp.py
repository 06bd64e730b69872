"""Forward-chain tests against the independent scalar oracle."""

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import ispinvert as ii
from ispinvert.isp import run_stages

import oracles
from helpers import REF_PARAMS, rng

L_REF = (0.2, 0.3, 0.1)

# frozen from tests/oracles.py (pure-math reference), not from the package
REF_U_PRE = (0.4, 0.3, 0.16000000000000003)
REF_V = (0.4716000000000001, 0.2962, 0.08600000000000002)
REF_G = (0.7105987724558852, 0.5751900811582066, 0.3278544737331648)
REF_S = (0.7972172713167947, 0.6119349402256038, 0.25198445995596636)
S_AT_ZERO = 1.6007632000140055e-07


def test_forward_stages_match_frozen_oracle():
    st_vals = run_stages(np.array([L_REF]), REF_PARAMS)
    np.testing.assert_allclose(st_vals.u_pre[0], REF_U_PRE, rtol=0, atol=0)
    np.testing.assert_allclose(st_vals.v[0], REF_V, rtol=1e-15)
    np.testing.assert_allclose(st_vals.g[0], REF_G, rtol=1e-15)
    np.testing.assert_allclose(st_vals.s[0], REF_S, rtol=1e-15)


def test_forward_matches_oracle_on_random_pixels():
    r = rng(11, 0)
    l = r.uniform(-0.2, 1.2, (500, 3))  # deliberately includes clipping
    got = ii.forward_pixels(l, REF_PARAMS)
    want = np.array([oracles.forward(tuple(px)) for px in l])
    np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-16)


def test_dark_floor_value_is_frozen():
    s = ii.forward_pixels(np.zeros((1, 3)), REF_PARAMS)
    assert s[0, 0] == S_AT_ZERO
    assert s[0, 1] == S_AT_ZERO  # epsilon floor is channel-independent
    full = ii.forward_pixels(np.ones((1, 3)), REF_PARAMS)
    np.testing.assert_array_equal(full, 1.0)


def test_tone_map_fixed_points():
    g = np.array([0.0, 0.25, 0.5, 1.0])
    np.testing.assert_array_equal(ii.tone_map(g), [0.0, 0.15625, 0.5, 1.0])


def test_tone_map_is_monotone_on_unit_interval():
    g = np.linspace(0.0, 1.0, 4097)
    s = ii.tone_map(g)
    assert (np.diff(s) >= 0.0).all()


def test_stage_helpers_compose_to_forward(ref_params):
    l = rng(11, 1).uniform(0, 1, (40, 3))
    u = ii.white_balance(l, ref_params)
    v = ii.color_correct(u, ref_params)
    g = ii.gamma_compress(v, ref_params)
    s = ii.tone_map(g)
    np.testing.assert_array_equal(s, ii.forward_pixels(l, ref_params))


def test_forward_isp_types_and_clamp_count(caplog):
    arr = np.full((2, 2, 3), 0.5)
    arr[0, 0, 0] = -0.25
    arr[1, 1, 2] = 1.5
    with caplog.at_level(logging.WARNING, logger="ispinvert"):
        img = ii.LinearImage.from_array(arr)
    assert img.n_clamped == 2
    assert img.data[0, 0, 0] == 0.0 and img.data[1, 1, 2] == 1.0
    assert any("clamped 2" in r.message for r in caplog.records)
    out = ii.forward_isp(img, REF_PARAMS)
    assert isinstance(out, ii.SrgbImage)
    assert out.data.shape == (2, 2, 3)
    assert not out.data.flags.writeable


def test_non_finite_input_reports_pixel():
    arr = np.full((3, 4, 3), 0.5)
    arr[2, 1, 0] = np.nan
    with pytest.raises(ii.NonFiniteInputError) as exc:
        ii.LinearImage.from_array(arr)
    assert exc.value.pixel == (2, 1)


@pytest.mark.parametrize("shape", [(4, 3), (4, 4, 2), (4,), (2, 2, 3, 1)])
def test_bad_shapes_rejected(shape):
    with pytest.raises(ii.ShapeMismatchError):
        ii.LinearImage.from_array(np.zeros(shape))


def test_params_validation():
    with pytest.raises(ii.InvalidParamsError):
        ii.IspParams(wb_gains=np.array([1.0, 0.0, 1.0]), ccm=np.eye(3))
    with pytest.raises(ii.InvalidParamsError):
        ii.IspParams(wb_gains=np.ones(3), ccm=np.eye(3), gamma=0.0)
    with pytest.raises(ii.InvalidParamsError):
        ii.IspParams(wb_gains=np.ones(3), ccm=np.eye(3), epsilon=1.0)
    with pytest.raises(ii.InvalidParamsError):
        ii.IspParams(wb_gains=np.ones(3), ccm=np.full((3, 3), np.inf))
    p = ii.IspParams(wb_gains=np.ones(3), ccm=np.eye(3))
    assert p.alpha == 1.0 / 2.2
    assert p.ccm_rows_normalized
    q = ii.IspParams(wb_gains=np.ones(3), ccm=2.0 * np.eye(3))
    assert not q.ccm_rows_normalized


def test_params_are_frozen_and_arrays_read_only(ref_params):
    with pytest.raises(Exception):
        ref_params.gamma = 2.4
    with pytest.raises(ValueError):
        ref_params.ccm[0, 0] = 5.0


def test_boundary_distance_zero_on_clip_edge(ref_params):
    l = np.array([[1.0 / ref_params.wb_gains[0], 0.2, 0.2]])
    assert ii.boundary_distance(l, ref_params)[0] == 0.0
    interior = np.array([[0.2, 0.3, 0.25]])
    assert ii.boundary_distance(interior, ref_params)[0] > 0.01


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, (3, 5, 3), elements=st.floats(0.0, 1.0)))
def test_forward_output_always_in_unit_interval(arr):
    s = ii.forward_pixels(arr, REF_PARAMS)
    assert np.isfinite(s).all()
    assert (s >= 0.0).all() and (s <= 1.0).all()


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_scalar_pixel_matches_oracle(a, b, c):
    got = ii.forward_pixels(np.array([[a, b, c]]), REF_PARAMS)[0]
    want = oracles.forward((a, b, c))
    assert math.isclose(got[0], want[0], rel_tol=1e-13, abs_tol=1e-15)
    assert math.isclose(got[1], want[1], rel_tol=1e-13, abs_tol=1e-15)
    assert math.isclose(got[2], want[2], rel_tol=1e-13, abs_tol=1e-15)
