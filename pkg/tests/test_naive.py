"""Closed-form stage-by-stage inversion: exactness where no clipping occurred."""

import numpy as np
import pytest

import ispinvert as ii

import oracles
from helpers import REF_PARAMS, clip_free_pixels, rng


def test_tone_inverse_fixed_points_exact():
    x = np.array([0.0, 0.25, 0.5, 1.0])
    y = ii.tone_map(x)
    out = ii.inverse_tone_map(y)
    assert out[0] == 0.0 and out[3] == 1.0
    assert out[2] == 0.5  # smoothstep fixed point
    assert abs(out[1] - 0.25) <= 1e-15


def test_tone_inverse_matches_bisection_oracle():
    grid = np.linspace(0.0, 1.0, 1000)
    got = ii.inverse_tone_map(grid)
    want = np.array([oracles.tone_inverse(float(s)) for s in grid])
    assert np.abs(got - want).max() <= 1e-12


def test_inverse_gamma_literal():
    g = np.array([0.5])
    v = ii.inverse_gamma(g, REF_PARAMS)
    assert v[0] == 0.217637640824031  # 0.5 ** 2.2


def test_naive_round_trip_is_near_exact_on_interior():
    r = rng(51, 0)
    l = clip_free_pixels(r, REF_PARAMS, 4096).reshape(64, 64, 3)
    s = ii.forward_pixels(l, REF_PARAMS)
    l_hat = ii.naive_invert_pixels(s, REF_PARAMS)
    assert np.abs(l_hat - l).max() <= 1e-10


def test_naive_invert_image_wrapper(interior_image):
    s_b = ii.forward_isp(interior_image, REF_PARAMS)
    out = ii.naive_invert_image(s_b, REF_PARAMS)
    assert isinstance(out, ii.LinearImage)
    assert np.abs(out.data - interior_image.data).max() <= 1e-10


def test_naive_loses_information_under_clipping():
    l = np.full((1, 1, 3), 0.9)  # u_pre = (1.8, 0.9, 1.44) -> two channels clip
    s = ii.forward_pixels(l, REF_PARAMS)
    l_hat = ii.naive_invert_pixels(s, REF_PARAMS)
    err = np.abs(l_hat - l)
    assert err.max() > 1e-3


def test_naive_singular_ccm_raises():
    params = ii.IspParams(
        wb_gains=np.ones(3),
        ccm=np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]),
    )
    s = np.full((2, 2, 3), 0.5)
    with pytest.raises(ii.SingularMatrixError):
        ii.naive_invert_pixels(s, params)


def test_naive_output_clipped_to_unit_range():
    r = rng(51, 1)
    s = r.uniform(0.0, 1.0, size=(16, 16, 3))
    out = ii.naive_invert_pixels(s, REF_PARAMS)
    assert out.min() >= 0.0 and out.max() <= 1.0
