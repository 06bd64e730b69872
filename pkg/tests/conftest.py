import numpy as np
import pytest

import ispinvert as ii
from helpers import REF_PARAMS

# one line per acceptance criterion, printed after the run (see
# pytest_terminal_summary); tests append "Ax PASS/FAIL: <measurements>"
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_params():
    return REF_PARAMS


@pytest.fixture(scope="session")
def stress_case():
    """One canonical stress case shared by the slower tests."""
    cfg = ii.SynthConfig(seed=33, count=1, height=96, width=96,
                         saturation_fraction=0.3, near_boundary_fraction=0.05,
                         perturbation_scale=0.02)
    params, l_b, s_b, s_d = ii.make_case(cfg, 0)
    return cfg, params, l_b, s_b, s_d


@pytest.fixture(scope="session")
def interior_image(ref_params):
    """64x64 image with every pixel clip-free under REF_PARAMS."""
    from helpers import clip_free_pixels, rng
    l = clip_free_pixels(rng(2024, 1), ref_params, 64 * 64).reshape(64, 64, 3)
    return ii.LinearImage.from_array(l)
