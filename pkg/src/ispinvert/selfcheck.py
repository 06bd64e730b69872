"""Built-in numerical self-test.

Four independent checks, each with a frozen threshold:

1. analytic Jacobian vs. central finite differences at interior pixels
2. quadratic scaling of the linearization remainder (fitted exponent ~ 2)
3. SVD contracts on random 3x3 matrices (orthonormality, reconstruction,
   descending order), including rank-deficient and badly scaled inputs
4. tone-curve round trip through the closed-form inverse

Used by ``ispinvert check`` to validate an installation without the test
suite present.
"""

from __future__ import annotations

import numpy as np

from .isp import IspParams, boundary_distance, forward_pixels, tone_map
from .jacobian import jacobian_pixels
from .linalg3 import svd3
from .metrics import remainder_scaling_check
from .naive import inverse_tone_map

_FD_STEP = 1e-6
_FD_TOL = 1e-5
_EXP_TOL = 0.1
_SVD_TOL = 1e-10
_TONE_TOL = 1e-12

_CHECK_PARAMS = IspParams(
    wb_gains=np.array([2.0, 1.0, 1.6]),
    ccm=np.array([[1.52, -0.38, -0.14],
                  [-0.29, 1.47, -0.18],
                  [-0.04, -0.46, 1.50]]),
)


def _interior_pixels(rng, params, count):
    out = np.empty((count, 3))
    filled = 0
    while filled < count:
        cand = rng.uniform(0.05, 0.55, (count, 3))
        ok = boundary_distance(cand, params) > 1e-3
        kept = cand[ok][:count - filled]
        out[filled:filled + kept.shape[0]] = kept
        filled += kept.shape[0]
    return out


def _fd_jacobian(l, params, h=_FD_STEP):
    n = l.shape[0]
    j = np.empty((n, 3, 3))
    for col in range(3):
        lp = l.copy()
        lm = l.copy()
        lp[:, col] += h
        lm[:, col] -= h
        j[:, :, col] = (forward_pixels(lp, params) - forward_pixels(lm, params)) / (2.0 * h)
    return j


def check_jacobian_fd(seed=0, count=500) -> dict:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 101])))
    l = _interior_pixels(rng, _CHECK_PARAMS, count)
    analytic = jacobian_pixels(l, _CHECK_PARAMS)
    err = float(np.abs(analytic - _fd_jacobian(l, _CHECK_PARAMS)).max())
    return {"name": "jacobian_vs_finite_differences", "value": err,
            "threshold": _FD_TOL, "passed": err <= _FD_TOL}


def check_remainder_exponent(seed=0, count=4096) -> dict:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 102])))
    l = _interior_pixels(rng, _CHECK_PARAMS, count)
    direction = rng.normal(size=l.shape)
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    p = remainder_scaling_check(l, 1e-3 * direction, _CHECK_PARAMS)
    return {"name": "remainder_quadratic_exponent", "value": p,
            "threshold": _EXP_TOL, "passed": abs(p - 2.0) <= _EXP_TOL}


def check_svd_contracts(seed=0, count=2000) -> dict:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 103])))
    a = rng.normal(size=(count, 3, 3))
    a[: count // 4] *= 10.0 ** rng.uniform(-6, 6, (count // 4, 1, 1))
    a[count // 4: count // 2, 2] = a[count // 4: count // 2, 0]  # rank deficient
    a[count // 2: count // 2 + 8] = 0.0
    u, sig, v = svd3(a)
    eye = np.eye(3)
    worst = 0.0
    worst = max(worst, float(np.abs(np.swapaxes(u, -1, -2) @ u - eye).max()))
    worst = max(worst, float(np.abs(np.swapaxes(v, -1, -2) @ v - eye).max()))
    recon = u * sig[..., None, :] @ np.swapaxes(v, -1, -2)
    scale = np.maximum(1.0, sig[..., 0])[..., None, None]
    worst = max(worst, float((np.abs(recon - a) / scale).max()))
    ordered = bool(((sig[..., 0] >= sig[..., 1]) & (sig[..., 1] >= sig[..., 2])
                    & (sig[..., 2] >= 0.0)).all())
    return {"name": "svd3_contracts", "value": worst, "threshold": _SVD_TOL,
            "passed": ordered and worst <= _SVD_TOL}


def check_tone_round_trip() -> dict:
    s = np.linspace(0.0, 1.0, 100001)
    err = float(np.abs(tone_map(inverse_tone_map(s)) - s).max())
    return {"name": "tone_round_trip", "value": err, "threshold": _TONE_TOL,
            "passed": err <= _TONE_TOL}


def run_self_test(seed: int = 0) -> dict:
    checks = [
        check_jacobian_fd(seed),
        check_remainder_exponent(seed),
        check_svd_contracts(seed),
        check_tone_round_trip(),
    ]
    return {"checks": checks, "passed": all(c["passed"] for c in checks)}
