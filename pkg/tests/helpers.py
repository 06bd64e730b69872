"""Shared test utilities (samplers and finite differences)."""

import numpy as np

from ispinvert import IspParams, boundary_distance, forward_pixels

REF_PARAMS = IspParams(
    wb_gains=np.array([2.0, 1.0, 1.6]),
    ccm=np.array([[1.52, -0.38, -0.14],
                  [-0.29, 1.47, -0.18],
                  [-0.04, -0.46, 1.50]]),
)


def rng(*key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def interior_pixels(r, params, count, lo=0.05, hi=0.55, min_dist=1e-3):
    """Random pixels whose every stage sits at least min_dist from a clip."""
    out = np.empty((count, 3))
    filled = 0
    while filled < count:
        cand = r.uniform(lo, hi, (count, 3))
        ok = boundary_distance(cand, params) > min_dist
        kept = cand[ok][:count - filled]
        out[filled:filled + kept.shape[0]] = kept
        filled += kept.shape[0]
    return out


def clip_free_pixels(r, params, count, lo=0.02, hi=0.45, min_dist=1e-3):
    """Random pixels where no stage clips (one-sided interior margins).

    Unlike interior_pixels (two-sided distance, fine for finite differences on
    either branch), these are guaranteed to round-trip through the closed-form
    stage inverses.
    """
    from ispinvert import run_stages

    out = np.empty((count, 3))
    filled = 0
    while filled < count:
        cand = r.uniform(lo, hi, (count, 3))
        st = run_stages(cand, params)
        ok = (
            (st.u_pre.min(axis=-1) >= min_dist)
            & (st.u_pre.max(axis=-1) <= 1.0 - min_dist)
            & (st.v.min(axis=-1) >= params.epsilon + min_dist)
            # g <= 1 keeps the cubic tone curve on its monotonic branch,
            # which is what the closed-form inverse assumes
            & (st.g.max(axis=-1) <= 1.0 - min_dist)
            & (st.s_pre.min(axis=-1) >= min_dist)
            & (st.s_pre.max(axis=-1) <= 1.0 - min_dist)
        )
        kept = cand[ok][:count - filled]
        out[filled:filled + kept.shape[0]] = kept
        filled += kept.shape[0]
    return out


def fd_jacobian(l, params, h=1e-6):
    """Central-difference Jacobian of the raw forward chain."""
    l = np.asarray(l, dtype=np.float64)
    squeeze = l.ndim == 1
    if squeeze:
        l = l[None]
    j = np.empty(l.shape[:-1] + (3, 3))
    for col in range(3):
        lp = l.copy()
        lm = l.copy()
        lp[..., col] += h
        lm[..., col] -= h
        j[..., :, col] = (forward_pixels(lp, params) - forward_pixels(lm, params)) / (2.0 * h)
    return j[0] if squeeze else j
