"""Acceptance gate: the ten release criteria, one test per criterion.

Each test appends one "Ax PASS/FAIL: <measured values>" line to the summary
section printed after the run. Tolerances are pinned here and are not to be
loosened. The only host-dependent sub-criterion (parallel efficiency of the
1024x1024 inversion) is skipped with a loud reason on machines with fewer
than 8 cores; everything else runs everywhere.
"""

import os
import time

import numpy as np
import pytest

import ispinvert as ii
from ispinvert.invert import _tsvd_filters

from conftest import ACCEPTANCE_LINES
from helpers import REF_PARAMS, clip_free_pixels, fd_jacobian, interior_pixels, rng


def _record(tag, ok, detail):
    ACCEPTANCE_LINES.append(f"{tag} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{tag}: {detail}"


@pytest.fixture(scope="module")
def stress_corpus():
    """20 stress cases, 128x128, 30% saturated, 0.02 sRGB perturbation."""
    cfg = ii.SynthConfig(seed=202, count=20, height=128, width=128,
                         saturation_fraction=0.3, perturbation_scale=0.02)
    return cfg, [ii.make_case(cfg, i) for i in range(cfg.count)]


def test_a01_jacobian_matches_finite_differences():
    """A1: analytic Jacobian vs central differences on 10k interior pixels."""
    t0 = time.perf_counter()
    h = 1e-6
    worst_excess = -np.inf
    worst_rel = 0.0
    n_checked = 0
    for case in range(5):
        if case == 0:
            params = REF_PARAMS
        else:
            cfg = ii.SynthConfig(seed=case)
            params = ii.random_isp_params(cfg, ii.rng_for(cfg.seed, 0, ii.STREAM_PARAMS))
        r = rng(101, case)
        l = interior_pixels(r, params, 2000, min_dist=1e-3)
        jac = ii.jacobian_pixels(l, params)
        fd = fd_jacobian(l, params, h=h)
        err = np.abs(jac - fd)
        allow = np.maximum(1e-8, 1e-5 * np.abs(fd))
        worst_excess = max(worst_excess, float((err - allow).max()))
        big = np.abs(fd) > 1e-3
        worst_rel = max(worst_rel, float((err[big] / np.abs(fd)[big]).max()))
        n_checked += l.shape[0]
    elapsed = time.perf_counter() - t0
    ok = worst_excess <= 0.0 and elapsed < 10.0 and n_checked == 10000
    _record("A1", ok,
            f"{n_checked} pixels, max rel err {worst_rel:.2e} "
            f"(tolerance 1e-5, abs floor 1e-8), {elapsed:.2f}s (< 10s)")


def _well_conditioned_pixels(r, params, n):
    """Linear pixels with every intermediate far from a clip and sig3 healthy."""
    inv_ccm = np.linalg.inv(params.ccm)
    out = np.empty((n, 3))
    filled = 0
    while filled < n:
        v = r.uniform(0.2, 0.8, size=(n, 3))
        u = v @ inv_ccm.T
        ok = (u.min(axis=-1) >= 0.02) & (u.max(axis=-1) <= 0.98)
        kept = (u[ok] / params.wb_gains)[: n - filled]
        out[filled:filled + kept.shape[0]] = kept
        filled += kept.shape[0]
    return out


def test_a02_small_perturbations_recovered_on_well_conditioned_pixels():
    """A2: 100 seeds of 128x128; recovery error <= 1e-4 where sig3 >= 1e-3."""
    t0 = time.perf_counter()
    cond_min = ii.InversionConfig().cond_sigma_min
    worst = 0.0
    min_wc_frac = 1.0
    for seed in range(100):
        cfg = ii.SynthConfig(seed=seed)
        params = ii.random_isp_params(cfg, ii.rng_for(seed, 0, ii.STREAM_PARAMS))
        r = ii.rng_for(seed, 0, ii.STREAM_IMAGE)
        l_b = _well_conditioned_pixels(r, params, 128 * 128).reshape(128, 128, 3)
        direction = r.normal(size=l_b.shape)
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        dl_true = 2.5e-3 * direction  # per-pixel inf-norm <= 2.5e-3 (<= 5e-3)
        s_d = ii.forward_pixels(l_b + dl_true, params)
        l_hat, _ = ii.invert_image(s_d, None, l_b, params)
        sig = ii.singular_values3(ii.jacobian_pixels(l_b.reshape(-1, 3), params))
        wc = sig[:, 2] >= cond_min
        min_wc_frac = min(min_wc_frac, float(wc.mean()))
        err = np.abs((l_hat.data - (l_b + dl_true)).reshape(-1, 3)[wc]).max()
        worst = max(worst, float(err))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 30.0 and min_wc_frac > 0.9
    _record("A2", ok,
            f"100 seeds, max recovery err {worst:.2e} (<= 1e-4) on "
            f"well-conditioned pixels (>= {min_wc_frac:.1%} of image), "
            f"{elapsed:.2f}s (< 30s)")


def test_a03_remainder_is_second_order_with_lipschitz_bound():
    """A3: log-log remainder exponent in [1.9, 2.1] and the curvature bound."""
    r = rng(103, 0)
    l = interior_pixels(r, REF_PARAMS, 2000, min_dist=5e-2)
    delta = r.normal(size=l.shape)
    delta /= np.linalg.norm(delta, axis=-1, keepdims=True)
    amp = 4e-3
    delta *= amp
    exponent = ii.remainder_scaling_check(
        l, delta, REF_PARAMS, scales=(1.0, 0.5, 0.25, 0.125, 0.0625))
    # empirical curvature from a denser sweep of the same segments
    u_hat = ii.lipschitz_estimate(
        l, delta, REF_PARAMS, scales=tuple(np.linspace(1.0 / 32, 1.0, 32)))
    rem_max = float(ii.pixel_norms(ii.taylor_remainder(l, delta, REF_PARAMS)).max())
    bound = 0.5 * u_hat * amp * amp * 1.05
    ok = 1.9 <= exponent <= 2.1 and rem_max <= bound
    _record("A3", ok,
            f"exponent {exponent:.4f} (in [1.9, 2.1]); max remainder "
            f"{rem_max:.3e} <= bound {bound:.3e} (U_hat {u_hat:.3f})")


def test_a04_truncated_directions_carry_exactly_zero(stress_corpus):
    """A4: truncated coefficients are exact zeros; updates obey the norm cap."""
    _, cases = stress_corpus
    cfg_inv = ii.InversionConfig()
    n_tsvd_total = 0
    max_dot = 0.0
    norm_ok = True
    bit_identical = True
    for params, l_b, s_b, s_d in cases:
        l_d, report = ii.invert_image(s_d, s_b, l_b, params)
        lb = l_b.data.reshape(-1, 3)
        u, sig, v = ii.svd3(ii.jacobian_pixels(lb, params))
        zero = sig[:, 0] < cfg_inv.sigma_abs_floor
        well = sig[:, 2] >= cfg_inv.cond_sigma_min
        routed = ~zero & ~well
        assert int(routed.sum()) == report.n_tsvd
        if not routed.any():
            continue
        n_tsvd_total += int(routed.sum())
        ds = (s_d.data.reshape(-1, 3) - s_b.data.reshape(-1, 3))[routed]
        dl, _ = ii.tsvd_update((u[routed], sig[routed], v[routed]), ds, cfg_inv)
        bit_identical &= bool(np.array_equal(
            ii.blend_lambda_r(lb[routed], dl, 1.0),
            l_d.data.reshape(-1, 3)[routed]))
        filt, retained = _tsvd_filters([sig[routed][:, k] for k in range(3)], cfg_inv)
        for k in range(3):
            cut = ~retained[k]
            if not cut.any():
                continue
            assert (filt[k][cut] == 0.0).all()  # coefficient exactly zero
            dots = np.abs(np.einsum("pi,pi->p", v[routed][cut][:, :, k], dl[cut]))
            if dots.size:
                max_dot = max(max_dot, float(dots.max()))
        maxfilt = np.maximum(filt[0], np.maximum(filt[1], filt[2]))
        lhs = np.sqrt((dl * dl).sum(axis=-1))
        rhs = np.sqrt((ds * ds).sum(axis=-1)) * maxfilt * (1.0 + 1e-9)
        norm_ok &= bool((lhs <= rhs).all())
    ok = n_tsvd_total > 0 and bit_identical and max_dot <= 1e-13 and norm_ok
    _record("A4", ok,
            f"{n_tsvd_total} truncated-update pixels; coefficients exactly "
            f"0.0; realized |v_i . dL| <= {max_dot:.2e} (<= 1e-13); "
            f"norm cap held: {norm_ok}; path bit-identical: {bit_identical}")


def test_a05_method_ordering_on_stress_corpus(stress_corpus):
    """A5: aggregate linear-domain PSNR ranks robust > first-order > naive."""
    _, cases = stress_corpus
    sq = {"robust": 0.0, "first-order": 0.0, "naive": 0.0}
    count = 0
    for params, l_b, s_b, s_d in cases:
        rb, _ = ii.invert_image(s_d, s_b, l_b, params)
        fo, _ = ii.invert_image(s_d, s_b, l_b, params, method=ii.METHOD_FIRST_ORDER)
        nv = ii.naive_invert_image(s_d, params)
        for name, img in (("robust", rb), ("first-order", fo), ("naive", nv)):
            d = img.data - l_b.data
            sq[name] += float((d * d).sum())
        count += l_b.data.size
    psnr = {name: 10.0 * np.log10(count / s) for name, s in sq.items()}
    gap_rf = psnr["robust"] - psnr["first-order"]
    gap_fn = psnr["first-order"] - psnr["naive"]
    ok = gap_rf > 0.0 and gap_fn > 0.0
    _record("A5", ok,
            f"PSNR-L robust {psnr['robust']:.2f} dB > first-order "
            f"{psnr['first-order']:.2f} dB > naive {psnr['naive']:.2f} dB "
            f"(gaps +{gap_rf:.2f} dB, +{gap_fn:.2f} dB)")


def test_a06_restoration_strength_sweep(stress_corpus):
    """A6: PSNR vs the base is nonincreasing in lambda_r; 0 returns the base."""
    _, cases = stress_corpus
    params, l_b, s_b, s_d = cases[0]
    lambdas = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    vals = []
    bit_equal_at_zero = False
    for lam in lambdas:
        cfg = ii.InversionConfig(lambda_r=lam)
        l_d, _ = ii.invert_image(s_d, s_b, l_b, params, cfg)
        if lam == 0.0:
            bit_equal_at_zero = np.array_equal(l_d.data, l_b.data)
        vals.append(ii.psnr(l_d.data, l_b.data))
    nonincreasing = all(vals[i + 1] <= vals[i] for i in range(len(vals) - 1))
    ok = bit_equal_at_zero and vals[0] == np.inf and nonincreasing
    shown = ", ".join("inf" if v == np.inf else f"{v:.2f}" for v in vals)
    _record("A6", ok,
            f"lambda_r {lambdas} -> PSNR-L [{shown}] dB nonincreasing; "
            f"lambda_r=0 bit-equal to base: {bit_equal_at_zero}")


def test_a07_closed_form_inverses_are_exact_off_clip():
    """A7: naive round trip <= 1e-10 clip-free; tone round trip <= 1e-12."""
    r = rng(107, 0)
    l = clip_free_pixels(r, REF_PARAMS, 20000)
    s = ii.forward_pixels(l, REF_PARAMS)
    naive_rt = float(np.abs(ii.naive_invert_pixels(s, REF_PARAMS) - l).max())
    # tone round trip in the contract's direction, tone(inverse(s)) = s, which
    # is well-conditioned over the whole range (|ds/dg| <= 1.5); the opposite
    # direction is intrinsically ill-conditioned within ~1e-6 of the endpoints
    s_grid = np.linspace(0.0, 1.0, 10 ** 6)
    tone_rt = float(np.abs(ii.tone_map(ii.inverse_tone_map(s_grid)) - s_grid).max())
    ok = naive_rt <= 1e-10 and tone_rt <= 1e-12
    _record("A7", ok,
            f"naive round trip {naive_rt:.2e} (<= 1e-10, 20000 pixels); "
            f"tone round trip {tone_rt:.2e} (<= 1e-12, 1e6-point grid)")


def test_a08_reports_and_corpora_are_deterministic(tmp_path):
    """A8: eval reports byte-identical across thread counts; synth by seed."""
    cfg = ii.SynthConfig(seed=88, count=3, height=32, width=32)
    corpus = tmp_path / "corpus"
    ii.generate_corpus(cfg, corpus)
    blobs = []
    for t in (1, 4, 16):
        path = tmp_path / f"report{t}.json"
        ii.write_json(path, ii.evaluate_corpus(corpus, threads=t))
        blobs.append(path.read_bytes())
    reports_equal = blobs[0] == blobs[1] == blobs[2]

    again = tmp_path / "again"
    ii.generate_corpus(cfg, again)
    names = sorted(p.name for p in corpus.iterdir())
    resynth_equal = names == sorted(p.name for p in again.iterdir()) and all(
        (corpus / n).read_bytes() == (again / n).read_bytes() for n in names)
    ok = reports_equal and resynth_equal
    _record("A8", ok,
            f"eval reports byte-identical for threads 1/4/16: {reports_equal}; "
            f"regenerated corpus byte-identical: {resynth_equal} "
            f"({len(names)} files)")


def test_a09_matched_degradation_pipeline_yields_exact_zero():
    """A9: map(mosaic(down(L)), L) == 0 exactly for 50 random images."""
    r = rng(109, 0)
    patterns = ("RGGB", "BGGR", "GRBG", "GBRG")
    n_nonzero = 0
    for i in range(50):
        l = ii.LinearImage.from_array(r.uniform(0.0, 1.0, size=(32, 32, 3)))
        raw = ii.mosaic(ii.downsample(l, 4), patterns[i % 4])
        m = ii.degradation_map(raw, l, factor=4)
        n_nonzero += int(np.count_nonzero(m.data))
    ok = n_nonzero == 0
    _record("A9", ok,
            f"50 random images, all four mosaic layouts: "
            f"{n_nonzero} nonzero map entries (need 0)")


@pytest.fixture(scope="module")
def megapixel_case():
    cfg = ii.SynthConfig(seed=310, count=1, height=1024, width=1024,
                         saturation_fraction=0.3, perturbation_scale=0.02)
    return ii.make_case(cfg, 0)


def test_a10_megapixel_inversion_wall_time(megapixel_case):
    """A10 (wall time): 1024x1024 robust inversion under 2s at 8 threads."""
    params, l_b, s_b, s_d = megapixel_case
    ii.invert_image(s_d, s_b, l_b, params, threads=8)  # warm-up
    t0 = time.perf_counter()
    ii.invert_image(s_d, s_b, l_b, params, threads=8)
    elapsed = time.perf_counter() - t0
    ok = elapsed < 2.0
    _record("A10(wall)", ok, f"1024x1024 robust inversion {elapsed:.3f}s (< 2s)")


def test_a10_parallel_efficiency(megapixel_case):
    """A10 (scaling): >= 60% parallel efficiency from 1 to 8 threads."""
    cores = os.cpu_count() or 1
    if cores < 8:
        ACCEPTANCE_LINES.append(
            f"A10(efficiency) SKIP: host exposes {cores} core(s); the 1->8 "
            f"thread scaling measurement needs >= 8 physical cores")
        pytest.skip(f"host exposes {cores} core(s); need >= 8 to measure "
                    f"1->8 thread parallel efficiency")
    params, l_b, s_b, s_d = megapixel_case
    ii.invert_image(s_d, s_b, l_b, params, threads=8)  # warm-up
    t0 = time.perf_counter()
    ii.invert_image(s_d, s_b, l_b, params, threads=1)
    t1 = time.perf_counter() - t0
    t0 = time.perf_counter()
    ii.invert_image(s_d, s_b, l_b, params, threads=8)
    t8 = time.perf_counter() - t0
    eff = t1 / (8.0 * t8)
    ok = eff >= 0.6
    _record("A10(efficiency)", ok,
            f"1 thread {t1:.3f}s, 8 threads {t8:.3f}s, efficiency {eff:.1%} (>= 60%)")
