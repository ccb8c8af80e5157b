import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import constants as C
from effbound.errors import GridError, UsageError
from effbound.functionals import Functional
from effbound.models import build_model, marginal_law, sample
from effbound.simulate import (MCReport, estimate_decompound, estimate_spectral_levy,
                               estimate_white_noise, estimation_grid, functional_truth,
                               linear_binning, mc_compare, spectral_from_cf)
from effbound.spectral_core import GridFunction, UniformGrid, fourier_transform


# ------------------------------------------------------------------ report


def test_report_needs_two_reps():
    with pytest.raises(UsageError):
        MCReport.from_estimates(10, [[0.1]], [[1.0]], 0)
    with pytest.raises(UsageError):
        mc_compare(build_model("decon-identity"), Functional.left(0.0), "decon-linear", 10, 1, 0)


def test_minimal_run_serializes():
    r = mc_compare(build_model("decon-identity"), Functional.left(0.0), "decon-linear", 50, 2, 0,
                   refine=1)
    d = json.loads(json.dumps(r.to_json()))
    assert d["reps"] == 2 and len(d["estimates"]) == 2 and "normality" in d
    rows = list(csv.reader(io.StringIO(r.to_csv())))
    assert rows[0] == ["rep", "estimate_1"] and len(rows) == 3
    assert float(rows[1][1]) == r.estimates[0, 0]


@settings(max_examples=15)
@given(st.integers(2, 30), st.integers(1, 3), st.integers(0, 10**6))
def test_scaled_var_symmetric_psd(reps, d, seed):
    E = np.random.default_rng(seed).normal(size=(reps, d))
    r = MCReport.from_estimates(100, E, np.eye(d), seed)
    assert np.array_equal(r.scaled_var, r.scaled_var.T)
    assert np.linalg.eigvalsh(r.scaled_var).min() >= -1e-10 * max(1.0, np.abs(r.scaled_var).max())


def test_unknown_estimator():
    with pytest.raises(UsageError):
        mc_compare(build_model("decon-identity"), Functional.left(0.0), "kernel", 10, 2, 0)
    with pytest.raises(UsageError):
        mc_compare(build_model("levy-gamma"), Functional.left(0.5), "decompound", 10, 2, 0)


# ------------------------------------------------------------------ deconvolution


def test_identity_is_ecdf():
    d = build_model("decon-identity")
    z = Functional.left(0.0)
    r = mc_compare(d, z, "decon-linear", 1000, 400, 5, refine=1)
    assert abs(r.mean[0] - 0.5) < 3 * r.se[0]
    y = sample(d, 1000, 5, 0)
    # the influence function of F(0) is the indicator itself, so its average is the ECDF
    assert abs(r.estimates[0, 0] - np.mean(y <= 0)) < 2e-3


# ------------------------------------------------------------------ decompounding


def test_truth_off_grid(cp_model):
    v = functional_truth(cp_model, Functional.left(1.5))[0]
    # the grid measure drops the origin cell of nu
    assert abs(v - C.CP_NU_T) < 3e-4


def test_zero_noise_decompound(cp_model):
    z = [Functional.left(1.5), Functional.right(3.0)]
    est = estimate_decompound(None, cp_model, z, law=marginal_law(cp_model))
    assert np.max(np.abs(est - functional_truth(cp_model, z))) < 1e-3


def test_series_diverges_then_converges():
    z = Functional.left(1.5)
    cp = build_model("levy-cp-normal")
    with pytest.raises(GridError):
        estimate_decompound(None, cp, z, method="series", law=marginal_law(cp))
    half = build_model("levy-cp-normal", lam=0.5)
    est = estimate_decompound(None, half, z, method="series", law=marginal_law(half))
    fourier = estimate_decompound(None, half, z, law=marginal_law(half))
    assert abs(est[0] - fourier[0]) < 1e-8
    assert abs(est[0] - functional_truth(half, z)[0]) < 1e-3


def test_decompound_method_check(cp_model):
    with pytest.raises(UsageError):
        estimate_decompound(None, cp_model, Functional.left(1.5), method="newton",
                            law=marginal_law(cp_model))


def test_doubling_n_halves_variance(cp_model):
    z = Functional.left(1.5)
    a = mc_compare(cp_model, z, "decompound", 500, 600, 11)
    b = mc_compare(cp_model, z, "decompound", 1000, 600, 12)
    ratio = (b.scaled_var[0, 0] / 1000) / (a.scaled_var[0, 0] / 500)
    assert 0.4 <= ratio <= 0.6


def test_same_seed_identical(cp_model):
    z = Functional.left(1.5)
    a = mc_compare(cp_model, z, "decompound", 300, 4, 21)
    b = mc_compare(cp_model, z, "decompound", 300, 4, 21, workers=2)
    assert np.array_equal(a.estimates, b.estimates)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())


def test_substreams_uncorrelated(cp_model):
    n = 5000
    y0 = sample(cp_model, n, 9, 0)
    y1 = sample(cp_model, n, 9, 1)
    bound = 3 / np.sqrt(n)
    assert abs(np.corrcoef(y0, y1)[0, 1]) < bound
    assert abs(np.corrcoef(y0[:-1], y1[1:])[0, 1]) < bound


def test_drift_shift_equivariance(cp_model):
    moved = build_model("levy-cp-normal", gamma=0.5)
    y0 = sample(cp_model, 2000, 3)
    y1 = sample(moved, 2000, 3)
    assert np.max(np.abs(y1 - y0 - 0.5)) < 1e-12
    z = [Functional.left(1.5), Functional.right(2.5)]
    assert np.allclose(estimate_decompound(y0, cp_model, z), estimate_decompound(y1, moved, z),
                       atol=1e-3)
    assert np.allclose(estimate_spectral_levy(y0, cp_model, z[1], 200.0),
                       estimate_spectral_levy(y1, moved, z[1], 200.0), atol=1e-3)


# ------------------------------------------------------------------ binning


@settings(max_examples=20)
@given(st.integers(1, 500), st.integers(0, 10**6))
def test_linear_binning_mass_and_mean(size, seed):
    grid = UniformGrid.symmetric(8.0, 256)
    y = np.random.default_rng(seed).uniform(-7, 7, size)
    w = linear_binning(y, grid)
    assert abs(w.sum() - 1) < 1e-12 and w.min() >= 0
    # linear binning keeps the first moment exactly
    assert abs(np.sum(w * grid.x) - y.mean()) < 1e-10


def test_binning_outside_grid():
    with pytest.raises(GridError):
        linear_binning([100.0], UniformGrid.symmetric(8.0, 256))


# ------------------------------------------------------------------ spectral


def test_spectral_population_version(gamma_model):
    z = Functional.right(1.0)
    P = marginal_law(gamma_model)
    grid = P.density.grid
    x = grid.x
    phi = fourier_transform(P.density).values
    dphi = 1j * fourier_transform(GridFunction(grid, x * P.density.values)).values
    truth = functional_truth(gamma_model, z)[0]
    err = [abs(spectral_from_cf(phi, dphi, grid, gamma_model, z, c)[0] - truth) for c in (5, 20, 50)]
    assert err[0] > err[1] > err[2] and err[2] < 2e-4
    with pytest.raises(GridError):
        spectral_from_cf(phi, dphi, grid, gamma_model, z, grid.nyquist * 1.01)


def test_spectral_needs_indicator_away_from_origin(cp_model):
    y = sample(cp_model, 100, 0)
    with pytest.raises(UsageError):
        estimate_spectral_levy(y, cp_model, Functional.left(1.5), 100.0)
    g = Functional.from_grid(GridFunction.zeros(cp_model.grid))
    with pytest.raises(UsageError):
        estimate_spectral_levy(y, cp_model, g, 100.0)


def test_estimation_grid_resolves_cutoff():
    g = estimation_grid(13.0, 400.0)
    assert g.nyquist >= 8 * 400.0 * 0.99 and g.x0 <= -13.0 and g.xmax >= 13.0 - g.dx


def test_spectral_deterministic(gamma_model):
    z = Functional.right(1.0)
    a = mc_compare(gamma_model, z, "spectral", 300, 3, 4, cutoff=100.0)
    b = mc_compare(gamma_model, z, "spectral", 300, 3, 4, cutoff=100.0)
    assert np.array_equal(a.estimates, b.estimates)


# ------------------------------------------------------------------ white noise


def test_white_noise_identity():
    K = build_model("wn-matrix", diag=[1.0, 1.0, 1.0], eps=0.5)
    zeta = [1.0, -2.0, 0.5]
    r = estimate_white_noise(K, zeta, 10_000, 3, theta=np.array([0.2, 0.4, -1.0]))
    assert abs(r.sigma_ref[0, 0] - np.dot(zeta, zeta)) < 1e-12
    assert abs(r.ratio[0] - 1) < 0.05
    assert abs(r.bias_in_se()[0]) < 3


def test_white_noise_diag_example():
    r = mc_compare(build_model("wn-matrix"), [0.0, 1.0, 0.0], "white-noise", 0, 10_000, 8)
    assert abs(r.sigma_ref[0, 0] - 4.0) < 1e-12
    assert abs(r.scaled_var[0, 0] / 4.0 - 1) < 0.05


def test_white_noise_needs_matrix():
    with pytest.raises(UsageError):
        estimate_white_noise(build_model("wn-diffeq"), [1.0], 10, 0)
    with pytest.raises(UsageError):
        mc_compare(build_model("levy-gamma"), [1.0], "white-noise", 0, 10, 0)
