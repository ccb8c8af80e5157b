"""Estimators that attain the bounds and the Monte Carlo harness comparing them."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bounds import BoundReport, bound_decon, bound_levy, bound_white_noise
from .errors import GridError, UsageError
from .functionals import Functional, as_tuple, measure_integral
from .models import DeconvPair, LevyTriplet, WhiteNoiseOp, rebuild_on, rng_for, sample
from .operators import pinv_matrix
from .spectral_core import (GridFunction, MixedMeasure, SpectralFunction, UniformGrid,
                            fourier_transform, integrate, inverse_fourier_real,
                            raised_cosine_window)

SPECTRAL_LADDER = (100.0, 200.0, 400.0, 800.0)
PILOT_REPS = 20
PILOT_OFFSET = 1_000_000  # pilot runs use replication indices disjoint from the main run
# grid refinement for the influence functions plugged into the linear estimator
DECON_REFINE = 16


def threads() -> int:
    env = os.environ.get("EFFBOUND_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"EFFBOUND_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


# --------------------------------------------------------------------------- report


@dataclass
class MCReport:
    n: float
    reps: int
    estimates: np.ndarray
    scaled_var: np.ndarray
    sigma_ref: np.ndarray
    seed: int
    estimator: str = ""
    truth: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reps < 2:
            raise UsageError("a Monte Carlo report needs at least 2 replications")
        self.scaled_var = 0.5 * (self.scaled_var + self.scaled_var.T)

    @classmethod
    def from_estimates(cls, n, estimates, sigma_ref, seed, estimator="", truth=None,
                       diagnostics=None) -> "MCReport":
        E = np.atleast_2d(np.asarray(estimates, dtype=float))
        if E.shape[0] == 1 and E.shape[1] > 1 and np.ndim(estimates) == 1:
            E = E.T
        cov = np.atleast_2d(np.cov(E, rowvar=False, ddof=1))
        return cls(n, E.shape[0], E, n * cov, np.atleast_2d(np.asarray(sigma_ref, dtype=float)),
                   seed, estimator, None if truth is None else np.asarray(truth, dtype=float),
                   diagnostics or {})

    @property
    def d(self) -> int:
        return self.estimates.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.estimates.mean(axis=0)

    @property
    def se(self) -> np.ndarray:
        return self.estimates.std(axis=0, ddof=1) / np.sqrt(self.reps)

    @property
    def ratio(self) -> np.ndarray:
        return np.diag(self.scaled_var) / np.diag(self.sigma_ref)

    def bias_in_se(self) -> np.ndarray:
        if self.truth is None:
            raise UsageError("no reference value for the bias")
        return (self.mean - self.truth) / self.se

    def within(self, band: float) -> bool:
        return bool(np.all(np.abs(self.ratio - 1.0) <= band))

    def normality(self) -> dict:
        z = (self.estimates - self.mean) / self.estimates.std(axis=0, ddof=1)
        return {"skewness": stats.skew(z, axis=0).tolist(),
                "excess_kurtosis": stats.kurtosis(z, axis=0).tolist()}

    def to_json(self) -> dict:
        out = {
            "n": self.n, "reps": self.reps, "seed": self.seed, "estimator": self.estimator,
            "mean": self.mean.tolist(), "se": self.se.tolist(),
            "scaled_var": self.scaled_var.tolist(), "sigma_ref": self.sigma_ref.tolist(),
            "ratio": self.ratio.tolist(), "normality": self.normality(),
            "estimates": self.estimates.tolist(), "diagnostics": self.diagnostics,
        }
        if self.truth is not None:
            out["truth"] = self.truth.tolist()
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rep"] + [f"estimate_{j + 1}" for j in range(self.d)])
        for r, row in enumerate(self.estimates):
            w.writerow([r] + [repr(float(v)) for v in row])
        return buf.getvalue()


# --------------------------------------------------------------------------- deconvolution


def estimate_decon_linear(y, d: DeconvPair, zeta, report: BoundReport | None = None,
                          diagnostics: dict | None = None) -> np.ndarray:
    """Average of the efficient influence functions over the sample."""
    report = report or bound_decon(d, zeta)
    y = np.asarray(y, dtype=float)
    g = d.nu.density.grid if d.nu.density is not None else d.mu.density.grid
    lo, hi = g.x0, g.xmax
    out_of_span = int(np.sum((y < lo) | (y > hi)))
    if diagnostics is not None:
        diagnostics["clamped"] = diagnostics.get("clamped", 0) + out_of_span
    yc = np.clip(y, lo, hi)
    # the observation law of a deconvolution problem has no atoms
    return np.array([psi.values(yc).mean() for psi in report.influence])


# --------------------------------------------------------------------------- decompounding


def linear_binning(y, grid: UniformGrid, weights=None) -> np.ndarray:
    """Triangular-kernel histogram (bandwidth 2 dx); preserves total mass."""
    y = np.asarray(y, dtype=float)
    w = np.full(y.size, 1.0 / max(y.size, 1)) if weights is None else np.asarray(weights, float)
    s = (y - grid.x0) / grid.dx
    if np.any(s < 0) or np.any(s > grid.n - 1):
        raise GridError("sample outside the binning grid")
    k = np.floor(s).astype(np.int64)
    k = np.minimum(k, grid.n - 2)
    f = s - k
    out = np.bincount(k, weights=w * (1 - f), minlength=grid.n)
    out += np.bincount(k + 1, weights=w * f, minlength=grid.n)
    return out[: grid.n]


def empirical_law(y, t: LevyTriplet, grid: UniformGrid | None = None) -> MixedMeasure:
    """Atom at the drift location (no-jump observations) plus a binned density."""
    grid = grid or t.grid
    y = np.asarray(y, dtype=float)
    a = t.delta * t.gamma
    hit = y == a
    p0 = hit.mean()
    rest = y[~hit]
    w = linear_binning(rest, grid, np.full(rest.size, 1.0 / y.size)) if rest.size else np.zeros(grid.n)
    atoms = ((a, float(p0)),) if p0 > 0 else ()
    return MixedMeasure(atoms, GridFunction(grid, w / grid.dx))


def _law_transform(P: MixedMeasure, grid: UniformGrid) -> np.ndarray:
    u = grid.u
    F = fourier_transform(P.density).values if P.density is not None else np.zeros(grid.n, complex)
    for a, m in P.atoms:
        F = F + m * np.exp(1j * u * a)
    return F


def distinguished_log(F: np.ndarray, grid: UniformGrid) -> np.ndarray:
    """Continuous logarithm along the frequency grid, anchored at log F(0)."""
    c = grid.n // 2
    if np.min(np.abs(F)) <= 0:
        raise GridError("characteristic function vanishes on the grid")
    ang = np.angle(F)
    right = np.unwrap(ang[c:])
    left = np.unwrap(ang[c::-1])[::-1]
    phase = np.concatenate([left[:-1], right])
    phase -= phase[c] - np.angle(F[c])
    return np.log(np.abs(F)) + 1j * phase


def decompound_series(F: np.ndarray, t: LevyTriplet, grid: UniformGrid, terms: int = 60,
                      tol: float = 1e-10) -> np.ndarray:
    """Delta F[nu] by the convolution-logarithm series; raises if the series diverges."""
    dl = t.delta * t.lam
    H = np.exp(dl) * F * np.exp(-1j * grid.u * t.delta * t.gamma) - 1.0
    S = np.zeros_like(H)
    term = np.ones_like(H)
    last = np.inf
    for k in range(1, terms + 1):
        term = term * H
        inc = (-1) ** (k + 1) * term / k
        S = S + inc
        last = float(np.max(np.abs(inc)))
        if not np.isfinite(last):
            break
    if not last < tol:
        raise GridError(f"convolution-logarithm series diverges (last term {last:.3g}, "
                        f"sup|H| = {np.max(np.abs(H)):.3g}); refine the grid or reduce Delta*lambda")
    return S


def estimate_decompound(y, t: LevyTriplet, zeta, method: str = "fourier",
                        law: MixedMeasure | None = None) -> np.ndarray:
    """Known-lambda decompounding estimator of int zeta dnu, renormalized to mass lambda.

    `law` replaces the empirical law (plug-in of the true marginal, for checks).
    """
    if not t.finite_activity:
        raise UsageError("decompounding needs a compound Poisson model")
    grid = t.grid
    P = law if law is not None else empirical_law(y, t, grid)
    F = _law_transform(P, grid)
    D, lam = t.delta, t.lam
    if method == "fourier":
        S = D * lam + distinguished_log(F, grid) - 1j * grid.u * D * t.gamma
    elif method == "series":
        S = decompound_series(F, t, grid)
    else:
        raise UsageError(f"unknown decompounding method {method}")
    nu = inverse_fourier_real(SpectralFunction(grid, S / D))
    vals = np.array(nu.values)
    vals[grid.origin_index()] = 0.0  # the origin carries only the log of the atom
    mass = vals.sum() * grid.dx
    if mass <= 0:
        raise GridError("recovered jump measure has no mass")
    nu_c = MixedMeasure((), GridFunction(grid, vals * lam / mass))
    return np.array([measure_integral(z, nu_c, grid) for z in as_tuple(zeta)])


# --------------------------------------------------------------------------- spectral Levy


def estimation_grid(y_span: float, cutoff: float) -> UniformGrid:
    """Binning grid with Nyquist frequency well above the cutoff."""
    span = 2.0 ** np.ceil(np.log2(max(y_span, 1.0)))
    dx = min(np.pi / (8.0 * cutoff), 2.0 ** -9)
    dx = 2.0 ** np.floor(np.log2(dx))
    n = int(2 * span / dx)
    return UniformGrid(-span, dx, n)


def _zeta_over_x(zeta: Functional, grid: UniformGrid) -> GridFunction:
    if not zeta.is_indicator:
        raise UsageError("the spectral estimator needs an indicator functional")
    if (zeta.kind == "indicator_left" and zeta.t >= 0) or (zeta.kind == "indicator_right" and zeta.t <= 0):
        raise UsageError("the spectral estimator needs zeta supported away from 0")
    z = zeta.on_grid(grid).values
    x = grid.x
    return GridFunction(grid, np.where(z != 0, z / np.where(x == 0, 1.0, x), 0.0))


def spectral_from_cf(phi: np.ndarray, dphi: np.ndarray, grid: UniformGrid, t: LevyTriplet,
                     zeta, cutoff: float, floor: float = 0.0) -> np.ndarray:
    """int zeta dnu from phi and phi' on the dual grid of `grid`."""
    if cutoff >= grid.nyquist:
        raise GridError(f"cutoff {cutoff} exceeds the Nyquist frequency {grid.nyquist:.4g}")
    u = grid.u
    K = raised_cosine_window(u, cutoff)
    mod = np.abs(phi)
    safe = np.where(mod < floor, floor * np.exp(1j * np.angle(phi)), phi)
    X = (dphi / safe) / (1j * t.delta) - t.gamma  # F[x nu]
    X = np.where(K > 0, X * K, 0.0)
    xnu = inverse_fourier_real(SpectralFunction(grid, X))
    out = []
    for z in as_tuple(zeta):
        g = _zeta_over_x(z, grid)
        out.append(float(np.sum(g.values * xnu.values) * grid.dx))
    return np.array(out)


def estimate_spectral_levy(y, t: LevyTriplet, zeta, cutoff: float,
                           grid: UniformGrid | None = None,
                           diagnostics: dict | None = None) -> np.ndarray:
    """Plug-in estimator from the empirical characteristic function and its derivative."""
    y = np.asarray(y, dtype=float)
    n = y.size
    grid = grid or estimation_grid(np.max(np.abs(y)) + 1.0, cutoff)
    w = linear_binning(y, grid)
    wy = linear_binning(y, grid, y / n)
    # undo the triangular kernel of the binning
    sinc2 = np.sinc(grid.u * grid.dx / (2 * np.pi)) ** 2
    phi = fourier_transform(GridFunction(grid, w / grid.dx)).values / sinc2
    dphi = 1j * fourier_transform(GridFunction(grid, wy / grid.dx)).values / sinc2
    floor = np.log(n) / np.sqrt(n)
    if diagnostics is not None:
        band = np.abs(grid.u) <= cutoff
        diagnostics["phi_floor"] = floor
        diagnostics["floored_frequencies"] = int(np.sum(np.abs(phi[band]) < floor))
    return spectral_from_cf(phi, dphi, grid, t, zeta, cutoff, floor)


def choose_cutoff(t: LevyTriplet, zeta, n: int, seed: int, ladder=SPECTRAL_LADDER,
                  pilot_reps: int = PILOT_REPS) -> tuple[float, dict]:
    """Cutoff minimizing the Monte Carlo MSE of a pilot run."""
    truth = functional_truth(t, zeta)
    est = {c: [] for c in ladder}
    for r in range(pilot_reps):
        y = sample(t, n, seed, PILOT_OFFSET + r)
        grid = estimation_grid(np.max(np.abs(y)) + 1.0, max(ladder))
        for c in ladder:
            est[c].append(estimate_spectral_levy(y, t, zeta, c, grid))
    mse = {c: float(np.mean(np.sum((np.array(v) - truth) ** 2, axis=1))) for c, v in est.items()}
    best = min(ladder, key=lambda c: mse[c])
    return best, {"ladder": list(ladder), "pilot_mse": [mse[c] for c in ladder],
                  "pilot_reps": pilot_reps, "cutoff": best}


def functional_truth(model, zeta) -> np.ndarray:
    """int zeta dnu, with indicator jumps placed exactly between grid points."""
    nu = model.nu.measure if isinstance(model, LevyTriplet) else model.nu
    return np.array([measure_integral(z, nu, model.grid) for z in as_tuple(zeta)])


# --------------------------------------------------------------------------- white noise


def estimate_white_noise(K: WhiteNoiseOp, zeta, reps: int, seed: int, theta=None) -> MCReport:
    """chi-hat = <(K^T)^+ zeta, y> over `reps` draws of y = K theta + eps W."""
    if K.kind != "matrix":
        raise UsageError("the white-noise estimator needs a matrix operator")
    M = K.matrix
    Z = np.atleast_2d(np.asarray(zeta, dtype=float))
    theta = np.ones(M.shape[1]) if theta is None else np.asarray(theta, dtype=float)
    Psi = np.array([pinv_matrix(M, z).psi for z in Z])
    rng = rng_for(seed)
    W = rng.standard_normal((reps, M.shape[0]))
    Y = M @ theta + K.eps * W
    est = Y @ Psi.T
    truth = Z @ theta
    rep = MCReport.from_estimates(K.eps**-2, est, Psi @ Psi.T, seed, "white-noise", truth)
    rep.scaled_var = np.atleast_2d(np.cov(est, rowvar=False, ddof=1)) / K.eps**2
    return rep


# --------------------------------------------------------------------------- harness


ESTIMATORS = ("decon-linear", "decompound", "spectral", "white-noise")


def _run(fn, reps: int, workers: int | None):
    workers = workers or threads()
    if workers <= 1 or reps < 2:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(reps)))


def decon_influence(d: DeconvPair, zeta, refine: int = DECON_REFINE) -> BoundReport:
    """Influence functions on a finer grid of the same span.

    Singular influence functions lose variance to the grid smoothing, so the
    estimator uses a finer grid than the one that suffices for Sigma.
    """
    g = d.grid
    fine = rebuild_on(d, UniformGrid(g.x0, g.dx / refine, g.n * refine)) if refine > 1 else None
    return bound_decon(fine if fine is not None else d, zeta, extrapolate=False)


def mc_compare(model, zeta, estimator: str, n: int, reps: int, seed: int,
               workers: int | None = None, cutoff: float | None = None,
               report: BoundReport | None = None, refine: int = DECON_REFINE) -> MCReport:
    """Replicate an estimator `reps` times on independent substreams and compare with Sigma."""
    if reps < 2:
        raise UsageError("reps must be at least 2")
    if estimator not in ESTIMATORS:
        raise UsageError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    if estimator == "white-noise":
        if not isinstance(model, WhiteNoiseOp):
            raise UsageError("white-noise estimator needs a white-noise model")
        return estimate_white_noise(model, zeta, reps, seed)
    zetas = as_tuple(zeta)
    diag: dict = {}
    if estimator == "decon-linear":
        if not isinstance(model, DeconvPair):
            raise UsageError("decon-linear needs a deconvolution model")
        sigma = (report or bound_decon(model, zetas)).sigma
        infl = decon_influence(model, zetas, refine)
        diag["influence_grid_n"] = infl.influence[0].grid.n

        def one(r):
            return estimate_decon_linear(sample(model, n, seed, r), model, zetas, infl, diag)
    elif estimator == "decompound":
        if not isinstance(model, LevyTriplet) or not model.finite_activity:
            raise UsageError("decompound needs a compound Poisson model")
        report = report or bound_levy(model, zetas, known_lambda=True)
        sigma = report.sigma
        diag["sigma_unknown"] = report.diagnostics.get("sigma_unknown")
        diag["sigma_known_projection"] = report.diagnostics.get("sigma_known_projection")

        def one(r):
            return estimate_decompound(sample(model, n, seed, r), model, zetas)
    else:
        if not isinstance(model, LevyTriplet):
            raise UsageError("spectral needs a Levy model")
        report = report or bound_levy(model, zetas)
        sigma = report.sigma
        if cutoff is None:
            cutoff, diag["cutoff_selection"] = choose_cutoff(model, zetas, n, seed)
        diag["cutoff"] = cutoff

        def one(r):
            return estimate_spectral_levy(sample(model, n, seed, r), model, zetas, cutoff)
    est = np.array(_run(one, reps, workers))
    return MCReport.from_estimates(n, est, sigma, seed, estimator,
                                   functional_truth(model, zetas), _plain(diag))


def _plain(d):
    if isinstance(d, dict):
        return {k: _plain(v) for k, v in d.items()}
    if isinstance(d, np.ndarray):
        return d.tolist()
    if isinstance(d, (list, tuple)):
        return [_plain(v) for v in d]
    if isinstance(d, np.generic):
        return d.item()
    return d
