"""Model descriptors, characteristic functions, marginal laws and samplers.

Three families are covered: finite-dimensional and Fourier-multiplier white
noise, deconvolution Y = X + eps, and increments of a pure-jump Levy process
observed at spacing delta.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np
from scipy import special, stats

from .errors import AssumptionError, GridError, UsageError
from .spectral_core import (GridFunction, MixedMeasure, SpectralFunction, UniformGrid,
                            add_measures, convolve_measure, fourier_transform,
                            gaussian_window, inverse_fourier, trapezoid_sum)

# --------------------------------------------------------------------------- laws


@dataclass(frozen=True)
class Law:
    """A one-dimensional law that knows how to sample itself.

    kind is one of normal, gamma, dirac or grid; `measure` backs the grid kind.
    """

    kind: str
    params: tuple = ()
    measure: MixedMeasure | None = None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "normal":
            mean, sd = self.params
            return rng.normal(mean, sd, size)
        if self.kind == "gamma":
            shape, scale = self.params
            return rng.gamma(shape, scale, size)
        if self.kind == "dirac":
            return np.full(size, float(self.params[0]))
        if self.kind == "grid":
            return sample_mixed(self.measure, rng, size)
        raise UsageError(f"unknown law kind {self.kind}")


def sample_mixed(m: MixedMeasure, rng: np.random.Generator, size: int) -> np.ndarray:
    """Inverse-CDF sampling from a probability MixedMeasure (piecewise-linear CDF)."""
    total = m.total_mass
    if abs(total - 1.0) > 1e-6:
        raise GridError(f"cannot sample from a measure of mass {total}")
    atom_p = m.atom_masses / total if m.atoms else np.zeros(0)
    p_dens = 1.0 - atom_p.sum()
    choice = rng.random(size)
    out = np.empty(size)
    cum = np.cumsum(atom_p)
    which = np.searchsorted(cum, choice, side="right")
    for i, a in enumerate(m.atom_locs):
        out[which == i] = a
    dens_idx = which == len(atom_p)
    k = int(dens_idx.sum())
    if k:
        if m.density is None or p_dens <= 0:
            raise GridError("sampling hit an empty density component")
        d = np.clip(m.density.values, 0.0, None)
        x = m.density.x
        dx = m.density.grid.dx
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * dx)])
        cdf /= cdf[-1]
        out[dens_idx] = np.interp(rng.random(k), cdf, x)
    return out


def rng_for(seed: int, rep: int = 0) -> np.random.Generator:
    """Counter-based generator on the substream (seed, rep)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(rep,))))


# --------------------------------------------------------------------------- descriptors


@dataclass(frozen=True, eq=False)
class WhiteNoiseOp:
    kind: str  # matrix | fourier_multiplier | diffeq_nonlinear
    matrix: np.ndarray | None = None
    multiplier: Callable | None = None
    theta: GridFunction | None = None
    eps: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("matrix", "fourier_multiplier", "diffeq_nonlinear"):
            raise UsageError(f"unknown white-noise kind {self.kind}")
        if self.eps <= 0:
            raise UsageError("noise level must be positive")
        if self.kind == "matrix":
            K = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            object.__setattr__(self, "matrix", K)
        if self.kind == "diffeq_nonlinear" and self.theta is None:
            raise UsageError("diffeq kind needs a linearization point theta")

    @property
    def smallest_singular_value(self) -> float:
        return float(np.linalg.svd(self.matrix, compute_uv=False).min())

    @property
    def injective(self) -> bool:
        K = self.matrix
        return K.shape[0] >= K.shape[1] and self.smallest_singular_value > 1e-12


@dataclass(frozen=True, eq=False)
class JumpMeasure:
    """Levy jump measure on a grid.

    `measure` is the gridded measure used by every numerical routine; `parts`
    describe it analytically for exact sampling (("gamma", alpha, rate) or
    ("finite", lam, Law)).
    """

    measure: MixedMeasure
    activity: str  # finite | infinite
    lam: float | None = None
    parts: tuple = ()
    origin_cutoff_xmass: float = 0.0

    def __post_init__(self):
        if self.activity not in ("finite", "infinite"):
            raise UsageError("activity must be finite or infinite")
        d = self.measure.density
        if d is not None and np.min(d.values) < 0:
            raise GridError("jump density must be nonnegative")
        if any(m < 0 for _, m in self.measure.atoms):
            raise GridError("jump atoms must be nonnegative")
        if self.activity == "finite":
            mass = self.measure.total_mass
            lam = mass if self.lam is None else self.lam
            if abs(mass - lam) > 1e-6 * max(1.0, lam):
                raise GridError(f"finite activity mass {mass} differs from lambda {lam}")
            object.__setattr__(self, "lam", float(lam))
        if not np.isfinite(self.one_wedge_x_mass):
            raise AssumptionError("int (1 ^ |x|) dnu diverges")

    @property
    def grid(self) -> UniformGrid:
        return self.measure.grid

    @property
    def density(self) -> GridFunction | None:
        return self.measure.density

    @property
    def one_wedge_x_mass(self) -> float:
        tot = sum(min(1.0, abs(a)) * m for a, m in self.measure.atoms)
        d = self.measure.density
        if d is not None:
            tot += trapezoid_sum(np.minimum(1.0, np.abs(d.x)) * d.values, d.grid.dx)
        return float(tot) + self.origin_cutoff_xmass

    def with_measure(self, measure: MixedMeasure) -> "JumpMeasure":
        lam = measure.total_mass if self.activity == "finite" else None
        return JumpMeasure(measure, self.activity, lam, (), self.origin_cutoff_xmass)


@dataclass(frozen=True, eq=False)
class LevyTriplet:
    gamma: float
    delta: float
    nu: JumpMeasure
    name: str = ""
    params: dict = field(default_factory=dict)
    factory: Callable[[UniformGrid], "LevyTriplet"] | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise UsageError("delta must be positive")

    @property
    def grid(self) -> UniformGrid:
        return self.nu.grid

    @property
    def finite_activity(self) -> bool:
        return self.nu.activity == "finite"

    @property
    def lam(self) -> float | None:
        return self.nu.lam


@dataclass(frozen=True, eq=False)
class DeconvPair:
    nu: MixedMeasure
    mu: MixedMeasure
    nu_law: Law | None = None
    mu_law: Law | None = None
    phi_eps: Callable | None = None  # analytic error characteristic function, if known
    name: str = ""
    params: dict = field(default_factory=dict)
    factory: Callable[[UniformGrid], "DeconvPair"] | None = None

    def __post_init__(self):
        if self.nu.density is None:
            raise UsageError("the law of X must have a density component")
        for m, nm in ((self.nu, "nu"), (self.mu, "mu")):
            if abs(m.total_mass - 1.0) > 1e-6:
                raise GridError(f"{nm} is not a probability measure (mass {m.total_mass})")

    @property
    def grid(self) -> UniformGrid:
        return self.nu.grid


# --------------------------------------------------------------------------- spectra


def _levy_exponent(nu: JumpMeasure) -> SpectralFunction:
    """int (e^{iux} - 1) nu(dx) on the dual grid.

    The density part is a Riemann sum of (e^{iux}-1) nu(x).  For infinite
    activity the origin cell is replaced by its one-sided limits with an
    end-point correction for the jump of x nu(x) at zero, so densities like
    alpha e^{-x}/x come out to O(dx^3).
    """
    grid = nu.grid
    u = grid.u
    out = np.zeros(grid.n, complex)
    for a, m in nu.measure.atoms:
        out += m * (np.exp(1j * u * a) - 1.0)
    d = nu.density
    if d is not None:
        k0 = grid.origin_index()
        vals = np.array(d.values, dtype=float)
        vals[k0] = 0.0
        x = grid.x
        dx = grid.dx
        rho = x * vals
        rp = 3 * rho[k0 + 1] - 3 * rho[k0 + 2] + rho[k0 + 3]
        rm = 3 * rho[k0 - 1] - 3 * rho[k0 - 2] + rho[k0 - 3]
        dp = (-3 * rp + 4 * rho[k0 + 1] - rho[k0 + 2]) / (2 * dx)
        dm = (3 * rm - 4 * rho[k0 - 1] + rho[k0 - 2]) / (2 * dx)
        F = fourier_transform(GridFunction(grid, vals)).values
        out += F - vals.sum() * dx
        if nu.activity == "infinite":
            # a finite-activity grid measure is the model itself; only the
            # singular densities need the quadrature corrections at the origin
            out += 1j * u * dx * 0.5 * (rp + rm)
            out += dx**2 / 12 * (-0.5 * u**2 * (rp - rm) + 1j * u * (dp - dm))
    out[grid.n // 2] = 0.0  # u = 0 exactly
    return SpectralFunction(grid, out)


def char_function(t: LevyTriplet) -> SpectralFunction:
    """phi(u) = exp(delta (i gamma u + int (e^{iux} - 1) nu(dx)))."""
    if not np.isfinite(t.nu.one_wedge_x_mass):
        raise AssumptionError("int (1 ^ |x|) dnu diverges")
    psi = _levy_exponent(t.nu)
    u = t.grid.u
    vals = np.exp(t.delta * (1j * t.gamma * u + psi.values))
    k0 = t.grid.n // 2
    vals[k0] = 1.0
    # real measure: phi(-u) = conj phi(u) exactly, not just to FFT rounding
    vals[1:k0] = np.conj(vals[:k0:-1])
    return SpectralFunction(t.grid, vals)


def error_char_function(d: DeconvPair) -> SpectralFunction:
    u = d.grid.u
    if d.phi_eps is not None:
        vals = np.asarray(d.phi_eps(u), dtype=complex)
    else:
        vals = np.zeros(d.grid.n, complex)
        for a, m in d.mu.atoms:
            vals += m * np.exp(1j * u * a)
        if d.mu.density is not None:
            vals += fourier_transform(d.mu.density).values
    return SpectralFunction(d.grid, vals)


def density_from_char(phi: SpectralFunction, window_cells: float = 2.0,
                      neg_tol: float = 1e-8) -> tuple[GridFunction, dict]:
    """Invert a characteristic function to a grid density.

    A Gaussian spectral window of width `window_cells` grid cells damps the
    Nyquist ringing of singular densities while keeping the result
    nonnegative.  Negative undershoot down to -neg_tol is clipped; anything
    larger means the grid is too coarse.
    """
    grid = phi.grid
    w = gaussian_window(grid.u, window_cells * grid.dx)
    p = inverse_fourier(phi * w).values.real
    worst = float(p.min())
    if worst < -neg_tol:
        raise GridError(f"inverted density has undershoot {worst:.3g}; refine the grid")
    p = np.where(p < 0, 0.0, p)
    mass = trapezoid_sum(p, grid.dx)
    adj = abs(mass - 1.0)
    if adj > 1e-6:
        raise GridError(f"renormalization adjustment {adj:.3g} too large; grid too coarse")
    return GridFunction(grid, p / mass), {"min_before_clip": worst, "renorm_adjust": adj}


def poisson_truncation(mean: float, tol: float = 1e-12) -> int:
    k = 0
    while stats.poisson.sf(k, mean) >= tol:
        k += 1
    return k


# infinite-activity laws are inverted on a grid up to this much finer (and at
# most MARGINAL_MAX_N points), so the smoothing window sits well inside the
# singularity at the origin; cells within MARGINAL_AVG_CELLS of it get cell
# averages, which keep the mass right where point values cannot
MARGINAL_REFINE = 32
MARGINAL_MAX_N = 2**19
MARGINAL_AVG_CELLS = 8


def _refined_density(t: "LevyTriplet") -> GridFunction | None:
    g = t.grid
    r = min(MARGINAL_REFINE, MARGINAL_MAX_N // g.n)
    if r < 2:
        return None
    fine = rebuild_on(t, UniformGrid(g.x0, g.dx / r, g.n * r))
    if fine is None:
        return None
    dens, _ = density_from_char(char_function(fine))
    f = dens.values
    vals = f[::r].copy()
    # trapezoid average of the fine density over each coarse cell
    box = np.full(r + 1, 1.0 / r)
    box[0] = box[-1] = 0.5 / r
    k0 = g.origin_index()
    lo, hi = max(k0 - MARGINAL_AVG_CELLS, 1), min(k0 + MARGINAL_AVG_CELLS + 1, g.n - 1)
    vals[lo:hi] = np.convolve(f[(lo - 1) * r:(hi + 1) * r], box, mode="same")[r::r][:hi - lo]
    # the coarse quadrature error sits next to the singularity; so does the mass fix
    excess = trapezoid_sum(vals, g.dx) - 1.0
    central = vals[lo:hi].sum() * g.dx
    if central > 10 * abs(excess):
        vals[lo:hi] *= 1.0 - excess / central
    return GridFunction(g, vals / trapezoid_sum(vals, g.dx))


def marginal_law(t: LevyTriplet, extra_terms: int = 0) -> MixedMeasure:
    """Law of one increment.  Finite activity keeps the no-jump atom exact."""
    if t.finite_activity:
        lam, D = t.lam, t.delta
        K = poisson_truncation(D * lam) + extra_terms
        base = MixedMeasure(((D * t.gamma, np.exp(-D * lam)),))
        nu = t.nu.measure
        term = base
        total = base
        for k in range(1, K + 1):
            term = convolve_measure(term, nu).scaled(D / k)
            total = add_measures(total, term)
        if total.density is None:
            total = MixedMeasure(total.atoms, GridFunction.zeros(t.grid))
        return total
    dens = _refined_density(t)
    if dens is None:
        dens, _ = density_from_char(char_function(t))
    return MixedMeasure((), dens)


def obs_density(d: DeconvPair) -> MixedMeasure:
    return convolve_measure(d.nu, d.mu)


@dataclass(frozen=True)
class FourierMultCheck:
    beta_hat: float
    c_lower: float
    xnu_decay_ok: bool
    xnu_decay_const: float
    min_abs_phi: float

    def __iter__(self):
        return iter((self.beta_hat, self.c_lower, self.xnu_decay_ok))


def decay_exponent(phi: SpectralFunction, decade: float = 10.0) -> float:
    """-slope of log|phi| against log(1+u) over the top frequency decade."""
    u = phi.u
    top = u.max()
    sel = (u >= top / decade) & (u > 0)
    a = np.abs(phi.values[sel])
    if np.any(a <= 0) or not np.all(np.isfinite(np.log(a))):
        raise AssumptionError("|phi| underflows on the grid")
    slope = np.polyfit(np.log1p(u[sel]), np.log(a), 1)[0]
    return float(-slope)


def check_fourier_mult(t: LevyTriplet) -> FourierMultCheck:
    phi = char_function(t)
    absphi = np.abs(phi.values)
    if np.any(absphi < np.finfo(float).tiny):
        raise AssumptionError("|phi| underflows to 0 on the grid")
    beta = decay_exponent(phi)
    u = phi.u
    c_lower = float(np.min(absphi * (1 + np.abs(u)) ** beta))
    grid = t.grid
    xv = np.zeros(grid.n, complex)
    for a, m in t.nu.measure.atoms:
        xv += a * m * np.exp(1j * u * a)
    if t.nu.density is not None:
        xv += fourier_transform(t.nu.density * grid.x).values
    g = np.abs(xv) * (1 + np.abs(u))
    top = np.abs(u) >= u.max() / 10
    const = float(g.max())
    ok = bool(np.isfinite(const) and g[top].max() <= 2.0 * max(g[~top].max(), 1e-300))
    return FourierMultCheck(beta, c_lower, ok, const, float(absphi.min()))


# --------------------------------------------------------------------------- sampling


def sample(model, n: int, seed: int, rep: int = 0) -> np.ndarray:
    """n i.i.d. observations, deterministic in (seed, rep)."""
    rng = rng_for(seed, rep)
    if isinstance(model, DeconvPair):
        nu_law = model.nu_law or Law("grid", measure=model.nu)
        mu_law = model.mu_law or Law("grid", measure=model.mu)
        return nu_law.sample(rng, n) + mu_law.sample(rng, n)
    if isinstance(model, LevyTriplet):
        D = model.delta
        out = np.full(n, D * model.gamma)
        parts = model.nu.parts
        if not parts:
            if not model.finite_activity:
                raise UsageError("infinite-activity sampling needs an analytic description")
            parts = (("finite", model.lam, Law("grid", measure=model.nu.measure.scaled(1 / model.lam))),)
        for part in parts:
            if part[0] == "gamma":
                _, alpha, rate = part
                out += rng.gamma(alpha * D, 1.0 / rate, n)
            elif part[0] == "finite":
                _, lam, law = part
                counts = rng.poisson(D * lam, n)
                jumps = law.sample(rng, int(counts.sum()))
                idx = np.repeat(np.arange(n), counts)
                out += np.bincount(idx, weights=jumps, minlength=n)
            else:
                raise UsageError(f"unknown jump part {part[0]}")
        return out
    raise UsageError("sampling is defined for Levy and deconvolution models")


# --------------------------------------------------------------------------- built-in models


def _smooth_bump(x: np.ndarray, center: float, halfwidth: float) -> np.ndarray:
    s = (x - center) / halfwidth
    out = np.zeros_like(s)
    m = np.abs(s) < 1
    out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2))
    return out


def gamma_jumps(grid: UniformGrid, alpha: float, rate: float = 1.0) -> JumpMeasure:
    x = grid.x
    pos = x > 0
    dens = np.zeros(grid.n)
    dens[pos] = alpha * np.exp(-rate * x[pos]) / x[pos]
    # the origin cell is left out; what it would carry of int |x| nu(dx)
    cut = alpha * grid.dx / 2
    return JumpMeasure(MixedMeasure((), GridFunction(grid, dens)), "infinite",
                       parts=(("gamma", alpha, rate),), origin_cutoff_xmass=cut)


def normal_cp_jumps(grid: UniformGrid, lam: float, mean: float, sd: float) -> JumpMeasure:
    dens = lam * stats.norm.pdf(grid.x, mean, sd)
    dens[grid.origin_index()] = 0.0  # nu-null point; keeps the Riemann sums consistent
    dens *= lam / trapezoid_sum(dens, grid.dx)
    m = MixedMeasure((), GridFunction(grid, dens))
    law = Law("normal", (mean, sd))
    return JumpMeasure(m, "finite", lam, (("finite", lam, law),))


def poisson_jumps(grid: UniformGrid, lam: float = 1.0, loc: float = 1.0,
                  width: float = 1e-3) -> JumpMeasure:
    """Jumps of size `loc`; width > 0 replaces the atom by a smooth bump."""
    if width <= 0:
        m = MixedMeasure(((loc, lam),), GridFunction.zeros(grid))
        return JumpMeasure(m, "finite", lam, (("finite", lam, Law("dirac", (loc,))),))
    b = _smooth_bump(grid.x, loc, width)
    if b.sum() == 0:
        raise GridError("bump narrower than the grid spacing")
    b *= lam / trapezoid_sum(b, grid.dx)
    m = MixedMeasure((), GridFunction(grid, b))
    return JumpMeasure(m, "finite", lam)


def _grid_for(params: dict, span: float, n: int) -> UniformGrid:
    g = params.get("grid") or {}
    return UniformGrid.symmetric(float(g.get("span", span)), int(g.get("n", n)))


MODEL_DEFAULTS: dict[str, dict] = {
    "levy-gamma": {"alpha": 0.3, "rate": 1.0, "delta": 1.0, "gamma": 0.0,
                   "grid": {"span": 24.0, "n": 2**14}},
    "levy-cp-normal": {"lam": 1.0, "mean": 2.0, "sd": 1.0, "delta": 1.0, "gamma": 0.0,
                       "grid": {"span": 32.0, "n": 2**14}},
    "levy-poisson": {"lam": 1.0, "loc": 1.0, "width": 1e-3, "delta": 1.0, "gamma": 0.0,
                     "grid": {"span": 8.0, "n": 2**16}},
    "levy-gamma-cp": {"alpha": 0.45, "rate": 1.0, "lam": 1.0, "mean": 2.0, "sd": 1.0,
                      "delta": 1.0, "gamma": 0.0, "grid": {"span": 24.0, "n": 2**14}},
    "decon-gamma-error": {"shape": 0.3, "scale": 1.0, "mean": 0.0, "sd": 1.0,
                          "grid": {"span": 24.0, "n": 2**14}},
    "decon-identity": {"mean": 0.0, "sd": 1.0, "grid": {"span": 16.0, "n": 2**14}},
    "wn-matrix": {"diag": [1.0, 0.5, 0.25], "eps": 1.0},
    "wn-diffeq": {"eps": 1.0, "amp": 1.0, "width": 1.0, "grid": {"span": 16.0, "n": 2**12}},
}


def list_models() -> list[str]:
    return sorted(MODEL_DEFAULTS)


def _merge(name: str, params: dict) -> dict:
    if name not in MODEL_DEFAULTS:
        raise UsageError(f"unknown model {name!r}; known: {', '.join(list_models())}")
    base = json.loads(json.dumps(MODEL_DEFAULTS[name]))
    unknown = set(params) - set(base) - {"model"}
    if unknown:
        raise UsageError(f"unknown keys for {name}: {sorted(unknown)}")
    for k, v in params.items():
        if k == "grid" and v is not None:
            base["grid"].update(v)
        elif k != "model" and v is not None:
            base[k] = v
    return base


def build_model(name: str, **params):
    """Construct a built-in model; `grid` may override {"span", "n"}."""
    p = _merge(name, params)
    if name.startswith("wn-"):
        return _build_white_noise(name, p)
    grid = _grid_for(p, p["grid"]["span"], p["grid"]["n"])
    return _build_on_grid(name, p, grid)


def _build_on_grid(name: str, p: dict, grid: UniformGrid):
    def factory(g: UniformGrid):
        return _build_on_grid(name, p, g)

    if name == "levy-gamma":
        nu = gamma_jumps(grid, p["alpha"], p["rate"])
        return LevyTriplet(p["gamma"], p["delta"], nu, name, p, factory)
    if name == "levy-cp-normal":
        nu = normal_cp_jumps(grid, p["lam"], p["mean"], p["sd"])
        return LevyTriplet(p["gamma"], p["delta"], nu, name, p, factory)
    if name == "levy-poisson":
        nu = poisson_jumps(grid, p["lam"], p["loc"], p["width"])
        return LevyTriplet(p["gamma"], p["delta"], nu, name, p, factory)
    if name == "levy-gamma-cp":
        g = gamma_jumps(grid, p["alpha"], p["rate"])
        c = normal_cp_jumps(grid, p["lam"], p["mean"], p["sd"])
        dens = g.density + c.density
        nu = JumpMeasure(MixedMeasure((), dens), "infinite",
                         parts=g.parts + c.parts, origin_cutoff_xmass=g.origin_cutoff_xmass)
        return LevyTriplet(p["gamma"], p["delta"], nu, name, p, factory)
    if name in ("decon-gamma-error", "decon-identity"):
        x = grid.x
        nu = MixedMeasure((), GridFunction(grid, stats.norm.pdf(x, p["mean"], p["sd"])))
        nu_law = Law("normal", (p["mean"], p["sd"]))
        if name == "decon-identity":
            return DeconvPair(nu, MixedMeasure(((0.0, 1.0),)), nu_law, Law("dirac", (0.0,)),
                              name=name, params=p, factory=factory)
        shape, scale = p["shape"], p["scale"]

        def phi_eps(u, shape=shape, scale=scale):
            return (1.0 - 1j * scale * u) ** (-shape)

        mu_dens, _ = density_from_char(SpectralFunction(grid, phi_eps(grid.u)))
        return DeconvPair(nu, MixedMeasure((), mu_dens), nu_law, Law("gamma", (shape, scale)),
                          phi_eps, name, p, factory)
    raise UsageError(f"unknown model {name!r}")


def _build_white_noise(name: str, p: dict) -> WhiteNoiseOp:
    if name == "wn-matrix":
        K = np.diag(np.asarray(p["diag"], dtype=float))
        return WhiteNoiseOp("matrix", matrix=K, eps=p["eps"], name=name)
    grid = _grid_for(p, p["grid"]["span"], p["grid"]["n"])
    theta = GridFunction(grid, p["amp"] * np.exp(-0.5 * (grid.x / p["width"]) ** 2))
    return WhiteNoiseOp("diffeq_nonlinear", theta=theta, eps=p["eps"], name=name)


def rebuild_on(model, grid: UniformGrid):
    """The same model on another grid, if it was built by `build_model`."""
    if getattr(model, "factory", None) is None:
        return None
    return model.factory(grid)


def load_config(path: str) -> dict:
    """Read a JSON or TOML model config."""
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError:  # python < 3.11
            raise UsageError("TOML configs need python >= 3.11; use JSON") from None
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)
