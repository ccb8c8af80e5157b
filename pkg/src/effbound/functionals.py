"""Linear functionals zeta of the jump measure or of the law of X."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import UsageError
from .spectral_core import (GridFunction, MixedMeasure, SpectralFunction, UniformGrid,
                            fourier_transform, integrate, raised_cosine_window)

# zeta^c does not decay; it is switched off smoothly between these fractions of the span
TAPER_START, TAPER_END = 0.75, 0.85


def _taper(grid: UniformGrid) -> np.ndarray:
    L = min(-grid.x0, grid.xmax)
    s = np.abs(grid.x)
    return raised_cosine_window(s, TAPER_END * L, TAPER_START / TAPER_END)


@dataclass(frozen=True, eq=False)
class Functional:
    """zeta = coef * (1_{(-inf,t]} | 1_{[t,inf)} | grid values).

    `smooth_index` is an optional declared smoothness of a grid functional.
    """

    kind: str  # indicator_left | indicator_right | grid
    t: float | None = None
    zeta: GridFunction | None = None
    coef: float = 1.0
    smooth_index: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind in ("indicator_left", "indicator_right"):
            if self.t is None or not np.isfinite(self.t):
                raise UsageError("indicator functionals need a finite t")
        elif self.kind == "grid":
            if self.zeta is None:
                raise UsageError("grid functional needs values")
        else:
            raise UsageError(f"unknown functional kind {self.kind}")

    @classmethod
    def left(cls, t: float) -> "Functional":
        return cls("indicator_left", float(t), label=f"1(x<={t:g})")

    @classmethod
    def right(cls, t: float) -> "Functional":
        return cls("indicator_right", float(t), label=f"1(x>={t:g})")

    @classmethod
    def generalized_cdf(cls, t: float) -> "Functional":
        """nu((-inf,t]) for t < 0 and nu([t,inf)) for t > 0."""
        if t == 0:
            raise UsageError("t = 0 is excluded for the generalized distribution function")
        return cls.left(t) if t < 0 else cls.right(t)

    @classmethod
    def from_grid(cls, zeta: GridFunction, smooth_index: float | None = None,
                  label: str = "grid") -> "Functional":
        return cls("grid", zeta=zeta, smooth_index=smooth_index, label=label)

    @property
    def is_indicator(self) -> bool:
        return self.kind != "grid"

    def scaled(self, c: float) -> "Functional":
        return replace(self, coef=self.coef * c)

    def is_zero(self) -> bool:
        return self.coef == 0.0 or (self.kind == "grid" and not np.any(self.zeta.values))

    def pointwise(self, x) -> np.ndarray:
        """Exact values, with the value 1/2 at the jump."""
        x = np.asarray(x, dtype=float)
        if self.kind == "indicator_left":
            v = np.where(x < self.t, 1.0, 0.0)
        elif self.kind == "indicator_right":
            v = np.where(x > self.t, 1.0, 0.0)
        else:
            return self.coef * self.zeta(x)
        v = np.where(np.isclose(x, self.t, rtol=0, atol=1e-12), 0.5, v)
        return self.coef * v

    def on_grid(self, grid: UniformGrid, taper: bool = True) -> GridFunction:
        if self.kind == "grid":
            if self.zeta.grid != grid:
                vals = self.zeta(grid.x)
            else:
                vals = np.asarray(self.zeta.values)
            return GridFunction(grid, self.coef * vals)
        vals = self.pointwise(grid.x)
        if taper:
            vals = vals * _taper(grid)
        return GridFunction(grid, vals)

    def decomposition(self, grid: UniformGrid) -> tuple[GridFunction, GridFunction]:
        if not self.is_indicator:
            raise UsageError("only indicator functionals carry the exponential split")
        zs, zc = decompose_indicator(self.t, grid, side=self.kind)
        return zs * self.coef, zc * self.coef

    def spectrum(self, grid: UniformGrid) -> SpectralFunction:
        """F zeta on the dual grid.

        Indicators use the closed-form transform of the exponential part plus
        the FFT of the (tapered, Lipschitz) remainder, which avoids the slow
        1/u tail of the raw jump.
        """
        if not self.is_indicator:
            return fourier_transform(self.on_grid(grid))
        u = grid.u
        t = self.t
        _, zc = decompose_indicator(t, grid, side=self.kind)
        zc = zc * _taper(grid)
        if self.kind == "indicator_right":
            Fs = np.exp(1j * u * t) / (1 - 1j * u)
        else:
            Fs = np.exp(1j * u * t) / (1 + 1j * u)
        F = fourier_transform(zc).values + Fs
        return SpectralFunction(grid, self.coef * F)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "coef": self.coef, "label": self.label}
        if self.t is not None:
            d["t"] = self.t
        return d


def decompose_indicator(t: float, grid: UniformGrid, side: str | None = None):
    """Exponential split of an indicator into a smooth-kink part and a Lipschitz part.

    Right indicator 1_{[t,inf)}: zeta^s = e^{t-x} 1_{[t,inf)}, zeta^c = (1 - e^{t-x}) 1_{[t,inf)}.
    Left indicator 1_{(-inf,t]} uses the mirror image.  With side=None the
    generalized distribution function convention picks right for t > 0 and
    left for t < 0.
    """
    if side is None:
        if t == 0:
            raise UsageError("t = 0 has no split")
        side = "indicator_right" if t > 0 else "indicator_left"
    x = grid.x
    if side == "indicator_right":
        on = x >= t
        e = np.exp(np.minimum(t - x, 0.0))
    else:
        on = x <= t
        e = np.exp(np.minimum(x - t, 0.0))
    ind = np.where(on, 1.0, 0.0)
    zs = ind * e
    zc = ind * (1.0 - e)
    return GridFunction(grid, zs), GridFunction(grid, zc)


def as_tuple(zeta) -> tuple:
    if isinstance(zeta, Functional):
        return (zeta,)
    return tuple(zeta)


def measure_integral(zeta: Functional, m: MixedMeasure, grid: UniformGrid | None = None) -> float:
    """int zeta dm.

    Indicators read the cumulative trapezoid of the density at t by linear
    interpolation, so a jump between grid points is placed where it belongs
    instead of at the nearest node.
    """
    if grid is None:
        grid = m.density.grid
    if not zeta.is_indicator or m.density is None:
        return float(integrate(zeta.on_grid(grid), m))
    g = m.density.grid
    v = m.density.values
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * g.dx)])
    below = float(np.interp(zeta.t, g.x, cum))
    dens = below if zeta.kind == "indicator_left" else cum[-1] - below
    w = zeta.pointwise(m.atom_locs) / zeta.coef if m.atoms else np.zeros(0)
    return zeta.coef * (dens + float(np.sum(w * m.atom_masses)))
