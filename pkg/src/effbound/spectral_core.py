"""Uniform grids, the e^{+iux} Fourier convention, FFT convolution and quadrature.

All transforms use

    F f(u) = int e^{iux} f(x) dx,        F^{-1} g(x) = (2 pi)^{-1} int e^{-iux} g(u) du.

numpy's FFT uses e^{-2 pi i jk/n} in the forward direction, so the forward
transform above is computed with ``ifft`` (frequency reflection) and the
inverse with ``fft``.  A grid x_k = x0 + k dx pairs with frequencies
u_j = (j - n/2) du, du = 2 pi / (n dx); the centring gives the (-1)^k factors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import GridError


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class UniformGrid:
    x0: float
    dx: float
    n: int

    def __post_init__(self):
        if not self.dx > 0:
            raise GridError(f"grid spacing must be positive, got {self.dx}")
        if not _is_pow2(int(self.n)):
            raise GridError(f"grid size must be a power of two, got {self.n}")

    @classmethod
    def symmetric(cls, span: float, n: int = 2**14) -> "UniformGrid":
        """Grid on [-span, span) with the origin on the lattice."""
        return cls(-float(span), 2.0 * span / n, int(n))

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def xmax(self) -> float:
        return self.x0 + (self.n - 1) * self.dx

    @property
    def du(self) -> float:
        return 2.0 * np.pi / (self.n * self.dx)

    @property
    def u(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.du

    @property
    def nyquist(self) -> float:
        return np.pi / self.dx

    def dual(self) -> "UniformGrid":
        return UniformGrid(-(self.n // 2) * self.du, self.du, self.n)

    def origin_index(self) -> int:
        """Index k with x_k = 0; raises if the origin is off the lattice."""
        k = -self.x0 / self.dx
        kr = int(round(k))
        if abs(k - kr) > 1e-9 or not 0 <= kr < self.n:
            raise GridError("origin is not a grid point")
        return kr

    def index_of(self, loc: float, tol: float = 1e-9) -> int | None:
        k = (loc - self.x0) / self.dx
        kr = int(round(k))
        if abs(k - kr) <= tol and 0 <= kr < self.n:
            return kr
        return None

    def coarsen(self, factor: int) -> "UniformGrid":
        """Same span, `factor` times fewer points (origin kept on the lattice)."""
        return UniformGrid(self.x0, self.dx * factor, self.n // factor)

    def to_json(self) -> dict:
        return {"x0": self.x0, "dx": self.dx, "n": self.n}


def _check_values(values, n: int) -> np.ndarray:
    v = np.asarray(values)
    if v.shape != (n,):
        raise GridError(f"expected {n} values, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise GridError("non-finite entries in grid values")
    return v


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        v = _check_values(self.values, self.grid.n)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: UniformGrid, f) -> "GridFunction":
        return cls(grid, np.asarray(f(grid.x)))

    @classmethod
    def zeros(cls, grid: UniformGrid) -> "GridFunction":
        return cls(grid, np.zeros(grid.n))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __call__(self, pts) -> np.ndarray:
        """Linear interpolation, zero outside the grid."""
        pts = np.asarray(pts, dtype=float)
        if np.iscomplexobj(self.values):
            re = np.interp(pts, self.x, self.values.real, left=0.0, right=0.0)
            im = np.interp(pts, self.x, self.values.imag, left=0.0, right=0.0)
            return re + 1j * im
        return np.interp(pts, self.x, self.values, left=0.0, right=0.0)

    def _same(self, other: "GridFunction"):
        if other.grid != self.grid:
            raise GridError("grid mismatch")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._same(other)
            return GridFunction(self.grid, self.values + other.values)
        return GridFunction(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._same(other)
            return GridFunction(self.grid, self.values - other.values)
        return GridFunction(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._same(other)
            return GridFunction(self.grid, self.values * other.values)
        return GridFunction(self.grid, self.values * other)

    __rmul__ = __mul__

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def real(self) -> "GridFunction":
        return GridFunction(self.grid, np.real(self.values))

    def reflect(self) -> "GridFunction":
        """x -> f(-x) on the same grid, zero where -x falls outside."""
        return GridFunction(self.grid, self(-self.x) if self.grid.index_of(0.0) is None
                            else _reflect_on_lattice(self.values, self.grid))

    def to_json(self) -> dict:
        out = self.grid.to_json()
        if np.iscomplexobj(self.values):
            out["values"] = self.values.real.tolist()
            out["values_imag"] = self.values.imag.tolist()
        else:
            out["values"] = self.values.tolist()
        return out

    @classmethod
    def from_json(cls, d: dict) -> "GridFunction":
        grid = UniformGrid(float(d["x0"]), float(d["dx"]), int(d["n"]))
        v = np.asarray(d["values"], dtype=float)
        if "values_imag" in d:
            v = v + 1j * np.asarray(d["values_imag"], dtype=float)
        return cls(grid, v)


def _reflect_on_lattice(values: np.ndarray, grid: UniformGrid) -> np.ndarray:
    k0 = grid.origin_index()
    idx = 2 * k0 - np.arange(grid.n)
    ok = (idx >= 0) & (idx < grid.n)
    out = np.zeros_like(values)
    out[ok] = values[idx[ok]]
    return out


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Values of a transform on the frequency grid dual to `grid`."""

    grid: UniformGrid  # spatial counterpart
    values: np.ndarray

    def __post_init__(self):
        v = _check_values(self.values, self.grid.n).astype(complex)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def ugrid(self) -> UniformGrid:
        return self.grid.dual()

    @property
    def u(self) -> np.ndarray:
        return self.grid.u

    def __mul__(self, other):
        if isinstance(other, SpectralFunction):
            if other.grid != self.grid:
                raise GridError("grid mismatch")
            return SpectralFunction(self.grid, self.values * other.values)
        return SpectralFunction(self.grid, self.values * other)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, SpectralFunction):
            if other.grid != self.grid:
                raise GridError("grid mismatch")
            return SpectralFunction(self.grid, self.values + other.values)
        return SpectralFunction(self.grid, self.values + other)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        re = np.interp(u, self.u, self.values.real)
        im = np.interp(u, self.u, self.values.imag)
        return re + 1j * im


def _alt(n: int) -> np.ndarray:
    return 1.0 - 2.0 * (np.arange(n) % 2)


def fourier_transform(f: GridFunction) -> SpectralFunction:
    """Riemann-sum transform, exact phase for x0 != 0."""
    g = f.grid
    if not _is_pow2(g.n):
        raise GridError("non power-of-two grid")
    vals = np.asarray(f.values)
    if not np.all(np.isfinite(vals)):
        raise GridError("NaN in input")
    u = g.u
    F = g.dx * g.n * np.fft.ifft(vals * _alt(g.n)) * np.exp(1j * u * g.x0)
    return SpectralFunction(g, F)


def inverse_fourier(F: SpectralFunction, grid: UniformGrid | None = None) -> GridFunction:
    g = F.grid
    if grid is not None and grid != g:
        raise GridError("incompatible grids")
    u = g.u
    vals = _alt(g.n) * np.fft.fft(F.values * np.exp(-1j * u * g.x0)) / (g.n * g.dx)
    return GridFunction(g, vals)


def inverse_fourier_real(F: SpectralFunction) -> GridFunction:
    return inverse_fourier(F).real()


def _lattice_offset(grid: UniformGrid) -> int:
    k = -grid.x0 / grid.dx
    kr = int(round(k))
    if abs(k - kr) > 1e-9:
        raise GridError("convolution needs x0/dx to be an integer")
    return kr


def convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Linear (zero-padded) convolution int f(x-y) g(y) dy on the common grid."""
    if f.grid != g.grid:
        raise GridError("grid mismatch")
    grid = f.grid
    off = _lattice_offset(grid)
    # full result index m sits at 2 x0 + m dx; output k sits at x0 + k dx
    c = fftconvolve(np.asarray(f.values), np.asarray(g.values), mode="full")
    start = off
    out = np.zeros(grid.n, dtype=c.dtype)
    lo, hi = max(start, 0), min(start + grid.n, c.size)
    if hi > lo:
        out[lo - start:hi - start] = c[lo:hi]
    return GridFunction(grid, out * grid.dx)


def shift(f: GridFunction, a: float) -> GridFunction:
    """x -> f(x - a).  Integer-cell shifts are exact; others use a spectral phase."""
    grid = f.grid
    k = a / grid.dx
    kr = int(round(k))
    if abs(k - kr) <= 1e-9:
        out = np.zeros_like(np.asarray(f.values))
        if abs(kr) < grid.n:
            if kr >= 0:
                out[kr:] = f.values[:grid.n - kr]
            else:
                out[:kr] = f.values[-kr:]
        return GridFunction(grid, out)
    F = fourier_transform(f)
    out = inverse_fourier(F * np.exp(1j * grid.u * a))
    return out if np.iscomplexobj(f.values) else out.real()


@dataclass(frozen=True, eq=False)
class MixedMeasure:
    """Finite signed measure: point atoms plus an optional grid density."""

    atoms: tuple = ()
    density: GridFunction | None = None

    def __post_init__(self):
        atoms = tuple((float(a), float(m)) for a, m in self.atoms)
        for a, m in atoms:
            if not (np.isfinite(a) and np.isfinite(m)):
                raise GridError("non-finite atom")
        object.__setattr__(self, "atoms", atoms)

    @property
    def grid(self) -> UniformGrid | None:
        return None if self.density is None else self.density.grid

    @property
    def atom_locs(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms], dtype=float)

    @property
    def atom_masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)

    @property
    def density_mass(self) -> float:
        if self.density is None:
            return 0.0
        return float(np.real(trapezoid_sum(self.density.values, self.density.grid.dx)))

    @property
    def total_mass(self) -> float:
        return float(self.atom_masses.sum()) + self.density_mass

    def scaled(self, c: float) -> "MixedMeasure":
        dens = None if self.density is None else self.density * c
        return MixedMeasure(tuple((a, c * m) for a, m in self.atoms), dens)

    def reflect(self) -> "MixedMeasure":
        dens = None if self.density is None else self.density.reflect()
        return MixedMeasure(tuple((-a, m) for a, m in self.atoms), dens)

    def to_json(self) -> dict:
        return {"atoms": [[a, m] for a, m in self.atoms],
                "density": None if self.density is None else self.density.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "MixedMeasure":
        dens = d.get("density")
        return cls(tuple(tuple(a) for a in d.get("atoms", [])),
                   None if dens is None else GridFunction.from_json(dens))


def merge_atoms(atoms: Sequence[tuple], tol: float = 1e-12) -> tuple:
    """Combine atoms at (numerically) equal locations; drop zero masses."""
    if not atoms:
        return ()
    srt = sorted(atoms)
    out = [list(srt[0])]
    for a, m in srt[1:]:
        if abs(a - out[-1][0]) <= tol * max(1.0, abs(a)):
            out[-1][1] += m
        else:
            out.append([a, m])
    return tuple((a, m) for a, m in out if m != 0.0)


def add_measures(m1: MixedMeasure, m2: MixedMeasure) -> MixedMeasure:
    if m1.density is None:
        dens = m2.density
    elif m2.density is None:
        dens = m1.density
    else:
        dens = m1.density + m2.density
    return MixedMeasure(merge_atoms(m1.atoms + m2.atoms), dens)


def convolve_measure(m1: MixedMeasure, m2: MixedMeasure) -> MixedMeasure:
    if m1.grid is not None and m2.grid is not None and m1.grid != m2.grid:
        raise GridError("grid mismatch")
    atoms = merge_atoms([(a + b, p * q) for a, p in m1.atoms for b, q in m2.atoms])
    parts = []
    for atoms_src, dens in ((m1.atoms, m2.density), (m2.atoms, m1.density)):
        if dens is None:
            continue
        for a, p in atoms_src:
            parts.append(shift(dens, a) * p)
    if m1.density is not None and m2.density is not None:
        parts.append(convolve(m1.density, m2.density))
    dens = None
    for p in parts:
        dens = p if dens is None else dens + p
    return MixedMeasure(atoms, dens)


def convolve_with_measure(f: GridFunction, m: MixedMeasure) -> GridFunction:
    """(m * f)(x) = int f(x - y) m(dy) on the grid of f."""
    out = GridFunction.zeros(f.grid) if not np.iscomplexobj(f.values) else \
        GridFunction(f.grid, np.zeros(f.grid.n, complex))
    for a, p in m.atoms:
        out = out + shift(f, a) * p
    if m.density is not None:
        out = out + convolve(f, m.density)
    return out


def trapezoid_weights(n: int, dx: float) -> np.ndarray:
    w = np.full(n, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def trapezoid_sum(values: np.ndarray, dx: float):
    v = np.asarray(values)
    return dx * (v.sum() - 0.5 * (v[0] + v[-1]))


def integrate(f: GridFunction, m: MixedMeasure, atom_values=None):
    """int f dm; atoms use `atom_values` if given, else linear interpolation of f."""
    total = 0.0
    if m.atoms:
        if atom_values is None:
            locs = m.atom_locs
            g = f.grid
            if np.any(locs < g.x0 - 1e-12) or np.any(locs > g.xmax + 1e-12):
                raise GridError("atom outside grid span")
            atom_values = f(locs)
        total = total + np.dot(np.asarray(atom_values), m.atom_masses)
    if m.density is not None:
        if m.density.grid != f.grid:
            raise GridError("grid mismatch")
        total = total + trapezoid_sum(np.asarray(f.values) * m.density.values, f.grid.dx)
    if np.iscomplexobj(total):
        return complex(total)
    return float(total)


def raised_cosine_window(u: np.ndarray, cutoff: float, flat: float = 0.5) -> np.ndarray:
    """1 on |u| <= flat*cutoff, cosine taper to 0 at |u| = cutoff."""
    s = np.abs(u) / cutoff
    w = np.where(s <= flat, 1.0, 0.0)
    mid = (s > flat) & (s < 1.0)
    w[mid] = 0.5 * (1.0 + np.cos(np.pi * (s[mid] - flat) / (1.0 - flat)))
    return w


def gaussian_window(u: np.ndarray, width: float) -> np.ndarray:
    """Transform of a centred Gaussian kernel with standard deviation `width`."""
    return np.exp(-0.5 * (u * width) ** 2)
