"""Score operators A, adjoints A*, inverse adjoints and finite pseudoinverses.

Elements of L^2(P) are `MixedFunction`s: grid values for the density part of
P plus exact values at the atoms of P.  The distinction matters for compound
Poisson laws, where the no-jump atom carries mass e^{-delta lambda}.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, GridError, RangeError, UsageError
from .functionals import Functional
from .models import (DeconvPair, LevyTriplet, WhiteNoiseOp, char_function, check_fourier_mult,
                     decay_exponent, error_char_function, marginal_law, obs_density)
from .spectral_core import (GridFunction, MixedMeasure, SpectralFunction, add_measures,
                            convolve_measure, convolve_with_measure, fourier_transform,
                            integrate, inverse_fourier, raised_cosine_window, shift)

DENSITY_FLOOR = 1e-12
LADDER = (128, 64, 32, 16, 8, 4, 2, 1)
STABLE_SLOPE = 0.05   # minimum log-log contraction rate of the mollification ladder
STABLE_TOL = 1e-3     # or: last step below this (relative to the norm)
FIT_POINTS = 5
NORM_GROWTH = 0.01   # white-noise floor ladder: allowed relative norm growth over its tail


@dataclass(frozen=True, eq=False)
class MixedFunction:
    """A function in L^2(P): grid values plus values at P's atoms."""

    values: GridFunction
    atom_values: np.ndarray

    @property
    def grid(self):
        return self.values.grid

    def __add__(self, other: "MixedFunction") -> "MixedFunction":
        return MixedFunction(self.values + other.values, self.atom_values + other.atom_values)

    def __sub__(self, other: "MixedFunction") -> "MixedFunction":
        return MixedFunction(self.values - other.values, self.atom_values - other.atom_values)

    def __mul__(self, c) -> "MixedFunction":
        if isinstance(c, MixedFunction):
            return MixedFunction(self.values * c.values, self.atom_values * c.atom_values)
        return MixedFunction(self.values * c, self.atom_values * c)

    __rmul__ = __mul__

    def integral(self, P: MixedMeasure) -> float:
        return integrate(self.values, P, atom_values=self.atom_values)

    def inner(self, other: "MixedFunction", P: MixedMeasure) -> float:
        return (self * other).integral(P)

    def norm(self, P: MixedMeasure) -> float:
        return float(np.sqrt(max(self.inner(self, P), 0.0)))

    def at(self, pts, P: MixedMeasure) -> np.ndarray:
        """Evaluate at sample points, using atom values where a point hits an atom."""
        pts = np.asarray(pts, dtype=float)
        out = self.values(pts)
        for a, v in zip(P.atom_locs, self.atom_values):
            out = np.where(pts == a, v, out)
        return out

    @classmethod
    def lift(cls, g, P: MixedMeasure) -> "MixedFunction":
        if isinstance(g, MixedFunction):
            return g
        return cls(g, g(P.atom_locs) if P.atoms else np.zeros(0))


@dataclass(frozen=True, eq=False)
class ScoreOperator:
    """Cached pieces of A for one model.

    phi is phi_nu for Levy models and phi_eps for deconvolution.
    """

    model_kind: str  # white_noise | decon | levy
    model: object
    P: MixedMeasure | None = None
    phi: SpectralFunction | None = None
    nu: MixedMeasure | None = None
    delta: float = 1.0
    decon_measure: MixedMeasure | None = None
    beta_hat: float | None = None


def build_operator(model) -> ScoreOperator:
    if isinstance(model, WhiteNoiseOp):
        return ScoreOperator("white_noise", model)
    if isinstance(model, DeconvPair):
        phi = error_char_function(model)
        if np.any(np.abs(phi.values) == 0):
            raise AssumptionError("error characteristic function vanishes on the grid")
        return ScoreOperator("decon", model, obs_density(model), phi, model.nu, 1.0,
                             beta_hat=decay_exponent(phi))
    if isinstance(model, LevyTriplet):
        phi = char_function(model)
        P = marginal_law(model)
        D = decon_measure(model) if model.finite_activity else None
        beta = decay_exponent(phi)
        return ScoreOperator("levy", model, P, phi, model.nu.measure, model.delta, D, beta)
    raise UsageError(f"no score operator for {type(model).__name__}")


# --------------------------------------------------------------------------- CP deconvolution


def decon_measure(t: LevyTriplet, tol: float = 1e-10) -> MixedMeasure:
    """F^{-1}[1/phi(-.)] = delta_{D gamma} * e^{D lam} sum_k (-D)^k/k! nu(-.)^{*k}."""
    if not t.finite_activity:
        raise UsageError("the deconvolution measure exists for compound Poisson models only")
    D, lam = t.delta, t.lam
    K = 0
    term = np.exp(D * lam)
    while term >= tol:
        K += 1
        term = np.exp(D * lam) * (D * lam) ** K / np.prod(np.arange(1.0, K + 1))
    nu_r = t.nu.measure.reflect()
    base = MixedMeasure(((D * t.gamma, np.exp(D * lam)),))
    total, cur = base, base
    for k in range(1, K + 1):
        cur = convolve_measure(cur, nu_r).scaled(-D / k)
        total = add_measures(total, cur)
    return total


def _split_atoms_density(m: MixedMeasure):
    return MixedMeasure(m.atoms), MixedMeasure((), m.density)


# --------------------------------------------------------------------------- A and A*


def _check_centered(val: float, scale: float, what: str):
    if abs(val) > 1e-8 * max(1.0, scale):
        raise ValueError(f"{what} is not centered (integral {val:.3g})")


def score(A: ScoreOperator, b: GridFunction) -> MixedFunction:
    """A b as an element of L^2(P); points where P's density is below the floor get 0."""
    if A.model_kind == "decon":
        nu_d = A.nu.density
        _check_centered(integrate(b, A.nu), integrate(abs(b), A.nu), "direction b")
        bnu = MixedMeasure((), b * nu_d)
        q = convolve_measure(bnu, A.model.mu).density
        p = A.P.density.values
        ok = p > DENSITY_FLOOR
        vals = np.where(ok, q.values / np.where(ok, p, 1.0), 0.0)
        return MixedFunction(GridFunction(b.grid, vals), np.zeros(len(A.P.atoms)))
    if A.model_kind == "levy":
        D = A.delta
        nu = A.nu
        bnu = MixedMeasure(tuple((a, float(b(np.array([a]))[0]) * m) for a, m in nu.atoms),
                           None if nu.density is None else b * nu.density)
        bint = integrate(b, nu)
        q = convolve_measure(A.P, bnu)
        p = A.P.density.values
        ok = p > DENSITY_FLOOR
        qd = q.density.values if q.density is not None else np.zeros(b.grid.n)
        vals = np.where(ok, D * (qd / np.where(ok, p, 1.0) - bint), 0.0)
        qa = dict(q.atoms)
        atom_vals = np.array([D * (_lookup(qa, a) / m - bint) for a, m in A.P.atoms])
        return MixedFunction(GridFunction(b.grid, vals), atom_vals)
    if A.model_kind == "white_noise":
        raise UsageError("use gateaux_diffeq or the matrix directly for white noise")
    raise UsageError(A.model_kind)


def _lookup(d: dict, a: float, tol: float = 1e-12) -> float:
    for k, v in d.items():
        if abs(k - a) <= tol * max(1.0, abs(a)):
            return v
    return 0.0


def masked_mass(A: ScoreOperator) -> float:
    """P-mass sitting where the density is below the division floor."""
    p = A.P.density.values
    return float(np.sum(np.where(p <= DENSITY_FLOOR, p, 0.0)) * A.P.density.grid.dx)


def adjoint(A: ScoreOperator, g) -> GridFunction:
    """A* g as a function on the direction space (grid)."""
    g = MixedFunction.lift(g, A.P)
    gi = g.integral(A.P)
    _check_centered(gi, _abs_int(g, A.P), "g")
    if A.model_kind == "decon":
        return convolve_with_measure(g.values, A.model.mu.reflect())
    if A.model_kind == "levy":
        P = A.P
        out = convolve_with_measure(g.values, P.reflect())
        vals = np.array(out.values, dtype=float)
        grid = g.grid
        # P(-.) * g evaluated where x + a lands on another atom of P uses g's atom value
        for a, m in P.atoms:
            for a2, v2 in zip(P.atom_locs, g.atom_values):
                k = grid.index_of(a2 - a)
                if k is not None:
                    vals[k] += m * (v2 - float(g.values(np.array([a2]))[0]))
        return GridFunction(grid, A.delta * vals)
    raise UsageError(A.model_kind)


def _abs_int(g: MixedFunction, P: MixedMeasure) -> float:
    return MixedFunction(abs_grid(g.values), np.abs(g.atom_values)).integral(P)


def abs_grid(f: GridFunction) -> GridFunction:
    return GridFunction(f.grid, np.abs(f.values))


# --------------------------------------------------------------------------- inverse adjoint


@dataclass
class InverseResult:
    psi: MixedFunction
    path: str
    beta_hat: float
    levels: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    slope: float = float("nan")
    origin_sup: list = field(default_factory=list)
    stable: bool = True
    reason: str = ""

    def diagnostics(self) -> dict:
        return {"path": self.path, "beta_hat": self.beta_hat, "ladder": self.levels,
                "norms": self.norms, "steps": self.steps, "contraction_slope": self.slope,
                "origin_sup": self.origin_sup, "stable": self.stable, "reason": self.reason}


def _zeta_star(zeta_grid: GridFunction, y: float) -> float:
    """zeta at a single point with the convention zeta(0) = 0 (0 is nu-null)."""
    if abs(y) < 1e-12:
        return 0.0
    return float(zeta_grid(np.array([y]))[0])


def _cp_apply(A: ScoreOperator, zg: GridFunction) -> MixedFunction:
    Dm = A.decon_measure
    atoms_part, dens_part = _split_atoms_density(Dm)
    cont = convolve_with_measure(zg, dens_part) if Dm.density is not None else GridFunction.zeros(zg.grid)
    full = cont + convolve_with_measure(zg, atoms_part)
    atom_vals = []
    for a, _ in A.P.atoms:
        v = sum(w * _zeta_star(zg, a - d) for d, w in Dm.atoms)
        v += float(cont(np.array([a]))[0])
        atom_vals.append(v / A.delta)
    return MixedFunction(full * (1.0 / A.delta), np.array(atom_vals))


def _multiplier(A: ScoreOperator) -> np.ndarray:
    """1/(delta phi(-u)); phi(-u) is the conjugate of phi(u) for real measures."""
    return 1.0 / (A.delta * np.conj(A.phi.values))


def _validate_functional(A: ScoreOperator, zeta: Functional):
    if A.model_kind == "levy" and not A.model.finite_activity:
        if zeta.is_indicator:
            if zeta.t == 0 or (zeta.kind == "indicator_right") != (zeta.t > 0):
                raise UsageError("for infinite activity the indicator must stay away from 0 "
                                 "(use 1_{[t,inf)} with t > 0 or 1_{(-inf,t]} with t < 0)")
        else:
            z = zeta.on_grid(A.P.grid).values
            k0 = A.P.grid.origin_index()
            if abs(z[k0]) > 1e-8 * max(1.0, np.abs(z).max()):
                raise UsageError("functional must vanish at the origin for infinite activity")


def range_precheck(A: ScoreOperator, zeta: Functional) -> float:
    """Raise if the decay exponent rules out root-n estimation of zeta."""
    beta = A.beta_hat if A.beta_hat is not None else 0.0
    if A.model_kind == "levy" and not A.model.finite_activity:
        chk = check_fourier_mult(A.model)
        beta = chk.beta_hat
    if zeta.is_indicator and beta >= 0.5:
        raise AssumptionError(f"\u03b2\u0302 \u2265 1/2 (beta_hat = {beta:.3f}): root-n rate "
                              "unavailable for distribution-function type functionals",
                              {"beta_hat": beta})
    if zeta.kind == "grid" and zeta.smooth_index is not None and zeta.smooth_index <= beta:
        raise AssumptionError(f"declared smoothness {zeta.smooth_index} does not exceed "
                              f"beta_hat = {beta:.3f}")
    return beta


def inv_adjoint(A: ScoreOperator, zeta: Functional, check: bool = True) -> InverseResult:
    """psi with A* psi = zeta, computed along a mollification ladder.

    Level m smooths zeta by a spectral window with cutoff (pi/dx)/m.  The
    sequence must contract in L^2(P) (log-log slope of successive steps above
    STABLE_SLOPE, or a final step below STABLE_TOL); otherwise zeta is declared
    outside the range of A*.
    """
    if A.model_kind not in ("levy", "decon"):
        raise UsageError("inv_adjoint covers Levy and deconvolution models")
    _validate_functional(A, zeta)
    beta = range_precheck(A, zeta) if check else (A.beta_hat or 0.0)
    grid = A.P.grid
    u = grid.u
    U = grid.nyquist
    cp = A.model_kind == "levy" and A.model.finite_activity
    path = "cp-series" if cp else "spectral"
    smooth_top = (not cp) and beta >= 0.05
    if cp:
        zg = zeta.on_grid(grid)
        Fz = fourier_transform(zg)
    else:
        # the closed-form split only pays off when the multiplier amplifies
        Fz = zeta.spectrum(grid) if smooth_top else fourier_transform(zeta.on_grid(grid))
        M = _multiplier(A) if A.model_kind == "levy" else 1.0 / np.conj(A.phi.values)

    def level(m: int) -> MixedFunction:
        if m == 1 and not smooth_top:
            w = None
        else:
            w = raised_cosine_window(u, U / m)
        if cp:
            z = zg if w is None else inverse_fourier(Fz * w).real()
            return _cp_apply(A, z)
        G = Fz * M if w is None else Fz * (M * w)
        vals = inverse_fourier(G).values.real
        return MixedFunction(GridFunction(grid, vals), np.zeros(len(A.P.atoms)))

    res = InverseResult(psi=None, path=path, beta_hat=beta, levels=list(LADDER))
    prev = None
    k0 = grid.index_of(0.0)
    near0 = np.abs(grid.x) < 0.1
    for m in LADDER:
        cur = level(m)
        res.norms.append(cur.norm(A.P))
        res.origin_sup.append(float(np.abs(cur.values.values[near0]).max()) if near0.any() else 0.0)
        if prev is not None:
            res.steps.append((cur - prev).norm(A.P))
        prev = cur
    res.psi = prev
    _judge(res, A)
    if not res.stable:
        raise RangeError("functional not in ran A*: " + res.reason, res.diagnostics())
    return res


def _judge(res: InverseResult, A: ScoreOperator):
    # judge on the finer part of the ladder, where the asymptotic rate shows
    steps = np.asarray(res.steps)[-FIT_POINTS:]
    h = np.asarray(res.levels[1:], dtype=float)[-FIT_POINTS:]  # finer level of each step
    scale = max(res.norms[-1], 1e-300)
    pos = steps > 1e-14 * scale
    if pos.sum() >= 3:
        res.slope = float(np.polyfit(np.log(h[pos]), np.log(steps[pos]), 1)[0])
    else:
        res.slope = float("inf")
    contracting = res.slope > STABLE_SLOPE
    small = steps[-1] < STABLE_TOL * max(1.0, scale)
    res.stable = bool(contracting or small)
    if not res.stable:
        res.reason = (f"mollification ladder does not settle (step slope {res.slope:.3f}, "
                      f"last step {steps[-1]:.3g}, norms {res.norms[0]:.3g} -> {res.norms[-1]:.3g})")
    # pseudo-locality near the origin for infinite-activity Levy laws
    if res.stable and A.model_kind == "levy" and not A.model.finite_activity:
        sup = np.asarray(res.origin_sup)[-FIT_POINTS:]
        if sup.min() > 0:
            lv = np.asarray(res.levels, float)[-FIT_POINTS:]
            s = np.polyfit(np.log(lv), np.log(sup), 1)[0]
            if s < -0.1:
                res.stable = False
                res.reason = f"influence function unbounded near the origin (sup slope {s:.3f})"


# --------------------------------------------------------------------------- white noise


@dataclass(frozen=True)
class PinvResult:
    psi: np.ndarray
    bound: float
    residual: float
    rank: int


def pinv_matrix(K, zeta, tol: float = 1e-8, cutoff: float = 1e-12) -> PinvResult:
    """Minimal-norm psi with K^T psi = zeta, by SVD."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    zeta = np.asarray(zeta, dtype=float).ravel()
    if zeta.size != K.shape[1]:
        raise UsageError(f"zeta has length {zeta.size}, K has {K.shape[1]} columns")
    U, s, Vt = np.linalg.svd(K, full_matrices=False)
    keep = s > cutoff * (s.max() if s.size else 0.0)
    # K^T = V S U^T, so (K^T)^+ = U S^+ V^T
    coef = (Vt[keep] @ zeta) / s[keep]
    psi = U[:, keep] @ coef
    resid = float(np.linalg.norm(K.T @ psi - zeta))
    if resid > tol * max(1.0, np.linalg.norm(zeta)):
        raise RangeError(f"functional not regular: residual {resid:.3g} outside ran K^T")
    return PinvResult(psi, float(psi @ psi), resid, int(keep.sum()))


def _k_kernel(grid) -> np.ndarray:
    return 1.0 / (1.0 - 1j * grid.u)


def gateaux_diffeq(theta: GridFunction, b: GridFunction) -> GridFunction:
    """Derivative of theta -> solution of f' = -f + theta^2 in direction b."""
    if np.min(theta.values) < 0:
        raise ValueError("theta must be nonnegative")
    F = fourier_transform(theta * b * 2.0)
    return inverse_fourier(F * _k_kernel(theta.grid)).real()


def gateaux_diffeq_adjoint(theta: GridFunction, h: GridFunction) -> GridFunction:
    """A* h = 2 theta(x) int_x^inf e^{x-s} h(s) ds."""
    F = fourier_transform(h)
    g = inverse_fourier(F * np.conj(_k_kernel(theta.grid))).real()
    return theta * g * 2.0


def gateaux_diffeq_inverse(theta: GridFunction, zeta: GridFunction,
                           floors=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10)):
    """h with A* h = zeta: h = g - g' where g = zeta/(2 theta).

    theta is floored at a decreasing ladder of levels.  Inside the range the
    norms settle (steps may shrink slowly when zeta/theta decays slowly);
    outside it they keep growing.
    """
    grid = theta.grid
    u = grid.u
    tmax = float(np.max(theta.values))
    hs, norms = [], []
    for fl in floors:
        g = zeta.values / (2.0 * np.maximum(theta.values, fl * tmax))
        G = fourier_transform(GridFunction(grid, g))
        h = inverse_fourier(G * (1.0 + 1j * u)).real()
        hs.append(h)
        norms.append(float(np.sqrt(np.sum(h.values**2) * grid.dx)))
    steps = [float(np.sqrt(np.sum((a.values - b.values) ** 2) * grid.dx)) for a, b in zip(hs, hs[1:])]
    tail = norms[-FIT_POINTS:]
    growth = tail[-1] / max(tail[0], 1e-300) - 1.0
    ok = bool(steps[-1] < STABLE_TOL * max(1.0, norms[-1]) or growth < NORM_GROWTH)
    diag = {"floors": list(floors), "norms": norms, "steps": steps, "norm_growth": growth,
            "stable": ok}
    if not ok:
        raise RangeError("functional not in ran A*: theta-floor ladder does not settle", diag)
    return hs[-1], diag
