"""Independent checks of the bounds: Cramer-Rao suprema over finite submodels,
perturbation paths, LAN log-likelihood ratios and chi-square divergences."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import GridError, UsageError
from .functionals import Functional
from .models import (DeconvPair, JumpMeasure, LevyTriplet, WhiteNoiseOp, marginal_law, rng_for,
                     sample)
from .operators import DENSITY_FLOOR, ScoreOperator, build_operator, score
from .spectral_core import GridFunction, MixedMeasure, integrate


def k_path(y):
    """Positive link with k(0) = k'(0) = 1, bounded by 2."""
    return 2.0 / (1.0 + np.exp(-2.0 * np.asarray(y, dtype=float)))


@dataclass(frozen=True, eq=False)
class PathSpec:
    b: GridFunction
    t: float
    kind: str = "multiplicative_k"  # or linear

    def __post_init__(self):
        if self.kind not in ("multiplicative_k", "linear"):
            raise UsageError(f"unknown path kind {self.kind}")

    def factor(self, x) -> np.ndarray:
        bx = self.b(x)
        if self.kind == "multiplicative_k":
            return k_path(self.t * bx)
        return 1.0 + self.t * bx


@dataclass(frozen=True, eq=False)
class SubmodelBasis:
    directions: tuple
    model: object = None
    label: str = ""

    @property
    def dim(self) -> int:
        return len(self.directions)


def perturb(model, p: PathSpec):
    """The model with nu replaced by nu_t, d nu_t / d nu = factor(b).

    Deconvolution paths are renormalized to probability measures, Levy paths are not.
    """
    if p.t == 0:
        return model
    if isinstance(model, LevyTriplet):
        m = model.nu.measure
        new = _reweight(m, p)
        nu = JumpMeasure(new, model.nu.activity, None, (), model.nu.origin_cutoff_xmass)
        return LevyTriplet(model.gamma, model.delta, nu, model.name + "+path", dict(model.params))
    if isinstance(model, DeconvPair):
        new = _reweight(model.nu, p)
        new = new.scaled(1.0 / new.total_mass)
        return DeconvPair(new, model.mu, None, model.mu_law, model.phi_eps,
                          model.name + "+path", dict(model.params))
    raise UsageError("perturb applies to Levy and deconvolution models")


def _reweight(m: MixedMeasure, p: PathSpec) -> MixedMeasure:
    atoms = tuple((a, w * float(p.factor(np.array([a]))[0])) for a, w in m.atoms)
    dens = None
    if m.density is not None:
        f = p.factor(m.density.x)
        supp = m.density.values > 0
        if np.any(f[supp] <= 0) or any(w <= 0 for _, w in atoms):
            raise GridError("perturbed density is not positive")
        dens = m.density * f
    return MixedMeasure(atoms, dens)


# --------------------------------------------------------------------------- bases


def dyadic_cells(center: float, half_width: float, cells: int):
    """Breakpoints of `cells` equal cells on [center - h, center + h]."""
    return np.linspace(center - half_width, center + half_width, cells + 1)


def _cell_indicator(x, lo, hi, first, last):
    v = ((x > lo) | first) & ((x < hi) | last)
    out = v.astype(float)
    if not first:
        out[np.isclose(x, lo, rtol=0, atol=1e-12)] = 0.5
    if not last:
        out[np.isclose(x, hi, rtol=0, atol=1e-12)] = 0.5
    return out


def piecewise_basis(model, dim: int, center: float, half_width: float,
                    degree: int = 1) -> SubmodelBasis:
    """Piecewise polynomials on dyadic cells; the two end cells reach the grid ends.

    dim = cells * (degree + 1).  Bases with the same center and half-width
    are nested as the number of cells doubles.
    """
    if dim < degree + 1 or dim % (degree + 1):
        raise UsageError(f"dimension {dim} is not a multiple of {degree + 1}")
    cells = dim // (degree + 1)
    grid = model.grid
    x = grid.x
    br = dyadic_cells(center, half_width, cells)
    dirs = []
    for c in range(cells):
        lo, hi = br[c], br[c + 1]
        ind = _cell_indicator(x, lo, hi, c == 0, c == cells - 1)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        s = np.clip((x - mid) / half, -1.0, 1.0)  # end cells: polynomial frozen past the edge
        for k in range(degree + 1):
            dirs.append(GridFunction(grid, ind * special_legendre(k, s)))
    return _adapt(model, SubmodelBasis(tuple(dirs), model, f"piecewise-deg{degree}-{cells}cells"))


def special_legendre(k: int, s: np.ndarray) -> np.ndarray:
    return np.polynomial.legendre.Legendre.basis(k)(s)


def hermite_basis(model, dim: int, center: float, scale: float) -> SubmodelBasis:
    """Hermite functions He_k((x-c)/s) exp(-((x-c)/s)^2 / 4); nested in dim."""
    grid = model.grid
    z = (grid.x - center) / scale
    env = np.exp(-0.25 * z**2)
    dirs = []
    for k in range(dim):
        h = np.polynomial.hermite_e.HermiteE.basis(k)(z) * env
        h /= max(np.abs(h).max(), 1e-300)
        dirs.append(GridFunction(grid, h))
    return _adapt(model, SubmodelBasis(tuple(dirs), model, f"hermite-{dim}"))


def _adapt(model, basis: SubmodelBasis) -> SubmodelBasis:
    """Impose the tangent constraints of the model on a raw basis."""
    if isinstance(model, DeconvPair):
        dirs = tuple(b - integrate(b, model.nu) for b in basis.directions)
        return SubmodelBasis(dirs, model, basis.label)
    if isinstance(model, LevyTriplet) and not model.finite_activity:
        # keep directions integrable against a nu that is singular at 0
        w = np.minimum(1.0, np.abs(model.grid.x) / 0.05)
        dirs = tuple(b * w for b in basis.directions)
        return SubmodelBasis(dirs, model, basis.label)
    return basis


def default_basis(model, zeta: Functional, dim: int, degree: int = 1) -> SubmodelBasis:
    """Dyadic piecewise-linear basis centred at the functional's jump."""
    if isinstance(model, LevyTriplet):
        m = model.nu.measure
    else:
        m = model.nu
    x = m.density.x if m.density is not None else m.atom_locs
    w = np.abs(m.density.values) if m.density is not None else m.atom_masses
    cdf = np.cumsum(w) / w.sum()
    lo = float(np.interp(1e-6, cdf, x))
    hi = float(np.interp(1 - 1e-6, cdf, x))
    c = zeta.t if zeta.is_indicator else 0.5 * (lo + hi)
    h = max(c - lo, hi - c)
    return piecewise_basis(model, dim, c, h, degree)


# --------------------------------------------------------------------------- Cramer-Rao


@dataclass
class CRResult:
    value: float
    dim: int
    rank: int
    null_directions: int
    singular_values: np.ndarray = field(repr=False, default=None)


def _targets(A: ScoreOperator, zeta: Functional, basis: SubmodelBasis) -> np.ndarray:
    z = zeta.on_grid(A.nu.grid)
    if A.model_kind == "decon":
        z = z - integrate(z, A.nu)
    return np.array([integrate(z * b, A.nu) for b in basis.directions])


def gram_matrix(A: ScoreOperator, basis: SubmodelBasis, mc: int = 0, seed: int = 0) -> np.ndarray:
    """G_ij = <A b_i, A b_j> in L^2(P), by quadrature or (mc > 0) by a Monte Carlo average."""
    scores = [score(A, b) for b in basis.directions]
    d = len(scores)
    if mc:
        y = sample(A.model, mc, seed)
        S = np.array([s.at(y, A.P) for s in scores])
        return S @ S.T / mc
    G = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            G[i, j] = G[j, i] = scores[i].inner(scores[j], A.P)
    return G


def cramer_rao_detail(model, zeta: Functional, basis: SubmodelBasis,
                      A: ScoreOperator | None = None, rcond: float = 1e-10,
                      mc: int = 0, seed: int = 0) -> CRResult:
    A = A or build_operator(model)
    if basis.dim == 0:
        raise UsageError("empty basis")
    G = gram_matrix(A, basis, mc, seed)
    d = basis.dim
    m = _targets(A, zeta, basis)
    U, s, Vt = np.linalg.svd(G, hermitian=True)
    if s.size == 0 or s.max() <= 0:
        raise UsageError("all directions are null under A")
    keep = s > rcond * s.max()
    proj = U[:, keep].T @ m
    value = float(np.sum(proj**2 / s[keep]))
    return CRResult(value, d, int(keep.sum()), int((~keep).sum()), s)


def cramer_rao_sup(model, zeta: Functional, basis: SubmodelBasis,
                   A: ScoreOperator | None = None) -> float:
    """sup over span(basis) of <chi, b>^2 / ||A b||^2, i.e. m^T G^+ m."""
    return cramer_rao_detail(model, zeta, basis, A).value


def cramer_rao_ladder(model, zeta: Functional, dims=(4, 8, 16, 32, 64), degree: int = 1,
                      A: ScoreOperator | None = None) -> list[CRResult]:
    A = A or build_operator(model)
    return [cramer_rao_detail(model, zeta, default_basis(model, zeta, d, degree), A) for d in dims]


def ladder_report(results: list[CRResult], sigma_ref: float, slack: float = 1e-8) -> dict:
    vals = [r.value for r in results]
    monotone = all(b >= a - slack for a, b in zip(vals, vals[1:]))
    return {
        "dims": [r.dim for r in results],
        "values": vals,
        "sigma_ref": float(sigma_ref),
        "null_directions": [r.null_directions for r in results],
        "monotone": monotone,
        "final_ratio": vals[-1] / sigma_ref if sigma_ref else float("nan"),
    }


# --------------------------------------------------------------------------- LAN check


@dataclass
class LANReport:
    max_discrepancy: float
    mean: float
    var: float
    mean_theory: float
    var_theory: float
    se_mean: float
    reps: int


def lan_check_white_noise(K: WhiteNoiseOp, b, reps: int = 10_000, seed: int = 0,
                          theta=None) -> LANReport:
    """log dP_{theta + eps b}/dP_theta two ways: the Gaussian-shift display and the densities."""
    if K.kind != "matrix":
        raise UsageError("LAN check needs a matrix operator")
    M = K.matrix
    b = np.asarray(b, dtype=float)
    theta = np.zeros(M.shape[1]) if theta is None else np.asarray(theta, dtype=float)
    eps = K.eps
    Kb = M @ b
    mean0 = M @ theta
    rng = rng_for(seed)
    W = rng.standard_normal((reps, M.shape[0]))
    y = mean0 + eps * W
    a = W @ Kb - 0.5 * Kb @ Kb
    cov = eps**2 * np.eye(M.shape[0])
    lb = stats.multivariate_normal(mean0 + eps * Kb, cov).logpdf(y) - \
        stats.multivariate_normal(mean0, cov).logpdf(y)
    lb = np.atleast_1d(lb)
    disc = float(np.max(np.abs(a - lb))) if reps else 0.0
    nb = float(Kb @ Kb)
    return LANReport(disc, float(a.mean()), float(a.var(ddof=1)) if reps > 1 else 0.0,
                     -0.5 * nb, nb, float(a.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0,
                     reps)


# --------------------------------------------------------------------------- chi-square


@dataclass
class Chi2Report:
    lhs: float
    rhs: float            # exp(t^2 ||b||^2 / 2)
    rhs_const1: float     # exp(t^2 ||b||^2)
    b_norm2: float


def chi2_diagnostic(t: LevyTriplet, p: PathSpec) -> Chi2Report:
    """int (dP_t/dP)^2 dP on the lattice, reported next to the exponential bounds."""
    if not t.finite_activity:
        raise UsageError("chi-square diagnostic needs a compound Poisson model")
    # the base law gets extra Poisson terms so its atoms cover those of the path law
    P = marginal_law(t, extra_terms=10)
    Pt = marginal_law(perturb(t, p))
    lhs = 0.0
    pa = dict(P.atoms)
    for a, m in Pt.atoms:
        m0 = _near(pa, a)
        if m0 <= 0 and m < 1e-15:
            continue
        if m0 <= 0:
            raise GridError("laws are mutually singular on the grid (atom)")
        lhs += m**2 / m0
    if Pt.density is not None and P.density is not None:
        p0 = P.density.values
        p1 = Pt.density.values
        ok = p0 > DENSITY_FLOOR
        if np.any(p1[~ok] > 1e-8):
            raise GridError("laws are mutually singular on the grid (density)")
        r = np.where(ok, p1**2 / np.where(ok, p0, 1.0), 0.0)
        lhs += float(np.sum(r) * P.density.grid.dx)
    bn = integrate(p.b * p.b, t.nu.measure)
    return Chi2Report(float(lhs), float(np.exp(0.5 * p.t**2 * bn)), float(np.exp(p.t**2 * bn)), bn)


def _near(d: dict, a: float) -> float:
    for k, v in d.items():
        if abs(k - a) <= 1e-9 * max(1.0, abs(a)):
            return v
    return 0.0
