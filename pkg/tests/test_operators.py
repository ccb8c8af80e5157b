import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sintegrate
from scipy import stats

from conftest import bumps
from effbound.errors import AssumptionError, RangeError, UsageError
from effbound.functionals import Functional
from effbound.models import build_model
from effbound.operators import (MixedFunction, adjoint, build_operator, decon_measure,
                                gateaux_diffeq, gateaux_diffeq_adjoint, gateaux_diffeq_inverse,
                                inv_adjoint, masked_mass, pinv_matrix, score)
from effbound.spectral_core import GridFunction, convolve_with_measure, integrate


@pytest.fixture(scope="module")
def cp_op(cp_model):
    return build_operator(cp_model)


@pytest.fixture(scope="module")
def ident_op():
    return build_operator(build_model("decon-identity"))


@pytest.fixture(scope="module")
def decon_op(decon_model):
    return build_operator(decon_model)


def centered(A, g: GridFunction) -> MixedFunction:
    gm = MixedFunction.lift(g, A.P)
    c = gm.integral(A.P)
    return MixedFunction(gm.values - c, gm.atom_values - c)


# ------------------------------------------------------------------ score


def test_identity_error_score_is_identity(ident_op):
    x = ident_op.P.grid.x
    b = GridFunction(ident_op.P.grid, x * np.exp(-x**2))
    Ab = score(ident_op, b)
    p = ident_op.P.density.values
    live = p > 1e-12
    assert np.max(np.abs(Ab.values.values - b.values)[live]) < 1e-12


def test_score_rejects_uncentered(decon_op):
    b = GridFunction(decon_op.P.grid, np.ones(decon_op.P.grid.n))
    with pytest.raises(ValueError):
        score(decon_op, b)


def test_levy_score_constant_direction(cp_model, cp_op):
    # b = c: A b = delta c (d(P * nu)/dP - lambda), checked against a direct sum
    c = 0.7
    g = cp_model.grid
    b = GridFunction(g, np.full(g.n, c))
    Ab = score(cp_op, b)
    P = cp_op.P
    nu = cp_model.nu.density.values
    p = P.density.values
    (a0, m0), = P.atoms
    for k in (g.index_of(1.0), g.index_of(2.5), g.index_of(-0.5)):
        # (P * nu)(x_k) = m0 nu(x_k - a0) + dx sum_j p(x_j) nu(x_k - x_j)
        j = np.arange(g.n)
        i = k + g.origin_index() - j
        ok = (i >= 0) & (i < g.n)
        conv = m0 * nu[k] + g.dx * np.sum(p[j[ok]] * nu[i[ok]])
        expect = c * (conv / p[k] - cp_model.lam)
        assert abs(Ab.values.values[k] - expect) < 1e-9 * max(1.0, abs(expect))
    # at the atom of P the ratio is nu's mass at a0 over m0, which is 0
    assert abs(Ab.atom_values[0] + c * cp_model.lam) < 1e-12


def test_masked_mass_small(decon_op, cp_op):
    assert masked_mass(decon_op) < 1e-10
    assert masked_mass(cp_op) < 1e-10


# ------------------------------------------------------------------ adjoint


@pytest.mark.parametrize("seed", range(3))
def test_duality_cp_and_decon(cp_op, decon_op, seed):
    rng = np.random.default_rng(seed)
    for A, lo, hi in ((cp_op, -1, 6), (decon_op, -3, 3)):
        x = A.P.grid.x
        b = GridFunction(A.P.grid, bumps(rng, x, lo, hi))
        if A.model_kind == "decon":
            b = b - integrate(b, A.nu)
        g = centered(A, GridFunction(A.P.grid, bumps(rng, x, lo, hi + 1)))
        Ab = score(A, b)
        lhs = Ab.inner(g, A.P)
        rhs = integrate(b * adjoint(A, g), A.nu)
        assert abs(lhs - rhs) <= 1e-6 * Ab.norm(A.P) * g.norm(A.P)


def test_adjoint_of_zero(cp_op):
    z = GridFunction.zeros(cp_op.P.grid)
    assert np.all(adjoint(cp_op, z).values == 0)


def test_adjoint_requires_centering(cp_op):
    with pytest.raises(ValueError):
        adjoint(cp_op, GridFunction(cp_op.P.grid, np.ones(cp_op.P.grid.n)))


def test_levy_adjoint_vanishes_at_origin(cp_op):
    rng = np.random.default_rng(3)
    g = centered(cp_op, GridFunction(cp_op.P.grid, bumps(rng, cp_op.P.grid.x, -1, 5)))
    v = adjoint(cp_op, g)
    assert abs(v.values[cp_op.P.grid.origin_index()]) < 1e-8


def test_decon_adjoint_keeps_constants(decon_model):
    # mu(-.) * a = a: checked on the grid interior, away from the truncated tail
    g = decon_model.grid
    a = GridFunction(g, np.full(g.n, 2.5))
    out = convolve_with_measure(a, decon_model.mu.reflect())
    inner = np.abs(g.x) < 5
    assert np.max(np.abs(out.values[inner] - 2.5)) < 1e-8


def test_poisson_kernel_element():
    m = build_model("levy-poisson")
    A = build_operator(m)
    x = m.grid.x
    near = lambda k: np.abs(x - k) < 0.25
    g = MixedFunction.lift(GridFunction(m.grid, near(0) - 2.0 * near(1) + 2.0 * near(2)), A.P)
    assert abs(g.integral(A.P)) < 1e-3
    assert abs(adjoint(A, g)(np.array([1.0]))[0]) < 1e-3


# ------------------------------------------------------------------ deconvolution measure


def test_decon_measure_inverts_phi(cp_model, cp_op):
    D = decon_measure(cp_model)
    g = cp_model.grid
    F = np.zeros(g.n, complex)
    for a, w in D.atoms:
        F += w * np.exp(1j * g.u * a)
    from effbound.spectral_core import fourier_transform
    F += fourier_transform(D.density).values
    prod = F * np.conj(cp_op.phi.values)
    assert np.max(np.abs(prod - 1)) < 1e-8


def test_decon_measure_infinite_activity(gamma_model):
    with pytest.raises(UsageError):
        decon_measure(gamma_model)


# ------------------------------------------------------------------ inverse adjoint


def test_identity_error_inverse_is_zeta(ident_op):
    g = ident_op.P.grid
    z = Functional.from_grid(GridFunction(g, np.exp(-(g.x - 0.5) ** 2)))
    psi = inv_adjoint(ident_op, z).psi
    assert np.max(np.abs(psi.values.values - np.exp(-(g.x - 0.5) ** 2))) < 1e-12


@pytest.mark.parametrize("which", ["cp", "decon"])
def test_inverse_after_adjoint(which, cp_op, decon_op):
    A = cp_op if which == "cp" else decon_op
    grid = A.P.grid
    x = grid.x
    rng = np.random.default_rng(11)
    # smooth and compactly supported (to grid precision)
    g = centered(A, GridFunction(grid, bumps(rng, x, 0.5, 3) * np.exp(-0.1 * x**2)))
    zeta = adjoint(A, g)
    psi = inv_adjoint(A, Functional.from_grid(zeta)).psi
    # far out in the tail (x > 20 for the compound Poisson law) both convolutions
    # run into the grid edge; the check covers where P actually lives
    live = (A.P.density.values > 1e-8) & (np.abs(x) < 15)
    assert np.max(np.abs(psi.values.values - g.values.values)[live]) < 1e-6
    if A.P.atoms:
        assert np.max(np.abs(psi.atom_values - g.atom_values)) < 1e-6


def test_adjoint_after_inverse(cp_op):
    grid = cp_op.P.grid
    x = grid.x
    # everything in the range of A* vanishes at the origin
    z = GridFunction(grid, x * np.exp(-(x - 2) ** 2))
    psi = inv_adjoint(cp_op, Functional.from_grid(z)).psi
    psi = MixedFunction(psi.values - psi.integral(cp_op.P), psi.atom_values - psi.integral(cp_op.P))
    back = adjoint(cp_op, psi)
    inner = np.abs(x) < 10
    assert np.max(np.abs(back.values - z.values)[inner]) < 1e-4


def test_large_beta_rejected():
    A = build_operator(build_model("levy-gamma", alpha=0.8))
    with pytest.raises(AssumptionError) as e:
        inv_adjoint(A, Functional.right(1.0))
    assert e.value.diagnostics["beta_hat"] > 0.5


def test_declared_smoothness_below_beta(gamma_model):
    A = build_operator(gamma_model)
    x = gamma_model.grid.x
    z = GridFunction(gamma_model.grid, x**2 * np.exp(-x**2))
    with pytest.raises(AssumptionError):
        inv_adjoint(A, Functional.from_grid(z, smooth_index=0.2))


def test_indicator_must_avoid_origin(gamma_model):
    A = build_operator(gamma_model)
    with pytest.raises(UsageError):
        inv_adjoint(A, Functional.left(1.0))
    z = GridFunction(gamma_model.grid, np.exp(-gamma_model.grid.x**2))
    with pytest.raises(UsageError):
        inv_adjoint(A, Functional.from_grid(z))


def test_singular_functional_outside_range():
    m = build_model("levy-gamma-cp")
    A = build_operator(m)
    x = m.grid.x
    z = GridFunction(m.grid, np.where(x > 0, np.abs(x) ** 0.05 * np.exp(-x), 0.0))
    with pytest.raises(RangeError) as e:
        inv_adjoint(A, Functional.from_grid(z))
    assert "not in ran A*" in str(e.value)


def test_ladder_diagnostics(gamma_model):
    r = inv_adjoint(build_operator(gamma_model), Functional.right(1.0))
    d = r.diagnostics()
    assert d["stable"] and d["path"] == "spectral"
    assert len(d["norms"]) == len(d["ladder"]) and len(d["steps"]) == len(d["ladder"]) - 1


# ------------------------------------------------------------------ finite-dimensional pseudoinverse


def test_pinv_examples():
    r = pinv_matrix(np.eye(3), [1, 2, 3])
    assert np.allclose(r.psi, [1, 2, 3]) and abs(r.bound - 14) < 1e-12
    r = pinv_matrix(np.diag([1, 0.5, 0.25]), [0, 1, 0])
    assert np.allclose(r.psi, [0, 2, 0]) and abs(r.bound - 4) < 1e-12
    r = pinv_matrix([[1, 0], [0, 0], [0, 0]], [1, 0])
    assert np.allclose(r.psi, [1, 0, 0]) and abs(r.bound - 1) < 1e-12


def test_pinv_outside_range():
    with pytest.raises(RangeError):
        pinv_matrix([[1, 0], [0, 0], [0, 0]], [0, 1])
    with pytest.raises(UsageError):
        pinv_matrix(np.eye(3), [1, 2])


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_pinv_properties(m, p, seed):
    rng = np.random.default_rng(seed)
    r = min(m, p, int(rng.integers(1, 6)))
    K = rng.normal(size=(m, r)) @ rng.normal(size=(r, p))
    zeta = K.T @ rng.normal(size=m)  # in ran K^T by construction
    res = pinv_matrix(K, zeta)
    assert np.linalg.norm(K.T @ res.psi - zeta) <= 1e-10 * max(1.0, np.linalg.norm(zeta)) * 1e2
    # psi is orthogonal to ker K^T
    U, s, Vt = np.linalg.svd(K.T)
    null = Vt[np.sum(s > 1e-10 * s.max()):]
    assert np.all(np.abs(null @ res.psi) <= 1e-10 * max(1.0, np.linalg.norm(res.psi)))


# ------------------------------------------------------------------ nonlinear white noise


@pytest.fixture(scope="module")
def theta():
    return build_model("wn-diffeq").theta


def test_gateaux_zero(theta):
    z = GridFunction.zeros(theta.grid)
    assert np.all(gateaux_diffeq(theta, z).values == 0)


@pytest.mark.parametrize("seed", range(5))
def test_gateaux_duality(theta, seed):
    rng = np.random.default_rng(seed)
    x = theta.grid.x
    b = GridFunction(theta.grid, bumps(rng, x, -3, 3))
    h = GridFunction(theta.grid, bumps(rng, x, -3, 3))
    dx = theta.grid.dx
    lhs = np.sum(gateaux_diffeq(theta, b).values * h.values) * dx
    rhs = np.sum(b.values * gateaux_diffeq_adjoint(theta, h).values) * dx
    assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), 1e-3)


def test_gateaux_matches_ode(theta):
    # f' = -f + 2 theta^2 integrated forward from far left
    f = gateaux_diffeq(theta, theta)
    th = lambda s: float(theta(np.array([s]))[0])
    sol = sintegrate.solve_ivp(lambda s, y: -y + 2 * th(s) ** 2, (-8.0, 6.0), [0.0],
                               dense_output=True, rtol=1e-10, atol=1e-12, max_step=0.01)
    for s in (-1.0, 0.0, 0.5, 2.0, 5.0):
        assert abs(sol.sol(s)[0] - f(np.array([s]))[0]) < 1e-4


def test_gateaux_requires_nonnegative_theta(theta):
    with pytest.raises(ValueError):
        gateaux_diffeq(theta * -1.0, theta)


def test_gateaux_inverse(theta):
    x = theta.grid.x
    zeta = theta * GridFunction(theta.grid, np.sin(x) * np.exp(-0.1 * x**2))
    h, diag = gateaux_diffeq_inverse(theta, zeta)
    back = gateaux_diffeq_adjoint(theta, h)
    assert diag["stable"]
    assert np.max(np.abs(back.values - zeta.values)) < 1e-4
    # without the theta factor zeta is outside the range
    with pytest.raises(RangeError):
        gateaux_diffeq_inverse(theta, GridFunction(theta.grid, np.exp(-0.1 * x**2)))
