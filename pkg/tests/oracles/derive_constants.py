"""Reference values for the test suite, computed without the package.

Run with `python tests/oracles/derive_constants.py`; the printed numbers are
frozen into tests/constants.py.  Only scipy and mpmath are used here.
"""
from math import e, factorial

import mpmath as mp
import numpy as np
from scipy import integrate, special, stats

mp.mp.dps = 30


def gamma_levy_sigma(t=1.0, beta=0.3):
    """Variance of the Gamma-process influence function under Gamma(beta, 1)."""
    b = mp.mpf(beta)
    t = mp.mpf(t)

    def cdf(y):
        return mp.gammainc(1 - b, 0, y) / mp.gamma(1 - b)

    def psi(x):
        y = t - x
        return (1 - cdf(y)) - y ** (-b) * mp.exp(-y) / mp.gamma(1 - b)

    def f(x):
        return psi(x) ** 2 * x ** (b - 1) * mp.exp(-x) / mp.gamma(b)

    inner = mp.quad(f, [0, t / 4, t / 2, 3 * t / 4, 0.9 * t, 0.99 * t, t])
    return float(inner + mp.gammainc(b, t) / mp.gamma(b))


def cp_constants(t=1.5, K=25):
    """Compound Poisson, lambda = Delta = 1, jumps N(2, 1), zeta = 1(x <= t).

    psi = e * sum_k (-1)^k / k! * (1(x <= t) * N(2k, k)(-.))  evaluated by series;
    at the atom 0 the indicator term is dropped (0 is a nu-null point).
    """
    def psi(x, atom=False):
        s = 0.0 if atom else float(x <= t)
        for k in range(1, K):
            s += (-1) ** k / factorial(k) * stats.norm.cdf(t - x, 2 * k, np.sqrt(k))
        return e * s

    def p(x):
        return sum(stats.norm.pdf(x, 2 * j, np.sqrt(j)) / factorial(j) for j in range(1, K)) / e

    psi0 = psi(0.0, atom=True)
    quad = integrate.quad(lambda x: psi(x) ** 2 * p(x), -15, 60, points=[t], limit=400)[0]
    sigma = quad + psi0**2 / e
    F = stats.norm.cdf(t, 2, 1)
    return {
        "sigma_unknown": sigma,
        "psi_atom": psi0,
        "nu_t": F,
        "sigma_known_formula": sigma - F**2,
        # projection orthogonal to the influence function of lambda, (A*)^{-1} 1
        "sigma_known_projection": sigma - psi0**2 / (e - 1),
        # influence function psi - (F / lambda) * (A*)^{-1} 1 of the decompounding
        # estimator renormalized to the known lambda
        "decompound_renormalized_var": sigma + 2 * F * psi0 + F**2 * (e - 1),
    }


def gamma_decon_psi(x, t, s):
    """Solution of E psi(x + eps) = 1(x <= t), eps ~ Gamma(s, 1)."""
    y = t - np.asarray(x, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    yp = y[pos]
    out[pos] = special.gammainc(1 - s, yp) + yp ** (-s) * np.exp(-yp) / special.gamma(1 - s)
    return out


def decon_sigma(t=0.5, s=0.3):
    """Var psi(X + eps), X ~ N(0, 1), eps ~ Gamma(s, 1)."""
    def inner(eps, power):
        # int psi(x + eps)^power phi(x) dx over x < t - eps, singular at the upper end
        up = t - eps
        f = lambda x: gamma_decon_psi(np.array([x + eps]), t, s)[0] ** power * stats.norm.pdf(x)
        return integrate.quad(f, -12, up, limit=400, epsabs=1e-13, epsrel=1e-11)[0]

    def outer(power):
        g = lambda eps: inner(eps, power) * stats.gamma.pdf(eps, s)
        a = integrate.quad(g, 0, 1, limit=400, epsabs=1e-13, epsrel=1e-11)[0]
        b = integrate.quad(g, 1, t + 12, limit=400, epsabs=1e-13, epsrel=1e-11)[0]
        return a + b

    m1 = outer(1)
    m2 = outer(2)
    return m2 - m1**2, m1


def decon_unbiasedness(t=0.5, s=0.3, xs=(-1.0, 0.0, 0.3, 0.49, 0.7)):
    """E psi(x + eps) for a few x; should be the indicator."""
    out = []
    for x in xs:
        f = lambda e_: gamma_decon_psi(np.array([x + e_]), t, s)[0] * stats.gamma.pdf(e_, s)
        out.append(integrate.quad(f, 0, max(t - x, 0.0) + 1e-300, limit=400)[0] if x < t else 0.0)
    return out


if __name__ == "__main__":
    print("GAMMA_LEVY_SIGMA =", repr(gamma_levy_sigma()))
    for k, v in cp_constants().items():
        print(f"CP_{k.upper()} =", repr(float(v)))
    var, m1 = decon_sigma()
    print("DECON_GAMMA_SIGMA =", repr(var), "# mean", m1, "Phi(0.5) =", stats.norm.cdf(0.5))
    print("decon unbiasedness", decon_unbiasedness())
