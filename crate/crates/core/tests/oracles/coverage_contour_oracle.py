"""Independent oracle for the conditional coverage sum.

Coverage given a = pi*lambda*D^2 equals sum_{n < kN} c_n(a), where c_n are the
Taylor coefficients in z of exp(-a * J(z)) and

    J(z) = eps^{2/eta} * int_{eps^{-2/eta}}^inf 1 - (1 + (1 - z) v^{-eta/2})^{-N} dv.

The coefficients are extracted with a trapezoidal Cauchy integral on |z| = r0,
which shares no code path with the derivative recurrence in the crate.
"""
import sys
import numpy as np
from scipy import integrate, special

def J(z, eps, eta, N):
    lo = eps ** (-2.0 / eta)
    def f(v, part):
        w = (1 - z) * v ** (-eta / 2.0)
        val = 1 - (1 + w) ** (-N)
        return val.real if part == 0 else val.imag
    re = integrate.quad(f, lo, np.inf, args=(0,), epsabs=1e-14, epsrel=1e-13, limit=500)[0]
    im = integrate.quad(f, lo, np.inf, args=(1,), epsabs=1e-14, epsrel=1e-13, limit=500)[0]
    return eps ** (2.0 / eta) * (re + 1j * im)

def coverage_given_a(a, Jvals, r0, terms):
    M = len(Jvals)
    vals = np.exp(-a * Jvals)
    coeffs = np.fft.fft(vals) / M
    c = [(coeffs[n] / r0 ** n).real for n in range(terms)]
    return sum(c)

def table(eps, eta, N, r0=0.5, M=256):
    zs = r0 * np.exp(2j * np.pi * np.arange(M) / M)
    return np.array([J(z, eps, eta, N) for z in zs])

def coverage_prob(eps, eta, n_t, n_r, k, m):
    N = n_t * n_r
    Jv = table(eps, eta, N)
    f = lambda t: t ** (m - 1) * np.exp(-t) / special.gamma(m) * coverage_given_a(t, Jv, 0.5, k * N)
    return integrate.quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500)[0]

if __name__ == "__main__":
    eta = 4.0
    Jv = table(1.0, eta, 8)
    print("k0 defaults", J(0, 1.0, eta, 8).real)
    # D = 50 m with lambda = 1/(pi 50^2) gives a = 1
    for k in (1, 2, 3):
        print("given a=1 k=%d" % k, repr(coverage_given_a(1.0, Jv, 0.5, k * 8)))
    for eps_db in (-5.0, -1.0, 0.0, 5.0):
        eps = 10 ** (eps_db / 10)
        for k in (1, 3):
            m = max(1, k - 1)
            print("P_c eps_db=%g k=%d" % (eps_db, k), repr(coverage_prob(eps, eta, 4, 2, k, m)))
    print("siso k=1", repr(coverage_prob(1.0, 4.0, 1, 1, 1, 1)), 1 / (1 + np.pi / 4))
