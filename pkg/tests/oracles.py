"""Independent reference computations used by the tests.

None of these call into the package's recursions; they enumerate, iterate
or integrate directly from the model definition.
"""

import itertools
import math

import numpy as np


def enumerate_trees(schedule, J):
    """All state configurations to depth ``J`` with their probabilities.

    Returns ``(bits, prob)``: ``bits[c]`` is the heap-ordered state vector
    of configuration ``c`` (root first, then level 1, ...).
    """
    n = (1 << (J + 1)) - 1
    bits = ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)
    pi = schedule.initial_law
    prob = np.where(bits[:, 0] == 1, pi, 1.0 - pi)
    for j in range(J):
        for k in range(1 << j):
            parent = (1 << j) - 1 + k
            c0 = (1 << (j + 1)) - 1 + 2 * k
            table = np.array([[schedule.kernel_at(j, s).as_tuple()] for s in (0, 1)])[:, 0, :]
            outcome = 2 * bits[:, c0] + bits[:, c0 + 1]
            prob = prob * table[bits[:, parent], outcome]
    return bits, prob


def brute_phi0(schedule, J):
    bits, prob = enumerate_trees(schedule, J)
    lo = (1 << J) - 1
    empty = bits[:, lo:lo + (1 << J)].sum(axis=1) == 0
    return math.fsum(prob[empty])


def brute_phi_gf(schedule, J, z):
    bits, prob = enumerate_trees(schedule, J)
    lo = (1 << J) - 1
    cnt = bits[:, lo:lo + (1 << J)].sum(axis=1)
    return math.fsum(prob * z ** cnt)


def gw_iterate(p, J, s=0.0):
    """``g^J(s)`` for the offspring law Binomial(2, p): ``g(s) = ((1 - p) + p s)^2``."""
    for _ in range(J):
        s = ((1.0 - p) + p * s) ** 2
    return s


def gw_fixed_point(p, iters=200000, tol=1e-15):
    s = 0.0
    for _ in range(iters):
        t = ((1.0 - p) + p * s) ** 2
        if abs(t - s) < tol:
            return t
        s = t
    return s


def truncated_sum(term, start=0, stop=4000):
    return math.fsum(term(n) for n in range(start, stop))


def cesaro_theta(gammas):
    """``(log2 gamma_0 + ... + log2 gamma_j) / j`` for ``j >= 1`` (entry 0 is nan)."""
    lg = np.log2(np.asarray(gammas, dtype=float))
    out = np.cumsum(lg)
    out[0] = np.nan
    out[1:] /= np.arange(1, lg.size)
    return out


def meyer_psi(t, n_freq=1 << 14):
    """``psi(t)`` by trapezoid integration of the inverse Fourier transform over the band."""
    from treewave.synth import MeyerWavelet

    w = MeyerWavelet()
    xi = np.linspace(2 * np.pi / 3, 8 * np.pi / 3, n_freq)
    h = w.hat(xi)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    # psi is real: psi(t) = (1/pi) Re int_0^inf psi^(xi) e^{i xi t} dxi
    integrand = (h[None, :] * np.exp(1j * xi[None, :] * t[:, None])).real
    return np.trapezoid(integrand, xi, axis=1) / np.pi


def periodized(j, k, x, terms=32):
    """``Psi_{j,k}(x) = sum_m psi(2^j (x + m) - k)`` by direct summation."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for m in range(-terms, terms + 1):
        out += meyer_psi(2.0 ** j * (x + m) - k)
    return out


def all_pairs():
    return list(itertools.product((0, 1), repeat=2))
