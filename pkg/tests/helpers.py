"""Independent oracles shared by several test modules."""
from fractions import Fraction

import numpy as np


def exact_moment_gram(a, b, weight_coeffs, N):
    """Monomial Gram matrix of a polynomial weight from exact rational moments."""
    a, b = Fraction(a), Fraction(b)
    w = [Fraction(c) for c in weight_coeffs]
    G = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        for j in range(N + 1):
            total = Fraction(0)
            for k, c in enumerate(w):
                p = i + j + k
                total += c * (b ** (p + 1) - a ** (p + 1)) / (p + 1)
            G[i, j] = float(total)
    return G


def brute_force_l2(f, g, a, b, n=20000):
    """Midpoint-rule inner product, used only as a sanity oracle."""
    x = a + (b - a) * (np.arange(n) + 0.5) / n
    return np.sum(f(x) * np.conj(g(x))) * (b - a) / n


def random_hpd(rng, n, cond=10.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, _ = np.linalg.qr(A)
    vals = np.geomspace(1.0, cond, n)
    return (Q * vals) @ Q.conj().T


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    B = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return B @ B.conj().T


def random_unitary(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    return Q * (np.diag(R) / np.abs(np.diag(R)))
