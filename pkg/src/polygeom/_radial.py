"""Mode-by-mode reduction of rotation-invariant Sobolev forms on a thin annulus.

A mode-``m`` function on ``{1-eps < r^2 < 1+eps}`` is written
``F = r^|m| q(u) e^{i m theta}`` with ``t = r^2 = 1 + eps*u`` and ``u`` in [-1, 1].
Derivatives are rescaled to the thin direction (``(eps/2) d/dr``), which turns
the 2-D energies into one-dimensional forms in ``u``:

* order 0:        ``|F|^2``
* order 2j:       ``|L^j F|^2`` with ``L = (eps^2/4) * Laplacian``
* order 2j+1:     ``|(eps/2) grad L^j F|^2``

Radial profiles are kept exactly as finite sums ``sum_p c_p(u) t^p`` where the
``c_p`` are numpy polynomial series and ``p`` runs over half-integers.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np


class RadialExpr:
    __slots__ = ("eps", "terms")

    def __init__(self, eps: float, terms: dict):
        self.eps = eps
        self.terms = {p: c for p, c in terms.items()}

    def _combine(self, other_terms, out=None):
        out = dict(self.terms) if out is None else out
        for p, c in other_terms.items():
            out[p] = out[p] + c if p in out else c
        return out

    def __add__(self, other: "RadialExpr") -> "RadialExpr":
        return RadialExpr(self.eps, self._combine(other.terms))

    def scale(self, a: float) -> "RadialExpr":
        return RadialExpr(self.eps, {p: c * a for p, c in self.terms.items()})

    def tpow(self, q) -> "RadialExpr":
        q = Fraction(q)
        return RadialExpr(self.eps, {p + q: c for p, c in self.terms.items()})

    def du(self) -> "RadialExpr":
        out: dict = {}
        for p, c in self.terms.items():
            dc = c.deriv()
            out[p] = out[p] + dc if p in out else dc
            if p != 0:
                extra = c * (float(p) * self.eps)
                out[p - 1] = out[p - 1] + extra if p - 1 in out else extra
        return RadialExpr(self.eps, out)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        t = 1.0 + self.eps * u
        total = np.zeros_like(u, dtype=float)
        for p, c in self.terms.items():
            total += c(u) * t ** float(p)
        return total


def _laplace(h: RadialExpr, m: int) -> RadialExpr:
    eps = h.eps
    huu = h.du().du().tpow(1)
    return huu + h.du().scale(eps) + h.tpow(-1).scale(-(eps**2) * m * m / 4.0)


def component_values(eps: float, m: int, s: int, series: list, u: np.ndarray) -> list:
    """Values of every energy component at nodes ``u``.

    Returns a list of ``(len(u), len(series))`` complex arrays; the Gram matrix
    of the order-``s`` form is ``(eps/2) * sum_c V_c^H diag(qw) V_c``.
    """
    alpha = Fraction(abs(m), 2)
    exprs = [RadialExpr(eps, {alpha: q}) for q in series]
    comps = []
    for k in range(s + 1):
        if k % 2 == 0:
            comps.append(np.column_stack([e(u) for e in exprs]).astype(np.complex128))
        else:
            radial = np.column_stack([e.du().tpow(Fraction(1, 2))(u) for e in exprs])
            angular = np.column_stack([e.tpow(Fraction(-1, 2))(u) for e in exprs])
            comps.append(radial.astype(np.complex128))
            comps.append((1j * m * eps / 2.0) * angular)
            exprs = [_laplace(e, m) for e in exprs]
    return comps
