"""Gram-Schmidt along the degree filtration, projectors, kernels, Jacobi data."""
from __future__ import annotations

import csv
import dataclasses
import io
from typing import Sequence

import numpy as np

from .geometry import (
    DegenerateInnerProduct,
    GeometrySpec,
    GramMatrix,
    gram_for_basis,
    gram_matrix,
)
from .numerics import (
    NotPositiveDefinite,
    NumericalError,
    SpecError,
    as_matrix,
    cholesky_hpd,
    get_tolerances,
    inverse_upper,
    solve_hpd,
)


class NotTridiagonal(NumericalError):
    """Coordinate multiplication is not tridiagonal (not a measure geometry)."""


@dataclasses.dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Columns of ``C`` are the orthonormal polynomials in canonical coordinates."""

    C: np.ndarray
    gram: GramMatrix

    @property
    def spec(self) -> GeometrySpec:
        return self.gram.spec

    @property
    def basis(self):
        return self.gram.basis

    @property
    def labels(self) -> tuple:
        return self.gram.labels

    @property
    def N(self) -> int:
        return self.gram.N

    @property
    def dim(self) -> int:
        return self.C.shape[1]

    def rotated(self, V: np.ndarray) -> "OrthonormalBasis":
        """Basis ``p'_k = sum_j V[k, j] p_j`` (``V`` unitary); drops the triangular gauge."""
        V = as_matrix(V, square=True)
        return OrthonormalBasis(self.C @ V.T, self.gram)

    def values(self, x) -> np.ndarray:
        """``out[i, k] = p_k(x_i)``."""
        return self.basis.vander(np.atleast_1d(np.asarray(x, dtype=float))) @ self.C

    def to_csv(self) -> str:
        return matrix_csv(self.C.T, [f"c{lab}" for lab in self.labels], index_name="n")


def orthonormalize(G: GramMatrix) -> OrthonormalBasis:
    """Gram-Schmidt as ``C = (L^*)^{-1}`` with ``G = L L^*``.

    ``C`` is upper triangular with a positive diagonal, so ``p_n`` has a positive
    coefficient on the ``n``-th canonical element.
    """
    try:
        L = cholesky_hpd(G.entries)
    except NotPositiveDefinite as exc:
        raise DegenerateInnerProduct(f"DegenerateInnerProduct: {exc}", exc.minor) from exc
    return OrthonormalBasis(inverse_upper(L), G)


def projector(G_big: GramMatrix, N: int, subspace_labels: Sequence[int] | None = None) -> np.ndarray:
    """``<.,.>``-orthogonal projector onto low-degree canonical elements.

    ``P = X (X^* G X)^{-1} X^* G`` with ``X`` selecting the canonical elements
    of degree ``<= N`` (or the explicit ``subspace_labels``).
    """
    if N > G_big.N:
        raise SpecError(f"sub-cutoff N={N} exceeds the Gram cutoff {G_big.N}")
    labels = G_big.labels
    if subspace_labels is None:
        idx = [i for i, lab in enumerate(labels) if abs(lab) <= N]
    else:
        pos = {lab: i for i, lab in enumerate(labels)}
        idx = [pos[lab] for lab in subspace_labels]
    G = G_big.entries
    n = G.shape[0]
    X = np.zeros((n, len(idx)), dtype=np.complex128)
    X[idx, np.arange(len(idx))] = 1.0
    return X @ solve_hpd(X.conj().T @ G @ X, X.conj().T @ G)


@dataclasses.dataclass(frozen=True, eq=False)
class KernelGrid:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "re", "im"])
        for i, x in enumerate(self.xs):
            for j, y in enumerate(self.ys):
                v = self.values[i, j]
                w.writerow([fmt(x), fmt(y), fmt(v.real), fmt(v.imag)])
        return buf.getvalue()


def default_grid(spec: GeometrySpec, n: int = 64) -> np.ndarray:
    """64 uniform angles on the circle, 64 Chebyshev points on an interval."""
    if spec.is_circle:
        return 2 * np.pi * np.arange(n) / n
    a, b = spec.domain[1:]
    k = np.arange(n)
    return (a + b) / 2 + (b - a) / 2 * np.cos((2 * k + 1) * np.pi / (2 * n))


def reproducing_kernel(basis: OrthonormalBasis, xs=None, ys=None) -> KernelGrid:
    """``K(x, y) = sum_k p_k(x) conj(p_k(y))``."""
    xs = default_grid(basis.spec) if xs is None else np.atleast_1d(np.asarray(xs, dtype=float))
    ys = xs if ys is None else np.atleast_1d(np.asarray(ys, dtype=float))
    K = basis.values(xs) @ basis.values(ys).conj().T
    return KernelGrid(xs, ys, K)


def multiplication_matrix(spec: GeometrySpec, basis: OrthonormalBasis, N: int | None = None) -> np.ndarray:
    """``M[m, n] = <x p_n, p_m>`` (``z p_n`` on the circle) for ``n, m <= N``.

    ``x p_N`` has degree ``N + 1``; it is paired against ``p_m`` using the
    Gram matrix at cutoff ``N + 1``, which compresses it back onto degree ``<= N``.
    """
    N = basis.N if N is None else N
    C = basis.C
    cb = basis.basis
    if spec.is_circle:
        labels = list(cb.labels)
        up = tuple(sorted(set(labels) | {lab + 1 for lab in labels}))
        big = gram_for_basis(spec, dataclasses.replace(cb, labels=up))
        pos = {lab: i for i, lab in enumerate(up)}
        X = np.zeros((len(up), len(labels)), dtype=np.complex128)
        for j, lab in enumerate(labels):
            X[pos[lab + 1], j] = 1.0
        E = np.zeros_like(X)
        for j, lab in enumerate(labels):
            E[pos[lab], j] = 1.0
    else:
        big = gram_matrix(spec, cb.dim, cb.family)
        X = cb.multiplication()
        E = np.vstack([np.eye(cb.dim), np.zeros((1, cb.dim))]).astype(np.complex128)
    M = (E @ C).conj().T @ big.entries @ (X @ C)
    keep = [i for i, lab in enumerate(basis.labels) if abs(lab) <= N]
    return M[np.ix_(keep, keep)]


@dataclasses.dataclass(frozen=True)
class JacobiData:
    """``x p_n = a_{n+1} p_{n+1} + b_n p_n + a_n p_{n-1}``.

    ``a[k]`` holds ``a_{k+1}`` (the ``k``-th off-diagonal entry).
    """

    a: np.ndarray
    b: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.diag(self.b) + np.diag(self.a, 1) + np.diag(self.a, -1)


def jacobi_coefficients(mult: np.ndarray) -> JacobiData:
    M = as_matrix(mult, square=True)
    n = M.shape[0]
    scale = float(np.linalg.norm(M, 2)) if n else 0.0
    tol = get_tolerances().band_tol * scale
    i, j = np.indices(M.shape)
    outside = np.abs(M[np.abs(i - j) > 1])
    if outside.size and outside.max() > tol:
        raise NotTridiagonal(
            f"NotTridiagonal: entry of size {outside.max():.3e} outside the band (tol {tol:.1e})"
        )
    upper, lower = np.diag(M, 1), np.diag(M, -1)
    if np.max(np.abs(upper - lower.conj()), initial=0.0) > tol or np.max(
        np.abs(np.diag(M).imag), initial=0.0
    ) > tol:
        raise NotTridiagonal("NotTridiagonal: multiplication matrix is not symmetric")
    a = np.abs(0.5 * (upper + lower.conj()))
    return JacobiData(a, np.diag(M).real.copy())


def fmt(v: float) -> str:
    """17 significant digits; negative zero prints as ``0``."""
    return format(float(v) + 0.0, ".17g")


def matrix_csv(M: np.ndarray, columns: Sequence[str], index_name: str = "row") -> str:
    """CSV with one row per matrix row; complex entries split into ``re``/``im`` columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cplx = bool(np.any(np.asarray(M).imag != 0))
    head = [index_name]
    for c in columns:
        head += [f"{c}_re", f"{c}_im"] if cplx else [c]
    w.writerow(head)
    for r, row in enumerate(np.asarray(M)):
        out = [str(r)]
        for v in row:
            out += [fmt(v.real), fmt(v.imag)] if cplx else [fmt(v.real)]
        w.writerow(out)
    return buf.getvalue()

