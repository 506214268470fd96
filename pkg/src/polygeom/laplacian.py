"""The Laplacian ``D^* D`` in orthonormal coordinates, band structure, classical checks."""
from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np
import scipy.linalg

from .geometry import GeometrySpec, Kind, gram_matrix, quadrature_rule
from .numerics import SpecError, as_matrix, get_tolerances, hermitian_part, operator_norm
from .ortho import OrthonormalBasis, matrix_csv, orthonormalize


@dataclasses.dataclass(frozen=True, eq=False)
class LaplacianMatrix:
    """``entries[m, n] = <D p_n, D p_m>`` for the orthonormal basis ``basis``.

    ``factor`` is the matrix of ``D`` between orthonormal coordinates, so that
    ``entries = factor^* factor``.
    """

    entries: np.ndarray
    basis: OrthonormalBasis
    factor: np.ndarray

    @property
    def spec(self) -> GeometrySpec:
        return self.basis.spec

    @property
    def N(self) -> int:
        return self.basis.N

    @property
    def labels(self) -> tuple:
        return self.basis.labels

    def to_csv(self) -> str:
        return matrix_csv(self.entries, [f"p{k}" for k in range(self.entries.shape[1])], "m")


def assemble_laplacian(spec: GeometrySpec, basis: OrthonormalBasis, N: int | None = None) -> LaplacianMatrix:
    """Assemble ``C^* Dc^* G Dc C`` where ``Dc`` is ``D`` in canonical coordinates.

    Every supported derivation maps the geometry into itself, so the Gram matrix
    used for derivative images is the geometry's own.
    """
    if basis.spec is not spec and basis.spec.describe() != spec.describe():
        raise SpecError("basis was built from a different geometry")
    if N is not None and N != basis.N:
        raise SpecError(f"basis cutoff is {basis.N}, not {N}")
    C = basis.C
    Dc = basis.basis.derivative()
    G = basis.gram.entries
    DC = Dc @ C
    delta = DC.conj().T @ G @ DC
    # D p_n expanded in the p_k: C^{-1} Dc C, with C^{-1} = L^*
    B = scipy.linalg.solve_triangular(C, DC, lower=False)
    return LaplacianMatrix(hermitian_part(delta), basis, B)


def laplacian(spec: GeometrySpec, N: int, family: str | None = None, order: str = "graded") -> LaplacianMatrix:
    """Gram matrix, Gram-Schmidt and assembly in one call.

    The default family is the well-conditioned working basis (orthonormal
    Legendre on intervals) and circle modes are graded ``0, -1, 1, ...``.
    """
    family = family or spec.working_family
    basis = orthonormalize(gram_matrix(spec, N, family, order))
    return assemble_laplacian(spec, basis)


@dataclasses.dataclass(frozen=True)
class BandProfile:
    bandwidth: int
    decay: np.ndarray

    def to_csv(self) -> str:
        lines = ["distance,max_abs"]
        lines += [f"{k},{format(float(v), '.17g')}" for k, v in enumerate(self.decay)]
        return "\n".join(lines) + "\n"


def band_profile(M, tol: float | None = None) -> BandProfile:
    """Bandwidth (entries ``> tol * ||M||`` only within ``|m - n| <= r``) and decay."""
    A = as_matrix(M, square=True)
    n = A.shape[0]
    if n == 0:
        return BandProfile(0, np.zeros(0))
    tol = get_tolerances().band_tol if tol is None else tol
    thresh = tol * operator_norm(A)
    decay = np.array(
        [max(np.abs(np.diag(A, k)).max(), np.abs(np.diag(A, -k)).max()) for k in range(n)]
    )
    above = np.flatnonzero(decay > thresh)
    return BandProfile(int(above.max()) if above.size else 0, decay)


@dataclasses.dataclass(frozen=True)
class ClassicalOperatorSpec:
    """``sigma(x) p'' + tau(x) p'`` with ascending coefficient lists."""

    sigma: tuple
    tau: tuple

    def __post_init__(self):
        sigma = np.trim_zeros(np.asarray(self.sigma, dtype=float), "b")
        tau = np.trim_zeros(np.asarray(self.tau, dtype=float), "b")
        if len(sigma) > 3 or len(tau) > 2:
            raise SpecError("need deg sigma <= 2 and deg tau <= 1")
        object.__setattr__(self, "sigma", tuple(float(c) for c in self.sigma))
        object.__setattr__(self, "tau", tuple(float(c) for c in self.tau))


def classical_operator_matrix(cspec: ClassicalOperatorSpec, basis: OrthonormalBasis, N: int | None = None) -> np.ndarray:
    """``<sigma p_n'' + tau p_n', p_m>`` for an interval measure geometry, by quadrature."""
    spec = basis.spec
    if spec.kind is not Kind.INTERVAL_WEIGHTED:
        raise SpecError("classical operators need an interval_weighted geometry")
    N = basis.N if N is None else N
    x, w = quadrature_rule(spec, N + 1)
    V = basis.basis.vander(x)
    Dc = basis.basis.derivative()
    C = basis.C[:, : N + 1]
    P = V @ C
    P1 = V @ (Dc @ C)
    P2 = V @ (Dc @ Dc @ C)
    s = np.polynomial.polynomial.polyval(x, cspec.sigma) if cspec.sigma else 0 * x
    t = np.polynomial.polynomial.polyval(x, cspec.tau) if cspec.tau else 0 * x
    L = s[:, None] * P2 + t[:, None] * P1
    return P.conj().T @ (w[:, None] * L)


def off_diagonal_mass(M) -> float:
    """Frobenius norm of the off-diagonal part."""
    A = as_matrix(M, square=True)
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


@dataclasses.dataclass(frozen=True)
class BlockReport:
    max_cross: float
    tol: float
    passed: bool
    block_sizes: tuple


def mode_block_check(blocks: Sequence, cross_terms, tol: float = 1e-10) -> BlockReport:
    """Largest entry of ``cross_terms`` outside the diagonal blocks of the given sizes.

    ``blocks`` are the per-mode Laplacians (or just their sizes); ``cross_terms``
    is the full multi-mode matrix, blocks laid out in the same order.
    """
    sizes = tuple(b if isinstance(b, int) else np.asarray(getattr(b, "entries", b)).shape[0] for b in blocks)
    A = as_matrix(cross_terms, square=True)
    if sum(sizes) != A.shape[0]:
        raise SpecError(f"block sizes {sizes} do not tile a {A.shape[0]}x{A.shape[0]} matrix")
    mask = np.ones(A.shape, dtype=bool)
    start = 0
    for n in sizes:
        mask[start : start + n, start : start + n] = False
        start += n
    cross = float(np.abs(A[mask]).max()) if mask.any() else 0.0
    return BlockReport(cross, tol, cross <= tol, sizes)
