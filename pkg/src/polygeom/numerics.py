"""Dense complex linear algebra used by every other module.

All matrices are ``numpy.ndarray`` of dtype ``complex128``.  Tolerances live in
a :class:`Tolerances` record that can be overridden for a block of code with
:func:`override_tolerances`.
"""
from __future__ import annotations

import contextlib
import contextvars
import dataclasses
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.linalg import lapack


class PolyGeomError(Exception):
    """Base class for all errors raised by this package."""


class SpecError(PolyGeomError, ValueError):
    """Invalid user input (bad geometry description, bad grid, ...)."""


class NumericalError(PolyGeomError, ArithmeticError):
    """A numerical precondition failed on otherwise valid input."""


class NonFiniteInput(SpecError):
    pass


class DimensionMismatch(SpecError):
    pass


class NonHermitianInput(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    def __init__(self, message: str, minor: int | None = None):
        super().__init__(message)
        self.minor = minor


class SingularInput(NumericalError):
    pass


@dataclasses.dataclass(frozen=True)
class Tolerances:
    hermit_tol: float = 1e-10
    eig_tol: float = 1e-10
    singular_tol: float = 1e-12
    pd_tol: float = 1e-15
    w_min_tol: float = 1e-10
    band_tol: float = 1e-9
    pad_tol: float = 1e-9
    pad_cap: int = 256
    quad_tol: float = 1e-12

    def replace(self, **changes) -> "Tolerances":
        unknown = set(changes) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise SpecError(f"unknown tolerance name(s): {sorted(unknown)}")
        return dataclasses.replace(self, **changes)


_TOLERANCES: contextvars.ContextVar[Tolerances] = contextvars.ContextVar(
    "polygeom_tolerances", default=Tolerances()
)


def get_tolerances() -> Tolerances:
    return _TOLERANCES.get()


@contextlib.contextmanager
def override_tolerances(**changes):
    """Temporarily replace some tolerances, e.g. ``override_tolerances(pad_tol=1e-8)``."""
    token = _TOLERANCES.set(_TOLERANCES.get().replace(**changes))
    try:
        yield _TOLERANCES.get()
    finally:
        _TOLERANCES.reset(token)


class EigenResult(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(A, *, square: bool = False) -> np.ndarray:
    """Return ``A`` as a finite 2-D complex array (copying only when needed)."""
    M = np.asarray(A, dtype=np.complex128)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got array of shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteInput("matrix has NaN or Inf entries")
    if square and M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    return M


def operator_norm(A) -> float:
    """Spectral norm (largest singular value)."""
    M = as_matrix(A)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def hermitian_part(H, *, tol: float | None = None) -> np.ndarray:
    """Check ``H`` is Hermitian to ``hermit_tol * ||H||`` and return ``(H + H*)/2``."""
    M = as_matrix(H, square=True)
    tol = get_tolerances().hermit_tol if tol is None else tol
    scale = operator_norm(M)
    defect = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    if defect > tol * max(scale, np.finfo(float).tiny):
        raise NonHermitianInput(
            f"max |H - H*| = {defect:.3e} exceeds {tol:.1e} * ||H|| = {tol * scale:.3e}"
        )
    return 0.5 * (M + M.conj().T)


def hermitian_eigh(H) -> EigenResult:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    M = hermitian_part(H)
    if M.shape[0] == 0:
        return EigenResult(np.zeros(0), np.zeros((0, 0), dtype=np.complex128))
    try:
        vals, vecs = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    scale = operator_norm(M)
    resid = np.linalg.norm(M @ vecs - vecs * vals, axis=0)
    if resid.size and resid.max() > get_tolerances().eig_tol * max(scale, 1.0):
        raise ConvergenceFailure(f"eigen residual {resid.max():.3e} too large")
    return EigenResult(vals, vecs)


def cholesky_hpd(G) -> np.ndarray:
    """Lower-triangular ``L`` with positive diagonal such that ``L L* = G``.

    Raises :class:`NotPositiveDefinite` carrying the (1-based) index of the first
    leading minor that fails.
    """
    M = hermitian_part(G)
    n = M.shape[0]
    if n == 0:
        return M.copy()
    L, info = lapack.zpotrf(M, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(
            f"leading minor {info} of a {n}x{n} matrix is not positive definite", minor=int(info)
        )
    if info < 0:
        raise ConvergenceFailure(f"zpotrf argument error {info}")
    return np.tril(L)


def solve_hpd(G, B) -> np.ndarray:
    """Solve ``G X = B`` for Hermitian positive definite ``G``."""
    L = cholesky_hpd(G)
    rhs = as_matrix(B)
    if rhs.shape[0] != L.shape[0]:
        raise DimensionMismatch(f"G is {L.shape}, B has {rhs.shape[0]} rows")
    return scipy.linalg.cho_solve((L, True), rhs)


def polar_unitary(W) -> np.ndarray:
    """Unitary factor ``W (W* W)^{-1/2}`` of the polar decomposition."""
    M = as_matrix(W, square=True)
    if M.shape[0] == 0:
        return M.copy()
    U, s, Vh = np.linalg.svd(M)
    if s[-1] <= get_tolerances().singular_tol * s[0]:
        raise SingularInput(
            f"smallest singular value {s[-1]:.3e} is negligible relative to {s[0]:.3e}"
        )
    return U @ Vh


def inverse_upper(L: np.ndarray) -> np.ndarray:
    """``(L*)^{-1}`` for lower-triangular ``L``; upper triangular."""
    n = L.shape[0]
    return scipy.linalg.solve_triangular(L.conj().T, np.eye(n, dtype=np.complex128), lower=False)
