"""Truncated resolvents, the resolvent distance and stability certificates.

Resolvents live in each geometry's own orthonormal coordinates with the
degree-graded ordering, so the degree-``N`` subspace is always the leading
``dim(N)`` block and ``P_N`` is a coordinate truncation.  Two geometries on the
same domain are compared by identifying their Gram-Schmidt bases
``p_k^(1) <-> p_k^(2)``.

Projectors, bases and kernels are compared in flat canonical coordinates
(``L^2(dtheta/2pi)`` Fourier modes on the circle, ``L^2(dx)``-orthonormal
Legendre polynomials on intervals).
"""
from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .geometry import GeometrySpec, gram_matrix
from .laplacian import LaplacianMatrix, laplacian
from .numerics import (
    DimensionMismatch,
    NumericalError,
    SpecError,
    as_matrix,
    get_tolerances,
    hermitian_eigh,
    hermitian_part,
    operator_norm,
    polar_unitary,
    solve_hpd,
)
from .ortho import OrthonormalBasis, default_grid, orthonormalize, projector, reproducing_kernel


class IncompatibleGeometries(SpecError):
    pass


class PaddingNotConverged(NumericalError):
    """Raised only on request; by default the flag is carried in the result."""


@dataclasses.dataclass(frozen=True, eq=False)
class ResolventPair:
    """``compressed = P_N (1 + Delta)^{-1} P_N`` at padding ``M`` and
    ``truncop = (1 + P_N Delta P_N)^{-1}``.

    ``pad_change`` is ``||compressed(M) - compressed(2M)||`` when it was measured.
    """

    compressed: np.ndarray
    truncop: np.ndarray
    N: int
    M: int
    converged: bool
    pad_change: float | None = None
    full: np.ndarray | None = None


def default_padding(N: int) -> int:
    return max(4 * N, N + 16)


def _block_dim(lap, N: int) -> int:
    if isinstance(lap, LaplacianMatrix):
        return lap.spec.dim(N)
    return N + 1


def _resolvent(delta: np.ndarray) -> np.ndarray:
    n = delta.shape[0]
    return hermitian_part(solve_hpd(np.eye(n) + delta, np.eye(n, dtype=np.complex128)), tol=1e-8)


def truncated_resolvents(lap_M, N: int, lap_2M=None) -> ResolventPair:
    """Both finite-degree truncations of the resolvent.

    ``lap_M`` is a :class:`LaplacianMatrix` in graded order (or a bare Hermitian
    PSD matrix whose first ``N + 1`` coordinates span degree ``<= N``).  If
    ``lap_2M`` is given, the compressed resolvent is recomputed from it and the
    convergence flag reflects ``pad_tol``.
    """
    delta = hermitian_part(getattr(lap_M, "entries", lap_M))
    n = _block_dim(lap_M, N)
    if n > delta.shape[0]:
        raise SpecError(f"N={N} needs {n} coordinates, Laplacian has {delta.shape[0]}")
    full = _resolvent(delta)
    compressed = full[:n, :n]
    truncop = _resolvent(delta[:n, :n])
    M = getattr(lap_M, "N", delta.shape[0] - 1)
    converged, change = True, None
    if lap_2M is not None:
        other = _resolvent(hermitian_part(getattr(lap_2M, "entries", lap_2M)))[:n, :n]
        change = operator_norm(compressed - other)
        converged = change < get_tolerances().pad_tol
    return ResolventPair(compressed, truncop, N, M, converged, change, full)


def padded_resolvents(
    spec: GeometrySpec, N: int, M: int | None = None, strict: bool = False
) -> ResolventPair:
    """Resolvents of ``spec`` at degree ``N`` under the padding policy.

    Without ``M`` the padding starts at ``max(4N, N + 16)`` and doubles until the
    compressed resolvent moves by less than ``pad_tol`` (capped at ``pad_cap``);
    the larger padding is returned.  An explicit ``M`` is checked once against
    ``2M`` and returned as is, flagged if it has not settled.  With ``strict``
    an unsettled padding raises :class:`PaddingNotConverged` instead.
    """
    pair = _padded(spec, N, M)
    if strict and not pair.converged:
        raise PaddingNotConverged(
            f"PaddingNotConverged: compressed resolvent moved by {pair.pad_change:.3e} at M={pair.M}"
        )
    return pair


def _padded(spec: GeometrySpec, N: int, M: int | None) -> ResolventPair:
    tol = get_tolerances()
    if N < 0:
        raise SpecError("N must be >= 0")
    if M is not None:
        if M < N:
            raise SpecError(f"padding M={M} is below N={N}")
        return truncated_resolvents(laplacian(spec, M), N, laplacian(spec, 2 * M))
    M = max(default_padding(N), N)
    lap = laplacian(spec, M)
    while True:
        bigger = laplacian(spec, 2 * M)
        pair = truncated_resolvents(lap, N, bigger)
        nxt = truncated_resolvents(bigger, N)
        if pair.converged or 2 * M >= tol.pad_cap:
            return dataclasses.replace(nxt, converged=pair.converged, pad_change=pair.pad_change)
        M, lap = 2 * M, bigger


def check_compatible(g1: GeometrySpec, g2: GeometrySpec) -> None:
    if g1.domain != g2.domain:
        raise IncompatibleGeometries(
            f"IncompatibleGeometries: canonical bases differ ({g1.domain} vs {g2.domain})"
        )


@dataclasses.dataclass(frozen=True, eq=False)
class ResolventComparison:
    d_compressed: float
    d_truncop: float
    d_full: float
    pair1: ResolventPair
    pair2: ResolventPair

    @property
    def converged(self) -> bool:
        return self.pair1.converged and self.pair2.converged


def compare_resolvents(g1: GeometrySpec, g2: GeometrySpec, N: int, M: int | None = None) -> ResolventComparison:
    check_compatible(g1, g2)
    r1 = padded_resolvents(g1, N, M)
    r2 = padded_resolvents(g2, N, M)
    if r1.M != r2.M:
        # adaptive padding may stop at different sizes; recompute both at the larger one
        big = max(r1.M, r2.M)
        r1 = _at(g1, N, big, r1)
        r2 = _at(g2, N, big, r2)
    return ResolventComparison(
        operator_norm(r1.compressed - r2.compressed),
        operator_norm(r1.truncop - r2.truncop),
        operator_norm(r1.full - r2.full),
        r1,
        r2,
    )


def _at(spec, N, M, pair):
    if pair.M == M:
        return pair
    res = truncated_resolvents(laplacian(spec, M), N)
    return dataclasses.replace(res, converged=pair.converged, pad_change=pair.pad_change)


def resolvent_distance(
    g1: GeometrySpec, g2: GeometrySpec, N: int, M: int | None = None, semantics: str = "compressed"
) -> float:
    """``||R_1^(N) - R_2^(N)||`` with ``semantics`` ``"compressed"`` or ``"truncop"``."""
    if semantics not in ("compressed", "truncop"):
        raise SpecError(f"unknown truncation semantics {semantics!r}")
    cmp = compare_resolvents(g1, g2, N, M)
    return cmp.d_compressed if semantics == "compressed" else cmp.d_truncop


def weyl_gap(R1, R2) -> float:
    """``max_j |lambda_j(R1) - lambda_j(R2)|`` over ascending eigenvalues."""
    A, B = as_matrix(R1, square=True), as_matrix(R2, square=True)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes {A.shape} and {B.shape} differ")
    if A.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(hermitian_eigh(A).eigenvalues - hermitian_eigh(B).eigenvalues)))


def _subspace(spec: GeometrySpec, N: int, analytic: bool):
    if analytic:
        if not spec.is_circle:
            raise SpecError("analytic subspaces exist only on the circle")
        return tuple(range(N + 1))
    return None


def projector_stability(
    g1: GeometrySpec, g2: GeometrySpec, N: int, M: int | None = None, analytic: bool = False
) -> float:
    """``||P_N^(1) - P_N^(2)||`` in flat coordinates, both projectors inside degree ``<= M``."""
    check_compatible(g1, g2)
    M = default_padding(N) if M is None else M
    if N > M:
        raise SpecError("need N <= M")
    labels = _subspace(g1, N, analytic)
    P1 = projector(gram_matrix(g1, M, g1.working_family), N, labels)
    P2 = projector(gram_matrix(g2, M, g2.working_family), N, labels)
    return operator_norm(P1 - P2)


def degree_basis(spec: GeometrySpec, N: int, analytic: bool = False) -> OrthonormalBasis:
    """Gram-Schmidt basis of degree ``<= N`` in the working family (OPUC if ``analytic``)."""
    G = gram_matrix(spec, N, spec.working_family, "graded")
    if analytic:
        G = G.analytic_section(N)
    return orthonormalize(G)


@dataclasses.dataclass(frozen=True, eq=False)
class Alignment:
    U: np.ndarray
    residual: float
    residual_g1: float
    residual_g2: float
    residual_flat: float


def _norms(R: np.ndarray, G: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(np.einsum("ik,ij,jk->k", R.conj(), G, R).real, 0.0))


def basis_alignment(b1: OrthonormalBasis, b2: OrthonormalBasis, metric=None) -> Alignment:
    """Gauge unitary ``U`` from the polar factor of ``W[k, j] = <p_k^(1), p_j^(2)>``.

    Residuals are ``max_k ||p_k^(1) - sum_j U[k, j] p_j^(2)||`` in the supplied
    metric (default: geometry 2), in each geometry's norm, and in flat coordinates.
    """
    if b1.labels != b2.labels or b1.basis.family != b2.basis.family:
        raise IncompatibleGeometries("IncompatibleGeometries: bases use different canonical elements")
    G1, G2 = b1.gram.entries, b2.gram.entries
    G = G2 if metric is None else getattr(metric, "entries", metric)
    W = (b2.C.conj().T @ G @ b1.C).T
    U = polar_unitary(W)
    R = b1.C - b2.C @ U.T
    return Alignment(
        U,
        float(_norms(R, G).max(initial=0.0)),
        float(_norms(R, G1).max(initial=0.0)),
        float(_norms(R, G2).max(initial=0.0)),
        float(np.linalg.norm(R, axis=0).max(initial=0.0)),
    )


def kernel_distance(b1: OrthonormalBasis, b2: OrthonormalBasis, grid=None) -> float:
    """``max |K^(1)(x, y) - K^(2)(x, y)|`` over grid pairs."""
    if b1.spec.domain != b2.spec.domain:
        raise IncompatibleGeometries("IncompatibleGeometries: kernels live on different domains")
    grid = default_grid(b1.spec) if grid is None else grid
    K1 = reproducing_kernel(b1, grid).values
    K2 = reproducing_kernel(b2, grid).values
    return float(np.abs(K1 - K2).max(initial=0.0))


@dataclasses.dataclass(frozen=True)
class Verdict:
    name: str
    lhs: float
    rhs: float
    tolerance: float
    passed: bool | None

    @property
    def label(self) -> str:
        return {True: "pass", False: "fail", None: "withheld"}[self.passed]


@dataclasses.dataclass(frozen=True, eq=False)
class StabilityCertificate:
    N: int
    M: int
    d_res: float
    d_res_truncop: float
    d_res_full: float
    weyl_gap: float
    projector_diff: float
    gauge_unitary: np.ndarray
    basis_residual_g1: float
    basis_residual_g2: float
    basis_residual_flat: float
    kernel_sup_diff: float
    bound_constant: float | None
    metric_factors: dict
    padding_converged: bool
    pad_change: float
    verdicts: tuple

    @property
    def passed(self) -> bool:
        return self.padding_converged and all(v.passed for v in self.verdicts)

    def records(self) -> list[dict]:
        return [
            {"name": v.name, "lhs": v.lhs, "rhs": v.rhs, "verdict": v.label, "tolerance": v.tolerance}
            for v in self.verdicts
        ]

    def summary(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "d_res_compressed": self.d_res,
            "d_res_truncop": self.d_res_truncop,
            "d_res_full": self.d_res_full,
            "weyl_gap": self.weyl_gap,
            "projector_diff": self.projector_diff,
            "basis_residual_g1": self.basis_residual_g1,
            "basis_residual_g2": self.basis_residual_g2,
            "basis_residual_flat": self.basis_residual_flat,
            "kernel_sup_diff": self.kernel_sup_diff,
            "bound_constant": self.bound_constant,
            "metric_factors": self.metric_factors,
            "padding_converged": self.padding_converged,
            "pad_change": self.pad_change,
        }


def circle_lambda_pair(g1: GeometrySpec, g2: GeometrySpec):
    """``(w, |lambda_1 - lambda_2|)`` if both are circle geometries with the same weight."""
    if not (g1.is_circle and g2.is_circle):
        return None
    f1, f2 = g1.weight.fourier, g2.weight.fourier
    keys = set(f1) | set(f2)
    if any(f1.get(k, 0j) != f2.get(k, 0j) for k in keys):
        return None
    return g1.weight, abs(g1.lam - g2.lam)


def _metric_factors(spec: GeometrySpec, M: int) -> dict:
    """``sqrt`` of extreme Gram eigenvalues: flat-to-geometry norm distortion at padding ``M``."""
    vals = np.linalg.eigvalsh(gram_matrix(spec, M, spec.working_family).entries)
    out = {"lower": math.sqrt(max(vals[0], 0.0)), "upper": math.sqrt(vals[-1])}
    if spec.is_circle:
        wm, wp = spec.weight.bounds
        out.update(w_minus_sqrt=math.sqrt(wm), w_plus_sqrt=math.sqrt(wp))
    return out


def stability_certificate(
    g1: GeometrySpec,
    g2: GeometrySpec,
    N: int,
    M: int | None = None,
    grid: Sequence[float] | None = None,
    analytic: bool = False,
) -> StabilityCertificate:
    """Every comparison quantity between ``g1`` and ``g2`` at degree ``N``, with verdicts.

    Verdicts are withheld (``passed=None``) when the padding has not settled.
    """
    from .circle import cn_bound

    cmp = compare_resolvents(g1, g2, N, M)
    r1, r2 = cmp.pair1, cmp.pair2
    Mp = r1.M
    gap = weyl_gap(r1.compressed, r2.compressed)
    proj = projector_stability(g1, g2, N, Mp, analytic)
    b1, b2 = degree_basis(g1, N, analytic), degree_basis(g2, N, analytic)
    align = basis_alignment(b1, b2)
    kern = kernel_distance(b1, b2, grid)
    converged = cmp.converged
    changes = [c for c in (r1.pad_change, r2.pad_change) if c is not None]
    pad_change = max(changes) if changes else 0.0

    slack = 1e-10
    checks = [
        ("weyl_gap<=d_res", gap, cmp.d_compressed),
        ("compressed<=full", cmp.d_compressed, cmp.d_full),
    ]
    bound = None
    lam_pair = circle_lambda_pair(g1, g2)
    if lam_pair is not None:
        bound = cn_bound(lam_pair[0], N) * lam_pair[1]
        checks.append(("truncop<=C_N(w)*lambda", cmp.d_truncop, bound))
    verdicts = tuple(
        Verdict(name, lhs, rhs, slack, (lhs <= rhs + slack) if converged else None)
        for name, lhs, rhs in checks
    )
    return StabilityCertificate(
        N=N,
        M=Mp,
        d_res=cmp.d_compressed,
        d_res_truncop=cmp.d_truncop,
        d_res_full=cmp.d_full,
        weyl_gap=gap,
        projector_diff=proj,
        gauge_unitary=align.U,
        basis_residual_g1=align.residual_g1,
        basis_residual_g2=align.residual_g2,
        basis_residual_flat=align.residual_flat,
        kernel_sup_diff=kern,
        bound_constant=bound,
        metric_factors={"g1": _metric_factors(g1, N), "g2": _metric_factors(g2, N)},
        padding_converged=converged,
        pad_change=pad_change,
        verdicts=verdicts,
    )
