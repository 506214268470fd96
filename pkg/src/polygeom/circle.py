"""The mixed Sobolev model on the unit circle.

The inner product is ``<f, g> = int f conj(g) w dtheta/2pi + lam int f' conj(g') dtheta/2pi``,
whose Gram matrix in Fourier modes is ``A = Toeplitz(w_hat) + lam * diag(n^2)``.
"""
from __future__ import annotations

import dataclasses
import io
import csv
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .geometry import GeometrySpec, WeightFunction, gram_matrix
from .laplacian import laplacian
from .numerics import SpecError, operator_norm, solve_hpd
from .ortho import OrthonormalBasis, fmt, orthonormalize
from .resolvent import (
    basis_alignment,
    compare_resolvents,
    degree_basis,
    kernel_distance,
    projector_stability,
)


def _weight(w) -> WeightFunction:
    if isinstance(w, WeightFunction):
        if not w.periodic:
            raise SpecError("need a trigonometric weight")
        return w
    return WeightFunction.trigonometric(w)


@dataclasses.dataclass(frozen=True, eq=False)
class CircleModel:
    weight: WeightFunction
    lam: float
    N: int

    @classmethod
    def build(cls, w_hat, lam: float, N: int) -> "CircleModel":
        if lam < 0:
            raise SpecError("lambda must be >= 0")
        model = cls(_weight(w_hat), float(lam), int(N))
        model.spec  # validates the weight
        return model

    @property
    def spec(self) -> GeometrySpec:
        return GeometrySpec.circle(self.weight, self.lam)

    @property
    def w_bounds(self) -> tuple[float, float]:
        return self.weight.bounds

    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def toeplitz(self) -> np.ndarray:
        """Gram matrix of the weighted (``lam = 0``) part, modes ``-N..N``."""
        return gram_matrix(GeometrySpec.circle(self.weight, 0.0), self.N).entries

    def a_matrix(self) -> np.ndarray:
        n = self.modes().astype(float)
        return self.toeplitz() + self.lam * np.diag(n**2)


def opuc_basis(w_hat, N: int) -> OrthonormalBasis:
    """Orthonormal polynomials on the unit circle: Gram-Schmidt of ``1, z, ..., z^N``."""
    return sobolev_opuc_basis(w_hat, 0.0, N)


def sobolev_opuc_basis(w_hat, lam: float, N: int) -> OrthonormalBasis:
    if lam < 0:
        raise SpecError("lambda must be >= 0")
    spec = GeometrySpec.circle(_weight(w_hat), lam)
    return orthonormalize(gram_matrix(spec, N).analytic_section(N))


def cn_bound(w_hat, N: int) -> float:
    """``N^4 (w_-^{-2} w_+ + w_-^{-1})`` with certified weight bounds."""
    wm, wp = _weight(w_hat).bounds
    return float(N) ** 4 * (wp / wm**2 + 1.0 / wm)


@dataclasses.dataclass(frozen=True)
class LambdaScanRow:
    lam: float
    d_res_compressed: float
    d_res_truncop: float
    cn_bound: float
    projector_diff: float
    basis_residual_g1: float
    basis_residual_g2: float
    kernel_sup_diff: float
    padding_converged: bool

    @property
    def bound(self) -> float:
        return self.cn_bound * self.lam

    @property
    def passed(self) -> bool:
        return self.d_res_truncop <= self.bound + 1e-10

    @property
    def verdict(self) -> str:
        if not self.padding_converged:
            return "withheld"
        return "pass" if self.passed else "fail"


@dataclasses.dataclass(frozen=True)
class LambdaScan:
    rows: tuple
    slope: float | None
    slope_truncop: float | None

    @property
    def passed(self) -> bool:
        return all(r.verdict == "pass" for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            [
                "lambda",
                "d_res_compressed",
                "d_res_truncop",
                "cn_bound",
                "projector_diff",
                "basis_residual_g1",
                "basis_residual_g2",
                "kernel_sup_diff",
                "verdict",
            ]
        )
        for r in self.rows:
            w.writerow(
                [
                    fmt(r.lam),
                    fmt(r.d_res_compressed),
                    fmt(r.d_res_truncop),
                    fmt(r.bound),
                    fmt(r.projector_diff),
                    fmt(r.basis_residual_g1),
                    fmt(r.basis_residual_g2),
                    fmt(r.kernel_sup_diff),
                    r.verdict,
                ]
            )
        return buf.getvalue()


def loglog_slope(x: Sequence[float], y: Sequence[float], floor: float = 1e-13) -> float | None:
    """Least-squares slope of ``log y`` against ``log x``.

    ``None`` if any ``y`` is at or below ``floor``: resolvent distances are
    differences of norm-one operators, so values that small are roundoff.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(y <= floor) or len(x) < 2:
        return None
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def lambda_scan(
    w_hat, N: int, lam_grid: Sequence[float], M: int | None = None, workers: int | None = None
) -> LambdaScan:
    """Compare each ``lam`` geometry against ``lam = 0``; rows sorted by ascending ``lam``.

    Bases and kernels are the analytic (OPUC) families; residuals use geometry 1
    (the ``lam`` geometry) and geometry 2 (``lam = 0``) norms.
    """
    lams = sorted(float(v) for v in lam_grid)
    if len(lams) < 4 or any(v <= 0 for v in lams) or lams[-1] / lams[0] < 100:
        raise SpecError("lambda grid needs >= 4 positive values spanning >= 2 decades")
    w = _weight(w_hat)
    ref = GeometrySpec.circle(w, 0.0)
    ref_basis = degree_basis(ref, N, analytic=True)
    bound = cn_bound(w, N)

    def row(lam: float) -> LambdaScanRow:
        g = GeometrySpec.circle(w, lam)
        cmp = compare_resolvents(g, ref, N, M)
        b = degree_basis(g, N, analytic=True)
        al = basis_alignment(b, ref_basis)
        return LambdaScanRow(
            lam,
            cmp.d_compressed,
            cmp.d_truncop,
            bound,
            projector_stability(g, ref, N, cmp.pair1.M, analytic=True),
            al.residual_g1,
            al.residual_g2,
            kernel_distance(b, ref_basis),
            cmp.converged,
        )

    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = tuple(pool.map(row, lams))
    return LambdaScan(
        rows,
        loglog_slope(lams, [r.d_res_compressed for r in rows]),
        loglog_slope(lams, [r.d_res_truncop for r in rows]),
    )


@dataclasses.dataclass(frozen=True)
class SimilarityReport:
    max_error: float
    hermitian_defect: float
    passed: bool


def delta_similarity_check(w_hat, lam: float, N: int, tol: float = 1e-10) -> SimilarityReport:
    """Compare the Hermitian Laplacian with ``A^{-1} D^* A D`` on modes ``-N..N``.

    With ``A = L L^*`` and ``C = (L^*)^{-1}`` the similarity form ``S`` satisfies
    ``C^{-1} S C = Delta``.
    """
    model = CircleModel.build(w_hat, lam, N)
    A = model.a_matrix()
    D = np.diag(1j * model.modes().astype(float))
    S = solve_hpd(A, D.conj().T @ A @ D)
    lap = laplacian(model.spec, N, order="natural")
    C = lap.basis.C
    congruent = np.linalg.solve(C, S @ C)
    err = operator_norm(congruent - lap.entries) / max(1.0, operator_norm(lap.entries))
    defect = operator_norm(congruent - congruent.conj().T) / max(1.0, operator_norm(congruent))
    return SimilarityReport(err, defect, err <= tol and defect <= tol)
