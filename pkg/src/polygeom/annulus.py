"""Thin annulus ``1 - eps < r^2 < 1 + eps``: angular-mode reduction and the eps -> 0 scan.

Mode ``m`` functions ``r^|m| q(u) e^{i m theta}`` (``t = r^2 = 1 + eps u``) carry a
one-dimensional geometry on ``u in [-1, 1]`` with derivation ``d/du``.  Its Gram
matrix is divided by the squared norm of the constant profile, which removes the
vanishing ``eps/2`` volume factor.  As ``eps -> 0`` the reduced form tends to
``sum_{k<=s} int |q^(k)|^2 du``, the limit geometry.
"""
from __future__ import annotations

import csv
import dataclasses
import io
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from . import _radial
from .geometry import CanonicalBasis, GeometrySpec, _composite, check_positive_definite
from .laplacian import BlockReport, laplacian, mode_block_check
from .numerics import SpecError, hermitian_part
from .ortho import fmt
from .resolvent import basis_alignment, compare_resolvents, degree_basis, projector_stability


def radial_mode_geometry(eps: float, m: int, s: int, N: int | None = None) -> GeometrySpec:
    """Reduced geometry of angular mode ``m`` for the order-``s`` Sobolev form.

    ``N`` is accepted for symmetry with the other constructors; the returned
    spec works at any cutoff.
    """
    return GeometrySpec.annulus_radial_mode(eps, m, s)


def limit_geometry(s: int, normalized: bool = True) -> GeometrySpec:
    """Order-``s`` Sobolev geometry on ``[-1, 1]`` with equal coefficients.

    With unit coefficients the constant profile has squared norm 2.  The
    normalized version divides by that, matching the normalization of the
    reduced mode geometries; the Laplacian is the same either way.
    """
    c = 0.5 if normalized else 1.0
    return GeometrySpec.interval_sobolev((-1.0, 1.0), (c,) * (s + 1))


@dataclasses.dataclass(frozen=True)
class AnnulusScanRow:
    epsilon: float
    mode: int
    d_res: float
    projector_diff: float
    basis_residual: float
    padding_converged: bool = True


def epsilon_scan(
    m: int, s: int, N: int, eps_grid: Sequence[float], M: int | None = None, workers: int | None = None
) -> list[AnnulusScanRow]:
    """Distance from the mode-``m`` geometry to the limit geometry at each ``eps``.

    Rows come back in decreasing ``eps`` whatever order the grid was given in.
    """
    eps = sorted((float(e) for e in eps_grid), reverse=True)
    if len(eps) < 4:
        raise SpecError("epsilon grid needs at least 4 values")
    if len(set(eps)) != len(eps):
        raise SpecError("epsilon grid values must be distinct")
    limit = limit_geometry(s)
    limit_basis = degree_basis(limit, N)

    def row(e: float) -> AnnulusScanRow:
        g = radial_mode_geometry(e, m, s)
        cmp = compare_resolvents(g, limit, N, M)
        al = basis_alignment(degree_basis(g, N), limit_basis)
        return AnnulusScanRow(
            e,
            m,
            cmp.d_compressed,
            projector_stability(g, limit, N, cmp.pair1.M),
            al.residual,
            cmp.converged,
        )

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(row, eps))


def scan_csv(rows: Sequence[AnnulusScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "mode", "d_res", "projector_diff", "basis_residual"])
    for r in rows:
        w.writerow([fmt(r.epsilon), r.mode, fmt(r.d_res), fmt(r.projector_diff), fmt(r.basis_residual)])
    return buf.getvalue()


def nonincreasing(values: Sequence[float], jitter: float = 0.1, floor: float = 1e-12) -> bool:
    """True if each value is at most ``(1 + jitter)`` times its predecessor.

    Values under ``floor`` count as zero so roundoff cannot fail the check.
    """
    v = [max(float(x), 0.0) for x in values]
    return all(b <= max(a * (1 + jitter), floor) for a, b in zip(v, v[1:]))


# ---------------------------------------------------------------------------
# several modes at once


@dataclasses.dataclass(frozen=True, eq=False)
class MultiModeData:
    modes: tuple
    N: int
    gram: np.ndarray
    laplacian: np.ndarray
    blocks: tuple
    basis: np.ndarray


def _angular_factor(modes: Sequence[int], angular_weight: Callable | None) -> np.ndarray:
    """``(1/2pi) int w(theta) e^{i (m - m') theta} dtheta`` on a uniform grid.

    ``angular_weight`` must be a trigonometric polynomial of degree below the
    grid size for the rule to be exact.
    """
    n = 8 * (max(abs(k) for k in modes) + 1) + 64
    theta = 2 * np.pi * np.arange(n) / n
    w = np.ones(n) if angular_weight is None else np.asarray(angular_weight(theta), dtype=float)
    E = np.exp(1j * np.outer(theta, modes))
    return (E.conj().T * w) @ E / n


def multi_mode_data(
    eps: float, modes: Sequence[int], s: int, N: int, angular_weight: Callable | None = None
) -> MultiModeData:
    """Gram matrix and Laplacian of several angular modes together.

    Each mode contributes the profiles ``q_0..q_N`` (orthonormal Legendre in
    ``u``).  Cross-mode entries are radial integrals times the angular factor;
    they vanish for rotation-invariant weights.  The same normalization as
    :func:`radial_mode_geometry` is applied blockwise (by the mode's own
    constant-profile norm) so that diagonal blocks match the single-mode Grams.
    """
    modes = tuple(int(k) for k in modes)
    if len(set(modes)) != len(modes):
        raise SpecError("modes must be distinct")
    basis = CanonicalBasis("legendre", tuple(range(N + 1)), (-1.0, 1.0))
    series = basis.series()
    u, qw = _composite(-1.0, 1.0, N + 2 * s + max(abs(k) for k in modes) + 16, 8)
    comps = {k: _radial.component_values(eps, k, s, series, u) for k in modes}
    ones = [np.polynomial.Polynomial([1.0])]
    norms = {}
    for k in modes:
        c1 = _radial.component_values(eps, k, s, ones, u)
        norms[k] = float(sum((eps / 2) * np.sum(qw * np.abs(V[:, 0]) ** 2) for V in c1))
    ang = _angular_factor(modes, angular_weight)
    n = N + 1
    K = len(modes)
    G = np.zeros((K * n, K * n), dtype=np.complex128)
    for a, ka in enumerate(modes):
        for b, kb in enumerate(modes):
            radial = sum(
                (eps / 2) * (Vb.conj().T @ (Va * qw[:, None]))
                for Va, Vb in zip(comps[ka], comps[kb])
            )
            scale = np.sqrt(norms[ka] * norms[kb])
            G[b * n : (b + 1) * n, a * n : (a + 1) * n] = radial * ang[b, a] / scale
    G = hermitian_part(G, tol=1e-8)
    check_positive_definite(G, "multi-mode Gram matrix")
    Dc = np.kron(np.eye(K), basis.derivative())
    L = np.linalg.cholesky(G)
    C = np.linalg.inv(L.conj().T)
    DC = Dc @ C
    lap = hermitian_part(DC.conj().T @ G @ DC, tol=1e-8)
    blocks = tuple(laplacian(radial_mode_geometry(eps, k, s), N, "legendre") for k in modes)
    return MultiModeData(modes, N, G, lap, blocks, C)


def block_check(
    eps: float, modes: Sequence[int], s: int, N: int, angular_weight: Callable | None = None
) -> tuple[BlockReport, BlockReport, float]:
    """Block reports for the multi-mode Gram and Laplacian, plus the largest
    difference between a diagonal Laplacian block and the single-mode Laplacian."""
    data = multi_mode_data(eps, modes, s, N, angular_weight)
    gram_report = mode_block_check(data.blocks, data.gram)
    lap_report = mode_block_check(data.blocks, data.laplacian)
    n = N + 1
    diff = max(
        float(np.abs(data.laplacian[i * n : (i + 1) * n, i * n : (i + 1) * n] - blk.entries).max())
        for i, blk in enumerate(data.blocks)
    )
    return gram_report, lap_report, diff
