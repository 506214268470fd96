import numpy as np
import pytest

from polygeom.annulus import (
    block_check,
    epsilon_scan,
    limit_geometry,
    multi_mode_data,
    nonincreasing,
    radial_mode_geometry,
    scan_csv,
)
from polygeom.geometry import GeometrySpec, Kind, UnsupportedOrder, gram_matrix
from polygeom.laplacian import laplacian
from polygeom.numerics import SpecError
from polygeom.resolvent import resolvent_distance

EPS = [1e-1, 1e-2, 1e-3, 1e-4]


def test_radial_mode_geometry():
    g = radial_mode_geometry(0.1, -2, 1)
    assert g.kind is Kind.ANNULUS_RADIAL_MODE and g.mode == -2 and g.order == 1
    assert g.domain == limit_geometry(1).domain
    with pytest.raises(UnsupportedOrder):
        radial_mode_geometry(0.1, 0, 1.5)


def test_limit_normalization():
    a, b = limit_geometry(2), limit_geometry(2, normalized=False)
    np.testing.assert_allclose(gram_matrix(a, 0).entries, [[1.0]])
    np.testing.assert_allclose(gram_matrix(b, 0).entries, [[2.0]])
    np.testing.assert_allclose(laplacian(a, 6).entries, laplacian(b, 6).entries, atol=1e-12)


def test_flat_mode_isometric_to_limit():
    for eps in (0.5, 0.1, 1e-3):
        G = gram_matrix(radial_mode_geometry(eps, 0, 0), 5, "legendre").entries
        L = gram_matrix(limit_geometry(0), 5, "legendre").entries
        np.testing.assert_allclose(G, L, atol=1e-14)


@pytest.mark.parametrize("m,s", [(0, 1), (1, 1), (2, 2)])
def test_gram_perturbation_is_first_order(m, s):
    L = gram_matrix(limit_geometry(s), 5, "legendre").entries
    errs = [
        np.abs(gram_matrix(radial_mode_geometry(eps, m, s), 5, "legendre").entries - L).max()
        for eps in (1e-2, 1e-3, 1e-4)
    ]
    assert errs[0] < 0.05 * np.abs(L).max()
    for a, b in zip(errs, errs[1:]):
        assert 5 < a / b < 20


def test_flat_scan_collapses():
    rows = epsilon_scan(0, 0, 4, EPS)
    assert [r.epsilon for r in rows] == EPS
    assert rows[-1].d_res <= 1e-6
    assert nonincreasing([r.d_res for r in rows])


@pytest.mark.parametrize("m", [0, 1, 3])
def test_sobolev_scan_collapses(m):
    rows = epsilon_scan(m, 1, 4, EPS[::-1])
    assert [r.epsilon for r in rows] == EPS
    d = [r.d_res for r in rows]
    assert nonincreasing(d) and d[-1] < d[0] / 100
    assert nonincreasing([r.basis_residual for r in rows])
    assert nonincreasing([r.projector_diff for r in rows])
    assert all(r.padding_converged and r.mode == m for r in rows)


def test_scan_triangle_inequality():
    limit = limit_geometry(1)
    g1, g2 = radial_mode_geometry(1e-1, 1, 1), radial_mode_geometry(1e-2, 1, 1)
    d1 = resolvent_distance(g1, limit, 4, 20)
    d2 = resolvent_distance(g2, limit, 4, 20)
    d12 = resolvent_distance(g1, g2, 4, 20)
    assert d1 <= d12 + d2 + 1e-12
    assert d2 <= d12 + d1 + 1e-12
    assert d12 <= d1 + d2 + 1e-12


def test_scan_validation():
    with pytest.raises(SpecError):
        epsilon_scan(0, 1, 2, [0.1, 0.01, 0.001])
    with pytest.raises(SpecError):
        epsilon_scan(0, 1, 2, [0.1, 0.01, 0.01, 0.001])


def test_scan_csv():
    rows = epsilon_scan(0, 0, 2, EPS)
    lines = scan_csv(rows).splitlines()
    assert lines[0] == "epsilon,mode,d_res,projector_diff,basis_residual"
    assert len(lines) == 5 and lines[1].startswith("0.10000000000000001,0,")


def test_nonincreasing():
    assert nonincreasing([1.0, 0.5, 0.52, 0.1])
    assert not nonincreasing([1.0, 0.5, 0.6])
    assert nonincreasing([1e-13, 5e-13, 0.0])
    assert nonincreasing([])


def test_multi_mode_diagonal_blocks_match_single_modes():
    data = multi_mode_data(0.2, [0, 2], 1, 3)
    n = 4
    for i, k in enumerate((0, 2)):
        single = gram_matrix(radial_mode_geometry(0.2, k, 1), 3, "legendre").entries
        np.testing.assert_allclose(data.gram[i * n : (i + 1) * n, i * n : (i + 1) * n], single, atol=1e-12)


def test_block_check_rejects_repeated_modes():
    with pytest.raises(SpecError):
        block_check(0.1, [1, 1], 1, 2)


def test_block_check_higher_order():
    g, lap, diff = block_check(0.05, [-1, 0, 2], 2, 3)
    assert g.passed and lap.passed and diff <= 1e-8 * max(1.0, np.abs(laplacian(GeometrySpec.annulus_radial_mode(0.05, 2, 2), 3).entries).max())
