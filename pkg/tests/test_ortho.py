import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polygeom.geometry import DegenerateInnerProduct, GeometrySpec, GramMatrix, gram_matrix, quadrature_rule
from polygeom.laplacian import band_profile
from polygeom.ortho import (
    NotTridiagonal,
    default_grid,
    jacobi_coefficients,
    multiplication_matrix,
    orthonormalize,
    projector,
    reproducing_kernel,
)
from polygeom.resolvent import degree_basis

from .helpers import random_unitary

LEG = GeometrySpec.legendre()

SPECS = [
    LEG,
    GeometrySpec.interval_weighted((0.0, 2.0), [1.0, 0.5]),
    GeometrySpec.interval_sobolev((-1.0, 1.0), (1.0, 1.0)),
    GeometrySpec.circle({0: 1.0, 1: 0.25}),
    GeometrySpec.circle({0: 1.0, 1: 0.3j}, 0.05),
    GeometrySpec.annulus_radial_mode(0.1, 1, 1),
]


def _replace_entries(G, entries):
    return GramMatrix(np.asarray(entries, dtype=np.complex128), G.basis, G.spec, G.N)


# -- orthonormalize -----------------------------------------------------------


def test_identity_gram():
    G = gram_matrix(GeometrySpec.circle({0: 1.0}), 2)
    np.testing.assert_allclose(orthonormalize(G).C, np.eye(5))


def test_diagonal_gram():
    G = _replace_entries(gram_matrix(LEG, 1), np.diag([4.0, 9.0]))
    np.testing.assert_allclose(orthonormalize(G).C, np.diag([1 / 2, 1 / 3]))


def test_legendre_polynomials():
    C = orthonormalize(gram_matrix(LEG, 2)).C
    expected = np.array(
        [
            [1 / np.sqrt(2), 0, -np.sqrt(5 / 2) / 2],
            [0, np.sqrt(3 / 2), 0],
            [0, 0, np.sqrt(5 / 2) * 3 / 2],
        ]
    )
    np.testing.assert_allclose(C, expected, atol=1e-14)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind.value)
def test_basis_invariants(spec):
    G = gram_matrix(spec, 16, spec.working_family)
    C = orthonormalize(G).C
    np.testing.assert_allclose(C.conj().T @ G.entries @ C, np.eye(G.dim), atol=1e-10)
    assert np.all(np.diag(C).real > 0) and np.all(np.diag(C).imag == 0)
    assert np.array_equal(C, np.triu(C))


def test_degenerate_gram_propagates():
    G = _replace_entries(gram_matrix(LEG, 1), [[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(DegenerateInnerProduct):
        orthonormalize(G)


@settings(max_examples=30, deadline=None)
@given(scale=st.lists(st.floats(0.1, 10), min_size=5, max_size=5))
def test_gauge_uniqueness_under_rescaling(scale):
    # rescaling canonical element n by s_n gives G' = S G S; the orthonormal
    # polynomials are the same functions, so C' = S^{-1} C
    G = gram_matrix(GeometrySpec.interval_weighted((-1.0, 2.0), [2.0, 1.0]), 4)
    S = np.diag(scale)
    C = orthonormalize(G).C
    C2 = orthonormalize(_replace_entries(G, S @ G.entries @ S)).C
    np.testing.assert_allclose(S @ C2, C, rtol=1e-9, atol=1e-10)


# -- projectors ----------------------------------------------------------------


def test_projector_full_is_identity():
    G = gram_matrix(LEG, 3)
    np.testing.assert_allclose(projector(G, 3), np.eye(4), atol=1e-12)


def test_projector_diagonal_gram_truncates():
    G = gram_matrix(GeometrySpec.circle({0: 1.0}), 3)
    P = projector(G, 1)
    keep = np.array([abs(lab) <= 1 for lab in G.labels], dtype=float)
    np.testing.assert_allclose(P, np.diag(keep), atol=1e-15)


def test_legendre_projector():
    G = gram_matrix(LEG, 2)
    P = projector(G, 1)
    np.testing.assert_allclose(P @ P, P, atol=1e-14)
    assert np.linalg.matrix_rank(P) == 2
    # x^2 = 1/3 + (x^2 - 1/3) with the bracket orthogonal to span{1, x}
    np.testing.assert_allclose(P @ [0, 0, 1], [1 / 3, 0, 0], atol=1e-14)
    GP = G.entries @ P
    np.testing.assert_allclose(GP, P.conj().T @ G.entries, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(i=st.integers(0, len(SPECS) - 1), M=st.integers(0, 32), data=st.data())
def test_projector_properties(i, M, data):
    spec = SPECS[i]
    N = data.draw(st.integers(0, M))
    G = gram_matrix(spec, M, spec.working_family)
    P = projector(G, N)
    scale = max(1.0, np.linalg.norm(P, 2))
    assert np.linalg.norm(P @ P - P, 2) <= 1e-10 * scale
    assert np.linalg.norm(G.entries @ P - P.conj().T @ G.entries, 2) <= 1e-10 * scale * np.linalg.norm(G.entries, 2)


def test_projector_rejects_large_subcutoff():
    with pytest.raises(ValueError):
        projector(gram_matrix(LEG, 2), 3)


# -- kernels ---------------------------------------------------------------------


def test_circle_kernel_diagonal():
    b = degree_basis(GeometrySpec.circle({0: 1.0}), 1, analytic=True)
    K = reproducing_kernel(b)
    np.testing.assert_allclose(np.diag(K.values), 2.0, atol=1e-14)


def test_legendre_kernel_degree_zero():
    K = reproducing_kernel(orthonormalize(gram_matrix(LEG, 0)), [-1, 0.3, 1], [0.0, 0.9])
    np.testing.assert_allclose(K.values, 0.5)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind.value)
def test_kernel_hermitian_nonnegative_diagonal(spec):
    K = reproducing_kernel(degree_basis(spec, 6)).values
    np.testing.assert_allclose(K, K.conj().T, atol=1e-12)
    assert np.all(np.diag(K).real >= 0)
    np.testing.assert_allclose(np.diag(K).imag, 0, atol=1e-12)


def test_default_grid():
    g = default_grid(LEG)
    assert g.shape == (64,) and g.min() > -1 and g.max() < 1
    c = default_grid(GeometrySpec.circle({0: 1.0}))
    assert c[0] == 0 and c[1] == pytest.approx(2 * np.pi / 64)


@settings(max_examples=25, deadline=None)
@given(
    w=st.lists(st.floats(-0.3, 0.3), min_size=0, max_size=2),
    q=st.lists(st.floats(-2, 2), min_size=1, max_size=6),
    y=st.floats(-1, 1),
)
def test_kernel_reproduces_polynomials(w, q, y):
    spec = GeometrySpec.interval_weighted((-1.0, 1.0), [1.0] + w)
    N = len(q) - 1
    b = orthonormalize(gram_matrix(spec, N, "legendre"))
    x, qw = quadrature_rule(spec, N)
    K = reproducing_kernel(b, x, [y]).values[:, 0]
    qx = np.polynomial.polynomial.polyval(x, q)
    got = np.sum(qw * qx * np.conj(K))
    assert abs(got - np.polynomial.polynomial.polyval(y, q)) <= 1e-8


def test_csv_exports():
    b = orthonormalize(gram_matrix(LEG, 2))
    lines = b.to_csv().splitlines()
    assert lines[0] == "n,c0,c1,c2" and len(lines) == 4
    K = reproducing_kernel(b, [0.0, 1.0])
    assert K.to_csv().splitlines()[0] == "x,y,re,im"
    assert len(K.to_csv().splitlines()) == 5


# -- multiplication and Jacobi data -----------------------------------------------------


def test_legendre_jacobi():
    b = orthonormalize(gram_matrix(LEG, 6))
    J = jacobi_coefficients(multiplication_matrix(LEG, b))
    n = np.arange(1, 7)
    np.testing.assert_allclose(J.a, n / np.sqrt(4 * n**2 - 1), atol=1e-13)
    assert J.a[0] == pytest.approx(1 / np.sqrt(3)) and J.a[1] == pytest.approx(2 / np.sqrt(15))
    np.testing.assert_allclose(J.b, 0, atol=1e-13)
    np.testing.assert_allclose(J.matrix(), J.matrix().T)


def test_legendre_jacobi_monomial_route_agrees():
    mono = orthonormalize(gram_matrix(LEG, 5))
    leg = orthonormalize(gram_matrix(LEG, 5, "legendre"))
    np.testing.assert_allclose(
        multiplication_matrix(LEG, mono), multiplication_matrix(LEG, leg), atol=1e-12
    )


def test_even_weight_has_zero_diagonal():
    spec = GeometrySpec.interval_weighted((-1.0, 1.0), [1.0, 0.0, 2.0])
    J = jacobi_coefficients(multiplication_matrix(spec, degree_basis(spec, 8)))
    np.testing.assert_allclose(J.b, 0, atol=1e-13)
    assert np.all(J.a > 0)


def test_shifted_interval_diagonal():
    spec = GeometrySpec.interval_weighted((1.0, 3.0), [1.0])
    J = jacobi_coefficients(multiplication_matrix(spec, degree_basis(spec, 4)))
    np.testing.assert_allclose(J.b, 2.0, atol=1e-13)


def test_circle_unit_weight_shift():
    spec = GeometrySpec.circle({0: 1.0})
    b = degree_basis(spec, 2)
    M = multiplication_matrix(spec, b)
    labels = b.labels
    expected = np.array([[1.0 if m == n + 1 else 0.0 for n in labels] for m in labels])
    np.testing.assert_allclose(M, expected, atol=1e-15)


def test_sobolev_is_not_tridiagonal():
    spec = GeometrySpec.interval_sobolev((-1.0, 1.0), (1.0, 1.0))
    M = multiplication_matrix(spec, degree_basis(spec, 6))
    assert band_profile(M).bandwidth > 1
    with pytest.raises(NotTridiagonal):
        jacobi_coefficients(M)


@settings(max_examples=25, deadline=None)
@given(
    c1=st.floats(-0.45, 0.45),
    c2=st.floats(-0.45, 0.45),
    a=st.floats(-3, 3),
    width=st.floats(0.2, 4),
)
def test_jacobi_offdiagonal_positive(c1, c2, a, width):
    # 1 + c1 t + c2 t^2 stays positive for |t| <= 1; t maps [a, a + width] to [-1, 1]
    b = a + width
    mid, half = (a + b) / 2, width / 2
    coeffs = [1 - c1 * mid / half + c2 * mid**2 / half**2, c1 / half - 2 * c2 * mid / half**2, c2 / half**2]
    spec = GeometrySpec.interval_weighted((a, b), coeffs)
    J = jacobi_coefficients(multiplication_matrix(spec, degree_basis(spec, 7)))
    assert np.all(J.a > 0)


def test_rotated_basis_preserves_orthonormality(rng):
    b = degree_basis(GeometrySpec.circle({0: 1.0, 1: 0.2}), 3)
    r = b.rotated(random_unitary(rng, b.dim))
    G = b.gram.entries
    np.testing.assert_allclose(r.C.conj().T @ G @ r.C, np.eye(b.dim), atol=1e-12)
