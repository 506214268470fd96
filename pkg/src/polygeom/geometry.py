"""Finite-degree matrix data for polynomial Hilbert geometries.

A geometry is an inner product on polynomials plus the derivation ``D``
(``d/dx`` on intervals, ``d/dtheta`` on the circle, the rescaled radial
derivative for an annulus mode).  This module builds the Gram matrix of a
canonical basis and the matrix of ``D`` in that basis.

Conventions: ``G[i, j] = <e_j, e_i>`` with the inner product linear in its
first argument, so ``<f, g> = g^* G f`` for coefficient vectors.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from fractions import Fraction
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

from . import _radial
from .numerics import (
    ConvergenceFailure,
    NotPositiveDefinite,
    SpecError,
    as_matrix,
    get_tolerances,
)


class DegenerateInnerProduct(NotPositiveDefinite):
    """The Gram matrix is (numerically) only positive semi-definite."""


class NonpositiveWeight(SpecError):
    pass


class UnsupportedOrder(SpecError):
    pass


class InvalidSpec(SpecError):
    pass


# ---------------------------------------------------------------------------
# weights

_GRID = 4096
_SPLIT = 16
_MAX_SPLITS = 12


@dataclasses.dataclass(frozen=True, eq=False)
class WeightFunction:
    """A strictly positive density on an interval or on the circle.

    ``kind`` is one of ``"polynomial"`` (ascending coefficients in x),
    ``"exp_polynomial"`` (``exp`` of such a polynomial), ``"trigonometric"``
    (Fourier coefficients ``{k: w_hat(k)}``, density w.r.t. ``dtheta/2pi``) or
    ``"callable"``.
    """

    kind: str
    coefficients: tuple = ()
    interval: tuple | None = None
    func: Callable | None = None

    @classmethod
    def polynomial(cls, coefficients: Sequence[float], interval=(-1.0, 1.0)) -> "WeightFunction":
        return cls("polynomial", tuple(float(c) for c in coefficients), _interval(interval))

    @classmethod
    def exp_polynomial(cls, coefficients: Sequence[float], interval) -> "WeightFunction":
        return cls("exp_polynomial", tuple(float(c) for c in coefficients), _interval(interval))

    @classmethod
    def trigonometric(cls, fourier: Mapping[int, complex]) -> "WeightFunction":
        """Build from Fourier coefficients.

        Only ``k >= 0`` needs to be given; negative modes are filled in by
        Hermitian symmetry.  If both signs are given they must agree.
        """
        full: dict[int, complex] = {}
        for k, v in fourier.items():
            full[int(k)] = complex(v)
        scale = max([abs(v) for v in full.values()] + [1.0])
        for k in list(full):
            if -k in full:
                if abs(full[-k] - full[k].conjugate()) > 1e-14 * scale:
                    raise InvalidSpec(f"Fourier coefficients not Hermitian at k={k}")
            else:
                full[-k] = full[k].conjugate()
        if 0 in full and abs(full[0].imag) > 1e-14 * scale:
            raise InvalidSpec("w_hat(0) must be real")
        if 0 in full:
            full[0] = complex(full[0].real, 0.0)
        return cls("trigonometric", tuple(sorted(full.items())))

    @classmethod
    def from_callable(cls, func: Callable, interval) -> "WeightFunction":
        return cls("callable", (), _interval(interval), func)

    @property
    def periodic(self) -> bool:
        return self.kind == "trigonometric"

    @property
    def polynomial_degree(self) -> int | None:
        if self.kind != "polynomial":
            return None
        c = np.trim_zeros(np.asarray(self.coefficients), "b")
        return max(len(c) - 1, 0)

    @property
    def fourier(self) -> dict[int, complex]:
        if self.kind != "trigonometric":
            raise InvalidSpec("not a trigonometric weight")
        return dict(self.coefficients)

    @property
    def trig_degree(self) -> int:
        nz = [abs(k) for k, v in self.coefficients if v != 0]
        return max(nz, default=0)

    def fourier_coefficient(self, k: int) -> complex:
        return self.fourier.get(int(k), 0j)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            return nppoly.polyval(x, self.coefficients)
        if self.kind == "exp_polynomial":
            return np.exp(nppoly.polyval(x, self.coefficients))
        if self.kind == "trigonometric":
            total = np.zeros_like(x, dtype=np.complex128)
            for k, v in self.coefficients:
                total += v * np.exp(1j * k * x)
            return total.real
        return np.asarray(self.func(x), dtype=float)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            return nppoly.polyval(x, nppoly.polyder(self.coefficients))
        if self.kind == "exp_polynomial":
            return nppoly.polyval(x, nppoly.polyder(self.coefficients)) * self(x)
        if self.kind == "trigonometric":
            total = np.zeros_like(x, dtype=np.complex128)
            for k, v in self.coefficients:
                total += 1j * k * v * np.exp(1j * k * x)
            return total.real
        h = 1e-6 * max(1.0, self.interval[1] - self.interval[0])
        return (self(x + h) - self(x - h)) / (2 * h)

    def curvature_bound(self) -> float:
        """Upper bound for ``|w''|`` (exact for trigonometric weights, grid-based otherwise)."""
        if self.kind == "trigonometric":
            return float(sum(k * k * abs(v) for k, v in self.coefficients))
        a, b = self.interval
        x = np.linspace(a, b, _GRID)
        if self.kind == "polynomial":
            d2 = nppoly.polyval(x, nppoly.polyder(self.coefficients, 2))
        elif self.kind == "exp_polynomial":
            d1 = nppoly.polyval(x, nppoly.polyder(self.coefficients))
            d2 = (nppoly.polyval(x, nppoly.polyder(self.coefficients, 2)) + d1**2) * self(x)
        else:
            h = 1e-4 * (b - a)
            d2 = (self(x + h) - 2 * self(x) + self(x - h)) / h**2
        return 1.01 * float(np.max(np.abs(d2)))

    @cached_property
    def bounds(self) -> tuple[float, float]:
        return weight_bounds(self)


def _interval(interval) -> tuple[float, float]:
    a, b = (float(v) for v in interval)
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise InvalidSpec(f"interval endpoints must satisfy a < b, got ({a}, {b})")
    return (a, b)


def _certified_min(f: Callable, lo: float, hi: float, periodic: bool, curv: float) -> float:
    """Lower bound for ``min f`` on ``[lo, hi]`` by branch and bound.

    On a cell of width ``h`` a function with ``|f''| <= curv`` stays above its
    chord minus ``curv * h**2 / 8``.  Cells whose bound could still undercut the
    best sample are split until the gap falls below ``1e-14`` relative to
    ``max |f|``; every discarded cell contributes its bound.
    """
    if periodic:
        x = lo + (hi - lo) * np.arange(_GRID + 1) / _GRID
    else:
        x = np.linspace(lo, hi, _GRID)
    y = f(x)
    a, b, fa, fb = x[:-1], x[1:], y[:-1], y[1:]
    best = float(y.min())
    gap = 1e-14 * max(1.0, float(np.abs(y).max()))
    bound = np.inf
    for _ in range(_MAX_SPLITS):
        low = np.minimum(fa, fb) - curv * (b - a) ** 2 / 8
        open_ = low < best - gap
        if (~open_).any():
            bound = min(bound, float(low[~open_].min()))
        if not open_.any():
            break
        if open_.sum() * _SPLIT > 4 * _GRID * _SPLIT:
            # too many undecided cells: accept their bounds as they stand
            bound = min(bound, float(low[open_].min()))
            open_[:] = False
            break
        a, b = a[open_], b[open_]
        t = np.linspace(0.0, 1.0, _SPLIT + 1)
        xs = a[:, None] + (b - a)[:, None] * t
        ys = f(xs.ravel()).reshape(xs.shape)
        best = min(best, float(ys.min()))
        a, b = xs[:, :-1].ravel(), xs[:, 1:].ravel()
        fa, fb = ys[:, :-1].ravel(), ys[:, 1:].ravel()
    else:
        low = np.minimum(fa, fb) - curv * (b - a) ** 2 / 8
        bound = min(bound, float(low.min()))
    return float(min(bound, best))


def weight_bounds(w: WeightFunction) -> tuple[float, float]:
    """Certified enclosure ``(w_minus, w_plus)`` of the weight on its domain."""
    if w.periodic:
        lo, hi = 0.0, 2 * math.pi
    else:
        lo, hi = w.interval
    curv = w.curvature_bound()
    w_minus = _certified_min(w, lo, hi, w.periodic, curv)
    w_plus = -_certified_min(lambda x: -w(x), lo, hi, w.periodic, curv)
    if w_minus <= 0:
        raise NonpositiveWeight(f"NonpositiveWeight: weight minimum {w_minus:.6g} is not positive")
    return w_minus, w_plus


# ---------------------------------------------------------------------------
# geometry descriptions


class Kind(str, enum.Enum):
    INTERVAL_WEIGHTED = "interval_weighted"
    INTERVAL_SOBOLEV = "interval_sobolev"
    CIRCLE_WEIGHTED = "circle_weighted"
    CIRCLE_SOBOLEV = "circle_sobolev"
    ANNULUS_RADIAL_MODE = "annulus_radial_mode"


@dataclasses.dataclass(frozen=True, eq=False)
class GeometrySpec:
    """Declarative description of an inner product plus its derivation.

    Use the classmethod constructors rather than building this directly.
    """

    kind: Kind
    interval: tuple | None = None
    weight: WeightFunction | None = None
    coefficients: tuple = ()
    lam: float = 0.0
    epsilon: float | None = None
    mode: int = 0
    order: int = 0
    normalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        self._validate()

    # constructors ---------------------------------------------------------
    @classmethod
    def interval_weighted(cls, interval, weight: WeightFunction | Callable | Sequence[float]):
        interval = _interval(interval)
        if not isinstance(weight, WeightFunction):
            if callable(weight):
                weight = WeightFunction.from_callable(weight, interval)
            else:
                weight = WeightFunction.polynomial(weight, interval)
        return cls(Kind.INTERVAL_WEIGHTED, interval=interval, weight=weight)

    @classmethod
    def legendre(cls, interval=(-1.0, 1.0)):
        return cls.interval_weighted(interval, WeightFunction.polynomial([1.0], interval))

    @classmethod
    def interval_sobolev(cls, interval, coefficients: Sequence[float]):
        return cls(
            Kind.INTERVAL_SOBOLEV,
            interval=_interval(interval),
            coefficients=tuple(float(c) for c in coefficients),
        )

    @classmethod
    def circle_weighted(cls, fourier: Mapping[int, complex] | WeightFunction):
        w = fourier if isinstance(fourier, WeightFunction) else WeightFunction.trigonometric(fourier)
        return cls(Kind.CIRCLE_WEIGHTED, weight=w)

    @classmethod
    def circle_sobolev(cls, fourier: Mapping[int, complex] | WeightFunction, lam: float):
        w = fourier if isinstance(fourier, WeightFunction) else WeightFunction.trigonometric(fourier)
        return cls(Kind.CIRCLE_SOBOLEV, weight=w, lam=float(lam))

    @classmethod
    def circle(cls, fourier, lam: float = 0.0):
        """Weighted geometry for ``lam == 0``, mixed Sobolev geometry otherwise."""
        if lam == 0:
            return cls.circle_weighted(fourier)
        return cls.circle_sobolev(fourier, lam)

    @classmethod
    def annulus_radial_mode(cls, epsilon: float, mode: int, order: int, normalize: bool = True):
        return cls(
            Kind.ANNULUS_RADIAL_MODE,
            epsilon=float(epsilon),
            mode=mode,
            order=order,
            normalize=normalize,
        )

    # ---------------------------------------------------------------------
    def _validate(self):
        k = self.kind
        tol = get_tolerances()
        if k in (Kind.INTERVAL_WEIGHTED, Kind.INTERVAL_SOBOLEV):
            if self.interval is None:
                raise InvalidSpec(f"{k.value} needs an interval")
        if k is Kind.INTERVAL_WEIGHTED:
            if self.weight is None or self.weight.periodic:
                raise InvalidSpec("interval_weighted needs a non-periodic weight")
            if self.weight.interval != self.interval:
                raise InvalidSpec("weight interval differs from geometry interval")
            self._check_weight(tol)
        elif k is Kind.INTERVAL_SOBOLEV:
            c = self.coefficients
            if len(c) == 0 or not all(math.isfinite(v) for v in c):
                raise InvalidSpec("interval_sobolev needs finite coefficients lambda_0..lambda_s")
            if c[0] <= 0:
                raise InvalidSpec("lambda_0 must be > 0")
            if any(v < 0 for v in c[1:]):
                raise InvalidSpec("lambda_k must be >= 0")
        elif k in (Kind.CIRCLE_WEIGHTED, Kind.CIRCLE_SOBOLEV):
            if self.weight is None or not self.weight.periodic:
                raise InvalidSpec("circle geometries need Fourier coefficients")
            if k is Kind.CIRCLE_SOBOLEV and not (self.lam > 0 and math.isfinite(self.lam)):
                raise InvalidSpec("circle_sobolev needs lambda > 0")
            if k is Kind.CIRCLE_WEIGHTED and self.lam != 0:
                raise InvalidSpec("circle_weighted has lambda = 0")
            self._check_weight(tol)
        elif k is Kind.ANNULUS_RADIAL_MODE:
            eps = self.epsilon
            if eps is None or not (0 < eps < 1):
                raise InvalidSpec("annulus thickness must satisfy 0 < epsilon < 1")
            if isinstance(self.mode, bool) or int(self.mode) != self.mode:
                raise InvalidSpec("angular mode must be an integer")
            if isinstance(self.order, bool) or int(self.order) != self.order or self.order < 0:
                raise UnsupportedOrder(
                    f"UnsupportedOrder: Sobolev order must be a nonnegative integer, got {self.order}"
                )
            object.__setattr__(self, "mode", int(self.mode))
            object.__setattr__(self, "order", int(self.order))

    def _check_weight(self, tol):
        # w_min_tol = 0 switches the certification off (the Gram PD check remains)
        if tol.w_min_tol <= 0:
            return
        w_minus, _ = self.weight.bounds
        if w_minus < tol.w_min_tol:
            raise NonpositiveWeight(
                f"NonpositiveWeight: weight lower bound {w_minus:.3g} below {tol.w_min_tol:g}"
            )

    # ---------------------------------------------------------------------
    @property
    def is_circle(self) -> bool:
        return self.kind in (Kind.CIRCLE_WEIGHTED, Kind.CIRCLE_SOBOLEV)

    @property
    def domain(self) -> tuple:
        if self.is_circle:
            return ("circle",)
        if self.kind is Kind.ANNULUS_RADIAL_MODE:
            return ("interval", -1.0, 1.0)
        return ("interval",) + tuple(self.interval)

    @property
    def default_family(self) -> str:
        return "fourier" if self.is_circle else "monomial"

    @property
    def working_family(self) -> str:
        """Well-conditioned basis used by padded computations."""
        return "fourier" if self.is_circle else "legendre"

    def dim(self, N: int) -> int:
        return 2 * N + 1 if self.is_circle else N + 1

    def describe(self) -> dict:
        """Plain-data form (the configuration schema, see :mod:`polygeom.config`)."""
        d: dict = {"kind": self.kind.value}
        if self.interval is not None:
            d["interval"] = list(self.interval)
        if self.weight is not None:
            w = self.weight
            if w.kind == "trigonometric":
                d["fourier"] = {str(k): [v.real, v.imag] for k, v in w.coefficients if k >= 0}
            elif w.kind in ("polynomial", "exp_polynomial"):
                d["weight"] = {"type": w.kind, "coefficients": list(w.coefficients)}
            else:
                d["weight"] = {"type": "callable"}
        if self.kind is Kind.INTERVAL_SOBOLEV:
            d["coefficients"] = list(self.coefficients)
        if self.kind is Kind.CIRCLE_SOBOLEV:
            d["lambda"] = self.lam
        if self.kind is Kind.ANNULUS_RADIAL_MODE:
            d.update(epsilon=self.epsilon, mode=self.mode, order=self.order, normalize=self.normalize)
        return d

    def __repr__(self) -> str:
        return f"GeometrySpec({self.describe()!r})"


# ---------------------------------------------------------------------------
# canonical bases


@dataclasses.dataclass(frozen=True)
class CanonicalBasis:
    """Ordered canonical basis.

    ``family`` is ``"monomial"`` (``x^k``), ``"legendre"`` (Legendre polynomials
    orthonormal in ``L^2([a, b], dx)``) or ``"fourier"`` (``e^{i n theta}``).
    ``labels`` are degrees, or Fourier modes, in basis order.
    """

    family: str
    labels: tuple
    interval: tuple | None = None

    def __post_init__(self):
        if self.family not in ("monomial", "legendre", "fourier"):
            raise InvalidSpec(f"unknown basis family {self.family!r}")

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def degrees(self) -> np.ndarray:
        return np.abs(np.asarray(self.labels, dtype=int))

    def _check_full(self):
        if self.family != "fourier" and tuple(self.labels) != tuple(range(self.dim)):
            raise InvalidSpec("polynomial bases must be labelled 0..N in order")

    def _legendre_scale(self) -> np.ndarray:
        a, b = self.interval
        k = np.arange(self.dim)
        return np.sqrt((2 * k + 1) / (b - a))

    def vander(self, x) -> np.ndarray:
        """Values ``V[p, j] = e_j(x_p)``."""
        x = np.asarray(x, dtype=float)
        if self.family == "fourier":
            return np.exp(1j * np.outer(x, np.asarray(self.labels, dtype=float)))
        self._check_full()
        N = self.dim - 1
        if self.family == "monomial":
            return np.vander(x, N + 1, increasing=True).astype(np.complex128)
        a, b = self.interval
        s = (2 * x - a - b) / (b - a)
        return (npleg.legvander(s, N) * self._legendre_scale()).astype(np.complex128)

    def series(self) -> list:
        """Basis elements as numpy polynomial series in the variable x."""
        self._check_full()
        if self.family == "monomial":
            return [np.polynomial.Polynomial.basis(k) for k in range(self.dim)]
        if self.family == "legendre":
            a, b = self.interval
            scale = self._legendre_scale()
            return [
                np.polynomial.Legendre.basis(k, domain=[a, b]) * scale[k] for k in range(self.dim)
            ]
        raise InvalidSpec("Fourier basis has no polynomial series")

    def derivative(self) -> np.ndarray:
        """Matrix of ``D`` (``D e_j = sum_i Dm[i, j] e_i``)."""
        n = self.dim
        if self.family == "fourier":
            return np.diag(1j * np.asarray(self.labels, dtype=float))
        self._check_full()
        Dm = np.zeros((n, n), dtype=np.complex128)
        if self.family == "monomial":
            for k in range(1, n):
                Dm[k - 1, k] = k
            return Dm
        a, b = self.interval
        for k in range(1, n):
            for j in range(k - 1, -1, -2):
                Dm[j, k] = (2.0 / (b - a)) * math.sqrt((2 * k + 1) * (2 * j + 1))
        return Dm

    def multiplication(self) -> np.ndarray:
        """Matrix of multiplication by x (or z) from this basis into the next cutoff.

        Shape ``(dim + 1, dim)`` for polynomial families (degrees ``0..N+1``).
        Fourier bases are handled by the caller (a relabelling ``n -> n + 1``).
        """
        self._check_full()
        n = self.dim
        X = np.zeros((n + 1, n), dtype=np.complex128)
        if self.family == "monomial":
            for k in range(n):
                X[k + 1, k] = 1.0
            return X
        a, b = self.interval
        # x = c + h s with s the reference variable; s P_k = ((k+1)P_{k+1} + k P_{k-1})/(2k+1)
        c, h = (a + b) / 2, (b - a) / 2
        nu = np.sqrt((2 * np.arange(n + 1) + 1) / (b - a))
        for k in range(n):
            X[k, k] += c
            X[k + 1, k] += h * (k + 1) / (2 * k + 1) * nu[k] / nu[k + 1]
            if k >= 1:
                X[k - 1, k] += h * k / (2 * k + 1) * nu[k] / nu[k - 1]
        return X


def change_of_basis(source: CanonicalBasis, target: CanonicalBasis) -> np.ndarray:
    """``T`` with ``target_coeffs = T @ source_coeffs`` (polynomial families only)."""
    if source.family == "fourier" or target.family == "fourier":
        if source.labels == target.labels:
            return np.eye(source.dim, dtype=np.complex128)
        raise InvalidSpec("Fourier bases only convert to themselves")
    if source.dim != target.dim:
        raise InvalidSpec("bases have different dimensions")
    n = source.dim
    src = source.series()
    if target.family == "monomial":
        T = np.zeros((n, n))
        for j, p in enumerate(src):
            c = p.convert(kind=np.polynomial.Polynomial, domain=[-1, 1], window=[-1, 1]).coef
            T[: len(c), j] = c
        return T.astype(np.complex128)
    a, b = target.interval
    scale = target._legendre_scale()
    T = np.zeros((n, n))
    for j, p in enumerate(src):
        c = p.convert(kind=np.polynomial.Legendre, domain=[a, b]).coef
        T[: len(c), j] = c[:n] / scale[: len(c)]
    return T.astype(np.complex128)


def graded_labels(N: int, circle: bool) -> tuple:
    """Labels ordered along the degree filtration (circle: 0, -1, 1, -2, 2, ...)."""
    if not circle:
        return tuple(range(N + 1))
    out = [0]
    for k in range(1, N + 1):
        out += [-k, k]
    return tuple(out)


def natural_labels(N: int, circle: bool) -> tuple:
    return tuple(range(-N, N + 1)) if circle else tuple(range(N + 1))


def canonical_basis(spec: GeometrySpec, N: int, family: str | None = None, order: str = "natural"):
    if N < 0:
        raise InvalidSpec("degree cutoff must be >= 0")
    family = family or spec.default_family
    if spec.is_circle:
        if family != "fourier":
            raise InvalidSpec("circle geometries use the Fourier basis")
        labels = graded_labels(N, True) if order == "graded" else natural_labels(N, True)
        return CanonicalBasis("fourier", labels)
    if family == "fourier":
        raise InvalidSpec("interval geometries need a polynomial basis family")
    a, b = spec.domain[1:]
    return CanonicalBasis(family, natural_labels(N, False), (a, b))


# ---------------------------------------------------------------------------
# Gram and derivative matrices


@dataclasses.dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray
    basis: CanonicalBasis
    spec: GeometrySpec
    N: int

    @property
    def labels(self) -> tuple:
        return self.basis.labels

    @property
    def dim(self) -> int:
        return self.basis.dim

    def section(self, labels: Sequence[int]) -> "GramMatrix":
        """Sub-Gram matrix on the given canonical labels, in the given order."""
        pos = {lab: i for i, lab in enumerate(self.labels)}
        try:
            idx = [pos[lab] for lab in labels]
        except KeyError as exc:
            raise InvalidSpec(f"label {exc.args[0]} not in basis") from None
        sub = self.entries[np.ix_(idx, idx)]
        basis = dataclasses.replace(self.basis, labels=tuple(labels))
        N = int(max(abs(lab) for lab in labels)) if labels else 0
        return GramMatrix(sub, basis, self.spec, N)

    def analytic_section(self, N: int | None = None) -> "GramMatrix":
        """Modes ``0..N`` of a circle Gram matrix (the span of ``1, z, ..., z^N``)."""
        if not self.spec.is_circle:
            raise InvalidSpec("analytic sections exist only for circle geometries")
        N = self.N if N is None else N
        return self.section(tuple(range(N + 1)))


@dataclasses.dataclass(frozen=True, eq=False)
class DerivativeMatrix:
    entries: np.ndarray
    basis: CanonicalBasis
    spec: GeometrySpec
    N: int


def derivative_matrix(spec: GeometrySpec, N: int, family: str | None = None, order: str = "natural"):
    basis = canonical_basis(spec, N, family, order)
    return DerivativeMatrix(basis.derivative(), basis, spec, N)


def _gauss(a: float, b: float, n: int):
    x, w = npleg.leggauss(n)
    return (b - a) / 2 * x + (a + b) / 2, (b - a) / 2 * w


def _composite(a: float, b: float, q: int, panels: int):
    edges = np.linspace(a, b, panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = _gauss(lo, hi, q)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _weighted_gram(components, x, qw) -> np.ndarray:
    G = np.zeros((components[0][1].shape[1],) * 2, dtype=np.complex128)
    for weight, V in components:
        G += V.conj().T @ (V * (qw * weight)[:, None])
    return G


def _interval_components(spec: GeometrySpec, basis: CanonicalBasis, x: np.ndarray):
    V = basis.vander(x)
    if spec.kind is Kind.INTERVAL_WEIGHTED:
        return [(spec.weight(x), V)]
    Dm = basis.derivative()
    comps = []
    Vk = V
    for k, lam in enumerate(spec.coefficients):
        if k:
            Vk = Vk @ Dm
        if lam != 0:
            comps.append((np.full(x.shape, lam), Vk))
    return comps


def _annulus_components(spec: GeometrySpec, basis: CanonicalBasis, u: np.ndarray):
    vals = _radial.component_values(spec.epsilon, spec.mode, spec.order, basis.series(), u)
    w = np.full(u.shape, spec.epsilon / 2)
    return [(w, V) for V in vals]


def _refined_gram(build, a: float, b: float, q: int) -> np.ndarray:
    """Composite Gauss-Legendre, doubling panels until the Gram matrix settles."""
    tol = get_tolerances().quad_tol
    prev = None
    panels = 1
    while panels <= 4096:
        x, w = _composite(a, b, q, panels)
        G = build(x, w)
        if prev is not None:
            diff = np.max(np.abs(G - prev))
            if diff <= tol * np.max(np.abs(G)):
                return G
        prev = G
        panels *= 2
    raise ConvergenceFailure("composite quadrature did not converge")


def quadrature_rule(spec: GeometrySpec, N: int):
    """Nodes and weights integrating ``p * w`` for polynomials ``p`` of degree ``<= 2N``.

    Only for weighted interval geometries; the returned weights include ``w``.
    """
    if spec.kind is not Kind.INTERVAL_WEIGHTED:
        raise InvalidSpec("quadrature_rule needs an interval_weighted geometry")
    a, b = spec.interval
    deg = spec.weight.polynomial_degree
    if deg is not None:
        x, w = _gauss(a, b, math.ceil((2 * N + deg) / 2) + 4)
        return x, w * spec.weight(x)
    basis = canonical_basis(spec, N, "legendre")
    q = N + 8
    tol = get_tolerances().quad_tol
    prev = None
    panels = 1
    while panels <= 4096:
        x, w = _composite(a, b, q, panels)
        G = _weighted_gram(_interval_components(spec, basis, x), x, w)
        if prev is not None and np.max(np.abs(G - prev)) <= tol * np.max(np.abs(G)):
            return x, w * spec.weight(x)
        prev = G
        panels *= 2
    raise ConvergenceFailure("composite quadrature did not converge")


def _raw_gram(spec: GeometrySpec, basis: CanonicalBasis) -> np.ndarray:
    N = basis.dim - 1
    if spec.is_circle:
        labels = np.asarray(basis.labels)
        diff = labels[:, None] - labels[None, :]
        fourier = spec.weight.fourier
        G = np.vectorize(lambda k: fourier.get(int(k), 0j), otypes=[np.complex128])(diff)
        if spec.kind is Kind.CIRCLE_SOBOLEV:
            G = G + spec.lam * np.diag(labels.astype(float) ** 2)
        return G
    if spec.kind is Kind.ANNULUS_RADIAL_MODE:
        q = N + 2 * spec.order + 8
        G = _refined_gram(
            lambda x, w: _weighted_gram(_annulus_components(spec, basis, x), x, w), -1.0, 1.0, q
        )
        if spec.normalize:
            G = G / annulus_constant_norm(spec)
        return G
    a, b = spec.interval
    deg = spec.weight.polynomial_degree if spec.kind is Kind.INTERVAL_WEIGHTED else 0
    if deg is not None:
        x, w = _gauss(a, b, math.ceil((2 * N + deg) / 2) + 4)
        return _weighted_gram(_interval_components(spec, basis, x), x, w)
    return _refined_gram(
        lambda x, w: _weighted_gram(_interval_components(spec, basis, x), x, w), a, b, N + 8
    )


def annulus_constant_norm(spec: GeometrySpec) -> float:
    """Squared norm of the constant radial profile ``q = 1`` (unnormalized)."""
    raw = dataclasses.replace(spec, normalize=False)
    basis = CanonicalBasis("monomial", (0,), (-1.0, 1.0))
    return float(_raw_gram(raw, basis)[0, 0].real)


def check_positive_definite(G: np.ndarray, what: str = "Gram matrix") -> None:
    vals = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    if vals.size and vals[0] <= get_tolerances().pd_tol * max(vals[-1], 0.0):
        raise DegenerateInnerProduct(
            f"DegenerateInnerProduct: {what} has smallest eigenvalue {vals[0]:.3e} "
            f"(largest {vals[-1]:.3e})"
        )


def gram_matrix(
    spec: GeometrySpec, N: int, family: str | None = None, order: str = "natural"
) -> GramMatrix:
    """Gram matrix of the canonical basis at degree (or mode) cutoff ``N``.

    ``order="graded"`` lists circle modes as ``0, -1, 1, -2, 2, ...`` so that
    every lower cutoff is a leading block.
    """
    basis = canonical_basis(spec, N, family, order)
    G = as_matrix(_raw_gram(spec, basis), square=True)
    G = 0.5 * (G + G.conj().T)
    check_positive_definite(G)
    return GramMatrix(G, basis, spec, N)


def gram_for_basis(spec: GeometrySpec, basis: CanonicalBasis) -> GramMatrix:
    G = as_matrix(_raw_gram(spec, basis), square=True)
    G = 0.5 * (G + G.conj().T)
    check_positive_definite(G)
    N = int(basis.degrees.max()) if basis.dim else 0
    return GramMatrix(G, basis, spec, N)


def sobolev_gram_interval(interval, coefficients: Sequence[float], N: int) -> GramMatrix:
    """Monomial Gram matrix of ``sum_k lam_k int f^(k) g^(k) dx`` from exact rationals."""
    spec = GeometrySpec.interval_sobolev(interval, coefficients)
    a, b = (Fraction(v) for v in spec.interval)
    lams = [Fraction(v) for v in spec.coefficients]

    def falling(n: int, k: int) -> int:
        return math.perm(n, k) if k <= n else 0

    G = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        for j in range(i, N + 1):
            total = Fraction(0)
            for k, lam in enumerate(lams):
                if lam == 0 or k > i or k > j:
                    continue
                p = i + j - 2 * k
                moment = (b ** (p + 1) - a ** (p + 1)) / (p + 1)
                total += lam * falling(i, k) * falling(j, k) * moment
            G[i, j] = G[j, i] = float(total)
    G = G.astype(np.complex128)
    check_positive_definite(G)
    return GramMatrix(G, canonical_basis(spec, N, "monomial"), spec, N)
