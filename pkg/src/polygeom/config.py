"""JSON configuration documents for geometries and runs.

A geometry is a JSON object with a ``kind`` and the fields of that kind::

    {"kind": "interval_weighted", "interval": [-1, 1],
     "weight": {"type": "polynomial", "coefficients": [1]}}
    {"kind": "interval_weighted", "interval": [-2, 2],
     "weight": {"type": "exp_polynomial", "coefficients": [0, 0, -1]}}
    {"kind": "interval_sobolev", "interval": [-1, 1], "coefficients": [1, 1]}
    {"kind": "circle_weighted", "fourier": {"0": 1, "1": 0.25}}
    {"kind": "circle_sobolev", "fourier": {"0": 1, "1": [0.25, 0]}, "lambda": 0.01}
    {"kind": "annulus_radial_mode", "epsilon": 0.01, "mode": 0, "order": 1}

Fourier coefficients are given for ``k >= 0`` (a number or ``[re, im]``); the
negative modes follow from ``w_hat(-k) = conj(w_hat(k))``.  Weight coefficients
are ascending powers of ``x``.  Run-level keys ``degree``, ``padding`` and
``grid`` may sit next to the geometry fields.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Mapping

from .geometry import GeometrySpec, InvalidSpec, Kind, UnsupportedOrder, WeightFunction

RUN_KEYS = ("degree", "padding", "grid")


def _number(v: Any, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidSpec(f"{what} must be a number, got {v!r}")
    x = float(v)
    if not math.isfinite(x):
        raise InvalidSpec(f"{what} must be finite")
    return x


def _numbers(v: Any, what: str) -> list[float]:
    if not isinstance(v, (list, tuple)) or not v:
        raise InvalidSpec(f"{what} must be a non-empty list of numbers")
    return [_number(x, what) for x in v]


def _complex(v: Any, what: str) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise InvalidSpec(f"{what} must be a number or [re, im]")
        return complex(_number(v[0], what), _number(v[1], what))
    return complex(_number(v, what), 0.0)


def _integer(v: Any, what: str) -> int:
    x = _number(v, what)
    if x != int(x):
        raise InvalidSpec(f"{what} must be an integer, got {v!r}")
    return int(x)


def _fourier(v: Any) -> dict[int, complex]:
    if not isinstance(v, Mapping) or not v:
        raise InvalidSpec("fourier must be a non-empty object {k: coefficient}")
    out = {}
    for k, c in v.items():
        try:
            kk = int(k)
        except (TypeError, ValueError):
            raise InvalidSpec(f"Fourier index {k!r} is not an integer") from None
        if kk < 0:
            raise InvalidSpec("give Fourier coefficients for k >= 0 only")
        out[kk] = _complex(c, f"fourier[{k}]")
    return out


def spec_from_dict(d: Mapping[str, Any]) -> GeometrySpec:
    if not isinstance(d, Mapping):
        raise InvalidSpec("geometry must be a JSON object")
    try:
        kind = Kind(d.get("kind"))
    except ValueError:
        raise InvalidSpec(f"unknown geometry kind {d.get('kind')!r}") from None
    if kind in (Kind.INTERVAL_WEIGHTED, Kind.INTERVAL_SOBOLEV):
        interval = _numbers(d.get("interval"), "interval")
        if len(interval) != 2:
            raise InvalidSpec("interval must be [a, b]")
    if kind is Kind.INTERVAL_WEIGHTED:
        w = d.get("weight", {"type": "polynomial", "coefficients": [1.0]})
        if not isinstance(w, Mapping):
            raise InvalidSpec("weight must be an object")
        coeffs = _numbers(w.get("coefficients"), "weight coefficients")
        wtype = w.get("type", "polynomial")
        if wtype == "polynomial":
            weight = WeightFunction.polynomial(coeffs, interval)
        elif wtype == "exp_polynomial":
            weight = WeightFunction.exp_polynomial(coeffs, interval)
        else:
            raise InvalidSpec(f"unknown weight type {wtype!r}")
        return GeometrySpec.interval_weighted(interval, weight)
    if kind is Kind.INTERVAL_SOBOLEV:
        return GeometrySpec.interval_sobolev(interval, _numbers(d.get("coefficients"), "coefficients"))
    if kind is Kind.CIRCLE_WEIGHTED:
        return GeometrySpec.circle_weighted(_fourier(d.get("fourier")))
    if kind is Kind.CIRCLE_SOBOLEV:
        return GeometrySpec.circle_sobolev(_fourier(d.get("fourier")), _number(d.get("lambda"), "lambda"))
    order = d.get("order", 0)
    if isinstance(order, float) and order != int(order):
        raise UnsupportedOrder(f"UnsupportedOrder: Sobolev order must be an integer, got {order}")
    return GeometrySpec.annulus_radial_mode(
        _number(d.get("epsilon"), "epsilon"),
        _integer(d.get("mode", 0), "mode"),
        _integer(order, "order"),
        bool(d.get("normalize", True)),
    )


def spec_to_dict(spec: GeometrySpec) -> dict:
    return spec.describe()


def load_document(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidSpec(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InvalidSpec(f"{path} must contain a JSON object")
    return doc


def load_spec(path: str | Path) -> GeometrySpec:
    return spec_from_dict(load_document(path))
