"""Input-output ODE models ``x' = f(x, u, p)``, ``x(t0) = f0(p)``, ``y = h(x, u, p)``."""

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import InvalidInputError, ModelError
from ..ldcore import EPS_ZERO, LDVector
from .expr import Expr, check_indices, compile_ld, compile_real, parse_expr, to_sexpr

WHICH = ("f", "h", "f0")


@dataclass(frozen=True)
class InputSignal:
    """Input channel ``offset + amplitude * sin(frequency * t)``."""

    offset: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0

    def __call__(self, t):
        return self.offset + self.amplitude * math.sin(self.frequency * t)


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of an input-output model and its reference point.

    ``sample_times`` is optional; when set it is the model's own choice of
    sampling instants for sensitivity matrices.
    """

    name: str
    n_x: int
    n_u: int
    n_p: int
    n_y: int
    f: tuple
    h: tuple
    f0: tuple
    u_star: tuple
    theta_star: tuple
    t0: float = 0.0
    tf: float = 1.0
    sample_times: tuple = None

    def __post_init__(self):
        for attr in ("f", "h", "f0", "u_star", "theta_star"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        object.__setattr__(self, "theta_star", tuple(float(v) for v in self.theta_star))
        if self.sample_times is not None:
            object.__setattr__(self, "sample_times", tuple(float(v) for v in self.sample_times))
        self._validate()

    def _validate(self):
        if self.n_x < 1 or self.n_p < 1 or self.n_y < 1 or self.n_u < 0:
            raise ModelError("dims need n_x, n_p, n_y >= 1 and n_u >= 0", "dims")
        for key, exprs, n in (("f", self.f, self.n_x), ("h", self.h, self.n_y),
                              ("f0", self.f0, self.n_x)):
            if len(exprs) != n:
                raise ModelError(f"expected {n} expressions, got {len(exprs)}", key)
        if len(self.u_star) != self.n_u:
            raise ModelError(f"expected {self.n_u} input signals, got {len(self.u_star)}", "inputs")
        if len(self.theta_star) != self.n_p:
            raise ModelError(f"expected {self.n_p} values, got {len(self.theta_star)}", "theta_star")
        if not all(math.isfinite(v) for v in self.theta_star):
            raise ModelError("non-finite reference parameter", "theta_star")
        if not self.tf >= self.t0:
            raise ModelError(f"tf={self.tf} precedes t0={self.t0}", "tf")
        limits = {"state": self.n_x, "input": self.n_u, "param": self.n_p}
        for key, exprs in (("f", self.f), ("h", self.h)):
            for i, e in enumerate(exprs):
                check_indices(e, limits, f"{key}[{i}]")
        for i, e in enumerate(self.f0):
            bad = [n.kind for n in e.walk() if n.kind in ("state", "input", "time")]
            if bad:
                raise ModelError(f"initial-state map may only use parameters, found {bad[0]}",
                                 f"f0[{i}]")
            check_indices(e, {"param": self.n_p}, f"f0[{i}]")
        if self.sample_times is not None:
            st = self.sample_times
            if any(not self.t0 <= s <= self.tf for s in st):
                raise ModelError("sample times must lie in [t0, tf]", "samples")

    @property
    def observability_ready(self):
        """True when ``n_p == n_x`` and ``f0`` is the identity on parameters."""
        return self.n_p == self.n_x and all(
            e.kind == "param" and e.index == i for i, e in enumerate(self.f0)
        )

    def inputs_at(self, t):
        return [s(t) for s in self.u_star]

    def exprs(self, which):
        if which not in WHICH:
            raise InvalidInputError(f"which must be one of {WHICH}, got {which!r}")
        return getattr(self, which)

    @cached_property
    def _real(self):
        return {w: [compile_real(e, f"{w}[{i}]") for i, e in enumerate(self.exprs(w))]
                for w in WHICH}

    def real_functions(self, which):
        return self._real[which]

    def ld_functions(self, which, eps=EPS_ZERO):
        cache = self.__dict__.setdefault("_ld_cache", {})
        key = (which, eps)
        if key not in cache:
            cache[key] = [compile_ld(e, f"{which}[{i}]", eps)
                          for i, e in enumerate(self.exprs(which))]
        return cache[key]


# ---------------------------------------------------------------------------
# documents
# ---------------------------------------------------------------------------


def _require(doc, key, where=None):
    if key not in doc:
        raise ModelError(f"missing key {key!r}", where)
    return doc[key]


def _int_dim(dims, key):
    v = _require(dims, key, "dims")
    if isinstance(v, bool) or not isinstance(v, int):
        raise ModelError(f"{key} must be an integer", "dims")
    return v


def _exprs(doc, key):
    items = _require(doc, key)
    if not isinstance(items, list):
        raise ModelError("expected a list of expression strings", key)
    out = []
    for i, s in enumerate(items):
        if isinstance(s, (int, float)) and not isinstance(s, bool):
            s = repr(float(s))
        if not isinstance(s, str):
            raise ModelError("expression must be a string", f"{key}[{i}]")
        out.append(parse_expr(s, f"{key}[{i}]"))
    return tuple(out)


def _signal(item, i):
    where = f"inputs[{i}]"
    if not isinstance(item, dict):
        raise ModelError("input signal must be an object", where)
    unknown = set(item) - {"offset", "amplitude", "frequency"}
    if unknown:
        raise ModelError(f"unknown keys {sorted(unknown)}", where)
    try:
        return InputSignal(*(float(item.get(k, 0.0)) for k in ("offset", "amplitude", "frequency")))
    except (TypeError, ValueError):
        raise ModelError("signal fields must be numbers", where) from None


def parse_model(document):
    """Build a validated :class:`ModelSpec` from a JSON document (text or dict)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise ModelError("model document must be a JSON object")
    dims = _require(document, "dims")
    if not isinstance(dims, dict):
        raise ModelError("dims must be an object", "dims")
    inputs = document.get("inputs", [])
    if not isinstance(inputs, list):
        raise ModelError("inputs must be a list", "inputs")
    theta = _require(document, "theta_star")
    try:
        theta = tuple(float(v) for v in theta)
    except (TypeError, ValueError):
        raise ModelError("theta_star must be a list of numbers", "theta_star") from None
    samples = document.get("samples")
    try:
        t0 = float(document.get("t0", 0.0))
        tf = float(_require(document, "tf"))
        if samples is not None:
            samples = tuple(float(s) for s in samples)
    except (TypeError, ValueError):
        raise ModelError("t0, tf and samples must be numbers") from None
    return ModelSpec(
        name=str(document.get("name", "model")),
        n_x=_int_dim(dims, "n_x"),
        n_u=_int_dim(dims, "n_u"),
        n_p=_int_dim(dims, "n_p"),
        n_y=_int_dim(dims, "n_y"),
        f=_exprs(document, "f"),
        h=_exprs(document, "h"),
        f0=_exprs(document, "f0"),
        u_star=tuple(_signal(s, i) for i, s in enumerate(inputs)),
        theta_star=theta,
        t0=t0,
        tf=tf,
        sample_times=samples,
    )


def model_to_document(spec):
    doc = {
        "name": spec.name,
        "dims": {"n_x": spec.n_x, "n_u": spec.n_u, "n_p": spec.n_p, "n_y": spec.n_y},
        "f": [to_sexpr(e) for e in spec.f],
        "h": [to_sexpr(e) for e in spec.h],
        "f0": [to_sexpr(e) for e in spec.f0],
        "inputs": [{"offset": s.offset, "amplitude": s.amplitude, "frequency": s.frequency}
                   for s in spec.u_star],
        "theta_star": list(spec.theta_star),
        "t0": spec.t0,
        "tf": spec.tf,
    }
    if spec.sample_times is not None:
        doc["samples"] = list(spec.sample_times)
    return doc


def serialize_model(spec):
    return json.dumps(model_to_document(spec), indent=2)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _vec(v, n, name):
    arr = np.zeros(0) if v is None else np.atleast_1d(np.asarray(v, dtype=float))
    if arr.size != n:
        raise InvalidInputError(f"{name} has length {arr.size}, expected {n}")
    return [float(a) for a in arr]


def eval_real(spec, which, x, u, theta, t):
    """Evaluate ``f``, ``h`` or ``f0`` over the reals."""
    fns = spec.real_functions(which)
    xv = _vec(x, spec.n_x, "x") if which != "f0" else []
    uv = _vec(u, spec.n_u, "u") if which != "f0" else []
    pv = _vec(theta, spec.n_p, "theta")
    return np.array([fn(xv, uv, pv, t) for fn in fns])


def _ld_parts(v, n, name, k):
    if v is None:
        v = LDVector(np.zeros(n), np.zeros((n, k)))
    if not isinstance(v, LDVector):
        raise InvalidInputError(f"{name} must be an LDVector")
    if v.m != n:
        raise InvalidInputError(f"{name} has length {v.m}, expected {n}")
    if v.k != k:
        raise InvalidInputError(f"{name} has k={v.k}, expected {k}")
    return [float(a) for a in v.value], [r for r in v.deriv]


def eval_ld(spec, which, x, u, theta, t, eps=EPS_ZERO, branches=None):
    """Evaluate ``f``, ``h`` or ``f0`` in LD arithmetic.

    Input derivative rows are ignored: inputs never depend on parameters.
    ``branches``, if a list, collects the sign/selection decisions taken by
    the nonsmooth nodes.
    """
    if not isinstance(theta, LDVector):
        raise InvalidInputError("theta must be an LDVector")
    k = theta.k
    pv, pr = _ld_parts(theta, spec.n_p, "theta", k)
    if which == "f0":
        xv, xr, uv = [], [], []
    else:
        xv, xr = _ld_parts(x, spec.n_x, "x", k)
        uv, _ = _ld_parts(u, spec.n_u, "u", k)
    env = (xv, xr, uv, pv, pr, t, branches)
    pairs = [fn(env) for fn in spec.ld_functions(which, eps)]
    return LDVector(
        np.array([v for v, _ in pairs]),
        np.array([np.zeros(k) if r is None else r for _, r in pairs]).reshape(len(pairs), k),
    )
