"""Lexicographic directional derivative (LD-derivative) arithmetic.

An :class:`LDVector` carries a value ``f(x0)`` together with the LD-derivative
``f'(x0; M)``, an ``m x k`` matrix whose columns follow the ``k`` probing
directions of a directions matrix ``M``.  Smooth elementals propagate rows by
their Jacobian; ``abs`` and ``max`` (and, through identities, ``min`` and
``mid``) select rows by lexicographic sign tests.

Branch tests use an absolute dead-zone ``eps`` (default :data:`EPS_ZERO`):
an entry ``|v| <= eps`` counts as zero.

The scalar kernels ``_k_*`` operate on ``(value, row)`` pairs where ``value``
is a Python float and ``row`` is a 1-D array or ``None`` for a structurally
zero row.  Both :class:`LDVector` and the compiled model evaluators in
:mod:`ldserc.modelkit` go through the same kernels, so their values and
derivatives agree bit for bit.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError, PreconditionError

EPS_ZERO = 1e-12
RANK_TOL = 1e-10

UNARY_KINDS = ("exp", "log", "sin", "cos", "sqrt", "pow_const")
ARITH_OPS = ("add", "sub", "mul", "div", "neg")


# ---------------------------------------------------------------------------
# scalar kernels
# ---------------------------------------------------------------------------


def _neg_row(r):
    return None if r is None else -r


def _first_sign(row, eps):
    if row is None:
        return 0
    nz = np.flatnonzero(np.abs(row) > eps)
    if nz.size == 0:
        return 0
    return 1 if row[nz[0]] > 0 else -1


def _k_fsign(v, row, eps):
    if v > eps:
        return 1
    if v < -eps:
        return -1
    return _first_sign(row, eps)


def _k_lexcmp(a, ra, b, rb, eps):
    """Sign of the lexicographic difference ``[a, ra] - [b, rb]``."""
    dv = a - b
    if dv > eps:
        return 1
    if dv < -eps:
        return -1
    if ra is None:
        return -_first_sign(rb, eps)
    if rb is None:
        return _first_sign(ra, eps)
    return _first_sign(ra - rb, eps)


def _k_abs(a, ra, eps, rec=None):
    s = _k_fsign(a, ra, eps)
    if rec is not None:
        rec.append(s)
    if s == 0 or ra is None:
        return abs(a), None
    return abs(a), (ra if s > 0 else -ra)


def _k_max(a, ra, b, rb, eps, rec=None):
    # ties select the first argument
    pick_a = _k_lexcmp(a, ra, b, rb, eps) >= 0
    if rec is not None:
        rec.append(0 if pick_a else 1)
    value = a if a >= b else b
    return value, (ra if pick_a else rb)


def _k_min(a, ra, b, rb, eps, rec=None):
    v, r = _k_max(-a, _neg_row(ra), -b, _neg_row(rb), eps, rec)
    return -v, _neg_row(r)


def _k_mid(a, ra, b, rb, c, rc, eps, rec=None):
    lo, rlo = _k_min(a, ra, b, rb, eps, rec)
    hi, rhi = _k_max(a, ra, b, rb, eps, rec)
    m, rm = _k_min(hi, rhi, c, rc, eps, rec)
    return _k_max(lo, rlo, m, rm, eps, rec)


def _k_add(a, ra, b, rb):
    if ra is None:
        return a + b, rb
    if rb is None:
        return a + b, ra
    return a + b, ra + rb


def _k_sub(a, ra, b, rb):
    if rb is None:
        return a - b, ra
    if ra is None:
        return a - b, -rb
    return a - b, ra - rb


def _k_mul(a, ra, b, rb):
    if ra is None:
        return a * b, (None if rb is None else a * rb)
    if rb is None:
        return a * b, b * ra
    return a * b, b * ra + a * rb


def _k_div(a, ra, b, rb, eps):
    if not abs(b) > eps:
        raise DomainError(f"division by {b!r}")
    v = a / b
    if ra is None and rb is None:
        return v, None
    if rb is None:
        return v, ra / b
    if ra is None:
        return v, (-v * rb) / b
    return v, (ra - v * rb) / b


def _k_neg(a, ra):
    return -a, _neg_row(ra)


def _pow_value(a, p, eps):
    if float(p).is_integer():
        if p < 1 and not abs(a) > eps:
            raise DomainError(f"pow({a!r}, {p!r}) at zero base")
        return a ** p, p * a ** (p - 1)
    if p > 1 and a == 0.0:
        return 0.0, 0.0
    if not a > eps:
        raise DomainError(f"pow({a!r}, {p!r}) needs a positive base")
    return a ** p, p * a ** (p - 1)


def _k_unary(kind, a, ra, eps, p=None):
    if kind == "exp":
        v = math.exp(a)
        dv = v
    elif kind == "log":
        if not a > eps:
            raise DomainError(f"log of {a!r}")
        v = math.log(a)
        dv = 1.0 / a
    elif kind == "sin":
        v = math.sin(a)
        dv = math.cos(a)
    elif kind == "cos":
        v = math.cos(a)
        dv = -math.sin(a)
    elif kind == "sqrt":
        if not a > eps:
            raise DomainError(f"sqrt of {a!r}")
        v = math.sqrt(a)
        dv = 0.5 / v
    elif kind == "pow_const":
        if p is None:
            raise InvalidInputError("pow_const needs an exponent")
        v, dv = _pow_value(a, p, eps)
    else:
        raise InvalidInputError(f"unknown smooth elemental {kind!r}")
    return v, (None if ra is None else dv * ra)


def real_unary(kind, a, eps=EPS_ZERO, p=None):
    """Real-valued counterpart of the smooth kernels (same float operations)."""
    return _k_unary(kind, a, None, eps, p)[0]


# ---------------------------------------------------------------------------
# primitives on plain sequences
# ---------------------------------------------------------------------------


def _as_finite_1d(v, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def fsign(v, eps=EPS_ZERO):
    """Sign of the first entry of ``v`` with ``|entry| > eps``; 0 if none."""
    arr = _as_finite_1d(v, "fsign argument")
    return _k_fsign(float(arr[0]), arr[1:], eps)


def slmax(a, b, eps=EPS_ZERO):
    """Shifted lexicographic maximum of two ``(value, derivative-row)`` rows.

    Returns the trailing ``k`` entries of whichever row is lexicographically
    larger; identical rows (within ``eps``) select ``a``.
    """
    a = _as_finite_1d(a, "slmax a")
    b = _as_finite_1d(b, "slmax b")
    if a.size != b.size:
        raise InvalidInputError(f"slmax rows differ in length ({a.size} vs {b.size})")
    if a.size < 2:
        raise InvalidInputError("slmax rows need a value and at least one derivative entry")
    pick_a = _k_lexcmp(float(a[0]), a[1:], float(b[0]), b[1:], eps) >= 0
    return (a if pick_a else b)[1:].copy()


def lshift(m):
    """Drop the first column of a matrix."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise InvalidInputError("lshift needs a matrix with at least two columns")
    return arr[:, 1:].copy()


# ---------------------------------------------------------------------------
# directions matrices and LD vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DirectionsMatrix:
    """``n x k`` matrix of probing directions, most important column first."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError("directions matrix must be n x k with n, k >= 1")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("directions matrix has non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def canonical(cls, d):
        """The matrix ``[d  I_n]`` with primary probing direction ``d``."""
        d = _as_finite_1d(d, "direction")
        return cls(np.column_stack([d, np.eye(d.size)]))

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def k(self):
        return self.entries.shape[1]

    @property
    def full_row_rank(self):
        return self.has_full_row_rank()

    def has_full_row_rank(self, tol=RANK_TOL):
        if self.k < self.n:
            return False
        s = np.linalg.svd(self.entries, compute_uv=False)
        return bool(s[0] > 0 and s[-1] > tol * s[0])

    @property
    def is_canonical(self):
        """True when the matrix has the form ``[d  I_n]``."""
        e = self.entries
        return e.shape[1] == e.shape[0] + 1 and np.array_equal(e[:, 1:], np.eye(self.n))


def _zero_or(row, k):
    return np.zeros(k) if row is None else row


@dataclass(frozen=True, eq=False)
class LDVector:
    """A value vector paired with its ``m x k`` LD-derivative matrix.

    Instances are immutable; every operation returns a new vector.  Plain
    floats mix into arithmetic as constants with zero derivative rows.
    """

    value: np.ndarray
    deriv: np.ndarray

    def __post_init__(self):
        value = np.array(self.value, dtype=float).reshape(-1)
        deriv = np.array(self.deriv, dtype=float)
        if deriv.ndim == 1:
            deriv = deriv[None, :]
        if deriv.ndim != 2 or deriv.shape[0] != value.size:
            raise InvalidInputError(
                f"deriv shape {deriv.shape} does not match value length {value.size}"
            )
        if deriv.shape[1] < 1:
            raise InvalidInputError("LDVector needs k >= 1 directions")
        value.setflags(write=False)
        deriv.setflags(write=False)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "deriv", deriv)

    @classmethod
    def constant(cls, value, k):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(value, np.zeros((value.size, k)))

    @classmethod
    def seed(cls, x0, M):
        """Independent variables ``x0`` probed along directions ``M``."""
        if not isinstance(M, DirectionsMatrix):
            M = DirectionsMatrix(M)
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        if x0.size != M.n:
            raise InvalidInputError(f"x0 has length {x0.size}, directions matrix has {M.n} rows")
        return cls(x0, M.entries)

    @classmethod
    def stack(cls, parts):
        parts = list(parts)
        if not parts:
            raise InvalidInputError("cannot stack an empty sequence")
        k = parts[0].k
        if any(p.k != k for p in parts):
            raise InvalidInputError("stacked LDVectors must share k")
        return cls(
            np.concatenate([p.value for p in parts]),
            np.vstack([p.deriv for p in parts]),
        )

    @property
    def m(self):
        return self.value.size

    @property
    def k(self):
        return self.deriv.shape[1]

    def __len__(self):
        return self.m

    def __getitem__(self, i):
        return LDVector(self.value[i : i + 1] if isinstance(i, int) else self.value[i],
                        self.deriv[i : i + 1] if isinstance(i, int) else self.deriv[i])

    def __iter__(self):
        return (self[i] for i in range(self.m))

    def __repr__(self):
        return f"LDVector(value={self.value.tolist()}, deriv={self.deriv.tolist()})"

    def pairs(self):
        return [(float(v), r) for v, r in zip(self.value, self.deriv)]

    def __add__(self, other):
        return ld_arith("add", self, other)

    def __radd__(self, other):
        return ld_arith("add", other, self)

    def __sub__(self, other):
        return ld_arith("sub", self, other)

    def __rsub__(self, other):
        return ld_arith("sub", other, self)

    def __mul__(self, other):
        return ld_arith("mul", self, other)

    def __rmul__(self, other):
        return ld_arith("mul", other, self)

    def __truediv__(self, other):
        return ld_arith("div", self, other)

    def __rtruediv__(self, other):
        return ld_arith("div", other, self)

    def __neg__(self):
        return ld_arith("neg", self)

    def __abs__(self):
        return ld_abs(self)

    def __pow__(self, p):
        return ld_smooth_unary("pow_const", self, p=p)


def _from_pairs(pairs, k):
    return LDVector(
        np.array([v for v, _ in pairs], dtype=float),
        np.array([_zero_or(r, k) for _, r in pairs], dtype=float).reshape(len(pairs), k),
    )


def _coerce(*args):
    k = None
    for a in args:
        if isinstance(a, LDVector):
            if k is not None and a.k != k:
                raise InvalidInputError(f"LDVectors disagree on k ({k} vs {a.k})")
            k = a.k
    if k is None:
        raise InvalidInputError("at least one argument must be an LDVector")
    out = [a if isinstance(a, LDVector) else LDVector.constant(a, k) for a in args]
    m = max(a.m for a in out)
    for a in out:
        if a.m not in (1, m):
            raise InvalidInputError(f"cannot broadcast length {a.m} against {m}")
    return out, m, k


def _broadcast_pairs(x, m):
    p = x.pairs()
    return p * m if len(p) == 1 and m > 1 else p


def _apply(kernel, args):
    vecs, m, k = _coerce(*args)
    cols = [_broadcast_pairs(v, m) for v in vecs]
    out = []
    for items in zip(*cols):
        flat = [z for pair in items for z in pair]
        out.append(kernel(*flat))
    return _from_pairs(out, k)


def ld_abs(x, eps=EPS_ZERO):
    """Absolute value: ``deriv = fsign(value, deriv row) * deriv row``."""
    return _apply(lambda a, ra: _k_abs(a, ra, eps), [x])


def ld_max(x, y, eps=EPS_ZERO):
    """Maximum, propagating derivatives through :func:`slmax`."""
    return _apply(lambda a, ra, b, rb: _k_max(a, ra, b, rb, eps), [x, y])


def ld_min(x, y, eps=EPS_ZERO):
    """Minimum via ``min(x, y) = -max(-x, -y)``."""
    return _apply(lambda a, ra, b, rb: _k_min(a, ra, b, rb, eps), [x, y])


def ld_mid(x, y, z, eps=EPS_ZERO):
    """Median of three via ``max(min(x, y), min(max(x, y), z))``."""
    return _apply(lambda a, ra, b, rb, c, rc: _k_mid(a, ra, b, rb, c, rc, eps), [x, y, z])


def ld_arith(op, x, y=None, eps=EPS_ZERO):
    """Elementwise ``add``, ``sub``, ``mul``, ``div`` or ``neg``."""
    if op == "neg":
        return _apply(_k_neg, [x])
    if op == "add":
        return _apply(_k_add, [x, y])
    if op == "sub":
        return _apply(_k_sub, [x, y])
    if op == "mul":
        return _apply(_k_mul, [x, y])
    if op == "div":
        return _apply(lambda a, ra, b, rb: _k_div(a, ra, b, rb, eps), [x, y])
    raise InvalidInputError(f"unknown arithmetic op {op!r}")


def ld_smooth_unary(kind, x, p=None, eps=EPS_ZERO):
    """Smooth elemental ``kind`` applied elementwise; ``p`` is the pow exponent."""
    if kind not in UNARY_KINDS:
        raise InvalidInputError(f"unknown smooth elemental {kind!r}")
    return _apply(lambda a, ra: _k_unary(kind, a, ra, eps, p), [x])


def exp(x):
    return ld_smooth_unary("exp", x)


def log(x):
    return ld_smooth_unary("log", x)


def sin(x):
    return ld_smooth_unary("sin", x)


def cos(x):
    return ld_smooth_unary("cos", x)


def sqrt(x):
    return ld_smooth_unary("sqrt", x)


# ---------------------------------------------------------------------------
# L-derivatives and the first-order approximant
# ---------------------------------------------------------------------------


def extract_l_derivative(ld, M, tol=RANK_TOL):
    """Solve ``J @ M = ld`` for the L-derivative ``J`` (``m x n``).

    For ``M = [d  I_n]`` the answer is ``lshift(ld)`` exactly; any other
    full-row-rank ``M`` goes through an SVD least-squares solve.
    """
    if not isinstance(M, DirectionsMatrix):
        M = DirectionsMatrix(M)
    ld = np.asarray(ld, dtype=float)
    if ld.ndim == 1:
        ld = ld[None, :]
    if ld.shape[1] != M.k:
        raise InvalidInputError(f"ld has {ld.shape[1]} columns, M has {M.k}")
    if not M.has_full_row_rank(tol):
        raise PreconditionError("directions matrix does not have full row rank")
    if M.is_canonical:
        return lshift(ld)
    J = np.linalg.lstsq(M.entries.T, ld.T, rcond=None)[0].T
    resid = np.linalg.norm(J @ M.entries - ld)
    if resid > 1e-10 * (1.0 + np.linalg.norm(ld)):
        raise InvalidInputError(f"ld is not of the form J @ M (residual {resid:.3g})")
    return J


def taylor_approx(f, x0, d):
    """First-order approximant ``f(x0) + J_L f(x0; [d I]) d`` of ``f(x0 + d)``.

    ``f`` maps an :class:`LDVector` of length ``n`` to an :class:`LDVector`.
    """
    x0 = _as_finite_1d(x0, "x0")
    d = _as_finite_1d(d, "d")
    if d.size != x0.size:
        raise InvalidInputError("x0 and d differ in length")
    M = DirectionsMatrix.canonical(d)
    out = f(LDVector.seed(x0, M))
    J = extract_l_derivative(out.deriv, M)
    return out.value + J @ d


def taylor_residual_profile(f, x0, d, scales):
    """Scaled residuals ``||f(x0 + a d) - taylor_approx(f, x0, a d)|| / a``."""
    x0 = _as_finite_1d(x0, "x0")
    d = _as_finite_1d(d, "d")
    scales = _as_finite_1d(scales, "scales")
    if np.any(scales <= 0) or np.any(np.diff(scales) >= 0):
        raise InvalidInputError("scales must be positive and strictly decreasing")
    out = []
    for a in scales:
        exact = f(LDVector.constant(x0 + a * d, 1)).value
        approx = taylor_approx(f, x0, a * d)
        out.append(float(np.linalg.norm(exact - approx) / a))
    return np.array(out)


def taylor_decay_ok(scales, residuals, floor=1e-12):
    """Check that scaled residuals shrink at least linearly with the scale.

    Each consecutive pair must satisfy ``r' <= min(0.6, 2 a'/a) r``, unless
    one of the two residuals is already below ``floor``.  With decade steps
    the factor is 0.2.
    """
    scales = _as_finite_1d(scales, "scales")
    r = _as_finite_1d(residuals, "residuals")
    if scales.size != r.size:
        raise InvalidInputError("scales and residuals differ in length")
    for i in range(r.size - 1):
        if r[i] <= floor or r[i + 1] <= floor:
            continue
        if r[i + 1] > min(0.6, 2 * scales[i + 1] / scales[i]) * r[i]:
            return False
    return True
