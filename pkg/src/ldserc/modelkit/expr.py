"""Expression trees over the L-smooth elementals and their s-expression form.

Grammar (whitespace separates tokens)::

    expr    := atom | "(" op expr+ ")"
    atom    := "x<i>" | "u<j>" | "p<l>" | "t" | numeral
    op      := "+" | "-" | "*" | "/" | "neg" | "exp" | "log" | "sin" | "cos"
             | "sqrt" | "pow" | "abs" | "max" | "min" | "mid"

``+``, ``*``, ``max`` and ``min`` accept two or more operands and fold to
the left; ``-`` and ``/`` take exactly two, ``mid`` exactly three, the
remaining operators exactly one.  ``(pow e a)`` raises ``e`` to the fixed
numeral ``a``.  Numerals are anything :func:`float` accepts that is finite.
"""

import re
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, ModelError
from ..ldcore import (
    EPS_ZERO,
    LDVector,
    _k_abs,
    _k_add,
    _k_div,
    _k_max,
    _k_mid,
    _k_min,
    _k_mul,
    _k_neg,
    _k_sub,
    _k_unary,
)

LEAF_KINDS = ("const", "state", "input", "param", "time")
ARITY = {
    "add": 2, "sub": 2, "mul": 2, "div": 2, "max": 2, "min": 2,
    "neg": 1, "exp": 1, "log": 1, "sin": 1, "cos": 1, "sqrt": 1,
    "pow_const": 1, "abs": 1, "mid": 3,
}
SYMBOL_TO_KIND = {
    "+": "add", "-": "sub", "*": "mul", "/": "div", "neg": "neg",
    "exp": "exp", "log": "log", "sin": "sin", "cos": "cos", "sqrt": "sqrt",
    "pow": "pow_const", "abs": "abs", "max": "max", "min": "min", "mid": "mid",
}
KIND_TO_SYMBOL = {v: k for k, v in SYMBOL_TO_KIND.items()}
FOLDABLE = ("add", "mul", "max", "min")
SMOOTH_UNARY = ("exp", "log", "sin", "cos", "sqrt")

_INDEXED = re.compile(r"^([xup])(\d+)$")
_LEAF_PREFIX = {"x": "state", "u": "input", "p": "param"}
_PREFIX_OF = {v: k for k, v in _LEAF_PREFIX.items()}


@dataclass(frozen=True)
class Expr:
    """One node of an expression tree.

    ``value`` holds the constant of a ``const`` node and the exponent of a
    ``pow_const`` node; ``index`` holds the slot of ``state``/``input``/``param``.
    """

    kind: str
    args: tuple = ()
    index: int = None
    value: float = None

    def __post_init__(self):
        if self.kind in LEAF_KINDS:
            if self.args:
                raise ModelError(f"leaf {self.kind!r} takes no arguments")
        elif self.kind in ARITY:
            if len(self.args) != ARITY[self.kind]:
                raise ModelError(
                    f"{self.kind!r} takes {ARITY[self.kind]} argument(s), got {len(self.args)}"
                )
        else:
            raise ModelError(f"unknown elemental {self.kind!r}")

    def __str__(self):
        return to_sexpr(self)

    def walk(self):
        yield self
        for a in self.args:
            yield from a.walk()

    def leaves(self, kind):
        return {e.index for e in self.walk() if e.kind == kind}

    def substitute(self, kind, replacements):
        """Replace every leaf ``kind`` with index ``i`` by ``replacements[i]``."""
        if self.kind == kind:
            return replacements[self.index]
        if not self.args:
            return self
        return Expr(self.kind, tuple(a.substitute(kind, replacements) for a in self.args),
                    self.index, self.value)


def const(v):
    return Expr("const", value=float(v))


def state(i):
    return Expr("state", index=i)


def param(i):
    return Expr("param", index=i)


def inp(i):
    return Expr("input", index=i)


# ---------------------------------------------------------------------------
# text form
# ---------------------------------------------------------------------------


def _tokenize(text):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _atom(tok, where):
    if tok == "t":
        return Expr("time")
    m = _INDEXED.match(tok)
    if m:
        return Expr(_LEAF_PREFIX[m.group(1)], index=int(m.group(2)))
    try:
        v = float(tok)
    except ValueError:
        raise ModelError(f"unknown atom {tok!r}", where) from None
    if v != v or v in (float("inf"), float("-inf")):
        raise ModelError(f"non-finite numeral {tok!r}", where)
    return const(v)


def parse_expr(text, where="expr"):
    """Parse one s-expression into an :class:`Expr`."""
    tokens = _tokenize(text)
    if not tokens:
        raise ModelError("empty expression", where)
    expr, pos = _parse(tokens, 0, where)
    if pos != len(tokens):
        raise ModelError(f"trailing tokens after expression: {' '.join(tokens[pos:])!r}", where)
    return expr


def _parse(tokens, pos, where):
    if pos >= len(tokens):
        raise ModelError("unexpected end of expression", where)
    tok = tokens[pos]
    if tok == ")":
        raise ModelError("unexpected ')'", where)
    if tok != "(":
        return _atom(tok, where), pos + 1
    if pos + 1 >= len(tokens):
        raise ModelError("unexpected end of expression", where)
    sym = tokens[pos + 1]
    kind = SYMBOL_TO_KIND.get(sym)
    if kind is None:
        raise ModelError(f"unknown elemental {sym!r}", where)
    pos += 2
    args = []
    while True:
        if pos >= len(tokens):
            raise ModelError(f"unclosed '({sym}'", where)
        if tokens[pos] == ")":
            pos += 1
            break
        arg, pos = _parse(tokens, pos, f"{where}/arg{len(args)}")
        args.append(arg)
    return _build(kind, sym, args, where), pos


def _build(kind, sym, args, where):
    if kind == "pow_const":
        if len(args) != 2 or args[1].kind != "const":
            raise ModelError("(pow e a) needs an expression and a numeral exponent", where)
        return Expr("pow_const", (args[0],), value=args[1].value)
    if kind in FOLDABLE:
        if len(args) < 2:
            raise ModelError(f"({sym} ...) needs at least two operands", where)
        node = Expr(kind, (args[0], args[1]))
        for a in args[2:]:
            node = Expr(kind, (node, a))
        return node
    if len(args) != ARITY[kind]:
        raise ModelError(f"({sym} ...) takes {ARITY[kind]} operand(s), got {len(args)}", where)
    return Expr(kind, tuple(args))


def to_sexpr(e):
    """Render an :class:`Expr` in the grammar accepted by :func:`parse_expr`."""
    if e.kind == "const":
        return repr(e.value)
    if e.kind == "time":
        return "t"
    if e.kind in _PREFIX_OF:
        return f"{_PREFIX_OF[e.kind]}{e.index}"
    if e.kind == "pow_const":
        return f"(pow {to_sexpr(e.args[0])} {e.value!r})"
    return "(" + " ".join([KIND_TO_SYMBOL[e.kind]] + [to_sexpr(a) for a in e.args]) + ")"


def check_indices(e, limits, where):
    """Raise :class:`ModelError` if a leaf index exceeds ``limits[kind]``."""
    _check(e, limits, where)


def _check(e, limits, path):
    if e.kind in limits:
        n = limits[e.kind]
        if not 0 <= e.index < n:
            raise ModelError(f"{e.kind} index {e.index} out of range (have {n})", path)
    for i, a in enumerate(e.args):
        _check(a, limits, f"{path}/arg{i}({a.kind})")


# ---------------------------------------------------------------------------
# compilation to closures
# ---------------------------------------------------------------------------
#
# Real closures take (x, u, p, t) sequences of floats.  LD closures take one
# environment tuple (xv, xr, uv, pv, pr, t, rec): values and derivative rows
# (None for a zero row) of states and parameters, input values, time, and an
# optional list collecting branch decisions of abs/max/min/mid nodes.


def _wrap_domain(path, fn):
    def run(*a):
        try:
            return fn(*a)
        except DomainError as exc:
            if exc.path:
                raise
            raise DomainError(str(exc), path) from None
    return run


def compile_real(e, path="expr", eps=EPS_ZERO):
    k = e.kind
    if k == "const":
        v = e.value
        return lambda x, u, p, t: v
    if k == "state":
        i = e.index
        return lambda x, u, p, t: x[i]
    if k == "input":
        i = e.index
        return lambda x, u, p, t: u[i]
    if k == "param":
        i = e.index
        return lambda x, u, p, t: p[i]
    if k == "time":
        return lambda x, u, p, t: t
    subs = [compile_real(a, f"{path}/arg{i}({a.kind})", eps) for i, a in enumerate(e.args)]
    if k in ("add", "sub", "mul", "max", "min"):
        fa, fb = subs
        if k == "add":
            return lambda x, u, p, t: fa(x, u, p, t) + fb(x, u, p, t)
        if k == "sub":
            return lambda x, u, p, t: fa(x, u, p, t) - fb(x, u, p, t)
        if k == "mul":
            return lambda x, u, p, t: fa(x, u, p, t) * fb(x, u, p, t)
        kern = _k_max if k == "max" else _k_min
        return lambda x, u, p, t: kern(fa(x, u, p, t), None, fb(x, u, p, t), None, eps)[0]
    if k == "div":
        fa, fb = subs
        kd = _wrap_domain(path, _k_div)
        return lambda x, u, p, t: kd(fa(x, u, p, t), None, fb(x, u, p, t), None, eps)[0]
    if k == "neg":
        (fa,) = subs
        return lambda x, u, p, t: -fa(x, u, p, t)
    if k == "abs":
        (fa,) = subs
        return lambda x, u, p, t: abs(fa(x, u, p, t))
    if k == "mid":
        fa, fb, fc = subs
        return lambda x, u, p, t: _k_mid(
            fa(x, u, p, t), None, fb(x, u, p, t), None, fc(x, u, p, t), None, eps)[0]
    (fa,) = subs
    ku = _wrap_domain(path, _k_unary)
    pw = e.value
    return lambda x, u, p, t: ku(k, fa(x, u, p, t), None, eps, pw)[0]


def compile_ld(e, path="expr", eps=EPS_ZERO):
    k = e.kind
    if k == "const":
        out = (e.value, None)
        return lambda env: out
    if k == "state":
        i = e.index
        return lambda env: (env[0][i], env[1][i])
    if k == "input":
        i = e.index
        return lambda env: (env[2][i], None)
    if k == "param":
        i = e.index
        return lambda env: (env[3][i], env[4][i])
    if k == "time":
        return lambda env: (env[5], None)
    subs = [compile_ld(a, f"{path}/arg{i}({a.kind})", eps) for i, a in enumerate(e.args)]
    if k in ("add", "sub", "mul"):
        fa, fb = subs
        kern = {"add": _k_add, "sub": _k_sub, "mul": _k_mul}[k]

        def binary(env):
            a, ra = fa(env)
            b, rb = fb(env)
            return kern(a, ra, b, rb)
        return binary
    if k in ("max", "min"):
        fa, fb = subs
        kern = _k_max if k == "max" else _k_min

        def extremum(env):
            a, ra = fa(env)
            b, rb = fb(env)
            return kern(a, ra, b, rb, eps, env[6])
        return extremum
    if k == "div":
        fa, fb = subs
        kd = _wrap_domain(path, _k_div)

        def quotient(env):
            a, ra = fa(env)
            b, rb = fb(env)
            return kd(a, ra, b, rb, eps)
        return quotient
    if k == "neg":
        (fa,) = subs
        return lambda env: _k_neg(*fa(env))
    if k == "abs":
        (fa,) = subs

        def absolute(env):
            a, ra = fa(env)
            return _k_abs(a, ra, eps, env[6])
        return absolute
    if k == "mid":
        fa, fb, fc = subs

        def median(env):
            a, ra = fa(env)
            b, rb = fb(env)
            c, rc = fc(env)
            return _k_mid(a, ra, b, rb, c, rc, eps, env[6])
        return median
    (fa,) = subs
    ku = _wrap_domain(path, _k_unary)
    pw = e.value

    def smooth(env):
        a, ra = fa(env)
        return ku(k, a, ra, eps, pw)
    return smooth


def vector_function(exprs, n, eps=EPS_ZERO):
    """Turn expressions in ``x0..x{n-1}`` into a map ``LDVector -> LDVector``.

    Only state leaves (and constants) may appear; this is the free-standing
    function form used for approximation checks.
    """
    exprs = [parse_expr(e, f"expr[{i}]") if isinstance(e, str) else e
             for i, e in enumerate(exprs)]
    for i, e in enumerate(exprs):
        for node in e.walk():
            if node.kind in ("input", "param", "time"):
                raise ModelError("only x<i> variables are allowed here", f"expr[{i}]")
        check_indices(e, {"state": n}, f"expr[{i}]")
    fns = [compile_ld(e, f"expr[{i}]", eps) for i, e in enumerate(exprs)]

    def f(x):
        env = ([float(v) for v in x.value], list(x.deriv), [], [], [], 0.0, None)
        pairs = [fn(env) for fn in fns]
        return LDVector(np.array([v for v, _ in pairs]),
                        np.array([np.zeros(x.k) if r is None else r for _, r in pairs]))

    return f
