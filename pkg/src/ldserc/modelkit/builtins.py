"""Reference models and closed-form solutions."""

import math

from ..errors import DomainError, InvalidInputError, PreconditionError
from .model import parse_model

STOMMEL_SAMPLES = [0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0]
STOMMEL_TMIN = 0.5

_STOMMEL_INPUTS = [
    {"offset": 0.0, "amplitude": 2.0, "frequency": 20.0},
    {"offset": 0.0, "amplitude": 1.0, "frequency": 20.0},
]

DOCUMENTS = {
    # x' = max(0, 1 - exp(-(x - p0))), x(0) = p1, y = x
    "riot": {
        "name": "riot",
        "dims": {"n_x": 1, "n_u": 0, "n_p": 2, "n_y": 1},
        "f": ["(max 0 (- 1 (exp (neg (- x0 p0)))))"],
        "h": ["x0"],
        "f0": ["p1"],
        "inputs": [],
        "theta_star": [1.0, 1.0],
        "t0": 0.0,
        "tf": 1.0,
    },
    # static output y = |p0|; the state is a dummy held at zero
    "abs_toy": {
        "name": "abs_toy",
        "dims": {"n_x": 1, "n_u": 0, "n_p": 1, "n_y": 1},
        "f": ["0"],
        "h": ["(abs p0)"],
        "f0": ["0"],
        "inputs": [],
        "theta_star": [0.0],
        "t0": 0.0,
        "tf": 1.0,
    },
    # static output y = max(p0^3, p0^5)
    "maxpoly": {
        "name": "maxpoly",
        "dims": {"n_x": 1, "n_u": 0, "n_p": 1, "n_y": 1},
        "f": ["0"],
        "h": ["(max (pow p0 3) (pow p0 5))"],
        "f0": ["0"],
        "inputs": [],
        "theta_star": [0.0],
        "t0": 0.0,
        "tf": 1.0,
    },
    # nonsmooth Stommel box: T' = p0 + u0 - T - T|T - V|,
    # V' = p1 + u1 - p2 V - V|T - V|, y = max(T, T_min)
    "stommel": {
        "name": "stommel",
        "dims": {"n_x": 2, "n_u": 2, "n_p": 3, "n_y": 1},
        "f": [
            "(- (- (+ p0 u0) x0) (* x0 (abs (- x0 x1))))",
            "(- (- (+ p1 u1) (* p2 x1)) (* x1 (abs (- x0 x1))))",
        ],
        "h": [f"(max x0 {STOMMEL_TMIN})"],
        "f0": ["1", "2"],
        "inputs": _STOMMEL_INPUTS,
        "theta_star": [3.0, 1.1, 0.3],
        "t0": 0.0,
        "tf": 1.0,
        "samples": STOMMEL_SAMPLES,
    },
    # Stommel box with the initial state (T0, V0) as the unknowns
    "stommel_obs": {
        "name": "stommel_obs",
        "dims": {"n_x": 2, "n_u": 2, "n_p": 2, "n_y": 1},
        "f": [
            "(- (- (+ 3 u0) x0) (* x0 (abs (- x0 x1))))",
            "(- (- (+ 1.1 u1) (* 0.3 x1)) (* x1 (abs (- x0 x1))))",
        ],
        "h": [f"(max x0 {STOMMEL_TMIN})"],
        "f0": ["p0", "p1"],
        "inputs": _STOMMEL_INPUTS,
        "theta_star": [1.0, 2.0],
        "t0": 0.0,
        "tf": 1.0,
        "samples": STOMMEL_SAMPLES,
    },
    # smooth control case: x' = -p0 x, x(0) = 1, y = p1 x
    "linear2": {
        "name": "linear2",
        "dims": {"n_x": 1, "n_u": 0, "n_p": 2, "n_y": 1},
        "f": ["(neg (* p0 x0))"],
        "h": ["(* p1 x0)"],
        "f0": ["1"],
        "inputs": [],
        "theta_star": [0.5, 2.0],
        "t0": 0.0,
        "tf": 1.0,
    },
}

BUILTIN_NAMES = tuple(DOCUMENTS)


def builtin(name):
    """Return the named reference :class:`ModelSpec`."""
    try:
        doc = DOCUMENTS[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown built-in model {name!r}; choose from {', '.join(BUILTIN_NAMES)}"
        ) from None
    return parse_model(doc)


def riot_closed_form(theta, t):
    """Exact solution of the riot model at time ``t >= 0``."""
    if len(theta) != 2:
        raise InvalidInputError("riot has two parameters")
    if t < 0:
        raise PreconditionError("closed form holds for t >= 0")
    th1, th2 = float(theta[0]), float(theta[1])
    if th1 > th2:
        return th2
    arg = math.exp(t) + math.exp(th1 - th2) - math.exp(t + th1 - th2)
    if not arg > 0:
        raise DomainError(f"closed form leaves its domain at t={t}")
    return math.log(arg) + th2


def linear2_sensitivity(theta, t):
    """Classical output sensitivity ``dy/dtheta`` of ``linear2`` at time ``t``."""
    a, b = float(theta[0]), float(theta[1])
    e = math.exp(-a * t)
    return [-b * t * e, e]
