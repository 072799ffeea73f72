"""Fixed-step RK4 integration of a model jointly with its LD sensitivity system.

For a probing direction ``d`` the sensitivity state ``X(t)`` is the
LD-derivative of the state with respect to the parameters along ``[d  I]``
(identifiability) or with respect to the initial state (observability).  Each
RK4 stage evaluates the model right-hand side in LD arithmetic, seeding the
state rows with the current ``X``, the parameter rows with ``[d  I]`` and the
input rows with zeros.  Kinks are integrated through; no event location.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import (
    DivergenceError,
    DomainError,
    IntegrationError,
    InvalidInputError,
    PreconditionError,
)
from .ldcore import EPS_ZERO

MODES = ("identifiability", "observability")
DEFAULT_STEP = 1e-3


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[t0, tf]`` with step ``h``.

    ``t0 == tf`` gives an empty grid with no nodes.
    """

    t0: float
    tf: float
    h: float = DEFAULT_STEP

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidInputError(f"step must be positive, got {self.h}")
        if not self.tf >= self.t0:
            raise InvalidInputError(f"tf={self.tf} precedes t0={self.t0}")
        span = self.tf - self.t0
        n = int(round(span / self.h))
        if abs(n * self.h - span) > 1e-12 * max(1.0, span):
            raise InvalidInputError(f"step {self.h} does not divide [{self.t0}, {self.tf}]")
        object.__setattr__(self, "n_steps", n)

    @classmethod
    def for_model(cls, spec, h=DEFAULT_STEP):
        return cls(spec.t0, spec.tf, h)

    @property
    def nodes(self):
        if self.n_steps == 0:
            return np.zeros(0)
        return np.linspace(self.t0, self.tf, self.n_steps + 1)

    def snap(self, times):
        """Grid-node indices nearest to ``times`` (each within ``h/2``)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.size == 0:
            return np.zeros(0, dtype=int)
        if self.n_steps == 0:
            raise PreconditionError("cannot sample an empty grid")
        step = (self.tf - self.t0) / self.n_steps
        idx = np.rint((times - self.t0) / step).astype(int)
        if np.any(idx < 0) or np.any(idx > self.n_steps):
            bad = times[(idx < 0) | (idx > self.n_steps)][0]
            raise PreconditionError(f"time {bad} is not on the grid [{self.t0}, {self.tf}]")
        return idx


@dataclass(frozen=True, eq=False)
class SensitivityTrajectory:
    """Grid-sampled reference solution and LD sensitivities.

    ``X_star[n]`` is ``n_x x (1+n_p)`` and ``Y_star[n]`` is ``n_y x (1+n_p)``;
    ``kink_times`` lists the nodes where some abs/max branch decision
    differs from the previous node (advisory only).
    """

    times: np.ndarray
    x_star: np.ndarray
    y_star: np.ndarray
    X_star: np.ndarray
    Y_star: np.ndarray
    mode: str
    d: np.ndarray
    theta: np.ndarray
    grid: Grid
    kink_times: tuple = ()

    @property
    def S_y(self):
        """Output L-sensitivities ``lshift(Y*(t))`` at every node."""
        return self.Y_star[:, :, 1:]


def _check_mode(spec, mode):
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "observability" and not spec.observability_ready:
        raise PreconditionError(
            f"model {spec.name!r} is not set up for observability (need n_p == n_x and f0 = p)"
        )


def _theta(spec, theta):
    th = np.asarray(spec.theta_star if theta is None else theta, dtype=float)
    if th.shape != (spec.n_p,):
        raise InvalidInputError(f"theta must have length {spec.n_p}")
    return th


def integrate_reference(spec, grid, theta=None):
    """RK4 solution of the model at ``theta`` (default: the reference point).

    Returns ``(times, x)`` with ``x`` of shape ``(len(times), n_x)``.
    """
    th = _theta(spec, theta).tolist()
    times = grid.nodes
    if times.size == 0:
        return times, np.zeros((0, spec.n_x))
    fns = spec.real_functions("f")
    x = np.array([fn([], [], th, spec.t0) for fn in spec.real_functions("f0")], dtype=float)

    def rhs(t, xs):
        xl = xs.tolist()
        u = spec.inputs_at(t)
        return np.array([fn(xl, u, th, t) for fn in fns])

    out = np.empty((times.size, spec.n_x))
    out[0] = x
    h = (grid.tf - grid.t0) / grid.n_steps if grid.n_steps else 0.0
    for n in range(grid.n_steps):
        t = times[n]
        try:
            k1 = rhs(t, x)
            k2 = rhs(t + h / 2, x + h / 2 * k1)
            k3 = rhs(t + h / 2, x + h / 2 * k2)
            k4 = rhs(t + h, x + h * k3)
        except DomainError as exc:
            raise IntegrationError(f"domain error: {exc}", t) from exc
        except OverflowError as exc:
            raise DivergenceError("overflow in right-hand side", t) from exc
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError("state became non-finite", times[n + 1])
        out[n + 1] = x
    return times, out


def integrate_sensitivity(spec, grid, d, mode="identifiability", theta=None, eps=EPS_ZERO):
    """Integrate the model and its LD sensitivity system along direction ``d``."""
    _check_mode(spec, mode)
    th = _theta(spec, theta)
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.size != spec.n_p:
        raise InvalidInputError(f"direction has length {d.size}, model has n_p={spec.n_p}")
    if not np.all(np.isfinite(d)):
        raise InvalidInputError("direction has non-finite entries")
    n_x, k = spec.n_x, spec.n_p + 1
    M = np.column_stack([d, np.eye(spec.n_p)])
    pv = th.tolist()
    if mode == "identifiability":
        pr = list(M)
        x0 = spec.ld_functions("f0", eps)
        pairs = [fn(([], [], [], pv, pr, spec.t0, None)) for fn in x0]
        x = np.array([v for v, _ in pairs])
        X = np.array([np.zeros(k) if r is None else r for _, r in pairs]).reshape(n_x, k)
    else:
        pr = [None] * spec.n_p
        x = np.array([fn([], [], pv, spec.t0) for fn in spec.real_functions("f0")])
        X = M.copy()

    f_fns = spec.ld_functions("f", eps)
    h_fns = spec.ld_functions("h", eps)
    zero = np.zeros(k)

    def rhs(t, xs, Xs, rec=None):
        env = (xs.tolist(), list(Xs), spec.inputs_at(t), pv, pr, t, rec)
        pairs = [fn(env) for fn in f_fns]
        return (np.array([v for v, _ in pairs]),
                np.array([zero if r is None else r for _, r in pairs]))

    def output(t, xs, Xs, rec):
        env = (xs.tolist(), list(Xs), spec.inputs_at(t), pv, pr, t, rec)
        pairs = [fn(env) for fn in h_fns]
        return (np.array([v for v, _ in pairs]),
                np.array([zero if r is None else r for _, r in pairs]))

    times = grid.nodes
    N = times.size
    xs_out = np.empty((N, n_x))
    ys_out = np.empty((N, spec.n_y))
    X_out = np.empty((N, n_x, k))
    Y_out = np.empty((N, spec.n_y, k))
    kinks = []
    prev = None
    h = (grid.tf - grid.t0) / grid.n_steps if grid.n_steps else 0.0
    # overflow surfaces as a non-finite state and is reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(N):
            t = times[n]
            rec = []
            try:
                yv, Y = output(t, x, X, rec)
                k1, K1 = rhs(t, x, X, rec)
                if n < N - 1:
                    k2, K2 = rhs(t + h / 2, x + h / 2 * k1, X + h / 2 * K1)
                    k3, K3 = rhs(t + h / 2, x + h / 2 * k2, X + h / 2 * K2)
                    k4, K4 = rhs(t + h, x + h * k3, X + h * K3)
            except DomainError as exc:
                raise IntegrationError(f"domain error: {exc}", t) from exc
            except OverflowError as exc:
                raise DivergenceError("overflow in right-hand side", t) from exc
            xs_out[n], X_out[n], ys_out[n], Y_out[n] = x, X, yv, Y
            if prev is not None and rec != prev:
                kinks.append(float(t))
            prev = rec
            if n < N - 1:
                x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                X = X + h / 6 * (K1 + 2 * K2 + 2 * K3 + K4)
                if not (np.all(np.isfinite(x)) and np.all(np.isfinite(X))):
                    raise DivergenceError("state or sensitivity became non-finite", times[n + 1])
    return SensitivityTrajectory(
        times=times, x_star=xs_out, y_star=ys_out, X_star=X_out, Y_star=Y_out,
        mode=mode, d=d, theta=th, grid=grid, kink_times=tuple(kinks),
    )


def sample(traj, sample_times):
    """``Y*`` matrices at ``sample_times``, each snapped to its grid node."""
    idx = traj.grid.snap(sample_times)
    if idx.size == 0:
        return np.zeros((0,) + traj.Y_star.shape[1:])
    return traj.Y_star[idx].copy()


def trajectory_header(n_x, n_y, k):
    cols = ["t"] + [f"x[{i}]" for i in range(n_x)] + [f"y[{i}]" for i in range(n_y)]
    cols += [f"Y[{r}][{c}]" for r in range(n_y) for c in range(k)]
    return cols + ["kink"]


def trajectory_csv(traj):
    """Render a trajectory as CSV text (header line plus one row per node)."""
    n_x = traj.x_star.shape[1]
    n_y, k = traj.Y_star.shape[1:]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trajectory_header(n_x, n_y, k))
    kinks = set(traj.kink_times)
    for n, t in enumerate(traj.times):
        row = [repr(float(t))]
        row += [repr(float(v)) for v in traj.x_star[n]]
        row += [repr(float(v)) for v in traj.y_star[n]]
        row += [repr(float(v)) for v in traj.Y_star[n].ravel()]
        row.append("1" if float(t) in kinks else "0")
        w.writerow(row)
    return buf.getvalue()
