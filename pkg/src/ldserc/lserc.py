"""L-SERC rank tests and the three-stage probing algorithm.

A probe integrates the LD sensitivity system along a primary direction
``d``, samples the output L-sensitivities ``lshift(Y*(t_k))``, stacks them
into the matrix ``Upsilon_d`` and tests its column rank.  Full rank in some
direction certifies partial structural identifiability (or observability);
full rank in every ``+-e_i`` is natural identifiability.

:func:`algorithm1` runs the primary stage over a direction set, an optional
twin stage on slightly perturbed directions, and an optional singularity
stage that moves the reference point along the null space of deficient
matrices and repeats the analysis there.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import LDSercError, PreconditionError
from .ldcore import EPS_ZERO, lshift
from .sensint import DEFAULT_STEP, Grid, integrate_sensitivity, sample

RANK_TOL = 1e-6
ABS_FLOOR = 1e-12
DEDUP_TOL = 1e-12

CAVEAT_NATURAL = (
    "natural-not-structural: full rank in every +-e_i direction does not by itself "
    "imply structural {what}"
)
CAVEAT_DIRECTIONAL = (
    "direction-dependent: sensitivity matrices differ between probing directions, "
    "so the reference point lies on a nonsmoothness"
)


def _canonical_sign(v, tol=1e-12):
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


@dataclass(frozen=True, eq=False)
class LSercMatrix:
    """Stacked output L-sensitivities with their SVD and numerical rank."""

    entries: np.ndarray
    d: np.ndarray = None
    sample_times: tuple = ()
    singular_values: np.ndarray = None
    right_vectors: np.ndarray = None
    rank: int = None
    tol_used: float = RANK_TOL
    abs_floor: float = ABS_FLOOR

    @classmethod
    def from_entries(cls, entries, d=None, sample_times=(), rank_tol=RANK_TOL,
                     abs_floor=ABS_FLOOR):
        entries = np.array(entries, dtype=float)
        if entries.ndim != 2:
            raise PreconditionError("L-SERC matrix must be two-dimensional")
        n_s, n_p = entries.shape
        if n_s < n_p:
            raise PreconditionError(
                f"need (N+1)*n_y >= n_p rows, got {n_s} rows for n_p={n_p}"
            )
        _, s, vt = np.linalg.svd(entries, full_matrices=True)
        if s[0] <= abs_floor:
            rank = 0
        else:
            rank = int(np.count_nonzero(s > rank_tol * s[0]))
        return cls(entries, None if d is None else np.asarray(d, dtype=float),
                   tuple(float(t) for t in sample_times), s, vt.T, rank, rank_tol, abs_floor)

    @property
    def n_p(self):
        return self.entries.shape[1]

    @property
    def full_rank(self):
        return self.rank == self.n_p

    def null_vectors(self):
        """Right singular vectors of the (numerically) zero singular values.

        Each is sign-normalized so its first nonzero component is positive.
        """
        s = self.singular_values
        if s[0] <= self.abs_floor:
            zero = np.ones(s.size, dtype=bool)
        else:
            zero = s <= self.tol_used * s[0]
        return [_canonical_sign(self.right_vectors[:, i]) for i in np.flatnonzero(zero)]


def build_lserc(traj, sample_times, rank_tol=RANK_TOL, abs_floor=ABS_FLOOR):
    """Assemble ``Upsilon_d`` from a sensitivity trajectory."""
    sample_times = list(sample_times)
    n_y = traj.Y_star.shape[1]
    n_p = traj.Y_star.shape[2] - 1
    if len(sample_times) * n_y < n_p:
        raise PreconditionError(
            f"{len(sample_times)} samples x n_y={n_y} < n_p={n_p}; need (N+1)*n_y >= n_p"
        )
    Ys = sample(traj, sample_times)
    entries = np.vstack([lshift(Y) for Y in Ys])
    # record the grid nodes actually sampled
    used = traj.times[traj.grid.snap(sample_times)]
    return LSercMatrix.from_entries(entries, traj.d, used, rank_tol, abs_floor)


def rss_quadratic(m, delta_theta):
    """``(Upsilon dtheta)^T (Upsilon dtheta)``, the linearized residual sum of squares."""
    r = m.entries @ np.asarray(delta_theta, dtype=float)
    return float(r @ r)


@dataclass(frozen=True)
class AlgoConfig:
    """Settings for probes and :func:`algorithm1`.

    ``eps_twin = 0`` turns the twin stage off; ``eps_sing = 0`` or ``q = 0``
    turns the singularity stage off.  ``sing_relative`` scales the
    singularity step to ``eps_sing * |theta*| / |dtheta|``.
    """

    theta_star: tuple
    directions: tuple
    sample_times: tuple
    eps_twin: float = 0.0
    eps_sing: float = 0.0
    q: int = 0
    rank_tol: float = RANK_TOL
    abs_floor: float = ABS_FLOOR
    step: float = DEFAULT_STEP
    mode: str = "identifiability"
    sing_relative: bool = False
    eps_zero: float = EPS_ZERO

    def __post_init__(self):
        object.__setattr__(self, "theta_star", tuple(float(v) for v in self.theta_star))
        object.__setattr__(self, "directions",
                           tuple(tuple(float(v) for v in d) for d in self.directions))
        object.__setattr__(self, "sample_times", tuple(float(v) for v in self.sample_times))
        if self.eps_twin < 0 or self.eps_sing < 0 or self.q < 0:
            raise PreconditionError("eps_twin, eps_sing and q must be nonnegative")
        if not self.directions:
            raise PreconditionError("need at least one probing direction")

    @classmethod
    def for_model(cls, spec, **overrides):
        """Defaults: natural directions, the model's samples (else 10 uniform), h=1e-3."""
        if overrides.get("sample_times") is None:
            overrides["sample_times"] = (
                spec.sample_times if spec.sample_times is not None
                else np.linspace(spec.t0, spec.tf, 10)
            )
        if overrides.get("directions") is None:
            overrides["directions"] = natural_directions(spec.n_p)
        if overrides.get("theta_star") is None:
            overrides["theta_star"] = spec.theta_star
        return cls(**overrides)


def natural_directions(n_p):
    """``+e_1, -e_1, +e_2, -e_2, ...``"""
    out = []
    for i in range(n_p):
        e = np.zeros(n_p)
        e[i] = 1.0
        m = np.zeros(n_p)
        m[i] = -1.0
        out += [e, m]
    return out


@dataclass(frozen=True, eq=False)
class ProbeResult:
    d: np.ndarray
    rank: int
    n_p: int
    verdict: str
    matrix: LSercMatrix
    stage: str
    theta: np.ndarray
    error: str = None

    @property
    def full_rank(self):
        return self.verdict == "full_rank"

    def to_dict(self):
        m = self.matrix
        return {
            "d": self.d.tolist(),
            "rank": self.rank,
            "n_p": self.n_p,
            "singular_values": None if m is None else m.singular_values.tolist(),
            "verdict": self.verdict,
            "stage": self.stage,
            "sample_times": None if m is None else list(m.sample_times),
            "matrix": None if m is None else m.entries.tolist(),
            "error": self.error,
        }


def probe(spec, d, cfg, stage="primary", theta=None):
    """One L-SERC test in direction ``d`` at ``theta`` (default ``cfg.theta_star``)."""
    d = np.asarray(d, dtype=float)
    if not np.linalg.norm(d) > 0:
        raise PreconditionError("probing direction must be nonzero")
    theta = np.asarray(cfg.theta_star if theta is None else theta, dtype=float)
    grid = Grid(spec.t0, spec.tf, cfg.step)
    traj = integrate_sensitivity(spec, grid, d, cfg.mode, theta, cfg.eps_zero)
    m = build_lserc(traj, cfg.sample_times, cfg.rank_tol, cfg.abs_floor)
    verdict = "full_rank" if m.rank == m.n_p else "deficient"
    return ProbeResult(d, m.rank, m.n_p, verdict, m, stage, theta)


def _safe_probe(spec, d, cfg, stage, theta):
    try:
        return probe(spec, d, cfg, stage, theta)
    except LDSercError as exc:
        return ProbeResult(np.asarray(d, dtype=float), None, spec.n_p, "error", None, stage,
                           np.asarray(theta, dtype=float), f"{type(exc).__name__}: {exc}")


def twin_direction(d, eps_twin):
    """``d + eps_twin * e_j`` for the smallest ``j`` with ``e_j`` not parallel to ``d``."""
    if not eps_twin > 0:
        raise PreconditionError("eps_twin must be positive")
    d = np.asarray(d, dtype=float)
    if d.size == 1:
        return d * (1.0 + eps_twin)
    for j in range(d.size):
        others = np.delete(d, j)
        if np.any(others != 0):
            out = d.copy()
            out[j] += eps_twin
            return out
    raise PreconditionError("direction must be nonzero")


def singular_perturbations(m, theta_star, eps_sing, relative=False):
    """Move ``theta_star`` by ``+-eps`` along the summed null vectors of ``m``."""
    if m.full_rank:
        raise PreconditionError("matrix has full rank; nothing to perturb along")
    if not eps_sing > 0:
        raise PreconditionError("eps_sing must be positive")
    theta_star = np.asarray(theta_star, dtype=float)
    dtheta = np.sum(m.null_vectors(), axis=0)
    norm = np.linalg.norm(dtheta)
    if not norm > 1e-14:
        raise PreconditionError("degenerate null space: summed singular vectors vanish")
    eps = eps_sing * np.linalg.norm(theta_star) / norm if relative else eps_sing
    if not eps > 0:
        raise PreconditionError("relative singularity step vanishes at theta* = 0")
    return theta_star + eps * dtheta, theta_star - eps * dtheta


@dataclass(eq=False)
class AlgoReport:
    """Results of :func:`algorithm1` at one reference point, with child reports."""

    theta: np.ndarray
    mode: str
    n_p: int
    depth: int = 0
    probes: list = field(default_factory=list)
    d_sing: list = field(default_factory=list)
    svd: list = field(default_factory=list)
    theta_sing: list = field(default_factory=list)
    children: list = field(default_factory=list)
    natural_tested: bool = False
    summary: str = "none"
    caveats: list = field(default_factory=list)

    @property
    def noun(self):
        return "observable" if self.mode == "observability" else "identifiable"

    @property
    def label(self):
        if self.summary == "natural":
            return f"naturally {self.noun}"
        if self.summary == "partial":
            return f"partially {self.noun}"
        return "no full-rank direction found"

    def all_reports(self):
        yield self
        for c in self.children:
            yield from c.all_reports()

    def to_dict(self):
        return {
            "theta": self.theta.tolist(),
            "mode": self.mode,
            "n_p": self.n_p,
            "depth": self.depth,
            "summary": self.summary,
            "label": self.label,
            "natural_tested": self.natural_tested,
            "caveats": list(self.caveats),
            "probes": [p.to_dict() for p in self.probes],
            "d_sing": [d.tolist() for d in self.d_sing],
            "svd": [dict(s) for s in self.svd],
            "theta_sing": [{"sign": tag, "theta": th.tolist()} for tag, th in self.theta_sing],
            "children": [c.to_dict() for c in self.children],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _is_natural_set(directions, n_p):
    want = {tuple(d) for d in natural_directions(n_p)}
    got = {tuple(np.asarray(d, dtype=float)) for d in directions}
    return got == want


def summarize(report):
    """Recompute ``summary`` and ``caveats`` from the stored probes."""
    primary = [p for p in report.probes if p.stage != "twin"]
    if report.natural_tested and primary and all(p.full_rank for p in primary):
        summary = "natural"
    elif any(p.full_rank for p in report.probes):
        summary = "partial"
    else:
        summary = "none"
    caveats = []
    if summary == "natural":
        what = "observability" if report.mode == "observability" else "identifiability"
        caveats.append(CAVEAT_NATURAL.format(what=what))
    mats = [p.matrix.entries for p in report.probes if p.matrix is not None]
    if mats and any(not np.allclose(m, mats[0], rtol=1e-6, atol=1e-9) for m in mats[1:]):
        caveats.append(CAVEAT_DIRECTIONAL)
    return summary, caveats


def natural_test(spec, cfg):
    """Primary stage over all ``+-e_i``; returns a report without twin/singularity stages."""
    cfg = replace(cfg, directions=tuple(natural_directions(spec.n_p)), eps_twin=0.0,
                  eps_sing=0.0, q=0)
    return algorithm1(spec, cfg)


def algorithm1(spec, cfg):
    """Primary, twin and singularity probing starting at ``cfg.theta_star``."""
    theta0 = np.asarray(cfg.theta_star, dtype=float)
    if theta0.size != spec.n_p:
        raise PreconditionError(f"theta_star has length {theta0.size}, model has {spec.n_p}")
    root = AlgoReport(theta0, cfg.mode, spec.n_p)
    queue = [(root, cfg.q)]
    while queue:
        report, q = queue.pop(0)
        _run_stages(spec, cfg, report, q)
        queue.extend((c, q - 1) for c in report.children)
    return root


def _run_stages(spec, cfg, report, q):
    theta = report.theta
    primary_stage = "primary" if report.depth == 0 else "singularity-descendant"
    report.natural_tested = _is_natural_set(cfg.directions, spec.n_p)
    deficient = []
    for d in cfg.directions:
        d = np.asarray(d, dtype=float)
        p = _safe_probe(spec, d, cfg, primary_stage, theta)
        report.probes.append(p)
        if cfg.eps_sing > 0 and p.verdict == "deficient":
            deficient.append(p)
        if cfg.eps_twin > 0:
            pt = _safe_probe(spec, twin_direction(d, cfg.eps_twin), cfg, "twin", theta)
            report.probes.append(pt)
            if cfg.eps_sing > 0 and pt.verdict == "deficient":
                deficient.append(pt)
    report.d_sing = [p.d for p in deficient]
    report.summary, report.caveats = summarize(report)
    if not (cfg.eps_sing > 0 and q > 0):
        return
    for p in deficient:
        entry = {"d": p.d.tolist(), "singular_values": p.matrix.singular_values.tolist()}
        try:
            plus, minus = singular_perturbations(p.matrix, theta, cfg.eps_sing, cfg.sing_relative)
        except PreconditionError as exc:
            entry["error"] = str(exc)
            report.svd.append(entry)
            continue
        entry["null_vectors"] = [v.tolist() for v in p.matrix.null_vectors()]
        entry["perturbed"] = [plus.tolist(), minus.tolist()]
        report.svd.append(entry)
        for tag, th in (("+", plus), ("-", minus)):
            if all(np.max(np.abs(th - seen)) > DEDUP_TOL for _, seen in report.theta_sing):
                report.theta_sing.append((tag, th))
    report.children = [
        AlgoReport(th, report.mode, report.n_p, report.depth + 1) for _, th in report.theta_sing
    ]


def _fmt(v):
    return "[" + ", ".join(f"{x:.6g}" for x in np.asarray(v, dtype=float)) + "]"


def format_report(report, indent=""):
    """Stage-labelled text rendering (S1/S2/S3 lines) of a report tree."""
    lines = []
    n_p = report.n_p
    at = f" (theta*={_fmt(report.theta)})"
    for p in report.probes:
        tag = "S2" if p.stage == "twin" else "S1"
        if p.error:
            lines.append(f"{indent}{tag}{at}: d={_fmt(p.d)} -> error: {p.error}")
            continue
        rel = "=" if p.rank == n_p else "<"
        lines.append(f"{indent}{tag}{at}: d={_fmt(p.d)} -> rank {p.rank} {rel} n_p={n_p}")
    for s in report.svd:
        sv = _fmt(s["singular_values"])
        if "error" in s:
            lines.append(f"{indent}S3: SVD(d={_fmt(s['d'])}) sigma={sv} -> {s['error']}")
            continue
        vs = ", ".join(_fmt(v) for v in s["null_vectors"])
        lines.append(f"{indent}S3: SVD(d={_fmt(s['d'])}) sigma={sv}, zero-space v={vs}")
    if report.theta_sing:
        lines.append(f"{indent}S3: theta* -> " + ", ".join(_fmt(th) for _, th in report.theta_sing))
    lines.append(f"{indent}=> {report.label}{at}")
    for c in report.caveats:
        lines.append(f"{indent}   caveat: {c}")
    for c in report.children:
        lines.extend(format_report(c, indent + "    ").splitlines())
    return "\n".join(lines)
