import copy
import csv
import io
import math

import numpy as np
import pytest

from ldserc.errors import DivergenceError, IntegrationError, InvalidInputError, PreconditionError
from ldserc.ldcore import LDVector
from ldserc.modelkit import (
    DOCUMENTS,
    builtin,
    eval_ld,
    linear2_sensitivity,
    parse_model,
    riot_closed_form,
)
from ldserc.sensint import (
    Grid,
    integrate_reference,
    integrate_sensitivity,
    sample,
    trajectory_csv,
)


@pytest.fixture(scope="module")
def riot():
    return builtin("riot")


@pytest.fixture(scope="module")
def grid():
    return Grid(0.0, 1.0, 1e-3)


def test_grid_basics():
    g = Grid(0.0, 1.0, 0.25)
    assert g.nodes.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert g.snap([0.5, 0.6]).tolist() == [2, 2]
    assert Grid(0.5, 0.5).nodes.size == 0
    with pytest.raises(InvalidInputError):
        Grid(0.0, 1.0, 0.3)
    with pytest.raises(InvalidInputError):
        Grid(1.0, 0.0)
    with pytest.raises(PreconditionError):
        g.snap([1.5])


def test_riot_reference_is_constant(riot, grid):
    _, x = integrate_reference(riot, grid)
    assert np.max(np.abs(x - 1.0)) <= 1e-9


def test_riot_reference_matches_closed_form(riot, grid):
    times, x = integrate_reference(riot, grid, theta=[0.0, 1.0])
    want = np.array([riot_closed_form([0.0, 1.0], t) for t in times])
    assert np.max(np.abs(x[:, 0] - want)) <= 1e-6


def test_constant_model_stays_put(grid):
    spec = builtin("abs_toy")
    _, x = integrate_reference(spec, grid)
    assert not np.any(x)


def test_riot_sensitivities(riot, grid):
    up = integrate_sensitivity(riot, grid, [1.0, 0.0])
    assert np.all(up.Y_star == np.array([[0.0, 0.0, 1.0]]))
    down = integrate_sensitivity(riot, grid, [-1.0, 0.0])
    et = np.exp(grid.nodes)
    want = np.column_stack([et - 1, 1 - et, et])
    assert np.max(np.abs(down.X_star[:, 0, :] - want)) <= 1e-6
    assert np.array_equal(down.Y_star, down.X_star)


def test_sample(riot, grid):
    traj = integrate_sensitivity(riot, grid, [-1.0, 0.0])
    Y = sample(traj, [0.0, 0.5])
    e = math.exp(0.5)
    np.testing.assert_allclose(Y[:, 0, :], [[0, 0, 1], [e - 1, 1 - e, e]], atol=1e-6)
    assert sample(traj, []).shape == (0, 1, 3)
    st = builtin("stommel")
    traj = integrate_sensitivity(st, grid, [1.0, 0.0, 0.0])
    Y = sample(traj, st.sample_times)
    assert Y.shape == (9, 1, 4)
    with pytest.raises(PreconditionError):
        sample(traj, [2.0])


def test_determinism(grid):
    st = builtin("stommel")
    a = integrate_sensitivity(st, grid, [0.3, -1.0, 0.2])
    b = integrate_sensitivity(st, grid, [0.3, -1.0, 0.2])
    assert a.X_star.tobytes() == b.X_star.tobytes()
    assert a.Y_star.tobytes() == b.Y_star.tobytes()
    assert a.kink_times == b.kink_times


def test_initial_conditions(grid):
    st = builtin("stommel")
    d = np.array([0.5, -1.0, 2.0])
    traj = integrate_sensitivity(st, grid, d)
    th = LDVector(st.theta_star, np.column_stack([d, np.eye(3)]))
    x0 = eval_ld(st, "f0", None, None, th, 0.0)
    assert traj.X_star[0].tobytes() == x0.deriv.tobytes()
    assert traj.x_star[0].tolist() == [1.0, 2.0]
    obs = builtin("stommel_obs")
    d = np.array([-1.0, 0.25])
    traj = integrate_sensitivity(obs, grid, d, mode="observability")
    assert traj.X_star[0].tolist() == np.column_stack([d, np.eye(2)]).tolist()
    assert traj.x_star[0].tolist() == [1.0, 2.0]


def test_riot_identifiability_initial_condition(riot, grid):
    traj = integrate_sensitivity(riot, grid, [0.3, -0.7])
    # x(0) = p1, so X(0) is the second row of [d I]
    assert traj.X_star[0].tolist() == [[-0.7, 0.0, 1.0]]


@pytest.mark.parametrize("name, mode", [("stommel", "identifiability"),
                                        ("stommel_obs", "observability"),
                                        ("riot", "identifiability")])
def test_output_consistency(name, mode, grid):
    spec = builtin(name)
    rng = np.random.default_rng(1)
    d = rng.normal(size=spec.n_p)
    traj = integrate_sensitivity(spec, grid, d, mode)
    M = np.column_stack([d, np.eye(spec.n_p)])
    rows = M if mode == "identifiability" else np.zeros_like(M)
    th = LDVector(spec.theta_star, rows)
    for n in range(0, grid.n_steps + 1, 97):
        t = traj.times[n]
        x = LDVector(traj.x_star[n], traj.X_star[n])
        u = LDVector.constant(spec.inputs_at(t), M.shape[1]) if spec.n_u else None
        Y = eval_ld(spec, "h", x, u, th, t)
        assert Y.deriv.tobytes() == traj.Y_star[n].tobytes()
        assert Y.value.tobytes() == traj.y_star[n].tobytes()


def test_linear2_recovers_classical_sensitivities(grid):
    spec = builtin("linear2")
    traj = integrate_sensitivity(spec, grid, [0.6, 0.8])
    want = np.array([linear2_sensitivity(spec.theta_star, t) for t in traj.times])
    assert np.max(np.abs(traj.S_y[:, 0, :] - want)) <= 1e-8


def test_observability_requires_identity_initial_map(grid):
    with pytest.raises(PreconditionError):
        integrate_sensitivity(builtin("stommel"), grid, [1.0, 0.0, 0.0], "observability")
    with pytest.raises(InvalidInputError):
        integrate_sensitivity(builtin("riot"), grid, [1.0, 0.0], "sideways")
    with pytest.raises(InvalidInputError):
        integrate_sensitivity(builtin("riot"), grid, [1.0])


def test_stommel_kink_diagnostic(grid):
    st = builtin("stommel")
    traj = integrate_sensitivity(st, grid, [1.0, 0.0, 0.0])
    assert traj.kink_times
    idx = traj.grid.snap(traj.kink_times)
    gap = traj.x_star[:, 0] - traj.x_star[:, 1]
    for n in idx:
        # every flagged node sits next to a sign change of T - V
        assert np.sign(gap[n]) != np.sign(gap[n - 1])


def test_domain_error_reports_time_and_path(grid):
    doc = copy.deepcopy(DOCUMENTS["linear2"])
    doc["f"] = ["-2"]
    doc["h"] = ["(log x0)"]
    spec = parse_model(doc)
    with pytest.raises(IntegrationError) as err:
        integrate_sensitivity(spec, grid, [1.0, 0.0])
    msg = str(err.value)
    assert "h[0]" in msg and "t=0.5" in msg


def test_blow_up_is_divergence(grid):
    doc = copy.deepcopy(DOCUMENTS["linear2"])
    doc["f"] = ["(* x0 x0)"]
    doc["f0"] = ["10"]
    spec = parse_model(doc)
    with pytest.raises(DivergenceError):
        integrate_reference(spec, grid)
    with pytest.raises(DivergenceError):
        integrate_sensitivity(spec, grid, [1.0, 0.0])


def test_csv(riot):
    traj = integrate_sensitivity(riot, Grid(0.0, 1.0, 0.25), [-1.0, 0.0])
    text = trajectory_csv(traj)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "x[0]", "y[0]", "Y[0][0]", "Y[0][1]", "Y[0][2]", "kink"]
    assert len(rows) == 6
    assert float(rows[3][0]) == 0.5
    empty = integrate_sensitivity(riot, Grid(0.0, 0.0), [1.0, 0.0])
    assert trajectory_csv(empty).splitlines() == [",".join(rows[0])]
