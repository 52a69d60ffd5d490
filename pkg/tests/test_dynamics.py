import math
import warnings

import numpy as np
import pytest

from nonnoether.dynamics import (
    TrajectoryConfig,
    drift_report,
    integrate,
    invariant_fields,
    pointwise_conservation,
)
from nonnoether.engine import power_traces
from nonnoether.errors import DomainExitWarning, IntegrationError
from nonnoether.hamiltonian import HamiltonianSystem, SymplecticStructure

from oracles import midpoint_oscillator_phase, oscillator_exact
from systems import action_angle, action_angle_2, oscillator, with_E


def pendulum():
    return HamiltonianSystem(1, SymplecticStructure.canonical(1), lambda x: 0.5 * x[1] ** 2 - math.cos(x[0]))


@pytest.fixture(scope="module")
def long_oscillator_run():
    sys = oscillator(box=(-2.0, 2.0))
    traj = integrate(sys, [1.0, 0.0], TrajectoryConfig(dt=1e-3, steps=100_000))
    return sys, traj


def test_config_validation():
    with pytest.raises(ValueError):
        TrajectoryConfig(dt=1e-3, steps=0)
    with pytest.raises(ValueError):
        TrajectoryConfig(dt=0.0, steps=10)
    with pytest.raises(ValueError):
        TrajectoryConfig(dt=-0.1, steps=10)
    with pytest.raises(ValueError):
        TrajectoryConfig(dt=0.1, steps=10, stride=0)


def test_translation_flow():
    sys = HamiltonianSystem(1, SymplecticStructure.canonical(1), lambda x: x[1])
    traj = integrate(sys, [0.0, 0.5], TrajectoryConfig(dt=0.1, steps=10, stride=1))
    assert np.allclose(traj.final, [1.0, 0.5], atol=1e-12)
    assert traj.t[-1] == pytest.approx(1.0)
    assert len(traj.t) == 11


def test_storage_stride_keeps_last_step():
    traj = integrate(oscillator(), [1.0, 0.0], TrajectoryConfig(dt=0.01, steps=25, stride=10))
    assert traj.t.tolist() == pytest.approx([0.0, 0.1, 0.2, 0.25])


def test_oscillator_endpoint_matches_midpoint_phase(long_oscillator_run):
    _, traj = long_oscillator_run
    T = 100.0
    exact_map = oscillator_exact([1.0, 0.0], 100_000 * midpoint_oscillator_phase(1e-3))
    assert np.max(np.abs(traj.final - exact_map)) <= 1e-9
    err = np.max(np.abs(traj.final - oscillator_exact([1.0, 0.0], T)))
    # phase lag of the midpoint rule is T dt^2 / 12, about 8.3e-6 here
    assert err <= T * 1e-6 / 12 * 1.01
    assert err > 1e-6


def test_oscillator_energy_drift(long_oscillator_run):
    sys, traj = long_oscillator_run
    report = drift_report(sys, traj)
    assert report.names() == ["h"]
    assert report["h"].max_rel <= 1e-7


def test_constant_invariant_has_zero_drift(long_oscillator_run):
    sys, traj = long_oscillator_run
    report = drift_report(sys, traj, [("c", lambda x: 3.0)], stride=50)
    assert report["c"].max_abs == 0.0 and report["c"].max_rel == 0.0


def test_failing_invariant_is_reported_not_raised():
    sys = oscillator()
    traj = integrate(sys, [1.0, 0.0], TrajectoryConfig(dt=0.1, steps=5, stride=1))
    def boom(x):
        raise ArithmeticError("nope")
    report = drift_report(sys, traj, [("bad", boom), lambda x: x[0] ** 2 + x[1] ** 2])
    assert "nope" in report["bad"].error
    assert report["inv2"].error is None and report["inv2"].max_rel <= 1e-12
    assert report["h"].error is None


@pytest.mark.filterwarnings("ignore::nonnoether.errors.DomainExitWarning")
def test_action_angle_mu1_drift():
    sys = action_angle()
    traj = integrate(sys, [0.3, 0.5], TrajectoryConfig(dt=1e-3, steps=100_000, stride=100))
    fields = dict(invariant_fields(sys))
    report = drift_report(sys, traj, [("mu_1", fields["mu_1"])])
    assert report["mu_1"].initial == pytest.approx(2.0, abs=1e-7)
    assert report["mu_1"].max_rel <= 1e-6


def test_pointwise_conservation():
    osc = oscillator()
    pts = osc.sample_points(50, seed=0)
    assert pointwise_conservation(osc, osc.h, pts) <= 1e-10
    aa = action_angle()
    pts = aa.sample_points(100, seed=0)
    mu1 = dict(invariant_fields(aa))["mu_1"]
    assert pointwise_conservation(aa, mu1, pts) <= 1e-5
    assert pointwise_conservation(aa, lambda x: x[0], pts) == pytest.approx(1.0, abs=1e-9)


def test_reversibility():
    sys = pendulum()
    x0 = np.array([0.9, -0.3])
    fwd = integrate(sys, x0, TrajectoryConfig(dt=1e-2, steps=1000))
    back = integrate(sys, fwd.final, TrajectoryConfig(dt=1e-2, steps=1000, reverse=True))
    assert np.max(np.abs(back.final - x0)) <= 1e-9
    assert back.t[-1] == pytest.approx(-10.0)


def test_second_order_convergence():
    sys = oscillator(box=None)
    T = 10.0
    errs = []
    for dt in (0.02, 0.01):
        traj = integrate(sys, [1.0, 0.0], TrajectoryConfig(dt=dt, steps=round(T / dt)))
        errs.append(np.max(np.abs(traj.final - oscillator_exact([1.0, 0.0], T))))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_newton_failure_reports_step():
    with pytest.raises(IntegrationError) as info:
        integrate(pendulum(), [1.0, 0.5], TrajectoryConfig(dt=0.5, steps=3, newton_max_iters=1))
    assert info.value.step == 1


def test_domain_exit_warns_once():
    sys = action_angle()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = integrate(sys, [2.9, 0.5], TrajectoryConfig(dt=0.1, steps=50))
    exits = [w for w in caught if issubclass(w.category, DomainExitWarning)]
    assert len(exits) == 1
    assert traj.domain_exit_step == 2  # 2.9 + 0.1 is still on the boundary


def test_negative_controls_over_unit_time():
    cfg = TrajectoryConfig(dt=1e-3, steps=1000, stride=10)
    linear = with_E(oscillator(), lambda y: np.array([y[0], 0.0]))
    quad = with_E(oscillator(), lambda y: np.array([y[0] ** 2, 0.0]))
    for sys, expect_drift in ((linear, False), (quad, True)):
        traj = integrate(sys, [1.0, 0.0], cfg)
        mu1 = lambda x, s=sys: power_traces(s, x, 1)[0]
        entry = drift_report(sys, traj, [("mu_1", mu1)])["mu_1"]
        if expect_drift:
            assert entry.max_abs > 1e-2
        else:
            # L_E omega = omega makes every trace constant despite [E, X_h] != 0
            assert entry.max_abs <= 1e-9


@pytest.mark.filterwarnings("ignore::nonnoether.errors.DomainExitWarning")
def test_bracket_and_trajectory_agree_on_two_oscillator():
    sys = action_angle_2()
    fields = invariant_fields(sys)
    pts = sys.sample_points(30, seed=4)
    traj = integrate(sys, [0.3, -0.7, 0.5, 1.0], TrajectoryConfig(dt=1e-3, steps=100_000, stride=1000))
    report = drift_report(sys, traj, fields)
    for name, f in fields:
        if name.startswith("lam"):
            continue
        if pointwise_conservation(sys, f, pts) <= 1e-5:
            assert report[name].max_rel <= 1e-4, name
