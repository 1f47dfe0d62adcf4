import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from sle_rho.cft import SleParams, drift_f, log_correlator_D
from sle_rho.chordal import (
    DrivingPath,
    correlator_drift,
    default_guard,
    flow_points,
    initial_state,
    ode_advance,
    replay_path,
    run_path,
    sde_step,
    slit_map,
    slit_map_inverse,
    swallow_classify,
    trace_points,
)
from sle_rho.ensemble import run_chordal_ensemble
from sle_rho.errors import StepRejected, StoppedStateError


def constant_path(T, n_steps, xi=0.0):
    steps = np.full(n_steps, T / n_steps)
    times = np.concatenate([[0.0], np.cumsum(steps)])
    return DrivingPath(
        dt=T / n_steps,
        times=times,
        xi_values=np.full(n_steps + 1, xi),
        dB=np.zeros(n_steps),
        steps=steps,
        X_values=np.zeros((n_steps + 1, 0)),
        Xprime_values=np.zeros((n_steps + 1, 0)),
    )


@settings(max_examples=100)
@given(
    st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=30),
    st.floats(-3, 3),
    st.floats(0.0, 3),
)
def test_slit_updates_compose_exactly(parts, x, y):
    z = complex(x, y)
    if abs(z) < 1e-3:
        return
    g = z
    for dt in parts:
        g = slit_map(g, 0.0, dt)
    t = math.fsum(parts)
    exact = cmath.sqrt(z * z + 4 * t)
    if exact.imag < 0 or (exact.imag == 0 and (exact.real > 0) != (x > 0)):
        exact = -exact
    assert abs(g - exact) <= 1e-12 * abs(exact)


def test_slit_map_examples():
    assert slit_map(1.0, 0.0, 2.0) == pytest.approx(3.0)
    assert slit_map(-1.0, 0.0, 2.0) == pytest.approx(-3.0)
    # 3i stays off the slit [0, 2i] swept by constant driving up to t = 1
    assert slit_map(3j, 0.0, 1.0) == pytest.approx(math.sqrt(5) * 1j, abs=1e-14)
    arr = slit_map(np.array([3j, -2 + 0j]), 0.0, 1.0)
    assert arr[0] == pytest.approx(math.sqrt(5) * 1j)
    assert arr[1] == pytest.approx(-math.sqrt(8))
    w = slit_map(0.3 + 0.2j, 0.1, 0.05)
    assert slit_map_inverse(w, 0.1, 0.05) == pytest.approx(0.3 + 0.2j, abs=1e-14)


def test_ode_advance_real_point_and_derivative():
    p = SleParams(2.0, (1.0,), (1.0,))
    s = initial_state(p)
    for _ in range(10):
        s = ode_advance(s, 0.1)
    assert s.X[0] == pytest.approx(math.sqrt(1 + 4 * 1.0), rel=1e-14)
    # d/dz sqrt(z^2 + 4t) at z = 1
    assert s.Xprime[0] == pytest.approx(1 / math.sqrt(5), rel=1e-14)
    tiny = ode_advance(initial_state(p), 1e-14)
    assert tiny.Xprime[0] == pytest.approx(1.0)


def test_stopped_state_errors():
    p = SleParams(2.0)
    s = initial_state(p)
    from dataclasses import replace

    st_ = replace(s, stopped=True)
    with pytest.raises(StoppedStateError):
        ode_advance(st_, 0.1)
    with pytest.raises(StoppedStateError):
        sde_step(st_, 0.0, 0.1, p)


def test_sde_step_plain_sle():
    p = SleParams(3.0)
    s = initial_state(p)
    s2 = sde_step(s, 0.25, 0.01, p)
    assert s2.xi == math.sqrt(3.0) * 0.25


def test_sde_step_rejects_crossing():
    p = SleParams(3.0, (1.0,), (0.01,))
    with pytest.raises(StepRejected):
        sde_step(initial_state(p), 0.1, 0.001, p)


def test_deterministic_driving_matches_reference_ode():
    rho, x0, xi0, T = 1.0, 3.0, 1.0, 0.1
    p = SleParams(2.0, (rho,), (x0,), xi0)

    def rhs(t, y):
        xi, X = y
        return [rho / (xi - X), 2 / (X - xi)]

    ref = solve_ivp(rhs, (0, T), [xi0, x0], method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1]
    n = 20000
    s = initial_state(p)
    for _ in range(n):
        s = sde_step(s, 0.0, T / n, p)
    assert abs(s.xi - ref[0]) / abs(ref[0]) < 1e-6
    assert abs(s.X[0] - ref[1]) / abs(ref[1]) < 1e-6


def test_run_path_plain_reaches_horizon_and_is_deterministic():
    p = SleParams(3.0)
    st1, a = run_path(p, 0.5, 42, 1e-3)
    st2, b = run_path(p, 0.5, 42, 1e-3)
    assert not st1.stopped
    assert a.times[-1] == pytest.approx(0.5)
    assert np.array_equal(a.xi_values, b.xi_values)
    assert np.array_equal(a.dB, b.dB)
    _, c = run_path(p, 0.5, 42, 1e-3, path_index=1)
    assert not np.array_equal(a.xi_values, c.xi_values)


def test_driving_path_invariants_and_replay():
    p = SleParams(4.5, (0.7, -0.4), (-1.0, 0.5))
    st_, path = run_path(p, 0.3, 9, 1e-3)
    assert path.times[0] == 0
    assert len(path.xi_values) == len(path.times) == len(path.dB) + 1
    assert np.all(np.diff(path.times) > 0)
    assert np.array_equal(replay_path(p, path), path.xi_values)


def test_xprime_decreasing_for_unswallowed_points():
    p = SleParams(3.0, (0.5, 0.5), (-1.0, 1.5))
    _, path = run_path(p, 0.5, 3, 1e-3)
    assert np.all(path.Xprime_values > 0)
    assert np.all(np.diff(path.Xprime_values, axis=0) <= 0)


def test_attractive_drift_stops_paths():
    p = SleParams(6.0, (-3.0,), (0.1,))
    ens = run_chordal_ensemble(p, [1.0], 40, 1, 1e-3)
    # regression statistic: collisions dominate for this attractive configuration
    assert (ens.status == 1).mean() >= 0.9
    st_, path = run_path(p, 1.0, 1, 1e-3)
    assert st_.stopped and st_.stop_reason == "collision:0"
    assert path.times[-1] < 1.0


def test_kernel_matches_reference_path():
    p = SleParams(3.5, (0.8,), (-0.7,))
    st_, path = run_path(p, 0.4, 17, 1e-3)
    ens = run_chordal_ensemble(p, [0.4], 1, 17, 1e-3)
    assert ens.xi[0, -1] == path.xi_values[-1]
    assert ens.X[0, -1, 0] == path.X_values[-1, 0]
    assert ens.Xprime[0, -1, 0] == path.Xprime_values[-1, 0]


def test_ensemble_independent_of_thread_count():
    p = SleParams(3.0, (0.5,), (-1.0,))
    a = run_chordal_ensemble(p, [0.1, 0.2], 12, 5, 1e-3, z_points=[1j], threads=1)
    b = run_chordal_ensemble(p, [0.1, 0.2], 12, 5, 1e-3, z_points=[1j], threads=3)
    assert np.array_equal(a.xi, b.xi) and np.array_equal(a.Z, b.Z)


def test_trace_constant_driving():
    T, n = 1.0, 1000
    path = constant_path(T, n)
    times = [0.0, 0.25, 1.0]
    exact = trace_points(path, times, tip_offset=0.0)
    assert exact.points[0] == 0
    assert exact.points[1] == pytest.approx(2j * math.sqrt(0.25), abs=1e-12)
    assert exact.points[2] == pytest.approx(2j, abs=1e-12)
    approx = trace_points(path, times)
    assert approx.tip_offset == pytest.approx(2 * math.sqrt(path.dt))
    assert abs(approx.points[2] - 2j) < 3 * approx.tip_offset


def test_trace_start_and_upper_half_plane():
    p = SleParams(3.0, (), (), 0.4)
    _, path = run_path(p, 0.5, 2, 1e-3)
    tr = trace_points(path, np.linspace(0, 0.5, 11))
    assert tr.points[0] == 0.4
    assert np.all(tr.points.imag >= 0)


def test_trace_forward_consistency():
    p = SleParams(3.0)
    _, path = run_path(p, 0.3, 8, 1e-3)
    tr = trace_points(path, [0.3])
    K = len(path.steps)
    fwd = flow_points(path, np.array([tr.points[0]]))[K, 0]
    target = path.xi_values[K] + 1j * tr.tip_offset
    assert abs(fwd - target) < 1e-8


def test_swallow_constant_driving_oracle():
    dt = 1e-7
    path = constant_path(1e-4, 1000)
    z = 0.01j
    res = swallow_classify(path, z, guard=1e-5)
    assert res.swallowed
    assert abs(res.tau - 2.5e-5) < 2 * dt + 1e-9
    assert res.in_hull(3e-5) and not res.in_hull(2e-5)
    far = swallow_classify(path, 5 + 5j, guard=1e-5)
    assert not far.swallowed and not far.in_hull(1.0)


def test_interior_swallowing_vanishes_for_simple_curves():
    grid = [complex(x, y) for x in (-0.5, 0.0, 0.5) for y in (0.2, 0.5)]
    paths = [run_path(SleParams(3.0), 1.0, seed, 1e-3)[1] for seed in range(6)]
    counts = [sum(swallow_classify(p, z, guard=g).swallowed for p in paths for z in grid) for g in (1e-2, 1e-6)]
    assert counts[1] == 0
    assert counts[1] <= counts[0]


def test_boundary_points_swallowed_more_often_for_kappa_above_4():
    def freq(k):
        hits = 0
        for seed in range(40):
            _, path = run_path(SleParams(k), 1.0, seed, 1e-3)
            hits += swallow_classify(path, 0.3, guard=1e-9).swallowed
        return hits / 40

    f3, f6 = freq(3.0), freq(6.0)
    assert f6 >= 0.4
    assert f6 > f3 + 0.2


def test_capacity_expansion():
    p = SleParams(3.0, (0.5,), (-1.0,))
    _, path = run_path(p, 0.7, 4, 1e-3)
    y = 1e3
    g = flow_points(path, np.array([1j * y]))[-1, 0]
    t = path.times[-1]
    expected = 2 * t / (1j * y)
    assert abs((g - 1j * y) - expected) / abs(expected) < 1e-3


def test_correlator_drift_provider():
    p = SleParams(3.0, (1.2, -0.5), (-1.0, 2.0))
    drift = correlator_drift(lambda xi, X: log_correlator_D(xi, SleParams(p.kappa, p.rho, X)))
    st_ = initial_state(p)
    val = drift(0.0, st_.X, st_.alive, p)
    assert abs(val - drift_f(0.0, p)) / max(1, abs(val)) < 1e-6
    assert correlator_drift(lambda xi, X: 3.0)(0.0, st_.X, st_.alive, p) == 0
    single = SleParams(3.0, (0.8,), (-2.0,))
    one = correlator_drift(lambda xi, X: 0.8 / 3.0 * math.log(abs(X[0] - xi)))
    assert one(0.3, (-2.0,), (True,), single) == pytest.approx(0.8 / 2.3, rel=1e-6)


def test_correlator_drift_drives_same_path():
    p = SleParams(3.0, (1.0,), (-1.0,))
    drift = correlator_drift(lambda xi, X: log_correlator_D(xi, SleParams(p.kappa, p.rho, X)))
    _, a = run_path(p, 0.05, 3, 1e-3)
    _, b = run_path(p, 0.05, 3, 1e-3, drift=drift)
    assert np.max(np.abs(a.xi_values - b.xi_values)) < 1e-6


def test_default_guard():
    assert default_guard(SleParams(3.0)) == 0
    assert default_guard(SleParams(3.0, (1, 1), (-2.0, 0.5))) == pytest.approx(0.5e-4)


def test_scaling_weakly():
    # chordal SLE: (dt, T, z) and (lam^2 dt, lam^2 T, lam z) have the same law
    lam, n = 2.0, 3000
    p = SleParams(3.0)
    a = run_chordal_ensemble(p, [0.5], n, 101, 1e-3, z_points=[0.3 + 0.6j])
    b = run_chordal_ensemble(p, [0.5 * lam**2], n, 202, 1e-3 * lam**2, z_points=[lam * (0.3 + 0.6j)])
    fa = (a.Z[:, -1, 0].real > a.xi[:, -1]).mean()
    fb = (b.Z[:, -1, 0].real > b.xi[:, -1]).mean()
    se = math.sqrt(fa * (1 - fa) / n + fb * (1 - fb) / n)
    assert abs(fa - fb) < 3 * se
