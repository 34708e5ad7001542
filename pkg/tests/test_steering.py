import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irvd.codec import FlickEvent, FlickSchedule
from irvd.errors import ConfigError
from irvd.steering import (ControlState, EscParams, GaussianLobe, UniformArray, disturbance_series, esc_step,
                           read_trace_csv, received_power, run_control, write_trace_csv)

LOBE = GaussianLobe()
EMPTY = FlickSchedule()


class QuadraticMap:
    def power(self, theta, theta_rx):
        return 1.0 - 0.01 * np.subtract(theta, theta_rx) ** 2


def test_peak_is_exactly_one():
    assert received_power(50.0, 50.0, LOBE) == 1.0
    assert received_power(50.0, 50.0, UniformArray()) == 1.0
    assert received_power(-30.0, -30.0, UniformArray(7, 0.3)) == 1.0


def test_gaussian_examples():
    assert received_power(51.0, 50.0, LOBE) == received_power(49.0, 50.0, LOBE)
    assert received_power(51.0, 50.0, LOBE) == pytest.approx(math.exp(-1 / 18), abs=1e-12)
    assert received_power(51.0, 50.0, LOBE) == pytest.approx(0.9460, abs=5e-5)


@pytest.mark.parametrize("model", [LOBE, UniformArray(), UniformArray(8, 0.5)], ids=["lobe", "array24", "array8"])
def test_peak_grid_search(model):
    grid = np.round(np.arange(40.0, 60.0 + 1e-9, 0.01), 2)
    p = received_power(grid, 50.0, model)
    assert p.max() == 1.0
    assert grid[np.argmax(p)] == 50.0
    assert np.all((p >= 0) & (p <= 1))


@given(d=st.floats(-40, 40), rx=st.floats(-50, 50))
def test_symmetry(d, rx):
    assert received_power(rx + d, rx, LOBE) == pytest.approx(received_power(rx - d, rx, LOBE), rel=1e-12)
    # The array is even in sin(theta) - sin(theta_rx).
    arr = UniformArray()
    s = math.sin(math.radians(rx))
    u = max(-1.0, min(1.0, s + 0.1 * d / 40))
    v = max(-1.0, min(1.0, 2 * s - u))
    if -1 < v < 1 and -1 < u < 1:
        pu = received_power(math.degrees(math.asin(u)), rx, arr)
        pv = received_power(math.degrees(math.asin(v)), rx, arr)
        assert pu == pytest.approx(pv, rel=1e-9, abs=1e-12)


def test_array_grating_singularity():
    # psi = 2*pi at spacing 1 wavelength: removable singularity, value 1.
    arr = UniformArray(8, 1.0)
    assert received_power(90.0, -90.0, arr) == pytest.approx(1.0, abs=1e-12)


def _avg_gradient(offset, warm=3.0, periods=20):
    p = EscParams(integrator_gain=0.0, theta_init=50.0 - offset)
    state = ControlState.initial(p)
    n_warm = int(round(warm / p.dt))
    n = int(round(periods * p.dither_period / p.dt))
    g = []
    for _ in range(n_warm + n):
        s = math.sin(p.dither_frequency * state.t)
        state, _, measured = esc_step(state, p, 0.0, LOBE)
        g.append((measured - state.hpf_state) * s)
    return float(np.mean(g[n_warm:]))


def test_stationarity_at_optimum():
    at_peak = _avg_gradient(0.0)
    off_peak = _avg_gradient(2.0)
    assert off_peak > 0
    assert abs(at_peak) < 1e-3 * abs(off_peak)


def test_one_period_drift_at_optimum():
    p = EscParams(theta_init=50.0)
    state = ControlState.initial(p)
    for _ in range(int(round(p.dither_period / p.dt))):
        state, _, _ = esc_step(state, p, 0.0, LOBE)
    assert abs(state.theta_hat - 50.0) < 0.05


def test_quadratic_map_converges():
    p = EscParams()
    toy = QuadraticMap()
    state = ControlState.initial(p)
    inside = []
    for _ in range(int(round(10.0 / p.dt))):
        state, _, _ = esc_step(state, p, 0.0, toy)
        inside.append(abs(state.theta_hat - 50.0) <= p.dither_amplitude)
    inside = np.array(inside)
    last_out = np.flatnonzero(~inside)
    entered = (last_out[-1] + 1) * p.dt if len(last_out) else 0.0
    assert entered < 5.0


def test_zero_gain_holds_estimate():
    p = EscParams(integrator_gain=0.0)
    state = ControlState.initial(p)
    for _ in range(500):
        state, _, _ = esc_step(state, p, 0.3, LOBE)
        assert state.theta_hat == p.theta_init


def test_open_loop_identity():
    p = EscParams(integrator_gain=0.0)
    tr = run_control(p, EMPTY, 0.1, LOBE)
    expected = received_power(p.theta_init + p.dither_amplitude * np.sin(p.dither_frequency * tr.t), p.theta_rx, LOBE)
    assert np.array_equal(tr.power, expected)
    assert len(tr.t) == 100 and tr.t[1] - tr.t[0] == pytest.approx(1e-3)


def test_convergence_defaults():
    tr = run_control(EscParams(), EMPTY, 4.0, LOBE)
    reach = np.flatnonzero(tr.power >= 0.99)
    assert tr.t[reach[0]] <= 1.5
    after = tr.t >= 1.5
    assert np.max(np.abs(tr.theta_reflected[after] - 50.0)) <= 0.7


def test_flick_observable():
    sched = FlickSchedule((FlickEvent(2.0, 0.2, -1.0),))
    p = EscParams()
    tr = run_control(p, sched, 3.0, LOBE)
    base = run_control(p, EMPTY, 3.0, LOBE)
    win = (tr.t >= 2.0) & (tr.t < 2.2)
    deviation = np.mean(tr.theta_reflected[win] - base.theta_reflected[win])
    assert deviation == pytest.approx(-1.0, abs=0.3)
    assert np.mean(tr.theta_reflected[win]) - 50.0 == pytest.approx(-1.0, abs=0.3)
    pre = (tr.t >= 1.8) & (tr.t < 2.0)
    assert tr.power[win].min() < tr.power[pre].min()


def test_disturbance_series_half_open():
    d = disturbance_series(FlickSchedule((FlickEvent(0.002, 0.003, -1.0),)), 8, 1e-3)
    assert d.tolist() == [0, 0, -1, -1, -1, 0, 0, 0]


def test_noise_deterministic_and_seeded():
    a = run_control(EscParams(), EMPTY, 1.0, LOBE, noise_sigma=0.01, seed=5)
    b = run_control(EscParams(), EMPTY, 1.0, LOBE, noise_sigma=0.01, seed=5)
    c = run_control(EscParams(), EMPTY, 1.0, LOBE, noise_sigma=0.01, seed=6)
    assert np.array_equal(a.power, b.power)
    assert not np.array_equal(a.power, c.power)


def test_validation():
    with pytest.raises(ConfigError, match="^esc.dt"):
        EscParams(dt=0.02)
    with pytest.raises(ConfigError, match="^esc.dither_amplitude"):
        EscParams(dither_amplitude=0.0)
    with pytest.raises(ConfigError, match="^schedule"):
        run_control(EscParams(), FlickSchedule((FlickEvent(5.0, 0.1, -1.0),)), 1.0, LOBE)
    with pytest.raises(ValueError):
        esc_step(ControlState.initial(EscParams()), EscParams(), float("inf"), LOBE)


def test_trace_csv_round_trip(tmp_path):
    tr = run_control(EscParams(), EMPTY, 0.5, LOBE, noise_sigma=0.003, seed=1)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, tr)
    assert path.read_text().splitlines()[0] == "t,theta_deg,power"
    back = read_trace_csv(path)
    assert np.array_equal(back.power, tr.power)
    assert np.array_equal(back.theta_reflected, tr.theta_reflected)
