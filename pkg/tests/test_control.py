import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slosh.control import (AttitudeController, ClosedLoopPolicy, ExcitationConfig, ReplayPolicy, build_excitation,
                           build_profile, control_step)
from slosh.errors import ConfigurationError
from slosh.simulation import Scenario, simulate

J = 133.84


def test_gains_from_design():
    c = AttitudeController.from_design(J)
    assert c.kp == pytest.approx(J * (0.2 * math.pi) ** 2)
    assert c.kd == pytest.approx(2 * 0.7 * J * 0.2 * math.pi)
    assert c.kp == pytest.approx(52.84, abs=5e-3)
    assert c.kd == pytest.approx(117.73, abs=5e-3)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3))
def test_control_law_linear(th, thd, ref, a):
    c = AttitudeController.from_design(J)
    assert control_step(c, ref, 0.0, ref) == 0.0
    lhs = control_step(c, a * th, a * thd, a * ref)
    assert lhs == pytest.approx(a * control_step(c, th, thd, ref), abs=1e-9)


def test_rigid_step_response_matches_second_order():
    scen = Scenario(n_particles=0)
    c = AttitudeController.from_design(J)
    prof = build_profile(1, {"ux": 0.0, "uy_pulse": 0.0, "theta_step_time": 0.0})
    res = simulate(scen.plant(), scen.spawn(), 30.0, 1e-3, 0.05, ClosedLoopPolicy(prof, c))
    th = res.dataset.y[:, 2]
    t = res.dataset.t
    k = int(np.argmax(th))
    overshoot = th[k] / 0.1 - 1.0
    xi = -math.log(overshoot) / math.sqrt(math.pi**2 + math.log(overshoot) ** 2)
    wn = math.pi / (t[k] * math.sqrt(1 - xi * xi))
    assert xi == pytest.approx(0.7, rel=0.1)
    assert wn == pytest.approx(0.2 * math.pi, rel=0.1)
    assert abs(th[-1] - 0.1) < 1e-3


def test_profile1_structure():
    p = build_profile(1)
    assert p.horizon == 30.0
    assert len(p.reference) == 1 and p.reference[0].start == 5.0 and p.reference[0].value == 0.1
    assert len(p.u_y) == 1 and (p.u_y[0].start, p.u_y[0].end, p.u_y[0].value) == (15.0, 15.5, 10.0)
    assert p.thrust(0.0) == (5.0, 0.0) and p.thrust(15.2) == (5.0, 10.0)
    assert p.theta_ref(4.99) == 0.0 and p.theta_ref(5.0) == 0.1


def test_profile2_zero_net_impulse():
    assert build_profile(2).impulse() == (0.0, 0.0)
    assert build_profile(2, {"pulse": 3.5}).impulse() == (0.0, 0.0)


def test_profile_errors():
    with pytest.raises(ConfigurationError):
        build_profile(3)
    with pytest.raises(ConfigurationError):
        build_profile(1, {"bogus": 1.0})
    with pytest.raises(ConfigurationError):
        build_profile(2, {"horizon": 10.0})
    with pytest.raises(ConfigurationError):
        build_profile(2, {"return_start": 3.0})


def test_excitation_length_and_determinism():
    a = build_excitation(7)
    assert len(a) == 2200 and a.t[-1] == pytest.approx(109.95)
    np.testing.assert_array_equal(a.u, build_excitation(7).u)
    assert not np.array_equal(a.u, build_excitation(8).u)


def test_zero_excitation():
    sig = build_excitation(0, ExcitationConfig(rms=(0.0, 0.0, 0.0), pulses=()))
    assert np.all(sig.u == 0.0)


def test_multisine_spectrum_on_grid():
    cfg = ExcitationConfig(pulses=())
    sig = build_excitation(3, cfg)
    # 2000 samples span five periods of the 20 s base tone, so every grid line lands on a DFT bin
    n = 2000
    spec = np.abs(np.fft.rfft(sig.u[:n], axis=0)) ** 2
    freqs = np.fft.rfftfreq(n, cfg.ts)
    on_grid = np.isclose(np.round(freqs / 0.05) * 0.05, freqs, atol=1e-9) & (freqs < 2.0)
    for ch in range(3):
        off = spec[~on_grid, ch].sum()
        assert off <= 1e-20 * spec[:, ch].sum()
        assert spec[freqs == 0.0, ch].sum() <= 1e-20 * spec[:, ch].sum()
    np.testing.assert_allclose(np.sqrt(np.mean(sig.u**2, axis=0)), cfg.rms, rtol=1e-12)


def test_pulses_added():
    cfg = ExcitationConfig(rms=(0.0, 0.0, 0.0), pulses=((1, 1.0, 2.0, 3.0),))
    u = build_excitation(0, cfg).u
    assert u[19, 1] == 0.0 and u[20, 1] == 3.0 and u[39, 1] == 3.0 and u[40, 1] == 0.0


def test_policies():
    c = AttitudeController.from_design(J)
    pol = ClosedLoopPolicy(build_profile(1), c)
    u = pol(0, 6.0, np.array([0, 0, 0.1, 0, 0, 0.0]))
    np.testing.assert_allclose(u, [5.0, 0.0, 0.0])
    rp = ReplayPolicy(np.arange(9.0).reshape(3, 3))
    np.testing.assert_array_equal(rp(2, 0.1, None), [6, 7, 8])


def test_invalid_controller():
    with pytest.raises(ConfigurationError):
        AttitudeController.from_design(J, omega=0.0)
    with pytest.raises(ConfigurationError):
        AttitudeController(-1.0, 1.0)
