import numpy as np
import pytest

from slosh.errors import ConfigurationError, NumericBlowupError, SettlingError
from slosh.rigid import SpacecraftState, SystemState
from slosh.simulation import Integrator, Scenario, settle_fluid, simulate, tank_excursion
from slosh.sph import FluidParams, ParticleField


def test_settled_desk_state(desk_cfg, desk_settled):
    assert desk_settled.n_fluid == 150
    assert tank_excursion(desk_settled, desk_cfg.spacecraft) <= 0.2


def test_already_settled_returns_input(desk_cfg, desk_settled):
    again = settle_fluid(desk_cfg.scenario(), desk_settled)
    np.testing.assert_array_equal(again.fluid.positions, desk_settled.fluid.positions)


def test_settling_timeout():
    with pytest.raises(SettlingError) as err:
        scen = Scenario(n_particles=80)
        moving = scen.spawn()
        moving.fluid.velocities[:] = 0.05
        settle_fluid(scen, moving, max_time=0.01, damping=0.0)
    assert err.value.max_speed is not None


def test_benchmark_dimensions():
    s = Scenario.benchmark()
    assert s.n_particles == 666
    assert s.spawn().n_fluid == 666


def test_multirate_sample_counts(desk_settled, desk_cfg):
    plant = desk_cfg.scenario().plant()
    res = simulate(plant, desk_settled, 1.0, 1e-3, 0.05)
    assert len(res.dataset) == 20
    assert 30.0 / 0.05 == 600
    calls = []
    simulate(plant, desk_settled, 0.2, 1e-3, 0.05, policy=lambda k, t, y: calls.append(k) or np.zeros(3))
    assert calls == [0, 1, 2, 3]


def test_single_rate_matches_multirate_with_hold():
    scen = Scenario(n_particles=30)
    plant = scen.plant()
    s0 = scen.spawn()
    u = np.array([2.0, 0.0, 0.1])
    a = simulate(plant, s0, 0.02, 1e-3, 1e-3, policy=lambda k, t, y: u)
    b = simulate(plant, s0, 0.02, 1e-3, 0.02, policy=lambda k, t, y: u)
    np.testing.assert_array_equal(a.final_state.as_vector(), b.final_state.as_vector())
    assert len(a.dataset) == 20 and len(b.dataset) == 1


def test_non_integer_rate_ratio():
    scen = Scenario(n_particles=5)
    with pytest.raises(ConfigurationError):
        simulate(scen.plant(), scen.spawn(), 1.0, 1e-3, 0.0505)


def test_zero_input_keeps_settled_outputs(desk_settled, desk_cfg):
    res = simulate(desk_cfg.scenario().plant(), desk_settled, 1.0)
    drift = np.abs(res.dataset.y - res.dataset.y[0]).max()
    assert drift < desk_cfg.settle.tolerance


def test_bitwise_replay(desk_settled, desk_cfg):
    plant = desk_cfg.scenario().plant()
    pol = lambda k, t, y: np.array([5.0, 0.0, -10.0 * y[2]])  # noqa: E731
    a = simulate(plant, desk_settled, 1.0, policy=pol).dataset.to_csv()
    b = simulate(plant, desk_settled, 1.0, policy=pol).dataset.to_csv()
    assert a == b


def test_logger_gets_copies(desk_settled, desk_cfg):
    seen = []
    simulate(desk_cfg.scenario().plant(), desk_settled, 0.1, logger=lambda k, t, s: seen.append(s))
    assert len(seen) == 2
    assert not np.shares_memory(seen[0].fluid.positions, seen[1].fluid.positions)


def test_blowup_reports_step_and_state():
    scen = Scenario(n_particles=2, n_ghosts=0, fluid=FluidParams())
    plant = scen.plant()
    fluid = ParticleField(np.array([[0.0, 0.0], [1e-12, 0.0]]), np.array([[1e12, 0.0], [-1e12, 0.0]]),
                          scen.fluid.particle_mass)
    with pytest.raises(NumericBlowupError) as err:
        Integrator(plant, SystemState(SpacecraftState.at_rest(), fluid)).advance(np.zeros(3), 1e-3, 10)
    assert err.value.step is not None and err.value.last_state is not None


def test_ghost_spacing_must_not_exceed_particle_length():
    with pytest.raises(ConfigurationError):
        Scenario(n_ghosts=100).ghosts()
