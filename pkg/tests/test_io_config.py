import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from slosh import config as cfgmod
from slosh.config import ExperimentConfig
from slosh.data import DATASET_COLUMNS, Dataset, read_snapshot, write_snapshot
from slosh.errors import ConfigurationError
from slosh.lpv.ident import TrainConfig

finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(arrays(np.float64, (7, 3), elements=finite), arrays(np.float64, (7, 6), elements=finite))
def test_dataset_csv_roundtrip(u, y):
    ds = Dataset(u, y, 0.05)
    text = ds.to_csv()
    assert text.splitlines()[0] == ",".join(DATASET_COLUMNS)
    back = Dataset.from_csv(text)
    np.testing.assert_array_equal(back.u, u)
    np.testing.assert_array_equal(back.y, y)
    assert back.ts == 0.05
    assert back.to_csv() == text


def test_velocity_level_csv_and_slice(rng):
    ds = Dataset(rng.normal(size=(10, 3)), rng.normal(size=(10, 6)), 0.05)
    v = ds.velocity_level()
    assert v.n_y == 3
    back = Dataset.from_csv(v.to_csv())
    np.testing.assert_array_equal(back.y, ds.y[:, 3:])
    assert ds.slice(4).t[0] == pytest.approx(0.2)


def test_input_only_csv(rng):
    ds = Dataset(rng.normal(size=(5, 3)), np.zeros((5, 0)), 0.05)
    assert Dataset.from_csv(ds.to_csv()).n_y == 0


def test_bad_header():
    with pytest.raises(ConfigurationError):
        Dataset.from_csv("a,b\n1,2\n")


def test_snapshot_roundtrip(tmp_path, rng):
    sc = rng.normal(size=6)
    pos = rng.normal(size=(11, 2))
    vel = rng.normal(size=(11, 2))
    path = tmp_path / "s.csv"
    write_snapshot(path, sc, pos, vel, t=1.25)
    t, sc2, p2, v2 = read_snapshot(path)
    assert t == 1.25
    np.testing.assert_array_equal(sc2, sc)
    np.testing.assert_array_equal(p2, pos)
    np.testing.assert_array_equal(v2, vel)
    assert sum(1 for ln in path.read_text().splitlines() if ln[:1].isdigit()) == 11


def test_snapshot_without_header():
    with pytest.raises(ConfigurationError):
        read_snapshot("id,x,y,vx,vy\n0,1,2,3,4\n")


def test_config_roundtrip_defaults():
    cfg = ExperimentConfig.desk()
    assert cfgmod.loads(cfgmod.dumps(cfg)) == cfg
    bench = ExperimentConfig.benchmark()
    assert cfgmod.loads(cfgmod.dumps(bench)).n_particles == 666


def test_config_roundtrip_overrides(tmp_path):
    cfg = ExperimentConfig(n_particles=40, profiles={1: {"theta_step": 0.2}, 2: {"pulse": 1 / 3}}, seed=9,
                           omega=0.123456789, train=TrainConfig(restarts=3, hidden=(3, 5), seed=9))
    path = tmp_path / "c.ini"
    cfgmod.save(cfg, path)
    assert cfgmod.load(path) == cfg


@pytest.mark.parametrize("text", [
    "[nonsense]\na = 1\n",
    "[fluid]\nnot_a_key = 1\n",
    "[profile]\np3.horizon = 1\n",
    "[profile]\np1.bogus = 1\n",
    "[run]\nfast_dt = 0.003\nslow_dt = 0.05\n",
    "[fluid]\nstiffness = abc\n",
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(ConfigurationError):
        cfgmod.loads(text)


def test_partial_config_uses_defaults():
    cfg = cfgmod.loads("[satellite]\nmass = 500\n")
    assert cfg.spacecraft.mass == 500.0
    assert cfg.spacecraft.inertia == 133.84 and cfg.n_particles == 150


def test_with_seed():
    c = ExperimentConfig().with_seed(4)
    assert c.seed == 4 and c.train.seed == 4
