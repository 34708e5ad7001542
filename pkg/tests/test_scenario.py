import dataclasses

import numpy as np
import pytest

from irvd import dispersion
from irvd.dispersion import AirModel, EmissionParams
from irvd.errors import ConfigError
from irvd.panel import deposit, read_grid_csv
from irvd.scenario import (SEED_TAGS, ScenarioConfig, config_from_dict, config_to_dict, derive_seed, dump_config,
                           load_config, run_scenario, sweep_distance, sweep_noise)
from irvd.steering import UniformArray

SMALL = ScenarioConfig(emission=EmissionParams(count=2000))
CSVS = ("heatmap.csv", "bound_map.csv", "trace.csv", "decode.csv", "decode_summary.csv")


def test_defaults_valid_and_duration_check():
    cfg = ScenarioConfig()
    assert cfg.duration == 8.0 and cfg.emission.count == 50000
    with pytest.raises(ConfigError, match="^duration"):
        ScenarioConfig(duration=6.5)


def test_derive_seed():
    assert derive_seed(0, "emission") == derive_seed(0, "emission")
    seeds = {derive_seed(0, tag) for tag in SEED_TAGS}
    assert len(seeds) == len(SEED_TAGS)
    assert derive_seed(1, "noise") != derive_seed(0, "noise")
    assert derive_seed(0, "sweep-noise", 1) != derive_seed(0, "sweep-noise", 2)
    assert all(0 <= s < 2**64 for s in seeds)


def test_config_round_trip(tmp_path):
    cfg = dataclasses.replace(SMALL, power_model=UniformArray(16, 0.5), noise_sigma=0.01, master_seed=2**63 + 5)
    path = tmp_path / "c.toml"
    dump_config(cfg, path)
    assert load_config(path) == cfg
    assert config_from_dict({}) == ScenarioConfig()


def test_partial_config(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('wall_distance = 2.5\n[binding]\npreset = "dai"\n[power_model]\nkind = "array"\n')
    cfg = load_config(path)
    assert cfg.wall_distance == 2.5
    assert cfg.binding.receptors_per_tile == 565
    assert cfg.power_model == UniformArray()
    assert cfg.emission == EmissionParams()


@pytest.mark.parametrize("doc, field", [
    ({"emission": {"foo": 1}}, "emission.foo"),
    ({"emission": {"seed": 1}}, "emission.seed"),
    ({"bogus": 1}, "bogus"),
    ({"power_model": {"kind": "horn"}}, "power_model.kind"),
    ({"panel": {"width": -1.0}}, "panel.width"),
    ({"esc": {"dt": 0.05}}, "esc.dt"),
    ({"timing": {"w0": 0.3, "w1": 0.6}}, "timing.bit_times"),
    ({"type_code": 5}, "type_code"),
])
def test_config_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError) as exc:
        config_from_dict(doc)
    assert str(exc.value).startswith(field)


def test_bad_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("wall_distance = = 1\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_run_scenario_artifacts(tmp_path):
    art = run_scenario(SMALL, tmp_path)
    for name in CSVS + ("summary.txt", "config.toml", "heatmap.png", "trace.png"):
        assert (tmp_path / name).exists(), name
    assert art.summary["match"] is True
    assert art.summary["decode_status"] == "ok"
    grid, meta = read_grid_csv(art.heatmap_path)
    assert grid.sum() == art.summary["impacts_on_panel"]
    assert meta["distance"] == 1.0
    assert load_config(tmp_path / "config.toml") == SMALL


def test_empty_room(tmp_path):
    cfg = dataclasses.replace(SMALL, emission=EmissionParams(count=0), type_code=2)
    s = run_scenario(cfg, tmp_path, plots=False).summary
    assert s["detected"] is False and s["density_code"] == 0 and s["load_fraction"] == 0.0
    assert s["transmitted_message"].startswith("type=2 density=0")
    assert s["match"] is True


def test_byte_identical_runs(tmp_path):
    run_scenario(SMALL, tmp_path / "a")
    run_scenario(SMALL, tmp_path / "b")
    for name in CSVS + ("summary.txt", "config.toml", "heatmap.png", "trace.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_seed_isolation(tmp_path):
    run_scenario(SMALL, tmp_path / "quiet", plots=False)
    run_scenario(dataclasses.replace(SMALL, noise_sigma=0.004), tmp_path / "noisy", plots=False)
    for name in ("heatmap.csv", "bound_map.csv"):
        assert (tmp_path / "quiet" / name).read_bytes() == (tmp_path / "noisy" / name).read_bytes()
    assert (tmp_path / "quiet" / "trace.csv").read_bytes() != (tmp_path / "noisy" / "trace.csv").read_bytes()


def test_master_seed_changes_emission(tmp_path):
    run_scenario(SMALL, tmp_path / "a", plots=False)
    run_scenario(dataclasses.replace(SMALL, master_seed=1), tmp_path / "b", plots=False)
    assert (tmp_path / "a" / "heatmap.csv").read_bytes() != (tmp_path / "b" / "heatmap.csv").read_bytes()


@pytest.fixture(scope="module")
def default_outcomes():
    cfg = ScenarioConfig()
    drops = dispersion.sample_droplets(cfg.seeded_emission())
    return dict(zip((1.0, 4.0), dispersion.fly_to_walls(drops, [1.0, 4.0], cfg.air)))


@pytest.mark.parametrize("distance", [1.0, 4.0])
@pytest.mark.parametrize("type_code", range(4))
def test_end_to_end_fidelity(tmp_path, default_outcomes, distance, type_code):
    cfg = dataclasses.replace(ScenarioConfig(), wall_distance=distance, type_code=type_code)
    s = run_scenario(cfg, tmp_path, outcomes=default_outcomes[distance], plots=False).summary
    assert s["match"] is True
    assert s["decoded_message"].startswith(f"type={type_code} density={s['density_code']}")


def test_sweep_distance_single(tmp_path):
    rows = sweep_distance(SMALL, [1.5], tmp_path, plots=False)
    assert len(rows) == 1 and rows[0]["distance_m"] == 1.5
    assert (tmp_path / "sweep_distance.csv").read_text().splitlines()[0].startswith(
        "distance_m,hit_fraction,load_fraction,density_code")
    with pytest.raises(ConfigError):
        sweep_distance(SMALL, [], tmp_path)


def test_sweep_distance_matches_individual_runs(tmp_path):
    rows = sweep_distance(SMALL, [2.0, 1.0], tmp_path / "sweep", plots=False)
    solo = run_scenario(dataclasses.replace(SMALL, wall_distance=2.0), tmp_path / "solo", plots=False)
    assert rows[0]["hit_fraction"] == solo.summary["hit_fraction"]
    assert (tmp_path / "sweep" / "d2m" / "bound_map.csv").read_bytes() == (tmp_path / "solo" / "bound_map.csv").read_bytes()


def test_sweep_distance_load_nonincreasing(tmp_path):
    rows = sweep_distance(ScenarioConfig(), [1.0, 2.0, 3.0, 4.0], tmp_path, plots=False)
    loads = [r["load_fraction"] for r in rows]
    hits = [r["hit_fraction"] for r in rows]
    assert all(a >= b for a, b in zip(loads, loads[1:]))
    assert hits[0] > hits[-1]


def test_cluster_wider_and_sparser_when_farther():
    # Without drag enough droplets reach 4 m to compare cluster shapes.
    cfg = ScenarioConfig(emission=EmissionParams(count=20000), air=AirModel(drag_enabled=False))
    drops = dispersion.sample_droplets(cfg.seeded_emission())
    near, far = dispersion.fly_to_walls(drops, [1.0, 4.0], cfg.air)

    def lateral_spread(outcomes):
        ys = [o.y for o in outcomes if isinstance(o, dispersion.Impact)]
        return np.std(ys)

    assert lateral_spread(far) > lateral_spread(near)
    assert deposit(far, cfg.panel).counts.max() < deposit(near, cfg.panel).counts.max()
    assert deposit(far, cfg.panel).counts.max() > 0


def test_sweep_noise_extremes(tmp_path):
    rows = sweep_noise(ScenarioConfig(), [0.0, 10.0], 10, tmp_path, plots=True)
    assert rows[0]["message_error_rate"] == 0.0
    assert rows[1]["message_error_rate"] >= 0.9
    assert (tmp_path / "sweep_noise.csv").exists() and (tmp_path / "sweep_noise.png").exists()
    with pytest.raises(ConfigError, match="^trials_per_sigma"):
        sweep_noise(ScenarioConfig(), [0.0], 0)


def test_config_to_dict_is_toml_clean():
    d = config_to_dict(ScenarioConfig())
    assert "seed" not in d["emission"] and "seed" not in d["binding"]
    assert d["power_model"] == {"kind": "gaussian", "sigma": 3.0}
