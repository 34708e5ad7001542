"""End-to-end IR-VD runs: configuration, seed derivation, artifacts and sweeps.

Sub-seeds are derived from ``master_seed`` with fixed component tags (see
``SEED_TAGS``), so changing one stage's randomness, e.g. the measurement
noise level, leaves the other stages' draws untouched.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from irvd import codec, dispersion, panel, steering
from irvd.codec import TimingConfig, VirusMessage
from irvd.dispersion import AirModel, EmissionParams
from irvd.errors import ConfigError, check
from irvd.panel import BindingConfig, PanelGeometry
from irvd.steering import EscParams, GaussianLobe, UniformArray

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

SEED_TAGS = {"emission": 1, "binding": 2, "noise": 3, "sweep-message": 4, "sweep-noise": 5}

PowerModelConfig = Union[GaussianLobe, UniformArray]


def derive_seed(master_seed: int, component: str, *index: int) -> int:
    """64-bit sub-seed for ``component`` (and optional trial index)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(SEED_TAGS[component], *index))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ScenarioConfig:
    emission: EmissionParams = field(default_factory=EmissionParams)
    air: AirModel = field(default_factory=AirModel)
    wall_distance: float = 1.0
    panel: PanelGeometry = field(default_factory=PanelGeometry)
    binding: BindingConfig = field(default_factory=BindingConfig)
    esc: EscParams = field(default_factory=EscParams)
    power_model: PowerModelConfig = field(default_factory=GaussianLobe)
    timing: TimingConfig = field(default_factory=TimingConfig)
    noise_sigma: float = 0.0
    type_code: int = 3
    master_seed: int = 0
    duration: float = 8.0
    guard_time: float = 2.0
    dip_threshold: float = 0.98

    def __post_init__(self):
        check(self.wall_distance > 0, "wall_distance", "must be > 0", self.wall_distance)
        check(self.noise_sigma >= 0, "noise_sigma", "must be >= 0", self.noise_sigma)
        check(int(self.type_code) == self.type_code and 0 <= self.type_code <= 3, "type_code",
              "must be an integer in [0, 3]", self.type_code)
        check(0 <= self.master_seed < 2**64, "master_seed", "must fit in 64 unsigned bits", self.master_seed)
        latest_end = self.timing.bit_times[-1] + self.timing.w1 + 0.5
        check(self.duration > latest_end, "duration", f"must exceed last bit time + w1 + 0.5 s = {latest_end:g}",
              self.duration)
        check(0 <= self.guard_time < self.timing.bit_times[0], "guard_time",
              "must lie in [0, first bit time)", self.guard_time)
        check(0 < self.dip_threshold < 1, "dip_threshold", "must lie in (0, 1)", self.dip_threshold)

    def seeded_emission(self) -> EmissionParams:
        return replace(self.emission, seed=derive_seed(self.master_seed, "emission"))

    def seeded_binding(self) -> BindingConfig:
        return replace(self.binding, seed=derive_seed(self.master_seed, "binding"))

    @property
    def noise_seed(self) -> int:
        return derive_seed(self.master_seed, "noise")


# -- config file -------------------------------------------------------------

_SECTIONS = {"emission": EmissionParams, "air": AirModel, "panel": PanelGeometry,
             "binding": BindingConfig, "esc": EscParams, "timing": TimingConfig}
# Per-stage seeds always come from master_seed.
_DERIVED = {"emission": {"seed"}, "binding": {"seed"}}
_POWER_KINDS = {"gaussian": GaussianLobe, "array": UniformArray}


def _field_names(cls, section):
    return {f.name for f in dataclasses.fields(cls)} - _DERIVED.get(section, set())


def config_from_dict(data: dict) -> ScenarioConfig:
    kwargs = {}
    top = {f.name for f in dataclasses.fields(ScenarioConfig)} - set(_SECTIONS) - {"power_model"}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a table")
            allowed = _field_names(_SECTIONS[key], key)
            unknown = set(value) - allowed
            if unknown:
                raise ConfigError(f"{key}.{sorted(unknown)[0]}: unknown key (allowed: {', '.join(sorted(allowed))})")
            kwargs[key] = _SECTIONS[key](**value)
        elif key == "power_model":
            spec = dict(value)
            kind = spec.pop("kind", "gaussian")
            if kind not in _POWER_KINDS:
                raise ConfigError(f"power_model.kind: must be one of {sorted(_POWER_KINDS)} (got {kind!r})")
            cls = _POWER_KINDS[kind]
            unknown = set(spec) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise ConfigError(f"power_model.{sorted(unknown)[0]}: unknown key for kind {kind!r}")
            kwargs[key] = cls(**spec)
        elif key in top:
            kwargs[key] = value
        else:
            raise ConfigError(f"{key}: unknown key")
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out: dict = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            d = dataclasses.asdict(value)
            for k in _DERIVED.get(f.name, ()):
                d.pop(k)
            out[f.name] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items() if v is not None}
        elif f.name == "power_model":
            kind = next(k for k, c in _POWER_KINDS.items() if isinstance(value, c))
            out[f.name] = {"kind": kind, **dataclasses.asdict(value)}
        else:
            out[f.name] = value
    return out


def dump_config(cfg: ScenarioConfig, path):
    with open(path, "wb") as fh:
        tomli_w.dump(config_to_dict(cfg), fh)


# -- runs --------------------------------------------------------------------

@dataclass
class RunArtifacts:
    heatmap_path: Path
    bound_map_path: Path
    trace_path: Path
    decode_path: Path
    summary: dict


@dataclass
class PanelResult:
    hits: panel.TileHitMap
    bound: panel.BoundState
    load: panel.PanelLoad
    emitted: int

    @property
    def hit_fraction(self) -> float:
        return self.hits.total_impacts_on_panel / self.emitted if self.emitted else 0.0


def simulate_panel(cfg: ScenarioConfig, outcomes=None) -> PanelResult:
    """Emission, flight, deposit, binding and load summary for one scenario."""
    emission = cfg.seeded_emission()
    if outcomes is None:
        outcomes = dispersion.run_emission(emission, cfg.wall_distance, cfg.air)
    hits = panel.deposit(outcomes, cfg.panel)
    bound = panel.bind(hits, cfg.seeded_binding())
    return PanelResult(hits, bound, panel.summarize_load(bound), emission.count)


def transmit(cfg: ScenarioConfig, msg: VirusMessage, noise_sigma: Optional[float] = None,
             noise_seed: Optional[int] = None):
    schedule = codec.encode_message(msg, cfg.timing)
    sigma = cfg.noise_sigma if noise_sigma is None else noise_sigma
    seed = cfg.noise_seed if noise_seed is None else noise_seed
    trace = steering.run_control(cfg.esc, schedule, cfg.duration, cfg.power_model, sigma, seed)
    return schedule, trace


def receive(cfg: ScenarioConfig, trace) -> codec.DecodeResult:
    return codec.decode_trace(trace, cfg.timing, cfg.guard_time, cfg.dip_threshold,
                              cfg.esc.dither_frequency)


def write_panel_outputs(out: Path, cfg: ScenarioConfig, result: PanelResult) -> tuple[Path, Path]:
    heatmap_path, bound_path = out / "heatmap.csv", out / "bound_map.csv"
    panel.write_grid_csv(heatmap_path, result.hits.counts, cfg.panel, cfg.wall_distance)
    panel.write_grid_csv(bound_path, result.bound.bound, cfg.panel, cfg.wall_distance)
    return heatmap_path, bound_path


def write_summary(path: Path, summary: dict):
    with open(path, "w") as fh:
        for key, value in summary.items():
            fh.write(f"{key}={value}\n")


def _format_message(msg: Optional[VirusMessage]) -> str:
    if msg is None:
        return "none"
    return f"type={msg.type_code} density={msg.density_code} bits={''.join(map(str, msg.bits))}"


def run_scenario(cfg: ScenarioConfig, out_dir, outcomes=None, plots: bool = True) -> RunArtifacts:
    """sample -> fly -> deposit -> bind -> summarize -> encode -> steer -> detect -> decode.

    ``outcomes`` may carry precomputed flight outcomes for ``cfg`` (used by
    the distance sweep, which flies each droplet once for all distances).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.toml")

    result = simulate_panel(cfg, outcomes)
    heatmap_path, bound_path = write_panel_outputs(out, cfg, result)

    sent = VirusMessage(cfg.type_code, result.load.density_code)
    schedule, trace = transmit(cfg, sent)
    trace_path = out / "trace.csv"
    steering.write_trace_csv(trace_path, trace)

    decoded = receive(cfg, trace)
    decode_path = out / "decode.csv"
    codec.write_decode_csv(decode_path, decoded)
    codec.write_decode_summary(out / "decode_summary.csv", decoded)

    match = decoded.message is not None and decoded.message == sent
    summary = {
        "wall_distance": cfg.wall_distance,
        "emitted": result.emitted,
        "impacts_on_panel": result.hits.total_impacts_on_panel,
        "hit_fraction": result.hit_fraction,
        "peak_tile_count": int(result.hits.counts.max()),
        "load_fraction": result.load.load_fraction,
        "detected": result.load.detected,
        "density_code": result.load.density_code,
        "transmitted_message": _format_message(sent),
        "decode_status": decoded.status,
        "decoded_message": _format_message(decoded.message),
        "match": match,
    }
    write_summary(out / "summary.txt", summary)

    if plots:
        from irvd import plotting
        plotting.plot_panel(result.hits.counts, result.bound.bound, cfg.panel, cfg.wall_distance,
                            out / "heatmap.png")
        plotting.plot_trace(trace, schedule, decoded, cfg.esc.theta_rx, out / "trace.png")
    return RunArtifacts(heatmap_path, bound_path, trace_path, decode_path, summary)


def sweep_distance(cfg: ScenarioConfig, distances: Sequence[float], out_dir, plots: bool = True) -> list[dict]:
    """Run the full scenario at each distance with identical sub-seeds."""
    if len(distances) == 0:
        raise ConfigError("distances: must be non-empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emission = cfg.seeded_emission()
    droplets = dispersion.sample_droplets(emission, cfg.air.droplet_density)
    per_distance = dispersion.fly_to_walls(droplets, distances, cfg.air)
    rows = []
    for d, outcomes in zip(distances, per_distance):
        sub = replace(cfg, wall_distance=float(d))
        art = run_scenario(sub, out / f"d{float(d):g}m", outcomes=outcomes, plots=plots)
        s = art.summary
        rows.append({"distance_m": float(d), "hit_fraction": s["hit_fraction"],
                     "load_fraction": s["load_fraction"], "density_code": s["density_code"],
                     "peak_tile_count": s["peak_tile_count"], "match": s["match"]})
    _write_rows(out / "sweep_distance.csv", rows)
    if plots:
        from irvd import plotting
        plotting.plot_distance_sweep(rows, out / "sweep_distance.png")
    return rows


def sweep_noise(cfg: ScenarioConfig, sigmas: Sequence[float], trials_per_sigma: int, out_dir=None,
                plots: bool = True) -> list[dict]:
    """Message error rate versus measurement-noise level.

    Trial ``j`` uses the same random message and the same unit-variance noise
    draw at every sigma, so the levels differ only in noise scale.
    """
    check(int(trials_per_sigma) == trials_per_sigma and trials_per_sigma >= 1, "trials_per_sigma",
          "must be an integer >= 1", trials_per_sigma)
    trials = []
    for j in range(trials_per_sigma):
        word = int(np.random.default_rng(derive_seed(cfg.master_seed, "sweep-message", j)).integers(32))
        trials.append((VirusMessage(word >> 3, word & 7), derive_seed(cfg.master_seed, "sweep-noise", j)))
    rows = []
    for sigma in sigmas:
        errors = wrong_count = 0
        for msg, seed in trials:
            _, trace = transmit(cfg, msg, float(sigma), seed)
            result = receive(cfg, trace)
            if result.message != msg:
                errors += 1
            if result.status != "ok":
                wrong_count += 1
        rows.append({"sigma": float(sigma), "trials": trials_per_sigma, "errors": errors,
                     "message_error_rate": errors / trials_per_sigma,
                     "undecodable_fraction": wrong_count / trials_per_sigma})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "sweep_noise.csv", rows)
        if plots:
            from irvd import plotting
            plotting.plot_noise_sweep(rows, out / "sweep_noise.png")
    return rows


def _write_rows(path: Path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
