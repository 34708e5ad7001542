"""Simulation of droplet-borne virus detection on a reflector panel and
reporting of the result by pulse-width keyed beam steering."""

from irvd.codec import DecodeResult, TimingConfig, VirusMessage, decode_trace, encode_message
from irvd.dispersion import AirModel, EmissionParams, fly_to_walls, run_emission, sample_droplets
from irvd.errors import ConfigError, NoSignalError
from irvd.panel import BindingConfig, PanelGeometry, bind, deposit, summarize_load
from irvd.scenario import ScenarioConfig, load_config, run_scenario, sweep_distance, sweep_noise
from irvd.steering import EscParams, GaussianLobe, UniformArray, run_control

__version__ = "0.1.0"
