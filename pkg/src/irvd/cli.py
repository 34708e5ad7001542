"""Command-line entry point: ``irvd <command> [options]``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 no-signal decode.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from irvd import codec, scenario, steering
from irvd.codec import VirusMessage
from irvd.errors import ConfigError

EXIT_CONFIG = 2
EXIT_NO_SIGNAL = 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario TOML file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    common.add_argument("--distance", type=float, help="wall distance in m (overrides the config)")
    common.add_argument("--noise", type=float, help="measurement noise sigma (overrides the config)")
    common.add_argument("--no-plots", action="store_true", help="skip PNG figures")

    p = argparse.ArgumentParser(prog="irvd", description="Reflector-panel virus detection simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sneeze", parents=[common], help="emit, fly, deposit and bind; write panel maps")
    t = sub.add_parser("transmit", parents=[common], help="steer the beam with an encoded report; write trace.csv")
    t.add_argument("--type-code", type=int, help="virus type 0-3 (default: config type_code)")
    t.add_argument("--density-code", type=int, default=0, help="density code 0-7 (default: 0)")
    r = sub.add_parser("receive", parents=[common], help="decode a trace CSV")
    r.add_argument("--trace", type=Path, required=True, help="trace CSV with header t,theta_deg,power")
    sub.add_parser("run", parents=[common], help="full pipeline from emission to decoded report")
    sd = sub.add_parser("sweep-distance", parents=[common], help="full pipeline at several wall distances")
    sd.add_argument("--distances", type=_float_list, default=[1.0, 4.0], help="comma list (default: 1,4)")
    sn = sub.add_parser("sweep-noise", parents=[common], help="message error rate versus noise sigma")
    sn.add_argument("--sigmas", type=_float_list, default=[0.0, 0.01, 0.02, 0.05, 0.1],
                    help="comma list (default: 0,0.01,0.02,0.05,0.1)")
    sn.add_argument("--trials", type=int, default=20, help="trials per sigma (default: 20)")
    return p


def _load(args) -> scenario.ScenarioConfig:
    cfg = scenario.load_config(args.config) if args.config else scenario.ScenarioConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.distance is not None:
        overrides["wall_distance"] = args.distance
    if args.noise is not None:
        overrides["noise_sigma"] = args.noise
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _cmd_sneeze(cfg, args) -> int:
    result = scenario.simulate_panel(cfg)
    scenario.write_panel_outputs(args.out, cfg, result)
    summary = {"wall_distance": cfg.wall_distance, "emitted": result.emitted,
               "impacts_on_panel": result.hits.total_impacts_on_panel, "hit_fraction": result.hit_fraction,
               "load_fraction": result.load.load_fraction, "detected": result.load.detected,
               "density_code": result.load.density_code}
    scenario.write_summary(args.out / "summary.txt", summary)
    if not args.no_plots:
        from irvd import plotting
        plotting.plot_panel(result.hits.counts, result.bound.bound, cfg.panel, cfg.wall_distance,
                            args.out / "heatmap.png")
    print(f"hit_fraction={result.hit_fraction:.4f} load_fraction={result.load.load_fraction:.4f} "
          f"density_code={result.load.density_code}")
    return 0


def _cmd_transmit(cfg, args) -> int:
    type_code = cfg.type_code if args.type_code is None else args.type_code
    msg = VirusMessage(type_code, args.density_code)
    schedule, trace = scenario.transmit(cfg, msg)
    steering.write_trace_csv(args.out / "trace.csv", trace)
    if not args.no_plots:
        from irvd import plotting
        plotting.plot_trace(trace, schedule, scenario.receive(cfg, trace), cfg.esc.theta_rx,
                            args.out / "trace.png")
    print(f"bits={''.join(map(str, msg.bits))} samples={len(trace.t)}")
    return 0


def _cmd_receive(cfg, args) -> int:
    try:
        trace = steering.read_trace_csv(args.trace)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"trace: {exc}") from exc
    result = scenario.receive(cfg, trace)
    codec.write_decode_csv(args.out / "decode.csv", result)
    codec.write_decode_summary(args.out / "decode_summary.csv", result)
    print(codec.summary_line(result))
    return EXIT_NO_SIGNAL if result.status == "no-signal" else 0


def _cmd_run(cfg, args) -> int:
    art = scenario.run_scenario(cfg, args.out, plots=not args.no_plots)
    s = art.summary
    print(f"density_code={s['density_code']} sent=[{s['transmitted_message']}] "
          f"decoded=[{s['decoded_message']}] status={s['decode_status']} match={s['match']}")
    return EXIT_NO_SIGNAL if s["decode_status"] == "no-signal" else 0


def _cmd_sweep_distance(cfg, args) -> int:
    rows = scenario.sweep_distance(cfg, args.distances, args.out, plots=not args.no_plots)
    for r in rows:
        print(f"distance={r['distance_m']:g} hit_fraction={r['hit_fraction']:.4f} "
              f"load_fraction={r['load_fraction']:.4f} density_code={r['density_code']}")
    return 0


def _cmd_sweep_noise(cfg, args) -> int:
    rows = scenario.sweep_noise(cfg, args.sigmas, args.trials, args.out, plots=not args.no_plots)
    for r in rows:
        print(f"sigma={r['sigma']:g} message_error_rate={r['message_error_rate']:.3f}")
    return 0


_COMMANDS = {"sneeze": _cmd_sneeze, "transmit": _cmd_transmit, "receive": _cmd_receive, "run": _cmd_run,
             "sweep-distance": _cmd_sweep_distance, "sweep-noise": _cmd_sweep_noise}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        args.out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"irvd: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"irvd: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
