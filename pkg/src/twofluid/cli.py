"""Command-line entry point: ``twofluid run | analyze | check``.

Configuration files are INI: section names and keys combine into dotted keys
(``[grid] n = 32`` is ``grid.n``). Exit codes: 0 success, 2 configuration
error, 3 property-suite failure, 4 blow-up monitor trip.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import math
import os
import platform
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics.energy import CHANNELS, channel_fields, decay_report, energy_report
from .diagnostics.suites import SUITES, run_suite
from .integrator import RunConfig, run
from .littlewood_paley import BesovSpec, besov_norm, build_partition
from .model import PhysParams, load_state, save_state
from .spectral_field import GridSpec

log = logging.getLogger("twofluid")

EXIT_OK, EXIT_CONFIG, EXIT_SUITE, EXIT_TRIP = 0, 2, 3, 4
OUTPUT_ENV = "TWOFLUID_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _parse_band(text: str) -> tuple[int, int]:
    lo, hi = (int(v) for v in text.split(","))
    return lo, hi


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


# dotted key -> (parser, default); None default marks a required key
SCHEMA = {
    "grid.dim": (int, 2),
    "grid.n": (int, 32),
    "physics.gamma": (float, 2.0),
    "physics.b_bar": (_parse_floats, None),
    "init.amplitude": (float, 1e-3),
    "init.seed": (int, 0),
    "init.band": (_parse_band, (0, 1)),
    "time.t_end": (float, 20.0),
    "time.cfl": (float, 0.5),
    "time.snapshot_every": (int, 1),
    "monitors.blowup_threshold": (float, 10.0),
    "output.dir": (str, "runs/default"),
    "analysis.mu0": (float, 0.1),
    "analysis.eps": (float, 0.5),
}


@dataclass
class Settings:
    values: dict
    source: str

    @property
    def run_config(self) -> RunConfig:
        v = self.values
        grid = GridSpec(v["grid.dim"], v["grid.n"])
        params = (PhysParams.for_dim(grid.dim, v["physics.gamma"]) if v["physics.b_bar"] is None
                  else PhysParams(v["physics.gamma"], v["physics.b_bar"]))
        return RunConfig(grid, params, v["time.t_end"], v["time.cfl"], v["time.snapshot_every"],
                         v["init.amplitude"], v["init.seed"], v["init.band"],
                         v["monitors.blowup_threshold"])


def _key_lines(text: str) -> dict:
    """Map dotted keys to their line numbers in the raw INI text."""
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
        elif section and line and line[0] not in "#;" and ("=" in line or ":" in line):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            lines[f"{section}.{key}"] = i
    return lines


def load_settings(path) -> Settings:
    """Parse and validate an INI config; every error names ``section.key`` and its line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}: cannot read config ({err.strerror})") from None
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as err:
        raise ConfigError(f"{path}: {err}") from None
    where = _key_lines(text)
    values = {k: d for k, (_, d) in SCHEMA.items()}
    for section in parser.sections():
        for key, raw in parser.items(section):
            dotted = f"{section}.{key}"
            loc = f"{path}:{where.get(dotted, '?')}"
            if dotted not in SCHEMA:
                raise ConfigError(f"{loc}: unknown key '{dotted}'")
            try:
                values[dotted] = SCHEMA[dotted][0](raw)
            except ValueError:
                raise ConfigError(f"{loc}: invalid value {raw!r} for '{dotted}'") from None
    settings = Settings(values, str(path))
    try:
        cfg = settings.run_config
        cfg.params.check_dim(cfg.grid.dim)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None
    if not values["analysis.eps"] > 0:
        raise ConfigError(f"{path}:{where.get('analysis.eps', '?')}: 'analysis.eps' must be positive")
    return settings


def resolve_output_dir(settings: Settings, override: str | None) -> Path:
    """Command-line flag beats the environment, which beats the config file."""
    return Path(override or os.environ.get(OUTPUT_ENV) or settings.values["output.dir"])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _finite(obj):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_manifest(run_dir: Path, meta: dict) -> dict:
    files = sorted(p for p in run_dir.rglob("*") if p.is_file() and p.name != "manifest.json")
    meta = dict(meta)
    meta["files"] = {str(p.relative_to(run_dir)): _sha256(p) for p in files}
    _dump_json(_finite(meta), run_dir / "manifest.json")
    return meta


def write_reports(run_dir: Path, snapshots, mu0: float, eps: float) -> tuple[dict, dict]:
    if len(snapshots) < 2:
        raise ValueError("need at least two snapshots for reports")
    energy = energy_report(snapshots).to_dict(mu0)
    decay = decay_report(snapshots, eps).summary()
    _dump_json(_finite(energy), run_dir / "energy.json")
    _dump_json(_finite(decay), run_dir / "decay.json")
    return energy, decay


def write_channels_csv(path: Path, snapshots, eps: float) -> None:
    dc = decay_report(snapshots, eps)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_sym", "t_phys", *CHANNELS])
        for i, (t, _) in enumerate(snapshots):
            writer.writerow([repr(float(t)), repr(float(dc.times[i]))]
                            + [repr(float(dc.norms[c][i])) for c in CHANNELS])


def cmd_run(args) -> int:
    settings = load_settings(args.config)
    cfg = settings.run_config
    run_dir = resolve_output_dir(settings, args.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.ini").write_text(Path(args.config).read_text())
    start = time.perf_counter()
    record = run(cfg)
    wall = time.perf_counter() - start

    snap_dir = run_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for i, (t, W) in enumerate(record.snapshots):
        save_state(W, snap_dir / f"snap_{i:05d}.bpf",
                   {"t_sym": t, "t_phys": t / math.sqrt(W.params.gamma), "index": i})
    s_c = 1.0 + cfg.grid.dim / 2.0
    partition = build_partition(cfg.grid)
    record.write_csv(run_dir / "series.csv")
    mu0, eps = settings.values["analysis.mu0"], settings.values["analysis.eps"]
    reports = {}
    if len(record.snapshots) >= 2:
        write_channels_csv(run_dir / "channels.csv", record.snapshots, eps)
        energy, _ = write_reports(run_dir, record.snapshots, mu0, eps)
        reports = {"energy_ratio": energy.get("ratio")}
    final = record.snapshots[-1][1]
    monitor = record.monitor
    meta = {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in settings.values.items()},
        "seed": cfg.seed,
        "status": record.status,
        "message": record.message,
        "steps": len(record.series) - 1,
        "t_final": record.snapshots[-1][0],
        "wall_time_s": wall,
        "monitor": {
            "blowup_integral": monitor.blowup_integral,
            "max_gauss": monitor.max_gauss,
            "max_div_b": monitor.max_divb,
            "tripped": monitor.tripped,
            "reason": monitor.reason,
        },
        "final_norm": besov_norm(list(final.fields), BesovSpec(s_c), partition),
        **reports,
    }
    write_manifest(run_dir, meta)
    print(f"{record.status}: t_sym={meta['t_final']:.6g} steps={meta['steps']} "
          f"blowup_integral={monitor.blowup_integral:.6g} -> {run_dir}")
    if record.status != "completed":
        print(f"monitor: {record.message}", file=sys.stderr)
        return EXIT_TRIP
    return EXIT_OK


def load_snapshots(run_dir: Path) -> list:
    manifest = run_dir / "manifest.json"
    if not manifest.is_file():
        raise FileNotFoundError(f"{run_dir}: no manifest.json (not a run directory)")
    names = sorted(n for n in json.loads(manifest.read_text())["files"]
                   if n.startswith("snapshots/") and n.endswith(".bpf"))
    if not names:
        raise FileNotFoundError(f"{run_dir}: manifest lists no snapshots")
    out = []
    for name in names:
        W, meta = load_state(run_dir / name)
        out.append((meta["t_sym"], W))
    return out


def cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"{run_dir}: no manifest.json (not a run directory)")
    manifest = json.loads(manifest_path.read_text())
    mu0 = args.mu0 if args.mu0 is not None else manifest["config"]["analysis.mu0"]
    eps = args.eps if args.eps is not None else manifest["config"]["analysis.eps"]
    if not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    snapshots = load_snapshots(run_dir)
    dest = run_dir / "analysis" / f"mu0_{mu0:g}_eps_{eps:g}"
    dest.mkdir(parents=True, exist_ok=True)
    energy, decay = write_reports(dest, snapshots, mu0, eps)
    manifest.pop("files", None)
    write_manifest(run_dir, manifest)
    print(json.dumps(_finite({"energy": energy, "decay_final_over_initial":
                              decay["final_over_initial"]}), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        grid = GridSpec(args.dim, args.n)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    names = SUITES if args.suite == "all" else (args.suite,)
    table, failed = {}, []
    for name in names:
        start = time.perf_counter()
        verdicts = run_suite(name, grid, args.trials, args.seed)
        table[name] = {"verdicts": verdicts, "seconds": time.perf_counter() - start}
        for v in verdicts:
            print(f"{'PASS' if v['passed'] else 'FAIL'}  {name}.{v['check']}")
            if not v["passed"]:
                failed.append((name, v))
    report = _finite({"grid": [args.dim, args.n], "seed": args.seed, "trials": args.trials,
                      "suites": table, "passed": not failed})
    if args.output:
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        _dump_json(report, out)
    for name, v in failed:
        print(f"{name}.{v['check']} failed; seeds {v['failing_seeds']}", file=sys.stderr)
    return EXIT_SUITE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twofluid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configuration")
    p.add_argument("config", help="INI configuration file")
    p.add_argument("--output-dir", help=f"run directory (overrides ${OUTPUT_ENV} and output.dir)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="recompute energy and decay reports of a run")
    p.add_argument("run_dir")
    p.add_argument("--mu0", type=float, help="dissipation weight in the energy ratio")
    p.add_argument("--eps", type=float, help="regularity offset of the decay channels")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("check", help="run property suites")
    p.add_argument("suite", choices=(*SUITES, "all"))
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--n", type=int, default=32, help="points per axis")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="write the verdict table as JSON")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
