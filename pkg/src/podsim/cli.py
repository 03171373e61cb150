"""Command-line entry point: ``run``, ``sweep`` and ``validate``.

Config files are INI-style. Sections map onto the config dataclasses::

    [simulation]     top-level SimConfig fields (protocol, n_nodes, seed, ...)
    [network]        NetworkModel
    [adversary]      AdversaryConfig
    [protocol]       ProtocolParams
    [reputation]     ReputationParams
    [grid]           protocols, nodes, domains, scenarios (comma lists; sweep only)

Command-line flags override file values; scenario presets override both for
the fields they pin.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

from podsim.kademlia import ProtocolParams
from podsim.metrics import (
    aggregate,
    default_out_dir,
    emit_plot_data,
    write_aggregates_csv,
    write_records_csv,
)
from podsim.sim import (
    PROTOCOLS,
    AdversaryConfig,
    ConfigError,
    NetworkModel,
    ReputationParams,
    SimConfig,
    Simulation,
)

log = logging.getLogger("podsim")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

QUICK_NODES = 1000
QUICK_DURATION = 10 * 60_000.0

SCENARIOS: dict[str, dict] = {
    "happy_path": {"churn_rate": 0.0, "byzantine_fraction": 0.0},
    "churn": {"churn_rate": 0.5, "byzantine_fraction": 0.0},
    "byzantine_uniform": {
        "churn_rate": 0.0, "byzantine_fraction": 0.3, "byzantine_placement": "uniform",
        "adversary.strategy": "drop_all",
    },
    "byzantine_congregated": {
        "churn_rate": 0.0, "byzantine_fraction": 0.3, "byzantine_placement": "congregated",
        "adversary.strategy": "intra_only_drop",
    },
    "custom": {},
}

DEFAULT_GRID = {
    "protocols": ("kademlia", "fedkad", "sovkad"),
    "nodes": (1000, 8000, 16000),
    "domains": (2, 4, 6, 8),
    "scenarios": ("happy_path", "churn", "byzantine_uniform", "byzantine_congregated"),
}

_SECTIONS = {
    "network": NetworkModel,
    "adversary": AdversaryConfig,
    "protocol": ProtocolParams,
    "reputation": ReputationParams,
}
_OPTIONAL = {"max_domains": int, "inter_lookup_prob": float, "switch_at": float, "switch_to": str}
GRID_KEYS = {"protocol": "protocols", "n_nodes": "nodes", "n_domains": "domains", "scenario": "scenarios"}


@dataclass
class ScenarioSpec:
    name: str = "custom"
    overrides: dict = field(default_factory=dict)

    @classmethod
    def named(cls, name: str) -> "ScenarioSpec":
        if name not in SCENARIOS:
            raise ConfigError([f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}"])
        return cls(name, dict(SCENARIOS[name]))

    def apply(self, cfg: SimConfig, explicit: set[str] = frozenset()) -> SimConfig:
        """Pin the preset's fields. The adversary strategy is only a default:
        an explicit ``[adversary] strategy`` wins."""
        top, adv = {}, {}
        for key, value in self.overrides.items():
            if key.startswith("adversary."):
                name = key.split(".", 1)[1]
                if key not in explicit:
                    adv[name] = value
            else:
                top[key] = value
        if adv:
            top["adversary"] = dataclasses.replace(cfg.adversary, **adv)
        return dataclasses.replace(cfg, scenario=self.name, **top)


@dataclass
class GridSpec:
    protocols: tuple = DEFAULT_GRID["protocols"]
    nodes: tuple = DEFAULT_GRID["nodes"]
    domains: tuple = DEFAULT_GRID["domains"]
    scenarios: tuple = DEFAULT_GRID["scenarios"]

    def cells(self) -> list[tuple[str, int, int, str]]:
        return list(product(self.protocols, self.nodes, self.domains, self.scenarios))


@dataclass
class ParsedConfig:
    config: SimConfig
    scenario: ScenarioSpec
    grid: GridSpec
    seed_defaulted: bool = True
    source: str | None = None
    explicit: frozenset = frozenset()


def _coerce(name: str, raw: str, default):
    text = raw.strip()
    try:
        if name in _OPTIONAL:
            return None if text.lower() in ("", "none") else _OPTIONAL[name](text)
        if isinstance(default, bool):
            low = text.lower()
            if low in configparser.ConfigParser.BOOLEAN_STATES:
                return configparser.ConfigParser.BOOLEAN_STATES[low]
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ValueError(f"{name}: cannot parse {raw!r} as {type(default).__name__}") from None


def _split(raw: str, conv=str) -> tuple:
    return tuple(conv(x.strip()) for x in raw.split(",") if x.strip())


def read_config_file(path) -> tuple[dict, dict, set[str], list[str]]:
    """Returns (SimConfig kwargs, grid kwargs, explicitly set dotted keys, problems)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as e:
        raise ConfigError([f"cannot read config {path}: {e}"]) from e
    except configparser.Error as e:
        raise ConfigError([f"malformed config {path}: {e}"]) from e
    problems: list[str] = []
    top: dict = {}
    nested: dict[str, dict] = {}
    grid: dict = {}
    explicit: set[str] = set()
    base = SimConfig()
    top_fields = {f.name for f in dataclasses.fields(SimConfig)} - {"network", "adversary", "reputation", "params"}
    for section in parser.sections():
        items = parser.items(section, raw=True)
        if section == "simulation":
            for key, raw in items:
                if key not in top_fields:
                    problems.append(f"[simulation] unknown key {key!r}")
                    continue
                try:
                    top[key] = _coerce(key, raw, getattr(base, key))
                except ValueError as e:
                    problems.append(f"[simulation] {e}")
                explicit.add(key)
        elif section in _SECTIONS:
            cls = _SECTIONS[section]
            defaults = cls()
            names = {f.name for f in dataclasses.fields(cls)}
            for key, raw in items:
                if key not in names:
                    problems.append(f"[{section}] unknown key {key!r}")
                    continue
                try:
                    nested.setdefault(section, {})[key] = _coerce(key, raw, getattr(defaults, key))
                except ValueError as e:
                    problems.append(f"[{section}] {e}")
                explicit.add(f"{section}.{key}")
        elif section == "grid":
            for key, raw in items:
                try:
                    if key in ("protocols", "scenarios"):
                        grid[key] = _split(raw)
                    elif key in ("nodes", "domains"):
                        grid[key] = _split(raw, int)
                    else:
                        problems.append(f"[grid] unknown key {key!r}")
                except ValueError:
                    problems.append(f"[grid] {key}: expected a comma list of integers, got {raw!r}")
        else:
            problems.append(f"unknown section [{section}]")
    for section, kw in nested.items():
        attr = "params" if section == "protocol" else section
        top[attr] = dataclasses.replace(getattr(base, attr), **kw)
    return top, grid, explicit, problems


def parse_config(path=None, flags: argparse.Namespace | None = None) -> ParsedConfig:
    """Merge file, flags and scenario preset into a validated config."""
    top, grid_kw, explicit, problems = ({}, {}, set(), []) if path is None else read_config_file(path)
    flags = flags or argparse.Namespace()

    def flag_list(name, conv=str):
        raw = getattr(flags, name, None)
        if raw is None:
            return None
        try:
            return _split(str(raw), conv)
        except ValueError:
            problems.append(f"--{name}: cannot parse {raw!r}")
            return None

    for key, name, conv in (("protocol", "protocol", str), ("n_nodes", "nodes", int),
                            ("n_domains", "domains", int), ("scenario", "scenario", str)):
        vals = flag_list(name, conv)
        if vals:
            top[key] = vals[0]
            grid_kw[GRID_KEYS[key]] = vals
    if getattr(flags, "seed", None) is not None:
        top["seed"] = flags.seed
    if getattr(flags, "quick", False):
        top["sim_duration"] = QUICK_DURATION
        top["n_nodes"] = QUICK_NODES
        grid_kw["nodes"] = (QUICK_NODES,)
    # a single value in the file pins that grid axis; otherwise the default grid applies
    for key, axis in GRID_KEYS.items():
        if axis not in grid_kw and key in top:
            grid_kw[axis] = (top[key],)
        elif axis in grid_kw and key not in top:
            top[key] = grid_kw[axis][0]
    grid = GridSpec(**grid_kw)
    for p in grid.protocols:
        if p not in PROTOCOLS:
            problems.append(f"unknown protocol {p!r}; choose from {PROTOCOLS}")
    for s in grid.scenarios:
        if s not in SCENARIOS:
            problems.append(f"unknown scenario {s!r}; choose from {sorted(SCENARIOS)}")
    scen_name = top.pop("scenario", "custom")
    if scen_name not in SCENARIOS:
        raise ConfigError(problems)
    spec = ScenarioSpec.named(scen_name)
    cfg = spec.apply(SimConfig(**top), explicit)
    problems.extend(cfg.problems())
    if problems:
        raise ConfigError(problems)
    return ParsedConfig(cfg, spec, grid, seed_defaulted="seed" not in top,
                        source=str(path) if path else None, explicit=frozenset(explicit))


def cell_config(base: SimConfig, protocol: str, n_nodes: int, n_domains: int,
                scenario: str, explicit: set[str] = frozenset()) -> SimConfig:
    cfg = dataclasses.replace(base, protocol=protocol, n_nodes=n_nodes, n_domains=n_domains,
                              victim_domain=min(base.victim_domain, n_domains - 1), run_id="")
    return ScenarioSpec.named(scenario).apply(cfg, explicit)


def _metadata(cfg: SimConfig, wall: float, n_records: int, seed_defaulted: bool, extra=None) -> dict:
    meta = {
        "run_id": cfg.label(),
        "seed": cfg.seed,
        "seed_defaulted": seed_defaulted,
        "config": cfg.to_dict(),
        "records": n_records,
        "wall_seconds": round(wall, 3),
        "python": platform.python_version(),
    }
    if extra:
        meta.update(extra)
    return meta


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def execute(cfg: SimConfig, out_dir, seed_defaulted: bool = False, plots: bool = True):
    """Run one simulation and write its outputs; returns the aggregate stats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    sim = Simulation(cfg)
    records = sim.run()
    wall = time.perf_counter() - t0
    stats = aggregate(records)
    write_records_csv(records, out / "records.csv")
    write_aggregates_csv(stats, out / "aggregates.csv")
    if plots:
        emit_plot_data(stats, out / "plot")
    _write_json(out / "metadata.json", _metadata(
        cfg, wall, len(records), seed_defaulted,
        {"messages": dict(sorted(sim.sent.items())), "fate": dict(sorted(sim.fate.items())),
         "responses": dict(sorted(sim.responses.items()))},
    ))
    return stats


def run_scenario(parsed: ParsedConfig, out_dir) -> int:
    cfg = parsed.config
    log.info("running %s", cfg.label())
    stats = execute(cfg, out_dir, parsed.seed_defaulted)
    for s in stats:
        print(f"{s.protocol} {s.scenario} n={s.n_nodes} d={s.n_domains}: "
              f"success={s.success_rate:.4f} hops={s.hops_mean:.3f} messages={s.messages_mean:.2f} "
              f"lookups={s.count}")
    print(f"wrote {out_dir}")
    return EXIT_OK


def _cell_worker(args):
    cfg, out_dir = args
    try:
        return cfg.label(), execute(cfg, out_dir, plots=False), None
    except Exception as e:  # reported per cell; the sweep carries on
        return cfg.label(), None, f"{type(e).__name__}: {e}"


def sweep(parsed: ParsedConfig, out_dir, parallelism: int = 1) -> int:
    out = Path(out_dir)
    base = parsed.config
    jobs = []
    bad = []
    for protocol, n, d, scen in parsed.grid.cells():
        try:
            cfg = cell_config(base, protocol, n, d, scen, parsed.explicit).validate()
        except ConfigError as e:
            bad.append((f"{protocol}-{scen}-n{n}-d{d}", str(e)))
            continue
        jobs.append((cfg, out / "runs" / cfg.label()))
    log.info("sweep: %d cells, %d rejected, parallelism %d", len(jobs), len(bad), parallelism)
    t0 = time.perf_counter()
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_cell_worker, jobs))
    else:
        results = [_cell_worker(j) for j in jobs]
    merged = []
    for label, stats, err in results:
        if err is not None:
            bad.append((label, err))
        else:
            merged.extend(stats)
    merged.sort(key=lambda s: (s.protocol, s.scenario, s.n_nodes, s.n_domains))
    write_aggregates_csv(merged, out / "aggregates.csv")
    emit_plot_data(merged, out / "plot")
    _write_json(out / "sweep.json", {
        "cells": [j[0].label() for j in jobs],
        "failed": dict(sorted(bad)),
        "wall_seconds": round(time.perf_counter() - t0, 3),
        "parallelism": parallelism,
        "base_config": base.to_dict(),
    })
    for label, err in bad:
        print(f"cell {label} failed: {err}", file=sys.stderr)
    done = sum(1 for _, _, err in results if err is None)
    print(f"{done} of {len(parsed.grid.cells())} cells completed; wrote {out}")
    return EXIT_OK if not bad else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config file")
    common.add_argument("--protocol", help="kademlia, fedkad or sovkad (comma list for sweep)")
    common.add_argument("--nodes", help="network size |V| (comma list for sweep)")
    common.add_argument("--domains", help="domain count |D| (comma list for sweep)")
    common.add_argument("--scenario", help=f"one of {', '.join(SCENARIOS)} (comma list for sweep)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", metavar="DIR", help="output directory (default $PODSIM_OUT or ./results)")
    common.add_argument("--quick", action="store_true", help="1000 nodes, 10 simulated minutes")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="podsim", description="Node discovery simulator for domain overlays.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one simulation")
    sw = sub.add_parser("sweep", parents=[common], help="run a protocol x size x domains x scenario grid")
    sw.add_argument("--parallel", type=int, default=1, metavar="N", help="worker processes")
    sub.add_parser("validate", parents=[common], help="check a config without running it")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        parsed = parse_config(args.config, args)
    except ConfigError as e:
        print("config error:", file=sys.stderr)
        for p in e.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(json.dumps(parsed.config.to_dict(), indent=2, sort_keys=True))
        if len(parsed.grid.cells()) > 1:
            print(f"grid: {len(parsed.grid.cells())} cells")
        print("config ok")
        return EXIT_OK
    out_dir = args.out or default_out_dir()
    try:
        if args.command == "run":
            return run_scenario(parsed, out_dir)
        if getattr(args, "parallel", 1) < 1:
            print("--parallel must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        return sweep(parsed, out_dir, args.parallel)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        log.debug("run failed", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
