"""Command-line sweeps over arrival rate, policy and seed.

Config files are flat ``key = value`` text; ``#`` starts a comment. Keys
are the :class:`~agvsched.simulator.SimConfig` field names, with radio and
controller settings prefixed ``radio.`` and ``gains.`` (for example
``radio.pathloss_exponent = 3`` or ``gains.ky = 64``). Unknown keys are
errors. ``sample_time`` sets the tick length for the radio as well.

Exit codes: 0 success, 1 invalid input, 2 failure while running.
"""

import argparse
import csv
import itertools
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import get_type_hints

from . import __version__
from ._backend import BACKEND
from .channel import RadioConfig
from .control import Gains
from .link_adaptation import BlerTableError, default_catalogue, load_bler_table
from .scheduler import PolicyKind
from .simulator import InitialPopulation, SimConfig, run

__all__ = [
    "ConfigError",
    "SweepSpec",
    "parse_config",
    "config_keys",
    "run_sweep",
    "main",
    "DEFAULT_LAMBDAS",
    "SUMMARY_COLUMNS",
]

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

DEFAULT_LAMBDAS = (2e-3, 3e-3, 4e-3, 5e-3, 6e-3, 7e-3, 8e-3)
SUMMARY_COLUMNS = (
    "lambda", "policy", "seed", "mean_ru_pct", "arrived", "successful",
    "unstable", "unstable_pct", "fallback_count",
)
TRACE_COLUMNS = ("tick", "n_active", "n_scheduled", "rb_used", "ru_pct", "fallbacks")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every issue found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _convert(kind, text):
    text = text.strip()
    if kind is bool:
        try:
            return _BOOL[text.lower()]
        except KeyError:
            raise ValueError(f"expected a boolean, got {text!r}") from None
    if kind is int:
        v = float(text) if any(c in text for c in ".eE") else int(text)
        if isinstance(v, float):
            if not v.is_integer():
                raise ValueError(f"expected an integer, got {text!r}")
            v = int(v)
        return v
    if kind is float:
        return float(text)
    if kind is PolicyKind:
        return PolicyKind.parse(text)
    if kind is InitialPopulation:
        return InitialPopulation(text.lower())
    if kind == "path":
        return None if text.lower() in ("", "none") else text
    return text


def _field_kinds():
    kinds = {}
    hints = get_type_hints(SimConfig)
    for f in fields(SimConfig):
        if f.name in ("radio", "gains"):
            continue
        t = hints[f.name]
        kinds[f.name] = "path" if f.name == "bler_table" else t
    rh = get_type_hints(RadioConfig)
    for f in fields(RadioConfig):
        if f.name != "sample_time":
            kinds[f"radio.{f.name}"] = rh[f.name]
    gh = get_type_hints(Gains)
    for f in fields(Gains):
        kinds[f"gains.{f.name}"] = gh[f.name]
    return kinds


def config_keys():
    """Accepted config keys, sorted."""
    return sorted(_field_kinds())


def parse_config_text(text, base_dir=None, source="<config>"):
    """Parse config text into a validated :class:`SimConfig`."""
    kinds = _field_kinds()
    problems = []
    top, radio, gains = {}, {}, {}
    seen = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{line_no}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in kinds:
            problems.append(f"{source}:{line_no}: unknown key {key!r}")
            continue
        if key in seen:
            problems.append(f"{source}:{line_no}: {key} repeats line {seen[key]}")
            continue
        seen[key] = line_no
        try:
            v = _convert(kinds[key], value)
        except ValueError as exc:
            problems.append(f"{source}:{line_no}: {key}: {exc}")
            continue
        if key == "bler_table" and v is not None and base_dir is not None:
            v = str((Path(base_dir) / v).resolve()) if not os.path.isabs(v) else v
        if key.startswith("radio."):
            radio[key[6:]] = v
        elif key.startswith("gains."):
            gains[key[6:]] = v
        else:
            top[key] = v
    if "sample_time" in top:
        radio["sample_time"] = top["sample_time"]
    try:
        radio_cfg = RadioConfig(**radio)
    except ValueError:
        # construct unchecked so validate() can itemise every problem
        radio_cfg = object.__new__(RadioConfig)
        for f in fields(RadioConfig):
            object.__setattr__(radio_cfg, f.name, radio.get(f.name, f.default))
    cfg = object.__new__(SimConfig)
    for f in fields(SimConfig):
        object.__setattr__(cfg, f.name, top.get(f.name, f.default))
    object.__setattr__(cfg, "radio", radio_cfg)
    object.__setattr__(cfg, "gains", Gains(**gains))
    problems.extend(f"{source}: {k}: {m}" for k, m in cfg.validate())
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path):
    """Read and validate a config file; missing keys take the defaults.

    Raises
    ------
    ConfigError
        Listing every unknown key, malformed value or failed range check.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from None
    return parse_config_text(text, base_dir=p.parent, source=str(path))


def format_config(cfg):
    """Config as ``key = value`` lines, readable by :func:`parse_config`."""
    lines = []
    for k, v in cfg.flat_items():
        if k == "radio.sample_time":
            continue
        if v is None:
            v = "none"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """Cartesian sweep; ``seeds`` are run indices under the config's master seed."""

    lambdas: tuple
    policies: tuple
    seeds: tuple
    out_dir: str
    trace: bool = False
    workers: int = 1

    def __post_init__(self):
        for name in ("lambdas", "policies", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def cells(self):
        pols = sorted({PolicyKind.parse(p) for p in self.policies}, key=lambda p: p.value)
        return list(itertools.product(sorted(set(self.lambdas)), pols, sorted(set(self.seeds))))


def _run_cell(args):
    base, lam, policy, seed, trace = args
    cfg = replace(base, arrival_rate=lam, policy=policy, replicate=seed)
    try:
        s = run(cfg, trace=trace)
    except Exception:  # reported per cell; the sweep carries on
        return lam, policy, seed, None, traceback.format_exc()
    row = {
        "lambda": repr(float(lam)),
        "policy": policy.value,
        "seed": str(seed),
        "mean_ru_pct": f"{s.mean_ru_pct:.6f}",
        "arrived": str(s.arrived),
        "successful": str(s.successful),
        "unstable": str(s.unstable),
        "unstable_pct": f"{s.unstable_pct:.6f}",
        "fallback_count": str(s.fallback_count),
    }
    return lam, policy, seed, (row, s.trace), None


def _trace_name(lam, policy, seed):
    return f"trace_lambda{float(lam)!r}_{policy.value}_seed{seed}.csv"


def run_sweep(spec, base):
    """Run every (lambda, policy, seed) cell and write the results.

    Writes ``summary.csv`` (sorted by lambda, policy, seed),
    ``manifest.txt`` and, with ``spec.trace``, one per-tick trace per cell.
    A failing cell is reported on stderr and skipped; the sweep continues.

    Returns
    -------
    int
        0 when every cell succeeded, 2 otherwise.
    """
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = spec.cells()
    jobs = [(base, lam, pol, seed, spec.trace) for lam, pol, seed in cells]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as ex:
            results = list(ex.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]

    rows = []
    failed = 0
    for lam, pol, seed, res, err in results:
        if res is None:
            failed += 1
            print(f"cell lambda={lam!r} policy={pol.value} seed={seed} failed:\n{err}", file=sys.stderr)
            continue
        row, trace = res
        rows.append(row)
        if spec.trace:
            with open(out / _trace_name(lam, pol, seed), "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TRACE_COLUMNS)
                for t in trace:
                    w.writerow((t[0], t[1], t[2], t[3], f"{t[4]:.6f}", t[5]))
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    _write_manifest(out / "manifest.txt", spec, base, cells, failed)
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def _write_manifest(path, spec, base, cells, failed):
    lines = [
        f"# agvsched {__version__} sweep manifest",
        f"kernel_backend = {BACKEND}",
        f"sweep.lambdas = {','.join(repr(float(x)) for x in sorted(set(spec.lambdas)))}",
        f"sweep.policies = {','.join(sorted({PolicyKind.parse(p).value for p in spec.policies}))}",
        f"sweep.seeds = {','.join(str(s) for s in sorted(set(spec.seeds)))}",
        f"sweep.cells = {len(cells)}",
        f"sweep.failed_cells = {failed}",
        f"sweep.trace = {'true' if spec.trace else 'false'}",
        f"bler_table = {base.bler_table or 'default (packaged)'}",
        "# base config (arrival_rate, policy and replicate are overridden per cell)",
    ]
    text = "\n".join(lines) + "\n" + format_config(base)
    Path(path).write_text(text)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _csv_list(conv):
    def parse(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        try:
            return tuple(conv(t) for t in items)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def build_parser():
    p = _Parser(
        prog="agvsched",
        description="Sweep downlink scheduling policies for edge-controlled AGVs.",
    )
    p.add_argument("--config", metavar="PATH", help="key = value config file (defaults otherwise)")
    p.add_argument("--policy", type=_csv_list(PolicyKind.parse), metavar="LIST",
                   default=tuple(PolicyKind),
                   help="instability, maxsnr and/or error (comma list; default all)")
    p.add_argument("--lambda", dest="lambdas", type=_csv_list(float), metavar="LIST",
                   default=DEFAULT_LAMBDAS, help="arrival rates per tick (default 2e-3..8e-3)")
    p.add_argument("--seeds", type=_csv_list(int), metavar="LIST", default=(0, 1, 2, 3, 4),
                   help="run indices under the master seed (default 0..4)")
    p.add_argument("--steps", type=int, metavar="N", help="ticks per run (overrides total_ticks)")
    p.add_argument("--bler-table", metavar="PATH", help="BLER table CSV (overrides the config)")
    p.add_argument("--out", metavar="DIR", default="results", help="output directory")
    p.add_argument("--trace", action="store_true", help="write per-tick trace CSVs")
    p.add_argument("--workers", type=int, default=1, metavar="N", help="parallel runs")
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved config and exit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        base = parse_config(args.config) if args.config else SimConfig()
        changes = {}
        if args.steps is not None:
            changes["total_ticks"] = args.steps
        if args.bler_table:
            changes["bler_table"] = str(Path(args.bler_table).resolve())
        base = replace(base, **changes)
        bad = base.validate()
        if bad:
            raise ConfigError(f"{k}: {m}" for k, m in bad)
        if any(not 0.0 < lam < 0.1 for lam in args.lambdas):
            raise ConfigError(["--lambda: every rate must lie in (0, 0.1)"])
        if any(s < 0 for s in args.seeds):
            raise ConfigError(["--seeds: run indices must be >= 0"])
        # load once up front so table errors surface as validation failures
        if base.bler_table:
            load_bler_table(base.bler_table)
        else:
            default_catalogue()
        spec = SweepSpec(args.lambdas, args.policy, args.seeds, args.out, args.trace, args.workers)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (BlerTableError, OSError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.print_config:
        sys.stdout.write(format_config(base))
        return EXIT_OK
    try:
        return run_sweep(spec, base)
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
