"""Command-line front end.

    qdepth <command> [--config run.toml] [--section.key value ...] [--out PATH]

Commands: ``eval``, ``grid``, ``scan``, ``depth``, ``oracle-check``.  The
config file is TOML with a ``[state]`` table plus one table per command;
dotted flags override it field by field (``--state.n 2``, ``--depth.s_upper
0.999``).  A bare flag such as ``--s 0.5`` lands in the current command's
table.  Values are read as TOML literals, so ``--state.alpha '{re=1, im=0}'``
works.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .depth import DepthConfig, analyze_depth
from .errors import ConfigError, NumericalError
from .phasespace import PhaseGrid, evaluate, origin_value, pole_of, w_eval, w_via_charfn
from .states import StateSpec, parse_complex

log = logging.getLogger("qdepth")

COMMANDS = ("eval", "grid", "scan", "depth", "oracle-check")
ORACLE_TOL = 1e-6
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _literal(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def load_config(command: str, path: str | None, overrides: list[str]) -> dict:
    """Merge the TOML file with ``--dotted.key value`` overrides."""
    cfg: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                cfg = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if len(overrides) % 2:
        raise ConfigError(f"flag {overrides[-1]!r} needs a value")
    for flag, value in zip(overrides[::2], overrides[1::2]):
        if not flag.startswith("--") or len(flag) < 3:
            raise ConfigError(f"unexpected argument {flag!r}")
        key = flag[2:]
        if key in ("out", "format"):
            cfg[key] = value
            continue
        parts = key.split(".") if "." in key else [command, key]
        table = cfg
        for p in parts[:-1]:
            table = table.setdefault(p, {})
            if not isinstance(table, dict):
                raise ConfigError(f"{key}: {p} is not a table")
        table[parts[-1]] = _literal(value)
    return cfg


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(sec)


def _float(sec: dict, key: str, default=None) -> float:
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing parameter {key!r}")
        return default
    try:
        return float(sec.pop(key))
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number") from None


def _no_extra(sec: dict, name: str):
    if sec:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(sec)}")


def _check_s(state, s: float):
    pole = pole_of(state)
    if not s < pole:
        raise ConfigError(f"s = {s:g} is at or beyond the pole s = {pole:g}")


def _g17(v: float) -> str:
    return f"{v:.17g}"


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc}") from None


def _spec(cfg: dict) -> StateSpec:
    if "state" not in cfg:
        raise ConfigError("no [state] table given")
    return StateSpec.from_dict(cfg["state"])


def cmd_eval(cfg: dict, spec: StateSpec) -> str:
    state = spec.build()
    sec = _section(cfg, "eval")
    alpha = parse_complex(sec.pop("alpha", {"re": 0.0, "im": 0.0}), "alpha")
    s = _float(sec, "s", 0.0)
    _no_extra(sec, "eval")
    _check_s(state, s)
    w = float(evaluate(state, alpha, s))
    if cfg.get("format") == "json":
        return json.dumps({"re": alpha.real, "im": alpha.imag, "s": s, "w": w}) + "\n"
    return _g17(w) + "\n"


def cmd_grid(cfg: dict, spec: StateSpec) -> str:
    state = spec.build()
    sec = _section(cfg, "grid")
    s = _float(sec, "s", 0.0)
    center = parse_complex(sec.pop("center"), "center") if "center" in sec else None
    half_width = _float(sec, "half_width") if "half_width" in sec else None
    resolution = int(sec.pop("resolution", 101))
    _no_extra(sec, "grid")
    _check_s(state, s)
    if resolution < 2:
        raise ConfigError("resolution must be at least 2")
    return PhaseGrid.sample(state, s, center, half_width, resolution).to_csv()


def cmd_scan(cfg: dict, spec: StateSpec) -> str:
    state = spec.build()
    sec = _section(cfg, "scan")
    s_min, s_max = _float(sec, "s_min", -1.0), _float(sec, "s_max", 0.9)
    step = _float(sec, "step", 0.05)
    _no_extra(sec, "scan")
    if step <= 0 or s_max < s_min:
        raise ConfigError("scan needs step > 0 and s_max >= s_min")
    count = int(round((s_max - s_min) / step)) + 1
    s_values = s_min + step * np.arange(count)
    s_values = s_values[s_values <= s_max + 1e-12 * max(1.0, abs(s_max))]
    _check_s(state, float(s_values[-1]))
    lines = ["s,w"] + [f"{_g17(float(s))},{_g17(origin_value(state, float(s)))}"
                       for s in s_values]
    return "\n".join(lines) + "\n"


def depth_config(sec: dict) -> DepthConfig:
    names = {f.name for f in dataclasses.fields(DepthConfig)}
    unknown = set(sec) - names
    if unknown:
        raise ConfigError(f"unknown keys in [depth]: {sorted(unknown)}")
    kw = {}
    for k, v in sec.items():
        if k == "center":
            kw[k] = parse_complex(v, "center")
        elif k in ("resolution", "zoom_levels", "zoom_candidates"):
            kw[k] = int(v)
        else:
            kw[k] = float(v)
    try:
        return DepthConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_depth(cfg: dict, spec: StateSpec) -> str:
    state = spec.build()
    dcfg = depth_config(_section(cfg, "depth"))
    report, origin, glob = analyze_depth(state, dcfg)
    for r in (origin, glob):
        for note in r.diagnostics:
            log.info("%s: %s", r.method, note)
    summary = (f"status={report.status} method={report.method} s_m={report.s_m} "
               f"boundary_limited={str(report.boundary_limited).lower()}")
    # the summary shares stdout only when the report goes to a file
    print(summary, file=sys.stdout if cfg.get("out") else sys.stderr)
    return json.dumps(report.to_dict(), indent=2) + "\n"


def cmd_oracle_check(cfg: dict, spec: StateSpec) -> str:
    # the oracle works in the Fock basis, so closed forms are expanded
    state = spec.to_fock()
    sec = _section(cfg, "oracle-check")
    s_list = sec.pop("s", [-1.0, -0.5, 0.0])
    s_list = [float(v) for v in (s_list if isinstance(s_list, list) else [s_list])]
    half_width = _float(sec, "half_width", 1.5)
    center = parse_complex(sec.pop("center", {"re": 0.0, "im": 0.0}), "center")
    _no_extra(sec, "oracle-check")
    x = np.linspace(-half_width, half_width, 5)
    nodes = center + x[:, None] + 1j * x[None, :]
    worst = 0.0
    rows = []
    for s in s_list:
        _check_s(state, s)
        dev = float(np.max(np.abs(w_eval(state, nodes, s) - w_via_charfn(state, nodes, s))))
        rows.append({"s": s, "max_deviation": dev})
        worst = max(worst, dev)
    doc = {"max_deviation": worst, "tolerance": ORACLE_TOL, "per_s": rows}
    text = json.dumps(doc, indent=2) + "\n"
    if worst > ORACLE_TOL:
        raise NumericalError(f"oracle deviation {worst:.3e} exceeds {ORACLE_TOL:g}\n" + text)
    return text


HANDLERS = {"eval": cmd_eval, "grid": cmd_grid, "scan": cmd_scan, "depth": cmd_depth,
            "oracle-check": cmd_oracle_check}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdepth", description=__doc__.split("\n\n")[0],
                                allow_abbrev=False,
                                epilog="Extra --section.key VALUE flags override the config.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    return p


def main(argv: list[str] | None = None) -> int:
    args, rest = build_parser().parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.command, args.config, rest)
        fmt = cfg.get("format")
        if fmt not in (None, "csv", "json"):
            raise ConfigError(f"format must be csv or json, got {fmt!r}")
        text = HANDLERS[args.command](cfg, _spec(cfg))
        _emit(text, cfg.get("out"))
    except ConfigError as exc:
        print(f"qdepth: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"qdepth: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
