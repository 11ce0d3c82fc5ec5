"""Configuration-driven command line entry point.

Subcommands: ``kernels`` (CSV dumps of the kernel family), ``energy``
(single-point breakdown JSON), ``sweep`` (density sweep CSV plus fit
JSON), ``verify`` (all estimate suites; nonzero exit on any failure),
``fock`` (truncated-space identity report).

Configuration is a JSON file merged over defaults, with dotted
``--set key=value`` overrides.  Unknown keys are rejected.  Every
artifact embeds the resolved configuration; outputs are deterministic
(no randomness, no environment dependence; wall-clock timings are
opt-in and excluded from the determinism guarantee).
"""

import argparse
import copy
import json
import os
import sys

import numpy as np

from . import energy as energy_mod
from . import estimates as estimates_mod
from . import fock as fock_mod
from .errors import ConfigError, LhyLabError
from .kernels import KernelSettings, PhysicalParams, correlation_set, \
    dump_kernels, solve_rho0

DEFAULT_CONFIG = {
    "a": 1.0,
    "delta": 0.1,
    "epsilon": 0.15,
    "rho0_margin": 0.0,
    "x": 1e-6,
    "x_list": [1e-6, 1e-7, 1e-8, 1e-9],
    "points_per_decade": 96,
    "order": 12,
    "tail_tol": 1e-5,
    "out_dir": "lhy-lab-out",
    "deterministic": True,
    "riemann": {
        "x": 1e-9,
        "L": 56000.0,
        "doublings": 3,
    },
    "verify": {
        "x_list": [1e-5, 1e-6, 1e-7, 1e-8],
        "tolerance_slope": 0.05,
    },
    "fock": {
        "M_lin": 4,
        "dims": 1,
        "h": 1.0,
        "nmax_list": [6, 8, 10],
        "rho0": 0.2,
        "include_timings": False,
    },
}

COMMANDS = ("kernels", "energy", "sweep", "verify", "fock")


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def _merge(defaults, override, prefix=""):
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(path, "unknown key")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(path, "expected an object")
            out[key] = _merge(defaults[key], value, prefix=path + ".")
        else:
            out[key] = value
    return out


def _apply_set(config, assignment):
    if "=" not in assignment:
        raise ConfigError(assignment, "expected key=value")
    key, _, raw = assignment.partition("=")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    parts = key.split(".")
    probe = DEFAULT_CONFIG
    for part in parts[:-1]:
        if not isinstance(probe, dict) or part not in probe:
            raise ConfigError(key, "unknown key")
        probe = probe[part]
        node = node[part]
    leaf = parts[-1]
    if not isinstance(probe, dict) or leaf not in probe:
        raise ConfigError(key, "unknown key")
    if isinstance(probe[leaf], dict):
        raise ConfigError(key, "cannot assign to a config section")
    node[leaf] = value
    return config


def load_config(path=None, overrides=()):
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        config = _merge(config, user)
    for assignment in overrides:
        config = _apply_set(config, assignment)
    _validate(config)
    return config


def _validate(config):
    if not config["x_list"]:
        raise ConfigError("x_list", "must contain at least one gas parameter")
    if not config["verify"]["x_list"]:
        raise ConfigError("verify.x_list", "must contain at least one gas parameter")
    for key in ("a", "x"):
        if not config[key] > 0:
            raise ConfigError(key, "must be positive")
    if not config["delta"] < config["epsilon"]:
        raise ConfigError("delta", "must be smaller than epsilon")
    if any(not 0 < x <= 1e-3 for x in config["x_list"]):
        raise ConfigError("x_list", "gas parameters must lie in (0, 1e-3]")
    if config["fock"]["dims"] not in (1, 3):
        raise ConfigError("fock.dims", "must be 1 or 3")


def _settings(config):
    return KernelSettings(points_per_decade=config["points_per_decade"],
                          order=config["order"], tail_tol=config["tail_tol"])


def _solved_params(config, x):
    params = PhysicalParams(a=config["a"], rho=x / config["a"] ** 3,
                            delta=config["delta"], epsilon=config["epsilon"],
                            rho0_margin=config["rho0_margin"])
    return params.with_rho0(solve_rho0(params.rho, params, _settings(config)))


# ---------------------------------------------------------------------------
# Deterministic serialization: scientific notation, 12 significant digits
# ---------------------------------------------------------------------------

def format_float(value):
    return f"{value:.11e}"


def _render(obj, indent):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_render(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad}  {_render(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return format_float(v) if np.isfinite(v) else json.dumps(None)
    return json.dumps(str(obj))


def emit(report, fmt, path, config=None, csv_header=None, csv_rows=None):
    """Write a report deterministically.

    JSON: stable field order, floats in scientific notation with 12
    significant digits (values round-trip exactly at that precision).
    CSV: comma separator, LF line endings, one header row; the resolved
    configuration is embedded as a leading comment line.
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if fmt == "json":
        payload = dict(report)
        if config is not None:
            payload["config"] = config
        text = _render(payload, 0) + "\n"
    elif fmt == "csv":
        lines = []
        if config is not None:
            lines.append("# config: " + json.dumps(config, sort_keys=True))
        lines.append(csv_header)
        for row in csv_rows:
            lines.append(",".join(format_float(v) if isinstance(v, float)
                                  else str(v) for v in row))
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_kernels(config, out_dir):
    params = _solved_params(config, config["x"])
    cs = correlation_set(params, _settings(config))
    echo = "# config: " + json.dumps(config, sort_keys=True)
    paths = dump_kernels(cs, out_dir, header_lines=(echo,))
    emit({"command": "kernels", "x": config["x"], "rho0": params.rho0,
          "files": sorted(os.path.basename(p) for p in paths.values())},
         "json", os.path.join(out_dir, "kernels.json"), config=config)
    return 0


def cmd_energy(config, out_dir):
    params = _solved_params(config, config["x"])
    cs = correlation_set(params, _settings(config))
    eb = energy_mod.energy_breakdown(params, cs, _settings(config))
    report = {"command": "energy", "x": config["x"], "rho": params.rho,
              "rho0": params.rho0}
    report.update(eb.as_dict())
    emit(report, "json", os.path.join(out_dir, "energy.json"), config=config)
    return 0


SWEEP_HEADER = "x,rho,rho0,E_rho,tilde_E_rho,lhy_ref,c2_hat"


def cmd_sweep(config, out_dir):
    result = energy_mod.density_sweep(config["x_list"],
                                      PhysicalParams(
                                          a=config["a"], rho=config["x_list"][0],
                                          delta=config["delta"],
                                          epsilon=config["epsilon"],
                                          rho0_margin=config["rho0_margin"]),
                                      _settings(config))
    rows = [[r.x, r.rho, r.rho0, r.E_rho, r.tilde_E_rho, r.lhy_ref, r.c2_hat]
            for r in result.rows]
    emit(None, "csv", os.path.join(out_dir, "sweep.csv"), config=config,
         csv_header=SWEEP_HEADER, csv_rows=rows)
    report = {"command": "sweep", "rows": [r.as_dict() for r in result.rows],
              "failures": [{"x": x, "error": msg} for x, msg in result.failures]}
    if len(result.rows) >= 2:
        fit = energy_mod.exponent_fit(
            [r.rho for r in result.rows],
            [abs(r.E_rho - r.tilde_E_rho) for r in result.rows])
        report["energy_difference_fit"] = fit.as_dict()
        report["c2_limit"] = energy_mod.LHY_COEFFICIENT
    emit(report, "json", os.path.join(out_dir, "sweep.json"), config=config)
    return 0


def cmd_verify(config, out_dir):
    reports = estimates_mod.run_all_suites(
        tuple(config["verify"]["x_list"]), a=config["a"],
        delta=config["delta"], epsilon=config["epsilon"],
        settings=_settings(config),
        tolerance_slope=config["verify"]["tolerance_slope"])
    all_pass = all(r.passed for r in reports)
    emit({"command": "verify", "pass": all_pass,
          "reports": [r.as_dict() for r in reports]},
         "json", os.path.join(out_dir, "verify.json"), config=config)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: worst_ratio={format_float(r.worst_ratio)} "
              f"trend={format_float(r.trend)}")
    return 0 if all_pass else 1


def cmd_fock(config, out_dir):
    fc = config["fock"]
    report = fock_mod.identity_report(
        M_lin=fc["M_lin"], dims=fc["dims"], h=fc["h"],
        nmax_sequence=tuple(fc["nmax_list"]), rho0=fc["rho0"],
        include_timings=fc["include_timings"])
    report = {"command": "fock", **report}
    emit(report, "json", os.path.join(out_dir, "fock.json"), config=config)
    return 0


HANDLERS = {"kernels": cmd_kernels, "energy": cmd_energy, "sweep": cmd_sweep,
            "verify": cmd_verify, "fock": cmd_fock}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lhy-lab",
        description="Dilute hard-sphere Bose gas laboratory: kernel dumps, "
                    "energy sweeps, estimate verification, Fock-space checks.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted config override")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or config["out_dir"]
    try:
        return HANDLERS[args.command](config, out_dir)
    except LhyLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
