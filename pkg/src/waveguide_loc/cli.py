"""Command-line front end: ``waveguide-loc {evolve,entropy,spectrum,sweep}``.

Configuration is layered: built-in defaults, then a ``--fig*`` preset, then
a ``key = value`` config file (``--config``), then explicit flags.  Angles
are given in units of pi (``xi_over_pi``, ``w_over_pi``); the list-valued
keys take comma-separated values.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .dynamics import default_time_grid
from .ensemble import EnsembleError, EnsembleSpec, run_ensemble
from .entanglement import fit_power_law
from .model import SystemParams
from .spectrum import SYNTHETIC_SPECTRA

log = logging.getLogger("waveguide_loc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


def _log_grid(lo_exp, hi_exp, n):
    return tuple(float(f"{x:.6g}") for x in np.logspace(lo_exp, hi_exp, n))


#: disorder grid for level statistics, w/pi from 1e-3 to 1
W_GRID_SPECTRUM = _log_grid(-3, 0, 10)
#: disorder grid for entropy scaling; w = 0 supplies the reference exponent
W_GRID_ENTROPY = (0.0,) + _log_grid(-4, 0, 9)


def _ints(s):
    return tuple(int(x) for x in _split(s))


def _floats(s):
    return tuple(float(x) for x in _split(s))


def _strs(s):
    return tuple(x.strip() for x in _split(s))


def _split(s):
    if isinstance(s, (list, tuple)):
        return s
    return [x for x in str(s).replace(" ", "").split(",") if x]


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s):
    return None if s in (None, "", "none") else int(s)


# key -> (parser, default)
CONFIG_KEYS = {
    "n_atoms": (_ints, (101,)),
    "xi_over_pi": (_floats, (0.125,)),
    "w_over_pi": (_floats, (0.0,)),
    "gamma": (float, 1.0),
    "realizations": (int, 200),
    "master_seed": (int, 0),
    "out": (str, "results"),
    "workers": (_opt_int, None),
    "t_max": (float, 1500.0),
    "n_times": (int, 301),
    "fit_times": (_floats, (500.0, 1000.0, 1500.0)),
    "fit_window": (_floats, (500.0, 1500.0)),
    "threshold": (float, 0.5),
    "sweep_key": (str, "w_over_pi"),
    "sweep_values": (_floats, ()),
    "observables": (_strs, ("gap_statistics",)),
    "synthetic_spectrum": (str, "none"),
    "dump_realizations": (_bool, False),
}
# keys that do not change results
NON_PHYSICAL = {"out", "workers"}

PRESETS = {
    "fig2": {"n_atoms": (101,), "xi_over_pi": (0.125,), "w_over_pi": (0.0, 0.01, 0.025, 0.1)},
    "fig3": {"n_atoms": (101,), "xi_over_pi": (0.125,), "w_over_pi": W_GRID_ENTROPY,
             "fit_window": (500.0, 1500.0)},
    "fig4ab": {"n_atoms": (101, 201, 301, 401, 501), "xi_over_pi": (0.125,),
               "w_over_pi": W_GRID_SPECTRUM},
    "fig4c": {"n_atoms": (501,), "xi_over_pi": (0.125, 0.25, 0.5), "w_over_pi": W_GRID_SPECTRUM},
}


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments allowed)."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return dict(cp["config"])


def resolve_config(preset: str | None = None, file_values: dict | None = None,
                   overrides: dict | None = None) -> dict:
    """Merge defaults, preset, config file and flag overrides; validate."""
    cfg = {k: default for k, (_, default) in CONFIG_KEYS.items()}
    layers = [PRESETS[preset] if preset else {}, file_values or {}, overrides or {}]
    for layer in layers:
        for key, raw in layer.items():
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None:
                continue
            try:
                cfg[key] = CONFIG_KEYS[key][0](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
    _validate(cfg)
    return cfg


def _validate(cfg):
    for key in ("n_atoms", "xi_over_pi", "w_over_pi"):
        if not cfg[key]:
            raise ConfigError(f"{key} is empty")
    try:
        for n in cfg["n_atoms"]:
            for x in cfg["xi_over_pi"]:
                for w in cfg["w_over_pi"]:
                    SystemParams(n, math.pi * x, math.pi * w, cfg["gamma"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["realizations"] < 1:
        raise ConfigError("realizations must be >= 1")
    if cfg["workers"] is not None and cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if cfg["n_times"] < 2 or not cfg["t_max"] > 0:
        raise ConfigError("time grid needs n_times >= 2 and t_max > 0")
    if len(cfg["fit_window"]) != 2:
        raise ConfigError("fit_window takes two values")
    if cfg["synthetic_spectrum"] not in ("none", *SYNTHETIC_SPECTRA):
        raise ConfigError(f"synthetic_spectrum must be none or one of {sorted(SYNTHETIC_SPECTRA)}")
    if cfg["sweep_key"] not in ("w_over_pi", "xi_over_pi", "n_atoms"):
        raise ConfigError("sweep_key must be w_over_pi, xi_over_pi or n_atoms")


def _require_odd(cfg):
    for n in cfg["n_atoms"]:
        if n % 2 == 0:
            raise ConfigError(f"central-flip dynamics requires odd n_atoms, got {n}")


def _params(cfg, n, x, w):
    return SystemParams(n, math.pi * x, math.pi * w, cfg["gamma"])


def _grid(cfg):
    return tuple(default_time_grid(cfg["t_max"], cfg["n_times"]))


def _tag(n, x, w):
    return f"N{n}_xi{x:g}_w{w:g}"


def _progress(msg):
    print(msg, file=sys.stderr, flush=True)


def _provenance(cfg, command):
    physical = {k: v for k, v in cfg.items() if k not in NON_PHYSICAL}
    return {"command": command, "config_hash": io.config_hash(physical),
            "master_seed": cfg["master_seed"], "version": __version__}


def cmd_evolve(cfg) -> Path:
    """Ensemble-averaged populations, P_tot and localization fits per (N, xi, w)."""
    _require_odd(cfg)
    obs = {"populations", "total_population", "localization_fit"}
    grid = _grid(cfg)
    fits_in_grid = tuple(t for t in cfg["fit_times"] if t <= cfg["t_max"])
    summary = {"provenance": _provenance(cfg, "evolve"), "runs": []}
    with io.ResultsDir(cfg["out"], "evolve") as rd:
        io.write_json(rd.path / "params.json", {"config": cfg, **summary["provenance"]})
        for n in cfg["n_atoms"]:
            for x in cfg["xi_over_pi"]:
                for w in cfg["w_over_pi"]:
                    tag = _tag(n, x, w)
                    _progress(f"evolve {tag}")
                    spec = EnsembleSpec(_params(cfg, n, x, w), cfg["realizations"],
                                        cfg["master_seed"], obs, grid,
                                        fit_times=_snap(fits_in_grid, grid))
                    res = run_ensemble(spec, workers=cfg["workers"])
                    io.write_trajectory_csv(rd.path / f"heatmap_{tag}.csv", res.times,
                                            res.mean["populations"])
                    io.write_series_csv(rd.path / f"ptot_{tag}.csv",
                                        ("t", "P_tot_mean", "P_tot_std", "P_tot_stderr"),
                                        res.times, res.mean["total_population"],
                                        res.std["total_population"],
                                        res.stderr["total_population"])
                    io.write_json(rd.path / f"trajectory_{tag}.json", io.trajectory_summary(
                        spec.params, cfg["master_seed"], res.times,
                        res.mean["total_population"]))
                    summary["runs"].append({
                        "N": n, "xi_over_pi": x, "w_over_pi": w,
                        "failures": res.failures,
                        "localization": {str(t): asdict(f) for t, f in res.fits.items()},
                    })
        io.write_json(rd.path / "summary.json", summary)
    return rd.final


def _snap(times, grid):
    g = np.asarray(grid)
    return tuple(float(g[np.argmin(np.abs(g - t))]) for t in times)


def cmd_entropy(cfg) -> Path:
    """Mean half-chain entropy traces and fitted decay exponents across the w grid."""
    _require_odd(cfg)
    grid = _grid(cfg)
    window = tuple(cfg["fit_window"])
    summary = {"provenance": _provenance(cfg, "entropy"), "records": []}
    with io.ResultsDir(cfg["out"], "entropy") as rd:
        io.write_json(rd.path / "params.json", {"config": cfg, **summary["provenance"]})
        for n in cfg["n_atoms"]:
            for x in cfg["xi_over_pi"]:
                fits = {}
                ws = tuple(cfg["w_over_pi"])
                if 0.0 not in ws:
                    ws = (0.0,) + ws
                for w in ws:
                    tag = _tag(n, x, w)
                    _progress(f"entropy {tag}")
                    spec = EnsembleSpec(_params(cfg, n, x, w), cfg["realizations"],
                                        cfg["master_seed"], {"entropy"}, grid)
                    res = run_ensemble(spec, workers=cfg["workers"])
                    io.write_entropy_csv(rd.path / f"entropy_{tag}.csv", res.times,
                                         res.mean["entropy"], res.stderr["entropy"])
                    fits[w] = fit_power_law(res.times, res.mean["entropy"], window)
                beta0 = fits[0.0].beta
                rows = []
                for w in ws:
                    rec = io.entropy_record(math.pi * w, math.pi * x, n, fits[w],
                                            fits[w].beta / beta0)
                    summary["records"].append(rec)
                    rows.append((w, fits[w].beta, fits[w].beta / beta0, fits[w].r_squared))
                io.write_series_csv(rd.path / f"beta_N{n}_xi{x:g}.csv",
                                    ("w_over_pi", "beta", "beta_ratio", "r2"), *zip(*rows))
        io.write_json(rd.path / "summary.json", summary)
    return rd.final


def _gap_spec(cfg, params):
    hook = SYNTHETIC_SPECTRA.get(cfg["synthetic_spectrum"])
    return EnsembleSpec(params, cfg["realizations"], cfg["master_seed"], {"gap_statistics"},
                        threshold=cfg["threshold"], spectrum_source=hook)


def _gap_row(params, res):
    g = res.gap_summary
    return {"w": params.disorder_width, "N": params.n_atoms, "xi": params.xi,
            "r_mean": g.r_mean, "r_stderr": g.r_stderr, "vI_mean": g.v_I_mean,
            "vI_stderr": g.v_I_stderr, "n_valid_mean": g.n_valid_mean}


def cmd_spectrum(cfg) -> Path:
    """Mean gap ratio and intrasample variance versus w for each (N, xi)."""
    rows = []
    summary = {"provenance": _provenance(cfg, "spectrum"), "failures": []}
    with io.ResultsDir(cfg["out"], "spectrum") as rd:
        io.write_json(rd.path / "params.json", {"config": cfg, **summary["provenance"]})
        for n in cfg["n_atoms"]:
            for x in cfg["xi_over_pi"]:
                for w in cfg["w_over_pi"]:
                    tag = _tag(n, x, w)
                    _progress(f"spectrum {tag}")
                    params = _params(cfg, n, x, w)
                    res = run_ensemble(_gap_spec(cfg, params), workers=cfg["workers"])
                    rows.append(_gap_row(params, res))
                    summary["failures"].extend(res.failures)
                    if cfg["dump_realizations"]:
                        io.write_realizations_csv(rd.path / f"realizations_{tag}.csv",
                                                  res.records)
        io.write_spectrum_csv(rd.path / "spectrum.csv", rows)
        io.write_json(rd.path / "summary.json", summary)
    return rd.final


def cmd_sweep(cfg) -> Path:
    """One ensemble per value of ``sweep_key``; scalar summaries in ``sweep.csv``."""
    values = cfg["sweep_values"]
    if not values:
        raise ConfigError("sweep_values is empty")
    obs = set(cfg["observables"])
    n0, x0, w0 = cfg["n_atoms"][0], cfg["xi_over_pi"][0], cfg["w_over_pi"][0]
    key = cfg["sweep_key"]
    header = [key, "r_mean", "r_stderr", "vI_mean", "vI_stderr", "P_tot_final", "S_final"]
    rows = []
    with io.ResultsDir(cfg["out"], "sweep") as rd:
        prov = _provenance(cfg, "sweep")
        io.write_json(rd.path / "params.json", {"config": cfg, **prov})
        for v in values:
            n, x, w = n0, x0, w0
            if key == "n_atoms":
                n = int(v)
            elif key == "xi_over_pi":
                x = v
            else:
                w = v
            params = _params(cfg, n, x, w)
            _progress(f"sweep {_tag(n, x, w)}")
            try:
                spec = EnsembleSpec(params, cfg["realizations"], cfg["master_seed"], obs,
                                    _grid(cfg), threshold=cfg["threshold"],
                                    fit_times=(),
                                    spectrum_source=SYNTHETIC_SPECTRA.get(cfg["synthetic_spectrum"]))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            res = run_ensemble(spec, workers=cfg["workers"])
            nan = math.nan
            row = [v, nan, nan, nan, nan, nan, nan]
            if "gap_statistics" in obs:
                g = res.gap_summary
                row[1:5] = [g.r_mean, g.r_stderr, g.v_I_mean, g.v_I_stderr]
            if "total_population" in obs:
                row[5] = res.mean["total_population"][-1]
            if "entropy" in obs:
                row[6] = res.mean["entropy"][-1]
            rows.append(row)
        io.write_series_csv(rd.path / "sweep.csv", header, *zip(*rows))
        io.write_json(rd.path / "summary.json", {"provenance": prov})
    return rd.final


COMMANDS = {"evolve": cmd_evolve, "entropy": cmd_entropy, "spectrum": cmd_spectrum,
            "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="waveguide-loc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key = value config file")
        group = s.add_mutually_exclusive_group()
        for preset in PRESETS:
            group.add_argument(f"--{preset}", dest="preset", action="store_const", const=preset)
        s.add_argument("--n-atoms")
        s.add_argument("--xi-over-pi")
        s.add_argument("--w-over-pi")
        s.add_argument("--gamma")
        s.add_argument("--realizations")
        s.add_argument("--master-seed")
        s.add_argument("--out")
        s.add_argument("--workers")
        s.add_argument("--t-max")
        s.add_argument("--n-times")
        s.add_argument("--fit-times")
        s.add_argument("--fit-window")
        s.add_argument("--threshold")
        s.add_argument("--sweep-key")
        s.add_argument("--sweep-values")
        s.add_argument("--observables")
        s.add_argument("--synthetic-spectrum")
        s.add_argument("--dump-realizations", action="store_const", const="true")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config", "preset") and v is not None}
    try:
        file_values = read_config_file(args.config) if args.config else None
        cfg = resolve_config(args.preset, file_values, flags)
        final = COMMANDS[args.command](cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnsembleError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(final)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
