"""CSV/JSON exports and the results directory layout.

Floats are written with ``repr`` so files round-trip exactly and reruns with
the same seed reproduce them byte for byte.  Provenance lives in sibling
JSON files, never inside the CSVs.
"""

from __future__ import annotations

import contextlib
import csv
import datetime as _dt
import hashlib
import json
import math
import shutil
import tempfile
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

TRAJECTORY_HEADER = ("t", "site", "population")
ENTROPY_HEADER = ("t", "S_mean", "S_stderr")
SPECTRUM_HEADER = ("w", "N", "xi", "r_mean", "r_stderr", "vI_mean", "vI_stderr", "n_valid_mean")
REALIZATION_HEADER = ("seed", "r_a", "v_I", "n_valid")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def config_hash(config: Mapping) -> str:
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _write_rows(path, header, rows: Iterable) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def write_trajectory_csv(path, times, populations) -> Path:
    """Long-format ``t,site,population``; ``site`` is 1-based."""
    pops = np.asarray(populations)
    n = pops.shape[0]
    rows = ((t, j + 1, pops[j, k]) for k, t in enumerate(times) for j in range(n))
    return _write_rows(path, TRAJECTORY_HEADER, rows)


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`write_trajectory_csv`: ``(times, populations[N, T])``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times = np.unique(data[:, 0])
    n = int(data[:, 1].max())
    return times, data[:, 2].reshape(len(times), n).T


def trajectory_summary(params, seed, times, p_tot, **extra) -> dict:
    out = {"params": params.to_dict(), "seed": int(seed), "times": list(map(float, times)),
           "P_tot": list(map(float, p_tot))}
    out.update(extra)
    return out


def write_series_csv(path, header, *columns) -> Path:
    return _write_rows(path, header, zip(*columns))


def write_entropy_csv(path, times, s_mean, s_stderr) -> Path:
    return write_series_csv(path, ENTROPY_HEADER, times, s_mean, s_stderr)


def entropy_record(w, xi, n_atoms, fit, beta_ratio) -> dict:
    return {"w": float(w), "xi": float(xi), "N": int(n_atoms), "beta": fit.beta,
            "beta_ratio": float(beta_ratio), "r2": fit.r_squared, "window": list(fit.window)}


def write_spectrum_csv(path, rows: Iterable[Mapping]) -> Path:
    return _write_rows(path, SPECTRUM_HEADER, ([r[k] for k in SPECTRUM_HEADER] for r in rows))


def write_realizations_csv(path, records: Iterable[Mapping]) -> Path:
    return _write_rows(path, REALIZATION_HEADER,
                       ([r[k] for k in REALIZATION_HEADER] for r in records))


def read_csv(path) -> list[dict]:
    with Path(path).open() as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


class ResultsDir:
    """Stage outputs in a scratch directory; publish as ``root/experiment/<timestamp>/``.

    Use as a context manager.  Files are written into ``path``; on a clean
    exit the directory is renamed to its final place (``final``).  Nothing
    is left behind if the body raises.
    """

    def __init__(self, root, experiment: str):
        self.base = Path(root) / experiment
        self.path: Path | None = None
        self.final: Path | None = None

    def __enter__(self) -> "ResultsDir":
        self.base.mkdir(parents=True, exist_ok=True)
        self.path = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.base))
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.path, ignore_errors=True)
            with contextlib.suppress(OSError):
                self.base.rmdir()
            return False
        stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S")
        final = self.base / stamp
        k = 1
        while final.exists():
            final = self.base / f"{stamp}-{k}"
            k += 1
        self.path.rename(final)
        self.final = final
        return False
