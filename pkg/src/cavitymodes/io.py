"""Flat-file output: CSV series with self-describing headers, JSON reports.

Every file echoes the fully resolved configuration and the seed list as
comment lines (CSV) or a "config" object (JSON), so a run can be reproduced
from any one of its outputs. Formatting is deterministic: no timestamps,
sorted keys, shortest round-trip float representation.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .density import DensityMatrix, density_from_dict, density_to_dict


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer, bool)):
        return str(value)
    return str(value)


def config_header_lines(config: dict, seeds=None) -> list:
    lines = [f"# {key} = {_fmt(value)}" for key, value in sorted(config.items())]
    if seeds is not None:
        lines.append(f"# seeds = {list(int(s) for s in seeds)}")
    return lines


def write_csv(path, columns, config: dict, seeds=None) -> Path:
    """columns: list of (name, 1-d array); all must share a length."""
    path = Path(path)
    names = [name for name, _ in columns]
    arrays = [np.asarray(values) for _, values in columns]
    length = len(arrays[0])
    for name, arr in zip(names, arrays):
        if len(arr) != length:
            raise ValueError(f"column {name!r} has {len(arr)} rows, expected {length}")
    lines = config_header_lines(config, seeds)
    lines.append(",".join(names))
    for i in range(length):
        lines.append(",".join(_fmt(arr[i]) for arr in arrays))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Inverse of write_csv: returns (columns dict, header comment lines)."""
    header, names, rows = [], None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            header.append(line)
        elif names is None:
            names = line.split(",")
        elif line:
            rows.append([float(x) for x in line.split(",")])
    data = np.asarray(rows) if rows else np.zeros((0, len(names or [])))
    return {name: data[:, i] for i, name in enumerate(names or [])}, header


def write_json(path, payload: dict, config: dict, seeds=None) -> Path:
    path = Path(path)
    body = dict(payload)
    body["config"] = {k: _fmt(v) if isinstance(v, float) else v for k, v in config.items()}
    if seeds is not None:
        body["seeds"] = [int(s) for s in seeds]
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_density_json(path, rho: DensityMatrix, config: dict, seeds=None) -> Path:
    return write_json(path, density_to_dict(rho), config, seeds)


def read_density_json(path) -> DensityMatrix:
    return density_from_dict(json.loads(Path(path).read_text()))


def write_operator_csv(path, op, config: dict) -> Path:
    """Debug dump of a sparse operator as (row, col, re, im) tuples."""
    coo = op.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return write_csv(
        path,
        [
            ("row", coo.row[order]),
            ("col", coo.col[order]),
            ("re", coo.data[order].real),
            ("im", coo.data[order].imag),
        ],
        config,
    )


def write_event_log(path, record, config: dict) -> Path:
    """Per-trajectory event log: samples and jumps in time order."""
    times = np.concatenate([record.times, record.jump_times])
    kinds = np.concatenate([np.zeros(record.times.size), np.ones(record.jump_times.size)])
    n_exp = np.concatenate([record.n_expect, np.full(record.jump_times.size, np.nan)])
    a_re = np.concatenate([record.a_expect.real, np.full(record.jump_times.size, np.nan)])
    a_im = np.concatenate([record.a_expect.imag, np.full(record.jump_times.size, np.nan)])
    order = np.lexsort((kinds, times))
    path = Path(path)
    lines = config_header_lines(config, [record.seed])
    lines.append("kappa_t,event,n_expect,re_a,im_a")
    for i in order:
        kind = "jump" if kinds[i] else "sample"
        if kinds[i]:
            lines.append(f"{_fmt(times[i])},{kind},,,")
        else:
            lines.append(
                f"{_fmt(times[i])},{kind},{_fmt(n_exp[i])},{_fmt(a_re[i])},{_fmt(a_im[i])}"
            )
    path.write_text("\n".join(lines) + "\n")
    return path
