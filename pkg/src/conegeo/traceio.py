"""Per-chain trace CSV files.

Columns: ``step, accepted, trace, logdet, lambda_min, dist_sq, wall_ns`` and
then the upper triangle of the state as ``x_i_j``.  ``wall_ns`` is the only
column that changes between identical runs.
"""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .sampler import KERNELS, OBSERVABLES, ChainTrace

BASE_COLUMNS = ("step", "accepted", *OBSERVABLES, "wall_ns")
_NAME = re.compile(r"^(?P<kernel>[a-z_]+)_chain(?P<chain>\d+)\.csv$")


def trace_filename(kernel: str, chain_id: int) -> str:
    return f"{kernel}_chain{chain_id}.csv"


def write_trace(path, trace: ChainTrace) -> None:
    if trace.states is None:
        raise InvalidInput("trace has no state snapshots to write")
    d = trace.states.shape[1]
    iu = np.triu_indices(d)
    header = [*BASE_COLUMNS, *(f"x_{i}_{j}" for i, j in zip(*iu))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(trace.n_steps):
            w.writerow([k + 1, int(trace.accepted[k]),
                        *(repr(float(trace.observables[o][k])) for o in OBSERVABLES),
                        int(trace.wall_ns[k]),
                        *(repr(float(v)) for v in trace.states[k][iu])])


def read_trace(path, burn_in: int) -> ChainTrace:
    m = _NAME.match(Path(path).name)
    if not m or m["kernel"] not in KERNELS:
        raise InvalidInput(f"{path}: not a trace file name")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    if tuple(header[:len(BASE_COLUMNS)]) != BASE_COLUMNS or rows.size == 0:
        raise InvalidInput(f"{path}: unexpected trace layout")
    col = {name: i for i, name in enumerate(header)}
    state_cols = header[len(BASE_COLUMNS):]
    n = len(state_cols)
    d = int(round((np.sqrt(8 * n + 1) - 1) / 2))
    iu = np.triu_indices(d)
    states = np.zeros((rows.shape[0], d, d))
    states[:, iu[0], iu[1]] = rows[:, len(BASE_COLUMNS):]
    states[:, iu[1], iu[0]] = rows[:, len(BASE_COLUMNS):]
    return ChainTrace(
        kernel=m["kernel"], chain_id=int(m["chain"]),
        accepted=rows[:, col["accepted"]] > 0.5,
        observables={o: rows[:, col[o]] for o in OBSERVABLES},
        wall_ns=rows[:, col["wall_ns"]].astype(np.int64),
        burn_in=burn_in, states=states,
    )


def read_trace_dir(trace_dir, burn_in: int) -> dict[str, list[ChainTrace]]:
    """Traces grouped by kernel, ordered by chain id."""
    out: dict[str, list[ChainTrace]] = {}
    for path in sorted(Path(trace_dir).glob("*_chain*.csv")):
        if _NAME.match(path.name):
            t = read_trace(path, burn_in)
            out.setdefault(t.kernel, []).append(t)
    for traces in out.values():
        traces.sort(key=lambda t: t.chain_id)
    return out
