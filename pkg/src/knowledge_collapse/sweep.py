"""Parameter grids with replications.

Each run's seed is a hash of the base seed, the cell's coordinates and the
replication index, so a run's result never depends on where its cell sits in
the grid, on other cells, or on how the runs are scheduled.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, UsageError
from .simulation import SimConfig, run_simulation

log = logging.getLogger(__name__)

SWEEPABLE = tuple(f.name for f in fields(SimConfig) if f.name != "seed")


def _canonical_value(v):
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, (int, float, np.integer, np.floating)):
        return float(v)
    raise ConfigError(f"axis values must be numbers, strings, booleans or null (got {v!r})")


def run_seed(base_seed: int, coords: dict, replication: int) -> int:
    """Stable 64-bit seed for one run."""
    key = json.dumps(
        {
            "base_seed": int(base_seed),
            "cell": {k: _canonical_value(v) for k, v in sorted(coords.items())},
            "replication": int(replication),
        },
        sort_keys=True,
    )
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class SweepGrid:
    axes: dict
    replications: int = 1
    base: SimConfig = field(default_factory=SimConfig)
    base_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ConfigError("replications must be an integer >= 1", field="replications")
        for name, values in self.axes.items():
            if name not in SWEEPABLE:
                raise ConfigError(f"unknown sweep axis {name!r}", field=name)
            if not isinstance(values, (list, tuple)) or not values:
                raise ConfigError(f"axis {name!r} needs a non-empty list of values", field=name)
            canon = [_canonical_value(v) for v in values]
            if len(set(map(repr, canon))) != len(canon):
                raise ConfigError(f"axis {name!r} repeats a value", field=name)
        for coords in self.cells():
            # fail fast on invalid cells rather than per run
            replace(self.base, **coords)
        object.__setattr__(self, "axes", {k: list(v) for k, v in self.axes.items()})

    @property
    def axis_names(self) -> list:
        return list(self.axes)

    def cells(self) -> list:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.axes.values())]

    def runs(self) -> list:
        out = []
        for coords in self.cells():
            for rep in range(self.replications):
                seed = run_seed(self.base_seed, coords, rep)
                out.append((coords, rep, replace(self.base, **coords, seed=seed)))
        return out

    @property
    def total_runs(self) -> int:
        return len(self.cells()) * self.replications

    def to_dict(self) -> dict:
        return {
            "axes": {k: list(v) for k, v in self.axes.items()},
            "replications": self.replications,
            "base_config": {k: v for k, v in self.base.to_dict().items() if k != "seed"},
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepGrid":
        allowed = {"name", "description", "axes", "replications", "base_config", "base_seed",
                   "emit_pdfs", "group_by"}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigError(f"unknown sweep field(s): {', '.join(unknown)}", field=unknown[0])
        if not isinstance(data.get("axes"), dict):
            raise ConfigError("sweep file needs an 'axes' object", field="axes")
        base = SimConfig.from_dict(dict(data.get("base_config", {})))
        base_seed = data.get("base_seed", 0)
        if not isinstance(base_seed, int) or isinstance(base_seed, bool) or base_seed < 0:
            raise ConfigError("base_seed must be a non-negative integer", field="base_seed")
        return cls(
            axes=data["axes"],
            replications=data.get("replications", 1),
            base=base,
            base_seed=base_seed,
        )


@dataclass(frozen=True)
class RunOutcome:
    coords: dict
    replication: int
    seed: int
    status: str
    final_hellinger: float = math.nan
    final_variance: float = math.nan
    error: str = ""
    final_densities: Optional[np.ndarray] = None


def _execute(job) -> RunOutcome:
    coords, rep, cfg, keep_pdf = job
    try:
        res = run_simulation(cfg)
    except Exception as exc:  # one bad run must not sink the sweep
        log.warning("run %s rep %d failed: %s", coords, rep, exc)
        return RunOutcome(coords, rep, cfg.seed, "error", error=f"{type(exc).__name__}: {exc}")
    return RunOutcome(
        coords,
        rep,
        cfg.seed,
        res.status,
        res.final_hellinger,
        float(res.variance_trajectory[-1]),
        final_densities=np.asarray(res.final_pdf.densities) if keep_pdf else None,
    )


@dataclass(frozen=True)
class SweepResult:
    grid: SweepGrid
    runs: tuple

    def values(self, **coords) -> np.ndarray:
        """Final distances of successful runs whose coordinates match ``coords``."""
        return np.array([
            r.final_hellinger for r in self.runs
            if r.status != "error" and all(r.coords.get(k) == v for k, v in coords.items())
        ])

    def cell_runs(self, coords: dict) -> list:
        return [r for r in self.runs if r.coords == coords]


def run_sweep(grid: SweepGrid, workers: int = 1, keep_pdfs: bool = False) -> SweepResult:
    """Execute every (cell, replication) run.

    Output order follows the grid (cells in axis order, then replication),
    whatever ``workers`` is.
    """
    jobs = [(c, r, cfg, keep_pdfs) for c, r, cfg in grid.runs()]
    if workers <= 1 or len(jobs) <= 1:
        outcomes = [_execute(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_execute, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return SweepResult(grid, tuple(outcomes))


def _sort_key(values):
    # None (no generations) sorts before any number
    return tuple((v is not None, v if v is not None else 0) for v in values)


def aggregate(result: SweepResult, by: Optional[Sequence[str]] = None) -> list:
    """Rows of ``{axis: value, ..., mean, std, n, n_failed}`` sorted by axis values.

    ``std`` is the sample standard deviation (0 for a single run). Runs with
    status ``error`` are counted in ``n_failed`` and left out of the moments.
    """
    by = list(result.grid.axis_names if by is None else by)
    for name in by:
        if name not in result.grid.axes:
            raise UsageError(f"unknown axis {name!r}; sweep axes are {result.grid.axis_names}")
    groups = {}
    for r in result.runs:
        key = tuple(r.coords[a] for a in by)
        groups.setdefault(key, []).append(r)
    rows = []
    for key in sorted(groups, key=_sort_key):
        runs = groups[key]
        vals = np.array([r.final_hellinger for r in runs if r.status != "error"])
        row = dict(zip(by, key))
        row["mean"] = float(vals.mean()) if vals.size else math.nan
        row["std"] = float(vals.std(ddof=1)) if vals.size > 1 else (0.0 if vals.size else math.nan)
        row["n"] = int(vals.size)
        row["n_failed"] = len(runs) - int(vals.size)
        rows.append(row)
    return rows


def mean_pdfs(result: SweepResult, by: Sequence[str]) -> list:
    """Average final public densities per group, for overlay plots."""
    groups = {}
    for r in result.runs:
        if r.final_densities is None or r.status == "error":
            continue
        key = tuple(r.coords[a] for a in by)
        groups.setdefault(key, []).append(r.final_densities)
    return [(dict(zip(by, k)), np.mean(groups[k], axis=0)) for k in sorted(groups, key=_sort_key)]
