"""Seeded Monte Carlo power study over the voter model.

Each replication draws its own generator from a 64-bit hash of
``(root_seed, cell_id, rep)``, so results never depend on the order in which
cells or replications run, or on how many worker processes share the work.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .csvio import SCHEMAS, render_table, write_table
from .dgp import sample_units, voter_dgp
from .estimate import DesignSpec, EstimationError, fit_ols
from .numerics import std_normal_quantile

OUTCOMES = ("y1", "y2")
ESTIMATORS = ("linear", "factor")
DEFAULT_NS = (100, 500, 1000)
DEFAULT_QS = tuple(round(0.1 * i, 1) for i in range(1, 10))
DEFAULT_REPS = 1000


class SimulationError(ValueError):
    pass


def mu_for_support(q: float) -> float:
    """Mean of the voter noise giving support share ``q``: ``Phi^{-1}(q) + 0.25``."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise SimulationError(f"support q must lie in (0, 1), got {q}")
    return std_normal_quantile(q) + 0.25


@dataclass(frozen=True)
class SimCell:
    n: int
    q: float
    outcome: str = "y1"
    estimator: str = "linear"
    errors: str = "classical"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise SimulationError(f"n must be a positive integer, got {self.n}")
        mu_for_support(self.q)
        if self.outcome not in OUTCOMES:
            raise SimulationError(f"outcome must be one of {OUTCOMES}, got {self.outcome!r}")
        if self.estimator not in ESTIMATORS:
            raise SimulationError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.errors not in ("classical", "hc1"):
            raise SimulationError(f"errors must be classical or hc1, got {self.errors!r}")

    @property
    def mu(self) -> float:
        return mu_for_support(self.q)

    @property
    def cell_id(self) -> str:
        return f"n{self.n}_q{self.q:g}_{self.outcome}_{self.estimator}"

    @property
    def design(self) -> DesignSpec:
        if self.estimator == "linear":
            return DesignSpec.linear(self.outcome)
        return DesignSpec.factor(self.outcome)

    @property
    def tested(self) -> tuple:
        """Interaction coefficients recorded for this cell."""
        return tuple(t for t in self.design.terms if t.startswith("c:"))


@dataclass(frozen=True)
class SimGrid:
    cells: tuple
    reps: int = DEFAULT_REPS
    root_seed: int = 0
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        if not self.cells:
            raise SimulationError("grid has no cells")
        if int(self.reps) != self.reps or self.reps < 1:
            raise SimulationError(f"reps must be a positive integer, got {self.reps}")
        if not 0.0 < self.alpha < 1.0:
            raise SimulationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 <= int(self.root_seed) < 2 ** 64:
            raise SimulationError("root_seed must be an unsigned 64-bit integer")
        ids = [c.cell_id for c in self.cells]
        if len(set(ids)) != len(ids):
            raise SimulationError("grid cells must be distinct")

    @classmethod
    def default(cls, reps=DEFAULT_REPS, root_seed=0, alpha=0.05, ns=DEFAULT_NS, qs=DEFAULT_QS,
                outcomes=OUTCOMES, estimators=ESTIMATORS, errors="classical"):
        cells = [SimCell(n, q, o, e, errors) for n in ns for q in qs for o in outcomes for e in estimators]
        return cls(tuple(cells), reps, root_seed, alpha)


@dataclass(frozen=True)
class ReplicationResult:
    cell_id: str
    rep: int
    valid: bool
    coefs: tuple
    estimate: tuple
    se: tuple
    t: tuple
    p: tuple
    reject: tuple
    reason: str = ""


def stream_seed(root_seed: int, cell_id: str, rep: int) -> int:
    """64-bit seed for one replication, from a keyed BLAKE2b digest."""
    h = hashlib.blake2b(f"{int(root_seed)}:{cell_id}:{int(rep)}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def replication_rng(root_seed: int, cell_id: str, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(root_seed, cell_id, rep)))


def voter_sample(n: int, mu: float, rng: np.random.Generator, dgp=None) -> dict:
    """One simulated electorate with columns c, lambda, a, eps, y1, y2."""
    dgp = dgp or voter_dgp(mu)
    u = sample_units(dgp, n, rng)
    return {"c": u["z"], "lambda": u["lambda"], "a": u["a"], "eps": u["eps"], "y1": u["y"], "y2": u["y_t"]}


def _replicate(cell: SimCell, rep: int, root_seed: int, alpha: float, dgp) -> ReplicationResult:
    rng = replication_rng(root_seed, cell.cell_id, rep)
    data = voter_sample(cell.n, cell.mu, rng, dgp)
    names = cell.tested
    nan = (float("nan"),) * len(names)
    try:
        fit = fit_ols(data, cell.design, errors=cell.errors)
    except EstimationError as exc:
        return ReplicationResult(cell.cell_id, rep, False, names, nan, nan, nan, nan, (False,) * len(names), str(exc))
    idx = [fit.index(c) for c in names]
    p = tuple(float(fit.p[i]) for i in idx)
    if not all(math.isfinite(v) for v in p):
        return ReplicationResult(cell.cell_id, rep, False, names, nan, nan, nan, nan, (False,) * len(names),
                                 "degenerate fit (zero residual variance)")
    return ReplicationResult(
        cell.cell_id, rep, True, names,
        tuple(float(fit.coef[i]) for i in idx), tuple(float(fit.se[i]) for i in idx),
        tuple(float(fit.t[i]) for i in idx), p, tuple(v < alpha for v in p),
    )


def run_cell(cell: SimCell, reps: int, root_seed: int, alpha: float = 0.05, start: int = 0) -> list:
    """Replications ``start .. start + reps - 1`` of one cell."""
    dgp = voter_dgp(cell.mu)
    return [_replicate(cell, r, root_seed, alpha, dgp) for r in range(start, start + reps)]


def _chunk_job(args):
    cell, start, count, root_seed, alpha = args
    return run_cell(cell, count, root_seed, alpha, start)


def run_grid(grid: SimGrid, workers: int = 1, chunk: int = 250) -> list:
    """All replications of every cell, in (cell, rep) order regardless of ``workers``."""
    if workers < 1:
        raise SimulationError("workers must be >= 1")
    jobs = []
    for cell in grid.cells:
        for start in range(0, grid.reps, chunk):
            jobs.append((cell, start, min(chunk, grid.reps - start), grid.root_seed, grid.alpha))
    if workers == 1:
        parts = [_chunk_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_job, jobs))
    return [r for part in parts for r in part]


@dataclass(frozen=True)
class PowerRow:
    cell_id: str
    n: int
    q: float
    outcome: str
    estimator: str
    coef: str
    power: float
    mean_est: float
    mean_se: float
    valid_reps: int
    invalid_reps: int


@dataclass(frozen=True)
class PowerTable:
    rows: tuple
    reps: int
    alpha: float

    @property
    def low_precision(self) -> bool:
        return self.reps < 100

    def lookup(self, n, q, outcome, estimator, coef) -> PowerRow:
        for r in self.rows:
            if (r.n, r.q, r.outcome, r.estimator, r.coef) == (n, q, outcome, estimator, coef):
                return r
        raise KeyError((n, q, outcome, estimator, coef))


def power_table(results: Sequence[ReplicationResult], grid: SimGrid) -> PowerTable:
    """Rejection frequencies over valid replications, per cell and coefficient."""
    if not results:
        raise SimulationError("no replication results")
    by_cell = {}
    for r in results:
        by_cell.setdefault(r.cell_id, []).append(r)
    rows = []
    for cell in grid.cells:
        reps = by_cell.get(cell.cell_id, [])
        valid = [r for r in reps if r.valid]
        if not valid:
            raise SimulationError(f"cell {cell.cell_id} has no valid replications")
        for j, coef in enumerate(cell.tested):
            rej = np.array([r.reject[j] for r in valid], dtype=float)
            est = np.array([r.estimate[j] for r in valid])
            se = np.array([r.se[j] for r in valid])
            rows.append(PowerRow(cell.cell_id, cell.n, cell.q, cell.outcome, cell.estimator, coef,
                                 float(rej.mean()), float(est.mean()), float(se.mean()), len(valid),
                                 len(reps) - len(valid)))
    return PowerTable(tuple(rows), grid.reps, grid.alpha)


def results_rows(results: Iterable[ReplicationResult], grid: SimGrid):
    cells = {c.cell_id: c for c in grid.cells}
    for r in results:
        if not r.valid:
            continue
        c = cells[r.cell_id]
        for j, coef in enumerate(r.coefs):
            yield (r.cell_id, c.n, c.q, c.mu, c.outcome, c.estimator, r.rep, coef, r.estimate[j], r.se[j],
                   r.t[j], r.p[j], r.reject[j])


def power_rows(table: PowerTable):
    for r in table.rows:
        yield (r.cell_id, r.n, r.q, r.outcome, r.estimator, r.coef, r.power, r.mean_est, r.valid_reps)


def write_results_csv(path, results, grid) -> None:
    write_table(path, "results", SCHEMAS["results"], results_rows(results, grid))


def write_power_csv(path, table: PowerTable) -> None:
    write_table(path, "power", SCHEMAS["power"], power_rows(table))


def render_power_csv(table: PowerTable) -> str:
    return render_table("power", SCHEMAS["power"], power_rows(table))
