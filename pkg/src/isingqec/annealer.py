"""Software emulation of a digital annealer's search.

Each iteration ("sweep") a replica evaluates the energy change of flipping
every variable, collects those accepted by the Metropolis rule and flips one
of them chosen uniformly at random.  In replica-exchange mode the replicas sit
on a geometric temperature ladder and adjacent temperatures try to swap every
``exchange_interval`` sweeps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .hamiltonian import QuboProblem, evaluate

MODES = ("single", "replica_exchange")


@dataclass(frozen=True)
class AnnealerConfig:
    mode: str = "replica_exchange"
    num_replicas: int = 128
    t_max: float = 5.0
    t_min: float = 0.1
    sweeps: int = 10_000
    exchange_interval: int = 10
    stale_sweeps: int = 1_000
    seed: int | None = 0
    backend: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown annealing mode {self.mode!r}")
        if self.num_replicas < 1:
            raise ValueError("num_replicas must be positive")
        if self.mode == "replica_exchange" and self.num_replicas < 2:
            raise ValueError("replica exchange needs at least two replicas")
        if not 0 < self.t_min < self.t_max:
            raise ValueError("temperatures must satisfy 0 < t_min < t_max")
        if self.sweeps < 1 or self.exchange_interval < 1:
            raise ValueError("sweeps and exchange_interval must be positive")
        if self.stale_sweeps < 0:
            raise ValueError("stale_sweeps must be non-negative")

    def temperatures(self) -> np.ndarray:
        """Temperature per slot, coldest first."""
        if self.mode == "single":
            return np.full(self.num_replicas, self.t_max)
        return np.geomspace(self.t_min, self.t_max, self.num_replicas)

    def schedule(self) -> np.ndarray:
        """Per-sweep temperature in single mode (geometric cooling); empty otherwise."""
        if self.mode != "single":
            return np.empty(0)
        return np.geomspace(self.t_max, self.t_min, self.sweeps)


@dataclass
class AnnealResult:
    best_assignment: np.ndarray
    best_energy: int
    iterations_to_best: int
    feasible: bool
    sweeps_used: int
    trace: np.ndarray | None = field(default=None, repr=False)


def _generators(seed, count):
    seqs = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(s)) for s in seqs]


def _constraint_index(problem: QuboProblem):
    per_var: list[list[int]] = [[] for _ in range(problem.num_vars)]
    for c, (_, members) in enumerate(problem.constraints):
        for v in members:
            per_var[v].append(c)
    ptr = np.zeros(problem.num_vars + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(v) for v in per_var])
    idx = np.array([c for v in per_var for c in v], dtype=np.int64)
    odd = np.array([1 if b == -1 else 0 for b, _ in problem.constraints], dtype=np.uint8)
    return ptr, idx, odd


def minimize(problem: QuboProblem, config: AnnealerConfig | None = None, trace: bool = False) -> AnnealResult:
    """Search for a low-energy feasible assignment starting from all zeros."""
    config = config or AnnealerConfig()
    if problem.num_vars == 0:
        raise ValueError("empty problem")
    kernels = _backend.get_kernels(config.backend)
    indptr, indices, weights = problem.csr()
    cons_ptr, cons_idx, cons_odd = _constraint_index(problem)
    temps = np.ascontiguousarray(config.temperatures(), dtype=np.float64)
    gens = _generators(config.seed, len(temps) + 1)
    x, energy, best_sweep, feasible, used, tr = kernels.anneal(
        indptr, indices, weights,
        np.ascontiguousarray(problem.linear, dtype=np.int64), int(problem.constant),
        cons_ptr, cons_idx, cons_odd,
        temps, np.ascontiguousarray(config.schedule(), dtype=np.float64),
        int(config.sweeps), int(config.exchange_interval), int(config.stale_sweeps),
        config.mode == "replica_exchange", gens, bool(trace),
    )
    return AnnealResult(
        best_assignment=np.asarray(x, dtype=np.uint8),
        best_energy=int(energy),
        iterations_to_best=int(best_sweep),
        feasible=bool(feasible),
        sweeps_used=int(used),
        trace=tr[:used] if trace else None,
    )


def delta_energy(problem: QuboProblem, assignment, variable: int) -> int:
    """Energy change from flipping one variable, from its local field."""
    indptr, indices, weights = problem.csr()
    x = np.asarray(assignment, dtype=np.int64)
    lo, hi = indptr[variable], indptr[variable + 1]
    local = int(problem.linear[variable]) + int(weights[lo:hi] @ x[indices[lo:hi]])
    return local if x[variable] == 0 else -local


class LocalFieldState:
    """Assignment with cached energy and local fields, updated per flip."""

    def __init__(self, problem: QuboProblem, assignment=None):
        self.problem = problem
        self.indptr, self.indices, self.weights = problem.csr()
        if assignment is None:
            assignment = np.zeros(problem.num_vars, dtype=np.int64)
        self.x = np.array(assignment, dtype=np.int64)
        self.energy = evaluate(problem, self.x)
        self.field = problem.linear.astype(np.int64).copy()
        for i in np.nonzero(self.x)[0]:
            lo, hi = self.indptr[i], self.indptr[i + 1]
            self.field[self.indices[lo:hi]] += self.weights[lo:hi]

    def delta(self, i: int) -> int:
        return int(self.field[i]) if self.x[i] == 0 else -int(self.field[i])

    def flip(self, i: int) -> int:
        de = self.delta(i)
        step = 1 if self.x[i] == 0 else -1
        self.x[i] ^= 1
        self.energy += de
        lo, hi = self.indptr[i], self.indptr[i + 1]
        self.field[self.indices[lo:hi]] += step * self.weights[lo:hi]
        return de


def write_trace_csv(result: AnnealResult, path) -> None:
    """Per-sweep energies as ``sweep,replica,energy`` rows."""
    if result.trace is None:
        raise ValueError("result carries no trace; run minimize(..., trace=True)")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep", "replica", "energy"])
        for s, row in enumerate(result.trace, start=1):
            for r, e in enumerate(row):
                writer.writerow([s, r, int(e)])
