"""Monte Carlo experiments and their analysis.

A trial samples errors, decodes the syndrome and scores the residual.  Trial
seeds are a pure function of ``(master seed, noise model, d, p, trial
number)``, so a trial can be replayed on its own, decoders compared on the
same error samples, and trials run in any order or process.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from .annealer import AnnealerConfig
from .decoder import DECODERS, decode
from .hamiltonian import DEFAULT_H, DEFAULT_J
from .lattice import CodeLayout, build_layout
from .mwpm import LARGE_COMPONENT_POLICIES, MAX_COMPONENT, MatchingCapacityError
from .correction import residual_failures
from .noise import MODELS, NoiseSpec, extract_syndrome, sample

CSV_SCHEMA_VERSION = 1
SUMMARY_COLUMNS = ("d", "p", "P_L", "SE", "decoder", "Ja", "Jb", "mean_iterations")


class FitError(ValueError):
    """Data cannot determine the requested fit."""


class UndefinedRateError(ValueError):
    """A rate was requested over an empty population."""


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment grid: every ``(d, p, (Ja, Jb))`` gets ``trials`` trials."""

    distances: tuple[int, ...]
    model: str
    ps: tuple[float, ...]
    trials: int
    decoder: str = "da"
    couplings: tuple[tuple[int, int], ...] = ((0, 0),)
    J: int = DEFAULT_J
    h: int = DEFAULT_H
    rounds: int | None = None
    convention: str = "total"
    z_only: bool = False
    master_seed: int = 0
    annealer: AnnealerConfig = field(default_factory=AnnealerConfig)
    max_component: int = MAX_COMPONENT
    large_components: str = "error"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.distances or not self.ps or not self.couplings:
            raise ValueError("distances, ps and couplings must be nonempty")
        if self.model not in MODELS:
            raise ValueError(f"unknown noise model {self.model!r}")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if any(d < 2 for d in self.distances):
            raise ValueError("code distances must be at least 2")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.large_components not in LARGE_COMPONENT_POLICIES:
            raise ValueError(f"large_components must be one of {', '.join(LARGE_COMPONENT_POLICIES)}")

    def noise(self, p: float) -> NoiseSpec:
        return NoiseSpec(self.model, p, self.rounds, self.convention, self.z_only)

    def points(self) -> list[tuple[int, float, tuple[int, int]]]:
        couplings = self.couplings if self.decoder == "da_y_coupled" else ((0, 0),)
        return [(d, p, jj) for d in self.distances for p in self.ps for jj in couplings]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["annealer"] = asdict(self.annealer)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data["annealer"] = AnnealerConfig(**data.get("annealer", {}))
        for key in ("distances", "ps"):
            data[key] = tuple(data[key])
        data["couplings"] = tuple(tuple(c) for c in data.get("couplings", ((0, 0),)))
        return cls(**data)


def trial_seed(master_seed: int, model: str, d: int, p: float, trial: int) -> int:
    """63-bit seed of one trial; independent of the decoder and couplings."""
    ppb = int(round(p * 1e9))
    seq = np.random.SeedSequence([master_seed, MODELS.index(model), d, ppb, trial])
    hi, lo = seq.generate_state(2, np.uint32)
    return (int(hi) << 32 | int(lo)) >> 1


# -- trials -------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    d: int
    p: float
    model: str
    decoder: str
    Ja: int
    Jb: int
    trial: int
    seed: int
    feasible: bool
    flag: str
    z_failure: bool
    x_failure: bool
    failure: bool
    n_y_actual: int
    n_y_detected: int
    iterations_to_best: int
    defects: int
    energy: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, name) for name in self.columns()]


def run_trial(
    layout: CodeLayout,
    noise: NoiseSpec,
    decoder: str,
    seed: int,
    annealer: AnnealerConfig | None = None,
    J: int = DEFAULT_J,
    h: int = DEFAULT_H,
    y_coupling: tuple[int, int] = (0, 0),
    trial: int = 0,
    max_component: int = MAX_COMPONENT,
    large_components: str = "error",
) -> TrialRecord:
    """Sample, decode and score one trial.

    The noise stream is seeded by ``[seed, 0]`` and the annealer by
    ``[seed, 1]``.  A residual that still has a syndrome (infeasible
    annealing) or a matching over capacity counts as a failure and is
    flagged.
    """
    history = sample(layout, noise, np.random.SeedSequence([seed, 0]))
    syndrome = extract_syndrome(layout, history)
    annealer = annealer or AnnealerConfig()
    Ja, Jb = (y_coupling if decoder == "da_y_coupled" else (0, 0))
    common = dict(
        d=layout.d, p=float(noise.p), model=noise.model, decoder=decoder, Ja=int(Ja), Jb=int(Jb),
        trial=int(trial), seed=int(seed), defects=syndrome.num_defects(),
    )
    actual_y = history.events("z") & history.events("x")
    n_actual = int(actual_y.sum())
    try:
        outcome = decode(
            layout, syndrome, decoder,
            config=replace(annealer, seed=(seed, 1)),
            J=J, h=h, y_coupling=(Ja, Jb), max_component=max_component,
            large_components=large_components,
        )
    except MatchingCapacityError:
        return TrialRecord(
            **common, feasible=False, flag="capacity", z_failure=True, x_failure=True, failure=True,
            n_y_actual=n_actual, n_y_detected=0, iterations_to_best=0, energy=0,
        )
    corr = outcome.correction
    failures = residual_failures(layout, history, corr)
    flag = "" if all(v is not None for v in failures.values()) else "residual_syndrome"
    z_fail = failures["z"] is not False
    x_fail = failures["x"] is not False
    detected_y = corr.sectors["z"].data & corr.sectors["x"].data
    return TrialRecord(
        **common, feasible=bool(outcome.feasible), flag=flag,
        z_failure=z_fail, x_failure=x_fail, failure=z_fail or x_fail,
        n_y_actual=n_actual, n_y_detected=int((actual_y & detected_y).sum()),
        iterations_to_best=int(outcome.iterations_to_best), energy=int(outcome.energy),
    )


# -- experiments -------------------------------------------------------------

def _run_chunk(config: ExperimentConfig, d: int, p: float, couplings: tuple[int, int], trials: range):
    layout = build_layout(d)
    noise = config.noise(p)
    return [
        run_trial(
            layout, noise, config.decoder,
            trial_seed(config.master_seed, config.model, d, p, t),
            annealer=config.annealer, J=config.J, h=config.h, y_coupling=couplings,
            trial=t, max_component=config.max_component, large_components=config.large_components,
        )
        for t in trials
    ]


def replay_trial(config: ExperimentConfig, d: int, p: float, trial: int, couplings=(0, 0)) -> TrialRecord:
    """Re-run a single trial of ``config`` from its derived seed."""
    return _run_chunk(config, d, p, tuple(couplings), range(trial, trial + 1))[0]


def run_experiment(config: ExperimentConfig, jobs: int = 1, chunk_size: int = 50) -> list[TrialRecord]:
    """All trials of the grid, sorted by ``(d, p, Ja, Jb, trial)``.

    With ``jobs > 1`` chunks of trials run in worker processes; the output
    does not depend on ``jobs``.
    """
    if jobs < 1:
        raise ValueError("jobs must be positive")
    tasks = [
        (config, d, p, jj, range(lo, min(lo + chunk_size, config.trials)))
        for d, p, jj in config.points()
        for lo in range(0, config.trials, chunk_size)
    ]
    records: list[TrialRecord] = []
    if jobs == 1:
        for task in tasks:
            records.extend(_run_chunk(*task))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for chunk in pool.map(_run_chunk, *zip(*tasks)):
                records.extend(chunk)
    records.sort(key=lambda r: (r.d, r.p, r.Ja, r.Jb, r.trial))
    return records


# -- rates ---------------------------------------------------------------------

@dataclass(frozen=True)
class RateEstimate:
    """Failure fraction with its binomial standard error."""

    rate: float
    se: float
    failures: int
    trials: int


def _binomial(failures: int, trials: int) -> RateEstimate:
    rate = failures / trials
    return RateEstimate(rate, math.sqrt(rate * (1.0 - rate) / trials), failures, trials)


def logical_error_rate(records: Sequence[TrialRecord]) -> dict[str, RateEstimate]:
    """Rates for ``"z"``, ``"x"`` and ``"combined"`` (either sector failed)."""
    if not records:
        raise UndefinedRateError("no trials to rate")
    n = len(records)
    return {
        "z": _binomial(sum(r.z_failure for r in records), n),
        "x": _binomial(sum(r.x_failure for r in records), n),
        "combined": _binomial(sum(r.failure for r in records), n),
    }


def y_detection_rate(records: Sequence[TrialRecord]) -> float:
    """Mean of ``N_det / N_a`` over trials that contain at least one Y error."""
    ratios = [r.n_y_detected / r.n_y_actual for r in records if r.n_y_actual > 0]
    if not ratios:
        raise UndefinedRateError("no trial contains an actual Y error")
    return float(np.mean(ratios))


def group_records(records: Iterable[TrialRecord]) -> dict[tuple, list[TrialRecord]]:
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.d, r.p, r.decoder, r.Ja, r.Jb), []).append(r)
    return dict(sorted(groups.items()))


def summarize(records: Iterable[TrialRecord]) -> list[dict]:
    """One row per grid point; the first columns are :data:`SUMMARY_COLUMNS`."""
    rows = []
    for (d, p, decoder, Ja, Jb), group in group_records(records).items():
        rates = logical_error_rate(group)
        try:
            p_y = y_detection_rate(group)
        except UndefinedRateError:
            p_y = float("nan")
        rows.append({
            "d": d, "p": p,
            "P_L": rates["combined"].rate, "SE": rates["combined"].se,
            "decoder": decoder, "Ja": Ja, "Jb": Jb,
            "mean_iterations": float(np.mean([r.iterations_to_best for r in group])),
            "P_L_z": rates["z"].rate, "SE_z": rates["z"].se,
            "P_L_x": rates["x"].rate, "SE_x": rates["x"].se,
            "p_Y": p_y,
            "trials": len(group),
            "flagged": sum(1 for r in group if r.flag),
        })
    return rows


# -- fits ----------------------------------------------------------------------

def effective_distance(d: int) -> int:
    return (d + 1) // 2


@dataclass(frozen=True)
class FitResult:
    """``P_L = c1 * (p / p_th) ** (c2 * d_e)``."""

    c1: float
    c2: float
    p_th: float
    residual_norm: float

    def predict(self, d: int, p: float) -> float:
        return self.c1 * (p / self.p_th) ** (self.c2 * effective_distance(d))


def fit_threshold(points: Sequence[tuple[int, float, float, float]]) -> FitResult:
    """Fit ``(c1, c2, p_th)`` to ``(d, p, P_L, SE)`` points.

    Residuals are taken in ``log P_L`` and weighted by ``(P_L / SE)**2``,
    the inverse variance of ``log P_L``; if any usable point has ``SE <= 0``
    all points are weighted equally.  Points with ``P_L = 0`` are dropped.
    A weighted linear solve (the model is linear in ``log c1``, ``c2`` and
    ``c2 log p_th``) seeds a Nelder-Mead refinement.
    """
    pts = [(int(d), float(p), float(pl), float(se)) for d, p, pl, se in points if pl > 0]
    if len({d for d, *_ in pts}) < 2 or len({p for _, p, *_ in pts}) < 2 or len(pts) < 3:
        raise FitError("need at least two distances, two error rates and three nonzero points")
    de = np.array([effective_distance(d) for d, *_ in pts], dtype=float)
    logp = np.log([p for _, p, _, _ in pts])
    logy = np.log([pl for _, _, pl, _ in pts])
    se = np.array([s for *_, s in pts])
    pl = np.exp(logy)
    w = np.ones_like(logy) if np.any(se <= 0) else (pl / se) ** 2

    A = np.column_stack([np.ones_like(logp), de * logp, de])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], logy * sw, rcond=None)
    if abs(coef[1]) < 1e-12:
        raise FitError("error rate does not depend on p; threshold undefined")
    start = np.array([coef[0], coef[1], -coef[2] / coef[1]])

    def objective(theta):
        log_c1, c2, log_pth = theta
        r = logy - (log_c1 + c2 * de * (logp - log_pth))
        return float(np.sum(w * r * r))

    res = scipy_minimize(objective, start, method="Nelder-Mead",
                         options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000, "maxfev": 40000})
    theta = res.x if res.fun <= objective(start) else start
    c1, c2, p_th = math.exp(theta[0]), float(theta[1]), math.exp(theta[2])
    if not (0.0 < p_th < 1.0) or c2 <= 0:
        raise FitError(f"fit is unphysical (c2={c2:.4g}, p_th={p_th:.4g})")
    return FitResult(c1, c2, p_th, math.sqrt(objective(theta)))


@dataclass(frozen=True)
class ScalingFit:
    """Power law ``a * N**n`` against the exponential ``b * exp(k N)``.

    Both are least-squares lines through ``log(iterations)``, so their
    residual norms are directly comparable.
    """

    exponent: float
    log_prefactor: float
    residual_norm: float
    exponential_rate: float
    exponential_residual_norm: float

    @property
    def prefers_power_law(self) -> bool:
        return self.residual_norm < self.exponential_residual_norm


def fit_scaling(points: Sequence[tuple[float, float]]) -> ScalingFit:
    """OLS slope of ``log(iterations)`` against ``log(N_d)``.

    The caller picks the region: every point given is used.
    """
    if len(points) < 3:
        raise FitError("scaling fit needs at least three points")
    n = np.array([float(a) for a, _ in points])
    y = np.array([float(b) for _, b in points])
    if np.any(n <= 0) or np.any(y <= 0):
        raise FitError("sizes and iteration counts must be positive")
    if len(set(n.tolist())) < 2:
        raise FitError("need at least two distinct sizes")
    logy = np.log(y)

    def line(x):
        A = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
        return coef, float(np.linalg.norm(logy - A @ coef))

    (slope, icpt), power_res = line(np.log(n))
    (rate, _), exp_res = line(n)
    return ScalingFit(float(slope), float(icpt), power_res, float(rate), exp_res)


# -- output ----------------------------------------------------------------------

def write_trials_csv(records: Iterable[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# isingqec trials v{CSV_SCHEMA_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TrialRecord.columns())
        for r in records:
            writer.writerow([int(v) if isinstance(v, bool) else v for v in r.row()])


def read_trials_csv(path) -> list[TrialRecord]:
    types = {f.name: f.type for f in fields(TrialRecord)}
    out = []
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    for row in csv.DictReader(lines):
        values = {}
        for name, raw in row.items():
            kind = types[name]
            if kind == "bool":
                values[name] = raw == "1"
            elif kind == "int":
                values[name] = int(raw)
            elif kind == "float":
                values[name] = float(raw)
            else:
                values[name] = raw
        out.append(TrialRecord(**values))
    return out


def write_summary_csv(rows: Sequence[dict], path) -> None:
    columns = list(SUMMARY_COLUMNS) + [k for k in (rows[0] if rows else {}) if k not in SUMMARY_COLUMNS]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_summary_json(config: ExperimentConfig, rows: Sequence[dict], path, fit: FitResult | None = None) -> None:
    payload = {
        "schema_version": CSV_SCHEMA_VERSION,
        "config": config.to_dict(),
        "points": list(rows),
        "threshold_fit": asdict(fit) if fit is not None else None,
    }
    with open(path, "w") as fh:
        json.dump(_json_safe(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
