"""Error sampling and syndrome extraction for the three noise models.

Rounds and layers are 0-based in code.  A history with ``T`` noisy rounds
yields ``T + 1`` syndrome layers for the phenomenological and circuit-level
models (a noiseless readout closes the time boundary) and a single layer for
code-capacity noise, whose only round is already perfect.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lattice import SECTORS, CodeLayout, NUM_STEPS

MODELS = ("code_capacity", "phenomenological", "circuit_level")
CONVENTIONS = ("total", "per_pauli")
CIRCUIT_CHANNELS = frozenset({"idle", "cnot", "reset", "measure"})

PAULI_LABELS = "IXYZ"
# (x bit, z bit) for I, X, Y, Z
_PAULI_BITS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.uint8)


class SyndromeFormatError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model, physical error rate and number of noisy rounds.

    ``rounds=None`` means ``d`` rounds; code-capacity noise always uses one.
    ``convention`` decides whether ``p`` is the total probability of a
    depolarizing channel (``"total"``) or of each Pauli in it
    (``"per_pauli"``).  ``z_only`` keeps only the errors seen by the X
    checks (code-capacity and phenomenological models).
    """

    model: str
    p: float
    rounds: int | None = None
    convention: str = "total"
    z_only: bool = False
    idle_during_reset_and_measure: bool = True

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown noise model {self.model!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        if self.rounds is not None and self.rounds < 1:
            raise ValueError("rounds must be positive")
        if self.z_only and self.model == "circuit_level":
            raise ValueError("z_only is not defined for circuit-level noise")

    def num_rounds(self, d: int) -> int:
        if self.model == "code_capacity":
            return 1
        return d if self.rounds is None else self.rounds


@dataclass(frozen=True)
class ErrorHistory:
    """Sampled errors.

    ``frames[s][t]`` is the sector-``s`` component of the data-qubit Pauli
    frame when round ``t`` is read out; ``flips[s][t]`` marks outcome flips of
    the checks detecting sector ``s`` relative to an ideal readout of that
    frame.  ``final[s]`` is the frame after the last round.
    """

    model: str
    frames: dict[str, np.ndarray]
    flips: dict[str, np.ndarray]
    final: dict[str, np.ndarray]
    perfect_final_round: bool = True

    @property
    def rounds(self) -> int:
        return self.frames["z"].shape[0]

    def labels(self, t: int | None = None) -> str:
        """Pauli labels per data qubit for round ``t`` (final frame if None)."""
        if t is None:
            x, z = self.final["x"], self.final["z"]
        else:
            x, z = self.frames["x"][t], self.frames["z"][t]
        return "".join(PAULI_LABELS[_label_index(a, b)] for a, b in zip(x, z))

    def events(self, sector: str) -> np.ndarray:
        """Frame changes per syndrome layer, shape ``(layers, num_data)``."""
        frames = self.frames[sector]
        rows = [frames[0]]
        rows.extend(frames[t] ^ frames[t - 1] for t in range(1, self.rounds))
        if self.perfect_final_round:
            rows.append(self.final[sector] ^ frames[-1])
        return np.array(rows, dtype=np.uint8)


def _label_index(x: int, z: int) -> int:
    return {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(int(x), int(z))]


@dataclass(frozen=True)
class SyndromeTensor:
    """Raw and time-differenced check outcomes (+1/-1) per sector.

    Arrays have shape ``(layers, num_checks)``; ``diff[s][t] = raw[s][t] *
    raw[s][t-1]`` with an all-+1 layer before the first.
    """

    d: int
    raw: dict[str, np.ndarray]
    diff: dict[str, np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.diff is None:
            object.__setattr__(self, "diff", {s: time_difference(self.raw[s]) for s in SECTORS})

    @property
    def layers(self) -> int:
        return self.raw["z"].shape[0]

    def defects(self, sector: str) -> list[tuple[int, int]]:
        """``(check, layer)`` pairs where the differenced syndrome is -1."""
        layer, check = np.nonzero(self.diff[sector] == -1)
        return sorted(zip(check.tolist(), layer.tolist()), key=lambda cl: (cl[1], cl[0]))

    def num_defects(self, sector: str | None = None) -> int:
        sectors = SECTORS if sector is None else (sector,)
        return int(sum((self.diff[s] == -1).sum() for s in sectors))


def time_difference(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.int8)
    prev = np.vstack([np.ones((1, raw.shape[1]), dtype=np.int8), raw[:-1]])
    return (raw * prev).astype(np.int8)


def _bits_to_pm(bits: np.ndarray) -> np.ndarray:
    return np.where(bits % 2 == 1, -1, 1).astype(np.int8)


def _parity(layout: CodeLayout, sector: str, frame: np.ndarray) -> np.ndarray:
    return (layout.parity_matrix(sector).astype(np.int64) @ frame.astype(np.int64)) % 2


def _empty_history(layout: CodeLayout, model: str, rounds: int, perfect: bool):
    frames = {s: np.zeros((rounds, layout.num_data), dtype=np.uint8) for s in SECTORS}
    flips = {s: np.zeros((rounds, layout.num_checks(s)), dtype=np.uint8) for s in SECTORS}
    return frames, flips


def _freeze(model, frames, flips, final, perfect) -> ErrorHistory:
    for arr in (*frames.values(), *flips.values(), *final.values()):
        arr.setflags(write=False)
    return ErrorHistory(model=model, frames=frames, flips=flips, final=final,
                        perfect_final_round=perfect)


def sample_code_capacity(layout: CodeLayout, p: float, rng_seed=None, z_only: bool = False) -> ErrorHistory:
    """One perfect round of independent data errors (X, Y, Z each at p/3)."""
    rng = np.random.default_rng(rng_seed)
    u = rng.random(layout.num_data)
    if z_only:
        xbits = np.zeros(layout.num_data, dtype=np.uint8)
        zbits = (u < p).astype(np.uint8)
    else:
        # X in [0, p/3), Y in [p/3, 2p/3), Z in [2p/3, p)
        xbits = (u < 2 * p / 3).astype(np.uint8)
        zbits = ((u >= p / 3) & (u < p)).astype(np.uint8)
    frames, flips = _empty_history(layout, "code_capacity", 1, False)
    frames["x"][0] = xbits
    frames["z"][0] = zbits
    final = {"x": xbits.copy(), "z": zbits.copy()}
    return _freeze("code_capacity", frames, flips, final, False)


def sample_phenomenological(layout: CodeLayout, p: float, rounds: int, rng_seed=None,
                            z_only: bool = False) -> ErrorHistory:
    """Independent Z and X data errors per round plus outcome flips, all at ``p``.

    With ``z_only`` only Z data errors and X-check outcome flips occur.
    """
    if rounds < 1:
        raise ValueError("rounds must be positive")
    rng = np.random.default_rng(rng_seed)
    frames, flips = _empty_history(layout, "phenomenological", rounds, True)
    active = ("z",) if z_only else SECTORS
    current = {s: np.zeros(layout.num_data, dtype=np.uint8) for s in SECTORS}
    for t in range(rounds):
        for s in active:
            current[s] ^= (rng.random(layout.num_data) < p).astype(np.uint8)
        for s in SECTORS:
            frames[s][t] = current[s]
        for s in active:
            flips[s][t] = rng.random(layout.num_checks(s)) < p
    final = {s: current[s].copy() for s in SECTORS}
    return _freeze("phenomenological", frames, flips, final, True)


def history_from_events(
    layout: CodeLayout,
    model: str,
    rounds: int,
    data_events: Iterable[tuple[int, int, str]] = (),
    meas_events: Iterable[tuple[int, str, int]] = (),
    after_last: Iterable[tuple[int, str]] = (),
) -> ErrorHistory:
    """Build a history from explicit events.

    ``data_events`` holds ``(round, qubit, pauli)``: the Pauli hits before
    round ``round`` is read out.  ``meas_events`` holds ``(round, sector,
    check)`` outcome flips.  ``after_last`` holds ``(qubit, pauli)`` errors
    landing after the last noisy readout, seen only by the closing round.
    """
    if model not in MODELS:
        raise ValueError(f"unknown noise model {model!r}")
    perfect = model != "code_capacity"
    frames, flips = _empty_history(layout, model, rounds, perfect)
    delta = {s: np.zeros((rounds, layout.num_data), dtype=np.uint8) for s in SECTORS}
    for t, q, pauli in data_events:
        xb, zb = _PAULI_BITS[PAULI_LABELS.index(pauli)]
        delta["x"][t, q] ^= xb
        delta["z"][t, q] ^= zb
    for t, sector, check in meas_events:
        flips[sector][t, check] ^= 1
    for s in SECTORS:
        frames[s][:] = np.cumsum(delta[s], axis=0) % 2
    final = {s: frames[s][-1].copy() for s in SECTORS}
    for q, pauli in after_last:
        xb, zb = _PAULI_BITS[PAULI_LABELS.index(pauli)]
        final["x"][q] ^= xb
        final["z"][q] ^= zb
    return _freeze(model, frames, flips, final, perfect)


class _CircuitSchedule:
    """Gate lists per CNOT step, precomputed for vectorised propagation."""

    def __init__(self, layout: CodeLayout):
        self.steps = {}
        for step in range(2, 6):
            xa = [v for v, sched in enumerate(layout.x_schedule) for s, _ in sched if s == step]
            xd = [q for sched in layout.x_schedule for s, q in sched if s == step]
            za = [f for f, sched in enumerate(layout.z_schedule) for s, _ in sched if s == step]
            zd = [q for sched in layout.z_schedule for s, q in sched if s == step]
            busy = np.zeros(layout.num_data, dtype=bool)
            busy[xd] = True
            busy[zd] = True
            if len(set(xd) | set(zd)) != len(xd) + len(zd):
                raise ValueError(f"schedule step {step} reuses a data qubit")
            self.steps[step] = (
                np.array(xa, dtype=np.intp),
                np.array(xd, dtype=np.intp),
                np.array(za, dtype=np.intp),
                np.array(zd, dtype=np.intp),
                np.nonzero(~busy)[0],
            )


def sample_circuit_level(
    layout: CodeLayout,
    p: float,
    rounds: int,
    rng_seed=None,
    convention: str = "total",
    idle_during_reset_and_measure: bool = True,
    channels: Iterable[str] = CIRCUIT_CHANNELS,
    injections: Sequence[tuple[int, int, str, int, str]] = (),
) -> ErrorHistory:
    """Pauli-frame simulation of ``rounds`` six-step extraction cycles.

    ``injections`` are ``(round, step, target, index, pauli)`` with target in
    ``{"data", "xanc", "zanc"}``; each is applied at the end of that step.
    """
    if rounds < 1:
        raise ValueError("rounds must be positive")
    channels = frozenset(channels)
    unknown = channels - CIRCUIT_CHANNELS
    if unknown:
        raise ValueError(f"unknown noise channels {sorted(unknown)}")
    if convention == "total":
        p1, p2 = p, p
    elif convention == "per_pauli":
        p1, p2 = 3 * p, 15 * p
        if p2 > 1:
            raise ValueError("per-Pauli probabilities exceed 1 for the two-qubit channel")
    else:
        raise ValueError(f"unknown convention {convention!r}")
    rng = np.random.default_rng(rng_seed)
    sched = _circuit_schedule(layout)
    nd, nv, nf = layout.num_data, layout.num_x_checks, layout.num_z_checks
    dx = np.zeros(nd, dtype=np.uint8)
    dz = np.zeros(nd, dtype=np.uint8)
    frames, flips = _empty_history(layout, "circuit_level", rounds, True)
    by_step: dict[tuple[int, int], list] = {}
    for inj in injections:
        by_step.setdefault((inj[0], inj[1]), []).append(inj[2:])

    def idle(qubits):
        if "idle" not in channels or len(qubits) == 0:
            return
        hit = rng.random(len(qubits)) < p1
        which = rng.integers(1, 4, size=len(qubits))
        bits = _PAULI_BITS[which] * hit[:, None]
        dx[qubits] ^= bits[:, 0]
        dz[qubits] ^= bits[:, 1]

    def two_qubit(n):
        hit = rng.random(n) < p2
        which = rng.integers(1, 16, size=n)
        first = _PAULI_BITS[which // 4] * hit[:, None]
        second = _PAULI_BITS[which % 4] * hit[:, None]
        return first, second

    all_data = np.arange(nd)
    for t in range(rounds):
        ax_x = np.zeros(nv, dtype=np.uint8)
        ax_z = np.zeros(nv, dtype=np.uint8)
        az_x = np.zeros(nf, dtype=np.uint8)
        az_z = np.zeros(nf, dtype=np.uint8)
        anc = {"xanc": (ax_x, ax_z), "zanc": (az_x, az_z), "data": (dx, dz)}

        def inject(step):
            for target, idx, pauli in by_step.get((t, step), ()):
                xb, zb = _PAULI_BITS[PAULI_LABELS.index(pauli)]
                anc[target][0][idx] ^= xb
                anc[target][1][idx] ^= zb

        # step 1: reset |+> on X-ancillas, |0> on Z-ancillas
        if "reset" in channels:
            ax_z ^= (rng.random(nv) < p).astype(np.uint8)
            az_x ^= (rng.random(nf) < p).astype(np.uint8)
        if idle_during_reset_and_measure:
            idle(all_data)
        inject(1)
        for step in range(2, 6):
            xa, xd, za, zd, idle_q = sched.steps[step]
            # X-check CNOT: ancilla control, data target
            dx[xd] ^= ax_x[xa]
            ax_z[xa] ^= dz[xd]
            # Z-check CNOT: data control, ancilla target
            az_x[za] ^= dx[zd]
            dz[zd] ^= az_z[za]
            if "cnot" in channels:
                first, second = two_qubit(len(xa))
                ax_x[xa] ^= first[:, 0]
                ax_z[xa] ^= first[:, 1]
                dx[xd] ^= second[:, 0]
                dz[xd] ^= second[:, 1]
                first, second = two_qubit(len(za))
                dx[zd] ^= first[:, 0]
                dz[zd] ^= first[:, 1]
                az_x[za] ^= second[:, 0]
                az_z[za] ^= second[:, 1]
            idle(idle_q)
            inject(step)
        # step 6: X-basis readout sees Z, Z-basis readout sees X
        out_x = ax_z.copy()
        out_z = az_x.copy()
        if "measure" in channels:
            out_x ^= (rng.random(nv) < p).astype(np.uint8)
            out_z ^= (rng.random(nf) < p).astype(np.uint8)
        frames["x"][t] = dx
        frames["z"][t] = dz
        flips["z"][t] = out_x ^ _parity(layout, "z", dz)
        flips["x"][t] = out_z ^ _parity(layout, "x", dx)
        if idle_during_reset_and_measure:
            idle(all_data)
        inject(NUM_STEPS)
    final = {"x": dx.copy(), "z": dz.copy()}
    return _freeze("circuit_level", frames, flips, final, True)


_SCHEDULE_CACHE: dict[int, _CircuitSchedule] = {}


def _circuit_schedule(layout: CodeLayout) -> _CircuitSchedule:
    # layouts are a pure function of d
    cached = _SCHEDULE_CACHE.get(layout.d)
    if cached is None:
        cached = _SCHEDULE_CACHE[layout.d] = _CircuitSchedule(layout)
    return cached


def sample(layout: CodeLayout, spec: NoiseSpec, rng_seed=None) -> ErrorHistory:
    rounds = spec.num_rounds(layout.d)
    if spec.model == "code_capacity":
        return sample_code_capacity(layout, spec.p, rng_seed, z_only=spec.z_only)
    if spec.model == "phenomenological":
        return sample_phenomenological(layout, spec.p, rounds, rng_seed, z_only=spec.z_only)
    return sample_circuit_level(
        layout, spec.p, rounds, rng_seed,
        convention=spec.convention,
        idle_during_reset_and_measure=spec.idle_during_reset_and_measure,
    )


def extract_syndrome(layout: CodeLayout, history: ErrorHistory) -> SyndromeTensor:
    """Raw outcomes per round (plus the closing perfect round) and their time differences."""
    raw = {}
    for s in SECTORS:
        rows = [
            _parity(layout, s, history.frames[s][t]) ^ history.flips[s][t]
            for t in range(history.rounds)
        ]
        if history.perfect_final_round:
            rows.append(_parity(layout, s, history.final[s]))
        raw[s] = _bits_to_pm(np.array(rows))
    return SyndromeTensor(d=layout.d, raw=raw)


# -- text formats ----------------------------------------------------------

def _pm_string(row: np.ndarray) -> str:
    return "".join("-" if v == -1 else "+" for v in row)


def format_syndrome(syndrome: SyndromeTensor) -> str:
    """One raw layer per line, ``+`` for +1 and ``-`` for -1."""
    out = io.StringIO()
    out.write("# isingqec syndrome v1\n")
    out.write(f"d {syndrome.d}\n")
    out.write(f"layers {syndrome.layers}\n")
    for s in SECTORS:
        for row in syndrome.raw[s]:
            out.write(f"{s} {_pm_string(row)}\n")
    return out.getvalue()


def parse_syndrome(text: str) -> SyndromeTensor:
    """Inverse of :func:`format_syndrome`; errors carry the offending line."""
    from .lattice import build_layout

    d = layers = None
    rows: dict[str, list[np.ndarray]] = {s: [] for s in SECTORS}
    layout = None
    last_line = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        last_line = line_no
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, _, value = stripped.partition(" ")
        value = value.strip()
        if key in ("d", "layers"):
            try:
                number = int(value)
            except ValueError:
                raise SyndromeFormatError(line_no, f"expected an integer after {key!r}") from None
            if key == "d":
                if number < 2:
                    raise SyndromeFormatError(line_no, "code distance must be >= 2")
                d = number
                layout = build_layout(d)
            else:
                if number < 1:
                    raise SyndromeFormatError(line_no, "layers must be positive")
                layers = number
        elif key in SECTORS:
            if layout is None or layers is None:
                raise SyndromeFormatError(line_no, "'d' and 'layers' must precede syndrome rows")
            if set(value) - {"+", "-"}:
                raise SyndromeFormatError(line_no, "syndrome rows may only contain '+' and '-'")
            expected = layout.num_checks(key)
            if len(value) != expected:
                raise SyndromeFormatError(line_no, f"expected {expected} bits, found {len(value)}")
            if len(rows[key]) >= layers:
                raise SyndromeFormatError(line_no, f"more than {layers} layers for sector {key}")
            rows[key].append(np.array([-1 if ch == "-" else 1 for ch in value], dtype=np.int8))
        else:
            raise SyndromeFormatError(line_no, f"unknown record {key!r}")
    if layout is None or layers is None:
        raise SyndromeFormatError(last_line, "missing 'd' or 'layers' header")
    for s in SECTORS:
        if len(rows[s]) != layers:
            raise SyndromeFormatError(last_line, f"sector {s} has {len(rows[s])} of {layers} layers")
    return SyndromeTensor(d=d, raw={s: np.array(rows[s]) for s in SECTORS})


def format_history(history: ErrorHistory, d: int) -> str:
    out = io.StringIO()
    out.write("# isingqec history v1\n")
    out.write(f"model {history.model}\nd {d}\nrounds {history.rounds}\n")
    out.write(f"perfect_final {int(history.perfect_final_round)}\n")
    for t in range(history.rounds):
        fz = "".join(map(str, history.flips["z"][t]))
        fx = "".join(map(str, history.flips["x"][t]))
        out.write(f"round {t} {history.labels(t)} {fz} {fx}\n")
    out.write(f"final {history.labels()}\n")
    return out.getvalue()


def parse_history(text: str) -> tuple[ErrorHistory, int]:
    """Inverse of :func:`format_history`; returns ``(history, d)``."""
    header: dict[str, str] = {}
    rounds_rows = []
    final = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if parts[0] == "round":
            if len(parts) != 5:
                raise SyndromeFormatError(line_no, "round rows need: round t labels zflips xflips")
            rounds_rows.append((line_no, parts[2], parts[3], parts[4]))
        elif parts[0] == "final":
            if len(parts) != 2:
                raise SyndromeFormatError(line_no, "final row needs one label string")
            final = (line_no, parts[1])
        elif len(parts) == 2:
            header[parts[0]] = parts[1]
        else:
            raise SyndromeFormatError(line_no, f"cannot parse {stripped!r}")
    try:
        model = header["model"]
        d = int(header["d"])
        perfect = bool(int(header.get("perfect_final", "1")))
    except (KeyError, ValueError) as exc:
        raise SyndromeFormatError(0, f"bad or missing header field: {exc}") from None
    if final is None:
        raise SyndromeFormatError(0, "missing final row")

    def label_bits(line_no, labels):
        if set(labels) - set(PAULI_LABELS):
            raise SyndromeFormatError(line_no, "labels must be drawn from IXYZ")
        idx = np.array([PAULI_LABELS.index(ch) for ch in labels])
        return _PAULI_BITS[idx, 0], _PAULI_BITS[idx, 1]

    frames = {s: [] for s in SECTORS}
    flips = {s: [] for s in SECTORS}
    for line_no, labels, fz, fx in rounds_rows:
        xb, zb = label_bits(line_no, labels)
        frames["x"].append(xb)
        frames["z"].append(zb)
        flips["z"].append(np.array([int(ch) for ch in fz], dtype=np.uint8))
        flips["x"].append(np.array([int(ch) for ch in fx], dtype=np.uint8))
    xb, zb = label_bits(*final)
    hist = _freeze(
        model,
        {s: np.array(frames[s], dtype=np.uint8) for s in SECTORS},
        {s: np.array(flips[s], dtype=np.uint8) for s in SECTORS},
        {"x": xb.astype(np.uint8), "z": zb.astype(np.uint8)},
        perfect,
    )
    return hist, d
