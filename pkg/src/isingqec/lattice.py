"""Open-boundary surface code geometry.

Sites live on a doubled grid of ``(row, col)`` coordinates with
``0 <= row, col <= 2d - 2``:

* data qubits at ``(even, even)`` (horizontal edges) and ``(odd, odd)``
  (vertical edges),
* X-type checks on vertices at ``(even, odd)``,
* Z-type checks on faces at ``(odd, even)``.

Every index set is row-major in these coordinates, so horizontal edge ``(r, c)``
of the primal lattice sits at ``(2r, 2c)`` and vertex ``(r, c)`` at
``(2r, 2c + 1)``.  X-checks touch the left/right (rough) boundary, Z-checks the
top/bottom one.

Error sectors are named after the error they track: sector ``"z"`` holds
Z errors, detected by X-checks; sector ``"x"`` holds X errors, detected by
Z-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

SECTORS = ("z", "x")

# Direction offsets on the doubled grid.
_OFFSETS = {"N": (-1, 0), "W": (0, -1), "E": (0, 1), "S": (1, 0)}

#: CNOT order per check type over steps 2..5.  X-checks act ancilla -> data,
#: Z-checks data -> ancilla.
X_CHECK_ORDER = ("N", "W", "E", "S")
Z_CHECK_ORDER = ("N", "E", "W", "S")

RESET_STEP = 1
MEASURE_STEP = 6
NUM_STEPS = 6


class ResidualSyndromeError(ValueError):
    """A residual error that should be syndrome-free flips some check."""


@dataclass(frozen=True)
class CodeLayout:
    """Distance-``d`` surface code with open boundaries.

    ``x_checks[v]`` / ``z_checks[f]`` are the data-qubit adjacencies of each
    check, and ``cnot_schedule[sector]`` lists ``(step, data qubit)`` pairs for
    every check of the sector.  Treat instances as immutable.
    """

    d: int
    data_coords: tuple[tuple[int, int], ...]
    x_check_coords: tuple[tuple[int, int], ...]
    z_check_coords: tuple[tuple[int, int], ...]
    x_checks: tuple[tuple[int, ...], ...]
    z_checks: tuple[tuple[int, ...], ...]
    logical_z_support: frozenset[int]
    logical_x_support: frozenset[int]
    x_schedule: tuple[tuple[tuple[int, int], ...], ...]
    z_schedule: tuple[tuple[tuple[int, int], ...], ...]
    _coord_index: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def num_data(self) -> int:
        return len(self.data_coords)

    @property
    def num_x_checks(self) -> int:
        return len(self.x_checks)

    @property
    def num_z_checks(self) -> int:
        return len(self.z_checks)

    @property
    def cnot_schedule(self) -> dict[str, tuple[tuple[tuple[int, int], ...], ...]]:
        return {"x_checks": self.x_schedule, "z_checks": self.z_schedule}

    def checks(self, sector: str) -> tuple[tuple[int, ...], ...]:
        """Check adjacencies that detect errors of ``sector``."""
        if sector == "z":
            return self.x_checks
        if sector == "x":
            return self.z_checks
        raise ValueError(f"unknown sector {sector!r}")

    def num_checks(self, sector: str) -> int:
        return len(self.checks(sector))

    def data_index(self, row: int, col: int) -> int:
        return self._coord_index[(row, col)]

    def parity_matrix(self, sector: str) -> np.ndarray:
        """Check-by-qubit incidence matrix (uint8) for ``sector``."""
        return self._parity[sector]

    @cached_property
    def _parity(self) -> dict[str, np.ndarray]:
        out = {}
        for sector in SECTORS:
            checks = self.checks(sector)
            mat = np.zeros((len(checks), self.num_data), dtype=np.uint8)
            for i, support in enumerate(checks):
                mat[i, list(support)] = 1
            mat.setflags(write=False)
            out[sector] = mat
        return out

    @cached_property
    def qubit_checks(self) -> dict[str, tuple[tuple[int, ...], ...]]:
        """For each sector, the checks adjacent to every data qubit."""
        out = {}
        for sector in SECTORS:
            per_qubit: list[list[int]] = [[] for _ in range(self.num_data)]
            for c, support in enumerate(self.checks(sector)):
                for q in support:
                    per_qubit[q].append(c)
            out[sector] = tuple(tuple(x) for x in per_qubit)
        return out

    def logical_support(self, sector: str) -> frozenset[int]:
        """Support of the logical operator an error of ``sector`` must avoid.

        A residual of sector ``"z"`` fails when it overlaps the logical X
        support an odd number of times, and vice versa.
        """
        return self.logical_x_support if sector == "z" else self.logical_z_support


def build_layout(d: int) -> CodeLayout:
    """Build the distance-``d`` layout (``d >= 2``)."""
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool):
        raise TypeError("code distance must be an integer")
    d = int(d)
    if d < 2:
        raise ValueError(f"code distance must be >= 2, got {d}")
    size = 2 * d - 1
    data, xc, zc = [], [], []
    for row in range(size):
        for col in range(size):
            if row % 2 == col % 2:
                data.append((row, col))
            elif row % 2 == 0:
                xc.append((row, col))
            else:
                zc.append((row, col))
    index = {rc: i for i, rc in enumerate(data)}

    def neighbours(coord, order):
        out = []
        for step, direction in enumerate(order, start=2):
            dr, dc = _OFFSETS[direction]
            q = index.get((coord[0] + dr, coord[1] + dc))
            if q is not None:
                out.append((step, q))
        return tuple(out)

    x_sched = tuple(neighbours(c, X_CHECK_ORDER) for c in xc)
    z_sched = tuple(neighbours(c, Z_CHECK_ORDER) for c in zc)
    x_checks = tuple(tuple(sorted(q for _, q in s)) for s in x_sched)
    z_checks = tuple(tuple(sorted(q for _, q in s)) for s in z_sched)
    logical_z = frozenset(index[(0, 2 * c)] for c in range(d))
    logical_x = frozenset(index[(2 * r, 0)] for r in range(d))
    return CodeLayout(
        d=d,
        data_coords=tuple(data),
        x_check_coords=tuple(xc),
        z_check_coords=tuple(zc),
        x_checks=x_checks,
        z_checks=z_checks,
        logical_z_support=logical_z,
        logical_x_support=logical_x,
        x_schedule=x_sched,
        z_schedule=z_sched,
        _coord_index=index,
    )


def as_mask(layout: CodeLayout, qubits) -> np.ndarray:
    """Turn a collection of qubit indices (or a boolean mask) into a uint8 mask."""
    if isinstance(qubits, np.ndarray) and qubits.shape == (layout.num_data,):
        return (qubits != 0).astype(np.uint8)
    mask = np.zeros(layout.num_data, dtype=np.uint8)
    for q in qubits:
        q = int(q)
        if not 0 <= q < layout.num_data:
            raise ValueError(f"qubit {q} outside the layout")
        mask[q] ^= 1
    return mask


def sector_syndrome(layout: CodeLayout, sector: str, errors) -> np.ndarray:
    """+1/-1 check outcomes for an error set of one sector."""
    parity = layout.parity_matrix(sector).astype(np.int64) @ as_mask(layout, errors)
    return np.where(parity % 2 == 1, -1, 1).astype(np.int8)


def stabilizer_syndrome(
    layout: CodeLayout, z_errors: Iterable[int], x_errors: Iterable[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x_check_bits, z_check_bits)`` as +1/-1 arrays."""
    return sector_syndrome(layout, "z", z_errors), sector_syndrome(layout, "x", x_errors)


def logical_failure(layout: CodeLayout, residual_z, residual_x) -> tuple[bool, bool]:
    """Whether syndrome-free residual errors act as logical operators.

    Raises ``ResidualSyndromeError`` when a residual still flips a check.
    """
    failures = []
    for sector, residual in (("z", residual_z), ("x", residual_x)):
        mask = as_mask(layout, residual)
        if np.any(sector_syndrome(layout, sector, mask) == -1):
            raise ResidualSyndromeError(f"residual {sector} error has a nonzero syndrome")
        support = list(layout.logical_support(sector))
        failures.append(bool(mask[support].sum() % 2))
    return failures[0], failures[1]


def dump_layout(layout: CodeLayout) -> str:
    """Plain-text description of the layout used for golden-file tests."""
    lines = [
        "# isingqec layout v1",
        f"d {layout.d}",
        f"num_data {layout.num_data}",
        f"num_x_checks {layout.num_x_checks}",
        f"num_z_checks {layout.num_z_checks}",
    ]
    for i, (r, c) in enumerate(layout.data_coords):
        lines.append(f"data {i} {r} {c}")
    for name, coords, checks, sched in (
        ("xcheck", layout.x_check_coords, layout.x_checks, layout.x_schedule),
        ("zcheck", layout.z_check_coords, layout.z_checks, layout.z_schedule),
    ):
        for i, ((r, c), support, steps) in enumerate(zip(coords, checks, sched)):
            qubits = ",".join(map(str, support))
            schedule = " ".join(f"{s}:{q}" for s, q in steps)
            lines.append(f"{name} {i} {r} {c} qubits {qubits} schedule {schedule}")
    lines.append("logical_z " + " ".join(map(str, sorted(layout.logical_z_support))))
    lines.append("logical_x " + " ".join(map(str, sorted(layout.logical_x_support))))
    return "\n".join(lines) + "\n"
