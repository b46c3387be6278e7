"""Decoding Hamiltonian over spacetime spins and its penalty-free QUBO form.

Spins sit on data qubits (one per qubit and syndrome layer) and on readouts
(one per check and gap between layers).  Every differenced syndrome bit ``b``
of check ``c`` at layer ``t`` contributes ``-J * b * prod(sigma)`` over the
data spins of ``c`` at ``t`` and the readout spins on either side of ``t``;
every spin carries a field ``-h * sigma``.  An optional ``-J' sigma sigma'``
term ties the Z- and X-sector spins of the same qubit and layer.

The QUBO uses binary ``x = (1 - sigma) / 2`` and replaces each constraint of
degree ``k`` by a quadratic in ``x`` and three auxiliary bits ``w``::

    J*b*[A*sum_{pairs} w w' + B*(sum w)(sum x) + C*sum_{pairs} x x'
         + D*sum x + E*sum w + F]

whose minimum over ``w`` equals the constraint term for every ``x``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .correction import Correction, SectorCorrection
from .lattice import SECTORS, CodeLayout
from .noise import SyndromeTensor

NUM_AUX = 3
DEFAULT_J = 1024
DEFAULT_H = 1
DEFAULT_GRID_BOUND = 16
_INT64_HEADROOM = 2**62


class CoefficientSearchError(RuntimeError):
    pass


class SpinIndex(NamedTuple):
    """Role of a variable.

    ``role`` is ``"data"`` (``a`` = qubit, ``b`` = layer), ``"meas"``
    (``a`` = check, ``b`` = gap) or ``"aux"`` (``a`` = constraint id,
    ``b`` = slot, ``sector`` of the constraint).
    """

    role: str
    sector: str
    a: int
    b: int


def spin_to_binary(sigma: int) -> int:
    if sigma not in (1, -1):
        raise ValueError(f"spin must be +1 or -1, got {sigma}")
    return (1 - sigma) // 2


def binary_to_spin(x: int) -> int:
    if x not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {x}")
    return 1 - 2 * x


# -- conversion coefficients ----------------------------------------------

def _constraint_value(coeffs, b, xs, ws) -> int:
    A, B, C, D, E, F = coeffs
    sx, sw = sum(xs), sum(ws)
    pw = sum(wi * wj for wi, wj in itertools.combinations(ws, 2))
    px = sum(xi * xj for xi, xj in itertools.combinations(xs, 2))
    return b * (A * pw + B * sw * sx + C * px + D * sx + E * sw + F)


def verify_conversion(k: int, b: int, coeffs: Sequence[int]) -> int:
    """Check the conversion exhaustively; return the number of cases checked.

    Every one of the ``2**(k+3)`` assignments is evaluated; for each data
    assignment the minimum over auxiliaries must equal ``-b * prod(sigma)``.
    Raises ``CoefficientSearchError`` on the first mismatch.
    """
    checked = 0
    for xs in itertools.product((0, 1), repeat=k):
        target = -b * (-1) ** sum(xs)
        best = None
        for ws in itertools.product((0, 1), repeat=NUM_AUX):
            value = _constraint_value(coeffs, b, xs, ws)
            best = value if best is None else min(best, value)
            checked += 1
        if best != target:
            raise CoefficientSearchError(
                f"coefficients {tuple(coeffs)} fail for k={k}, b={b}, x={xs}: {best} != {target}"
            )
    return checked


def _aux_occupancy(coeffs, k, b) -> int:
    A, B, C, D, E, F = coeffs
    total = 0
    for n in range(k + 1):
        vals = [b * (A * m * (m - 1) // 2 + B * m * n + C * n * (n - 1) // 2 + D * n + E * m + F)
                for m in range(NUM_AUX + 1)]
        total += vals.index(min(vals))
    return total


@lru_cache(maxsize=None)
def derive_conversion_coefficients(k: int, b: int, grid_bound: int = DEFAULT_GRID_BOUND) -> tuple[int, ...]:
    """Integer ``(A, B, C, D, E, F)`` for a degree-``k`` constraint with syndrome ``b``.

    The constraint only depends on ``n = sum(x)`` and ``m = sum(w)``, and the
    ``C, D, F`` terms do not involve ``m``.  For each ``(A, B, E)`` in the grid
    the remainder ``-b(-1)^n - min_m(...)`` must therefore be an integer
    quadratic in ``n``, which fixes ``C, D, F`` from ``n = 0, 1, 2``.  Among
    all valid tuples the one whose optimal auxiliaries are sparsest wins, then
    the smallest sum of magnitudes, then lexicographic order.  The winner is
    verified over every bit assignment before being returned.
    """
    if not 2 <= k <= 6:
        raise ValueError(f"constraint degree must lie in 2..6, got {k}")
    if b not in (1, -1):
        raise ValueError(f"syndrome value must be +1 or -1, got {b}")
    g = grid_bound
    r = np.arange(-g, g + 1)
    A, B, E = (a.ravel() for a in np.meshgrid(r, r, r, indexing="ij"))
    m = np.arange(NUM_AUX + 1)
    pairs_m = m * (m - 1) // 2
    n = np.arange(k + 1)
    target = -b * (-1) ** n
    inner = (A[:, None, None] * pairs_m[None, None, :]
             + B[:, None, None] * m[None, None, :] * n[None, :, None]
             + E[:, None, None] * m[None, None, :])
    rem = target[None, :] - np.min(b * inner, axis=2)
    F = b * rem[:, 0]
    D = b * rem[:, 1] - F
    C = b * rem[:, 2] - 2 * D - F
    pred = b * (C[:, None] * (n * (n - 1) // 2)[None, :] + D[:, None] * n[None, :] + F[:, None])
    ok = (np.abs(C) <= g) & (np.abs(D) <= g) & (np.abs(F) <= g) & np.all(pred == rem, axis=1)
    candidates = [
        (int(A[i]), int(B[i]), int(C[i]), int(D[i]), int(E[i]), int(F[i]))
        for i in np.nonzero(ok)[0]
    ]
    if not candidates:
        raise CoefficientSearchError(
            f"no conversion coefficients for k={k}, b={b} within |coef| <= {grid_bound}"
        )
    best = min(candidates, key=lambda t: (_aux_occupancy(t, k, b), sum(map(abs, t)), t))
    verify_conversion(k, b, best)
    return best


# -- problems -------------------------------------------------------------

@dataclass
class HoboProblem:
    """Higher-order spin Hamiltonian.

    ``constraints`` holds ``(b, spin ids)``; the field ``-h * sigma`` acts on
    every spin and ``couplings`` holds ``(i, j, J')`` for ``-J' s_i s_j``.
    """

    layout: CodeLayout
    layers: int
    sectors: tuple[str, ...]
    spins: list[SpinIndex]
    constraints: list[tuple[int, tuple[int, ...]]]
    couplings: list[tuple[int, int, int]]
    J: int
    h: int
    y_coupling: tuple[int, int] | None = None
    constraint_keys: list[tuple[str, int, int]] = field(default_factory=list)
    spin_ids: dict[SpinIndex, int] = field(default_factory=dict)

    @property
    def num_spins(self) -> int:
        return len(self.spins)


@dataclass
class QuboProblem:
    """``E(x) = sum_{i<j} q_ij x_i x_j + sum_i l_i x_i + c`` over integer coefficients.

    The first ``hobo.num_spins`` variables are the spins in the same order;
    auxiliaries follow, three per constraint.  ``rows/cols/quad`` hold the
    upper-triangular couplings.
    """

    num_vars: int
    rows: np.ndarray
    cols: np.ndarray
    quad: np.ndarray
    linear: np.ndarray
    constant: int
    variables: list[SpinIndex]
    constraints: list[tuple[int, tuple[int, ...]]]
    hobo: HoboProblem | None = None

    @property
    def num_spins(self) -> int:
        return self.hobo.num_spins if self.hobo is not None else self.num_vars

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric neighbour lists ``(indptr, indices, weights)``."""
        if getattr(self, "_csr", None) is None:
            r = np.concatenate([self.rows, self.cols])
            c = np.concatenate([self.cols, self.rows])
            w = np.concatenate([self.quad, self.quad])
            order = np.lexsort((c, r))
            r, c, w = r[order], c[order], w[order]
            indptr = np.zeros(self.num_vars + 1, dtype=np.int64)
            np.add.at(indptr, r + 1, 1)
            indptr = np.cumsum(indptr)
            self._csr = (indptr, c.astype(np.int64), w.astype(np.int64))
        return self._csr

    def hardware_form(self):
        """``(W, V, c)`` with ``E = -1/2 x^T W x - V^T x + c`` and zero diagonal."""
        from scipy import sparse

        W = sparse.coo_matrix(
            (np.concatenate([-self.quad, -self.quad]),
             (np.concatenate([self.rows, self.cols]), np.concatenate([self.cols, self.rows]))),
            shape=(self.num_vars, self.num_vars),
        ).tocsr()
        return W, -self.linear.copy(), self.constant


def compute_y_couplings(layout: CodeLayout, syndrome: SyndromeTensor, Ja: int, Jb: int) -> np.ndarray:
    """``J'`` per (layer, qubit): ``Ja + Jb`` next to defects of both sectors, else ``Ja``."""
    if Ja < 0 or Jb < 0:
        raise ValueError("Ja and Jb must be non-negative")
    near = {}
    for sector in SECTORS:
        defect = (syndrome.diff[sector] == -1).astype(np.int64)
        near[sector] = (defect @ layout.parity_matrix(sector).astype(np.int64)) > 0
    both = near["z"] & near["x"]
    return np.where(both, Ja + Jb, Ja).astype(np.int64)


def build_hobo(
    layout: CodeLayout,
    syndrome: SyndromeTensor,
    J: int = DEFAULT_J,
    h: int = DEFAULT_H,
    y_coupling: tuple[int, int] | None = None,
    sectors: Sequence[str] = SECTORS,
) -> HoboProblem:
    """Spacetime spin Hamiltonian for the differenced syndrome."""
    J, h = _as_int(J, "J"), _as_int(h, "h")
    if J <= 0 or h <= 0:
        raise ValueError("J and h must be positive")
    if syndrome.d != layout.d:
        raise ValueError("syndrome and layout disagree on the code distance")
    sectors = tuple(sectors)
    if y_coupling is not None:
        Ja, Jb = (_as_int(v, "Ja/Jb") for v in y_coupling)
        if set(sectors) != set(SECTORS):
            raise ValueError("Y coupling needs both sectors")
        if not J > 6 * (h + Ja + Jb):
            raise ValueError("J must exceed 6 * (h + Ja + Jb)")
        y_coupling = (Ja, Jb)
    layers = syndrome.layers
    spins: list[SpinIndex] = []
    for s in sectors:
        spins.extend(SpinIndex("data", s, q, t) for t in range(layers) for q in range(layout.num_data))
        spins.extend(SpinIndex("meas", s, c, g) for g in range(layers - 1) for c in range(layout.num_checks(s)))
    ids = {spin: i for i, spin in enumerate(spins)}
    constraints, keys = [], []
    for s in sectors:
        diff = syndrome.diff[s]
        if diff.shape != (layers, layout.num_checks(s)):
            raise ValueError(f"syndrome for sector {s} has shape {diff.shape}")
        for t in range(layers):
            for c, support in enumerate(layout.checks(s)):
                members = [ids[SpinIndex("data", s, q, t)] for q in support]
                if t >= 1:
                    members.append(ids[SpinIndex("meas", s, c, t - 1)])
                if t < layers - 1:
                    members.append(ids[SpinIndex("meas", s, c, t)])
                constraints.append((int(diff[t, c]), tuple(members)))
                keys.append((s, c, t))
    couplings = []
    if y_coupling is not None:
        jprime = compute_y_couplings(layout, syndrome, *y_coupling)
        for t in range(layers):
            for q in range(layout.num_data):
                if jprime[t, q]:
                    couplings.append((ids[SpinIndex("data", "z", q, t)],
                                      ids[SpinIndex("data", "x", q, t)], int(jprime[t, q])))
    return HoboProblem(
        layout=layout, layers=layers, sectors=sectors, spins=spins,
        constraints=constraints, couplings=couplings, J=J, h=h,
        y_coupling=y_coupling, constraint_keys=keys, spin_ids=ids,
    )


def _as_int(value, name) -> int:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ValueError(f"{name} must be an integer, got {value!r}")


def hobo_to_qubo(hobo: HoboProblem, grid_bound: int = DEFAULT_GRID_BOUND) -> QuboProblem:
    """Penalty-free quadratization with three auxiliary bits per constraint."""
    S = hobo.num_spins
    n_vars = S + NUM_AUX * len(hobo.constraints)
    quad: dict[tuple[int, int], int] = {}
    linear = np.zeros(n_vars, dtype=np.int64)
    const = 0

    def add(i, j, w):
        if w:
            key = (i, j) if i < j else (j, i)
            quad[key] = quad.get(key, 0) + w

    variables = list(hobo.spins)
    J = hobo.J
    for cid, (b, members) in enumerate(hobo.constraints):
        A, B, C, D, E, F = derive_conversion_coefficients(len(members), b, grid_bound)
        scale = J * b
        aux = [S + NUM_AUX * cid + k for k in range(NUM_AUX)]
        sector = hobo.spins[members[0]].sector
        variables.extend(SpinIndex("aux", sector, cid, k) for k in range(NUM_AUX))
        for wi, wj in itertools.combinations(aux, 2):
            add(wi, wj, A * scale)
        for w in aux:
            for x in members:
                add(w, x, B * scale)
            linear[w] += E * scale
        for xi, xj in itertools.combinations(members, 2):
            add(xi, xj, C * scale)
        for x in members:
            linear[x] += D * scale
        const += F * scale
    # -h * sigma = -h + 2h x
    linear[:S] += 2 * hobo.h
    const -= hobo.h * S
    # -J' sigma sigma' = -J' (1 - 2x - 2x' + 4 x x')
    for i, j, jp in hobo.couplings:
        const -= jp
        linear[i] += 2 * jp
        linear[j] += 2 * jp
        add(i, j, -4 * jp)
    keys = sorted(k for k, v in quad.items() if v)
    rows = np.array([k[0] for k in keys], dtype=np.int64)
    cols = np.array([k[1] for k in keys], dtype=np.int64)
    weights = np.array([quad[k] for k in keys], dtype=np.int64)
    bound = int(np.abs(weights).sum() + np.abs(linear).sum() + abs(const))
    if bound >= _INT64_HEADROOM:
        raise OverflowError("QUBO energies may not fit in 64-bit integers")
    return QuboProblem(
        num_vars=n_vars, rows=rows, cols=cols, quad=weights, linear=linear,
        constant=int(const), variables=variables, constraints=list(hobo.constraints), hobo=hobo,
    )


# -- evaluation -----------------------------------------------------------

def _bits(assignment, size: int, name: str) -> np.ndarray:
    x = np.asarray(assignment)
    if x.ndim != 1 or x.shape[0] < size:
        raise ValueError(f"{name} assignment must cover all {size} variables")
    if np.any((x != 0) & (x != 1)):
        raise ValueError("assignment must be binary")
    return x.astype(np.int64)


def evaluate(problem, assignment) -> int:
    """Exact integer energy of a binary assignment.

    A :class:`HoboProblem` reads the first ``num_spins`` bits (so a full QUBO
    assignment is accepted too).
    """
    if isinstance(problem, QuboProblem):
        x = _bits(assignment, problem.num_vars, "QUBO")
        if x.shape[0] != problem.num_vars:
            raise ValueError("QUBO assignment has the wrong length")
        e = int(problem.constant) + int(problem.linear @ x)
        if len(problem.quad):
            e += int((problem.quad * x[problem.rows] * x[problem.cols]).sum())
        return e
    if isinstance(problem, HoboProblem):
        x = _bits(assignment, problem.num_spins, "HOBO")[: problem.num_spins]
        sigma = 1 - 2 * x
        e = 0
        for b, members in problem.constraints:
            e -= problem.J * b * int(np.prod(sigma[list(members)]))
        e -= problem.h * int(sigma.sum())
        for i, j, jp in problem.couplings:
            e -= jp * int(sigma[i] * sigma[j])
        return e
    raise TypeError(f"cannot evaluate {type(problem).__name__}")


def optimal_auxiliaries(problem: QuboProblem, spin_bits) -> np.ndarray:
    """Complete spin bits with the auxiliary bits that minimise the QUBO energy."""
    S = problem.num_spins
    x = np.zeros(problem.num_vars, dtype=np.int64)
    x[:S] = _bits(spin_bits, S, "spin")[:S]
    for cid, (b, members) in enumerate(problem.constraints):
        k = len(members)
        coeffs = derive_conversion_coefficients(k, b)
        xs = tuple(int(v) for v in x[list(members)])
        best = min(itertools.product((0, 1), repeat=NUM_AUX),
                   key=lambda ws: (_constraint_value(coeffs, b, xs, ws), ws))
        x[S + NUM_AUX * cid: S + NUM_AUX * (cid + 1)] = best
    return x


def constraints_satisfied(problem, assignment) -> bool:
    x = np.asarray(assignment)
    for b, members in problem.constraints:
        parity = int(x[list(members)].sum()) % 2
        if parity != (1 if b == -1 else 0):
            return False
    return True


def interpret_solution(problem, assignment) -> Correction:
    """Detected events (spins with ``x = 1``) and whether every constraint holds."""
    hobo = problem.hobo if isinstance(problem, QuboProblem) else problem
    x = _bits(assignment, hobo.num_spins, "spin")
    layout = hobo.layout
    sectors = {s: SectorCorrection.empty(layout, s, hobo.layers) for s in hobo.sectors}
    for i in np.nonzero(x[: hobo.num_spins])[0]:
        spin = hobo.spins[i]
        if spin.role == "data":
            sectors[spin.sector].data[spin.b, spin.a] = 1
        else:
            sectors[spin.sector].meas[spin.b, spin.a] = 1
    return Correction(sectors=sectors, satisfied=constraints_satisfied(hobo, x))


# -- text export ------------------------------------------------------------

def format_qubo(problem: QuboProblem) -> str:
    """Sparse text form: ``num_vars num_terms constant`` then ``i j w`` lines.

    Linear terms are written as ``i i v``; indices are 0-based.
    """
    nz = np.nonzero(problem.linear)[0]
    lines = [f"{problem.num_vars} {len(problem.quad) + len(nz)} {problem.constant}"]
    lines.extend(f"{i} {i} {problem.linear[i]}" for i in nz)
    lines.extend(f"{i} {j} {w}" for i, j, w in zip(problem.rows, problem.cols, problem.quad))
    return "\n".join(lines) + "\n"


def parse_qubo(text: str) -> QuboProblem:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    n, m, c = (int(v) for v in lines[0].split())
    linear = np.zeros(n, dtype=np.int64)
    quad: dict[tuple[int, int], int] = {}
    for ln in lines[1 : 1 + m]:
        i, j, w = (int(v) for v in ln.split())
        if i == j:
            linear[i] += w
        else:
            key = (min(i, j), max(i, j))
            quad[key] = quad.get(key, 0) + w
    keys = sorted(quad)
    return QuboProblem(
        num_vars=n,
        rows=np.array([k[0] for k in keys], dtype=np.int64),
        cols=np.array([k[1] for k in keys], dtype=np.int64),
        quad=np.array([quad[k] for k in keys], dtype=np.int64),
        linear=linear, constant=c,
        variables=[SpinIndex("data", "", i, 0) for i in range(n)], constraints=[],
    )
