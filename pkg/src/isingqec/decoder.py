"""Decoders behind one interface: annealed Ising model or exact matching.

Every decoder returns a :class:`DecodeOutcome` whose correction has the same
shape, so scoring downstream does not care which one ran.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .annealer import AnnealerConfig, minimize
from .correction import Correction, SectorCorrection
from .hamiltonian import DEFAULT_H, DEFAULT_J, build_hobo, evaluate, hobo_to_qubo, interpret_solution
from .lattice import SECTORS, CodeLayout
from .mwpm import MAX_COMPONENT, decode_mwpm
from .noise import SyndromeTensor

DECODERS = ("da", "da_y_coupled", "mwpm")


@dataclass
class DecodeOutcome:
    correction: Correction
    feasible: bool
    energy: int
    iterations_to_best: int


def seed_entropy(seed) -> list[int]:
    """Seed as a list of non-negative ints, ready to extend for sub-streams."""
    if seed is None:
        raise ValueError("decoding needs an explicit seed")
    if isinstance(seed, int):
        return [seed]
    return [int(s) for s in seed]


def _anneal_problem(qubo, config: AnnealerConfig, seed):
    result = minimize(qubo, replace(config, seed=seed))
    return interpret_solution(qubo, result.best_assignment), result


def decode_da(
    layout: CodeLayout,
    syndrome: SyndromeTensor,
    config: AnnealerConfig | None = None,
    J: int = DEFAULT_J,
    h: int = DEFAULT_H,
    y_coupling: tuple[int, int] | None = None,
) -> DecodeOutcome:
    """Anneal the syndrome Hamiltonian.

    Without Y coupling the two sectors are independent problems, each with its
    own random stream; a sector without defects is decoded as "no events"
    without annealing, which is its exact ground state.  With Y coupling
    both sectors form a single problem.
    """
    config = config or AnnealerConfig()
    base = seed_entropy(config.seed)
    if y_coupling is not None:
        qubo = hobo_to_qubo(build_hobo(layout, syndrome, J, h, y_coupling))
        correction, result = _anneal_problem(qubo, config, base + [len(SECTORS)])
        return DecodeOutcome(correction, correction.satisfied, result.best_energy, result.iterations_to_best)

    sectors: dict[str, SectorCorrection] = {}
    feasible, energy, iterations = True, 0, 0
    for k, sector in enumerate(SECTORS):
        if syndrome.num_defects(sector) == 0:
            hobo = build_hobo(layout, syndrome, J, h, sectors=(sector,))
            sectors[sector] = SectorCorrection.empty(layout, sector, syndrome.layers)
            energy += evaluate(hobo, [0] * hobo.num_spins)
            continue
        qubo = hobo_to_qubo(build_hobo(layout, syndrome, J, h, sectors=(sector,)))
        correction, result = _anneal_problem(qubo, config, base + [k])
        sectors[sector] = correction.sectors[sector]
        feasible = feasible and correction.satisfied
        energy += result.best_energy
        iterations = max(iterations, result.iterations_to_best)
    return DecodeOutcome(Correction(sectors, feasible), feasible, energy, iterations)


def decode(
    layout: CodeLayout,
    syndrome: SyndromeTensor,
    decoder: str,
    config: AnnealerConfig | None = None,
    J: int = DEFAULT_J,
    h: int = DEFAULT_H,
    y_coupling: tuple[int, int] | None = None,
    max_component: int = MAX_COMPONENT,
    large_components: str = "error",
) -> DecodeOutcome:
    """Dispatch on ``decoder`` (one of :data:`DECODERS`).

    For matching the reported energy is the total matching weight and the
    iteration count is zero; ``max_component`` and ``large_components`` are
    passed to :func:`~isingqec.mwpm.solve_matching`.
    """
    if decoder == "mwpm":
        correction, weight = decode_mwpm(layout, syndrome, max_component, large_components)
        return DecodeOutcome(correction, True, weight, 0)
    if decoder == "da":
        return decode_da(layout, syndrome, config, J, h, None)
    if decoder == "da_y_coupled":
        return decode_da(layout, syndrome, config, J, h, y_coupling or (0, 0))
    raise ValueError(f"unknown decoder {decoder!r}; expected one of {', '.join(DECODERS)}")
