"""Detected error events, in the same shape for every decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import SECTORS, CodeLayout, logical_failure, sector_syndrome


@dataclass
class SectorCorrection:
    """Detected events of one sector.

    ``data[t, q]`` marks a data error on qubit ``q`` appearing in layer ``t``;
    ``meas[g, c]`` a readout error of check ``c`` between layers ``g`` and
    ``g + 1``.
    """

    data: np.ndarray
    meas: np.ndarray

    @classmethod
    def empty(cls, layout: CodeLayout, sector: str, layers: int) -> "SectorCorrection":
        return cls(
            data=np.zeros((layers, layout.num_data), dtype=np.uint8),
            meas=np.zeros((max(layers - 1, 0), layout.num_checks(sector)), dtype=np.uint8),
        )

    def folded(self) -> np.ndarray:
        """Net data flip after all layers."""
        return (self.data.sum(axis=0) % 2).astype(np.uint8)

    def num_events(self) -> int:
        return int(self.data.sum() + self.meas.sum())

    def data_events(self) -> list[tuple[int, int]]:
        t, q = np.nonzero(self.data)
        return list(zip(t.tolist(), q.tolist()))

    def meas_events(self) -> list[tuple[int, int]]:
        g, c = np.nonzero(self.meas)
        return list(zip(g.tolist(), c.tolist()))


@dataclass
class Correction:
    sectors: dict[str, SectorCorrection]
    satisfied: bool = True

    def num_events(self) -> int:
        return sum(sc.num_events() for sc in self.sectors.values())


def implied_syndrome(layout: CodeLayout, sector: str, sc: SectorCorrection) -> np.ndarray:
    """Differenced syndrome (+1/-1) produced by a set of detected events."""
    layers = sc.data.shape[0]
    bits = (layout.parity_matrix(sector).astype(np.int64) @ sc.data.T.astype(np.int64)).T % 2
    if layers > 1:
        bits[:-1] ^= sc.meas
        bits[1:] ^= sc.meas
    return np.where(bits % 2 == 1, -1, 1).astype(np.int8)


def residual_failures(layout: CodeLayout, history, correction: Correction) -> dict[str, bool | None]:
    """Per-sector logical failure of ``actual xor detected``.

    ``None`` marks a sector whose residual still has a syndrome.
    """
    out: dict[str, bool | None] = {}
    for sector in SECTORS:
        sc = correction.sectors.get(sector)
        detected = sc.folded() if sc is not None else np.zeros(layout.num_data, dtype=np.uint8)
        residual = history.final[sector] ^ detected
        if np.any(sector_syndrome(layout, sector, residual) == -1):
            out[sector] = None
            continue
        empty = np.zeros(layout.num_data, dtype=np.uint8)
        if sector == "z":
            out[sector] = logical_failure(layout, residual, empty)[0]
        else:
            out[sector] = logical_failure(layout, empty, residual)[1]
    return out
