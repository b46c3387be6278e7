from functools import lru_cache

import numpy as np
import pytest

from isingqec import _backend
from isingqec.correction import implied_syndrome
from isingqec.mwpm import (
    BOUNDARY, MatchingCapacityError, build_matching_instance, check_graph, correction_from_matching,
    decode_mwpm, matching_weight, solve_matching,
)
from isingqec.lattice import build_layout
from isingqec.noise import NoiseSpec, extract_syndrome, history_from_events, sample


def brute_force_weight(boundary, weights) -> int:
    n = len(boundary)

    @lru_cache(maxsize=None)
    def best(mask):
        if mask == 0:
            return 0
        i = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << i)
        out = best(rest) + int(boundary[i])
        for j in range(i + 1, n):
            if rest >> j & 1:
                out = min(out, best(rest ^ (1 << j)) + int(weights[i, j]))
        return out

    return best((1 << n) - 1)


def _syndrome(layout, seed, p=0.03, rounds=3):
    return extract_syndrome(layout, sample(layout, NoiseSpec("phenomenological", p, rounds=rounds), seed))


def test_empty_instance(d3):
    syn = extract_syndrome(d3, history_from_events(d3, "phenomenological", 2))
    inst = build_matching_instance(d3, syn, "z")
    m = solve_matching(inst)
    assert m.pairs == [] and m.weight == 0
    corr, weight = decode_mwpm(d3, syn)
    assert weight == 0 and corr.num_events() == 0


def test_single_data_error_weight_one(d5):
    centre = d5.data_index(4, 4)
    syn = extract_syndrome(d5, history_from_events(d5, "code_capacity", 1, [(0, centre, "Z")]))
    corr, weight = decode_mwpm(d5, syn)
    assert weight == 1
    assert corr.sectors["z"].data_events() == [(0, centre)]


def test_single_readout_error_is_time_edge(d5):
    syn = extract_syndrome(d5, history_from_events(d5, "phenomenological", 3, meas_events=[(1, "z", 5)]))
    inst = build_matching_instance(d5, syn, "z")
    assert inst.defects == [(5, 1), (5, 2)]
    assert inst.weights[0, 1] == 1
    m = solve_matching(inst)
    assert m.pairs == [(0, 1)] and m.weight == 1
    sc = correction_from_matching(d5, inst, m)
    assert sc.meas_events() == [(1, 5)] and sc.data_events() == []


def test_boundary_distances_are_positive(d5):
    for sector in ("z", "x"):
        g = check_graph(d5, sector)
        assert g.boundary_dist.min() == 1
        for c in range(d5.num_checks(sector)):
            path = g.boundary_path_qubits(c)
            assert len(path) == g.boundary_dist[c]


def test_boundary_pairing_for_edge_defect(d5):
    g = check_graph(d5, "z")
    edge = int(np.argmin(g.boundary_dist))
    q = g.boundary_qubit[edge]
    syn = extract_syndrome(d5, history_from_events(d5, "code_capacity", 1, [(0, q, "Z")]))
    inst = build_matching_instance(d5, syn, "z")
    m = solve_matching(inst)
    assert m.pairs == [(0, BOUNDARY)] and m.weight == 1


@pytest.mark.parametrize("seed", range(40))
def test_matches_brute_force(d5, seed):
    syn = _syndrome(d5, seed)
    for sector in ("z", "x"):
        inst = build_matching_instance(d5, syn, sector)
        if len(inst.defects) > 10:
            continue
        m = solve_matching(inst)
        assert m.weight == brute_force_weight(inst.boundary, inst.weights)
        assert m.weight == matching_weight(inst, m.pairs)
        covered = sorted([i for i, _ in m.pairs] + [j for _, j in m.pairs if j != BOUNDARY])
        assert covered == list(range(len(inst.defects)))


@pytest.mark.parametrize("seed", range(20))
def test_correction_reproduces_syndrome(d5, seed):
    syn = _syndrome(d5, 100 + seed, p=0.05)
    corr, weight = decode_mwpm(d5, syn)
    assert corr.num_events() == weight
    for sector in ("z", "x"):
        assert np.array_equal(implied_syndrome(d5, sector, corr.sectors[sector]), syn.diff[sector])


def test_capacity_error(d5):
    syn = _syndrome(d5, 3, p=0.15)
    inst = build_matching_instance(d5, syn, "z")
    assert len(inst.defects) > 2
    with pytest.raises(MatchingCapacityError) as info:
        solve_matching(inst, max_component=1)
    assert info.value.cap == 1 and info.value.size > 1


@pytest.mark.skipif(_backend.BACKEND != "compiled", reason="compiled extension not built")
def test_subset_dp_backends_agree(d5):
    for seed in range(10):
        inst = build_matching_instance(d5, _syndrome(d5, seed, p=0.05), "z")
        a = solve_matching(inst, backend="compiled")
        b = solve_matching(inst, backend="python")
        assert a == b


@pytest.mark.parametrize("seed", range(15))
def test_blossom_fallback_matches_subset_dp(d5, seed):
    syn = _syndrome(d5, 200 + seed, p=0.05)
    for sector in ("z", "x"):
        inst = build_matching_instance(d5, syn, sector)
        exact = solve_matching(inst)
        forced = solve_matching(inst, max_component=1, large_components="blossom")
        assert forced.weight == exact.weight == matching_weight(inst, forced.pairs)
        covered = sorted([i for i, _ in forced.pairs] + [j for _, j in forced.pairs if j != BOUNDARY])
        assert covered == list(range(len(inst.defects)))


def test_blossom_fallback_decodes_large_clusters():
    layout = build_layout(7)
    syn = _syndrome(layout, 5, p=0.03, rounds=7)
    with pytest.raises(MatchingCapacityError):
        decode_mwpm(layout, syn, max_component=4)
    corr, weight = decode_mwpm(layout, syn, max_component=4, large_components="blossom")
    assert corr.num_events() == weight
    for sector in ("z", "x"):
        assert np.array_equal(implied_syndrome(layout, sector, corr.sectors[sector]), syn.diff[sector])


def test_unknown_large_component_policy(d3):
    syn = _syndrome(d3, 0)
    with pytest.raises(ValueError):
        solve_matching(build_matching_instance(d3, syn, "z"), large_components="guess")
