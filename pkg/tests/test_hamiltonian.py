import itertools

import numpy as np
import pytest

from isingqec.hamiltonian import (
    NUM_AUX,
    binary_to_spin,
    build_hobo,
    compute_y_couplings,
    constraints_satisfied,
    derive_conversion_coefficients,
    evaluate,
    hobo_to_qubo,
    interpret_solution,
    optimal_auxiliaries,
    parse_qubo,
    format_qubo,
    spin_to_binary,
    verify_conversion,
)
from isingqec.noise import NoiseSpec, SyndromeTensor, extract_syndrome, history_from_events, sample


def _syndrome(layout, spec, seed):
    return extract_syndrome(layout, sample(layout, spec, seed))


def test_published_degree_six_tuples():
    assert derive_conversion_coefficients(6, 1) == (16, -8, 4, 2, 8, -1)
    assert derive_conversion_coefficients(6, -1) == (-16, 8, -4, 2, -16, -1)


@pytest.mark.parametrize("k", range(2, 7))
@pytest.mark.parametrize("b", [1, -1])
def test_every_degree_verifies_exhaustively(k, b):
    coeffs = derive_conversion_coefficients(k, b)
    assert verify_conversion(k, b, coeffs) == 2 ** (k + NUM_AUX)


def test_verification_rejects_wrong_tuple():
    with pytest.raises(Exception):
        verify_conversion(6, 1, (16, -8, 4, 2, 8, 0))


def test_bad_degree_or_sign():
    with pytest.raises(ValueError):
        derive_conversion_coefficients(7, 1)
    with pytest.raises(ValueError):
        derive_conversion_coefficients(4, 0)


def test_spin_binary_round_trip():
    assert spin_to_binary(1) == 0 and spin_to_binary(-1) == 1
    assert binary_to_spin(0) == 1 and binary_to_spin(1) == -1
    with pytest.raises(ValueError):
        spin_to_binary(0)


def test_code_capacity_d3_single_sector_size(d3):
    syn = _syndrome(d3, NoiseSpec("code_capacity", 0.0), 0)
    qubo = hobo_to_qubo(build_hobo(d3, syn, sectors=("z",)))
    assert qubo.num_spins == 13
    assert qubo.num_vars == 13 + 3 * 6 == 31


def test_constraint_members_for_measurement_layers(d3):
    syn = _syndrome(d3, NoiseSpec("phenomenological", 0.0, rounds=3), 0)
    hobo = build_hobo(d3, syn, sectors=("z",))
    sizes = {}
    for (s, c, t), (_, members) in zip(hobo.constraint_keys, hobo.constraints):
        sizes[(c, t)] = len(members)
    weight = {c: len(sup) for c, sup in enumerate(d3.checks("z"))}
    for (c, t), size in sizes.items():
        extra = 1 if t in (0, 3) else 2
        assert size == weight[c] + extra


@pytest.mark.parametrize("model,seed", [("code_capacity", 1), ("phenomenological", 2), ("phenomenological", 3)])
def test_qubo_with_best_auxiliaries_equals_hobo(d3, model, seed):
    syn = _syndrome(d3, NoiseSpec(model, 0.1, rounds=2), seed)
    hobo = build_hobo(d3, syn, J=64, h=1, y_coupling=(2, 3))
    qubo = hobo_to_qubo(hobo)
    rng = np.random.default_rng(seed)
    for _ in range(50):
        spins = rng.integers(0, 2, hobo.num_spins)
        full = optimal_auxiliaries(qubo, spins)
        assert evaluate(qubo, full) == evaluate(hobo, spins)
        # any other auxiliary choice is never lower
        other = full.copy()
        other[hobo.num_spins:] = rng.integers(0, 2, qubo.num_vars - hobo.num_spins)
        assert evaluate(qubo, other) >= evaluate(hobo, spins)


def test_hardware_form_matches_energy(d3):
    syn = _syndrome(d3, NoiseSpec("code_capacity", 0.2), 5)
    qubo = hobo_to_qubo(build_hobo(d3, syn))
    W, V, c = qubo.hardware_form()
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.integers(0, 2, qubo.num_vars)
        e = -0.5 * x @ (W @ x) - V @ x + c
        assert e == evaluate(qubo, x)
    assert W.diagonal().sum() == 0


def test_ground_state_by_enumeration_is_minimal_correction(d3):
    # one interior Z error: the single flip is the unique ground state
    q = d3.data_index(2, 2)
    h = history_from_events(d3, "code_capacity", 1, data_events=[(0, q, "Z")])
    hobo = build_hobo(d3, extract_syndrome(d3, h), sectors=("z",))
    energies = {}
    for bits in itertools.product((0, 1), repeat=hobo.num_spins):
        energies[bits] = evaluate(hobo, bits)
    best = min(energies.values())
    ground = [b for b, e in energies.items() if e == best]
    assert len(ground) == 1 and ground[0] == tuple(int(i == q) for i in range(13))


def test_y_couplings(d3):
    q = d3.data_index(2, 2)
    h = history_from_events(d3, "code_capacity", 1, data_events=[(0, q, "Y")])
    syn = extract_syndrome(d3, h)
    jp = compute_y_couplings(d3, syn, 9, 5)
    assert jp[0, q] == 14
    z_near = set(i for c in (c for c, _ in syn.defects("z")) for i in d3.checks("z")[c])
    x_near = set(i for c in (c for c, _ in syn.defects("x")) for i in d3.checks("x")[c])
    for i in range(d3.num_data):
        assert jp[0, i] == (14 if i in z_near & x_near else 9)
    hobo = build_hobo(d3, syn, y_coupling=(0, 0))
    assert hobo.couplings == []


def test_strength_condition_enforced(d3):
    syn = _syndrome(d3, NoiseSpec("code_capacity", 0.1), 0)
    with pytest.raises(ValueError):
        build_hobo(d3, syn, J=60, h=1, y_coupling=(5, 5))
    with pytest.raises(ValueError):
        build_hobo(d3, syn, J=1024.5)
    with pytest.raises(ValueError):
        build_hobo(d3, syn, y_coupling=(1, 1), sectors=("z",))


def test_interpret_solution_marks_events(d3):
    h = history_from_events(d3, "phenomenological", 2, meas_events=[(0, "z", 1)])
    syn = extract_syndrome(d3, h)
    hobo = build_hobo(d3, syn, sectors=("z",))
    x = np.zeros(hobo.num_spins, dtype=int)
    meas_id = hobo.spin_ids[next(s for s in hobo.spins if s.role == "meas" and s.a == 1 and s.b == 0)]
    x[meas_id] = 1
    corr = interpret_solution(hobo, x)
    assert corr.satisfied and constraints_satisfied(hobo, x)
    assert corr.sectors["z"].meas_events() == [(0, 1)]
    assert corr.sectors["z"].data_events() == []


def test_qubo_text_round_trip(d3):
    syn = _syndrome(d3, NoiseSpec("phenomenological", 0.1, rounds=2), 4)
    qubo = hobo_to_qubo(build_hobo(d3, syn))
    back = parse_qubo(format_qubo(qubo))
    x = np.random.default_rng(1).integers(0, 2, qubo.num_vars)
    assert evaluate(back, x) == evaluate(qubo, x)


def test_syndrome_distance_mismatch(d3, d5):
    syn = _syndrome(d5, NoiseSpec("code_capacity", 0.1), 0)
    with pytest.raises(ValueError):
        build_hobo(d3, syn)
