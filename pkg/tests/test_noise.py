import numpy as np
import pytest

from isingqec.lattice import build_layout
from isingqec.noise import (
    NoiseSpec,
    SyndromeFormatError,
    extract_syndrome,
    format_history,
    format_syndrome,
    history_from_events,
    parse_history,
    parse_syndrome,
    sample,
    sample_circuit_level,
    sample_code_capacity,
    sample_phenomenological,
)


def _defects(syn, sector):
    return syn.defects(sector)


def test_p_zero_gives_trivial_syndromes(d3):
    for spec in (NoiseSpec("code_capacity", 0.0), NoiseSpec("phenomenological", 0.0),
                 NoiseSpec("circuit_level", 0.0)):
        syn = extract_syndrome(d3, sample(d3, spec, 1))
        assert syn.num_defects() == 0
        assert syn.layers == (1 if spec.model == "code_capacity" else 4)


def test_code_capacity_z_only_p_one(d3):
    h = sample_code_capacity(d3, 1.0, 0, z_only=True)
    assert h.final["z"].all() and not h.final["x"].any()


def test_code_capacity_mean_error_count():
    L = build_layout(6)
    counts = [np.count_nonzero(sample_code_capacity(L, 0.1, s).final["x"] | sample_code_capacity(L, 0.1, s).final["z"])
              for s in range(1000)]
    assert abs(np.mean(counts) - 6.1) < 0.3


def test_code_capacity_pauli_split(d5):
    x = z = y = 0
    for s in range(400):
        h = sample_code_capacity(d5, 0.3, s)
        x += int((h.final["x"] & ~h.final["z"]).sum())
        z += int((h.final["z"] & ~h.final["x"]).sum())
        y += int((h.final["x"] & h.final["z"]).sum())
    total = x + y + z
    for n in (x, y, z):
        assert abs(n / total - 1 / 3) < 0.03


def test_single_measurement_flip_gives_pair_in_time(d3):
    h = history_from_events(d3, "phenomenological", 3, meas_events=[(1, "z", 2)])
    syn = extract_syndrome(d3, h)
    assert _defects(syn, "z") == [(2, 1), (2, 2)]
    assert _defects(syn, "x") == []


def test_last_round_flip_exposed_by_closing_round(d3):
    h = history_from_events(d3, "phenomenological", 3, meas_events=[(2, "x", 0)])
    assert _defects(extract_syndrome(d3, h), "x") == [(0, 2), (0, 3)]


def test_single_data_z_persists_without_new_defects(d5):
    q = d5.data_index(4, 4)
    h = history_from_events(d5, "phenomenological", 5, data_events=[(2, q, "Z")])
    syn = extract_syndrome(d5, h)
    defects = _defects(syn, "z")
    assert len(defects) == 2 and all(t == 2 for _, t in defects)
    assert sorted(c for c, _ in defects) == sorted(d5.qubit_checks["z"][q])


def test_diff_telescopes_to_last_raw_layer(d3):
    for seed in range(20):
        syn = extract_syndrome(d3, sample(d3, NoiseSpec("phenomenological", 0.1, 3), seed))
        for s in ("z", "x"):
            assert (np.prod(syn.diff[s], axis=0) == syn.raw[s][-1]).all()


def test_sampling_is_deterministic(d5):
    spec = NoiseSpec("circuit_level", 0.01)
    a = extract_syndrome(d5, sample(d5, spec, 42))
    b = extract_syndrome(d5, sample(d5, spec, 42))
    for s in ("z", "x"):
        assert np.array_equal(a.raw[s], b.raw[s])


def test_circuit_data_z_matches_phenomenological(d5):
    q = d5.data_index(2, 2)
    circ = sample_circuit_level(d5, 0.0, 5, 0, injections=[(1, 6, "data", q, "Z")])
    phen = history_from_events(d5, "phenomenological", 5, data_events=[(2, q, "Z")])
    a, b = extract_syndrome(d5, circ), extract_syndrome(d5, phen)
    for s in ("z", "x"):
        assert np.array_equal(a.diff[s], b.diff[s])


def test_hook_error_on_x_ancilla(d5):
    # X on the X-check ancilla at (r, c) after step 3 spreads to E and S
    r, c = 2, 3
    v = d5.x_check_coords.index((r, c))
    h = sample_circuit_level(d5, 0.0, 5, 0, injections=[(1, 3, "xanc", v, "X")])
    syn = extract_syndrome(d5, h)
    face = d5.z_check_coords.index
    assert _defects(syn, "x") == sorted([(face((r - 1, c + 1)), 1), (face((r + 1, c - 1)), 2)])
    assert _defects(syn, "z") == []
    assert h.final["x"][d5.data_index(r, c + 1)] and h.final["x"][d5.data_index(r + 1, c)]


def test_measure_only_p_one_flips_every_outcome(d3):
    h = sample_circuit_level(d3, 1.0, 3, 0, channels={"measure"}, idle_during_reset_and_measure=False)
    for s in ("z", "x"):
        assert h.flips[s].all()
    syn = extract_syndrome(d3, h)
    assert (syn.raw["z"][:3] == -1).all() and (syn.raw["z"][3] == 1).all()


def test_circuit_depolarizing_rate_per_cnot():
    # every CNOT fault is one of 15 Paulis; measure the rate on one step's pairs
    L = build_layout(3)
    hits = 0
    n = 0
    for seed in range(200):
        h = sample_circuit_level(L, 0.3, 1, seed, channels={"cnot"}, idle_during_reset_and_measure=False)
        hits += int(h.final["x"].any() or h.final["z"].any())
        n += 1
    assert hits / n > 0.9


def test_z_only_phenomenological_leaves_x_sector_empty(d5):
    syn = extract_syndrome(d5, sample(d5, NoiseSpec("phenomenological", 0.2, z_only=True), 3))
    assert syn.num_defects("x") == 0 and syn.num_defects("z") > 0


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("bogus", 0.1)
    with pytest.raises(ValueError):
        NoiseSpec("code_capacity", 1.5)
    with pytest.raises(ValueError):
        NoiseSpec("circuit_level", 0.1, z_only=True)
    assert NoiseSpec("code_capacity", 0.1, rounds=7).num_rounds(5) == 1
    assert NoiseSpec("phenomenological", 0.1).num_rounds(5) == 5


def test_syndrome_text_round_trip(d5):
    syn = extract_syndrome(d5, sample(d5, NoiseSpec("phenomenological", 0.05), 9))
    back = parse_syndrome(format_syndrome(syn))
    for s in ("z", "x"):
        assert np.array_equal(back.raw[s], syn.raw[s])
        assert np.array_equal(back.diff[s], syn.diff[s])


def test_history_text_round_trip(d3):
    h = sample(d3, NoiseSpec("circuit_level", 0.05), 4)
    back, d = parse_history(format_history(h, 3))
    assert d == 3
    for s in ("z", "x"):
        assert np.array_equal(back.frames[s], h.frames[s])
        assert np.array_equal(back.flips[s], h.flips[s])
        assert np.array_equal(back.final[s], h.final[s])


@pytest.mark.parametrize("text,line", [
    ("# isingqec syndrome v1\nd 3\nlayers 1\nz ++++++\nx ++++\n", 5),
    ("# isingqec syndrome v1\nd x\n", 2),
    ("# isingqec syndrome v1\nd 3\nlayers 1\nz ++*+++\nx ++++++\n", 4),
])
def test_malformed_syndrome_reports_line(text, line):
    with pytest.raises(SyndromeFormatError) as err:
        parse_syndrome(text)
    assert err.value.line_no == line
