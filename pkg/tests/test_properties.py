"""Randomised invariants checked with hypothesis."""

import itertools

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from isingqec.correction import implied_syndrome
from isingqec.hamiltonian import (
    DEFAULT_GRID_BOUND, NUM_AUX, _constraint_value, build_hobo, derive_conversion_coefficients, evaluate, hobo_to_qubo,
    optimal_auxiliaries,
)
from isingqec.harness import fit_scaling
from isingqec.lattice import build_layout
from isingqec.mwpm import decode_mwpm
from isingqec.noise import NoiseSpec, extract_syndrome, format_syndrome, parse_syndrome, sample

LAYOUTS = {d: build_layout(d) for d in (3, 5)}
seeds = st.integers(min_value=0, max_value=2**32 - 1)


@given(k=st.integers(2, 6), b=st.sampled_from([1, -1]), bits=st.lists(st.integers(0, 1), min_size=6, max_size=6))
def test_min_over_auxiliaries_is_product(k, b, bits):
    coeffs = derive_conversion_coefficients(k, b, DEFAULT_GRID_BOUND)
    xs = tuple(bits[:k])
    best = min(_constraint_value(coeffs, b, xs, ws) for ws in itertools.product((0, 1), repeat=NUM_AUX))
    spins = [1 - 2 * x for x in xs]
    assert best == -b * int(np.prod(spins))


@settings(max_examples=40, deadline=None)
@given(seed=seeds, d=st.sampled_from([3, 5]), model=st.sampled_from(["code_capacity", "phenomenological"]))
def test_quadratization_is_exact(seed, d, model):
    layout = LAYOUTS[d]
    syn = extract_syndrome(layout, sample(layout, NoiseSpec(model, 0.1, rounds=2), seed))
    hobo = build_hobo(layout, syn, J=64, h=1)
    qubo = hobo_to_qubo(hobo)
    spins = np.random.default_rng(seed).integers(0, 2, hobo.num_spins)
    assert evaluate(qubo, optimal_auxiliaries(qubo, spins)) == evaluate(hobo, spins)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, d=st.sampled_from([3, 5]), p=st.floats(0.0, 0.08),
       model=st.sampled_from(["code_capacity", "phenomenological"]))
def test_matching_never_exceeds_actual_events(seed, d, p, model):
    layout = LAYOUTS[d]
    hist = sample(layout, NoiseSpec(model, p, rounds=3), seed)
    syn = extract_syndrome(layout, hist)
    corr, weight = decode_mwpm(layout, syn)
    actual = sum(int(hist.events(s).sum()) + int(hist.flips[s].sum()) for s in ("z", "x"))
    assert weight <= actual
    for s in ("z", "x"):
        assert np.array_equal(implied_syndrome(layout, s, corr.sectors[s]), syn.diff[s])


@settings(max_examples=40, deadline=None)
@given(seed=seeds, d=st.sampled_from([3, 5]), p=st.floats(0.0, 0.3))
def test_syndrome_text_round_trip(seed, d, p):
    layout = LAYOUTS[d]
    syn = extract_syndrome(layout, sample(layout, NoiseSpec("phenomenological", p, rounds=2), seed))
    back = parse_syndrome(format_syndrome(syn))
    for s in ("z", "x"):
        assert np.array_equal(back.raw[s], syn.raw[s])
        assert np.array_equal(back.diff[s], syn.diff[s])


@given(exponent=st.floats(0.2, 4.0), prefactor=st.floats(0.1, 100.0))
def test_scaling_fit_recovers_any_power_law(exponent, prefactor):
    pts = [(n, prefactor * n**exponent) for n in (13, 41, 85, 145)]
    fit = fit_scaling(pts)
    assert abs(fit.exponent - exponent) < 1e-9
